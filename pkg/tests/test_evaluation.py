import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reviewcast.evaluation import (
    EvaluationError,
    add_intercept,
    calibrate_linear,
    classification_metrics,
    format_aligned_table,
    format_ols_table,
    ols_fit,
    pearson_corr_matrix,
    plot_calibration,
    plot_correlation_heatmap,
    regression_metrics,
    significance_stars,
    threshold_by_rate,
    write_metrics_report,
    write_ols_report,
)


class TestRegressionMetrics:
    def test_perfect(self):
        m = regression_metrics([1.0, 2.0], [1.0, 2.0])
        assert m == {"mse": 0.0, "mae": 0.0}

    def test_arithmetic(self):
        m = regression_metrics([0.0, 0.0], [1.0, 3.0])
        assert m["mse"] == pytest.approx(5.0)
        assert m["mae"] == pytest.approx(2.0)

    def test_length_mismatch(self):
        with pytest.raises(EvaluationError):
            regression_metrics([1.0], [1.0, 2.0])


class TestClassificationMetrics:
    def test_perfect_predictor(self):
        m = classification_metrics([0.9, 0.1, 0.8], [True, False, True], 0.5)
        assert (m["acc"], m["precision"], m["recall"], m["f1"]) == (1.0, 1.0, 1.0, 1.0)

    def test_no_predicted_positives_flagged(self):
        m = classification_metrics([0.1, 0.2], [True, False], 0.5)
        assert m["precision"] == 0.0 and m["recall"] == 0.0
        assert m["zero_division"] == 1.0

    def test_hand_enumerated_case(self):
        # preds at t=.5: [1,0,1,0]; labels [1,0,0,1] -> TP=1 FP=1 FN=1 TN=1.
        m = classification_metrics([0.9, 0.2, 0.8, 0.4], [True, False, False, True], 0.5)
        assert m["acc"] == pytest.approx(0.5)
        assert m["precision"] == pytest.approx(0.5)
        assert m["recall"] == pytest.approx(0.5)
        assert m["f1"] == pytest.approx(0.5)

    @given(
        st.lists(st.floats(min_value=0, max_value=1), min_size=1, max_size=50),
        st.data(),
    )
    @settings(max_examples=50)
    def test_threshold_zero_gives_recall_one(self, probs, data):
        labels = data.draw(
            st.lists(st.booleans(), min_size=len(probs), max_size=len(probs))
        )
        m = classification_metrics(probs, labels, threshold=0.0)
        if any(labels):
            assert m["recall"] == 1.0


class TestPearson:
    def test_self_correlation(self):
        x = [1.0, 2.0, 4.0, 3.0]
        corr = pearson_corr_matrix({"a": x, "b": x})
        assert corr.lookup("a", "b") == pytest.approx(1.0)

    def test_anticorrelation(self):
        x = np.array([1.0, 2.0, 4.0, 3.0])
        corr = pearson_corr_matrix({"a": x, "b": -x})
        assert corr.lookup("a", "b") == pytest.approx(-1.0)

    def test_zero_variance_named(self):
        with pytest.raises(EvaluationError, match="flat"):
            pearson_corr_matrix({"ok": [1.0, 2.0, 3.0], "flat": [1.0, 1.0, 1.0]})

    def test_symmetric_unit_diagonal(self):
        rng = np.random.default_rng(0)
        series = {f"s{i}": rng.normal(size=20) for i in range(4)}
        corr = pearson_corr_matrix(series)
        assert np.allclose(corr.values, corr.values.T)
        assert np.allclose(np.diag(corr.values), 1.0)
        assert np.all(corr.values <= 1.0 + 1e-12) and np.all(corr.values >= -1.0 - 1e-12)


class TestOls:
    def test_exact_line(self):
        x = np.arange(1, 11, dtype=float)
        rep = ols_fit(add_intercept(x), 2.0 * x, names=["const", "x"])
        assert rep.coefficients["x"] == pytest.approx(2.0, abs=1e-10)
        assert rep.coefficients["const"] == pytest.approx(0.0, abs=1e-9)
        assert rep.r_squared == pytest.approx(1.0)

    def test_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            x = add_intercept(rng.normal(size=(50, 2)))
            y = rng.normal(size=50)
            rep = ols_fit(x, y)
            beta_oracle = np.linalg.inv(x.T @ x) @ x.T @ y
            got = np.array(list(rep.coefficients.values()))
            assert np.allclose(got, beta_oracle, atol=1e-8)

    def test_standard_errors_and_pvalues_against_closed_form(self):
        rng = np.random.default_rng(2)
        x = add_intercept(rng.normal(size=(40, 2)))
        y = x @ np.array([1.0, 0.5, 0.0]) + rng.normal(scale=0.3, size=40)
        rep = ols_fit(x, y)
        beta = np.linalg.inv(x.T @ x) @ x.T @ y
        resid = y - x @ beta
        sigma2 = resid @ resid / (40 - 3)
        se_oracle = np.sqrt(np.diag(sigma2 * np.linalg.inv(x.T @ x)))
        assert np.allclose(list(rep.std_errors.values()), se_oracle, atol=1e-10)
        from scipy import stats

        p_oracle = 2 * stats.t.sf(np.abs(beta / se_oracle), df=37)
        assert np.allclose(list(rep.p_values.values()), p_oracle, atol=1e-12)

    def test_rank_deficiency_error(self):
        x = np.ones((10, 2))  # duplicate constant columns
        with pytest.raises(EvaluationError):
            ols_fit(x, np.arange(10.0))

    def test_rows_must_exceed_columns(self):
        with pytest.raises(EvaluationError):
            ols_fit(np.ones((2, 2)), [1.0, 2.0])

    def test_stars(self):
        assert significance_stars(0.0005) == "***"
        assert significance_stars(0.005) == "**"
        assert significance_stars(0.03) == "*"
        assert significance_stars(0.2) == ""


class TestCalibrateLinear:
    def test_reference_case(self):
        # Oracle: population std of [1,2,3] is sqrt(2/3); shift to mean 6 scale 1.
        out = calibrate_linear([1.0, 2.0, 3.0], target_mean=6.0, target_std=1.0)
        sigma = np.sqrt(2.0 / 3.0)
        oracle = [(v - 2.0) / sigma + 6.0 for v in [1.0, 2.0, 3.0]]
        assert out == pytest.approx(oracle, abs=1e-12)
        assert out == pytest.approx([4.7753, 6.0, 7.2247], abs=1e-4)

    def test_fixed_point(self):
        scores = [4.0, 6.0, 8.0]
        mu, sigma = float(np.mean(scores)), float(np.std(scores))
        out = calibrate_linear(scores, target_mean=mu, target_std=sigma)
        assert out == pytest.approx(scores, abs=1e-12)

    def test_constant_input_error(self):
        with pytest.raises(EvaluationError):
            calibrate_linear([2.0, 2.0, 2.0], 0.0, 1.0)

    @given(
        st.lists(st.floats(min_value=-50, max_value=50), min_size=2, max_size=40),
        st.floats(min_value=-5, max_value=5),
        st.floats(min_value=0.1, max_value=4),
    )
    @settings(max_examples=80)
    def test_targets_hit_exactly(self, scores, mu, sigma):
        if np.std(scores) == 0:
            return
        out = np.array(calibrate_linear(scores, mu, sigma))
        assert abs(float(np.mean(out)) - mu) < 1e-9
        assert abs(float(np.std(out)) - sigma) < 1e-9


class TestThresholdByRate:
    def test_quantile_rule(self):
        assert threshold_by_rate([0.1, 0.2, 0.3, 0.4], 0.25) == [False, False, False, True]

    def test_half_rate(self):
        out = threshold_by_rate([0.5, 0.9, 0.1, 0.7], 0.5)
        assert sum(out) == 2
        assert out == [False, True, False, True]

    def test_all_equal_stable_order(self):
        out = threshold_by_rate([0.5, 0.5, 0.5, 0.5], 0.25)
        assert out == [True, False, False, False]

    def test_empty_error(self):
        with pytest.raises(EvaluationError):
            threshold_by_rate([], 0.5)

    @given(
        st.lists(st.floats(min_value=0, max_value=1), min_size=1, max_size=60),
        st.floats(min_value=0.05, max_value=0.95),
    )
    @settings(max_examples=100)
    def test_fraction_within_tolerance(self, probs, rate):
        out = threshold_by_rate(probs, rate)
        assert abs(sum(out) / len(probs) - rate) <= 1.0 / len(probs) + 1e-12


class TestReports:
    def test_aligned_table_contains_all_cells(self):
        rows = {"sa1": {"mse": 1.013, "mae": 0.789}, "r1": {"mse": 1.018, "mae": 0.794}}
        text = format_aligned_table(rows)
        assert "sa1" in text and "1.0130" in text and "mae" in text

    def test_write_metrics_report(self, tmp_path):
        rows = {"avg": {"mse": 1.233}}
        write_metrics_report(rows, tmp_path / "t.txt", tmp_path / "t.json")
        assert json.loads((tmp_path / "t.json").read_text())["avg"]["mse"] == 1.233
        assert "avg" in (tmp_path / "t.txt").read_text()

    def test_ols_report_files(self, tmp_path):
        x = add_intercept(np.arange(1, 21, dtype=float))
        rep = ols_fit(x, 2.0 * np.arange(1, 21) + np.random.default_rng(0).normal(size=20))
        write_ols_report({"m1": rep}, tmp_path / "ols.txt", tmp_path / "ols.json")
        text = (tmp_path / "ols.txt").read_text()
        assert "r_squared" in text and "const" in text
        payload = json.loads((tmp_path / "ols.json").read_text())
        assert "coefficients" in payload["m1"]

    def test_ols_table_marks_absent_coefficients(self):
        x = add_intercept(np.arange(1, 21, dtype=float))
        y = 2.0 * np.arange(1, 21, dtype=float)
        r1 = ols_fit(x, y, names=["const", "author"])
        r2 = ols_fit(x, y, names=["const", "idea"])
        text = format_ols_table({"m1": r1, "m2": r2})
        assert "author" in text and "idea" in text and "-" in text

    def test_plots_write_files(self, tmp_path):
        rng = np.random.default_rng(3)
        series = {f"s{i}": rng.normal(size=12) for i in range(3)}
        corr = pearson_corr_matrix(series)
        heat = tmp_path / "corr.png"
        plot_correlation_heatmap(corr, heat)
        assert heat.stat().st_size > 0
        cal = tmp_path / "cal.png"
        raw = rng.normal(size=30)
        plot_calibration(raw, calibrate_linear(raw, 6, 1), rng.normal(6, 1, size=30), cal)
        assert cal.stat().st_size > 0
