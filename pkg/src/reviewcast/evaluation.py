"""Metrics, correlation matrices, OLS significance reports, and score calibration."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import stats


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class OlsReport:
    coefficients: dict[str, float]
    std_errors: dict[str, float]
    p_values: dict[str, float]
    stars: dict[str, str]
    r_squared: float


@dataclass(frozen=True)
class CorrelationMatrix:
    names: tuple[str, ...]
    values: np.ndarray  # (k, k), unit diagonal, symmetric

    def lookup(self, a: str, b: str) -> float:
        return float(self.values[self.names.index(a), self.names.index(b)])


def regression_metrics(preds: Sequence[float], labels: Sequence[float]) -> dict[str, float]:
    p = np.asarray(preds, dtype=float)
    y = np.asarray(labels, dtype=float)
    if p.shape != y.shape or p.size == 0:
        raise EvaluationError(f"length mismatch: {p.shape} vs {y.shape}")
    err = p - y
    return {"mse": float(np.mean(err**2)), "mae": float(np.mean(np.abs(err)))}


def classification_metrics(
    probs: Sequence[float], labels: Sequence[bool], threshold: float = 0.5
) -> dict[str, float]:
    """Accuracy / precision / recall / F1 of the positive class.

    Zero-division cases (no predicted positives, no true positives) score 0
    and raise the ``zero_division`` flag in the returned map.
    """
    p = np.asarray(probs, dtype=float)
    y = np.asarray(labels, dtype=bool)
    if p.shape != y.shape or p.size == 0:
        raise EvaluationError(f"length mismatch: {p.shape} vs {y.shape}")
    pred = p >= threshold
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    fn = int(np.sum(~pred & y))
    tn = int(np.sum(~pred & ~y))
    flagged = False
    if tp + fp == 0:
        precision, flagged = 0.0, True
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall, flagged = 0.0, True
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0.0:
        f1, flagged = 0.0, True
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return {
        "acc": (tp + tn) / p.size,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "zero_division": float(flagged),
    }


def pearson_corr_matrix(series: Mapping[str, Sequence[float]]) -> CorrelationMatrix:
    names = tuple(series.keys())
    arrays = [np.asarray(series[n], dtype=float) for n in names]
    length = arrays[0].size
    if length < 3:
        raise EvaluationError("series must have length >= 3")
    for name, arr in zip(names, arrays):
        if arr.size != length:
            raise EvaluationError(f"series {name!r} length {arr.size} != {length}")
        if np.std(arr) == 0.0:
            raise EvaluationError(f"series {name!r} has zero variance")
    mat = np.corrcoef(np.stack(arrays))
    mat = (mat + mat.T) / 2.0
    np.fill_diagonal(mat, 1.0)
    return CorrelationMatrix(names=names, values=mat)


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def add_intercept(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return np.hstack([np.ones((x.shape[0], 1)), x])


def ols_fit(x: np.ndarray, y: Sequence[float], names: Sequence[str] | None = None) -> OlsReport:
    """Classical OLS on a design matrix that already contains its intercept column.

    Coefficients come from a QR-based least-squares solve; standard errors are
    the homoskedastic sigma^2 (X'X)^-1 diagonal with two-sided t-test p-values.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = x.shape
    if n <= k:
        raise EvaluationError(f"need rows > columns, got {n} x {k}")
    if np.linalg.matrix_rank(x) < k:
        raise EvaluationError("design matrix is rank deficient")
    if names is None:
        names = ["const"] + [f"x{i}" for i in range(1, k)]
    if len(names) != k:
        raise EvaluationError(f"{len(names)} names for {k} columns")
    beta, _, _, _ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ beta
    rss = float(resid @ resid)
    sigma2 = rss / (n - k)
    cov = sigma2 * np.linalg.inv(x.T @ x)
    se = np.sqrt(np.diag(cov))
    tvals = beta / se
    pvals = 2.0 * stats.t.sf(np.abs(tvals), df=n - k)
    tss = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - rss / tss if tss > 0 else 1.0
    return OlsReport(
        coefficients={nm: float(b) for nm, b in zip(names, beta)},
        std_errors={nm: float(s) for nm, s in zip(names, se)},
        p_values={nm: float(p) for nm, p in zip(names, pvals)},
        stars={nm: significance_stars(float(p)) for nm, p in zip(names, pvals)},
        r_squared=float(r_squared),
    )


def calibrate_linear(
    scores: Sequence[float], target_mean: float, target_std: float
) -> list[float]:
    """Shift/scale scores so their population mean and std match the targets."""
    z = np.asarray(scores, dtype=float)
    if z.size < 2:
        raise EvaluationError("need at least two scores")
    if target_std <= 0:
        raise EvaluationError("target_std must be positive")
    std = float(np.std(z))  # population std; makes already-calibrated input a fixed point
    if std == 0.0:
        raise EvaluationError("input scores have zero spread")
    out = (z - z.mean()) * (target_std / std) + target_mean
    return [float(v) for v in out]


def threshold_by_rate(probs: Sequence[float], rate: float) -> list[bool]:
    """Mark the top round(rate*N) scores positive, the (1-rate)-quantile cut.

    The positive fraction is within 1/N of ``rate``; ties at the cut keep
    stable input order (earlier items win).
    """
    p = np.asarray(probs, dtype=float)
    if p.size == 0:
        raise EvaluationError("empty input")
    if not 0.0 < rate < 1.0:
        raise EvaluationError(f"rate {rate} outside (0, 1)")
    k = int(round(rate * p.size))
    order = np.argsort(-p, kind="stable")
    out = [False] * p.size
    for idx in order[:k]:
        out[int(idx)] = True
    return out


def format_aligned_table(rows: Mapping[str, Mapping[str, float]], precision: int = 4) -> str:
    """Aligned text table: one row per model, one column per metric."""
    columns: list[str] = []
    for metrics in rows.values():
        for key in metrics:
            if key not in columns:
                columns.append(key)
    name_width = max([len("model")] + [len(n) for n in rows])
    cells = {
        name: {k: f"{v:.{precision}f}" for k, v in metrics.items()} for name, metrics in rows.items()
    }
    widths = {
        c: max([len(c)] + [len(cells[n].get(c, "")) for n in rows]) for c in columns
    }
    lines = ["model".ljust(name_width) + "  " + "  ".join(c.rjust(widths[c]) for c in columns)]
    for name in rows:
        line = name.ljust(name_width) + "  " + "  ".join(
            cells[name].get(c, "-").rjust(widths[c]) for c in columns
        )
        lines.append(line)
    return "\n".join(lines) + "\n"


def write_metrics_report(
    rows: Mapping[str, Mapping[str, float]], text_path: str | Path, json_path: str | Path
) -> None:
    Path(text_path).write_text(format_aligned_table(rows), encoding="utf-8")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump({name: dict(metrics) for name, metrics in rows.items()}, fh, indent=2)
        fh.write("\n")


def format_ols_table(reports: Mapping[str, OlsReport]) -> str:
    """Stacked coefficient/(std error) rows, one column per fitted model."""
    model_names = list(reports.keys())
    coef_names: list[str] = []
    for rep in reports.values():
        for nm in rep.coefficients:
            if nm not in coef_names:
                coef_names.append(nm)
    width = max(12, max(len(m) for m in model_names) + 2)
    lines = ["".ljust(14) + "".join(m.rjust(width) for m in model_names)]
    for nm in coef_names:
        coef_cells, se_cells = [], []
        for m in model_names:
            rep = reports[m]
            if nm in rep.coefficients:
                coef_cells.append(f"{rep.coefficients[nm]:.3f}{rep.stars[nm]}".rjust(width))
                se_cells.append(f"({rep.std_errors[nm]:.3f})".rjust(width))
            else:
                coef_cells.append("-".rjust(width))
                se_cells.append("".rjust(width))
        lines.append(nm.ljust(14) + "".join(coef_cells))
        lines.append("".ljust(14) + "".join(se_cells))
    lines.append(
        "r_squared".ljust(14)
        + "".join(f"{reports[m].r_squared:.3f}".rjust(width) for m in model_names)
    )
    return "\n".join(lines) + "\n"


def write_ols_report(
    reports: Mapping[str, OlsReport], text_path: str | Path, json_path: str | Path
) -> None:
    Path(text_path).write_text(format_ols_table(reports), encoding="utf-8")
    payload = {
        name: {
            "coefficients": rep.coefficients,
            "std_errors": rep.std_errors,
            "p_values": rep.p_values,
            "stars": rep.stars,
            "r_squared": rep.r_squared,
        }
        for name, rep in reports.items()
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def plot_correlation_heatmap(corr: CorrelationMatrix, path: str | Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    k = len(corr.names)
    fig, ax = plt.subplots(figsize=(max(4, k * 0.7), max(3.5, k * 0.6)))
    im = ax.imshow(corr.values, vmin=-1, vmax=1, cmap="coolwarm")
    ax.set_xticks(range(k), corr.names, rotation=45, ha="right")
    ax.set_yticks(range(k), corr.names)
    for i in range(k):
        for j in range(k):
            ax.text(j, i, f"{corr.values[i, j]:.2f}", ha="center", va="center", fontsize=7)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_calibration(
    raw_scores: Sequence[float],
    calibrated_scores: Sequence[float],
    labels: Sequence[float],
    path: str | Path,
) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6), sharey=True)
    for ax, scores, title in (
        (axes[0], raw_scores, "raw"),
        (axes[1], calibrated_scores, "calibrated"),
    ):
        ax.scatter(scores, labels, s=8, alpha=0.5)
        ax.set_xlabel(f"{title} score")
        ax.set_title(title)
    axes[0].set_ylabel("label")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
