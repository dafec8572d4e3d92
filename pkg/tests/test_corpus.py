import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reviewcast.corpus import (
    AuthorRecord,
    DuplicateRecordError,
    IngestError,
    PaperRecord,
    SplitError,
    anonymous_author_tag,
    author_fragments,
    filter_first_author_repeat,
    ingest_records,
    make_split,
    normalize_author_key,
    preferential_author_subset,
    read_split_manifest,
    render_author_text,
    seeded_shuffle,
    split_sizes,
    write_split_manifest,
)


def make_record(rid, first_author="Ada Lovelace", n_authors=1, **kwargs):
    authors = tuple(
        AuthorRecord(display_name=first_author if i == 0 else f"Author {i}", order_index=i)
        for i in range(n_authors)
    )
    defaults = dict(title="T", abstract="A", venue="ICLR2025", avg_rating=5.0)
    defaults.update(kwargs)
    return PaperRecord(record_id=rid, authors=authors, **defaults)


def valid_document(rid="r1", **overrides):
    doc = {
        "record_id": rid,
        "title": "Learning Widgets",
        "abstract": "We learn widgets.",
        "authors": [
            {"display_name": "Ada Lovelace", "position": "phd student", "affiliation": "mit", "country": "us"},
            {"display_name": "Grace Hopper", "position": "professor", "affiliation": "yale", "country": "us"},
            {"display_name": "Alan Turing", "position": "researcher", "affiliation": "cambridge", "country": "gb"},
        ],
        "venue": "NeurIPS2024",
        "avg_rating": 5.5,
    }
    doc.update(overrides)
    return doc


class TestIngest:
    def test_direct_field_mapping(self):
        report = ingest_records([valid_document()])
        assert not report.rejections
        (rec,) = report.records
        assert len(rec.authors) == 3
        assert rec.venue == "NeurIPS2024"
        assert rec.avg_rating == 5.5
        assert rec.first_author_key == "ada lovelace"

    def test_missing_title_rejected_with_reason(self):
        report = ingest_records([valid_document(title="")])
        assert report.records == []
        assert len(report.rejections) == 1
        assert "title" in report.rejections[0].reason

    def test_duplicate_record_id_hard_error(self):
        with pytest.raises(DuplicateRecordError):
            ingest_records([valid_document("X1"), valid_document("X1")])

    def test_withdrawn_excluded(self):
        report = ingest_records([valid_document(decision="Withdrawn")])
        assert report.records == []
        assert "withdrawn" in report.rejections[0].reason

    def test_venue_whitelist(self):
        report = ingest_records([valid_document(venue="AAAI2024")])
        assert report.records == []
        assert "whitelist" in report.rejections[0].reason

    def test_order_index_gap_rejected(self):
        doc = valid_document()
        doc["authors"][2]["order_index"] = 5
        doc["authors"][0]["order_index"] = 0
        doc["authors"][1]["order_index"] = 1
        report = ingest_records([doc])
        assert report.records == []

    def test_rating_out_of_range_rejected(self):
        report = ingest_records([valid_document(avg_rating=11.0)])
        assert report.records == []

    def test_unlabeled_record_allowed(self):
        doc = valid_document()
        del doc["avg_rating"]
        report = ingest_records([doc])
        assert report.records[0].labeled is False


class TestFilterFirstAuthorRepeat:
    def test_keeps_repeated_keys_only(self):
        records = [make_record("1", "a"), make_record("2", "a"), make_record("3", "b")]
        kept = filter_first_author_repeat(records)
        assert [r.record_id for r in kept] == ["1", "2"]

    def test_no_repeats_gives_empty(self):
        records = [make_record("1", "a"), make_record("2", "b"), make_record("3", "c")]
        assert filter_first_author_repeat(records) == []

    def test_key_normalization_collapses_whitespace_and_case(self):
        records = [make_record("1", "Ada  Lovelace"), make_record("2", "ada lovelace")]
        assert len(filter_first_author_repeat(records)) == 2

    @given(st.lists(st.sampled_from("abcde"), min_size=0, max_size=30))
    def test_idempotent(self, keys):
        records = [make_record(str(i), k) for i, k in enumerate(keys)]
        once = filter_first_author_repeat(records)
        twice = filter_first_author_repeat(once)
        assert [r.record_id for r in twice] == [r.record_id for r in once]


class TestSplit:
    def test_exact_division(self):
        records = [make_record(str(i)) for i in range(100)]
        split = make_split(records, seed=42)
        assert (len(split.train), len(split.val), len(split.test)) == (80, 10, 10)

    def test_floor_rule_n25(self):
        records = [make_record(str(i)) for i in range(25)]
        split = make_split(records, seed=7)
        assert (len(split.train), len(split.val), len(split.test)) == (20, 2, 3)

    def test_full_corpus_sizes(self):
        # Independent oracle: integer floor arithmetic on N=16,712.
        n = 16712
        expect_train = (8 * n) // 10
        expect_val = (1 * n) // 10
        expect_test = n - expect_train - expect_val
        assert (expect_train, expect_val, expect_test) == (13369, 1671, 1672)
        assert split_sizes(n) == (13369, 1671, 1672)

    def test_too_small_errors(self):
        with pytest.raises(SplitError):
            make_split([make_record("1"), make_record("2")], seed=42)

    def test_deterministic_byte_identical(self, tmp_path):
        records = [make_record(str(i)) for i in range(57)]
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        write_split_manifest(make_split(records, seed=42), p1)
        write_split_manifest(make_split(records, seed=42), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_manifest_round_trip(self, tmp_path):
        records = [make_record(str(i)) for i in range(31)]
        split = make_split(records, seed=3)
        path = tmp_path / "split.json"
        write_split_manifest(split, path)
        assert read_split_manifest(path) == split

    @given(st.integers(min_value=3, max_value=200), st.integers(min_value=0, max_value=2**32))
    @settings(max_examples=50)
    def test_partition_property(self, n, seed):
        records = [make_record(str(i)) for i in range(n)]
        split = make_split(records, seed=seed)
        train, val, test = set(split.train), set(split.val), set(split.test)
        assert train | val | test == {str(i) for i in range(n)}
        assert not (train & val) and not (train & test) and not (val & test)
        assert len(split.train) + len(split.val) + len(split.test) == n

    @given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=0, max_value=50))
    @settings(max_examples=30)
    def test_shuffle_is_permutation(self, seed, n):
        ids = [f"id{i}" for i in range(n)]
        assert sorted(seeded_shuffle(ids, seed)) == sorted(ids)


class TestAuthorText:
    def test_anonymized_shape(self):
        rec = make_record("1")
        rec = PaperRecord(
            record_id="1",
            title="T",
            abstract="A",
            venue="ICLR2025",
            authors=(AuthorRecord("Wei Chen", position="ms student", affiliation="southeast university"),),
        )
        text = render_author_text(rec, anonymize=True)
        tag = anonymous_author_tag("Wei Chen")
        assert text == f"{tag} ( ms student, southeast university, )"
        assert len(tag) == 7 and tag[0] == "#"
        assert all(c in "0123456789ABCDEF" for c in tag[1:])

    def test_empty_country_renders_trailing_comma(self):
        rec = PaperRecord(
            record_id="1",
            title="T",
            abstract="A",
            venue="ICLR2025",
            authors=(AuthorRecord("X Y", position="researcher", affiliation="lab", country=""),),
        )
        assert render_author_text(rec, anonymize=False) == "X Y ( researcher, lab, )"

    def test_country_included_when_present(self):
        rec = PaperRecord(
            record_id="1",
            title="T",
            abstract="A",
            venue="ICLR2025",
            authors=(AuthorRecord("X Y", position="researcher", affiliation="tencent big data", country="cn"),),
        )
        assert render_author_text(rec, anonymize=False) == "X Y ( researcher, tencent big data, cn )"

    def test_hash_stable(self):
        assert anonymous_author_tag("Same Name") == anonymous_author_tag("Same Name")

    def test_multi_author_join(self):
        rec = make_record("1", n_authors=3)
        text = render_author_text(rec, anonymize=True)
        assert text.count("; ") == 2

    @given(st.text(min_size=4, max_size=40).filter(lambda s: s.strip()))
    @settings(max_examples=100)
    def test_anonymization_never_leaks_name(self, name):
        rec = PaperRecord(
            record_id="1",
            title="T",
            abstract="A",
            venue="ICLR2025",
            authors=(AuthorRecord(display_name=name, position="p", affiliation="aff"),),
        )
        text = render_author_text(rec, anonymize=True)
        for i in range(len(name) - 3):
            assert name[i : i + 4] not in text


class TestPreferentialSubset:
    def test_under_budget_untouched(self):
        assert preferential_author_subset([1, 2, 3], 5) == [1, 2, 3]

    def test_keeps_first_and_last(self):
        out = preferential_author_subset(list(range(10)), 4)
        assert out == [0, 1, 2, 9]

    def test_budget_one(self):
        assert preferential_author_subset([1, 2, 3], 1) == [1]

    def test_budget_two(self):
        assert preferential_author_subset(list(range(5)), 2) == [0, 4]
