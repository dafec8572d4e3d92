"""Corpus ingestion, canonical author text, and deterministic dataset splits."""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

DEFAULT_VENUES = frozenset({"ICLR2024", "ICLR2025", "NeurIPS2023", "NeurIPS2024"})
DEFAULT_RATIOS = (Fraction(8, 10), Fraction(1, 10), Fraction(1, 10))
# Submissions with these decision strings never receive usable labels; drop at ingest.
WITHDRAWN_DECISIONS = frozenset({"withdrawn", "withdraw", "desk rejected", "desk-rejected", "desk reject"})
DEFAULT_ANONYMIZE_KEY = b"reviewcast-author-tag-v1"

_WS = re.compile(r"\s+")


class IngestError(ValueError):
    pass


class DuplicateRecordError(IngestError):
    pass


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class AuthorRecord:
    display_name: str
    position: str = ""
    affiliation: str = ""
    country: str = ""  # ISO-2 lowercase, or empty when unknown
    order_index: int = 0


@dataclass(frozen=True)
class PaperRecord:
    record_id: str
    title: str
    abstract: str
    authors: tuple[AuthorRecord, ...]
    venue: str
    idea_text: str | None = None
    capability_text: str | None = None
    avg_rating: float | None = None
    accepted: bool | None = None
    first_author_key: str = ""

    def __post_init__(self):
        if not self.authors:
            raise IngestError("authors must be non-empty")
        if not self.first_author_key:
            object.__setattr__(
                self, "first_author_key", normalize_author_key(self.authors[0].display_name)
            )

    @property
    def labeled(self) -> bool:
        return self.avg_rating is not None or self.accepted is not None


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]
    seed: int
    ratios: tuple[Fraction, Fraction, Fraction] = DEFAULT_RATIOS


@dataclass(frozen=True)
class Rejection:
    record_id: str  # best-effort id; "?" when the document has none
    reason: str


@dataclass
class IngestReport:
    records: list[PaperRecord] = field(default_factory=list)
    rejections: list[Rejection] = field(default_factory=list)


def normalize_author_key(name: str) -> str:
    """Lowercased, whitespace-collapsed author name used for identity matching."""
    return _WS.sub(" ", name.strip().lower())


def split_sizes(n: int, ratios: tuple[Fraction, Fraction, Fraction] = DEFAULT_RATIOS) -> tuple[int, int, int]:
    """Floor rule: floor(r_train*N), floor(r_val*N), remainder to test."""
    n_train = int(ratios[0] * n)
    n_val = int(ratios[1] * n)
    return n_train, n_val, n - n_train - n_val


class SplitMix64:
    """splitmix64 PRNG (Steele et al. update/output mix), fixed so any
    implementation of this recurrence reproduces the same shuffle:

        state += 0x9E3779B97F4A7C15                       (mod 2^64)
        z = state
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9          (mod 2^64)
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB          (mod 2^64)
        output = z ^ (z >> 31)

    Bounded draws use rejection sampling, so they are unbiased.
    """

    _MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self._MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self._MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self._MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self._MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        limit = ((1 << 64) // n) * n
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n


def seeded_shuffle(items: Sequence[str], seed: int) -> list[str]:
    """Fisher-Yates shuffle of ``items`` driven by :class:`SplitMix64`."""
    out = list(items)
    rng = SplitMix64(seed)
    for i in range(len(out) - 1, 0, -1):
        j = rng.below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def make_split(
    records: Sequence[PaperRecord],
    seed: int,
    ratios: tuple[Fraction, Fraction, Fraction] = DEFAULT_RATIOS,
) -> DatasetSplit:
    """Shuffle record ids (input order, then Fisher-Yates) and cut 8:1:1 by the floor rule."""
    ids = [r.record_id for r in records]
    if len(ids) < 3:
        raise SplitError(f"cannot form three parts from {len(ids)} records")
    shuffled = seeded_shuffle(ids, seed)
    n_train, n_val, _ = split_sizes(len(ids), ratios)
    return DatasetSplit(
        train=tuple(shuffled[:n_train]),
        val=tuple(shuffled[n_train : n_train + n_val]),
        test=tuple(shuffled[n_train + n_val :]),
        seed=seed,
        ratios=ratios,
    )


def filter_first_author_repeat(records: Sequence[PaperRecord]) -> list[PaperRecord]:
    """Keep records whose first-author key occurs at least twice in the input."""
    counts = Counter(r.first_author_key for r in records)
    return [r for r in records if counts[r.first_author_key] >= 2]


def anonymous_author_tag(display_name: str, key: bytes = DEFAULT_ANONYMIZE_KEY) -> str:
    """Stable '#'+6-hex-digit tag from a keyed hash of the display name."""
    digest = hashlib.blake2b(display_name.encode("utf-8"), digest_size=3, key=key).hexdigest()
    return "#" + digest.upper()


def author_fragment(author: AuthorRecord, anonymize: bool, key: bytes = DEFAULT_ANONYMIZE_KEY) -> str:
    name = anonymous_author_tag(author.display_name, key) if anonymize else author.display_name
    # Empty country leaves a bare trailing comma: "( ms student, some lab, )".
    inner = ", ".join([author.position, author.affiliation, author.country]).rstrip()
    return f"{name} ( {inner} )"


def author_fragments(
    record: PaperRecord, anonymize: bool = True, key: bytes = DEFAULT_ANONYMIZE_KEY
) -> list[str]:
    return [author_fragment(a, anonymize, key) for a in record.authors]


def render_author_text(
    record: PaperRecord, anonymize: bool = True, key: bytes = DEFAULT_ANONYMIZE_KEY
) -> str:
    """Join per-author fragments ``NAME ( position, affiliation, country )`` with '; '."""
    return "; ".join(author_fragments(record, anonymize, key))


def preferential_author_subset(items: Sequence, max_count: int) -> list:
    """Keep first and last entries, then earliest middle entries, preserving order.

    First and corresponding (last) authors carry the most signal, so they
    survive any truncation budget.
    """
    n = len(items)
    if max_count <= 0:
        raise ValueError("max_count must be positive")
    if n <= max_count:
        return list(items)
    if max_count == 1:
        return [items[0]]
    keep = {0, n - 1}
    for i in range(1, n - 1):
        if len(keep) >= max_count:
            break
        keep.add(i)
    return [items[i] for i in sorted(keep)]


def _validate_document(doc: dict, venues: frozenset[str]) -> PaperRecord:
    for key in ("record_id", "title", "authors", "venue"):
        if key not in doc or doc[key] in (None, "", []):
            raise IngestError(f"missing {key}")
    decision = str(doc.get("decision", "")).strip().lower()
    if decision in WITHDRAWN_DECISIONS:
        raise IngestError(f"withdrawn submission (decision: {decision})")
    venue = str(doc["venue"])
    if venue not in venues:
        raise IngestError(f"venue {venue!r} not in whitelist")
    authors = []
    for i, a in enumerate(doc["authors"]):
        name = str(a.get("display_name", "")).strip()
        if not name:
            raise IngestError(f"author {i} missing display_name")
        authors.append(
            AuthorRecord(
                display_name=name,
                position=str(a.get("position", "")),
                affiliation=str(a.get("affiliation", "")),
                country=str(a.get("country", "")).lower(),
                order_index=int(a.get("order_index", i)),
            )
        )
    order = sorted(a.order_index for a in authors)
    if order != list(range(len(authors))):
        raise IngestError(f"order_index values {order} are not 0..{len(authors) - 1}")
    avg_rating = doc.get("avg_rating")
    if avg_rating is not None:
        avg_rating = float(avg_rating)
        if not 1.0 <= avg_rating <= 10.0:
            raise IngestError(f"avg_rating {avg_rating} outside [1, 10]")
    accepted = doc.get("accepted")
    if accepted is not None:
        accepted = bool(accepted)
    return PaperRecord(
        record_id=str(doc["record_id"]),
        title=str(doc["title"]),
        abstract=str(doc.get("abstract", "")),
        authors=tuple(sorted(authors, key=lambda a: a.order_index)),
        venue=venue,
        idea_text=doc.get("idea_text"),
        capability_text=doc.get("capability_text"),
        avg_rating=avg_rating,
        accepted=accepted,
    )


def ingest_records(
    raw_documents: Iterable[dict], venues: frozenset[str] = DEFAULT_VENUES
) -> IngestReport:
    """Validate a stream of key-value documents into :class:`PaperRecord`s.

    Malformed documents land in ``rejections`` with a reason instead of being
    silently dropped; a duplicate ``record_id`` aborts the whole ingest.
    """
    report = IngestReport()
    seen: set[str] = set()
    for doc in raw_documents:
        rid = str(doc.get("record_id", "?"))
        try:
            record = _validate_document(doc, venues)
        except IngestError as exc:
            report.rejections.append(Rejection(record_id=rid, reason=str(exc)))
            continue
        if record.record_id in seen:
            raise DuplicateRecordError(f"duplicate record_id {record.record_id!r}")
        seen.add(record.record_id)
        report.records.append(record)
    return report


def record_to_document(record: PaperRecord) -> dict:
    doc = {
        "record_id": record.record_id,
        "title": record.title,
        "abstract": record.abstract,
        "authors": [
            {
                "display_name": a.display_name,
                "position": a.position,
                "affiliation": a.affiliation,
                "country": a.country,
                "order_index": a.order_index,
            }
            for a in record.authors
        ],
        "venue": record.venue,
    }
    for key in ("idea_text", "capability_text", "avg_rating", "accepted"):
        value = getattr(record, key)
        if value is not None:
            doc[key] = value
    return doc


def read_documents_ndjson(path: str | Path) -> Iterable[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def write_records_ndjson(records: Iterable[PaperRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_document(record), ensure_ascii=False) + "\n")


def write_split_manifest(split: DatasetSplit, path: str | Path) -> None:
    payload = {
        "seed": split.seed,
        "ratios": [str(r) for r in split.ratios],
        "train": list(split.train),
        "val": list(split.val),
        "test": list(split.test),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def read_split_manifest(path: str | Path) -> DatasetSplit:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    ratios = tuple(Fraction(r) for r in payload["ratios"])
    return DatasetSplit(
        train=tuple(payload["train"]),
        val=tuple(payload["val"]),
        test=tuple(payload["test"]),
        seed=int(payload["seed"]),
        ratios=ratios,  # type: ignore[arg-type]
    )
