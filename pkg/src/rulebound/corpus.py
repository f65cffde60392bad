"""Multi-label datasets: loading, label encoding, seeded splits, synthetic fixtures.

The on-disk format is JSON lines, one record per line with fields
``id`` (string), ``text`` (string) and ``labels`` (array of strings).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .errors import ParseError, VocabularyError

if TYPE_CHECKING:
    from .rules import RuleSet

logger = logging.getLogger(__name__)

SPLITS = ("train", "validation", "test")


@dataclass(frozen=True)
class Record:
    """One document: an opaque id, its text, and its set of label names."""

    id: str
    text: str
    labels: frozenset[str]

    def __post_init__(self):
        if not self.id:
            raise ValueError("record id must be non-empty")
        if not isinstance(self.labels, frozenset):
            object.__setattr__(self, "labels", frozenset(self.labels))


@dataclass(frozen=True)
class LabelVocab:
    """Deterministic (lexicographic) bijection between label names and 0..m-1."""

    labels: tuple[str, ...]
    index: dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if list(self.labels) != sorted(set(self.labels)):
            raise ValueError("vocab labels must be sorted and distinct")
        object.__setattr__(self, "index", {name: j for j, name in enumerate(self.labels)})

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> "LabelVocab":
        return cls(tuple(sorted(set(labels))))

    def __len__(self) -> int:
        return len(self.labels)

    def position(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise VocabularyError(f"label {name!r} not in vocabulary") from None


@dataclass(frozen=True)
class Dataset:
    """An ordered list of records sharing one label vocabulary."""

    records: tuple[Record, ...]
    vocab: LabelVocab
    split: str = "train"

    def __post_init__(self):
        if not isinstance(self.records, tuple):
            object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise ValueError("empty dataset")
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        seen: set[str] = set()
        for rec in self.records:
            if rec.id in seen:
                raise ValueError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)
            for name in rec.labels:
                if name not in self.vocab.index:
                    raise VocabularyError(f"label {name!r} not in vocabulary")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def num_labels(self) -> int:
        return len(self.vocab)


def encode_labels(record: Record, vocab: LabelVocab) -> np.ndarray:
    """Multi-hot vector over `vocab`: entry j is 1 iff vocab label j is on the record."""
    vec = np.zeros(len(vocab), dtype=np.int8)
    for name in record.labels:
        vec[vocab.position(name)] = 1
    return vec


def decode_labels(vector: np.ndarray, vocab: LabelVocab) -> frozenset[str]:
    """Inverse of :func:`encode_labels` on label sets."""
    if len(vector) != len(vocab):
        raise ValueError(f"vector length {len(vector)} != vocab size {len(vocab)}")
    return frozenset(vocab.labels[j] for j in np.flatnonzero(vector))


def labels_matrix(dataset: Dataset) -> np.ndarray:
    """(N, m) multi-hot matrix for the whole dataset, in record order."""
    return np.stack([encode_labels(rec, dataset.vocab) for rec in dataset.records])


def _parse_record_line(raw: str, lineno: int) -> tuple[Record, int]:
    """Parse one JSONL record; returns (record, duplicate-label count)."""
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
    if not isinstance(obj, dict):
        raise ParseError("record must be a JSON object", lineno)
    for key, kind in (("id", str), ("text", str), ("labels", list)):
        if key not in obj:
            raise ParseError(f"missing field {key!r}", lineno)
        if not isinstance(obj[key], kind):
            raise ParseError(f"field {key!r} must be {kind.__name__}", lineno)
    labels = obj["labels"]
    if not all(isinstance(x, str) for x in labels):
        raise ParseError("labels must be strings", lineno)
    dupes = len(labels) - len(set(labels))
    if not obj["id"]:
        raise ParseError("record id must be non-empty", lineno)
    return Record(id=obj["id"], text=obj["text"], labels=frozenset(labels)), dupes


def load_dataset(path: str | Path, vocab: LabelVocab | None = None, split: str = "train") -> Dataset:
    """Load a JSONL dataset.

    When `vocab` is omitted it is built from the labels observed in the file
    (lexicographic order). Duplicate labels within one record are deduplicated
    and counted in a single warning. Record order follows file order.
    """
    path = Path(path)
    records: list[Record] = []
    dupes = 0
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            rec, d = _parse_record_line(raw, lineno)
            dupes += d
            records.append(rec)
    if not records:
        raise ParseError(f"empty dataset: {path}")
    if dupes:
        logger.warning("deduplicated %d duplicate label entries in %s", dupes, path)
    if vocab is None:
        vocab = LabelVocab.from_labels(name for rec in records for name in rec.labels)
    else:
        for rec in records:
            for name in rec.labels:
                if name not in vocab.index:
                    raise VocabularyError(f"label {name!r} not in supplied vocabulary")
    return Dataset(records=tuple(records), vocab=vocab, split=split)


def write_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset in the JSONL record format (labels sorted for stability)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in dataset.records:
            fh.write(json.dumps({"id": rec.id, "text": rec.text, "labels": sorted(rec.labels)}))
            fh.write("\n")


def split_dataset(
    dataset: Dataset, train_frac: float = 0.7, val_frac: float = 0.15, seed: int = 0
) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded shuffle-and-partition into train/validation/test datasets."""
    if not (0 < train_frac < 1 and 0 < val_frac < 1 and train_frac + val_frac < 1):
        raise ValueError("need 0 < train_frac, val_frac and train_frac + val_frac < 1")
    order = np.random.default_rng(seed).permutation(len(dataset))
    n_train = int(len(dataset) * train_frac)
    n_val = int(len(dataset) * val_frac)
    parts = (order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :])
    if any(len(p) == 0 for p in parts):
        raise ValueError("dataset too small for the requested split fractions")
    return tuple(
        Dataset(
            records=tuple(dataset.records[i] for i in part),
            vocab=dataset.vocab,
            split=name,
        )
        for part, name in zip(parts, SPLITS)
    )


# ---------------------------------------------------------------------------
# Synthetic fixtures with planted implication structure
# ---------------------------------------------------------------------------

_BASE_LABEL_RATE = 0.35
_BAG_SIZE = 6
_BAG_OVERLAP = 3


def _token_bags(vocab_size: int) -> list[list[str]]:
    """Per-label token bags; labels past the first two reuse a sliding window
    of the first label's bag, so evidence for label 0 is partially confusable."""
    bags = [[f"sig{j}{k}" for k in range(_BAG_SIZE)] for j in range(vocab_size)]
    for j in range(2, vocab_size):
        offset = ((j - 2) * _BAG_OVERLAP) % _BAG_SIZE
        window = (bags[0] + bags[0])[offset : offset + _BAG_OVERLAP]
        bags[j] = window + bags[j][_BAG_OVERLAP:]
    return bags


def generate_synthetic(
    num_records: int,
    vocab_size: int,
    planted_rules: "RuleSet | None" = None,
    noise: float = 0.0,
    seed: int = 0,
) -> Dataset:
    """Generate a learnable dataset whose labels honor the planted rules.

    Each label is drawn independently at a fixed base rate, then every planted
    rule (a => b) is enforced per record with probability 1 - noise; each
    (record, rule) pair gets exactly one enforcement coin, and enforcement
    iterates until no rule can fire, so noise=0 yields zero violations even
    through rule chains.

    Texts are built from label-specific token bags: every active label
    contributes a seeded-random subset of its bag, so evidence strength varies
    across records, and later labels share part of the first label's bag, so
    some records carry ambiguous evidence. Everything is drawn from one
    generator: the same seed reproduces the dataset byte for byte.
    """
    if vocab_size < 2:
        raise ValueError("vocab_size must be >= 2")
    if not 0 <= noise < 0.5:
        raise ValueError("noise must be in [0, 0.5)")
    if num_records < 1:
        raise ValueError("num_records must be >= 1")
    names = [f"L{j}" for j in range(vocab_size)]
    name_set = set(names)
    pairs: list[tuple[int, int]] = []
    if planted_rules is not None:
        for rule in planted_rules.rules:
            for name in (rule.premise, rule.conclusion):
                if name not in name_set:
                    raise ValueError(
                        f"planted rule references label {name!r} outside the first {vocab_size} labels"
                    )
            pairs.append((names.index(rule.premise), names.index(rule.conclusion)))

    bags = _token_bags(vocab_size)
    rng = np.random.default_rng(seed)
    records: list[Record] = []
    for i in range(num_records):
        active = rng.random(vocab_size) < _BASE_LABEL_RATE
        decided: set[int] = set()
        changed = True
        while changed:
            changed = False
            for k, (a, b) in enumerate(pairs):
                if active[a] and not active[b] and k not in decided:
                    decided.add(k)
                    if rng.random() >= noise:
                        active[b] = True
                        changed = True
        tokens = ["report"]
        for j in range(vocab_size):
            if active[j]:
                count = int(rng.integers(1, _BAG_SIZE + 1))
                tokens.extend(rng.choice(bags[j], size=count, replace=False))
        records.append(
            Record(
                id=f"synth-{i:05d}",
                text=" ".join(tokens),
                labels=frozenset(names[j] for j in range(vocab_size) if active[j]),
            )
        )
    return Dataset(records=tuple(records), vocab=LabelVocab(tuple(sorted(names))), split="train")
