"""Weighted soft implication rules: mining, file format, validation.

The rule file format is one fact per line::

    soft_rule("<premise>","<conclusion>",<weight>).

with blank lines and ``%`` comment lines ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .corpus import Dataset, LabelVocab, labels_matrix
from .errors import ParseError

ORIGINS = ("mined", "expert")

_RULE_RE = re.compile(
    r'^soft_rule\(\s*"([^"]*)"\s*,\s*"([^"]*)"\s*,\s*([0-9.eE+-]+)\s*\)\s*\.\s*$'
)


@dataclass(frozen=True)
class Rule:
    """Soft implication premise => conclusion with confidence weight in (0, 1]."""

    premise: str
    conclusion: str
    weight: float
    support: float | None = None
    origin: str = "expert"

    def __post_init__(self):
        if not 0 < self.weight <= 1:
            raise ValueError(f"rule weight must be in (0, 1], got {self.weight}")
        if self.premise == self.conclusion:
            raise ValueError(f"self-implication {self.premise!r} => {self.conclusion!r}")
        if self.support is not None and not 0 <= self.support <= 1:
            raise ValueError(f"rule support must be in [0, 1], got {self.support}")
        if self.origin not in ORIGINS:
            raise ValueError(f"origin must be one of {ORIGINS}, got {self.origin!r}")

    @property
    def key(self) -> tuple[str, str]:
        return (self.premise, self.conclusion)


@dataclass(frozen=True)
class RuleSet:
    """Ordered rule collection, unique per (premise, conclusion) pair."""

    rules: tuple[Rule, ...] = ()

    def __post_init__(self):
        if not isinstance(self.rules, tuple):
            object.__setattr__(self, "rules", tuple(self.rules))
        seen: set[tuple[str, str]] = set()
        for rule in self.rules:
            if rule.key in seen:
                raise ValueError(f"duplicate rule {rule.premise!r} => {rule.conclusion!r}")
            seen.add(rule.key)

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def label_names(self) -> set[str]:
        return {name for rule in self.rules for name in rule.key}


@dataclass(frozen=True)
class ValidationReport:
    """Report-only ruleset diagnostics: unknown labels and directed cycles."""

    unknown_labels: tuple[tuple[tuple[str, str], str], ...] = ()
    cycles: tuple[tuple[str, ...], ...] = ()

    @property
    def ok(self) -> bool:
        return not self.unknown_labels and not self.cycles


def mine_rules(dataset: Dataset, min_support: float = 0.01, min_confidence: float = 0.7) -> RuleSet:
    """Mine soft implications from label co-occurrence in a training set.

    For every ordered label pair (a, b) with P(a) >= min_support and
    P(b|a) >= min_confidence, emits a rule with weight = P(b|a) and
    support = P(a and b). Output is sorted by descending weight, then
    lexicographic (premise, conclusion).
    """
    if dataset.split != "train":
        raise ValueError(f"rules are mined from the train split, got {dataset.split!r}")
    if not 0 <= min_support <= 1:
        raise ValueError("min_support must be in [0, 1]")
    if not 0 < min_confidence <= 1:
        raise ValueError("min_confidence must be in (0, 1]")
    m = dataset.num_labels
    if m < 2:
        raise ValueError("mining needs at least 2 labels")

    y = labels_matrix(dataset).astype(np.int64)
    n = len(dataset)
    counts = y.sum(axis=0)                 # per-label frequency
    joint = y.T @ y                        # joint[a, b] = |records with both|
    mined: list[Rule] = []
    for a in range(m):
        if counts[a] == 0 or counts[a] / n < min_support:
            continue
        for b in range(m):
            if a == b:
                continue
            confidence = joint[a, b] / counts[a]
            if confidence >= min_confidence:
                mined.append(
                    Rule(
                        premise=dataset.vocab.labels[a],
                        conclusion=dataset.vocab.labels[b],
                        weight=float(confidence),
                        support=float(joint[a, b] / n),
                        origin="mined",
                    )
                )
    mined.sort(key=lambda r: (-r.weight, r.premise, r.conclusion))
    return RuleSet(tuple(mined))


def parse_rules(text: str, origin: str = "expert") -> RuleSet:
    """Parse rule-file contents; raises ParseError with the offending line number."""
    rules: list[Rule] = []
    seen: set[tuple[str, str]] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        match = _RULE_RE.match(line)
        if match is None:
            raise ParseError(f"not a soft_rule fact: {line!r}", lineno)
        premise, conclusion, weight_text = match.groups()
        try:
            weight = float(weight_text)
        except ValueError:
            raise ParseError(f"invalid weight {weight_text!r}", lineno) from None
        if not 0 < weight <= 1:
            raise ParseError(f"weight {weight} outside (0, 1]", lineno)
        if premise == conclusion:
            raise ParseError(f"self-implication {premise!r} => {premise!r}", lineno)
        if (premise, conclusion) in seen:
            raise ParseError(f"duplicate rule {premise!r} => {conclusion!r}", lineno)
        seen.add((premise, conclusion))
        rules.append(Rule(premise=premise, conclusion=conclusion, weight=weight, origin=origin))
    return RuleSet(tuple(rules))


def serialize_rules(rules: RuleSet) -> str:
    """Render rules in the soft_rule file format, weights at 4 decimal places."""
    return "".join(
        f'soft_rule("{r.premise}","{r.conclusion}",{r.weight:.4f}).\n' for r in rules.rules
    )


def merge_rulesets(mined: RuleSet, expert: RuleSet) -> RuleSet:
    """Merge by (premise, conclusion); expert weight wins on conflict.

    Mined rules keep their order; expert-only rules follow in expert order.
    """
    expert_by_key = {rule.key: rule for rule in expert.rules}
    merged = [expert_by_key.pop(rule.key, rule) for rule in mined.rules]
    merged.extend(rule for rule in expert.rules if rule.key in expert_by_key)
    return RuleSet(tuple(merged))


def validate_ruleset(rules: RuleSet, vocab: LabelVocab) -> ValidationReport:
    """List rules touching unknown labels, and all directed cycles among rules."""
    unknown: list[tuple[tuple[str, str], str]] = []
    for rule in rules.rules:
        for name in (rule.premise, rule.conclusion):
            if name not in vocab.index:
                unknown.append((rule.key, name))
    graph = nx.DiGraph()
    graph.add_edges_from(rule.key for rule in rules.rules)
    # Rotate each cycle to start at its smallest node so the report is deterministic.
    cycles = sorted(_normalize_cycle(cycle) for cycle in nx.simple_cycles(graph))
    return ValidationReport(unknown_labels=tuple(unknown), cycles=tuple(cycles))


def _normalize_cycle(cycle: list[str]) -> tuple[str, ...]:
    pivot = cycle.index(min(cycle))
    return tuple(cycle[pivot:] + cycle[:pivot])
