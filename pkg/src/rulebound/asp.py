"""Clingo-compatible program emission and a solver-free violation auditor.

The auditor is the source of truth for consistency metrics; an external
clingo binary can be invoked as an optional cross-check and must agree with
it atom-for-atom on the ``violation/2`` predicate.
"""

from __future__ import annotations

import json
import re
import subprocess
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import RuleboundError, VocabularyError
from .rules import RuleSet

if TYPE_CHECKING:
    from .metrics import PredictionBatch

_VIOLATION_ATOM_RE = re.compile(r'^violation\("(.*)","(.*)"\)$')


@dataclass(frozen=True)
class AspProgram:
    """Emitted ASP source plus a map from rule key to its weak-constraint line."""

    text: str
    rule_index: dict[tuple[str, str], str]


@dataclass(frozen=True)
class RuleViolationCount:
    premise_active: int
    violated: int


@dataclass(frozen=True)
class ViolationReport:
    """Aggregate and per-rule violation counts over a prediction batch."""

    total: int
    per_rule: dict[tuple[str, str], RuleViolationCount]
    num_docs: int

    @property
    def rate_percent(self) -> float:
        active = sum(c.premise_active for c in self.per_rule.values())
        return 100.0 * self.total / active if active else 0.0

    @property
    def per_doc(self) -> float:
        return self.total / self.num_docs

    @property
    def per_1k(self) -> float:
        return 1000.0 * self.per_doc


def _quoted(label: str) -> str:
    if any(ch in label for ch in ('"', "\\")) or any(ord(ch) < 32 for ch in label):
        raise RuleboundError(f"label {label!r} cannot be encoded as a quoted ASP constant")
    return f'"{label}"'


def constraint_weight(weight: float) -> int:
    """Integer solver weight: confidence scaled by 100, floored at 1."""
    return max(1, int(round(100.0 * weight)))


def emit_weak_constraints(rules: RuleSet) -> AspProgram:
    """Emit one weak constraint and one violation/2 rule per soft implication.

    Output is byte-stable for a fixed ruleset; lines follow ruleset order.
    """
    lines = [f"% weak constraints for soft implication rules (n={len(rules)})"]
    rule_index: dict[tuple[str, str], str] = {}
    for rule in rules.rules:
        a, b = _quoted(rule.premise), _quoted(rule.conclusion)
        weak = f":~ holds({a}), not holds({b}). [{constraint_weight(rule.weight)}@1,{a},{b}]"
        lines.append(weak)
        lines.append(f"violation({a},{b}) :- holds({a}), not holds({b}).")
        rule_index[rule.key] = weak
    return AspProgram(text="\n".join(lines) + "\n", rule_index=rule_index)


def emit_prediction_facts(batch: "PredictionBatch", doc_index: int) -> str:
    """holds/1 facts for one document's predicted-active labels, sorted by name."""
    if not 0 <= doc_index < batch.num_docs:
        raise IndexError(f"doc_index {doc_index} out of range for {batch.num_docs} documents")
    active = sorted(
        batch.vocab.labels[j] for j in np.flatnonzero(batch.decisions[doc_index])
    )
    return "".join(f"holds({_quoted(name)}).\n" for name in active)


def violation_flags(batch: "PredictionBatch", rules: RuleSet) -> np.ndarray:
    """(N, |rules|) boolean matrix: premise predicted active, conclusion not."""
    decisions = np.asarray(batch.decisions)
    flags = np.zeros((batch.num_docs, len(rules)), dtype=bool)
    for k, rule in enumerate(rules.rules):
        ia = batch.vocab.position(rule.premise)
        ib = batch.vocab.position(rule.conclusion)
        flags[:, k] = (decisions[:, ia] == 1) & (decisions[:, ib] == 0)
    return flags


def audit_violations(batch: "PredictionBatch", rules: RuleSet) -> ViolationReport:
    """Count (document, rule) pairs whose premise is predicted without its conclusion."""
    for rule in rules.rules:
        for name in rule.key:
            if name not in batch.vocab.index:
                raise VocabularyError(f"rule label {name!r} not in prediction vocabulary")
    decisions = np.asarray(batch.decisions)
    flags = violation_flags(batch, rules)
    per_rule: dict[tuple[str, str], RuleViolationCount] = {}
    for k, rule in enumerate(rules.rules):
        ia = batch.vocab.position(rule.premise)
        per_rule[rule.key] = RuleViolationCount(
            premise_active=int((decisions[:, ia] == 1).sum()),
            violated=int(flags[:, k].sum()),
        )
    return ViolationReport(
        total=int(flags.sum()), per_rule=per_rule, num_docs=batch.num_docs
    )


def render_violation_report(report: ViolationReport) -> dict:
    """JSON-ready view; per_doc printed at 4 decimals, per_1k at 1 decimal."""
    return {
        "total": report.total,
        "num_docs": report.num_docs,
        "rate_percent": round(report.rate_percent, 4),
        "per_doc": round(report.per_doc, 4),
        "per_1k": round(report.per_1k, 1),
        "per_rule": [
            {
                "premise": premise,
                "conclusion": conclusion,
                "premise_active": count.premise_active,
                "violated": count.violated,
            }
            for (premise, conclusion), count in sorted(report.per_rule.items())
        ],
    }


# ---------------------------------------------------------------------------
# Optional external solver cross-check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClingoCheck:
    """Auditor-vs-solver comparison over a batch of documents."""

    docs_checked: int
    mismatches: tuple[tuple[str, tuple[str, str], bool, bool], ...]

    @property
    def agree(self) -> bool:
        return not self.mismatches


def _solve_document(program: str, clingo_path: str) -> set[tuple[str, str]]:
    """Ground + solve one document's program, returning its violation/2 atoms."""
    proc = subprocess.run(
        [clingo_path, "-", "--outf=2"],
        input=program,
        capture_output=True,
        text=True,
        timeout=60,
    )
    # clingo exit codes: 10 = SAT, 30 = SAT + optimum found.
    if proc.returncode not in (10, 30):
        raise RuleboundError(
            f"clingo failed with code {proc.returncode}: {proc.stderr.strip()[:200]}"
        )
    payload = json.loads(proc.stdout)
    witnesses = payload["Call"][0]["Witnesses"]
    atoms = witnesses[-1]["Value"] if witnesses else []
    found: set[tuple[str, str]] = set()
    for atom in atoms:
        match = _VIOLATION_ATOM_RE.match(atom)
        if match:
            found.add((match.group(1), match.group(2)))
    return found


def check_with_clingo(
    batch: "PredictionBatch", rules: RuleSet, clingo_path: str, max_docs: int | None = None
) -> ClingoCheck:
    """Compare auditor flags against solver-derived violation/2 atoms per document."""
    program = emit_weak_constraints(rules)
    flags = violation_flags(batch, rules)
    n = batch.num_docs if max_docs is None else min(batch.num_docs, max_docs)
    mismatches: list[tuple[str, tuple[str, str], bool, bool]] = []
    for i in range(n):
        facts = emit_prediction_facts(batch, i)
        solver_atoms = _solve_document(program.text + facts, clingo_path)
        for k, rule in enumerate(rules.rules):
            auditor_flag = bool(flags[i, k])
            solver_flag = rule.key in solver_atoms
            if auditor_flag != solver_flag:
                mismatches.append((batch.doc_ids[i], rule.key, auditor_flag, solver_flag))
    return ClingoCheck(docs_checked=n, mismatches=tuple(mismatches))
