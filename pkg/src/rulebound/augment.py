"""Rule-consistent training-set augmentation.

For every training record whose labels activate a rule premise without its
conclusion, one corrected copy of the record is added with all triggered
conclusions switched on. Originals are always retained.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Dataset, Record
from .errors import VocabularyError
from .rules import Rule, RuleSet


@dataclass(frozen=True)
class AugmentationSummary:
    original_size: int
    added: int
    per_rule_added: dict[tuple[str, str], int]

    @property
    def growth_percent(self) -> float:
        return 100.0 * self.added / self.original_size


def _fired_rules(labels: frozenset[str], rules: RuleSet, closure: bool) -> list[Rule]:
    """Rules applied to close `labels`; single application unless closure is set."""
    fired: list[Rule] = []
    current = set(labels)
    while True:
        step = [
            rule
            for rule in rules.rules
            if rule.premise in current and rule.conclusion not in current
        ]
        if not step:
            return fired
        fired.extend(step)
        current.update(rule.conclusion for rule in step)
        if not closure:
            return fired


def augment_dataset(
    dataset: Dataset,
    rules: RuleSet,
    max_growth: float | None = None,
    closure: bool = False,
) -> tuple[Dataset, AugmentationSummary]:
    """Build the augmented training set and a summary of what was added.

    One merged copy per record covers all of its triggered rules. With
    `closure`, rules chain to fixpoint inside that one copy. `max_growth`
    caps additions at floor(max_growth * N), keeping the copies whose
    strongest triggering rule weighs most (ties fall back to record order).
    """
    if dataset.split != "train":
        raise ValueError(f"augmentation applies to the train split, got {dataset.split!r}")
    for rule in rules.rules:
        for name in rule.key:
            if name not in dataset.vocab.index:
                raise VocabularyError(f"rule label {name!r} not in dataset vocabulary")

    # D+ is a set of (text, labels) pairs: a correction that already exists in
    # the dataset is not added again, which makes single-step augmentation
    # idempotent for chain-free rule sets.
    existing = {(rec.text, rec.labels) for rec in dataset.records}
    taken_ids = {rec.id for rec in dataset.records}
    candidates: list[tuple[int, Record, frozenset[str], list[Rule]]] = []
    for pos, record in enumerate(dataset.records):
        fired = _fired_rules(record.labels, rules, closure)
        if not fired:
            continue
        corrected = frozenset(record.labels | {rule.conclusion for rule in fired})
        if (record.text, corrected) in existing:
            continue
        existing.add((record.text, corrected))
        candidates.append((pos, record, corrected, fired))

    if max_growth is not None:
        limit = int(max_growth * len(dataset))
        ranked = sorted(
            candidates, key=lambda item: (-max(r.weight for r in item[3]), item[0])
        )
        keep = {id(item) for item in ranked[:limit]}
        candidates = [item for item in candidates if id(item) in keep]

    additions: list[Record] = []
    per_rule: dict[tuple[str, str], int] = {rule.key: 0 for rule in rules.rules}
    counter = 0
    for _, record, corrected, fired in candidates:
        counter += 1
        new_id = f"{record.id}#aug{counter}"
        while new_id in taken_ids:
            counter += 1
            new_id = f"{record.id}#aug{counter}"
        taken_ids.add(new_id)
        additions.append(Record(id=new_id, text=record.text, labels=corrected))
        for rule in fired:
            per_rule[rule.key] += 1

    augmented = Dataset(
        records=dataset.records + tuple(additions), vocab=dataset.vocab, split="train"
    )
    summary = AugmentationSummary(
        original_size=len(dataset), added=len(additions), per_rule_added=per_rule
    )
    return augmented, summary
