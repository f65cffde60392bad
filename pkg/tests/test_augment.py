import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rulebound import (
    LabelVocab,
    PredictionBatch,
    Rule,
    RuleSet,
    VocabularyError,
    audit_violations,
    augment_dataset,
    encode_labels,
    generate_synthetic,
)

from conftest import make_dataset

AB = RuleSet((Rule("A", "B", 0.9),))


class TestAugmentDataset:
    def test_single_trigger_adds_one_copy(self):
        ds = make_dataset([("r1", "engine", {"A"})], vocab=LabelVocab(("A", "B")))
        augmented, summary = augment_dataset(ds, AB)
        assert len(augmented) == 2
        added = augmented.records[1]
        assert added.id == "r1#aug1"
        assert added.text == "engine"
        assert added.labels == frozenset({"A", "B"})
        assert summary.added == 1
        assert summary.growth_percent == 100.0

    def test_satisfied_rule_adds_nothing(self):
        ds = make_dataset([("r1", "x", {"A", "B"})], vocab=LabelVocab(("A", "B")))
        augmented, summary = augment_dataset(ds, AB)
        assert len(augmented) == 1
        assert summary.added == 0
        assert summary.growth_percent == 0.0

    def test_multiple_rules_merge_into_one_copy(self):
        rules = RuleSet((Rule("A", "B", 0.9), Rule("A", "C", 0.8)))
        ds = make_dataset([("r1", "x", {"A"})], vocab=LabelVocab(("A", "B", "C")))
        augmented, summary = augment_dataset(ds, rules)
        assert len(augmented) == 2
        added = augmented.records[1]
        assert added.labels == frozenset({"A", "B", "C"})
        assert summary.per_rule_added[("A", "B")] == 1
        assert summary.per_rule_added[("A", "C")] == 1
        # the merged copy audits clean against the triggering rules
        decisions = encode_labels(added, ds.vocab)[None, :]
        batch = PredictionBatch(
            probs=decisions.astype(float), decisions=decisions,
            vocab=ds.vocab, doc_ids=("x",),
        )
        assert audit_violations(batch, rules).total == 0

    def test_originals_always_retained(self):
        ds = make_dataset(
            [("r1", "x", {"A"}), ("r2", "y", {"B"})], vocab=LabelVocab(("A", "B"))
        )
        augmented, _ = augment_dataset(ds, AB)
        assert augmented.records[: len(ds)] == ds.records

    def test_single_step_leaves_chain_tail_open(self):
        chain = RuleSet((Rule("A", "B", 0.9), Rule("B", "C", 0.9)))
        ds = make_dataset([("r1", "x", {"A"})], vocab=LabelVocab(("A", "B", "C")))
        augmented, _ = augment_dataset(ds, chain)
        assert augmented.records[1].labels == frozenset({"A", "B"})

    def test_closure_applies_chains_to_fixpoint(self):
        chain = RuleSet((Rule("A", "B", 0.9), Rule("B", "C", 0.9)))
        ds = make_dataset([("r1", "x", {"A"})], vocab=LabelVocab(("A", "B", "C")))
        augmented, summary = augment_dataset(ds, chain, closure=True)
        assert augmented.records[1].labels == frozenset({"A", "B", "C"})
        assert summary.per_rule_added[("B", "C")] == 1

    def test_idempotent_for_chain_free_rules(self):
        ds = make_dataset(
            [("r1", "x", {"A"}), ("r2", "y", {"A", "B"}), ("r3", "z", set())],
            vocab=LabelVocab(("A", "B")),
        )
        once, _ = augment_dataset(ds, AB)
        twice, summary = augment_dataset(once, AB)
        assert summary.added == 0
        assert twice.records == once.records

    def test_max_growth_keeps_heaviest_rules_in_record_order(self):
        rules = RuleSet((Rule("A", "B", 0.5), Rule("C", "B", 1.0)))
        ds = make_dataset(
            [("r1", "t1", {"A"}), ("r2", "t2", {"C"}), ("r3", "t3", {"A"})],
            vocab=LabelVocab(("A", "B", "C")),
        )
        augmented, summary = augment_dataset(ds, rules, max_growth=1 / 3)
        assert summary.added == 1
        assert augmented.records[-1].id == "r2#aug1"  # strongest triggering rule wins

    def test_rule_label_not_in_vocab(self):
        ds = make_dataset([("r1", "x", {"A"})], vocab=LabelVocab(("A",)))
        with pytest.raises(VocabularyError):
            augment_dataset(ds, AB)

    def test_requires_train_split(self):
        from dataclasses import replace

        ds = make_dataset([("r1", "x", {"A"})], vocab=LabelVocab(("A", "B")))
        with pytest.raises(ValueError, match="train"):
            augment_dataset(replace(ds, split="test"), AB)


class TestAugmentationProperties:
    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.sets(st.sampled_from("ABC")), min_size=1, max_size=25))
    def test_added_records_satisfy_triggering_rules(self, labelings):
        rules = RuleSet((Rule("A", "B", 0.9), Rule("C", "B", 0.7)))
        ds = make_dataset(
            [(f"r{i}", f"t{i}", ls) for i, ls in enumerate(labelings)],
            vocab=LabelVocab(("A", "B", "C")),
        )
        augmented, summary = augment_dataset(ds, rules)
        assert len(augmented) >= len(ds)
        added = augmented.records[len(ds):]
        for rec in added:
            for rule in rules:
                if rule.premise in rec.labels:
                    assert rule.conclusion in rec.labels
        triggered = any(
            rule.premise in r.labels and rule.conclusion not in r.labels
            for r in ds.records for rule in rules
        )
        assert (len(augmented) > len(ds)) == triggered

    def test_growth_positive_on_noisy_fixture(self, planted_rule):
        ds = generate_synthetic(500, 4, planted_rule, noise=0.1, seed=7)
        augmented, summary = augment_dataset(ds, planted_rule)
        assert summary.added > 0
        assert summary.growth_percent == 100.0 * summary.added / len(ds)
        y = np.array([encode_labels(r, ds.vocab) for r in augmented.records[len(ds):]])
        assert not np.any((y[:, 0] == 1) & (y[:, 1] == 0))
