import shutil
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rulebound import (
    LabelVocab,
    PredictionBatch,
    Rule,
    RuleSet,
    RuleboundError,
    VocabularyError,
    audit_violations,
    check_with_clingo,
    emit_prediction_facts,
    emit_weak_constraints,
    render_violation_report,
)

GOLDEN = Path(__file__).parent / "data" / "weak_constraints_3rules.lp"

THREE_RULES = RuleSet((
    Rule("Engine Failure", "Emergency Landing", 0.85),
    Rule("Smoke", "Evacuation", 1.0),
    Rule("Cabin Pressure Problem", "Diversion", 0.004),
))


def batch_from_decisions(decisions, labels):
    decisions = np.asarray(decisions, dtype=np.int8)
    return PredictionBatch(
        probs=decisions.astype(np.float64),
        decisions=decisions,
        vocab=LabelVocab(tuple(labels)),
        doc_ids=tuple(f"d{i}" for i in range(decisions.shape[0])),
    )


class TestEmitWeakConstraints:
    def test_reference_line(self):
        rs = RuleSet((Rule("Engine Failure", "Emergency Landing", 0.85),))
        program = emit_weak_constraints(rs)
        assert (
            ':~ holds("Engine Failure"), not holds("Emergency Landing"). '
            '[85@1,"Engine Failure","Emergency Landing"]'
        ) in program.text.splitlines()
        assert (
            'violation("Engine Failure","Emergency Landing") :- '
            'holds("Engine Failure"), not holds("Emergency Landing").'
        ) in program.text.splitlines()

    def test_weight_floor_at_one(self):
        program = emit_weak_constraints(RuleSet((Rule("A", "B", 0.004),)))
        assert "[1@1," in program.rule_index[("A", "B")]

    def test_empty_ruleset_header_only(self):
        program = emit_weak_constraints(RuleSet())
        assert program.text == "% weak constraints for soft implication rules (n=0)\n"

    def test_golden_file_byte_identical(self):
        program = emit_weak_constraints(THREE_RULES)
        assert program.text.encode("utf-8") == GOLDEN.read_bytes()

    def test_byte_stable(self):
        a = emit_weak_constraints(THREE_RULES).text
        b = emit_weak_constraints(THREE_RULES).text
        assert a == b

    def test_quote_in_label_rejected(self):
        rs = RuleSet((Rule('say "hi"', "B", 0.5),))
        with pytest.raises(RuleboundError, match="quoted"):
            emit_weak_constraints(rs)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(min_value=1e-4, max_value=1.0, allow_nan=False))
    def test_two_lines_per_rule_and_weight_range(self, w):
        program = emit_weak_constraints(RuleSet((Rule("A", "B", w),)))
        lines = program.text.splitlines()
        assert len(lines) == 3  # header + weak constraint + violation rule
        weight = int(lines[1].split("[")[1].split("@")[0])
        assert 1 <= weight <= 100


class TestEmitPredictionFacts:
    def test_active_labels_sorted(self):
        batch = batch_from_decisions([[1, 0, 1]], ["A", "B", "C"])
        assert emit_prediction_facts(batch, 0) == 'holds("A").\nholds("C").\n'

    def test_all_zero_is_empty(self):
        batch = batch_from_decisions([[0, 0]], ["A", "B"])
        assert emit_prediction_facts(batch, 0) == ""

    def test_labels_with_spaces_quoted_verbatim(self):
        batch = batch_from_decisions([[1]], ["Engine Failure"])
        assert emit_prediction_facts(batch, 0) == 'holds("Engine Failure").\n'

    def test_out_of_range_doc(self):
        batch = batch_from_decisions([[1]], ["A"])
        with pytest.raises(IndexError):
            emit_prediction_facts(batch, 1)


class TestAuditViolations:
    def test_two_document_example(self):
        rules = RuleSet((Rule("A", "B", 0.9),))
        batch = batch_from_decisions([[1, 0], [1, 1]], ["A", "B"])
        report = audit_violations(batch, rules)
        assert report.total == 1
        assert report.rate_percent == 50.0
        assert report.per_doc == 0.5
        assert report.per_rule[("A", "B")].premise_active == 2
        assert report.per_rule[("A", "B")].violated == 1

    @pytest.mark.parametrize(
        "violations, per_doc, per_1k",
        [(323, 0.0456, 45.6), (44, 0.0062, 6.2), (1159, 0.1638, 163.8)],
    )
    def test_document_normalizations_at_reference_scale(self, violations, per_doc, per_1k):
        n = 7077
        decisions = np.zeros((n, 2), dtype=np.int8)
        decisions[:violations, 0] = 1  # premise without conclusion
        batch = batch_from_decisions(decisions, ["A", "B"])
        report = audit_violations(batch, RuleSet((Rule("A", "B", 0.9),)))
        assert report.total == violations
        rendered = render_violation_report(report)
        assert abs(rendered["per_doc"] - per_doc) <= 0.0001
        assert abs(rendered["per_1k"] - per_1k) <= 0.1

    def test_zero_active_premises_rate_zero(self):
        batch = batch_from_decisions([[0, 1], [0, 0]], ["A", "B"])
        report = audit_violations(batch, RuleSet((Rule("A", "B", 0.9),)))
        assert report.total == 0
        assert report.rate_percent == 0.0

    def test_unknown_rule_label(self):
        batch = batch_from_decisions([[1, 0]], ["A", "B"])
        with pytest.raises(VocabularyError):
            audit_violations(batch, RuleSet((Rule("A", "Z", 0.9),)))

    @settings(max_examples=30, deadline=None)
    @given(st.data())
    def test_permutation_invariance_and_additivity(self, data):
        n = data.draw(st.integers(2, 12))
        rows = data.draw(
            st.lists(
                st.lists(st.integers(0, 1), min_size=3, max_size=3),
                min_size=n, max_size=n,
            )
        )
        rules = RuleSet((Rule("A", "B", 0.5), Rule("C", "A", 0.8)))
        full = audit_violations(batch_from_decisions(rows, ["A", "B", "C"]), rules)
        perm = data.draw(st.permutations(range(n)))
        shuffled = audit_violations(
            batch_from_decisions([rows[i] for i in perm], ["A", "B", "C"]), rules
        )
        assert shuffled.total == full.total
        assert shuffled.per_rule == full.per_rule
        cut = data.draw(st.integers(1, n - 1))
        first = audit_violations(batch_from_decisions(rows[:cut], ["A", "B", "C"]), rules)
        second = audit_violations(batch_from_decisions(rows[cut:], ["A", "B", "C"]), rules)
        assert first.total + second.total == full.total

    def test_total_is_sum_of_per_rule(self):
        rules = RuleSet((Rule("A", "B", 0.5), Rule("B", "C", 0.5)))
        batch = batch_from_decisions([[1, 0, 0], [1, 1, 0], [0, 1, 1]], ["A", "B", "C"])
        report = audit_violations(batch, rules)
        assert report.total == sum(c.violated for c in report.per_rule.values())
        for count in report.per_rule.values():
            assert count.violated <= count.premise_active


clingo_bin = shutil.which("clingo")

# Minimal solver stand-in: grounds the stratified fragment by hand and prints
# the outf=2 JSON shape the real binary uses; exercises the subprocess plumbing.
STUB_SOLVER = """#!/usr/bin/env python3
import json, re, sys
text = sys.stdin.read()
holds = set(re.findall(r'^holds\\("([^"]*)"\\)\\.$', text, re.M))
pairs = re.findall(r':~ holds\\("([^"]*)"\\), not holds\\("([^"]*)"\\)', text)
atoms = [f'violation("{a}","{b}")' for a, b in pairs if a in holds and b not in holds]
atoms += [f'holds("{h}")' for h in sorted(holds)]
print(json.dumps({"Call": [{"Witnesses": [{"Value": atoms}]}]}))
sys.exit(30)
"""


def write_stub(tmp_path, body=STUB_SOLVER):
    stub = tmp_path / "clingo-stub"
    stub.write_text(body, encoding="utf-8")
    stub.chmod(0o755)
    return str(stub)


class TestCrossCheckPlumbing:
    def test_agreement_with_stub_solver(self, tmp_path):
        rng = np.random.default_rng(0)
        decisions = (rng.random((20, 3)) < 0.5).astype(np.int8)
        batch = batch_from_decisions(decisions, ["A", "B", "C"])
        rules = RuleSet((Rule("A", "B", 0.85), Rule("B", "C", 0.4)))
        check = check_with_clingo(batch, rules, write_stub(tmp_path))
        assert check.docs_checked == 20
        assert check.agree, check.mismatches

    def test_disagreement_is_reported(self, tmp_path):
        silent = STUB_SOLVER.replace(
            "atoms = [f'violation(\"{a}\",\"{b}\")' for a, b in pairs "
            "if a in holds and b not in holds]",
            "atoms = []",
        )
        batch = batch_from_decisions([[1, 0]], ["A", "B"])
        rules = RuleSet((Rule("A", "B", 0.85),))
        check = check_with_clingo(batch, rules, write_stub(tmp_path, silent))
        assert not check.agree
        assert check.mismatches[0][1] == ("A", "B")

    def test_solver_failure_raises(self, tmp_path):
        broken = "#!/usr/bin/env python3\nimport sys; sys.exit(65)\n"
        batch = batch_from_decisions([[1, 0]], ["A", "B"])
        with pytest.raises(RuleboundError, match="code 65"):
            check_with_clingo(batch, RuleSet((Rule("A", "B", 0.85),)),
                              write_stub(tmp_path, broken))


@pytest.mark.skipif(clingo_bin is None, reason="no clingo binary on PATH")
class TestClingoCrossCheck:
    def test_auditor_matches_solver_on_fixture(self):
        rng = np.random.default_rng(0)
        decisions = (rng.random((20, 3)) < 0.5).astype(np.int8)
        batch = batch_from_decisions(decisions, ["A", "B", "C"])
        rules = RuleSet((Rule("A", "B", 0.85), Rule("B", "C", 0.4)))
        check = check_with_clingo(batch, rules, clingo_bin)
        assert check.docs_checked == 20
        assert check.agree, check.mismatches
