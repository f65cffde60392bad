import pytest

from rulebound import Dataset, LabelVocab, Record, Rule, RuleSet


def make_dataset(rows, vocab=None, split="train"):
    """rows: list of (id, text, labels) tuples."""
    records = tuple(Record(id=r, text=t, labels=frozenset(ls)) for r, t, ls in rows)
    if vocab is None:
        vocab = LabelVocab.from_labels(name for _, _, ls in rows for name in ls)
    return Dataset(records=records, vocab=vocab, split=split)


@pytest.fixture
def planted_rule():
    return RuleSet((Rule("L0", "L1", 1.0),))


@pytest.fixture
def ef_el_dataset():
    """10 records; EF on records 1-4, EL on records 1-4 and 7."""
    rows = []
    for i in range(1, 11):
        labels = set()
        if i <= 4:
            labels = {"EF", "EL"}
        elif i == 7:
            labels = {"EL"}
        rows.append((f"r{i}", f"narrative {i}", labels))
    return make_dataset(rows, vocab=LabelVocab(("EF", "EL")))
