"""Command-line pipeline: synth, split, mine-rules, emit-asp, augment, train, evaluate, audit.

Every run writes a config echo (config.json) and a run log into its output
directory; all primary artifacts are written canonically so identical
configs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import asp, augment, corpus, features, metrics, model, rules
from .errors import RuleboundError
from .jsonio import read_json, write_json

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    """Resolved, serializable description of one CLI run."""

    subcommand: str
    options: dict

    def to_dict(self) -> dict:
        return {"subcommand": self.subcommand, "options": self.options}


def _run_config(args: argparse.Namespace) -> RunConfig:
    options = {k: v for k, v in vars(args).items() if k not in ("func", "subcommand")}
    return RunConfig(subcommand=args.subcommand, options=options)


def _start_run(args: argparse.Namespace) -> Path:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_json(outdir / "config.json", _run_config(args).to_dict())
    handler = logging.FileHandler(outdir / "run.log", mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("rulebound")
    root.setLevel(logging.INFO)
    root.addHandler(handler)
    return outdir


def _end_run() -> None:
    root = logging.getLogger("rulebound")
    for handler in list(root.handlers):
        if isinstance(handler, logging.FileHandler):
            root.removeHandler(handler)
            handler.close()


def _load_rules(path: str | None) -> rules.RuleSet:
    if path is None:
        return rules.RuleSet()
    return rules.parse_rules(Path(path).read_text(encoding="utf-8"))


def _cap(text: str) -> float | None:
    return None if text.lower() == "none" else float(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> None:
    outdir = _start_run(args)
    planted = _load_rules(args.rules)
    data = corpus.generate_synthetic(
        num_records=args.num_records,
        vocab_size=args.vocab_size,
        planted_rules=planted,
        noise=args.noise,
        seed=args.seed,
    )
    corpus.write_dataset(data, outdir / "synthetic.jsonl")
    logger.info("generated %d records over %d labels", len(data), data.num_labels)
    print(f"wrote {len(data)} synthetic records -> {outdir / 'synthetic.jsonl'}")


def cmd_split(args) -> None:
    outdir = _start_run(args)
    data = corpus.load_dataset(args.input)
    parts = corpus.split_dataset(
        data, train_frac=args.train_frac, val_frac=args.val_frac, seed=args.seed
    )
    for part, name in zip(parts, ("train", "val", "test")):
        corpus.write_dataset(part, outdir / f"{name}.jsonl")
    logger.info("split %d records into %s", len(data), [len(p) for p in parts])
    print(f"split {len(data)} records into {[len(p) for p in parts]} -> {outdir}")


def cmd_mine_rules(args) -> None:
    outdir = _start_run(args)
    data = corpus.load_dataset(args.train, split="train")
    mined = rules.mine_rules(
        data, min_support=args.min_support, min_confidence=args.min_confidence
    )
    if args.expert_rules:
        mined = rules.merge_rulesets(mined, _load_rules(args.expert_rules))
    report = rules.validate_ruleset(mined, data.vocab)
    for cycle in report.cycles:
        logger.info("rule cycle: %s", " => ".join(cycle + (cycle[0],)))
    (outdir / "rules.rules").write_text(rules.serialize_rules(mined), encoding="utf-8")
    logger.info("mined %d rules", len(mined))
    print(f"mined {len(mined)} rules -> {outdir / 'rules.rules'}")


def cmd_emit_asp(args) -> None:
    outdir = _start_run(args)
    ruleset = _load_rules(args.rules)
    program = asp.emit_weak_constraints(ruleset)
    (outdir / "program.lp").write_text(program.text, encoding="utf-8")
    logger.info("emitted %d weak constraints", len(ruleset))
    print(f"emitted {len(ruleset)} weak constraints -> {outdir / 'program.lp'}")


def cmd_augment(args) -> None:
    outdir = _start_run(args)
    data = corpus.load_dataset(args.train, split="train")
    ruleset = _load_rules(args.rules)
    augmented, summary = augment.augment_dataset(
        data, ruleset, max_growth=args.max_growth, closure=args.closure
    )
    corpus.write_dataset(augmented, outdir / "augmented.jsonl")
    write_json(
        outdir / "summary.json",
        {
            "original_size": summary.original_size,
            "added": summary.added,
            "growth_percent": round(summary.growth_percent, 4),
            "per_rule_added": [
                {"premise": a, "conclusion": b, "count": n}
                for (a, b), n in sorted(summary.per_rule_added.items())
            ],
        },
    )
    logger.info("added %d records (%.2f%%)", summary.added, summary.growth_percent)
    print(
        f"added {summary.added} records ({summary.growth_percent:.2f}%) "
        f"-> {outdir / 'augmented.jsonl'}"
    )


def cmd_train(args) -> None:
    outdir = _start_run(args)
    train_set = corpus.load_dataset(args.train, split="train")
    val_set = corpus.load_dataset(args.val, vocab=train_set.vocab, split="validation")
    ruleset = _load_rules(args.rules)
    vec_config = features.VectorizerConfig(
        lowercase=not args.no_lowercase,
        min_token_freq=args.min_token_freq,
        max_features=args.max_features,
    )
    vectorizer = features.fit_vectorizer([rec.text for rec in train_set.records], vec_config)
    features.save_vectorizer(vectorizer, outdir / "vectorizer.json")
    config = model.TrainConfig(
        beta=args.beta,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        early_stop_patience=args.patience,
        seed=args.seed,
        l2=args.l2,
        class_weight_cap=args.class_weight_cap,
    )
    trained, log = model.train(train_set, val_set, ruleset, config, vectorizer=vectorizer)
    model.save_checkpoint(trained, config, log, outdir / "checkpoint.json")
    best = log.epochs[log.best_epoch - 1]
    logger.info(
        "best epoch %d: val micro-F1 %.4f, val violations %d",
        log.best_epoch,
        best.val_micro_f1,
        best.val_violations,
    )
    print(
        f"trained {log.stopped_epoch} epochs (best {log.best_epoch}, "
        f"val micro-F1 {best.val_micro_f1:.4f}) -> {outdir / 'checkpoint.json'}"
    )


def _write_predictions(outdir: Path, batch: metrics.PredictionBatch, thresholds) -> None:
    write_json(
        outdir / "predictions.json",
        {
            "format": "rulebound-predictions",
            "version": 1,
            "doc_ids": list(batch.doc_ids),
            "vocab": list(batch.vocab.labels),
            "thresholds": [float(t) for t in thresholds.t],
            "probs": [[float(p) for p in row] for row in batch.probs],
            "decisions": [[int(v) for v in row] for row in batch.decisions],
        },
    )


def load_predictions(path: str | Path) -> metrics.PredictionBatch:
    payload = read_json(path)
    if payload.get("format") != "rulebound-predictions":
        raise ValueError(f"not a predictions file: {path}")
    return metrics.PredictionBatch(
        probs=np.array(payload["probs"], dtype=np.float64),
        decisions=np.array(payload["decisions"], dtype=np.int8),
        vocab=corpus.LabelVocab(tuple(payload["vocab"])),
        doc_ids=tuple(payload["doc_ids"]),
    )


def cmd_evaluate(args) -> None:
    outdir = _start_run(args)
    trained, _, _ = model.load_checkpoint(args.checkpoint)
    vectorizer = features.load_vectorizer(args.vectorizer)
    if vectorizer.ref != trained.vectorizer_ref:
        raise RuleboundError(
            f"vectorizer {vectorizer.ref} does not match checkpoint "
            f"reference {trained.vectorizer_ref}"
        )
    test_set = corpus.load_dataset(args.data, vocab=trained.vocab, split="test")
    ruleset = _load_rules(args.rules)
    probs = model.predict_probs(
        trained, features.vectorize_all([rec.text for rec in test_set.records], vectorizer)
    )
    if args.val is not None:
        val_set = corpus.load_dataset(args.val, vocab=trained.vocab, split="validation")
        val_probs = model.predict_probs(
            trained, features.vectorize_all([rec.text for rec in val_set.records], vectorizer)
        )
        thresholds = metrics.tune_thresholds(val_probs, corpus.labels_matrix(val_set))
    else:
        thresholds = metrics.Thresholds(t=np.full(len(trained.vocab), 0.5))
    write_json(outdir / "thresholds.json", {"t": [float(t) for t in thresholds.t]})
    batch = metrics.apply_thresholds(
        probs, thresholds, trained.vocab, tuple(rec.id for rec in test_set.records)
    )
    _write_predictions(outdir, batch, thresholds)
    report = metrics.compute_metrics(
        batch, corpus.labels_matrix(test_set), ruleset, zero_support=args.zero_support_f1
    )
    rendered = metrics.render_metrics_report(report)
    write_json(outdir / "metrics.json", rendered)
    logger.info(
        "micro-F1 %.4f, macro-F1 %.4f, violations %d",
        report.micro_f1,
        report.macro_f1,
        report.consistency.total,
    )
    print(
        f"micro_f1={rendered['micro_f1']} macro_f1={rendered['macro_f1']} "
        f"hamming={rendered['hamming']} violations={rendered['violations']} "
        f"viol_per_doc={rendered['viol_per_doc']} viol_per_1k={rendered['viol_per_1k']}"
    )


def cmd_audit(args) -> None:
    outdir = _start_run(args)
    batch = load_predictions(args.predictions)
    ruleset = _load_rules(args.rules)
    report = asp.audit_violations(batch, ruleset)
    write_json(outdir / "violations.json", asp.render_violation_report(report))
    line = (
        f"violations={report.total} rate={report.rate_percent:.4f}% "
        f"per_doc={report.per_doc:.4f} per_1k={report.per_1k:.1f}"
    )
    if args.clingo_path:
        check = asp.check_with_clingo(batch, ruleset, args.clingo_path)
        write_json(
            outdir / "clingo_check.json",
            {
                "docs_checked": check.docs_checked,
                "agree": check.agree,
                "mismatches": [
                    {"doc_id": doc, "premise": key[0], "conclusion": key[1],
                     "auditor": flag_a, "solver": flag_s}
                    for doc, key, flag_a, flag_s in check.mismatches
                ],
            },
        )
        if not check.agree:
            raise RuleboundError(
                f"auditor and clingo disagree on {len(check.mismatches)} flags"
            )
        line += f" clingo_agree={check.docs_checked}/{check.docs_checked}"
    logger.info("audited %d documents: %d violations", batch.num_docs, report.total)
    print(line + f" -> {outdir / 'violations.json'}")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rulebound",
        description="Rule-consistent multi-label classification pipeline",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with planted rules")
    p.add_argument("--num-records", type=int, default=1000)
    p.add_argument("--vocab-size", type=int, default=4)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--rules", help="planted rules file (soft_rule format)")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="seeded train/validation/test partition")
    p.add_argument("--input", required=True)
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--val-frac", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("mine-rules", help="mine soft implication rules from a training set")
    p.add_argument("--train", required=True)
    p.add_argument("--min-support", type=float, default=0.01)
    p.add_argument("--min-confidence", type=float, default=0.7)
    p.add_argument("--expert-rules", help="expert rules merged over mined ones")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_mine_rules)

    p = sub.add_parser("emit-asp", help="emit clingo weak constraints for a rules file")
    p.add_argument("--rules", required=True)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_emit_asp)

    p = sub.add_parser("augment", help="add rule-consistent copies to a training set")
    p.add_argument("--train", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--max-growth", type=float, default=None,
                   help="cap additions at this fraction of the original size")
    p.add_argument("--closure", action="store_true", help="apply rule chains to fixpoint")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train the classifier on the combined objective")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--rules")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--learning-rate", type=float, default=5e-3)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--l2", type=float, default=1e-6)
    p.add_argument("--class-weight-cap", type=_cap, default=100.0,
                   help="positive-weight clamp; 'none' matches the raw formula")
    p.add_argument("--min-token-freq", type=int, default=1)
    p.add_argument("--max-features", type=int, default=20000)
    p.add_argument("--no-lowercase", action="store_true")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint with tuned thresholds")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vectorizer", required=True)
    p.add_argument("--data", required=True, help="test split file")
    p.add_argument("--val", help="validation split file for threshold tuning")
    p.add_argument("--rules")
    p.add_argument("--zero-support-f1", choices=("one", "zero"), default="one")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("audit", help="audit saved predictions for rule violations")
    p.add_argument("--predictions", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--clingo-path", help="external clingo binary for the solver cross-check")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_audit)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (RuleboundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        _end_run()
    return 0


if __name__ == "__main__":
    sys.exit(main())
