"""Sparse-input linear multi-label classifier trained on the combined objective.

The objective is class-weighted binary cross-entropy plus a hinge-style fuzzy
implication penalty; both are realized as batch means so gradient scale does
not depend on batch size. Gradients are analytic and checked against finite
differences in the test suite.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .corpus import Dataset, LabelVocab, labels_matrix
from .errors import TrainingDiverged
from .features import FeatureVector, Vectorizer, fit_vectorizer, vectorize_all
from .jsonio import read_json, write_json
from .metrics import PredictionBatch, micro_f1
from .rules import RuleSet
from . import asp

PROB_EPS = 1e-7
FORMAT_NAME = "rulebound-checkpoint"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ClassWeights:
    """Per-label positive-term weights countering class imbalance."""

    w: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.w)) or np.any(self.w <= 0):
            raise ValueError("class weights must be finite and positive")


@dataclass(frozen=True)
class TrainConfig:
    beta: float = 0.5
    learning_rate: float = 5e-3
    epochs: int = 50
    batch_size: int = 32
    early_stop_patience: int = 5
    seed: int = 0
    l2: float = 1e-6
    class_weight_cap: float | None = 100.0

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1 or self.batch_size < 1 or self.early_stop_patience < 1:
            raise ValueError("epochs, batch_size and early_stop_patience must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")


@dataclass(frozen=True)
class Model:
    weights: np.ndarray  # (m, d)
    bias: np.ndarray  # (m,)
    vocab: LabelVocab
    vectorizer_ref: str

    def __post_init__(self):
        if self.weights.shape[0] != len(self.vocab) or self.bias.shape != (len(self.vocab),):
            raise ValueError("parameter shapes do not match the label vocabulary")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("model parameters must be finite")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    bce: float
    fuzzy: float
    total: float
    val_micro_f1: float
    val_violations: int


@dataclass(frozen=True)
class TrainLog:
    epochs: tuple[EpochStats, ...]
    best_epoch: int
    stopped_epoch: int
    initial_loss: float


def compute_class_weights(dataset: Dataset, cap: float | None = 100.0) -> ClassWeights:
    """w_j = n_neg / (n_pos + 1e-5), clamped to [1e-3, cap] unless cap is None."""
    if dataset.split != "train":
        raise ValueError(f"class weights come from the train split, got {dataset.split!r}")
    y = labels_matrix(dataset)
    n_pos = y.sum(axis=0).astype(np.float64)
    n_neg = len(dataset) - n_pos
    w = n_neg / (n_pos + 1e-5)
    if cap is not None:
        w = np.clip(w, 1e-3, cap)
    return ClassWeights(w=w)


def forward(model: Model, features: FeatureVector) -> tuple[np.ndarray, np.ndarray]:
    """Logits and sigmoid probabilities for one feature vector."""
    if features.dim != model.weights.shape[1]:
        raise ValueError(
            f"feature dim {features.dim} != model dim {model.weights.shape[1]}"
        )
    logits = model.weights[:, features.indices] @ features.values + model.bias
    return logits, expit(logits)


def predict_probs(model: Model, x: sp.csr_matrix) -> np.ndarray:
    """(N, m) probabilities for a CSR feature matrix."""
    if x.shape[1] != model.weights.shape[1]:
        raise ValueError(f"feature dim {x.shape[1]} != model dim {model.weights.shape[1]}")
    return expit(x @ model.weights.T + model.bias)


def bce_loss(
    probs: np.ndarray, targets: np.ndarray, class_weights: ClassWeights
) -> tuple[float, np.ndarray]:
    """Class-weighted BCE and its gradient w.r.t. logits.

    Accepts one sample (m,) or a batch (B, m); batches are averaged so the
    returned gradient already carries the 1/B factor. Probabilities are
    clamped to [1e-7, 1 - 1e-7] before the logs.
    """
    p = np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)
    y = np.asarray(targets, dtype=np.float64)
    w = class_weights.w
    per_cell = -(w * y * np.log(p) + (1.0 - y) * np.log1p(-p))
    grad = (1.0 - y) * p - w * y * (1.0 - p)
    if p.ndim == 1:
        return float(per_cell.sum()), grad
    batch = p.shape[0]
    return float(per_cell.sum() / batch), grad / batch


def fuzzy_loss(
    probs: np.ndarray, rules: RuleSet, beta: float, vocab: LabelVocab
) -> tuple[float, np.ndarray]:
    """Weighted mean hinge violation max(0, p_premise - p_conclusion) over rules.

    Returns the loss (with beta applied) and its subgradient w.r.t. the
    probabilities; at p_premise == p_conclusion the zero subgradient is used.
    """
    p = np.asarray(probs, dtype=np.float64)
    single = p.ndim == 1
    p2 = p[None, :] if single else p
    grad = np.zeros_like(p2)
    if len(rules) == 0 or beta == 0.0:
        return 0.0, grad[0] if single else grad
    batch = p2.shape[0]
    n_rules = len(rules)
    total = 0.0
    for rule in rules.rules:
        ia = vocab.position(rule.premise)
        ib = vocab.position(rule.conclusion)
        diff = p2[:, ia] - p2[:, ib]
        active = diff > 0
        total += rule.weight * (diff[active].sum() / batch)
        unit = rule.weight / (n_rules * batch)
        grad[active, ia] += unit
        grad[active, ib] -= unit
    # beta is applied once at the end so scaling by beta is float-exact
    loss = beta * (total / n_rules)
    grad = beta * grad
    return float(loss), grad[0] if single else grad


def total_loss(bce: float, fuzzy: float) -> float:
    """Combined objective; the fuzzy term already includes its beta factor."""
    if not (np.isfinite(bce) and np.isfinite(fuzzy)):
        raise ValueError(f"non-finite loss terms: bce={bce}, fuzzy={fuzzy}")
    return bce + fuzzy


def dataset_loss(
    model_w: np.ndarray,
    model_b: np.ndarray,
    x: sp.csr_matrix,
    y: np.ndarray,
    rules: RuleSet,
    beta: float,
    class_weights: ClassWeights,
    vocab: LabelVocab,
) -> tuple[float, float, float]:
    """Full-dataset (bce, fuzzy, total) at the given parameters."""
    p = expit(x @ model_w.T + model_b)
    bce, _ = bce_loss(p, y, class_weights)
    fuzzy, _ = fuzzy_loss(p, rules, beta, vocab) if beta > 0 and len(rules) else (0.0, None)
    return bce, fuzzy, bce + fuzzy


class _Adam:
    """Per-coordinate adaptive moments with bias correction."""

    def __init__(self, params: list[np.ndarray], lr: float, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
            m_hat = self.m[i] / (1 - self.b1**self.t)
            v_hat = self.v[i] / (1 - self.b2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train(
    train_set: Dataset,
    val_set: Dataset,
    rules: RuleSet,
    config: TrainConfig,
    vectorizer: Vectorizer | None = None,
) -> tuple[Model, TrainLog]:
    """Mini-batch Adam on the combined objective with early stopping.

    Validation micro-F1 at threshold 0.5 drives early stopping; the returned
    model is the best-validation checkpoint. All randomness (init, shuffles)
    flows from config.seed, so identical configs give identical models.
    With beta == 0 or an empty rule set the fuzzy code path is skipped
    entirely, making the beta = 0 run the exact BCE baseline.
    """
    if train_set.split != "train":
        raise ValueError(f"expected a train split, got {train_set.split!r}")
    if val_set.split != "validation":
        raise ValueError(f"expected a validation split, got {val_set.split!r}")
    if train_set.vocab != val_set.vocab:
        raise ValueError("train and validation sets must share one label vocabulary")
    if vectorizer is None:
        vectorizer = fit_vectorizer([rec.text for rec in train_set.records])

    vocab = train_set.vocab
    x = vectorize_all([rec.text for rec in train_set.records], vectorizer)
    y = labels_matrix(train_set).astype(np.float64)
    x_val = vectorize_all([rec.text for rec in val_set.records], vectorizer)
    y_val = labels_matrix(val_set)
    class_weights = compute_class_weights(train_set, cap=config.class_weight_cap)

    use_fuzzy = config.beta > 0 and len(rules) > 0
    if config.beta > 0 and len(rules) == 0:
        warnings.warn("beta > 0 with an empty rule set; the fuzzy term is zero")
    if use_fuzzy:
        for rule in rules.rules:
            vocab.position(rule.premise)
            vocab.position(rule.conclusion)

    rng = np.random.default_rng(config.seed)
    n, m = x.shape[0], len(vocab)
    weights = rng.normal(0.0, 0.01, size=(m, vectorizer.dim))
    bias = np.zeros(m)
    _, _, initial_loss = dataset_loss(
        weights, bias, x, y, rules, config.beta if use_fuzzy else 0.0, class_weights, vocab
    )
    if not np.isfinite(initial_loss):
        raise TrainingDiverged(f"non-finite loss at initialization: {initial_loss}")

    adam = _Adam([weights, bias], lr=config.learning_rate)
    best_w, best_b = weights.copy(), bias.copy()
    best_f1, best_epoch, since_best = -1.0, 0, 0
    log: list[EpochStats] = []
    stopped_epoch = 0

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        bce_sum = 0.0
        fuzzy_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb = x[idx]
            yb = y[idx]
            probs = expit(xb @ weights.T + bias)
            bce, grad_z = bce_loss(probs, yb, class_weights)
            if use_fuzzy:
                fuzzy, grad_p = fuzzy_loss(probs, rules, config.beta, vocab)
                grad_z = grad_z + grad_p * probs * (1.0 - probs)
            else:
                fuzzy = 0.0
            loss = bce + fuzzy
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}: "
                    f"bce={bce}, fuzzy={fuzzy}"
                )
            grad_w = (xb.T @ grad_z).T + config.l2 * weights
            grad_b = grad_z.sum(axis=0)
            adam.step([weights, bias], [grad_w, grad_b])
            bce_sum += bce * len(idx)
            fuzzy_sum += fuzzy * len(idx)

        probs_val = expit(x_val @ weights.T + bias)
        decisions_val = (probs_val >= 0.5).astype(np.int8)
        val_f1 = micro_f1(decisions_val, y_val)
        val_batch = PredictionBatch(
            probs=probs_val,
            decisions=decisions_val,
            vocab=vocab,
            doc_ids=tuple(rec.id for rec in val_set.records),
        )
        val_violations = asp.audit_violations(val_batch, rules).total if len(rules) else 0
        log.append(
            EpochStats(
                epoch=epoch,
                bce=bce_sum / n,
                fuzzy=fuzzy_sum / n,
                total=(bce_sum + fuzzy_sum) / n,
                val_micro_f1=val_f1,
                val_violations=val_violations,
            )
        )
        if val_f1 > best_f1:
            best_f1, best_epoch, since_best = val_f1, epoch, 0
            best_w, best_b = weights.copy(), bias.copy()
        else:
            since_best += 1
            if since_best >= config.early_stop_patience:
                stopped_epoch = epoch
                break
        stopped_epoch = epoch

    model = Model(weights=best_w, bias=best_b, vocab=vocab, vectorizer_ref=vectorizer.ref)
    train_log = TrainLog(
        epochs=tuple(log),
        best_epoch=best_epoch,
        stopped_epoch=stopped_epoch,
        initial_loss=initial_loss,
    )
    return model, train_log


# ---------------------------------------------------------------------------
# Checkpoint persistence
# ---------------------------------------------------------------------------

def save_checkpoint(model: Model, config: TrainConfig, log: TrainLog, path: str | Path) -> None:
    write_json(
        path,
        {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "vocab": list(model.vocab.labels),
            "vectorizer_ref": model.vectorizer_ref,
            "config": {
                "beta": config.beta,
                "learning_rate": config.learning_rate,
                "epochs": config.epochs,
                "batch_size": config.batch_size,
                "early_stop_patience": config.early_stop_patience,
                "seed": config.seed,
                "l2": config.l2,
                "class_weight_cap": config.class_weight_cap,
            },
            "weights": [[float(v) for v in row] for row in model.weights],
            "bias": [float(v) for v in model.bias],
            "train_log": {
                "best_epoch": log.best_epoch,
                "stopped_epoch": log.stopped_epoch,
                "initial_loss": log.initial_loss,
                "epochs": [
                    {
                        "epoch": e.epoch,
                        "bce": e.bce,
                        "fuzzy": e.fuzzy,
                        "total": e.total,
                        "val_micro_f1": e.val_micro_f1,
                        "val_violations": e.val_violations,
                    }
                    for e in log.epochs
                ],
            },
        },
    )


def load_checkpoint(path: str | Path) -> tuple[Model, TrainConfig, TrainLog]:
    payload = read_json(path)
    if payload.get("format") != FORMAT_NAME:
        raise ValueError(f"not a checkpoint file: {path}")
    if payload.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    model = Model(
        weights=np.array(payload["weights"], dtype=np.float64),
        bias=np.array(payload["bias"], dtype=np.float64),
        vocab=LabelVocab(tuple(payload["vocab"])),
        vectorizer_ref=payload["vectorizer_ref"],
    )
    config = TrainConfig(**payload["config"])
    raw_log = payload["train_log"]
    log = TrainLog(
        epochs=tuple(EpochStats(**entry) for entry in raw_log["epochs"]),
        best_epoch=raw_log["best_epoch"],
        stopped_epoch=raw_log["stopped_epoch"],
        initial_loss=raw_log["initial_loss"],
    )
    return model, config, log
