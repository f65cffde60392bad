"""Deterministic TF-IDF vectorization over whitespace-free token runs."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .jsonio import content_ref, read_json, write_json

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+")

FORMAT_NAME = "rulebound-vectorizer"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class VectorizerConfig:
    lowercase: bool = True
    min_token_freq: int = 1
    max_features: int = 20000

    def __post_init__(self):
        if self.min_token_freq < 1:
            raise ValueError("min_token_freq must be >= 1")
        if self.max_features < 1:
            raise ValueError("max_features must be >= 1")


@dataclass(frozen=True)
class FeatureVector:
    """Sparse L2-normalized TF-IDF vector: sorted indices with matching values."""

    indices: np.ndarray
    values: np.ndarray
    dim: int


@dataclass(frozen=True)
class Vectorizer:
    token_vocab: dict[str, int]
    idf: np.ndarray
    config: VectorizerConfig = field(default_factory=VectorizerConfig)

    @property
    def dim(self) -> int:
        return len(self.token_vocab)

    def tokenize(self, text: str) -> list[str]:
        if self.config.lowercase:
            text = text.lower()
        return [tok for tok in _TOKEN_RE.findall(text) if len(tok) >= 2]

    def to_dict(self) -> dict:
        tokens = [None] * self.dim
        for token, j in self.token_vocab.items():
            tokens[j] = token
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "config": {
                "lowercase": self.config.lowercase,
                "min_token_freq": self.config.min_token_freq,
                "max_features": self.config.max_features,
            },
            "tokens": tokens,
            "idf": [float(x) for x in self.idf],
        }

    @property
    def ref(self) -> str:
        """Content identifier binding checkpoints to the feature space they use."""
        return content_ref(self.to_dict())


def fit_vectorizer(texts: list[str], config: VectorizerConfig | None = None) -> Vectorizer:
    """Build the token vocabulary and smoothed idf table from a corpus.

    Tokens are kept when their document frequency reaches min_token_freq;
    the vocabulary is truncated to max_features by descending document
    frequency (ties lexicographic) and indexed in lexicographic order.
    """
    if not texts:
        raise ValueError("cannot fit a vectorizer on an empty corpus")
    config = config or VectorizerConfig()
    helper = Vectorizer(token_vocab={}, idf=np.zeros(0), config=config)
    df: Counter[str] = Counter()
    for text in texts:
        df.update(set(helper.tokenize(text)))
    kept = [tok for tok, n in df.items() if n >= config.min_token_freq]
    kept.sort(key=lambda tok: (-df[tok], tok))
    kept = sorted(kept[: config.max_features])
    if not kept:
        raise ValueError("vocabulary is empty after frequency filtering")
    n_docs = len(texts)
    idf = np.array([np.log((1 + n_docs) / (1 + df[tok])) + 1.0 for tok in kept])
    return Vectorizer(token_vocab={tok: j for j, tok in enumerate(kept)}, idf=idf, config=config)


def vectorize(text: str, vectorizer: Vectorizer) -> FeatureVector:
    """TF-IDF weights, L2-normalized; out-of-vocabulary tokens are ignored."""
    counts = Counter(vectorizer.tokenize(text))
    pairs = sorted(
        (vectorizer.token_vocab[tok], n)
        for tok, n in counts.items()
        if tok in vectorizer.token_vocab
    )
    if not pairs:
        return FeatureVector(
            indices=np.zeros(0, dtype=np.int32),
            values=np.zeros(0),
            dim=vectorizer.dim,
        )
    indices = np.array([j for j, _ in pairs], dtype=np.int32)
    values = np.array([n for _, n in pairs], dtype=np.float64) * vectorizer.idf[indices]
    values /= np.linalg.norm(values)
    return FeatureVector(indices=indices, values=values, dim=vectorizer.dim)


def vectorize_all(texts: list[str], vectorizer: Vectorizer) -> sp.csr_matrix:
    """Stack per-text feature vectors into a CSR matrix of shape (N, dim)."""
    indptr = [0]
    indices: list[np.ndarray] = []
    data: list[np.ndarray] = []
    for text in texts:
        vec = vectorize(text, vectorizer)
        indices.append(vec.indices)
        data.append(vec.values)
        indptr.append(indptr[-1] + len(vec.indices))
    return sp.csr_matrix(
        (
            np.concatenate(data) if data else np.zeros(0),
            np.concatenate(indices) if indices else np.zeros(0, dtype=np.int32),
            np.array(indptr),
        ),
        shape=(len(texts), vectorizer.dim),
    )


def save_vectorizer(vectorizer: Vectorizer, path: str | Path) -> None:
    write_json(path, vectorizer.to_dict())


def load_vectorizer(path: str | Path) -> Vectorizer:
    payload = read_json(path)
    if payload.get("format") != FORMAT_NAME:
        raise ValueError(f"not a vectorizer file: {path}")
    if payload.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported vectorizer version {payload.get('version')}")
    cfg = VectorizerConfig(**payload["config"])
    return Vectorizer(
        token_vocab={tok: j for j, tok in enumerate(payload["tokens"])},
        idf=np.array(payload["idf"], dtype=np.float64),
        config=cfg,
    )
