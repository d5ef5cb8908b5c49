"""CBOW word embeddings with negative sampling and incremental model update.

Training predicts the center word from the mean of its context-word input
vectors, scored against output (context) vectors of the true center and of
negative samples drawn from the count^0.75 unigram distribution. The hot loop
is compiled with numba; single-threaded runs are bit-reproducible for a fixed
seed.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from math import exp, log, log1p
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .corpus import TemporalSlice, Vocabulary, vocabulary_from_counts
from .errors import (
    ConfigInvalid,
    EmptyCorpus,
    EmptySlice,
    EmptyVocabulary,
    FormatError,
    IdOutOfRange,
)

NEGATIVE_TABLE_POWER = 0.75


@dataclass
class EmbeddingConfig:
    dim: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    initial_lr: float = 0.025
    min_lr: float = 1e-4
    min_count: int = 2
    seed: int = 1

    def validate(self):
        if self.dim < 2:
            raise ConfigInvalid(f"dim must be >= 2, got {self.dim}")
        if self.window < 1 or self.negatives < 1 or self.min_count < 1:
            raise ConfigInvalid("window, negatives and min_count must be positive")
        if self.epochs < 0:
            raise ConfigInvalid("epochs must be >= 0")
        if self.initial_lr <= 0 or self.min_lr < 0 or self.min_lr > self.initial_lr:
            raise ConfigInvalid("need 0 <= min_lr <= initial_lr and initial_lr > 0")


def unigram_table(counts: np.ndarray) -> np.ndarray:
    """Normalized negative-sampling distribution: counts ** 0.75."""
    weights = counts.astype(np.float64) ** NEGATIVE_TABLE_POWER
    return weights / weights.sum()


@dataclass
class LookupStats:
    total: int = 0
    oov_count: int = 0


class EmbeddingLookup:
    """Word-to-vector bridge for the classifier; OOV words map to zeros."""

    oov_policy = "zeros"

    def __init__(self, vocab: Vocabulary, matrix: np.ndarray):
        self.vocab = vocab
        self.matrix = matrix
        self.stats = LookupStats()

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def vector(self, word: str) -> np.ndarray:
        self.stats.total += 1
        idx = self.vocab.id_of(word)
        if idx is None:
            self.stats.oov_count += 1
            return np.zeros(self.dim)
        return self.matrix[idx]

    def reset_stats(self):
        self.stats = LookupStats()


@dataclass
class EmbeddingModel:
    """Vocabulary plus input (target) and output (context) matrices."""

    vocab: Vocabulary
    input_matrix: np.ndarray
    output_matrix: np.ndarray
    unigram_table: np.ndarray
    config: EmbeddingConfig
    epoch_losses: list = field(default_factory=list)
    phase: int = 1

    @property
    def dim(self) -> int:
        return self.input_matrix.shape[1]

    def vector(self, word: str) -> np.ndarray:
        return self.lookup().vector(word)

    def lookup(self) -> EmbeddingLookup:
        return EmbeddingLookup(self.vocab, self.input_matrix)


def lookup(source, word: str) -> np.ndarray:
    """Input-matrix vector of a word from a model or aligned slice; OOV -> zeros."""
    return source.lookup().vector(word)


# ---------------------------------------------------------------------------
# numba kernels


@njit(cache=True, nogil=True)
def _sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def _log_sigmoid(x):
    if x >= 0.0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


@njit(cache=True, nogil=True)
def _cbow_epoch(W, C, tokens, offsets, windows, negatives, lr0, lr_min, u_start, total_updates):
    """One SGD pass updating both W and C; returns (summed loss, update count).

    All scores of a step are computed against the pre-update C so the step is
    exactly one simultaneous gradient step, even with duplicate negative ids.
    """
    dim = W.shape[1]
    n_neg = negatives.shape[1]
    h = np.empty(dim)
    grad_h = np.empty(dim)
    g_neg = np.empty(n_neg)
    loss_sum = 0.0
    steps = 0
    u = u_start
    for d in range(offsets.shape[0] - 1):
        start = offsets[d]
        end = offsets[d + 1]
        for i in range(start, end):
            lr = lr0 + (lr_min - lr0) * (u / total_updates)
            u += 1
            b = windows[i]
            lo = i - b
            if lo < start:
                lo = start
            hi = i + b
            if hi > end - 1:
                hi = end - 1
            n_ctx = hi - lo
            if n_ctx <= 0:
                continue
            for k in range(dim):
                h[k] = 0.0
                grad_h[k] = 0.0
            for j in range(lo, hi + 1):
                if j == i:
                    continue
                row = tokens[j]
                for k in range(dim):
                    h[k] += W[row, k]
            inv_ctx = 1.0 / n_ctx
            for k in range(dim):
                h[k] *= inv_ctx

            center = tokens[i]
            f = 0.0
            for k in range(dim):
                f += h[k] * C[center, k]
            loss_sum -= _log_sigmoid(f)
            g_pos = _sigmoid(f) - 1.0
            for k in range(dim):
                grad_h[k] += g_pos * C[center, k]

            for n in range(n_neg):
                target = negatives[i, n]
                if target == center:
                    g_neg[n] = 0.0
                    continue
                f = 0.0
                for k in range(dim):
                    f += h[k] * C[target, k]
                loss_sum -= _log_sigmoid(-f)
                g = _sigmoid(f)
                g_neg[n] = g
                for k in range(dim):
                    grad_h[k] += g * C[target, k]

            for k in range(dim):
                C[center, k] -= lr * g_pos * h[k]
            for n in range(n_neg):
                if g_neg[n] == 0.0:
                    continue
                target = negatives[i, n]
                for k in range(dim):
                    C[target, k] -= lr * g_neg[n] * h[k]

            for j in range(lo, hi + 1):
                if j == i:
                    continue
                row = tokens[j]
                for k in range(dim):
                    W[row, k] -= lr * grad_h[k] * inv_ctx
            steps += 1
    return loss_sum, steps


@njit(cache=True, nogil=True)
def _cbow_epoch_frozen(W, C, tokens, offsets, windows, negatives, lr0, lr_min, u_start, total_updates):
    """One SGD pass with the context matrix held fixed (compass alignment).

    Kept as a separate kernel so C can be passed as a read-only array; this
    function must never write to C.
    """
    dim = W.shape[1]
    h = np.empty(dim)
    grad_h = np.empty(dim)
    loss_sum = 0.0
    steps = 0
    u = u_start
    for d in range(offsets.shape[0] - 1):
        start = offsets[d]
        end = offsets[d + 1]
        for i in range(start, end):
            lr = lr0 + (lr_min - lr0) * (u / total_updates)
            u += 1
            b = windows[i]
            lo = i - b
            if lo < start:
                lo = start
            hi = i + b
            if hi > end - 1:
                hi = end - 1
            n_ctx = hi - lo
            if n_ctx <= 0:
                continue
            for k in range(dim):
                h[k] = 0.0
                grad_h[k] = 0.0
            for j in range(lo, hi + 1):
                if j == i:
                    continue
                row = tokens[j]
                for k in range(dim):
                    h[k] += W[row, k]
            inv_ctx = 1.0 / n_ctx
            for k in range(dim):
                h[k] *= inv_ctx

            center = tokens[i]
            f = 0.0
            for k in range(dim):
                f += h[k] * C[center, k]
            loss_sum -= _log_sigmoid(f)
            g = _sigmoid(f) - 1.0
            for k in range(dim):
                grad_h[k] += g * C[center, k]

            for n in range(negatives.shape[1]):
                target = negatives[i, n]
                if target == center:
                    continue
                f = 0.0
                for k in range(dim):
                    f += h[k] * C[target, k]
                loss_sum -= _log_sigmoid(-f)
                g = _sigmoid(f)
                for k in range(dim):
                    grad_h[k] += g * C[target, k]

            for j in range(lo, hi + 1):
                if j == i:
                    continue
                row = tokens[j]
                for k in range(dim):
                    W[row, k] -= lr * grad_h[k] * inv_ctx
            steps += 1
    return loss_sum, steps


# ---------------------------------------------------------------------------
# training


def _encode_corpus(docs: Sequence[Sequence[str]], vocab: Vocabulary):
    """Flatten documents into id arrays, dropping out-of-vocabulary tokens."""
    tokens = []
    offsets = [0]
    for doc in docs:
        ids = [vocab.word_to_id[t] for t in doc if t in vocab.word_to_id]
        tokens.extend(ids)
        offsets.append(len(tokens))
    return np.array(tokens, dtype=np.int64), np.array(offsets, dtype=np.int64)


def _init_input_rows(rng: np.random.Generator, rows: int, dim: int) -> np.ndarray:
    return (rng.random((rows, dim)) - 0.5) / dim


def _sample_negatives(rng, cdf, n, k):
    draws = np.searchsorted(cdf, rng.random((n, k)))
    return np.minimum(draws, cdf.shape[0] - 1).astype(np.int64)


def _train_phase(model: EmbeddingModel, docs, rng, freeze_context=False):
    """Run the configured number of epochs over docs, mutating model matrices."""
    cfg = model.config
    tokens, offsets = _encode_corpus(docs, model.vocab)
    n = tokens.shape[0]
    if n == 0 or cfg.epochs == 0:
        return n
    cdf = np.cumsum(model.unigram_table)
    total_updates = float(n) * cfg.epochs
    kernel = _cbow_epoch_frozen if freeze_context else _cbow_epoch
    for epoch in range(cfg.epochs):
        windows = rng.integers(1, cfg.window + 1, size=n).astype(np.int64)
        negatives = _sample_negatives(rng, cdf, n, cfg.negatives)
        loss_sum, steps = kernel(
            model.input_matrix,
            model.output_matrix,
            tokens,
            offsets,
            windows,
            negatives,
            cfg.initial_lr,
            cfg.min_lr,
            float(epoch * n),
            total_updates,
        )
        model.epoch_losses.append(loss_sum / steps if steps else 0.0)
    return n


def train_cbow(corpus: Sequence[Sequence[str]], config: EmbeddingConfig) -> EmbeddingModel:
    """Train a CBOW model from scratch on tokenized documents."""
    config.validate()
    counts = Counter()
    for doc in corpus:
        counts.update(doc)
    if not counts:
        raise EmptyCorpus("corpus contains no tokens")
    try:
        vocab = vocabulary_from_counts(counts, config.min_count)
    except EmptyVocabulary:
        raise
    rng = np.random.default_rng([config.seed, 0])
    model = EmbeddingModel(
        vocab=vocab,
        input_matrix=_init_input_rows(rng, len(vocab), config.dim),
        output_matrix=np.zeros((len(vocab), config.dim)),
        unigram_table=unigram_table(vocab.counts),
        config=config,
    )
    _train_phase(model, corpus, rng)
    return model


def update_incremental(model: EmbeddingModel, new_slice: TemporalSlice, config: Optional[EmbeddingConfig] = None) -> EmbeddingModel:
    """Grow the vocabulary with the new slice and continue training on it only.

    Pre-existing word ids are preserved; new words meeting min_count are
    appended. The learning-rate schedule restarts for the new slice.
    """
    cfg = config if config is not None else model.config
    cfg.validate()
    if cfg.dim != model.dim:
        raise ConfigInvalid(f"config dim {cfg.dim} does not match model dim {model.dim}")
    new_counts = Counter()
    for doc in new_slice.documents:
        new_counts.update(doc)
    if not new_counts:
        raise EmptySlice(f"slice {new_slice.year} contains no tokens")

    fresh = [
        (w, c)
        for w, c in new_counts.items()
        if w not in model.vocab.word_to_id and c >= cfg.min_count
    ]
    fresh.sort(key=lambda wc: (-wc[1], wc[0]))

    id_to_word = list(model.vocab.id_to_word) + [w for w, _ in fresh]
    word_to_id = dict(model.vocab.word_to_id)
    for w, _ in fresh:
        word_to_id[w] = len(word_to_id)
    counts = np.zeros(len(id_to_word), dtype=np.int64)
    counts[: len(model.vocab)] = model.vocab.counts
    for w, c in new_counts.items():
        idx = word_to_id.get(w)
        if idx is not None:
            counts[idx] += c
    vocab = Vocabulary(
        word_to_id=word_to_id, id_to_word=id_to_word, counts=counts, min_count=cfg.min_count
    )

    rng = np.random.default_rng([cfg.seed, model.phase])
    n_new = len(fresh)
    input_matrix = np.vstack([model.input_matrix, _init_input_rows(rng, n_new, cfg.dim)]) if n_new else model.input_matrix.copy()
    output_matrix = np.vstack([model.output_matrix, np.zeros((n_new, cfg.dim))]) if n_new else model.output_matrix.copy()

    updated = EmbeddingModel(
        vocab=vocab,
        input_matrix=input_matrix,
        output_matrix=output_matrix,
        unigram_table=unigram_table(counts),
        config=cfg,
        phase=model.phase + 1,
    )
    _train_phase(updated, new_slice.documents, rng)
    return updated


# ---------------------------------------------------------------------------
# reference inner step (kept independent of the compiled path for checking)


@dataclass
class CbowStepGradients:
    """Gradients for exactly the rows touched by one CBOW step."""

    input_rows: dict
    output_rows: dict


def _py_sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def _py_log_sigmoid(x: float) -> float:
    if x >= 0.0:
        return -log1p(exp(-x))
    return x - log1p(exp(x))


def cbow_loss_and_grad(model: EmbeddingModel, center_id: int, context_ids: Sequence[int], negative_ids: Sequence[int]):
    """Loss and touched-row gradients for a single CBOW training example."""
    size = len(model.vocab)
    if len(context_ids) == 0:
        raise IdOutOfRange("context_ids must be nonempty")
    for idx in [center_id, *context_ids, *negative_ids]:
        if not 0 <= idx < size:
            raise IdOutOfRange(f"id {idx} outside [0, {size})")

    ctx = np.asarray(context_ids, dtype=np.int64)
    h = model.input_matrix[ctx].mean(axis=0)
    output_rows = {}
    f_pos = float(h @ model.output_matrix[center_id])
    loss = -_py_log_sigmoid(f_pos)
    g_pos = _py_sigmoid(f_pos) - 1.0
    grad_h = g_pos * model.output_matrix[center_id].copy()
    output_rows[center_id] = g_pos * h
    for neg in negative_ids:
        f_neg = float(h @ model.output_matrix[neg])
        loss -= _py_log_sigmoid(-f_neg)
        g_neg = _py_sigmoid(f_neg)
        grad_h = grad_h + g_neg * model.output_matrix[neg]
        if neg in output_rows:
            output_rows[neg] = output_rows[neg] + g_neg * h
        else:
            output_rows[neg] = g_neg * h

    input_rows = {}
    per_row = grad_h / len(ctx)
    for idx in ctx:
        idx = int(idx)
        if idx in input_rows:
            input_rows[idx] = input_rows[idx] + per_row
        else:
            input_rows[idx] = per_row.copy()
    return loss, CbowStepGradients(input_rows=input_rows, output_rows=output_rows)


# ---------------------------------------------------------------------------
# persistence (word2vec-style text format, context matrix in a sidecar)


def _context_path(path: Path) -> Path:
    return path.with_name(path.name + ".ctx")


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _write_matrix(path: Path, words: Sequence[str], matrix: np.ndarray):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{matrix.shape[0]} {matrix.shape[1]}\n")
        for word, row in zip(words, matrix):
            fh.write(word + " " + " ".join(f"{v:.9g}" for v in row) + "\n")


def _read_matrix(path: Path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise FormatError(f"expected '<vocab_size> <dim>' header in {path}", line=1)
        try:
            size, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(f"non-integer header in {path}", line=1) from None
        words = []
        matrix = np.empty((size, dim))
        for i in range(size):
            line = fh.readline()
            if not line:
                raise FormatError(f"expected {size} word lines in {path}", line=i + 2)
            fields = line.split()
            if len(fields) != dim + 1:
                raise FormatError(
                    f"expected {dim} values in {path}", line=i + 2, word=fields[0] if fields else ""
                )
            words.append(fields[0])
            try:
                matrix[i] = [float(v) for v in fields[1:]]
            except ValueError:
                raise FormatError(f"non-numeric value in {path}", line=i + 2, word=fields[0]) from None
    return words, matrix


def save_model(model: EmbeddingModel, path) -> Path:
    """Write W, the context matrix sidecar, and a metadata sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_matrix(path, model.vocab.id_to_word, model.input_matrix)
    _write_matrix(_context_path(path), model.vocab.id_to_word, model.output_matrix)
    meta = {
        "counts": model.vocab.counts.tolist(),
        "min_count": model.vocab.min_count,
        "config": asdict(model.config),
        "phase": model.phase,
    }
    with open(_meta_path(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
    return path


def load_model(path) -> EmbeddingModel:
    path = Path(path)
    words, input_matrix = _read_matrix(path)
    ctx_words, output_matrix = _read_matrix(_context_path(path))
    if ctx_words != words:
        raise FormatError(f"context sidecar vocabulary does not match {path}", line=2)
    meta_path = _meta_path(path)
    if meta_path.exists():
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
        counts = np.asarray(meta["counts"], dtype=np.int64)
        min_count = int(meta["min_count"])
        config = EmbeddingConfig(**meta["config"])
        phase = int(meta.get("phase", 1))
    else:
        counts = np.ones(len(words), dtype=np.int64)
        min_count = 1
        config = replace(EmbeddingConfig(), dim=input_matrix.shape[1])
        phase = 1
    vocab = Vocabulary(
        word_to_id={w: i for i, w in enumerate(words)},
        id_to_word=list(words),
        counts=counts,
        min_count=min_count,
    )
    return EmbeddingModel(
        vocab=vocab,
        input_matrix=input_matrix,
        output_matrix=output_matrix,
        unigram_table=unigram_table(counts),
        config=config,
        phase=phase,
    )
