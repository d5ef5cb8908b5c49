"""Text CNN stance classifier with hand-rolled backprop and Adam.

One convolution bank (num_filters kernels of width kernel_width over the full
embedding depth), ReLU, max-pooling over positions, a dense layer and softmax.
Embedding vectors are fixed inputs; only CNN parameters train, so the embedding
strategy stays the sole moving part across experiments.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import LabelledPost, StanceLabel
from .embedding import EmbeddingLookup
from .errors import ConfigInvalid, EmptyTraining, FormatError, LengthMismatch, ShapeMismatch

LABEL_ORDER = (StanceLabel.SUPPORT, StanceLabel.OPPOSE)
_LABEL_INDEX = {label: i for i, label in enumerate(LABEL_ORDER)}


@dataclass
class ClassifierConfig:
    num_filters: int = 32
    kernel_width: int = 5
    max_len: int = 32
    lr: float = 2e-5
    epochs: int = 10
    batch_size: int = 32
    num_classes: int = 2
    seed: int = 1

    def validate(self):
        for name in ("num_filters", "kernel_width", "max_len", "epochs", "batch_size", "num_classes"):
            if getattr(self, name) < 1:
                raise ConfigInvalid(f"{name} must be positive")
        if self.lr <= 0:
            raise ConfigInvalid("lr must be positive")
        if self.kernel_width > self.max_len:
            raise ConfigInvalid(
                f"kernel_width {self.kernel_width} exceeds max_len {self.max_len}"
            )


@dataclass
class EncodedPost:
    matrix: np.ndarray
    label: Optional[StanceLabel] = None


def encode(tokens: Sequence[str], lookup: EmbeddingLookup, max_len: int) -> np.ndarray:
    """First max_len tokens as lookup rows; shorter posts zero-padded."""
    out = np.zeros((max_len, lookup.dim))
    for i, tok in enumerate(tokens[:max_len]):
        out[i] = lookup.vector(tok)
    return out


def encode_posts(posts: Iterable[LabelledPost], lookup: EmbeddingLookup, max_len: int) -> list:
    return [
        EncodedPost(matrix=encode(p.tokens, lookup, max_len), label=p.label) for p in posts
    ]


@dataclass
class TextCNN:
    filters: np.ndarray       # (num_filters, kernel_width, dim)
    filter_bias: np.ndarray   # (num_filters,)
    dense_w: np.ndarray       # (num_filters, num_classes)
    dense_b: np.ndarray       # (num_classes,)
    config: ClassifierConfig
    dim: int
    train_loss_history: list = field(default_factory=list)
    eval_f1_history: list = field(default_factory=list)

    @classmethod
    def init(cls, config: ClassifierConfig, dim: int, rng: np.random.Generator) -> "TextCNN":
        config.validate()
        return cls(
            filters=rng.normal(0.0, 0.1, (config.num_filters, config.kernel_width, dim)),
            filter_bias=np.zeros(config.num_filters),
            dense_w=rng.normal(0.0, 0.1, (config.num_filters, config.num_classes)),
            dense_b=np.zeros(config.num_classes),
            config=config,
            dim=dim,
        )

    def parameters(self) -> dict:
        return {
            "filters": self.filters,
            "filter_bias": self.filter_bias,
            "dense_w": self.dense_w,
            "dense_b": self.dense_b,
        }


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=-1, keepdims=True)


def _as_batch(cnn: TextCNN, encoded) -> np.ndarray:
    if isinstance(encoded, EncodedPost):
        encoded = encoded.matrix
    arr = np.asarray(encoded, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3 or arr.shape[1] != cnn.config.max_len or arr.shape[2] != cnn.dim:
        raise ShapeMismatch(
            f"expected (batch, {cnn.config.max_len}, {cnn.dim}) input, got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ShapeMismatch("input contains non-finite values")
    return arr


def _forward_batch(cnn: TextCNN, batch: np.ndarray):
    """Returns (probs, cache) where cache feeds the backward pass."""
    n, max_len, dim = batch.shape
    kw = cnn.config.kernel_width
    positions = max_len - kw + 1
    # im2col: (n, positions, kw * dim), window layout matching filters (kw, dim)
    windows = np.lib.stride_tricks.sliding_window_view(batch, kw, axis=1)
    columns = np.ascontiguousarray(windows.transpose(0, 1, 3, 2)).reshape(n, positions, kw * dim)
    flat_filters = cnn.filters.reshape(cnn.config.num_filters, kw * dim)
    conv = columns @ flat_filters.T + cnn.filter_bias
    activated = np.maximum(conv, 0.0)
    argmax = activated.argmax(axis=1)            # first max wins on ties
    pooled = np.take_along_axis(activated, argmax[:, None, :], axis=1)[:, 0, :]
    logits = pooled @ cnn.dense_w + cnn.dense_b
    probs = _softmax(logits)
    return probs, (columns, argmax, pooled)


def forward(cnn: TextCNN, encoded) -> np.ndarray:
    """Class probabilities for one encoded post or a batch of them."""
    arr = _as_batch(cnn, encoded)
    probs, _ = _forward_batch(cnn, arr)
    if not isinstance(encoded, EncodedPost) and np.asarray(encoded).ndim == 3:
        return probs
    return probs[0]


def _backward_batch(cnn: TextCNN, cache, probs: np.ndarray, label_idx: np.ndarray) -> dict:
    """Gradients of mean cross-entropy w.r.t. every CNN parameter."""
    columns, argmax, pooled = cache
    n = probs.shape[0]
    dlogits = probs.copy()
    dlogits[np.arange(n), label_idx] -= 1.0
    dlogits /= n
    g_dense_w = pooled.T @ dlogits
    g_dense_b = dlogits.sum(axis=0)
    dpooled = dlogits @ cnn.dense_w.T
    # Gradient flows only to the argmax position of each filter, and only when
    # the pooled activation is strictly positive (ReLU subgradient 0 at 0).
    dpooled = dpooled * (pooled > 0.0)
    dconv = np.zeros((n, columns.shape[1], cnn.config.num_filters))
    np.put_along_axis(dconv, argmax[:, None, :], dpooled[:, None, :], axis=1)
    g_filters = np.tensordot(dconv, columns, axes=([0, 1], [0, 1])).reshape(cnn.filters.shape)
    g_filter_bias = dconv.sum(axis=(0, 1))
    return {
        "filters": g_filters,
        "filter_bias": g_filter_bias,
        "dense_w": g_dense_w,
        "dense_b": g_dense_b,
    }


def _batch_loss(probs: np.ndarray, label_idx: np.ndarray) -> float:
    picked = probs[np.arange(probs.shape[0]), label_idx]
    return float(-np.mean(np.log(np.maximum(picked, 1e-300))))


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter array."""

    m: dict
    v: dict
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: dict) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )

    def step(self, params: dict, grads: dict, lr: float):
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for key, param in params.items():
            g = grads[key]
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            m_hat = self.m[key] / b1c
            v_hat = self.v[key] / b2c
            param -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _stack(posts: Sequence[EncodedPost]):
    batch = np.stack([p.matrix for p in posts])
    labels = np.array([_LABEL_INDEX[p.label] for p in posts], dtype=np.int64)
    return batch, labels


def train_classifier(
    train: Sequence[EncodedPost],
    eval_posts: Sequence[EncodedPost],
    config: ClassifierConfig,
) -> TextCNN:
    """Adam on mean cross-entropy for exactly config.epochs epochs.

    The eval split is scored (macro-F1) once per epoch for monitoring only; no
    early stopping, the last epoch's parameters are returned.
    """
    config.validate()
    if not train:
        raise EmptyTraining("training set is empty")
    dim = train[0].matrix.shape[1]
    for post in train:
        if post.matrix.shape != (config.max_len, dim):
            raise ShapeMismatch(
                f"encoded post shape {post.matrix.shape} != ({config.max_len}, {dim})"
            )
    rng = np.random.default_rng([config.seed, 0])
    cnn = TextCNN.init(config, dim, rng)
    batch_all, labels_all = _stack(train)
    adam = AdamState.for_params(cnn.parameters())
    params = cnn.parameters()
    n = len(train)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            batch = batch_all[idx]
            labels = labels_all[idx]
            probs, cache = _forward_batch(cnn, batch)
            epoch_loss += _batch_loss(probs, labels)
            n_batches += 1
            grads = _backward_batch(cnn, cache, probs, labels)
            adam.step(params, grads, config.lr)
        cnn.train_loss_history.append(epoch_loss / n_batches)
        if eval_posts:
            cnn.eval_f1_history.append(macro_f1(predict(cnn, eval_posts), [p.label for p in eval_posts]))
    return cnn


def predict(cnn: TextCNN, posts: Sequence[EncodedPost]) -> list:
    batch = np.stack([p.matrix for p in posts])
    probs, _ = _forward_batch(cnn, _as_batch(cnn, batch))
    return [LABEL_ORDER[i] for i in probs.argmax(axis=1)]


def predict_proba(cnn: TextCNN, posts: Sequence[EncodedPost]) -> np.ndarray:
    batch = np.stack([p.matrix for p in posts])
    probs, _ = _forward_batch(cnn, _as_batch(cnn, batch))
    return probs


# ---------------------------------------------------------------------------
# metrics


def macro_f1(predictions: Sequence[StanceLabel], golds: Sequence[StanceLabel]) -> float:
    """Unweighted mean of per-class F1 over both stance classes."""
    if len(predictions) != len(golds) or not golds:
        raise LengthMismatch(
            f"need equal nonempty prediction/gold lists, got {len(predictions)}/{len(golds)}"
        )
    scores = []
    for label in LABEL_ORDER:
        tp = sum(1 for p, g in zip(predictions, golds) if p is label and g is label)
        fp = sum(1 for p, g in zip(predictions, golds) if p is label and g is not label)
        fn = sum(1 for p, g in zip(predictions, golds) if p is not label and g is label)
        denom = 2 * tp + fp + fn
        if denom == 0:
            warnings.warn(
                f"class {label.value} absent from predictions and golds; scoring it 0",
                stacklevel=2,
            )
            scores.append(0.0)
        else:
            scores.append(2 * tp / denom)
    return float(np.mean(scores))


# ---------------------------------------------------------------------------
# gradient verification


def _loss_on_batch(cnn: TextCNN, batch: np.ndarray, label_idx: np.ndarray) -> float:
    probs, _ = _forward_batch(cnn, batch)
    return _batch_loss(probs, label_idx)


def gradients_check(cnn: TextCNN, batch, label_idx=None, epsilon: float = 1e-5) -> float:
    """Max relative error of analytic gradients vs central finite differences.

    Meant for small models; every parameter component is perturbed twice.
    """
    if label_idx is None:
        batch, label_idx = batch
    batch = np.asarray(batch, dtype=np.float64)
    label_idx = np.asarray(label_idx, dtype=np.int64)
    probs, cache = _forward_batch(cnn, batch)
    grads = _backward_batch(cnn, cache, probs, label_idx)
    worst = 0.0
    for key, param in cnn.parameters().items():
        analytic = grads[key]
        flat = param.reshape(-1)
        for i in range(flat.shape[0]):
            original = flat[i]
            flat[i] = original + epsilon
            hi = _loss_on_batch(cnn, batch, label_idx)
            flat[i] = original - epsilon
            lo = _loss_on_batch(cnn, batch, label_idx)
            flat[i] = original
            numeric = (hi - lo) / (2.0 * epsilon)
            a = analytic.reshape(-1)[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            worst = max(worst, rel)
    return worst


# ---------------------------------------------------------------------------
# persistence

_PARAM_ORDER = ("filters", "filter_bias", "dense_w", "dense_b")


def save_checkpoint(cnn: TextCNN, path) -> Path:
    """Flat float64 parameter blob after a single JSON header line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format": "tempstance-cnn",
        "version": 1,
        "dim": cnn.dim,
        "config": asdict(cnn.config),
        "seed": cnn.config.seed,
        "shapes": {k: list(v.shape) for k, v in cnn.parameters().items()},
        "order": list(_PARAM_ORDER),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for key in _PARAM_ORDER:
            fh.write(np.ascontiguousarray(cnn.parameters()[key], dtype="<f8").tobytes())
    return path


def load_checkpoint(path) -> TextCNN:
    path = Path(path)
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError:
            raise FormatError(f"invalid checkpoint header in {path}", line=1) from None
        if header.get("format") != "tempstance-cnn":
            raise FormatError(f"not a tempstance CNN checkpoint: {path}", line=1)
        blob = fh.read()
    arrays = {}
    offset = 0
    for key in header["order"]:
        shape = tuple(header["shapes"][key])
        count = int(np.prod(shape))
        arrays[key] = np.frombuffer(
            blob, dtype="<f8", count=count, offset=offset
        ).reshape(shape).astype(np.float64)
        offset += count * 8
    config = ClassifierConfig(**header["config"])
    return TextCNN(
        filters=arrays["filters"],
        filter_bias=arrays["filter_bias"],
        dense_w=arrays["dense_w"],
        dense_b=arrays["dense_b"],
        config=config,
        dim=int(header["dim"]),
    )


def export_predictions(path, probs: np.ndarray, ids: Optional[Sequence] = None) -> Path:
    """CSV of per-post probabilities: id, p_support, p_oppose, label."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if ids is None:
        ids = range(probs.shape[0])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id,p_support,p_oppose,label\n")
        for pid, row in zip(ids, probs):
            label = LABEL_ORDER[int(np.argmax(row))].value
            fh.write(f"{pid},{row[0]:.6g},{row[1]:.6g},{label}\n")
    return path
