"""Mean-pooled ReLU text classifier with hand-derived gradients.

Architecture (per input of ``n`` tokens, embedding dim ``d``, hidden ``h``)::

    z1_i = W1 e_i + b1          a1_i = relu(z1_i)
    p    = mean_i a1_i
    z2   = W2 p + b2            a2   = relu(z2)
    logits = W3 a2 + b3         probs = softmax(logits)

Every layer is affine or ReLU, so the same parameters can be decomposed by
DeepLIFT and bounded by interval/linear relaxations. All functions accept
embeddings with arbitrary leading batch dimensions: ``(..., n, d)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from faithkit.errors import DegenerateDataError, DimensionError, NumericInputError

log = logging.getLogger(__name__)

PAD_ID = 0
UNK_ID = 1
N_CLASSES = 2
PARAM_NAMES = ("embedding", "W1", "b1", "W2", "b2", "W3", "b3")
SCORE_KINDS = ("prob", "logit", "margin")


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    ids: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "ids", ids)
        if ids.ndim != 1 or len(ids) == 0 or len(ids) != len(self.tokens):
            raise DimensionError(
                f"tokens/ids must be equal-length and non-empty, got {len(self.tokens)}/{ids.shape}"
            )
        if ids.min() < 0:
            raise DimensionError("negative token id")

    def __len__(self):
        return len(self.ids)

    def replace(self, index: int, token: str, token_id: int) -> "TokenSequence":
        tokens = list(self.tokens)
        ids = self.ids.copy()
        tokens[index] = token
        ids[index] = token_id
        return TokenSequence(tuple(tokens), ids)


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    """Immutable parameter bundle. Arrays are copied and made read-only."""

    embedding: np.ndarray
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        for name in PARAM_NAMES:
            arr = np.array(getattr(self, name), dtype=np.float64, copy=True)
            if not np.all(np.isfinite(arr)):
                raise NumericInputError(f"parameter {name} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        V, d = self.embedding.shape
        h = self.W1.shape[0]
        expected = {
            "W1": (h, d), "b1": (h,), "W2": (h, h), "b2": (h,),
            "W3": (N_CLASSES, h), "b3": (N_CLASSES,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DimensionError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if V < 2:
            raise DimensionError("vocabulary must hold at least PAD and UNK")
        if np.any(self.embedding[PAD_ID] != 0.0):
            raise NumericInputError("PAD embedding row must be zero")

    @property
    def vocab_size(self) -> int:
        return self.embedding.shape[0]

    @property
    def dim(self) -> int:
        return self.embedding.shape[1]

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    @property
    def pad_vector(self) -> np.ndarray:
        return self.embedding[PAD_ID]

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def with_params(self, **updates) -> "ClassifierModel":
        params = self.params()
        params.update(updates)
        return ClassifierModel(**params)

    def embed(self, x) -> np.ndarray:
        """Embedding matrix for a TokenSequence or id array (a fresh copy)."""
        ids = x.ids if isinstance(x, TokenSequence) else np.asarray(x, dtype=np.int64)
        if ids.size and (ids.max() >= self.vocab_size or ids.min() < 0):
            raise DimensionError(f"token id out of range for vocabulary of {self.vocab_size}")
        return self.embedding[ids].copy()


@dataclass
class ForwardTrace:
    z1: np.ndarray
    a1: np.ndarray
    p: np.ndarray
    z2: np.ndarray
    a2: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    label: np.ndarray | int


def as_embeddings(model: ClassifierModel, x) -> np.ndarray:
    """Accept a TokenSequence, an id array or an embedding matrix."""
    if isinstance(x, TokenSequence):
        return model.embed(x)
    arr = np.asarray(x)
    if arr.dtype.kind in "iu":
        return model.embed(arr)
    return np.asarray(arr, dtype=np.float64)


def _check_embeddings(model, embeds):
    embeds = np.asarray(embeds, dtype=np.float64)
    if embeds.ndim < 2 or embeds.shape[-1] != model.dim or embeds.shape[-2] < 1:
        raise DimensionError(f"embeddings must be (..., n>=1, {model.dim}), got {embeds.shape}")
    if not np.all(np.isfinite(embeds)):
        raise NumericInputError("embeddings contain non-finite entries")
    return embeds


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


def _forward(model, embeds):
    z1 = embeds @ model.W1.T + model.b1
    a1 = np.maximum(z1, 0.0)
    p = a1.mean(axis=-2)
    z2 = p @ model.W2.T + model.b2
    a2 = np.maximum(z2, 0.0)
    logits = a2 @ model.W3.T + model.b3
    probs = softmax(logits)
    label = np.argmax(logits, axis=-1)
    if label.ndim == 0:
        label = int(label)
    return ForwardTrace(z1, a1, p, z2, a2, logits, probs, label)


def forward(model: ClassifierModel, embeds) -> ForwardTrace:
    """Full forward pass; argmax ties resolve to the lower class index."""
    return _forward(model, _check_embeddings(model, embeds))


def predict(model: ClassifierModel, embeds):
    return _forward(model, np.asarray(embeds, dtype=np.float64)).label


def _select(values, target):
    return values[..., target]


def _score_from_trace(trace, target, kind):
    if kind == "prob":
        return _select(trace.probs, target)
    if kind == "logit":
        return _select(trace.logits, target)
    if kind == "margin":
        return _select(trace.logits, target) - _select(trace.logits, 1 - target)
    raise ValueError(f"unknown score kind {kind!r}; expected one of {SCORE_KINDS}")


def score(model: ClassifierModel, embeds, target: int, kind: str = "prob"):
    """Softmax probability (default), raw logit or binary logit margin of ``target``."""
    if target not in (0, 1):
        raise ValueError(f"target must be 0 or 1, got {target}")
    return _score_from_trace(forward(model, embeds), target, kind)


def _dlogits(trace, target, kind):
    d = np.zeros(trace.logits.shape)
    if kind == "prob":
        probs = trace.probs
        p_t = probs[..., target]
        # d p_t / d l_c = p_t (1[c=t] - p_c); 1 - p_t is summed from the other
        # classes so saturated softmaxes keep their tiny but non-zero slope
        others = np.delete(probs, target, axis=-1).sum(axis=-1)
        d = -p_t[..., None] * probs
        d[..., target] = p_t * others
    elif kind == "logit":
        d[..., target] = 1.0
    elif kind == "margin":
        d[..., target] = 1.0
        d[..., 1 - target] = -1.0
    else:
        raise ValueError(f"unknown score kind {kind!r}")
    return d


def backward(model: ClassifierModel, trace: ForwardTrace, dlogits: np.ndarray) -> np.ndarray:
    """Reverse-mode pass from logit cotangents to embedding cotangents."""
    da2 = dlogits @ model.W3
    dz2 = da2 * (trace.z2 > 0.0)
    dp = dz2 @ model.W2
    n = trace.z1.shape[-2]
    dz1 = (dp[..., None, :] / n) * (trace.z1 > 0.0)
    return dz1 @ model.W1


def grad_embeddings(model: ClassifierModel, embeds, target: int, kind: str = "prob") -> np.ndarray:
    """Exact gradient of :func:`score` with respect to every embedding entry.

    ReLU uses subgradient 0 at exactly zero pre-activation.
    """
    trace = forward(model, embeds)
    return backward(model, trace, _dlogits(trace, target, kind))


def _grad_unchecked(model, embeds, target, kind="prob"):
    trace = _forward(model, embeds)
    return backward(model, trace, _dlogits(trace, target, kind)), trace


# --------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    learning_rate: float = 0.5
    batch_size: int = 32
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0
    hidden_size: int = 64
    embedding_dim: int = 50
    train_embeddings: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.hidden_size < 1:
            raise ValueError("learning_rate, batch_size and hidden_size must be positive")
        if self.max_epochs < 0 or self.patience < 1:
            raise ValueError("max_epochs must be >= 0 and patience >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    dev_accuracy: float | None


def init_model(embeddings: np.ndarray, hidden: int, rng: np.random.Generator) -> ClassifierModel:
    """Glorot-uniform weights, small positive first-layer bias."""
    embeddings = np.array(embeddings, dtype=np.float64)
    embeddings[PAD_ID] = 0.0
    d = embeddings.shape[1]

    def glorot(fan_out, fan_in):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_out, fan_in))

    return ClassifierModel(
        embedding=embeddings,
        W1=glorot(hidden, d), b1=np.full(hidden, 0.01),
        W2=glorot(hidden, hidden), b2=np.full(hidden, 0.01),
        W3=glorot(N_CLASSES, hidden), b3=np.zeros(N_CLASSES),
    )


def _pad_batch(id_lists):
    lengths = np.array([len(ids) for ids in id_lists])
    ids = np.zeros((len(id_lists), lengths.max()), dtype=np.int64)
    mask = np.zeros(ids.shape, dtype=bool)
    for row, seq in enumerate(id_lists):
        ids[row, : len(seq)] = seq
        mask[row, : len(seq)] = True
    return ids, mask, lengths


def _batch_forward(params, ids, mask, lengths):
    E = params["embedding"][ids]
    z1 = E @ params["W1"].T + params["b1"]
    a1 = np.maximum(z1, 0.0) * mask[..., None]
    p = a1.sum(axis=1) / lengths[:, None]
    z2 = p @ params["W2"].T + params["b2"]
    a2 = np.maximum(z2, 0.0)
    logits = a2 @ params["W3"].T + params["b3"]
    return E, z1, p, z2, a2, logits


def _batch_step(params, ids, mask, lengths, labels, train_embeddings):
    E, z1, p, z2, a2, logits = _batch_forward(params, ids, mask, lengths)
    probs = softmax(logits)
    B = len(labels)
    loss = -np.mean(np.log(np.maximum(probs[np.arange(B), labels], 1e-300)))
    dlog = probs.copy()
    dlog[np.arange(B), labels] -= 1.0
    dlog /= B
    grads = {"W3": dlog.T @ a2, "b3": dlog.sum(axis=0)}
    dz2 = (dlog @ params["W3"]) * (z2 > 0)
    grads["W2"] = dz2.T @ p
    grads["b2"] = dz2.sum(axis=0)
    dp = dz2 @ params["W2"]
    dz1 = (dp / lengths[:, None])[:, None, :] * ((z1 > 0) & mask[..., None])
    grads["W1"] = np.einsum("bnh,bnd->hd", dz1, E)
    grads["b1"] = dz1.sum(axis=(0, 1))
    if train_embeddings:
        dE = dz1 @ params["W1"]
        demb = np.zeros_like(params["embedding"])
        np.add.at(demb, ids[mask], dE[mask])
        demb[PAD_ID] = 0.0
        grads["embedding"] = demb
    return loss, grads, np.argmax(logits, axis=1)


def accuracy(model: ClassifierModel, data) -> float:
    if not data:
        return float("nan")
    ids, mask, lengths = _pad_batch([_ids_of(x) for _, x in data])
    logits = _batch_forward(model.params(), ids, mask, lengths)[-1]
    labels = np.array([label for label, _ in data])
    return float(np.mean(np.argmax(logits, axis=1) == labels))


def _ids_of(x):
    return x.ids if isinstance(x, TokenSequence) else np.asarray(x, dtype=np.int64)


def train(
    data: Sequence[tuple[int, TokenSequence]],
    embeddings: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator | None = None,
    dev: Sequence[tuple[int, TokenSequence]] | None = None,
) -> tuple[ClassifierModel, list[EpochRecord]]:
    """Mini-batch gradient descent on cross-entropy.

    Keeps the parameters from the epoch with the best dev accuracy (training
    accuracy when no dev split is given) and stops after ``cfg.patience``
    epochs without improvement. The PAD row is never updated.
    """
    labels = np.array([label for label, _ in data], dtype=np.int64)
    if len(data) < 2 or set(labels.tolist()) != {0, 1}:
        raise DegenerateDataError("training needs at least two examples covering both classes")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    model = init_model(embeddings, cfg.hidden_size, rng)
    history: list[EpochRecord] = []
    if cfg.max_epochs == 0:
        return model, history

    params = {k: v.copy() for k, v in model.params().items()}
    id_lists = [_ids_of(x) for _, x in data]
    best_model, best_acc, stale = model, -1.0, 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(data))
        losses, correct = [], 0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            ids, mask, lengths = _pad_batch([id_lists[i] for i in batch])
            loss, grads, pred = _batch_step(params, ids, mask, lengths, labels[batch], cfg.train_embeddings)
            for name, g in grads.items():
                params[name] -= cfg.learning_rate * g
            losses.append(loss * len(batch))
            correct += int(np.sum(pred == labels[batch]))
        current = ClassifierModel(**params)
        train_acc = correct / len(data)
        dev_acc = accuracy(current, dev) if dev else None
        history.append(EpochRecord(epoch, float(np.sum(losses) / len(data)), train_acc, dev_acc))
        log.debug("epoch %d loss %.4f train %.3f dev %s", epoch, history[-1].train_loss, train_acc, dev_acc)
        monitored = dev_acc if dev_acc is not None else accuracy(current, data)
        if monitored > best_acc:
            best_model, best_acc, stale = current, monitored, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return best_model, history
