"""Character n-gram Bi-LSTM name encoder, trained on synonym pairs.

Names are split into overlapping 1-, 2- and 3-grams, each hashed into a
fixed-size embedding table.  A forward and a backward LSTM run over the
token sequence; their final hidden states are concatenated, projected,
passed through ReLU and L2-normalized, so cosine similarity is a dot
product.  Everything is plain numpy in float64 with hand-written
backpropagation, which keeps training bit-reproducible for a given seed.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import NormalizedName
from .hashing import fnv1a_64
from .miner import SynonymPair

log = logging.getLogger(__name__)

MAGIC = b"CN2VMODL"
FORMAT_VERSION = 1
# serialization order of the parameter blocks
PARAM_ORDER = (
    "embedding",
    "fwd_W", "fwd_U", "fwd_b",
    "bwd_W", "bwd_U", "bwd_b",
    "out_W", "out_b",
)


class TrainingError(RuntimeError):
    pass


def tokenize(name: NormalizedName | str) -> list[str]:
    key = name.key if isinstance(name, NormalizedName) else name
    if not key:
        raise ValueError("cannot tokenize an empty name")
    return [key[i : i + n] for i in range(len(key)) for n in (1, 2, 3) if i + n <= len(key)]


def hash_token(token: str, buckets: int) -> int:
    if buckets < 1:
        raise ValueError("bucket count must be >= 1")
    return fnv1a_64(token.encode("utf-8")) % buckets


@dataclass(frozen=True)
class Dims:
    buckets: int = 4096
    embed_dim: int = 64
    enc_dim: int = 64
    out_dim: int = 64

    def __post_init__(self):
        if min(self.buckets, self.embed_dim, self.enc_dim, self.out_dim) < 1:
            raise ValueError(f"all dims must be positive: {self}")

    def shapes(self) -> dict[str, tuple[int, ...]]:
        E, H, D = self.embed_dim, self.enc_dim, self.out_dim
        return {
            "embedding": (self.buckets, E),
            "fwd_W": (E, 4 * H), "fwd_U": (H, 4 * H), "fwd_b": (4 * H,),
            "bwd_W": (E, 4 * H), "bwd_U": (H, 4 * H), "bwd_b": (4 * H,),
            "out_W": (2 * H, D), "out_b": (D,),
        }


PAPER_DIMS = Dims(buckets=4096, embed_dim=400, enc_dim=400, out_dim=400)


@dataclass
class ModelParams:
    """Encoder weights.

    LSTM gate blocks are laid out along the last axis in the order
    input, forget, output, candidate.
    """

    dims: Dims
    tensors: dict[str, np.ndarray]

    def __post_init__(self):
        for name, shape in self.dims.shapes().items():
            arr = self.tensors[name]
            if arr.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {arr.shape}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def copy(self) -> "ModelParams":
        return ModelParams(self.dims, {k: v.copy() for k, v in self.tensors.items()})

    def is_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.tensors.values())

    def to_bytes(self) -> bytes:
        d = self.dims
        parts = [MAGIC, struct.pack("<I", FORMAT_VERSION),
                 struct.pack("<4Q", d.buckets, d.embed_dim, d.enc_dim, d.out_dim)]
        for name in PARAM_ORDER:
            parts.append(np.ascontiguousarray(self.tensors[name], dtype="<f8").tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ModelParams":
        if blob[:8] != MAGIC:
            raise ValueError("not a model file (bad magic)")
        (version,) = struct.unpack_from("<I", blob, 8)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        dims = Dims(*struct.unpack_from("<4Q", blob, 12))
        offset = 12 + 32
        tensors = {}
        shapes = dims.shapes()
        for name in PARAM_ORDER:
            count = int(np.prod(shapes[name]))
            arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
            tensors[name] = arr.astype(np.float64).reshape(shapes[name])
            offset += 8 * count
        if offset != len(blob):
            raise ValueError(f"model file has {len(blob) - offset} trailing bytes")
        return cls(dims, tensors)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "ModelParams":
        return cls.from_bytes(Path(path).read_bytes())


def init_params(dims: Dims, seed: int) -> ModelParams:
    rng = np.random.default_rng(seed)
    E, H, D = dims.embed_dim, dims.enc_dim, dims.out_dim
    t: dict[str, np.ndarray] = {"embedding": rng.normal(0.0, 0.1, size=(dims.buckets, E))}
    lim = 1.0 / np.sqrt(H)
    for side in ("fwd", "bwd"):
        t[f"{side}_W"] = rng.uniform(-lim, lim, size=(E, 4 * H))
        t[f"{side}_U"] = rng.uniform(-lim, lim, size=(H, 4 * H))
        b = np.zeros(4 * H)
        b[H : 2 * H] = 1.0  # forget gate starts open
        t[f"{side}_b"] = b
    glorot = np.sqrt(6.0 / (2 * H + D))
    t["out_W"] = rng.uniform(-glorot, glorot, size=(2 * H, D))
    t["out_b"] = np.zeros(D)
    return ModelParams(dims, t)


# --------------------------------------------------------------------------
# forward / backward


def _sigmoid(x):
    return 0.5 * np.tanh(0.5 * x) + 0.5


@dataclass
class _Batch:
    ids: np.ndarray   # (n, T) token buckets, left-aligned
    rev: np.ndarray   # (n, T) same tokens with each valid prefix reversed
    mask: np.ndarray  # (n, T) 1.0 on valid steps

    @classmethod
    def of(cls, names: Sequence[NormalizedName | str], buckets: int) -> "_Batch":
        seqs = [[hash_token(tok, buckets) for tok in tokenize(n)] for n in names]
        T = max(len(s) for s in seqs)
        ids = np.zeros((len(seqs), T), dtype=np.int64)
        rev = np.zeros_like(ids)
        mask = np.zeros((len(seqs), T))
        for i, s in enumerate(seqs):
            ids[i, : len(s)] = s
            rev[i, : len(s)] = s[::-1]
            mask[i, : len(s)] = 1.0
        return cls(ids, rev, mask)


def _lstm_forward(X, mask, W, U, b):
    n, T, _ = X.shape
    H = U.shape[0]
    XW = X @ W + b
    h = np.zeros((n, H))
    c = np.zeros((n, H))
    cache = []
    for t in range(T):
        z = XW[:, t] + h @ U
        gates = _sigmoid(z[:, : 3 * H])
        i, f, o = gates[:, :H], gates[:, H : 2 * H], gates[:, 2 * H :]
        g = np.tanh(z[:, 3 * H :])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        cache.append((h, c, i, f, o, g, tc))
        # padded steps carry the state through unchanged
        m = mask[:, t : t + 1]
        c = m * c_new + (1.0 - m) * c
        h = m * (o * tc) + (1.0 - m) * h
    return h, cache


def _lstm_backward(dh, X, mask, W, U, cache):
    n, T, _ = X.shape
    H = U.shape[0]
    dXW = np.zeros((n, T, 4 * H))
    dU = np.zeros_like(U)
    dc = np.zeros((n, H))
    for t in range(T - 1, -1, -1):
        h_prev, c_prev, i, f, o, g, tc = cache[t]
        m = mask[:, t : t + 1]
        dh_new = m * dh
        dc_new = m * dc + dh_new * o * (1.0 - tc * tc)
        dz = np.concatenate(
            [
                dc_new * g * i * (1.0 - i),
                dc_new * c_prev * f * (1.0 - f),
                dh_new * tc * o * (1.0 - o),
                dc_new * i * (1.0 - g * g),
            ],
            axis=1,
        )
        dXW[:, t] = dz
        dU += h_prev.T @ dz
        dh = dz @ U.T + (1.0 - m) * dh
        dc = dc_new * f + (1.0 - m) * dc
    flat = dXW.reshape(n * T, 4 * H)
    dW = X.reshape(n * T, -1).T @ flat
    db = flat.sum(axis=0)
    dX = dXW @ W.T
    return dX, dW, dU, db


def _forward(params: ModelParams, batch: _Batch):
    emb = params["embedding"]
    Xf = emb[batch.ids]
    Xb = emb[batch.rev]
    hf, cache_f = _lstm_forward(Xf, batch.mask, params["fwd_W"], params["fwd_U"], params["fwd_b"])
    hb, cache_b = _lstm_forward(Xb, batch.mask, params["bwd_W"], params["bwd_U"], params["bwd_b"])
    hcat = np.concatenate([hf, hb], axis=1)
    z = hcat @ params["out_W"] + params["out_b"]
    r = np.maximum(z, 0.0)
    norm = np.sqrt((r * r).sum(axis=1, keepdims=True))
    dead = norm[:, 0] == 0.0
    v = np.divide(r, norm, out=np.zeros_like(r), where=norm > 0)
    # an all-zero ReLU output has no direction; give it a fixed unit vector
    v[dead] = 1.0 / np.sqrt(r.shape[1])
    cache = (Xf, Xb, cache_f, cache_b, hcat, z, norm, dead, v)
    return v, cache


def _backward(params: ModelParams, batch: _Batch, cache, dv) -> dict[str, np.ndarray]:
    Xf, Xb, cache_f, cache_b, hcat, z, norm, dead, v = cache
    H = params.dims.enc_dim
    safe = np.where(norm > 0, norm, 1.0)
    dr = (dv - v * (v * dv).sum(axis=1, keepdims=True)) / safe
    dr[dead] = 0.0
    dz = dr * (z > 0)
    grads = {
        "out_W": hcat.T @ dz,
        "out_b": dz.sum(axis=0),
    }
    dh = dz @ params["out_W"].T
    dXf, grads["fwd_W"], grads["fwd_U"], grads["fwd_b"] = _lstm_backward(
        dh[:, :H], Xf, batch.mask, params["fwd_W"], params["fwd_U"], cache_f
    )
    dXb, grads["bwd_W"], grads["bwd_U"], grads["bwd_b"] = _lstm_backward(
        dh[:, H:], Xb, batch.mask, params["bwd_W"], params["bwd_U"], cache_b
    )
    demb = np.zeros_like(params["embedding"])
    valid = batch.mask > 0
    np.add.at(demb, batch.ids[valid], dXf[valid])
    np.add.at(demb, batch.rev[valid], dXb[valid])
    grads["embedding"] = demb
    return grads


def encode_many(params: ModelParams, names: Sequence[NormalizedName | str], chunk: int = 256) -> np.ndarray:
    """Encode names into an (n, out_dim) array of unit vectors."""
    out = np.zeros((len(names), params.dims.out_dim))
    for start in range(0, len(names), chunk):
        part = names[start : start + chunk]
        v, _ = _forward(params, _Batch.of(part, params.dims.buckets))
        out[start : start + len(part)] = v
    return out


def encode(params: ModelParams, name: NormalizedName | str) -> np.ndarray:
    return encode_many(params, [name])[0]


# --------------------------------------------------------------------------
# objective


def pair_loss(anchor, positive, negatives, margin: float) -> float:
    """Sum over negatives of max(0, margin - cos(a, p) + cos(a, n)) for unit vectors."""
    negatives = np.atleast_2d(np.asarray(negatives, dtype=float))
    if negatives.size == 0:
        raise ValueError("pair_loss needs at least one negative")
    pos = float(np.dot(anchor, positive))
    neg = negatives @ np.asarray(anchor, dtype=float)
    return float(np.maximum(0.0, margin - pos + neg).sum())


@dataclass
class PairBatch:
    """Names to encode plus index triples into them.

    ``negatives`` has shape (n_anchors, K).
    """

    names: list[NormalizedName]
    anchors: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray
    _encoded: dict = field(default_factory=dict, repr=False)

    def encoded(self, buckets: int) -> _Batch:
        if buckets not in self._encoded:
            self._encoded[buckets] = _Batch.of(self.names, buckets)
        return self._encoded[buckets]


def sample_batch(
    pairs: Sequence[SynonymPair], n_negatives: int, rng: np.random.Generator,
    fallback: Sequence[NormalizedName] = (),
) -> PairBatch:
    """Orient each pair at random and draw in-batch negatives uniformly.

    Negatives for an anchor are drawn (with replacement) from the batch's
    names other than the anchor and its positive; if the batch has none,
    from ``fallback``.
    """
    index: dict[str, int] = {}
    names: list[NormalizedName] = []

    def slot(n: NormalizedName) -> int:
        if n.key not in index:
            index[n.key] = len(names)
            names.append(n)
        return index[n.key]

    flips = rng.random(len(pairs)) < 0.5
    anchors, positives = [], []
    for p, flip in zip(pairs, flips):
        a, b = (p.b, p.a) if flip else (p.a, p.b)
        anchors.append(slot(a))
        positives.append(slot(b))
    in_batch = list(range(len(names)))
    negs = np.zeros((len(pairs), n_negatives), dtype=np.int64)
    for row, (a, b) in enumerate(zip(anchors, positives)):
        cands = [j for j in in_batch if j != a and j != b]
        if not cands:
            extra = [n for n in fallback if n.key not in (names[a].key, names[b].key)]
            if not extra:
                raise TrainingError("no negative candidates available")
            cands = [slot(n) for n in extra]
        negs[row] = np.asarray(cands)[rng.integers(0, len(cands), size=n_negatives)]
    return PairBatch(names, np.asarray(anchors), np.asarray(positives), negs)


def batch_objective(params: ModelParams, batch: PairBatch, margin: float, with_grad: bool = True):
    """Mean hinge term over all (anchor, negative) combinations.

    Equals the average of ``pair_loss`` per anchor divided by the number of
    negatives.  Returns ``(loss, grads)``; ``grads`` is None without
    ``with_grad``.
    """
    enc = batch.encoded(params.dims.buckets)
    v, cache = _forward(params, enc)
    a, p, negs = batch.anchors, batch.positives, batch.negatives
    n, K = negs.shape
    sp = (v[a] * v[p]).sum(axis=1)
    sn = np.einsum("id,ikd->ik", v[a], v[negs])
    hinge = margin - sp[:, None] + sn
    active = (hinge > 0).astype(float)
    loss = float((hinge * active).sum() / (n * K))
    if not with_grad:
        return loss, None
    w = active / (n * K)                      # (n, K)
    dv = np.zeros_like(v)
    np.add.at(dv, a, (w[:, :, None] * (v[negs] - v[p][:, None, :])).sum(axis=1))
    np.add.at(dv, p, -w.sum(axis=1)[:, None] * v[a])
    np.add.at(dv, negs.ravel(), (w[:, :, None] * v[a][:, None, :]).reshape(n * K, -1))
    return loss, _backward(params, enc, cache, dv)


# --------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 5
    margin: float = 0.4
    negatives: int = 4
    seed: int = 0
    clip_norm: float = 5.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1 or self.negatives < 1:
            raise ValueError(f"invalid training config: {self}")
        if not 0 < self.margin < 2:
            raise ValueError("margin must lie in (0, 2)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: ModelParams, grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for name in PARAM_ORDER:
            g = grads[name]
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params.tensors[name] -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def _clip(grads: dict[str, np.ndarray], max_norm: float) -> float:
    total = float(np.sqrt(sum((g * g).sum() for g in grads.values())))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


def train(
    train_pairs: Sequence[SynonymPair],
    config: TrainConfig = TrainConfig(),
    dims: Dims = Dims(),
    progress=None,
) -> tuple[ModelParams, list[float]]:
    """Train an encoder; returns the final params and the mean loss of each epoch.

    ``progress``, if given, is called as ``progress(epoch, loss)`` after
    every epoch.
    """
    pairs = sorted(train_pairs)
    if len(pairs) < config.batch_size:
        raise TrainingError(f"need at least batch_size={config.batch_size} pairs, got {len(pairs)}")
    rng = np.random.default_rng(config.seed)
    params = init_params(dims, int(rng.integers(0, 2**63)))
    all_names = sorted({n for p in pairs for n in (p.a, p.b)})
    opt = Adam(config.learning_rate, config.beta1, config.beta2, config.adam_eps)
    trace: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(pairs))
        losses, weights = [], []
        for start in range(0, len(pairs), config.batch_size):
            chunk = [pairs[i] for i in order[start : start + config.batch_size]]
            batch = sample_batch(chunk, config.negatives, rng, all_names)
            loss, grads = batch_objective(params, batch, config.margin)
            gnorm = _clip(grads, config.clip_norm)
            if not np.isfinite(loss) or not np.isfinite(gnorm):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}: "
                    f"loss={loss}, grad_norm={gnorm}, params_finite={params.is_finite()}"
                )
            opt.step(params, grads)
            losses.append(loss)
            weights.append(len(chunk))
        epoch_loss = float(np.average(losses, weights=weights))
        trace.append(epoch_loss)
        log.info("epoch %d loss %.5f", epoch, epoch_loss)
        if progress is not None:
            progress(epoch, epoch_loss)
    return params, trace


# --------------------------------------------------------------------------
# numerical gradient check


def gradient_errors(
    params: ModelParams, batch: PairBatch, margin: float = 0.4, epsilon: float = 1e-5
) -> dict[str, float]:
    """Relative error between analytic and central-difference gradients per tensor.

    Error for a tensor is ||g_a - g_n|| / max(||g_a|| + ||g_n||, 1e-300).
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError("epsilon must lie in [1e-7, 1e-3]")
    _, analytic = batch_objective(params, batch, margin)
    probe = params.copy()
    # embedding rows no token of the batch hashes to are never read, so
    # their numerical gradient is exactly zero without evaluation
    enc = batch.encoded(params.dims.buckets)
    used_rows = np.unique(enc.ids[enc.mask > 0])
    errors = {}
    for name in PARAM_ORDER:
        arr = probe.tensors[name]
        numeric = np.zeros_like(arr)
        flat, nflat = arr.reshape(-1), numeric.reshape(-1)
        if name == "embedding":
            width = arr.shape[1]
            entries = (used_rows[:, None] * width + np.arange(width)).ravel()
        else:
            entries = range(flat.size)
        for i in entries:
            orig = flat[i]
            flat[i] = orig + epsilon
            up, _ = batch_objective(probe, batch, margin, with_grad=False)
            flat[i] = orig - epsilon
            down, _ = batch_objective(probe, batch, margin, with_grad=False)
            flat[i] = orig
            nflat[i] = (up - down) / (2 * epsilon)
        diff = np.linalg.norm(analytic[name] - numeric)
        scale = np.linalg.norm(analytic[name]) + np.linalg.norm(numeric)
        errors[name] = float(diff / max(scale, 1e-300))
    return errors


def gradient_check(params: ModelParams, batch: PairBatch, epsilon: float = 1e-5, margin: float = 0.4) -> float:
    return max(gradient_errors(params, batch, margin, epsilon).values())
