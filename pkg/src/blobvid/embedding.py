"""Blob token embeddings: Fourier-encoded geometry, caption sequences, and the
per-frame context interpolators that bridge captioned anchor frames.

Caption embeddings come from a pluggable provider: a deterministic stub for
tests and demos, or precomputed vectors read from disk.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Protocol

import numpy as np
from scipy.special import erf

from .blobs import BlobParams, FrameGeometry, canonicalize
from .errors import DegenerateVector, RangeError, ShapeError

__all__ = [
    "EmbeddingSeq",
    "BlobEmbedding",
    "MlpWeights",
    "fourier_features",
    "normalize_params",
    "fourier_encode",
    "blob_embed",
    "blob_embed_backward",
    "interp_weights",
    "interp_linear",
    "interp_slerp",
    "TextEmbedProvider",
    "DeterministicStub",
    "FileProvider",
    "caption_hash",
    "write_embedding",
    "read_embedding",
]


def _frozen_2d(arr, what: str) -> np.ndarray:
    # Private copy: freezing an aliased buffer would mutate the caller's flags.
    out = np.array(arr, dtype=np.float64, order="C", copy=True)
    if out.ndim != 2 or out.shape[0] < 1 or out.shape[1] < 1:
        raise ShapeError(f"{what} must be a (tokens, dim) array, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{what} must be finite")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class EmbeddingSeq:
    """Token sequence for one caption: (L, dim) float64."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_2d(self.data, "embedding sequence"))

    @property
    def L(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class BlobEmbedding:
    """Fused per-token blob embedding: (L, d) float64."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_2d(self.data, "blob embedding"))

    @property
    def L(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


# ---------------------------------------------------------------------------
# Fourier geometry encoding


def normalize_params(p: BlobParams, geom: FrameGeometry) -> np.ndarray:
    """Canonicalize and scale blob parameters into a 5-vector of order-1 values.

    Center is scaled by frame extent, radii by sqrt(W*H), orientation mapped
    from (-pi/2, pi/2] to (0, 1].
    """
    p = canonicalize(p)
    d = math.sqrt(geom.width * geom.height)
    return np.array(
        [
            p.cx / geom.width,
            p.cy / geom.height,
            p.a / d,
            p.b / d,
            (p.theta + math.pi / 2.0) / math.pi,
        ],
        dtype=np.float64,
    )


def fourier_features(u, n_freqs: int) -> np.ndarray:
    """Raw sin/cos features of a 5-vector: [sin(2^f pi u_i), cos(2^f pi u_i)]
    for f in [0, n_freqs), i in [0, 5). Length 10 * n_freqs, all in [-1, 1].
    """
    if n_freqs < 1:
        raise RangeError(f"need at least one frequency, got {n_freqs}")
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (5,):
        raise ShapeError(f"normalized params must be a 5-vector, got shape {u.shape}")
    ang = (2.0 ** np.arange(n_freqs, dtype=np.float64))[:, None] * math.pi * u[None, :]
    feats = np.stack([np.sin(ang), np.cos(ang)], axis=-1)  # (F, 5, 2)
    return feats.reshape(-1)


@lru_cache(maxsize=64)
def _projection(raw_dim: int, out_dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((raw_dim, raw_dim))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))[None, :]  # fix column signs so QR is unique
    p = np.ascontiguousarray(q.T[:out_dim])
    p.setflags(write=False)
    return p


def fourier_encode(p: BlobParams, geom: FrameGeometry, n_freqs: int = 8,
                   out_dim: int = 8, seed: int = 0) -> np.ndarray:
    """Deterministic geometry embedding: Fourier features followed by a fixed
    seeded projection with orthonormal rows."""
    raw = fourier_features(normalize_params(p, geom), n_freqs)
    raw_dim = raw.shape[0]
    if not (1 <= out_dim <= raw_dim):
        raise ShapeError(f"out_dim must lie in [1, {raw_dim}], got {out_dim}")
    return _projection(raw_dim, out_dim, seed) @ raw


# ---------------------------------------------------------------------------
# Token fusion MLP

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
    return cdf + x * pdf


@dataclass(frozen=True)
class MlpWeights:
    """Two-layer token MLP, width d in, d hidden, d out.

    activation "linear" exists so tests can configure an exact identity map.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    activation: str = "gelu"

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=np.float64)
        w2 = np.asarray(self.w2, dtype=np.float64)
        b1 = np.asarray(self.b1, dtype=np.float64)
        b2 = np.asarray(self.b2, dtype=np.float64)
        d = w1.shape[0]
        if w1.shape != (d, d) or w2.shape != (d, d) or b1.shape != (d,) or b2.shape != (d,):
            raise ShapeError(
                f"MLP weights must be (d,d)/(d,) with one width, got {w1.shape}, {b1.shape}, {w2.shape}, {b2.shape}"
            )
        if self.activation not in ("gelu", "linear"):
            raise RangeError(f"unknown activation {self.activation!r}")
        for name, arr in (("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)):
            object.__setattr__(self, name, arr)

    @property
    def width(self) -> int:
        return self.w1.shape[0]

    @classmethod
    def seeded(cls, d: int, seed: int, activation: str = "gelu") -> "MlpWeights":
        rng = np.random.default_rng(seed)
        scale = 1.0 / math.sqrt(d)
        return cls(
            w1=rng.standard_normal((d, d)) * scale,
            b1=np.zeros(d),
            w2=rng.standard_normal((d, d)) * scale,
            b2=np.zeros(d),
            activation=activation,
        )

    @classmethod
    def identity(cls, d: int) -> "MlpWeights":
        return cls(np.eye(d), np.zeros(d), np.eye(d), np.zeros(d), activation="linear")


def _act(x: np.ndarray, kind: str) -> np.ndarray:
    return x if kind == "linear" else _gelu(x)


def _act_grad(x: np.ndarray, kind: str) -> np.ndarray:
    return np.ones_like(x) if kind == "linear" else _gelu_grad(x)


def blob_embed(e_tau: np.ndarray, e_s: EmbeddingSeq, mlp: MlpWeights) -> BlobEmbedding:
    """Fuse one geometry embedding with every caption token.

    Each token row is [e_tau ; e_s_l], width d = 2 * dim, pushed through the
    shared two-layer MLP. Token order is preserved.
    """
    e_tau = np.asarray(e_tau, dtype=np.float64)
    if e_tau.ndim != 1:
        raise ShapeError(f"geometry embedding must be a vector, got shape {e_tau.shape}")
    if e_tau.shape[0] != e_s.dim:
        raise ShapeError(
            f"geometry width {e_tau.shape[0]} must match token width {e_s.dim}"
        )
    d = 2 * e_s.dim
    if mlp.width != d:
        raise ShapeError(f"MLP width {mlp.width} does not match token width {d}")
    x = np.concatenate([np.tile(e_tau, (e_s.L, 1)), e_s.data], axis=1)
    h = _act(x @ mlp.w1 + mlp.b1, mlp.activation)
    return BlobEmbedding(h @ mlp.w2 + mlp.b2)


@dataclass(frozen=True)
class BlobEmbedGrads:
    e_tau: np.ndarray
    e_s: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray


def blob_embed_backward(e_tau: np.ndarray, e_s: EmbeddingSeq, mlp: MlpWeights,
                        upstream: np.ndarray) -> BlobEmbedGrads:
    """Gradients of <upstream, blob_embed(...)> with respect to every input."""
    e_tau = np.asarray(e_tau, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    half = e_s.dim
    x = np.concatenate([np.tile(e_tau, (e_s.L, 1)), e_s.data], axis=1)
    pre = x @ mlp.w1 + mlp.b1
    h = _act(pre, mlp.activation)
    if upstream.shape != (e_s.L, 2 * half):
        raise ShapeError(f"upstream must have shape {(e_s.L, 2 * half)}, got {upstream.shape}")
    dw2 = h.T @ upstream
    db2 = upstream.sum(axis=0)
    dh = upstream @ mlp.w2.T
    dpre = dh * _act_grad(pre, mlp.activation)
    dw1 = x.T @ dpre
    db1 = dpre.sum(axis=0)
    dx = dpre @ mlp.w1.T
    return BlobEmbedGrads(
        e_tau=dx[:, :half].sum(axis=0),
        e_s=dx[:, half:],
        w1=dw1,
        b1=db1,
        w2=dw2,
        b2=db2,
    )


# ---------------------------------------------------------------------------
# Context interpolation between captioned anchor frames


def interp_weights(t: int, k: int, t_anchor: int | None = None,
                   orientation: str = "as_printed") -> tuple[float, float]:
    """Anchor weights (on the earlier embedding, on the later embedding) for
    frame t inside an anchor interval of length k.

    Orientation "as_printed" puts (t1 - t)/k on the later anchor and
    (t - t0)/k on the earlier one; "standard" swaps them so the weight of
    each anchor grows with proximity.
    Defined on the closed interval so the endpoints are expressible.
    """
    if k < 1:
        raise RangeError(f"anchor interval must be >= 1, got {k}")
    if orientation not in ("as_printed", "standard"):
        raise RangeError(f"unknown interpolation orientation {orientation!r}")
    t0 = (t // k) * k if t_anchor is None else t_anchor
    t1 = t0 + k
    if not (t0 <= t <= t1):
        raise RangeError(f"frame {t} outside anchor interval [{t0}, {t1}]")
    w_near_lo = (t1 - t) / k
    w_near_hi = (t - t0) / k
    if orientation == "as_printed":
        return w_near_hi, w_near_lo
    return w_near_lo, w_near_hi


def interp_linear(e1: EmbeddingSeq, e2: EmbeddingSeq, t: int, k: int,
                  t_anchor: int | None = None,
                  orientation: str = "as_printed") -> EmbeddingSeq:
    """Per-token linear blend of the two bracketing anchor embeddings.

    e1 sits at the earlier anchor, e2 one interval later. t must be strictly
    between the two anchors; at the anchors the caller should use the anchor
    embedding itself.
    """
    if e1.data.shape != e2.data.shape:
        raise ShapeError(f"anchor embeddings differ in shape: {e1.data.shape} vs {e2.data.shape}")
    t0 = (t // k) * k if t_anchor is None else t_anchor
    if not (t0 < t < t0 + k):
        raise RangeError(f"frame {t} not strictly inside anchor interval ({t0}, {t0 + k})")
    w1, w2 = interp_weights(t, k, t_anchor=t0, orientation=orientation)
    return EmbeddingSeq(w1 * e1.data + w2 * e2.data)


def interp_slerp(e1: EmbeddingSeq, e2: EmbeddingSeq, alpha: float) -> EmbeddingSeq:
    """Per-token spherical interpolation; falls back to linear for nearly
    parallel tokens. Zero-norm tokens have no direction and are rejected."""
    if e1.data.shape != e2.data.shape:
        raise ShapeError(f"anchor embeddings differ in shape: {e1.data.shape} vs {e2.data.shape}")
    alpha = float(alpha)
    if not (0.0 <= alpha <= 1.0):
        raise RangeError(f"alpha must lie in [0, 1], got {alpha}")
    out = np.empty_like(e1.data)
    for l in range(e1.L):
        a = e1.data[l]
        b = e2.data[l]
        na = float(np.linalg.norm(a))
        nb = float(np.linalg.norm(b))
        if na == 0.0 or nb == 0.0:
            raise DegenerateVector(f"token {l} has zero norm")
        cos_om = float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))
        omega = math.acos(cos_om)
        sin_om = math.sin(omega)
        if omega < 1e-6 or sin_om < 1e-12:
            out[l] = (1.0 - alpha) * a + alpha * b
        else:
            out[l] = (math.sin((1.0 - alpha) * omega) / sin_om) * a + (
                math.sin(alpha * omega) / sin_om
            ) * b
    return EmbeddingSeq(out)


# ---------------------------------------------------------------------------
# Caption embedding providers and on-disk format


def caption_hash(caption: str) -> str:
    return hashlib.sha256(caption.encode("utf-8")).hexdigest()


class TextEmbedProvider(Protocol):
    def embed(self, caption: str) -> EmbeddingSeq: ...


@dataclass(frozen=True)
class DeterministicStub:
    """Caption embeddings seeded from the caption hash: unit-norm rows, fixed
    token count so sequences from different captions stay alignable."""

    dim: int
    n_tokens: int = 4

    def embed(self, caption: str) -> EmbeddingSeq:
        seed = int.from_bytes(hashlib.sha256(caption.encode("utf-8")).digest()[:8], "little")
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((self.n_tokens, self.dim))
        m /= np.linalg.norm(m, axis=1, keepdims=True)
        return EmbeddingSeq(m)


def write_embedding(path, data: np.ndarray) -> None:
    """Raw little-endian float32 rows plus a JSON sidecar at <path>.json."""
    arr = np.ascontiguousarray(data, dtype="<f4")
    if arr.ndim != 2:
        raise ShapeError(f"embedding payload must be 2-d, got shape {arr.shape}")
    path = Path(path)
    arr.tofile(path)
    sidecar = {"shape": [int(arr.shape[0]), int(arr.shape[1])], "dtype": "f32le"}
    Path(str(path) + ".json").write_text(json.dumps(sidecar), encoding="utf-8")


def read_embedding(path) -> np.ndarray:
    path = Path(path)
    sidecar = json.loads(Path(str(path) + ".json").read_text(encoding="utf-8"))
    if sidecar.get("dtype") != "f32le":
        raise ShapeError(f"unsupported embedding dtype {sidecar.get('dtype')!r}")
    shape = tuple(int(x) for x in sidecar["shape"])
    raw = np.fromfile(path, dtype="<f4")
    if raw.size != shape[0] * shape[1]:
        raise ShapeError(f"embedding file holds {raw.size} values, sidecar says {shape}")
    return raw.reshape(shape).astype(np.float64)


@dataclass(frozen=True)
class FileProvider:
    """Reads precomputed caption embeddings via a manifest mapping
    sha256(caption) to a data file path relative to the manifest."""

    manifest_path: str

    def embed(self, caption: str) -> EmbeddingSeq:
        manifest_file = Path(self.manifest_path)
        manifest = json.loads(manifest_file.read_text(encoding="utf-8"))
        key = caption_hash(caption)
        if key not in manifest:
            raise KeyError(f"no embedding for caption hash {key}")
        return EmbeddingSeq(read_embedding(manifest_file.parent / manifest[key]))
