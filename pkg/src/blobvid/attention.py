"""Masked attention reference operations with analytic gradients.

Two forward ops in float64:

* masked_cross_attention: every feature location attends over the stacked
  caption tokens of all blobs, but a blob's tokens are reachable only from
  locations inside that blob's mask. Locations covered by no blob get a zero
  output row rather than a softmax over nothing.
* masked_3d_self_attention: all T*h*w locations attend to each other under an
  additive pairwise mask derived from shared labels.

Masking is additive: blocked logits get NEG_INF (the most negative finite
float64) added, which keeps softmax shifting finite and underflows blocked
weights to exactly zero. Backward passes are hand-derived and checked against
central finite differences in the gradcheck module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .blobs import BinaryMask
from .embedding import BlobEmbedding
from .errors import ShapeError
from .labelfield import NEG_INF, AttnMask3D

__all__ = [
    "CrossAttnWeights",
    "SelfAttnWeights",
    "masked_softmax",
    "masked_cross_attention",
    "masked_3d_self_attention",
    "gated_fuse",
    "CrossAttnGrads",
    "SelfAttnGrads",
    "masked_cross_attention_backward",
    "masked_3d_self_attention_backward",
    "gated_fuse_backward",
]


@dataclass(frozen=True)
class CrossAttnWeights:
    """Cross-attention projections: one query map plus per-blob key/value maps."""

    wq: np.ndarray                 # (d_g, d_g)
    wk: tuple[np.ndarray, ...]     # N entries, each (d, d_g)
    wv: tuple[np.ndarray, ...]     # N entries, each (d, d_g)
    gate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "wq", np.asarray(self.wq, dtype=np.float64))
        object.__setattr__(self, "wk", tuple(np.asarray(w, dtype=np.float64) for w in self.wk))
        object.__setattr__(self, "wv", tuple(np.asarray(w, dtype=np.float64) for w in self.wv))
        if self.wq.ndim != 2 or self.wq.shape[0] != self.wq.shape[1]:
            raise ShapeError(f"query projection must be square, got {self.wq.shape}")
        if len(self.wk) != len(self.wv):
            raise ShapeError(f"{len(self.wk)} key maps vs {len(self.wv)} value maps")
        d_g = self.wq.shape[1]
        for i, (wk, wv) in enumerate(zip(self.wk, self.wv)):
            if wk.ndim != 2 or wk.shape[1] != d_g or wv.shape != wk.shape:
                raise ShapeError(f"blob {i}: key/value maps must be (d, {d_g}), got {wk.shape} and {wv.shape}")

    @property
    def n_blobs(self) -> int:
        return len(self.wk)

    @classmethod
    def seeded(cls, n_blobs: int, d: int, d_g: int, seed: int) -> "CrossAttnWeights":
        rng = np.random.default_rng(seed)
        s_q = 1.0 / math.sqrt(d_g)
        s_kv = 1.0 / math.sqrt(d)
        return cls(
            wq=rng.standard_normal((d_g, d_g)) * s_q,
            wk=tuple(rng.standard_normal((d, d_g)) * s_kv for _ in range(n_blobs)),
            wv=tuple(rng.standard_normal((d, d_g)) * s_kv for _ in range(n_blobs)),
            gate=float(rng.standard_normal() * 0.5),
        )


@dataclass(frozen=True)
class SelfAttnWeights:
    """Shared projections for 3D self-attention."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    gate: float = 0.0

    def __post_init__(self):
        for name in ("wq", "wk", "wv"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        d = self.wq.shape[0]
        for name in ("wq", "wk", "wv"):
            if getattr(self, name).shape != (d, d):
                raise ShapeError(f"{name} must be ({d}, {d}), got {getattr(self, name).shape}")

    @classmethod
    def seeded(cls, d: int, seed: int) -> "SelfAttnWeights":
        rng = np.random.default_rng(seed)
        s = 1.0 / math.sqrt(d)
        return cls(
            wq=rng.standard_normal((d, d)) * s,
            wk=rng.standard_normal((d, d)) * s,
            wv=rng.standard_normal((d, d)) * s,
            gate=float(rng.standard_normal() * 0.5),
        )


def masked_softmax(logits: np.ndarray, allow: np.ndarray) -> np.ndarray:
    """Row softmax under a boolean mask.

    Blocked entries receive an additive NEG_INF and end up with exactly zero
    weight; rows with nothing allowed come back as all-zero rows.
    """
    if logits.shape != allow.shape:
        raise ShapeError(f"logits {logits.shape} vs mask {allow.shape}")
    z = logits + np.where(allow, 0.0, NEG_INF)
    zmax = z.max(axis=1, keepdims=True) if z.shape[1] else np.zeros((z.shape[0], 1))
    e = np.exp(z - zmax)
    e = np.where(allow, e, 0.0)
    s = e.sum(axis=1, keepdims=True)
    any_allowed = allow.any(axis=1, keepdims=True) if z.shape[1] else np.zeros((z.shape[0], 1), dtype=bool)
    return np.where(any_allowed, e / np.where(s == 0.0, 1.0, s), 0.0)


def _stack_cross(g, blobs: Sequence[BlobEmbedding], masks: Sequence[BinaryMask],
                 wts: CrossAttnWeights):
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2:
        raise ShapeError(f"features must be (hw, d_g), got shape {g.shape}")
    hw, d_g = g.shape
    if wts.wq.shape != (d_g, d_g):
        raise ShapeError(f"query projection {wts.wq.shape} does not match feature width {d_g}")
    if len(blobs) != len(masks) or len(blobs) != wts.n_blobs:
        raise ShapeError(
            f"inconsistent blob count: {len(blobs)} embeddings, {len(masks)} masks, {wts.n_blobs} weight pairs"
        )
    keys, vals, allows = [], [], []
    for i, (emb, mask) in enumerate(zip(blobs, masks)):
        if mask.h * mask.w != hw:
            raise ShapeError(f"blob {i}: mask {mask.h}x{mask.w} does not cover {hw} locations")
        if emb.dim != wts.wk[i].shape[0]:
            raise ShapeError(f"blob {i}: embedding width {emb.dim} vs key map {wts.wk[i].shape}")
        keys.append(emb.data @ wts.wk[i])
        vals.append(emb.data @ wts.wv[i])
        allows.append(np.repeat(mask.bits.ravel()[:, None], emb.L, axis=1))
    if keys:
        K = np.vstack(keys)
        V = np.vstack(vals)
        allow = np.hstack(allows)
    else:
        K = np.zeros((0, d_g))
        V = np.zeros((0, d_g))
        allow = np.zeros((hw, 0), dtype=bool)
    return g, K, V, allow


def masked_cross_attention(g, blobs: Sequence[BlobEmbedding], masks: Sequence[BinaryMask],
                           wts: CrossAttnWeights, return_probs: bool = False):
    """Blob-masked cross-attention over stacked caption tokens.

    Location j scores every token of every blob, tokens of blob n are allowed
    only where mask n covers j, and the softmax runs over all allowed tokens
    jointly. Returns (hw, d_g); rows covered by no blob are zero.
    """
    g, K, V, allow = _stack_cross(g, blobs, masks, wts)
    q = g @ wts.wq
    scale = 1.0 / math.sqrt(g.shape[1])
    logits = (q @ K.T) * scale
    probs = masked_softmax(logits, allow)
    out = probs @ V
    if return_probs:
        return out, probs
    return out


def masked_3d_self_attention(g, mask: AttnMask3D, wts: SelfAttnWeights,
                             return_probs: bool = False):
    """Full self-attention over all T*h*w locations under the pairwise label mask."""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2:
        raise ShapeError(f"features must be (Thw, d), got shape {g.shape}")
    n, d = g.shape
    if n != mask.size:
        raise ShapeError(f"{n} feature rows vs mask over {mask.size} positions")
    if wts.wq.shape != (d, d):
        raise ShapeError(f"projections {wts.wq.shape} do not match feature width {d}")
    q = g @ wts.wq
    k = g @ wts.wk
    v = g @ wts.wv
    allow = mask.allowed_rows(0, n)
    logits = (q @ k.T) / math.sqrt(d)
    probs = masked_softmax(logits, allow)
    out = probs @ v
    if return_probs:
        return out, probs
    return out


def gated_fuse(x, attn_out, gamma: float) -> np.ndarray:
    """Residual merge x + tanh(gamma) * attn_out; gamma = 0 is the identity."""
    x = np.asarray(x, dtype=np.float64)
    attn_out = np.asarray(attn_out, dtype=np.float64)
    if x.shape != attn_out.shape:
        raise ShapeError(f"residual {x.shape} vs attention output {attn_out.shape}")
    return x + math.tanh(gamma) * attn_out


# ---------------------------------------------------------------------------
# Backward passes: gradients of <upstream, forward(...)>


def _softmax_vjp(probs: np.ndarray, dprobs: np.ndarray) -> np.ndarray:
    # Rows that were fully blocked have all-zero probs, so their grad is zero.
    inner = (dprobs * probs).sum(axis=1, keepdims=True)
    return probs * (dprobs - inner)


@dataclass(frozen=True)
class CrossAttnGrads:
    g: np.ndarray
    blobs: tuple[np.ndarray, ...]
    wq: np.ndarray
    wk: tuple[np.ndarray, ...]
    wv: tuple[np.ndarray, ...]


def masked_cross_attention_backward(g, blobs: Sequence[BlobEmbedding],
                                    masks: Sequence[BinaryMask],
                                    wts: CrossAttnWeights,
                                    upstream: np.ndarray) -> CrossAttnGrads:
    g, K, V, allow = _stack_cross(g, blobs, masks, wts)
    upstream = np.asarray(upstream, dtype=np.float64)
    d_g = g.shape[1]
    scale = 1.0 / math.sqrt(d_g)
    q = g @ wts.wq
    logits = (q @ K.T) * scale
    probs = masked_softmax(logits, allow)
    if upstream.shape != (g.shape[0], d_g):
        raise ShapeError(f"upstream must have shape {(g.shape[0], d_g)}, got {upstream.shape}")

    dV = probs.T @ upstream
    dprobs = upstream @ V.T
    dlogits = _softmax_vjp(probs, dprobs)
    dq = (dlogits @ K) * scale
    dK = (dlogits.T @ q) * scale
    dg = dq @ wts.wq.T
    dwq = g.T @ dq

    dblobs, dwk, dwv = [], [], []
    offset = 0
    for emb, wk_n, wv_n in zip(blobs, wts.wk, wts.wv):
        sl = slice(offset, offset + emb.L)
        offset += emb.L
        dblobs.append(dK[sl] @ wk_n.T + dV[sl] @ wv_n.T)
        dwk.append(emb.data.T @ dK[sl])
        dwv.append(emb.data.T @ dV[sl])
    return CrossAttnGrads(g=dg, blobs=tuple(dblobs), wq=dwq, wk=tuple(dwk), wv=tuple(dwv))


@dataclass(frozen=True)
class SelfAttnGrads:
    g: np.ndarray
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray


def masked_3d_self_attention_backward(g, mask: AttnMask3D, wts: SelfAttnWeights,
                                      upstream: np.ndarray) -> SelfAttnGrads:
    g = np.asarray(g, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    n, d = g.shape
    scale = 1.0 / math.sqrt(d)
    q = g @ wts.wq
    k = g @ wts.wk
    v = g @ wts.wv
    allow = mask.allowed_rows(0, n)
    probs = masked_softmax((q @ k.T) * scale, allow)
    if upstream.shape != g.shape:
        raise ShapeError(f"upstream must have shape {g.shape}, got {upstream.shape}")

    dv = probs.T @ upstream
    dprobs = upstream @ v.T
    dlogits = _softmax_vjp(probs, dprobs)
    dq = (dlogits @ k) * scale
    dk = (dlogits.T @ q) * scale
    dg = dq @ wts.wq.T + dk @ wts.wk.T + dv @ wts.wv.T
    return SelfAttnGrads(
        g=dg,
        wq=g.T @ dq,
        wk=g.T @ dk,
        wv=g.T @ dv,
    )


def gated_fuse_backward(x, attn_out, gamma: float, upstream: np.ndarray):
    """Returns (dx, dattn_out, dgamma) for <upstream, gated_fuse(...)>."""
    x = np.asarray(x, dtype=np.float64)
    attn_out = np.asarray(attn_out, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != x.shape:
        raise ShapeError(f"upstream must have shape {x.shape}, got {upstream.shape}")
    t = math.tanh(gamma)
    dgamma = (1.0 - t * t) * float((upstream * attn_out).sum())
    return upstream.copy(), t * upstream, dgamma
