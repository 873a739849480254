"""Shared fixtures and independent reference implementations.

The reference functions here deliberately avoid the package's own attention,
rasterization, and bitset machinery: they recompute everything from first
principles (explicit logit matrices, literal -inf entries, per-pixel loops,
Python set intersections) so that agreement is evidence, not tautology.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from blobvid.blobs import BinaryMask, BlobParams, FrameGeometry


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ---------------------------------------------------------------------------
# Geometry references


def point_in_ellipse(x: float, y: float, p: BlobParams, rho: float = 1.0) -> bool:
    """Scalar containment test, no vectorization shared with the package."""
    dx = x - p.cx
    dy = y - p.cy
    u = dx * math.cos(p.theta) + dy * math.sin(p.theta)
    v = -dx * math.sin(p.theta) + dy * math.cos(p.theta)
    return (u / (rho * p.a)) ** 2 + (v / (rho * p.b)) ** 2 <= 1.0


def rasterize_reference(p: BlobParams, geom: FrameGeometry, h: int, w: int,
                        rho: float = 1.0) -> np.ndarray:
    out = np.zeros((h, w), dtype=bool)
    for r in range(h):
        for c in range(w):
            x = (c + 0.5) * geom.width / w
            y = (r + 0.5) * geom.height / h
            out[r, c] = point_in_ellipse(x, y, p, rho)
    return out


def iou_reference(m1: np.ndarray, m2: np.ndarray) -> float:
    inter = 0
    union = 0
    for a, b in zip(m1.reshape(-1).tolist(), m2.reshape(-1).tolist()):
        inter += a and b
        union += a or b
    return inter / union if union else 1.0


def random_canonical_blob(rng: np.random.Generator, geom: FrameGeometry,
                          min_axis: float = 1.0, margin: float = 0.15) -> BlobParams:
    """Canonical blob whose center stays away from the border."""
    cx = rng.uniform(margin * geom.width, (1 - margin) * geom.width)
    cy = rng.uniform(margin * geom.height, (1 - margin) * geom.height)
    hi = 0.35 * min(geom.width, geom.height)
    a = rng.uniform(min_axis, hi)
    b = rng.uniform(min_axis, a)
    theta = rng.uniform(-math.pi / 2, math.pi / 2)
    if theta <= -math.pi / 2:
        theta = math.pi / 2
    if a == b:
        theta = 0.0
    return BlobParams(cx, cy, a, b, theta)


# ---------------------------------------------------------------------------
# Attention references


def softmax_reference(logits: np.ndarray) -> np.ndarray:
    """Row softmax over a matrix that may contain literal -inf; all--inf rows
    come back as all-zero rows."""
    out = np.zeros_like(logits, dtype=np.float64)
    for i in range(logits.shape[0]):
        row = logits[i]
        m = np.max(row)
        if m == -np.inf:
            continue
        e = np.exp(row - m)
        out[i] = e / e.sum()
    return out


def cross_attention_reference(g, blob_arrays, mask_arrays, wq, wk_list, wv_list):
    """Dense reference: stack every blob token, build the explicit logit
    matrix with -inf where the blob's mask is off, reference softmax, then
    the value average."""
    hw, d_g = g.shape
    keys = []
    values = []
    key_blob = []
    for n, tokens in enumerate(blob_arrays):
        for tok in tokens:
            keys.append(tok @ wk_list[n])
            values.append(tok @ wv_list[n])
            key_blob.append(n)
    if not keys:
        return np.zeros((hw, d_g))
    keys_m = np.stack(keys)
    values_m = np.stack(values)
    q = g @ wq
    scale = 1.0 / math.sqrt(d_g)
    logits = np.empty((hw, len(keys)), dtype=np.float64)
    for i in range(hw):
        for j in range(len(keys)):
            n = key_blob[j]
            flat_mask = mask_arrays[n].reshape(-1)
            if flat_mask[i]:
                logits[i, j] = float(q[i] @ keys_m[j]) * scale
            else:
                logits[i, j] = -np.inf
    probs = softmax_reference(logits)
    return probs @ values_m


def self_attention_reference(g, label_sets, wq, wk, wv):
    """Dense reference over Thw positions; allowed iff the Python label sets
    intersect."""
    n, d = g.shape
    q = g @ wq
    k = g @ wk
    v = g @ wv
    scale = 1.0 / math.sqrt(d)
    logits = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(n):
            if label_sets[i] & label_sets[j]:
                logits[i, j] = float(q[i] @ k[j]) * scale
            else:
                logits[i, j] = -np.inf
    return softmax_reference(logits) @ v


# ---------------------------------------------------------------------------
# Misc references


def angle_mean_reference(t1: float, t2: float) -> float:
    """Midpoint of two orientations on the half-circle via the doubled-angle
    complex mean."""
    s = math.sin(2 * t1) + math.sin(2 * t2)
    c = math.cos(2 * t1) + math.cos(2 * t2)
    return 0.5 * math.atan2(s, c)


def make_binary_mask(arr) -> BinaryMask:
    return BinaryMask(np.asarray(arr, dtype=bool))
