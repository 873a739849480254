"""Per-position label sets over video feature grids, stored as packed bitsets.

Every position of a T x h x w grid carries the set of object labels whose
rasterized blob covers it; positions covered by no object carry the background
label. Two positions may attend to each other iff their label sets intersect.
The pairwise relation is implicit: storage stays at ceil((N+1)/8) bytes per
position and queries AND two bitsets, so the full Thw x Thw matrix is only
ever built on request and under a size cap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .blobs import BinaryMask, rasterize
from .errors import RangeError, ShapeError, TooLarge
from .video import BlobVideo

__all__ = [
    "NEG_INF",
    "LabelField",
    "AttnMask3D",
    "build_label_field",
    "attn_mask_query",
    "materialize_dense",
    "per_frame_masks",
]

# Additive mask value: most negative finite float64. Using a finite value keeps
# softmax shifting free of (-inf) - (-inf) NaNs; exp underflows to exactly 0.
NEG_INF = float(np.finfo(np.float64).min)

_DENSE_CAP_DEFAULT = 8192


@dataclass(frozen=True)
class LabelField:
    """Packed label bitsets for every position of a T x h x w grid.

    bits has shape (T*h*w, ceil(n_labels/8)), uint8, LSB-first within a byte.
    Label n_labels - 1 is the background label.
    """

    T: int
    h: int
    w: int
    n_labels: int
    bits: np.ndarray

    def __post_init__(self):
        arr = np.array(self.bits, dtype=np.uint8, order="C", copy=True)
        expected = (self.size, (self.n_labels + 7) // 8)
        if arr.shape != expected:
            raise ShapeError(f"label bits must have shape {expected}, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def size(self) -> int:
        return self.T * self.h * self.w

    @property
    def background_label(self) -> int:
        return self.n_labels - 1

    def position(self, t: int, r: int, c: int) -> int:
        if not (0 <= t < self.T and 0 <= r < self.h and 0 <= c < self.w):
            raise RangeError(f"position ({t}, {r}, {c}) outside {self.T}x{self.h}x{self.w}")
        return (t * self.h + r) * self.w + c

    def label_set(self, i: int) -> frozenset[int]:
        if not (0 <= i < self.size):
            raise RangeError(f"position {i} outside [0, {self.size})")
        row = self.bits[i]
        return frozenset(
            lab for lab in range(self.n_labels) if row[lab >> 3] & (1 << (lab & 7))
        )

    @classmethod
    def from_label_sets(cls, T: int, h: int, w: int, n_labels: int,
                        sets: Iterable[Iterable[int]]) -> "LabelField":
        nbytes = (n_labels + 7) // 8
        bits = np.zeros((T * h * w, nbytes), dtype=np.uint8)
        count = 0
        for i, labs in enumerate(sets):
            count += 1
            for lab in labs:
                if not (0 <= lab < n_labels):
                    raise RangeError(f"label {lab} outside [0, {n_labels})")
                bits[i, lab >> 3] |= np.uint8(1 << (lab & 7))
        if count != T * h * w:
            raise ShapeError(f"expected {T * h * w} label sets, got {count}")
        return cls(T, h, w, n_labels, bits)


def build_label_field(v: BlobVideo, h: int, w: int, rho: float = 1.0) -> LabelField:
    """Rasterize every track of a dense video onto a T x h x w grid of label sets.

    Label n is the index of the n-th track; background fills exactly the
    positions no object covers.
    """
    if not v.is_dense():
        raise ShapeError("label field needs a dense video; call densify first")
    n_objects = v.num_tracks
    n_labels = n_objects + 1
    nbytes = (n_labels + 7) // 8
    hw = h * w
    bits = np.zeros((v.num_frames * hw, nbytes), dtype=np.uint8)
    bg_byte, bg_bit = n_objects >> 3, n_objects & 7
    for t in range(v.num_frames):
        base = t * hw
        covered = np.zeros(hw, dtype=bool)
        for n, track in enumerate(v.tracks):
            m = rasterize(track.params[t], v.geom, h, w, rho).bits.ravel()
            bits[base : base + hw, n >> 3] |= m.astype(np.uint8) << np.uint8(n & 7)
            covered |= m
        bits[base : base + hw, bg_byte] |= (~covered).astype(np.uint8) << np.uint8(bg_bit)
    return LabelField(v.num_frames, h, w, n_labels, bits)


@dataclass(frozen=True)
class AttnMask3D:
    """Additive attention mask over all Thw positions, queried pairwise.

    query(i, j) is 0.0 when the two positions share at least one label
    (same object, or both background) and NEG_INF otherwise. The relation is
    symmetric and reflexive but not transitive.
    """

    field: LabelField

    @property
    def size(self) -> int:
        return self.field.size

    def allowed(self, i: int, j: int) -> bool:
        n = self.size
        if not (0 <= i < n and 0 <= j < n):
            raise RangeError(f"pair ({i}, {j}) outside [0, {n})^2")
        return bool(np.any(self.field.bits[i] & self.field.bits[j]))

    def query(self, i: int, j: int) -> float:
        return 0.0 if self.allowed(i, j) else NEG_INF

    def allowed_rows(self, start: int, stop: int) -> np.ndarray:
        """Boolean block (stop-start, size): which pairs may attend."""
        n = self.size
        if not (0 <= start <= stop <= n):
            raise RangeError(f"row range [{start}, {stop}) outside [0, {n}]")
        block = self.field.bits[start:stop, None, :] & self.field.bits[None, :, :]
        return block.any(axis=2)


def attn_mask_query(m: AttnMask3D, i: int, j: int) -> float:
    return m.query(i, j)


def materialize_dense(m: AttnMask3D, cap: int = _DENSE_CAP_DEFAULT) -> np.ndarray:
    """Dense (Thw, Thw) float64 matrix of {0, NEG_INF}. Guarded by a size cap."""
    n = m.size
    if n > cap:
        raise TooLarge(f"dense mask would be {n}x{n}, cap is {cap}")
    out = np.empty((n, n), dtype=np.float64)
    step = 1024
    for s in range(0, n, step):
        e = min(s + step, n)
        out[s:e] = np.where(m.allowed_rows(s, e), 0.0, NEG_INF)
    return out


def per_frame_masks(v: BlobVideo, t: int, h: int, w: int, rho: float = 1.0):
    """Rasterize all tracks at frame t. Returns (object masks, background mask).

    The background mask is the complement of the union, so object coverage and
    background partition the grid.
    """
    if not (0 <= t < v.num_frames):
        raise RangeError(f"frame {t} outside [0, {v.num_frames})")
    masks = []
    union = np.zeros((h, w), dtype=bool)
    for track in v.tracks:
        if t not in track.params:
            raise ShapeError(f"track {track.object_id} has no params at frame {t}; densify first")
        m = rasterize(track.params[t], v.geom, h, w, rho)
        masks.append(m)
        union |= m.bits
    return masks, BinaryMask(~union)
