"""Tilted-ellipse blob primitives: parameters, canonical form, rasterization, mask IOU.

A blob is an ellipse [cx, cy, a, b, theta] in source-pixel coordinates plus,
elsewhere in the package, a free-form caption. Rasterization samples cell
centers of an arbitrary grid, so the same blob can be drawn at any resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMask, InvalidBlob, RangeError, ShapeError

__all__ = [
    "BlobParams",
    "FrameGeometry",
    "BinaryMask",
    "canonicalize",
    "rasterize",
    "mask_iou",
]

_HALF_PI = math.pi / 2.0


def _wrap_half_pi(theta: float) -> float:
    # Reduce an angle modulo pi into (-pi/2, pi/2].
    t = math.fmod(theta, math.pi)
    if t <= -_HALF_PI:
        t += math.pi
    elif t > _HALF_PI:
        t -= math.pi
    return t


@dataclass(frozen=True)
class FrameGeometry:
    """Source frame size in pixels. Grid cells map into this coordinate space."""

    width: int
    height: int

    def __post_init__(self):
        if int(self.width) != self.width or int(self.height) != self.height:
            raise ShapeError(f"frame geometry must be integral, got {self.width}x{self.height}")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        if self.width < 1 or self.height < 1:
            raise ShapeError(f"frame geometry must be at least 1x1, got {self.width}x{self.height}")


@dataclass(frozen=True)
class BlobParams:
    """One tilted ellipse.

    cx, cy: center in source-pixel coordinates.
    a, b: semi-axis lengths, a along the theta direction.
    theta: rotation in radians. Canonical form keeps theta in (-pi/2, pi/2]
    with a >= b; raw values outside that range are legal input for
    :func:`canonicalize` and for validation reporting.
    """

    cx: float
    cy: float
    a: float
    b: float
    theta: float

    def __post_init__(self):
        vals = tuple(float(v) for v in (self.cx, self.cy, self.a, self.b, self.theta))
        if not all(math.isfinite(v) for v in vals):
            raise InvalidBlob(f"blob parameters must be finite, got {vals}")
        for name, value in zip(("cx", "cy", "a", "b", "theta"), vals):
            object.__setattr__(self, name, value)
        if self.a <= 0.0 or self.b <= 0.0:
            raise InvalidBlob(f"semi-axes must be positive, got a={self.a}, b={self.b}")

    @classmethod
    def from_sequence(cls, seq) -> "BlobParams":
        vals = list(seq)
        if len(vals) != 5:
            raise InvalidBlob(f"blob needs exactly 5 parameters, got {len(vals)}")
        return cls(*vals)

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.a, self.b, self.theta], dtype=np.float64)

    def is_canonical(self) -> bool:
        if self.a < self.b:
            return False
        if self.a == self.b:
            return self.theta == 0.0
        return -_HALF_PI < self.theta <= _HALF_PI


@dataclass(frozen=True)
class BinaryMask:
    """Row-major boolean grid. Immutable after construction."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.array(self.bits, dtype=np.bool_, order="C", copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"mask must be a 2-d grid with positive extent, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def h(self) -> int:
        return self.bits.shape[0]

    @property
    def w(self) -> int:
        return self.bits.shape[1]

    @property
    def count(self) -> int:
        return int(self.bits.sum())


def canonicalize(p: BlobParams) -> BlobParams:
    """Return the canonical form of a blob: a >= b, theta in (-pi/2, pi/2].

    Circles get theta = 0. The returned ellipse covers exactly the same point
    set as the input; the map is idempotent.
    """
    a, b, theta = p.a, p.b, p.theta
    if a < b:
        a, b = b, a
        theta = theta + _HALF_PI
    if a == b:
        theta = 0.0
    else:
        theta = _wrap_half_pi(theta)
    return BlobParams(p.cx, p.cy, a, b, theta)


def rasterize(p: BlobParams, geom: FrameGeometry, h: int, w: int, rho: float = 1.0) -> BinaryMask:
    """Rasterize a blob onto an h x w grid of cells covering the source frame.

    Cell (r, c) is set iff its center, mapped to source coordinates as
    x = (c + 0.5) * W / w and y = (r + 0.5) * H / h, lies inside the ellipse
    with both semi-axes rescaled by rho.
    """
    if h < 1 or w < 1:
        raise ShapeError(f"grid must be at least 1x1, got {h}x{w}")
    if not (rho > 0.0 and math.isfinite(rho)):
        raise RangeError(f"rescale factor must be positive and finite, got {rho}")
    xs = (np.arange(w, dtype=np.float64) + 0.5) * (geom.width / w)
    ys = (np.arange(h, dtype=np.float64) + 0.5) * (geom.height / h)
    dx = xs[None, :] - p.cx
    dy = ys[:, None] - p.cy
    ct = math.cos(p.theta)
    st = math.sin(p.theta)
    u = (dx * ct + dy * st) / (rho * p.a)
    v = (-dx * st + dy * ct) / (rho * p.b)
    return BinaryMask(u * u + v * v <= 1.0)


def mask_iou(m1: BinaryMask, m2: BinaryMask) -> float:
    """Intersection over union of two same-shape masks; 1.0 when both are empty."""
    if m1.bits.shape != m2.bits.shape:
        raise ShapeError(f"mask shapes differ: {m1.bits.shape} vs {m2.bits.shape}")
    inter = int(np.count_nonzero(m1.bits & m2.bits))
    union = int(np.count_nonzero(m1.bits | m2.bits))
    if union == 0:
        return 1.0
    return inter / union


def require_nonempty(mask: BinaryMask, what: str = "mask") -> None:
    """Raise EmptyMask unless at least one cell is set."""
    if not mask.bits.any():
        raise EmptyMask(f"{what} has no set cells")
