"""Ellipse fitting and blob parameter interpolation.

fit_ellipse maximizes the IOU between a rasterized ellipse and a target mask
with derivative-free Nelder-Mead, started from image moments. The objective is
piecewise constant in the parameters, so the simplex steps are sized in cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .blobs import BinaryMask, BlobParams, FrameGeometry, canonicalize, mask_iou, rasterize
from .errors import EmptyMask, InvalidBlob, RangeError

__all__ = ["FitResult", "moments_init", "fit_ellipse", "interpolate_blob_params"]


@dataclass(frozen=True)
class FitResult:
    params: BlobParams
    iou: float
    iterations: int


def moments_init(mask: BinaryMask, geom: FrameGeometry) -> BlobParams:
    """Moment-based initial ellipse for a mask.

    Center is the centroid of set cell centers in source coordinates. Semi-axes
    are 2 * sqrt of the covariance eigenvalues (exact for a solid ellipse),
    orientation is the principal axis. Radii are floored at half a cell so a
    single set cell still yields a valid blob.
    """
    rows, cols = np.nonzero(mask.bits)
    if rows.size == 0:
        raise EmptyMask("cannot initialize from an empty mask")
    cell_w = geom.width / mask.w
    cell_h = geom.height / mask.h
    xs = (cols.astype(np.float64) + 0.5) * cell_w
    ys = (rows.astype(np.float64) + 0.5) * cell_h
    cx = float(xs.mean())
    cy = float(ys.mean())
    dx = xs - cx
    dy = ys - cy
    cov = np.array(
        [[float((dx * dx).mean()), float((dx * dy).mean())],
         [float((dx * dy).mean()), float((dy * dy).mean())]]
    )
    evals, evecs = np.linalg.eigh(cov)
    floor = 0.5 * max(cell_w, cell_h)
    b = max(2.0 * math.sqrt(max(float(evals[0]), 0.0)), floor)
    a = max(2.0 * math.sqrt(max(float(evals[1]), 0.0)), floor)
    theta = math.atan2(float(evecs[1, 1]), float(evecs[0, 1]))
    return canonicalize(BlobParams(cx, cy, a, b, theta))


def _clamped(vec: np.ndarray, floor: float) -> BlobParams:
    cx, cy, a, b, theta = (float(v) for v in vec)
    return BlobParams(cx, cy, max(a, floor), max(b, floor), theta)


def fit_ellipse(mask: BinaryMask, geom: FrameGeometry,
                max_iter: int = 200, fatol: float = 1e-4) -> FitResult:
    """Fit one ellipse to a mask by maximizing rasterized IOU at the mask's resolution.

    Deterministic: the initial simplex is built from the moment init with fixed
    per-dimension steps. The result never scores below the moment init.
    """
    init = moments_init(mask, geom)
    cell_w = geom.width / mask.w
    cell_h = geom.height / mask.h
    floor = 0.5 * max(cell_w, cell_h)

    def objective(vec: np.ndarray) -> float:
        cand = _clamped(vec, floor)
        return -mask_iou(rasterize(cand, geom, mask.h, mask.w, 1.0), mask)

    x0 = init.as_array()
    steps = np.array(
        [
            max(cell_w, 0.1 * init.a),
            max(cell_h, 0.1 * init.b),
            max(cell_w, 0.1 * init.a),
            max(cell_h, 0.1 * init.b),
            0.1,
        ]
    )
    simplex = np.vstack([x0] + [x0 + steps[i] * np.eye(5)[i] for i in range(5)])
    res = optimize.minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "maxiter": max_iter,
            "fatol": fatol,
            "xatol": 1e-3,
            "disp": False,
        },
    )
    best = canonicalize(_clamped(np.asarray(res.x, dtype=np.float64), floor))
    iou = mask_iou(rasterize(best, geom, mask.h, mask.w, 1.0), mask)
    init_iou = mask_iou(rasterize(init, geom, mask.h, mask.w, 1.0), mask)
    if iou < init_iou:
        best, iou = init, init_iou
    return FitResult(params=best, iou=iou, iterations=int(res.nit))


def interpolate_blob_params(p1: BlobParams, p2: BlobParams, alpha: float) -> BlobParams:
    """Interpolate two canonical blobs: linear in center and radii, shortest
    arc modulo pi in orientation. alpha = 0 and 1 return the endpoints exactly.
    """
    alpha = float(alpha)
    if not (0.0 <= alpha <= 1.0) or not math.isfinite(alpha):
        raise RangeError(f"alpha must lie in [0, 1], got {alpha}")
    if not p1.is_canonical() or not p2.is_canonical():
        raise InvalidBlob("interpolation expects canonical blob parameters")
    if alpha == 0.0:
        return p1
    if alpha == 1.0:
        return p2
    w0 = 1.0 - alpha
    cx = w0 * p1.cx + alpha * p2.cx
    cy = w0 * p1.cy + alpha * p2.cy
    a = w0 * p1.a + alpha * p2.a
    b = w0 * p1.b + alpha * p2.b
    d = p2.theta - p1.theta
    d -= math.pi * round(d / math.pi)  # shortest arc; orientation is mod pi
    theta = p1.theta + alpha * d
    return canonicalize(BlobParams(cx, cy, a, b, theta))
