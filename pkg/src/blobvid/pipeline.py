"""Demo assembly of one attention block over a blob video.

Per frame, seeded features cross-attend to the fused caption-and-geometry
tokens of every blob under its rasterized mask, then all frames self-attend
under the shared-label mask. Both attention outputs enter through gated
residual merges. Everything is derived from the seed, so two runs agree byte
for byte.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import (
    CrossAttnWeights,
    SelfAttnWeights,
    gated_fuse,
    masked_3d_self_attention,
    masked_cross_attention,
)
from .config import Config
from .embedding import (
    DeterministicStub,
    EmbeddingSeq,
    MlpWeights,
    TextEmbedProvider,
    blob_embed,
    fourier_encode,
    interp_linear,
    interp_slerp,
)
from .errors import ShapeError
from .labelfield import AttnMask3D, build_label_field, per_frame_masks
from .parallel import parallel_map
from .video import BlobVideo, densify

__all__ = ["AttendStats", "context_embeddings", "run_attend_block"]


@dataclass(frozen=True)
class AttendStats:
    rows: int
    zero_rows: int
    row_sum_max_err: float
    max_abs_output: float

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "zero_rows": self.zero_rows,
            "row_sum_max_err": self.row_sum_max_err,
            "max_abs_output": self.max_abs_output,
        }


def context_embeddings(v: BlobVideo, provider: TextEmbedProvider,
                       method: str = "linear",
                       orientation: str = "as_printed") -> dict[tuple[int, int], EmbeddingSeq]:
    """Caption embedding for every (track index, frame).

    Captioned frames embed their caption; frames between two captioned anchors
    interpolate per token; frames outside the captioned span copy the nearest
    anchor. Tracks with no captions embed the empty string everywhere.
    """
    out: dict[tuple[int, int], EmbeddingSeq] = {}
    for n, track in enumerate(v.tracks):
        cap_frames = sorted(track.captions)
        anchors = {t: provider.embed(track.captions[t]) for t in cap_frames}
        if not cap_frames:
            empty = provider.embed("")
            for t in range(v.num_frames):
                out[(n, t)] = empty
            continue
        hi = 0
        for t in range(v.num_frames):
            if t in anchors:
                out[(n, t)] = anchors[t]
            elif t < cap_frames[0]:
                out[(n, t)] = anchors[cap_frames[0]]
            elif t > cap_frames[-1]:
                out[(n, t)] = anchors[cap_frames[-1]]
            else:
                while cap_frames[hi + 1] < t:
                    hi += 1
                t0, t1 = cap_frames[hi], cap_frames[hi + 1]
                if method == "slerp":
                    out[(n, t)] = interp_slerp(anchors[t0], anchors[t1], (t - t0) / (t1 - t0))
                else:
                    out[(n, t)] = interp_linear(
                        anchors[t0], anchors[t1], t, t1 - t0, t_anchor=t0, orientation=orientation
                    )
    return out


def _row_stats(probs: np.ndarray):
    sums = probs.sum(axis=1)
    zero = sums == 0.0
    if np.all(zero):
        return int(zero.sum()), 0.0
    return int(zero.sum()), float(np.abs(sums[~zero] - 1.0).max())


def run_attend_block(v: BlobVideo, cfg: Config, dim: int = 16, n_tokens: int = 4,
                     threads: int = 1):
    """Run cross-attention then 3D self-attention on seeded features.

    Returns (output array of shape (T*h*w, dim), AttendStats).
    """
    if dim < 2 or dim % 2 != 0:
        raise ShapeError(f"feature width must be even and >= 2, got {dim}")
    v = densify(v)
    h, w = cfg.feature_h, cfg.feature_w
    hw = h * w
    rng = np.random.default_rng(cfg.seed)
    g = rng.standard_normal((v.num_frames * hw, dim))
    provider = DeterministicStub(dim=dim // 2, n_tokens=n_tokens)
    ctx = context_embeddings(v, provider, method=cfg.interp_method,
                             orientation=cfg.interp_orientation)
    mlp = MlpWeights.seeded(dim, seed=cfg.seed + 1)
    ca_w = CrossAttnWeights.seeded(v.num_tracks, dim, dim, seed=cfg.seed + 2)
    sa_w = SelfAttnWeights.seeded(dim, seed=cfg.seed + 3)

    def frame_cross(t: int):
        blobs = [
            blob_embed(
                fourier_encode(track.params[t], v.geom, cfg.fourier_freqs, dim // 2, cfg.seed),
                ctx[(n, t)],
                mlp,
            )
            for n, track in enumerate(v.tracks)
        ]
        masks, _ = per_frame_masks(v, t, h, w, cfg.rescale)
        g_t = g[t * hw : (t + 1) * hw]
        ca_out, probs = masked_cross_attention(g_t, blobs, masks, ca_w, return_probs=True)
        return gated_fuse(g_t, ca_out, ca_w.gate), probs

    per_frame = parallel_map(frame_cross, range(v.num_frames), threads)
    x = np.vstack([fused for fused, _ in per_frame])
    ca_zero = 0
    ca_err = 0.0
    for _, probs in per_frame:
        z, e = _row_stats(probs)
        ca_zero += z
        ca_err = max(ca_err, e)

    field = build_label_field(v, h, w, cfg.rescale)
    sa_out, sa_probs = masked_3d_self_attention(x, AttnMask3D(field), sa_w, return_probs=True)
    y = gated_fuse(x, sa_out, sa_w.gate)
    sa_zero, sa_err = _row_stats(sa_probs)

    stats = AttendStats(
        rows=int(y.shape[0]),
        zero_rows=ca_zero + sa_zero,
        row_sum_max_err=max(ca_err, sa_err),
        max_abs_output=float(np.abs(y).max()),
    )
    return y, stats
