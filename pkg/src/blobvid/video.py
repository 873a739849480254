"""Blob video container: per-frame ellipse tracks with captions at anchor frames.

A video holds N tracks over T frames at a fixed source geometry. Tracks may be
annotated on a sparse subset of frames; densify fills the gaps by parameter
interpolation and copies the nearest annotation outside the annotated span.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .blobs import BlobParams, FrameGeometry
from .errors import EmptyTrack, RangeError, SchemaError
from .fitting import interpolate_blob_params

__all__ = ["BlobTrack", "BlobVideo", "Violation", "densify", "validate",
           "video_to_json", "video_from_json"]

_HALF_PI = math.pi / 2.0

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class BlobTrack:
    """One object's ellipse per annotated frame plus captions keyed by frame."""

    object_id: int
    params: dict[int, BlobParams] = field(default_factory=dict)
    captions: dict[int, str] = field(default_factory=dict)

    def annotated_frames(self) -> list[int]:
        return sorted(self.params)


@dataclass(frozen=True)
class BlobVideo:
    num_frames: int
    geom: FrameGeometry
    anchor_interval: int = 8
    tracks: tuple[BlobTrack, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))
        if self.num_frames < 1:
            raise RangeError(f"a video needs at least one frame, got {self.num_frames}")
        if self.anchor_interval < 1:
            raise RangeError(f"anchor interval must be >= 1, got {self.anchor_interval}")

    @property
    def num_tracks(self) -> int:
        return len(self.tracks)

    def anchor_frames(self) -> list[int]:
        return list(range(0, self.num_frames, self.anchor_interval))

    def is_dense(self) -> bool:
        full = set(range(self.num_frames))
        return all(set(t.params) == full for t in self.tracks)


@dataclass(frozen=True)
class Violation:
    track_id: int | None
    frame: int | None
    field: str
    message: str

    def __str__(self) -> str:
        where = []
        if self.track_id is not None:
            where.append(f"track {self.track_id}")
        if self.frame is not None:
            where.append(f"frame {self.frame}")
        prefix = ", ".join(where)
        return f"{prefix}: {self.field}: {self.message}" if prefix else f"{self.field}: {self.message}"


def densify(v: BlobVideo) -> BlobVideo:
    """Fill every frame of every track.

    Annotated params are kept bit-for-bit. Interior gaps interpolate between
    the bracketing annotations; frames before the first or after the last
    annotation copy the nearest one. Idempotent.
    """
    new_tracks = []
    for track in v.tracks:
        frames = track.annotated_frames()
        if not frames:
            raise EmptyTrack(f"track {track.object_id} has no annotated frames")
        if frames[0] < 0 or frames[-1] >= v.num_frames:
            raise RangeError(
                f"track {track.object_id} annotated outside [0, {v.num_frames}): {frames[0]}..{frames[-1]}"
            )
        params: dict[int, BlobParams] = {}
        hi = 0
        for t in range(v.num_frames):
            if t in track.params:
                params[t] = track.params[t]
                continue
            if t < frames[0]:
                params[t] = track.params[frames[0]]
                continue
            if t > frames[-1]:
                params[t] = track.params[frames[-1]]
                continue
            while frames[hi + 1] < t:
                hi += 1
            t0, t1 = frames[hi], frames[hi + 1]
            alpha = (t - t0) / (t1 - t0)
            params[t] = interpolate_blob_params(track.params[t0], track.params[t1], alpha)
        new_tracks.append(BlobTrack(track.object_id, params, dict(track.captions)))
    return BlobVideo(v.num_frames, v.geom, v.anchor_interval, tuple(new_tracks))


def validate(v: BlobVideo) -> list[Violation]:
    """Collect contract violations instead of raising. Empty list means clean."""
    out: list[Violation] = []
    seen_ids: set[int] = set()
    for track in v.tracks:
        if track.object_id in seen_ids:
            out.append(Violation(track.object_id, None, "id", "duplicate track id"))
        seen_ids.add(track.object_id)
        if not track.params:
            out.append(Violation(track.object_id, None, "params", "track has no annotated frames"))
        for t in sorted(track.params):
            p = track.params[t]
            if not (0 <= t < v.num_frames):
                out.append(Violation(track.object_id, t, "frame",
                                     f"frame {t} outside [0, {v.num_frames})"))
            if p.a < p.b:
                out.append(Violation(track.object_id, t, "radii",
                                     f"a={p.a} smaller than b={p.b} (not canonical)"))
            if not (-_HALF_PI < p.theta <= _HALF_PI):
                out.append(Violation(track.object_id, t, "theta",
                                     f"orientation {p.theta} outside (-pi/2, pi/2]"))
        for t in sorted(track.captions):
            if t not in track.params or not (0 <= t < v.num_frames):
                out.append(Violation(track.object_id, t, "caption",
                                     f"caption at frame {t} has no annotated params in [0, {v.num_frames})"))
    return out


def video_to_json(v: BlobVideo) -> str:
    """Serialize to the canonical JSON schema with full float precision."""
    doc = {
        "version": SCHEMA_VERSION,
        "width": v.geom.width,
        "height": v.geom.height,
        "num_frames": v.num_frames,
        "anchor_interval": v.anchor_interval,
        "tracks": [
            {
                "id": track.object_id,
                "params": {
                    str(t): [p.cx, p.cy, p.a, p.b, p.theta]
                    for t, p in sorted(track.params.items())
                },
                "captions": {str(t): c for t, c in sorted(track.captions.items())},
            }
            for track in v.tracks
        ],
    }
    return json.dumps(doc, ensure_ascii=False, indent=2)


def _expect(cond: bool, message: str):
    if not cond:
        raise SchemaError(message)


def video_from_json(text: str) -> BlobVideo:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"video document is not valid JSON: {e.msg} at position {e.pos}") from e
    _expect(isinstance(doc, dict), "video document must be a JSON object")
    _expect(doc.get("version") == SCHEMA_VERSION,
            f"unsupported schema version {doc.get('version')!r}")
    for key in ("width", "height", "num_frames", "anchor_interval", "tracks"):
        _expect(key in doc, f"missing key {key!r}")
    geom = FrameGeometry(doc["width"], doc["height"])
    tracks = []
    _expect(isinstance(doc["tracks"], list), "tracks must be a list")
    for entry in doc["tracks"]:
        _expect(isinstance(entry, dict), "track entry must be an object")
        _expect(isinstance(entry.get("id"), int), "track id must be an integer")
        raw_params = entry.get("params", {})
        _expect(isinstance(raw_params, dict), f"track {entry['id']}: params must be an object")
        params = {}
        for k, vals in raw_params.items():
            _expect(isinstance(vals, list) and len(vals) == 5,
                    f"track {entry['id']} frame {k}: blob must have 5 numbers")
            params[int(k)] = BlobParams(*vals)
        raw_caps = entry.get("captions", {})
        _expect(isinstance(raw_caps, dict), f"track {entry['id']}: captions must be an object")
        captions = {}
        for k, c in raw_caps.items():
            _expect(isinstance(c, str), f"track {entry['id']} frame {k}: caption must be a string")
            captions[int(k)] = c
        tracks.append(BlobTrack(entry["id"], params, captions))
    return BlobVideo(doc["num_frames"], geom, doc["anchor_interval"], tuple(tracks))
