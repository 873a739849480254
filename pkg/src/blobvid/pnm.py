"""Binary PGM (P5) and PPM (P6) readers and writers.

Masks are stored as 8-bit PGM, 0 = outside and 255 = inside, one file per
frame per object, named f{frame:04}_o{object}.pgm. Renders are 8-bit PPM.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .blobs import BinaryMask
from .errors import ParseError, ShapeError

_MASK_NAME = re.compile(r"^f(\d{4,})_o(.+)\.pgm$")


def _read_header(data: bytes, magic: bytes):
    # Returns (width, height, maxval, offset of first data byte).
    if not data.startswith(magic):
        raise ParseError(f"expected {magic.decode()} header", byte_offset=0)
    pos = len(magic)
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError("truncated header", byte_offset=pos)
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace byte after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise ParseError(f"only maxval 255 is supported, got {maxval}", byte_offset=pos)
    return w, h, maxval, pos


def write_pgm(path, gray: np.ndarray) -> None:
    arr = np.ascontiguousarray(gray, dtype=np.uint8)
    if arr.ndim != 2:
        raise ShapeError(f"PGM payload must be 2-d, got shape {arr.shape}")
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(arr.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    w, h, _, pos = _read_header(data, b"P5")
    body = data[pos : pos + w * h]
    if len(body) != w * h:
        raise ParseError(f"expected {w * h} data bytes, got {len(body)}", byte_offset=pos)
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w)


def write_ppm(path, rgb: np.ndarray) -> None:
    arr = np.ascontiguousarray(rgb, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeError(f"PPM payload must be h x w x 3, got shape {arr.shape}")
    h, w, _ = arr.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(arr.tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    w, h, _, pos = _read_header(data, b"P6")
    body = data[pos : pos + w * h * 3]
    if len(body) != w * h * 3:
        raise ParseError(f"expected {w * h * 3} data bytes, got {len(body)}", byte_offset=pos)
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3)


def mask_filename(frame: int, object_id) -> str:
    return f"f{frame:04d}_o{object_id}.pgm"


def parse_mask_filename(name: str):
    """Return (frame, object id string) for a mask filename, or None."""
    m = _MASK_NAME.match(name)
    if m is None:
        return None
    return int(m.group(1)), m.group(2)


def write_mask_pgm(directory, frame: int, object_id, mask: BinaryMask) -> Path:
    path = Path(directory) / mask_filename(frame, object_id)
    write_pgm(path, np.where(mask.bits, 255, 0).astype(np.uint8))
    return path


def read_mask_pgm(path) -> BinaryMask:
    return BinaryMask(read_pgm(path) > 127)
