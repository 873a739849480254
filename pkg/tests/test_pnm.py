import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blobvid.blobs import BinaryMask
from blobvid.errors import ParseError, ShapeError
from blobvid.pnm import (
    mask_filename,
    parse_mask_filename,
    read_mask_pgm,
    read_pgm,
    read_ppm,
    write_mask_pgm,
    write_pgm,
    write_ppm,
)


class TestPgm:
    def test_roundtrip(self, tmp_path, rng):
        img = rng.integers(0, 256, size=(5, 9), dtype=np.uint8)
        p = tmp_path / "a.pgm"
        write_pgm(p, img)
        assert np.array_equal(read_pgm(p), img)

    def test_header_bytes(self, tmp_path):
        p = tmp_path / "a.pgm"
        write_pgm(p, np.zeros((2, 3), dtype=np.uint8))
        assert p.read_bytes() == b"P5\n3 2\n255\n" + b"\x00" * 6

    def test_reads_commented_header(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P5\n# made elsewhere\n2 2\n# another\n255\n\x01\x02\x03\x04")
        assert np.array_equal(read_pgm(p), [[1, 2], [3, 4]])

    def test_rejects_wrong_magic(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P2\n1 1\n255\n0")
        with pytest.raises(ParseError):
            read_pgm(p)

    def test_rejects_other_maxval(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P5\n1 1\n65535\n\x00\x00")
        with pytest.raises(ParseError, match="maxval"):
            read_pgm(p)

    def test_rejects_truncated_body(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P5\n2 2\n255\n\x01\x02")
        with pytest.raises(ParseError, match="data bytes"):
            read_pgm(p)

    def test_rejects_truncated_header(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_bytes(b"P5\n2 ")
        with pytest.raises(ParseError):
            read_pgm(p)

    def test_write_rejects_non_2d(self, tmp_path):
        with pytest.raises(ShapeError):
            write_pgm(tmp_path / "a.pgm", np.zeros((2, 2, 3), dtype=np.uint8))


class TestPpm:
    def test_roundtrip(self, tmp_path, rng):
        img = rng.integers(0, 256, size=(4, 6, 3), dtype=np.uint8)
        p = tmp_path / "a.ppm"
        write_ppm(p, img)
        assert np.array_equal(read_ppm(p), img)

    def test_write_rejects_wrong_channels(self, tmp_path):
        with pytest.raises(ShapeError):
            write_ppm(tmp_path / "a.ppm", np.zeros((2, 2, 4), dtype=np.uint8))

    def test_magic_mismatch_with_pgm(self, tmp_path):
        p = tmp_path / "a.ppm"
        write_pgm(p, np.zeros((1, 1), dtype=np.uint8))
        with pytest.raises(ParseError):
            read_ppm(p)


class TestMaskFiles:
    def test_filename_format(self):
        assert mask_filename(7, "dog") == "f0007_odog.pgm"
        assert mask_filename(12345, 2) == "f12345_o2.pgm"

    @given(frame=st.integers(0, 99999), object_id=st.integers(0, 99))
    def test_filename_roundtrip(self, frame, object_id):
        parsed = parse_mask_filename(mask_filename(frame, object_id))
        assert parsed == (frame, str(object_id))

    def test_parse_rejects_other_names(self):
        assert parse_mask_filename("render_0001.ppm") is None
        assert parse_mask_filename("f12_o1.pgm") is None  # frame too short

    def test_mask_roundtrip(self, tmp_path, rng):
        mask = BinaryMask(rng.integers(0, 2, size=(6, 6)).astype(bool))
        path = write_mask_pgm(tmp_path, 3, "1", mask)
        assert path.name == "f0003_o1.pgm"
        back = read_mask_pgm(path)
        assert np.array_equal(back.bits, mask.bits)

    def test_read_threshold(self, tmp_path):
        p = tmp_path / "a.pgm"
        write_pgm(p, np.array([[0, 127, 128, 255]], dtype=np.uint8))
        assert read_mask_pgm(p).bits.tolist() == [[False, False, True, True]]
