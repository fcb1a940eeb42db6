import numpy as np
import pytest

from bevkit.pnm import read_pnm, write_pnm
from bevkit.scene import render_pattern_image


class TestPNM:
    def test_graymap_roundtrip(self, tmp_path):
        image = render_pattern_image(37, 21, 4)
        path = tmp_path / "g.pgm"
        write_pnm(path, image)
        assert np.array_equal(read_pnm(path), image)

    def test_pixmap_roundtrip(self, tmp_path):
        gray = render_pattern_image(16, 9, 1)
        color = np.stack([gray, 255 - gray, gray // 3], axis=-1)
        path = tmp_path / "c.ppm"
        write_pnm(path, color)
        assert np.array_equal(read_pnm(path), color)

    def test_write_is_deterministic(self, tmp_path):
        image = render_pattern_image(10, 10, 0)
        write_pnm(tmp_path / "a.pgm", image)
        write_pnm(tmp_path / "b.pgm", image)
        assert (tmp_path / "a.pgm").read_bytes() == (tmp_path / "b.pgm").read_bytes()

    def test_header_format(self, tmp_path):
        write_pnm(tmp_path / "h.pgm", np.zeros((2, 3), dtype=np.uint8))
        data = (tmp_path / "h.pgm").read_bytes()
        assert data == b"P5\n3 2\n255\n" + b"\x00" * 6

    def test_comments_skipped_on_read(self, tmp_path):
        payload = b"P5\n# a comment\n3 2\n255\n" + bytes(range(6))
        path = tmp_path / "c.pgm"
        path.write_bytes(payload)
        assert read_pnm(path).shape == (2, 3)

    def test_ascii_magic_rejected(self, tmp_path):
        path = tmp_path / "a.pgm"
        path.write_bytes(b"P2\n3 2\n255\n0 1 2 3 4 5\n")
        with pytest.raises(ValueError, match="magic"):
            read_pnm(path)

    def test_sixteen_bit_rejected(self, tmp_path):
        path = tmp_path / "w.pgm"
        path.write_bytes(b"P5\n2 2\n65535\n" + b"\x00" * 8)
        with pytest.raises(ValueError, match="8-bit"):
            read_pnm(path)

    def test_truncated_raster_rejected(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + b"\x00" * 3)
        with pytest.raises(ValueError, match="raster bytes"):
            read_pnm(path)

    def test_non_uint8_write_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="uint8"):
            write_pnm(tmp_path / "f.pgm", np.zeros((2, 2), dtype=np.float32))
