import numpy as np
import pytest

from evhdr import InvalidInputError
from evhdr.events import EventStream
from evhdr.io import (EVENT_HEADER, read_events, read_meta, read_pfm, read_png, write_events,
                      write_meta, write_pfm, write_png)


class TestPfm:
    def test_rgb_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        img = (rng.lognormal(0, 3, size=(7, 5, 3))).astype(np.float32)
        img[0, 0] = [0.0, 1e-30, 3.4e38]
        write_pfm(tmp_path / "a.pfm", img)
        back = read_pfm(tmp_path / "a.pfm")
        assert back.dtype == np.float32
        assert back.tobytes() == img.tobytes()

    def test_gray_round_trip(self, tmp_path):
        img = np.arange(12, dtype=np.float32).reshape(3, 4)
        write_pfm(tmp_path / "g.pfm", img)
        np.testing.assert_array_equal(read_pfm(tmp_path / "g.pfm"), img)

    def test_header_and_row_order(self, tmp_path):
        img = np.zeros((2, 1, 3), np.float32)
        img[0] = 1.0  # top row
        write_pfm(tmp_path / "o.pfm", img)
        raw = (tmp_path / "o.pfm").read_bytes()
        assert raw.startswith(b"PF\n1 2\n-1.0\n")
        body = np.frombuffer(raw[len(b"PF\n1 2\n-1.0\n"):], "<f4")
        assert body.tolist() == [0, 0, 0, 1, 1, 1]  # stored bottom row first

    def test_big_endian_file_is_read(self, tmp_path):
        img = np.array([[1.5, -2.0]], np.float32)
        (tmp_path / "be.pfm").write_bytes(b"Pf\n2 1\n1.0\n" + img.astype(">f4").tobytes())
        np.testing.assert_array_equal(read_pfm(tmp_path / "be.pfm"), img)

    def test_rejects_bad_input(self, tmp_path):
        with pytest.raises(InvalidInputError):
            write_pfm(tmp_path / "x.pfm", np.zeros((2, 2, 4)))
        (tmp_path / "bad.pfm").write_bytes(b"P6\n1 1\n255\n")
        with pytest.raises(InvalidInputError):
            read_pfm(tmp_path / "bad.pfm")


class TestEventsFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        n = 200
        ev = EventStream(rng.integers(0, 17, n), rng.integers(0, 9, n), np.sort(rng.uniform(0, 0.08, n)),
                         rng.choice([-1, 1], n), (9, 17), (0.0, 0.08))
        write_events(tmp_path / "e.bin", ev)
        raw = (tmp_path / "e.bin").read_bytes()
        assert len(raw) == EVENT_HEADER.size + 16 * n
        assert EVENT_HEADER.unpack_from(raw) == (b"EVT1", 17, 9, n)
        back = read_events(tmp_path / "e.bin", span=(0.0, 0.08))
        for col in "xytp":
            np.testing.assert_array_equal(getattr(back, col), getattr(ev, col))
        assert back.resolution == (9, 17)

    def test_empty(self, tmp_path):
        write_events(tmp_path / "e.bin", EventStream.empty((3, 4), (0.0, 1.0)))
        back = read_events(tmp_path / "e.bin", span=(0.0, 1.0))
        assert len(back) == 0 and back.resolution == (3, 4)

    def test_corrupt(self, tmp_path):
        (tmp_path / "e.bin").write_bytes(b"NOPE" + bytes(12))
        with pytest.raises(InvalidInputError):
            read_events(tmp_path / "e.bin")
        (tmp_path / "t.bin").write_bytes(EVENT_HEADER.pack(b"EVT1", 2, 2, 3) + bytes(16))
        with pytest.raises(InvalidInputError):
            read_events(tmp_path / "t.bin")


def test_png_quantization(tmp_path):
    img = np.linspace(0, 1, 48).reshape(4, 4, 3)
    write_png(tmp_path / "p.png", img)
    np.testing.assert_allclose(read_png(tmp_path / "p.png"), img, atol=0.5 / 255 + 1e-7)


def test_meta_round_trip(tmp_path):
    write_meta(tmp_path / "obs.meta", 0.0413, -2, (0.0, 0.08), "dynamic")
    assert read_meta(tmp_path / "obs.meta") == {"timestamp": 0.0413, "ev": -2, "span": (0.0, 0.08),
                                                "kind": "dynamic"}
    (tmp_path / "bad.meta").write_text("ev x\n")
    with pytest.raises(InvalidInputError):
        read_meta(tmp_path / "bad.meta")
