import struct

import numpy as np
import pytest

from tkpan import io


def test_mnrt_layout(tmp_path):
    field = np.arange(2 * 3 * 4, dtype=np.float64).reshape(2, 3, 4) / 8.0
    p = tmp_path / "f.mnrt"
    io.write_mnrt(p, field)
    raw = p.read_bytes()
    assert raw[:4] == b"MNRT"
    assert struct.unpack("<III", raw[4:16]) == (2, 3, 4)
    assert len(raw) == 16 + 4 * 24
    assert struct.unpack("<f", raw[16:20])[0] == 0.0
    assert struct.unpack("<f", raw[20:24])[0] == field[0, 0, 1]
    np.testing.assert_array_equal(io.read_mnrt(p), field)


def test_mnrt_stores_float32(tmp_path):
    p = tmp_path / "f.mnrt"
    io.write_mnrt(p, np.full((1, 1, 1), 0.1))
    assert io.read_mnrt(p)[0, 0, 0] == np.float32(0.1)


@pytest.mark.parametrize("payload", [b"XXXX" + b"\0" * 12, b"MNR", b"MNRT" + struct.pack("<III", 2, 2, 1) + b"\0" * 4])
def test_mnrt_malformed(tmp_path, payload):
    p = tmp_path / "bad.mnrt"
    p.write_bytes(payload)
    with pytest.raises(io.FormatError):
        io.read_mnrt(p)


def test_mnrt_trailing_bytes(tmp_path):
    p = tmp_path / "f.mnrt"
    p.write_bytes(io.encode_mnrt(np.zeros((1, 1, 1))) + b"\0")
    with pytest.raises(io.FormatError, match="trailing"):
        io.read_mnrt(p)


def test_png_quantization_rounds_half_up():
    vals = np.array([0.0, 0.5 / 255, 1.49 / 255, 0.515625, 1.0, 1.7, -0.2])
    np.testing.assert_array_equal(io.to_uint8(vals), [0, 1, 1, 131, 255, 255, 0])


def test_png_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    q = rng.integers(0, 256, (5, 7, 3)).astype(np.uint8)
    p = tmp_path / "a.png"
    io.write_png(p, q / 255.0)
    back = io.read_png(p)
    np.testing.assert_array_equal(io.to_uint8(back), q)


def test_gray_png_has_one_channel(tmp_path):
    p = tmp_path / "g.png"
    io.write_png(p, np.full((2, 3, 1), 0.5))
    assert io.read_png(p).shape == (2, 3, 1)


def test_read_field_sniffs(tmp_path):
    a, b, c = tmp_path / "a.mnrt", tmp_path / "b.png", tmp_path / "c.txt"
    io.write_mnrt(a, np.ones((2, 2, 1)))
    io.write_png(b, np.ones((2, 2, 3)))
    c.write_text("hello")
    assert io.read_field(a).shape == (2, 2, 1)
    assert io.read_field(b).shape == (2, 2, 3)
    with pytest.raises(io.FormatError):
        io.read_field(c)


def test_stack_round_trip(tmp_path):
    levels = [np.full((2, 3, 1), float(i)) for i in range(4)]
    p = tmp_path / "s.stack"
    p.write_bytes(io.encode_stack(levels, 153.0, 0.5))
    assert p.read_bytes().split(b"\n", 1)[0] == b"N_s=4 P_a=153.0 max_disp=0.5"
    back, meta = io.read_stack(p)
    assert meta == {"N_s": 4, "P_a": 153.0, "max_disp": 0.5}
    for a, b in zip(levels, back):
        np.testing.assert_array_equal(a, b)


def test_atomic_outputs_all_or_nothing(tmp_path):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    with pytest.raises(RuntimeError):
        with io.atomic_outputs() as tmp:
            with open(tmp(a), "wb") as fh:
                fh.write(b"1")
            raise RuntimeError("boom")
    assert not a.exists()
    assert list(tmp_path.iterdir()) == []
    io.write_bytes_atomic({a: b"1", b: b"2"})
    assert a.read_bytes() == b"1" and b.read_bytes() == b"2"
