import numpy as np
import pytest

from sparsepose.fileio import read_ppm, read_tensor, write_ppm, write_tensor


def test_tensor_roundtrip(tmp_path, rng):
    arr = rng.normal(size=(4, 5, 3)).astype(np.float32)
    path = tmp_path / "t.bin"
    write_tensor(path, arr)
    raw = path.read_bytes()
    assert raw[:4] == b"SPT1" and len(raw) == 16 + arr.size * 4
    np.testing.assert_array_equal(read_tensor(path), arr)


def test_tensor_2d_gets_channel_axis(tmp_path):
    write_tensor(tmp_path / "t.bin", np.ones((2, 3)))
    assert read_tensor(tmp_path / "t.bin").shape == (2, 3, 1)


def test_tensor_bad_magic(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(ValueError):
        read_tensor(tmp_path / "x.bin")


def test_tensor_truncated(tmp_path):
    write_tensor(tmp_path / "t.bin", np.ones((2, 2, 2)))
    data = (tmp_path / "t.bin").read_bytes()[:-4]
    (tmp_path / "t.bin").write_bytes(data)
    with pytest.raises(ValueError):
        read_tensor(tmp_path / "t.bin")


def test_ppm_roundtrip(tmp_path, rng):
    img = rng.integers(0, 256, size=(7, 9, 3), dtype=np.uint8)
    write_ppm(tmp_path / "a.ppm", img)
    back = read_ppm(tmp_path / "a.ppm")
    np.testing.assert_array_equal(np.round(back * 255).astype(np.uint8), img)


def test_ppm_with_comment_and_p5(tmp_path):
    (tmp_path / "g.pgm").write_bytes(b"P5\n# comment\n2 1\n255\n" + bytes([0, 255]))
    img = read_ppm(tmp_path / "g.pgm")
    assert img.shape == (1, 2, 3) and img[0, 1, 2] == 1.0


def test_ppm_rejects_ascii(tmp_path):
    (tmp_path / "a.ppm").write_bytes(b"P3\n1 1\n255\n0 0 0\n")
    with pytest.raises(ValueError):
        read_ppm(tmp_path / "a.ppm")
