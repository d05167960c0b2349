"""PPM images and the raw float tensor container.

Tensor files start with a 16-byte little-endian header: the magic
``b"SPT1"`` followed by uint32 rows, cols and channels. The payload is
float32, row-major over (rows, cols, channels).
"""

from __future__ import annotations

import struct

import numpy as np

TENSOR_MAGIC = b"SPT1"
_HEADER = struct.Struct("<4sIII")


def write_tensor(path, arr: np.ndarray) -> None:
    arr = np.asarray(arr)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"tensor must be 2-D or 3-D, got shape {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(TENSOR_MAGIC, *arr.shape))
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated tensor header")
        magic, rows, cols, channels = _HEADER.unpack(head)
        if magic != TENSOR_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != rows * cols * channels:
        raise ValueError(f"{path}: payload has {data.size} values, header says "
                         f"{rows}x{cols}x{channels}")
    return data.reshape(rows, cols, channels).astype(np.float64)


def _tokens(fh):
    """Yield whitespace-separated header tokens, skipping comments."""
    while True:
        line = fh.readline()
        if not line:
            return
        line = line.split(b"#", 1)[0]
        yield from line.split()


def read_ppm(path) -> np.ndarray:
    """Read a binary P6 (or P5) image as float64 H x W x 3 in [0, 1]."""
    with open(path, "rb") as fh:
        toks = []
        it = _tokens(fh)
        while len(toks) < 4:
            tok = next(it, None)
            if tok is None:
                raise ValueError(f"{path}: truncated PPM header")
            toks.append(tok)
        magic, width, height, maxval = toks[0], int(toks[1]), int(toks[2]), int(toks[3])
        if magic not in (b"P6", b"P5"):
            raise ValueError(f"{path}: unsupported PNM type {magic!r}")
        channels = 3 if magic == b"P6" else 1
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        count = width * height * channels
        data = np.frombuffer(fh.read(count * np.dtype(dtype).itemsize), dtype=dtype, count=count)
    img = data.reshape(height, width, channels).astype(np.float64) / maxval
    if channels == 1:
        img = np.repeat(img, 3, axis=2)
    return img


def to_uint8(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.dtype == np.uint8:
        return img
    return np.round(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)


def write_ppm(path, img: np.ndarray) -> None:
    img = to_uint8(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected H x W x 3 image, got {img.shape}")
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(img.tobytes())
