"""Image decoding and encoding.

Binary PPM (P6) is the built-in, dependency-free format; PNG works
through the same interface when Pillow is installed. Decoded images are
3xHxW float32 tensors with 8-bit values mapped to [-1, 1] via
``v / 127.5 - 1``.
"""

from __future__ import annotations

import numpy as np

from .errors import DecodeError, InvalidArgumentError

try:
    from PIL import Image as _PILImage
except ImportError:
    _PILImage = None


def from_uint8(raw: np.ndarray) -> np.ndarray:
    return (raw.astype(np.float32) / 127.5 - 1.0).astype(np.float32)


def to_uint8(img: np.ndarray) -> np.ndarray:
    v = np.rint((np.asarray(img, dtype=np.float64) + 1.0) * 127.5)
    return np.clip(v, 0, 255).astype(np.uint8)


class _PPMReader:
    """Incremental token reader that tracks byte offsets for error reports."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def token(self, what: str) -> bytes:
        data, n = self.data, len(self.data)
        i = self.pos
        # skip whitespace and '#' comments
        while i < n:
            c = data[i : i + 1]
            if c == b"#":
                while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                    i += 1
            elif c.isspace():
                i += 1
            else:
                break
        if i >= n:
            raise DecodeError(f"missing {what}", offset=i)
        start = i
        while i < n and not data[i : i + 1].isspace():
            i += 1
        self.pos = i
        return data[start:i]

    def integer(self, what: str) -> int:
        start = self.pos
        tok = self.token(what)
        try:
            return int(tok)
        except ValueError:
            raise DecodeError(f"{what} is not an integer: {tok!r}", offset=start) from None


def decode_ppm_bytes(data: bytes) -> np.ndarray:
    r = _PPMReader(data)
    magic = r.token("magic number")
    if magic != b"P6":
        raise DecodeError(f"unsupported format {magic!r}, expected binary PPM (P6)", offset=0)
    width = r.integer("width")
    height = r.integer("height")
    maxval = r.integer("max value")
    if width < 1 or height < 1:
        raise DecodeError(f"bad dimensions {width}x{height}", offset=r.pos)
    if maxval != 255:
        raise DecodeError(f"unsupported max value {maxval}, expected 255", offset=r.pos)
    r.pos += 1  # single whitespace byte after the header
    need = width * height * 3
    raw = data[r.pos : r.pos + need]
    if len(raw) != need:
        raise DecodeError(
            f"truncated pixel data: expected {need} bytes, got {len(raw)}",
            offset=r.pos + len(raw),
        )
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return from_uint8(pixels.transpose(2, 0, 1))


def encode_ppm_bytes(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[0] != 3:
        raise InvalidArgumentError("expected a 3xHxW image tensor")
    pixels = to_uint8(img).transpose(1, 2, 0)
    h, w = pixels.shape[:2]
    return b"P6\n%d %d\n255\n" % (w, h) + pixels.tobytes()


def encode_pgm_bytes(gray: np.ndarray) -> bytes:
    """Grayscale export; input values are expected in [0, 1]."""
    gray = np.asarray(gray)
    if gray.ndim != 2:
        raise InvalidArgumentError("expected a HxW grayscale map")
    pixels = np.clip(np.rint(gray * 255.0), 0, 255).astype(np.uint8)
    h, w = pixels.shape
    return b"P5\n%d %d\n255\n" % (w, h) + pixels.tobytes()


def decode_image(path) -> np.ndarray:
    """Decode a PPM (or, with Pillow, PNG) file to a 3xHxW [-1,1] tensor."""
    path = str(path)
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] == b"P6":
        return decode_ppm_bytes(data)
    if path.lower().endswith(".png") or data[:8] == b"\x89PNG\r\n\x1a\n":
        if _PILImage is None:
            raise DecodeError("PNG support requires Pillow", offset=0)
        import io

        with _PILImage.open(io.BytesIO(data)) as im:
            rgb = np.asarray(im.convert("RGB"))
        return from_uint8(rgb.transpose(2, 0, 1))
    raise DecodeError(f"unrecognized image format in {path}", offset=0)


def encode_image(img: np.ndarray, path) -> None:
    """Write a 3xHxW [-1,1] tensor as binary PPM (or PNG via Pillow)."""
    path = str(path)
    if path.lower().endswith(".png"):
        if _PILImage is None:
            raise DecodeError("PNG support requires Pillow", offset=0)
        _PILImage.fromarray(to_uint8(img).transpose(1, 2, 0)).save(path)
        return
    with open(path, "wb") as f:
        f.write(encode_ppm_bytes(img))


def write_pgm(gray: np.ndarray, path) -> None:
    with open(path, "wb") as f:
        f.write(encode_pgm_bytes(gray))
