"""
Binary PNM codec: "P5" greyscale (depth) and "P6" RGB (color, tactile).

Header: magic, width, height, maxval as ASCII tokens separated by whitespace
(``#`` comments allowed), then exactly one whitespace byte, then samples.
maxval > 255 means two bytes per sample, most significant byte first.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from vitac_common.exception import (
    BadMagicError,
    FileFormatError,
    TruncatedFileError,
    UnsupportedFormatError,
)

_WHITESPACE = b" \t\n\r\x0b\x0c"
_CHANNELS = {b"P5": 1, b"P6": 3}


@dataclass(frozen=True)
class PixelImage:
    width: int
    height: int
    channels: int
    max_value: int
    pixels: np.ndarray  # (height, width, channels), integer samples

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise FileFormatError(f"image size {self.width}x{self.height} must be positive")
        if self.channels not in (1, 3):
            raise FileFormatError(f"channels must be 1 or 3, got {self.channels}")
        if not 1 <= self.max_value <= 65535:
            raise FileFormatError(f"max_value {self.max_value} not in [1, 65535]")
        pixels = np.asarray(self.pixels)
        if pixels.shape != (self.height, self.width, self.channels):
            raise FileFormatError(
                f"pixel array {pixels.shape} does not match {self.height}x{self.width}x{self.channels}"
            )
        if pixels.size and (pixels.min() < 0 or pixels.max() > self.max_value):
            raise FileFormatError(f"samples outside [0, {self.max_value}]")
        object.__setattr__(self, "pixels", pixels.astype(np.int64, copy=False))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PixelImage):
            return NotImplemented
        return (
            (self.width, self.height, self.channels, self.max_value)
            == (other.width, other.height, other.channels, other.max_value)
            and np.array_equal(self.pixels, other.pixels)
        )

    def with_pixels(self, pixels: np.ndarray) -> "PixelImage":
        return PixelImage(self.width, self.height, self.channels, self.max_value, pixels)


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    while pos < len(data):
        byte = data[pos:pos + 1]
        if byte == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        elif byte in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < len(data) and data[pos:pos + 1] not in _WHITESPACE and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise TruncatedFileError("PNM header ends early")
    return data[start:pos], pos


def parse_pnm(data: bytes) -> PixelImage:
    magic = bytes(data[:2])
    if magic not in _CHANNELS:
        raise BadMagicError(f"unsupported PNM magic {magic!r}; expected b'P5' or b'P6'")
    channels = _CHANNELS[magic]

    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        token, pos = _next_token(data, pos)
        if not token.isdigit():
            raise FileFormatError(f"PNM {name} is not a decimal integer: {token!r}")
        fields.append(int(token))
    width, height, max_value = fields
    if not 1 <= max_value <= 65535:
        raise UnsupportedFormatError(f"PNM maxval {max_value} not in [1, 65535]")
    if width < 1 or height < 1:
        raise UnsupportedFormatError(f"PNM size {width}x{height} must be positive")
    if pos >= len(data) or data[pos:pos + 1] not in _WHITESPACE:
        raise TruncatedFileError("PNM header is not followed by a whitespace byte")
    pos += 1

    dtype = np.dtype(">u2") if max_value > 255 else np.dtype("u1")
    n_samples = width * height * channels
    payload = data[pos:pos + n_samples * dtype.itemsize]
    if len(payload) < n_samples * dtype.itemsize:
        raise TruncatedFileError(
            f"PNM payload has {len(payload)} bytes, expected {n_samples * dtype.itemsize}"
        )
    samples = np.frombuffer(payload, dtype=dtype).astype(np.int64)
    if samples.size and samples.max() > max_value:
        raise FileFormatError(f"PNM sample {samples.max()} exceeds maxval {max_value}")
    return PixelImage(width, height, channels, max_value, samples.reshape(height, width, channels))


def serialize_pnm(img: PixelImage) -> bytes:
    magic = b"P5" if img.channels == 1 else b"P6"
    header = magic + b"\n%d %d\n%d\n" % (img.width, img.height, img.max_value)
    dtype = ">u2" if img.max_value > 255 else "u1"
    return header + img.pixels.astype(dtype).tobytes()


def read_pnm(path: Path) -> PixelImage:
    return parse_pnm(Path(path).read_bytes())


def write_pnm(img: PixelImage, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(serialize_pnm(img))
    return path
