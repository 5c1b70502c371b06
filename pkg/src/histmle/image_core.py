"""Grayscale images, binary PGM I/O and the unit-interval intensity field."""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np


class PgmError(ValueError):
    pass


class MalformedHeader(PgmError):
    pass


class UnsupportedMaxval(PgmError):
    pass


class TruncatedPayload(PgmError):
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit image; ``levels`` is a read-only (height, width) uint8 array."""

    width: int
    height: int
    levels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dimensions must be positive, got {self.width}x{self.height}")
        arr = np.asarray(self.levels)
        if arr.size != self.width * self.height:
            raise ValueError(
                f"expected {self.width * self.height} samples, got {arr.size}"
            )
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValueError("levels must lie in [0, 255]")
        arr = np.array(arr, dtype=np.uint8).reshape(self.height, self.width)
        object.__setattr__(self, "levels", _frozen(arr))

    @classmethod
    def from_array(cls, arr) -> GrayImage:
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(arr.shape[1], arr.shape[0], arr)

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and bool(
            np.array_equal(self.levels, other.levels)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class IntensityField:
    """Real-valued image u(x) with 0 = black and 1 = white."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"field dimensions must be positive, got {self.width}x{self.height}")
        arr = np.array(self.values, dtype=np.float64)
        if arr.size != self.width * self.height:
            raise ValueError(
                f"expected {self.width * self.height} values, got {arr.size}"
            )
        if not np.all((arr >= 0.0) & (arr <= 1.0)):
            raise ValueError("intensity values must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(arr.reshape(self.height, self.width)))

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def __eq__(self, other):
        if not isinstance(other, IntensityField):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and bool(
            np.array_equal(self.values, other.values)
        )

    __hash__ = None


_TOKEN = re.compile(rb"\S+")


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments.

    Returns the tokens and the offset of the single whitespace byte that
    terminates the last one.
    """
    tokens = []
    pos = 0
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise MalformedHeader("unexpected end of header")
        if data[pos : pos + 1] == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise MalformedHeader("unterminated comment in header")
            pos = end + 1
            continue
        m = _TOKEN.match(data, pos)
        tok = m.group(0)
        if b"#" in tok:
            tok = tok[: tok.index(b"#")]
            pos += len(tok)
        else:
            pos = m.end()
        tokens.append(tok)
    return tokens, pos


def load_pgm(data: bytes) -> GrayImage:
    if data[:2] != b"P5":
        raise MalformedHeader(f"bad magic {data[:2]!r}, expected b'P5'")
    tokens, pos = _header_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise MalformedHeader(f"non-integer header field in {tokens[1:]!r}") from None
    if width < 1 or height < 1:
        raise MalformedHeader(f"invalid dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} not supported (only 255)")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise MalformedHeader("missing whitespace after maxval")
    payload = data[pos + 1 : pos + 1 + width * height]
    if len(payload) < width * height:
        raise TruncatedPayload(f"expected {width * height} bytes, got {len(payload)}")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return GrayImage(width, height, arr)


def save_pgm(image: GrayImage) -> bytes:
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.levels.tobytes()


def read_pgm(path) -> GrayImage:
    with open(path, "rb") as fh:
        return load_pgm(fh.read())


def write_pgm(path, image: GrayImage) -> None:
    with open(path, "wb") as fh:
        fh.write(save_pgm(image))


def normalize(image: GrayImage) -> IntensityField:
    return IntensityField(image.width, image.height, image.levels / 255.0)


def quantize(field: IntensityField) -> GrayImage:
    # inputs are non-negative, so floor(x + 0.5) is round-half-away-from-zero
    levels = np.clip(np.floor(field.values * 255.0 + 0.5), 0, 255)
    return GrayImage(field.width, field.height, levels.astype(np.uint8))
