"""Grayscale rasters, PGM I/O, square resampling and quadrant addressing.

Pieces of a level are always enumerated in quadrant-address (Morton) order:
the piece with index ``i`` at level ``n`` has address digits equal to the
base-4 digits of ``i`` plus one (1=upper-left, 2=upper-right, 3=lower-left,
4=lower-right).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, PGMHeaderError, PGMTruncatedError, UnsupportedMaxvalError

QuadAddress = tuple[int, ...]


@dataclass(frozen=True, eq=False)
class GrayImage:
    """An 8-bit grayscale raster; ``pixels`` is a read-only (height, width) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise DimensionError(f"expected a 2-d raster, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("pixel intensities must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.array(arr, dtype=np.uint8, copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "GrayImage":
        return cls(np.array(rows, dtype=np.int64))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def is_square_pow2(self) -> bool:
        w = self.width
        return w == self.height and w > 0 and w & (w - 1) == 0

    @property
    def depth(self) -> int:
        """``m`` for a 2^m x 2^m image."""
        if not self.is_square_pow2:
            raise DimensionError(f"{self.width}x{self.height} is not a 2^m square")
        return self.width.bit_length() - 1

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


# --- PGM -------------------------------------------------------------------

_WS = b" \t\n\r\v\f"


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments.

    Returns the tokens and the offset just past the single whitespace byte that
    terminates the last one.
    """
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos] in _WS:
            pos += 1
        if pos < n and data[pos] == ord("#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
            continue
        if pos >= n:
            raise PGMHeaderError("unexpected end of header")
        start = pos
        while pos < n and data[pos] not in _WS and data[pos] != ord("#"):
            pos += 1
        tokens.append(data[start:pos])
    if pos >= n or data[pos] not in _WS:
        raise PGMHeaderError("header must end with a single whitespace byte")
    return tokens, pos + 1


def load_pgm(data: bytes) -> GrayImage:
    """Decode a binary (P5) PGM with maxval 255."""
    if not data.startswith(b"P5"):
        raise PGMHeaderError("not a binary PGM (magic P5 expected)")
    tokens, offset = _header_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise PGMHeaderError(f"non-numeric header field: {exc}") from None
    if width <= 0 or height <= 0:
        raise PGMHeaderError(f"invalid dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxvalError(f"unsupported maxval {maxval}")
    need = width * height
    body = data[offset:offset + need]
    if len(body) < need:
        raise PGMTruncatedError(f"expected {need} pixel bytes, found {len(body)}")
    return GrayImage(np.frombuffer(body, dtype=np.uint8).reshape(height, width))


def save_pgm(image: GrayImage) -> bytes:
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.pixels.tobytes()


def read_pgm(path) -> GrayImage:
    with open(path, "rb") as fh:
        return load_pgm(fh.read())


def write_pgm(path, image: GrayImage) -> None:
    with open(path, "wb") as fh:
        fh.write(save_pgm(image))


# --- square resampling -----------------------------------------------------

def square_depth(width: int, height: int) -> int:
    """Smallest m with width <= 2^m and height <= 2^m."""
    return max(0, (max(width, height) - 1).bit_length())


def to_square(image: GrayImage, m: int | None = None) -> GrayImage:
    """Nearest-pixel resample onto a 2^m x 2^m grid.

    Target (a, b) samples source row floor((a + 1/2) h / 2^m) and column
    floor((b + 1/2) w / 2^m), evaluated in integer arithmetic.
    """
    if m is None:
        m = square_depth(image.width, image.height)
    side = 1 << m
    if image.width > side or image.height > side:
        raise DimensionError(f"m={m} too small for a {image.width}x{image.height} image")
    idx = 2 * np.arange(side, dtype=np.int64) + 1
    rows = np.minimum(idx * image.height // (2 * side), image.height - 1)
    cols = np.minimum(idx * image.width // (2 * side), image.width - 1)
    return GrayImage(image.pixels[np.ix_(rows, cols)])


def from_square(square: GrayImage, width: int, height: int) -> GrayImage:
    """Inverse index map of :func:`to_square`."""
    side = square.width
    if not square.is_square_pow2:
        raise DimensionError(f"{square.width}x{square.height} is not a 2^m square")
    if not (0 < width <= side and 0 < height <= side):
        raise DimensionError(f"cannot restore {width}x{height} from a {side}x{side} square")
    rows = np.minimum((2 * np.arange(height, dtype=np.int64) + 1) * side // (2 * height), side - 1)
    cols = np.minimum((2 * np.arange(width, dtype=np.int64) + 1) * side // (2 * width), side - 1)
    return GrayImage(square.pixels[np.ix_(rows, cols)])


# --- quadrant addressing ---------------------------------------------------

def pixel_to_address(row: int, col: int, m: int) -> QuadAddress:
    side = 1 << m
    if not (0 <= row < side and 0 <= col < side):
        raise IndexError(f"pixel ({row}, {col}) outside a {side}x{side} image")
    return tuple(
        1 + 2 * ((row >> (m - j)) & 1) + ((col >> (m - j)) & 1) for j in range(1, m + 1)
    )


def address_to_pixel(addr: Sequence[int]) -> tuple[int, int]:
    row = col = 0
    for digit in addr:
        if digit not in (1, 2, 3, 4):
            raise ValueError(f"address digit {digit} not in 1..4")
        q = digit - 1
        row = (row << 1) | (q >> 1)
        col = (col << 1) | (q & 1)
    return row, col


def morton_index(rows: np.ndarray, cols: np.ndarray, n: int) -> np.ndarray:
    """Morton index of grid cells (row, col) on a 2^n x 2^n grid."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    out = np.zeros(np.broadcast(rows, cols).shape, dtype=np.int64)
    for bit in range(n):
        out |= ((rows >> bit) & 1) << (2 * bit + 1)
        out |= ((cols >> bit) & 1) << (2 * bit)
    return out


def _grid_order(n: int) -> np.ndarray:
    """Raster positions of the 4^n grid cells listed in Morton order."""
    g = 1 << n
    r, c = np.divmod(np.arange(g * g, dtype=np.int64), g)
    return np.argsort(morton_index(r, c, n), kind="stable")


# --- pieces ----------------------------------------------------------------

def extract_pieces(image: GrayImage | np.ndarray, n: int) -> np.ndarray:
    """All 4^n level-n pieces, shape (4^n, s, s) with s = 2^(m-n), Morton order."""
    arr = image.pixels if isinstance(image, GrayImage) else np.asarray(image)
    side = arr.shape[0]
    if arr.shape != (side, side) or side & (side - 1):
        raise DimensionError(f"shape {arr.shape} is not a 2^m square")
    m = side.bit_length() - 1
    if not 0 <= n <= m:
        raise ValueError(f"level {n} outside 0..{m}")
    g, s = 1 << n, side >> n
    grid = arr.reshape(g, s, g, s).transpose(0, 2, 1, 3).reshape(g * g, s, s)
    return grid[_grid_order(n)]


def assemble_pieces(pieces: np.ndarray) -> np.ndarray:
    """Inverse of :func:`extract_pieces`."""
    count, s, _ = pieces.shape
    n = (count.bit_length() - 1) // 2
    if 4 ** n != count:
        raise ValueError(f"{count} pieces is not a power of four")
    g = 1 << n
    grid = np.empty_like(pieces)
    grid[_grid_order(n)] = pieces
    return grid.reshape(g, g, s, s).transpose(0, 2, 1, 3).reshape(g * s, g * s)


def split_quadrants(blocks: np.ndarray) -> np.ndarray:
    """Split (R, s, s) blocks into (4R, s/2, s/2) children; child 4t+q is quadrant q+1 of block t."""
    r, s, _ = blocks.shape
    h = s // 2
    return blocks.reshape(r, 2, h, 2, h).transpose(0, 1, 3, 2, 4).reshape(4 * r, h, h)


def block_variation(block) -> int | float:
    """max - min over the block."""
    arr = np.asarray(block)
    if arr.size == 0:
        raise ValueError("empty block")
    v = arr.max() - arr.min()
    return int(v) if np.issubdtype(arr.dtype, np.integer) else float(v)
