from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vvarcodec.errors import DimensionError, PGMHeaderError, PGMTruncatedError, UnsupportedMaxvalError
from vvarcodec.image import (
    GrayImage,
    address_to_pixel,
    assemble_pieces,
    block_variation,
    extract_pieces,
    from_square,
    load_pgm,
    pixel_to_address,
    save_pgm,
    square_depth,
    to_square,
)

rasters = st.tuples(st.integers(1, 24), st.integers(1, 24)).flatmap(
    lambda hw: arrays(np.uint8, hw)
)


# --- PGM -------------------------------------------------------------------

def test_load_pgm_2x2():
    img = load_pgm(b"P5\n2 2\n255\n" + bytes([0, 1, 2, 3]))
    assert (img.width, img.height) == (2, 2)
    assert img.pixels.tolist() == [[0, 1], [2, 3]]


def test_save_pgm_1x1():
    assert save_pgm(GrayImage.from_rows([[42]])) == b"P5\n1 1\n255\n" + bytes([42])


def test_save_pgm_row_major():
    assert save_pgm(GrayImage.from_rows([[0, 1], [2, 3]])) == b"P5\n2 2\n255\n" + bytes([0, 1, 2, 3])


def test_load_pgm_comments_and_odd_whitespace():
    data = b"P5 # comment\n# another\n3\t1 255\n" + bytes([7, 8, 9])
    assert load_pgm(data).pixels.tolist() == [[7, 8, 9]]


@pytest.mark.parametrize(
    "data, exc",
    [
        (b"P5\n1 1\n65535\n\x00\x00", UnsupportedMaxvalError),
        (b"P2\n1 1\n255\n0", PGMHeaderError),
        (b"P5\n2 x\n255\n", PGMHeaderError),
        (b"P5\n2 2\n255", PGMHeaderError),
        (b"P5\n2 2\n255\n\x00\x01\x02", PGMTruncatedError),
    ],
)
def test_load_pgm_errors(data, exc):
    with pytest.raises(exc):
        load_pgm(data)


def test_unsupported_maxval_message():
    with pytest.raises(UnsupportedMaxvalError, match="unsupported maxval"):
        load_pgm(b"P5\n1 1\n65535\n\x00\x00")


@given(rasters)
def test_pgm_roundtrip(arr):
    img = GrayImage(arr)
    data = save_pgm(img)
    assert load_pgm(data) == img
    assert save_pgm(load_pgm(data)) == data


def test_non_canonical_header_is_canonicalized():
    data = b"P5  # hi\n 2   1\n255\n" + bytes([5, 6])
    assert save_pgm(load_pgm(data)) == b"P5\n2 1\n255\n" + bytes([5, 6])


def test_image_rejects_out_of_range():
    with pytest.raises(ValueError):
        GrayImage(np.array([[256]]))


# --- square resampling -----------------------------------------------------

def _brute_nearest(pos: Fraction, n: int) -> int:
    """Index of the unit cell [i, i+1) that contains pos, clamped."""
    for i in range(n):
        if i <= pos < i + 1:
            return i
    return n - 1


def _brute_to_square(x: np.ndarray, m: int) -> np.ndarray:
    side = 1 << m
    h, w = x.shape
    out = np.zeros((side, side), dtype=np.uint8)
    for a in range(side):
        for b in range(side):
            i = _brute_nearest(Fraction(2 * a + 1, 2) * h / side, h)
            j = _brute_nearest(Fraction(2 * b + 1, 2) * w / side, w)
            out[a, b] = x[i, j]
    return out


def _brute_from_square(sq: np.ndarray, w: int, h: int) -> np.ndarray:
    side = sq.shape[0]
    out = np.zeros((h, w), dtype=np.uint8)
    for r in range(h):
        for c in range(w):
            i = _brute_nearest(Fraction(2 * r + 1, 2) * side / h, side)
            j = _brute_nearest(Fraction(2 * c + 1, 2) * side / w, side)
            out[r, c] = sq[i, j]
    return out


def test_to_square_identity(rng):
    x = GrayImage(rng.integers(0, 256, (8, 8)))
    assert to_square(x, 3) == x


def test_to_square_single_pixel():
    assert to_square(GrayImage.from_rows([[77]]), 1).pixels.tolist() == [[77, 77], [77, 77]]


def test_to_square_2x4_brute_force(rng):
    x = rng.integers(0, 256, (2, 4)).astype(np.uint8)
    sq = to_square(GrayImage(x), 2).pixels
    assert np.array_equal(sq, _brute_to_square(x, 2))
    # each source pixel fills a 2x1 cell
    assert np.array_equal(sq, np.repeat(x, 2, axis=0))


def test_to_square_m_too_small():
    with pytest.raises(DimensionError):
        to_square(GrayImage(np.zeros((5, 3), dtype=np.uint8)), 2)


def test_square_depth():
    assert square_depth(1, 1) == 0
    assert square_depth(512, 512) == 9
    assert square_depth(513, 10) == 10
    assert square_depth(3, 5) == 3


def test_from_square_3x5_brute_force(rng):
    x = rng.integers(0, 256, (3, 5)).astype(np.uint8)
    sq = to_square(GrayImage(x), 3)
    assert np.array_equal(sq.pixels, _brute_to_square(x, 3))
    back = from_square(sq, 5, 3)
    assert np.array_equal(back.pixels, _brute_from_square(sq.pixels, 5, 3))
    assert np.array_equal(back.pixels, x)


def test_from_square_constant_any_size():
    for h, w in [(1, 1), (3, 7), (10, 2), (17, 17)]:
        x = GrayImage(np.full((h, w), 99, dtype=np.uint8))
        m = square_depth(w, h)
        assert from_square(to_square(x, m), w, h) == x


def test_from_square_dimension_mismatch():
    sq = GrayImage(np.zeros((4, 4), dtype=np.uint8))
    with pytest.raises(DimensionError):
        from_square(sq, 5, 2)
    with pytest.raises(DimensionError):
        from_square(GrayImage(np.zeros((4, 3), dtype=np.uint8)), 2, 2)


@given(rasters, st.integers(0, 2))
@settings(max_examples=60)
def test_square_roundtrip_recovers_original(arr, extra):
    h, w = arr.shape
    m = square_depth(w, h) + extra
    assert from_square(to_square(GrayImage(arr), m), w, h) == GrayImage(arr)


# --- addressing ------------------------------------------------------------

@pytest.mark.parametrize(
    "row, col, m, addr",
    [(0, 0, 2, (1, 1)), (3, 3, 2, (4, 4)), (3, 1, 2, (3, 4)), (0, 1, 1, (2,))],
)
def test_pixel_to_address(row, col, m, addr):
    assert pixel_to_address(row, col, m) == addr
    assert address_to_pixel(addr) == (row, col)


def test_address_all_ones():
    assert address_to_pixel((1,) * 5) == (0, 0)


@pytest.mark.parametrize("m", range(0, 7))
def test_address_bijection(m):
    side = 1 << m
    seen = set()
    for r in range(side):
        for c in range(side):
            addr = pixel_to_address(r, c, m)
            assert len(addr) == m and set(addr) <= {1, 2, 3, 4}
            assert address_to_pixel(addr) == (r, c)
            seen.add(addr)
    assert len(seen) == 4 ** m


def test_address_out_of_range():
    with pytest.raises(IndexError):
        pixel_to_address(4, 0, 2)
    with pytest.raises(ValueError):
        address_to_pixel((1, 5))


# --- pieces ----------------------------------------------------------------

def _brute_pieces(x: np.ndarray, n: int) -> list[np.ndarray]:
    m = x.shape[0].bit_length() - 1
    s = 1 << (m - n)
    out = []
    for i in range(4 ** n):
        digits = [(i >> (2 * (n - 1 - d))) & 3 for d in range(n)]
        r = c = 0
        for q in digits:
            r, c = 2 * r + q // 2, 2 * c + q % 2
        out.append(x[r * s:(r + 1) * s, c * s:(c + 1) * s])
    return out


def test_extract_level0_is_whole_image(rng):
    x = rng.integers(0, 256, (8, 8)).astype(np.uint8)
    pieces = extract_pieces(GrayImage(x), 0)
    assert pieces.shape == (1, 8, 8) and np.array_equal(pieces[0], x)


def test_extract_4x4_level1_by_hand():
    x = np.arange(16, dtype=np.uint8).reshape(4, 4)
    pieces = extract_pieces(GrayImage(x), 1)
    expected = [[[0, 1], [4, 5]], [[2, 3], [6, 7]], [[8, 9], [12, 13]], [[10, 11], [14, 15]]]
    assert pieces.tolist() == expected


@pytest.mark.parametrize("m, n", [(3, 1), (3, 2), (4, 2), (5, 3), (5, 5)])
def test_extract_matches_slicing_oracle(rng, m, n):
    x = rng.integers(0, 256, (1 << m, 1 << m)).astype(np.uint8)
    pieces = extract_pieces(GrayImage(x), n)
    oracle = _brute_pieces(x, n)
    assert len(pieces) == 4 ** n
    for got, want in zip(pieces, oracle):
        assert np.array_equal(got, want)


def test_extract_pixel_level_is_address_order(rng):
    m = 3
    x = rng.integers(0, 256, (8, 8)).astype(np.uint8)
    pieces = extract_pieces(GrayImage(x), m)
    for i in range(4 ** m):
        addr = tuple(((i >> (2 * (m - 1 - d))) & 3) + 1 for d in range(m))
        assert pieces[i, 0, 0] == x[address_to_pixel(addr)]
    assert sorted(pieces.ravel().tolist()) == sorted(x.ravel().tolist())


@pytest.mark.parametrize("n", range(0, 5))
def test_pieces_tile_the_image(rng, n):
    x = rng.integers(0, 256, (16, 16)).astype(np.uint8)
    assert np.array_equal(assemble_pieces(extract_pieces(GrayImage(x), n)), x)


def test_extract_level_too_deep():
    with pytest.raises(ValueError):
        extract_pieces(GrayImage(np.zeros((4, 4), dtype=np.uint8)), 3)


def test_block_variation():
    assert block_variation(np.full((2, 2), 9, dtype=np.uint8)) == 0
    assert block_variation(np.array([0, 255], dtype=np.uint8)) == 255
    assert block_variation(np.array([10, 12, 11, 25], dtype=np.uint8)) == 15


@given(arrays(np.uint8, st.tuples(st.integers(1, 4), st.integers(1, 4))))
def test_block_variation_zero_iff_constant(arr):
    assert (block_variation(arr) == 0) == bool(np.all(arr == arr.flat[0]))
