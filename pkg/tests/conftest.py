import sys

import numpy as np
import pytest

from vvarcodec.image import GrayImage
from vvarcodec.model import VTuple


def random_image(rng, m):
    side = 1 << m
    return GrayImage(rng.integers(0, 256, (side, side)))


def random_vtuple(rng, m):
    """A random valid tuple with V_m <= 256."""
    exps = []
    prev = 0
    for k in range(1, m + 1):
        hi = min(2 * k, prev + 2, 8 if k == m else 2 * k)
        j = int(rng.integers(0, hi + 1))
        exps.append(j)
        prev = j
    return VTuple(tuple(exps))


def smooth_noisy_image(rng, m, noise=12.0):
    """Smooth gradient plus Gaussian noise, a stand-in for a photograph."""
    side = 1 << m
    r, c = np.mgrid[0:side, 0:side] / side
    base = 40 + 150 * r + 50 * np.sin(6 * c) * np.cos(4 * r)
    return GrayImage(np.clip(np.rint(base + rng.normal(0, noise, (side, side))), 0, 255).astype(np.uint8))


def concentric_squares(side=512, centre=(250, 262), ring=23):
    """Nested squares of distinct grays, off the quadtree grid."""
    r, c = np.mgrid[0:side, 0:side]
    idx = np.maximum(np.abs(r - centre[0]), np.abs(c - centre[1])) // ring
    return GrayImage(((idx * 37 + 11) % 256).astype(np.uint8))


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


def random_code(rng, v, width=None, height=None, p_const=0.3):
    """A structurally valid code with random tables and flags."""
    from vvarcodec.model import LeafTable, LevelTable, VVarCode, active_levels

    def stage(parents, limit):
        ids = rng.integers(0, limit, (parents, 4))
        flags = rng.random(parents) < p_const
        ids[flags] = ids[flags, :1]
        return flags, ids

    tables = {k: LevelTable(k, *stage(v.value(k - 1), v.value(k))) for k in active_levels(v)}
    flags, colours = stage(v.value(v.m - 1), 256)
    side = 1 << v.m
    return VVarCode(
        v,
        tables,
        LeafTable(flags, colours),
        width or int(rng.integers(1, side + 1)),
        height or int(rng.integers(1, side + 1)),
        int(rng.integers(0, 256)),
    )


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
