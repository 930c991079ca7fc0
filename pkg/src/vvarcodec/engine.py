"""Top-down V-variable encoder, decoders, and the variability checker."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import DEFAULT_MAX_ITER, VectorSet, dedupe, kmeans
from .errors import DimensionError
from .image import GrayImage, extract_pieces, split_quadrants
from .model import LeafTable, LevelTable, VTuple, VVarCode, active_levels


@dataclass(frozen=True)
class EncodeSettings:
    """Encoder parameters.

    ``weighted`` clusters the multiset of blocks (duplicates add weight);
    switched off, every distinct block counts once. ``usage_weights`` further
    weights each block by how many image positions its parent stands for.
    """

    vtuple: VTuple
    threshold: int = 0
    seed: int = 0
    max_iter: int = DEFAULT_MAX_ITER
    weighted: bool = True
    usage_weights: bool = False
    parallel: bool = False

    def __post_init__(self):
        if not 0 <= self.threshold <= 255:
            raise ValueError(f"threshold {self.threshold} outside [0, 255]")


def flatten_constant(blocks: np.ndarray, threshold: int) -> tuple[np.ndarray, np.ndarray]:
    """Replace every block whose range is <= threshold by its mean; returns (blocks, mask)."""
    flat = blocks.reshape(blocks.shape[0], -1)
    mask = flat.max(axis=1) - flat.min(axis=1) <= threshold
    if mask.any():
        flat = flat.copy()
        flat[mask] = flat[mask].mean(axis=1, keepdims=True)
    return flat.reshape(blocks.shape), mask


def constant_piece_mask(image: GrayImage, level: int, threshold: int) -> np.ndarray:
    """Which level pieces (Morton order) the encoder treats as constant."""
    return flatten_constant(extract_pieces(image, level).astype(np.float64), threshold)[1]


def _level_seed(seed: int, level: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, level])


def _cluster(blocks, weights, k, settings, level):
    """Cluster blocks into at most k representatives.

    Returns (centroid blocks, label per block, summed weight per centroid).
    """
    vs = VectorSet(blocks.reshape(blocks.shape[0], -1), weights)
    if not settings.weighted and not settings.usage_weights:
        vs = VectorSet(vs.vectors, None)
        distinct, inverse = dedupe(vs)
        vs = VectorSet(distinct.vectors, None)
    else:
        inverse = None
    cl = kmeans(vs, k, seed=_level_seed(settings.seed, level), max_iter=settings.max_iter, parallel=settings.parallel)
    labels = cl.assignments if inverse is None else cl.assignments[inverse]
    usage = np.bincount(labels, weights=weights, minlength=cl.k)
    side = blocks.shape[1]
    return cl.centroids.reshape(cl.k, side, side), labels, usage


def _pad(reps, used, usage, slots):
    """Grow to ``slots`` representatives; extra slots are vacant zero blocks."""
    extra = slots - reps.shape[0]
    if extra <= 0:
        return reps, used, usage
    return (
        np.concatenate([reps, np.zeros((extra,) + reps.shape[1:])]),
        np.concatenate([used, np.zeros(extra, dtype=bool)]),
        np.concatenate([usage, np.zeros(extra)]),
    )


def _constant_rows(ids: np.ndarray, used: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flag rows whose four entries agree; vacant rows become flagged zeros."""
    ids = np.where(used[:, None], ids, 0)
    return np.all(ids == ids[:, :1], axis=1), ids


def encode(image: GrayImage, settings: EncodeSettings, size: tuple[int, int] | None = None) -> VVarCode:
    """Approximate a 2^m x 2^m image by a V-variable image and return its code.

    Walks the quadtree top-down. Below the first constrained level the
    pieces themselves are the representatives. At every level from n0 on,
    blocks varying by at most ``threshold`` are flattened to their mean; at
    active levels the children of the current representatives are clustered
    into V_k groups whose centroids become the next representatives. The
    one-pixel children of the level m-1 representatives are rounded to
    colours (and quantized to a V_m-colour palette when V_m < 256).

    ``size`` records the (width, height) to restore after decoding; it
    defaults to the square's own size.
    """
    v = settings.vtuple
    m = v.m
    if not image.is_square_pow2 or image.depth != m:
        raise DimensionError(f"{image.width}x{image.height} image does not match m={m}")
    width, height = size or (image.width, image.height)
    levels = set(active_levels(v))
    n0 = v.n0
    thr = settings.threshold

    reps = image.pixels.astype(np.float64)[None]
    used = np.ones(1, dtype=bool)
    usage = np.ones(1)
    tables = {}
    for k in range(1, m):
        children = split_quadrants(reps)
        child_used = np.repeat(used, 4)
        child_usage = np.repeat(usage, 4)
        if k >= n0:
            children, _ = flatten_constant(children, thr)
        if k not in levels:
            reps, used, usage = children, child_used, child_usage
            continue
        weights = child_usage[child_used] if settings.usage_weights else None
        centroids, labels, rep_usage = _cluster(children[child_used], weights, v.value(k), settings, k)
        ids = np.zeros(children.shape[0], dtype=np.int64)
        ids[child_used] = labels
        constant, ids = _constant_rows(ids.reshape(-1, 4), used)
        tables[k] = LevelTable(k, constant, ids)
        reps, used, usage = _pad(centroids, np.ones(centroids.shape[0], dtype=bool), rep_usage, v.value(k))

    colours = _leaf_colours(reps, used, usage, v, settings)
    constant, colours = _constant_rows(colours, used)
    return VVarCode(v, tables, LeafTable(constant, colours), width, height, thr)


def _leaf_colours(reps, used, usage, v, settings) -> np.ndarray:
    """Rounded pixel colours of each representative, (R, 4), palette-quantized if V_m < 256."""
    pixels = split_quadrants(reps).reshape(-1, 4)
    colours = np.clip(np.rint(pixels), 0, 255).astype(np.int64)
    palette_size = v.value(v.m)
    if palette_size >= 256:
        return colours
    live = np.repeat(used, 4)
    values = colours.ravel()[live]
    weights = np.repeat(usage, 4)[live] if settings.usage_weights else None
    vs = VectorSet(values.astype(np.float64)[:, None], weights)
    if not settings.weighted and not settings.usage_weights:
        distinct, inverse = dedupe(vs)
        cl = kmeans(VectorSet(distinct.vectors), palette_size, seed=_level_seed(settings.seed, v.m),
                    max_iter=settings.max_iter, parallel=settings.parallel)
        labels = cl.assignments[inverse]
    else:
        cl = kmeans(vs, palette_size, seed=_level_seed(settings.seed, v.m),
                    max_iter=settings.max_iter, parallel=settings.parallel)
        labels = cl.assignments
    palette = np.clip(np.rint(cl.centroids[:, 0]), 0, 255).astype(np.int64)
    flat = colours.ravel().copy()
    flat[live] = palette[labels]
    return flat.reshape(-1, 4)


def _child_table(code: VVarCode, k: int) -> np.ndarray:
    """(R_{k-1}, 4) child types for level k, with the identity expansion on unstored levels."""
    table = code.tables.get(k)
    if table is not None:
        return table.children
    parents = code.vtuple.value(k - 1)
    return np.arange(4 * parents, dtype=np.int64).reshape(parents, 4)


def decode(code: VVarCode) -> GrayImage:
    """Rebuild the 2^m x 2^m image by repeated substitution of types."""
    m = code.m
    types = np.zeros((1, 1), dtype=np.int64)
    for k in range(1, m):
        types = _substitute(types, _child_table(code, k))
    pixels = _substitute(types, code.leaf.colours.astype(np.int64))
    return GrayImage(pixels.astype(np.uint8))


def _substitute(types: np.ndarray, table: np.ndarray) -> np.ndarray:
    g = types.shape[0]
    quads = table[types].reshape(g, g, 2, 2)
    return quads.transpose(0, 2, 1, 3).reshape(2 * g, 2 * g)


def decode_pixel(code: VVarCode, addr) -> int:
    """Colour of one pixel, following its type chain down the quadtree."""
    m = code.m
    if len(addr) != m:
        raise ValueError(f"address of length {len(addr)} for a depth-{m} code")
    if any(d not in (1, 2, 3, 4) for d in addr):
        raise ValueError(f"address digits must be 1..4: {tuple(addr)}")
    t = 0
    for k in range(1, m):
        q = addr[k - 1] - 1
        table = code.tables.get(k)
        t = int(table.children[t, q]) if table is not None else 4 * t + q
    return int(code.leaf.colours[t, addr[m - 1] - 1])


@dataclass(frozen=True)
class VariabilityReport:
    counts: tuple[int, ...]
    limits: tuple[int, ...]

    @property
    def passed(self) -> bool:
        return all(c <= lim for c, lim in zip(self.counts, self.limits))

    def __bool__(self):
        return self.passed


def count_distinct_pieces(image: GrayImage, level: int) -> int:
    pieces = extract_pieces(image, level)
    flat = np.ascontiguousarray(pieces.reshape(pieces.shape[0], -1))
    return int(np.unique(flat, axis=0).shape[0])


def verify_v_variability(image: GrayImage, v: VTuple) -> VariabilityReport:
    """Distinct level-n pieces for n = 1..m against V_n."""
    if not image.is_square_pow2 or image.depth != v.m:
        raise DimensionError(f"{image.width}x{image.height} image does not match m={v.m}")
    counts = tuple(count_distinct_pieces(image, n) for n in range(1, v.m + 1))
    return VariabilityReport(counts, v.values)
