"""PSNR, the preset tuples, rate-distortion sweeps and Pareto frontiers."""

from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .engine import EncodeSettings, decode, encode
from .errors import DimensionError
from .image import GrayImage, to_square
from .model import VTuple, constant_proportions, serialize, storage_upper_bound, storage_with_constants

PEAK = 255.0


def mse(a: GrayImage, b: GrayImage) -> float:
    if a.pixels.shape != b.pixels.shape:
        raise DimensionError(f"cannot compare {a.width}x{a.height} with {b.width}x{b.height}")
    diff = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    return float(np.mean(diff * diff))


def psnr(a: GrayImage, b: GrayImage) -> float:
    """10 log10(255^2 / MSE) in dB; ``inf`` for identical images."""
    err = mse(a, b)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / err)


# --- presets ---------------------------------------------------------------

PRESET_PREFIX = (4, 16, 64)
PRESET_LEAF = 256


@dataclass(frozen=True)
class Preset:
    """A 512x512 rule-of-thumb tuple: V_1..V_3 = 4, 16, 64, free V_4..V_8, V_9 = 256."""

    label: str
    middle: tuple[int, int, int, int, int]

    @property
    def values(self) -> tuple[int, ...]:
        return PRESET_PREFIX + self.middle + (PRESET_LEAF,)

    @property
    def vtuple(self) -> VTuple:
        return VTuple.from_values(self.values)

    @property
    def model_bytes(self) -> Fraction:
        return storage_upper_bound(self.vtuple)


_PRESET_ROWS = [
    ("500", (16, 16, 16, 16, 64)),
    ("1000", (256, 32, 16, 16, 64)),
    ("1500", (256, 64, 64, 32, 64)),
    ("2000", (128, 512, 32, 32, 64)),
    ("2500", (256, 256, 32, 128, 64)),
    ("3000", (256, 256, 64, 128, 128)),
    ("3500", (256, 256, 1024, 16, 64)),
    ("4000", (256, 1024, 64, 128, 64)),
    ("4500", (256, 256, 1024, 64, 64)),
    ("5000", (256, 1024, 128, 128, 128)),
    ("256", (256, 256, 256, 256, 256)),
]


def presets() -> list[Preset]:
    return [Preset(label, middle) for label, middle in _PRESET_ROWS]


def preset(label: str) -> Preset:
    for p in presets():
        if p.label == str(label):
            return p
    raise KeyError(f"unknown preset {label!r}; choose from {[p.label for p in presets()]}")


# --- sweep -----------------------------------------------------------------

SWEEP_CHOICES = (16, 32, 64, 128, 256, 1024)
DEFAULT_SPACE: tuple[tuple[int, ...], ...] = (
    tuple((v,) for v in PRESET_PREFIX) + (SWEEP_CHOICES,) * 5 + ((PRESET_LEAF,),)
)
DEFAULT_THRESHOLDS = (0, 15, 30, 45)
DEFAULT_BUDGET = 5000


@dataclass(frozen=True)
class RDPoint:
    vtuple: VTuple
    threshold: int
    seed: int
    model_bytes: Fraction
    file_bytes: int
    psnr: float

    @property
    def label(self) -> str:
        return "-".join(str(j) for j in self.vtuple.exponents)


def enumerate_tuples(space: Sequence[Sequence[int]] = DEFAULT_SPACE, budget: float = DEFAULT_BUDGET) -> list[VTuple]:
    """Valid tuples of the product space whose storage bound is within ``budget``, in product order."""
    out = []
    for values in itertools.product(*space):
        try:
            v = VTuple.from_values(values)
        except ValueError:
            continue
        if storage_upper_bound(v) <= budget:
            out.append(v)
    return out


def evaluate(image: GrayImage, settings: EncodeSettings) -> RDPoint:
    """Encode, decode and score one square image."""
    code = encode(image, settings)
    rec = decode(code)
    return RDPoint(
        vtuple=settings.vtuple,
        threshold=settings.threshold,
        seed=settings.seed,
        model_bytes=storage_with_constants(settings.vtuple, constant_proportions(code)),
        file_bytes=len(serialize(code)),
        psnr=psnr(image, rec),
    )


def _evaluate_job(args):
    image, settings = args
    return evaluate(image, settings)


def sweep(
    image: GrayImage,
    space: Sequence[Sequence[int]] = DEFAULT_SPACE,
    budget: float = DEFAULT_BUDGET,
    thresholds: Iterable[int] = DEFAULT_THRESHOLDS,
    seeds: Sequence[int] = (0,),
    jobs: int = 1,
    max_iter: int | None = None,
) -> list[RDPoint]:
    """Score every (tuple, threshold, seed) of the space within budget.

    Points come back in enumeration order whatever ``jobs`` is.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    thresholds = list(thresholds)
    tuples = enumerate_tuples(space, budget)
    if not tuples:
        return []
    m = tuples[0].m
    square = image if image.is_square_pow2 and image.depth == m else to_square(image, m)
    extra = {} if max_iter is None else {"max_iter": max_iter}
    jobs_list = [
        (square, EncodeSettings(v, threshold=t, seed=s, **extra))
        for v in tuples
        for t in thresholds
        for s in seeds
    ]
    if jobs <= 1:
        return [_evaluate_job(j) for j in jobs_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_evaluate_job, jobs_list, chunksize=4))


def frontier(points: Sequence[RDPoint], key: str = "model_bytes") -> list[RDPoint]:
    """Pareto-maximal points (fewer bytes, higher PSNR), sorted by bytes."""
    ordered = sorted(points, key=lambda p: (getattr(p, key), -p.psnr))
    out = []
    best = -math.inf
    i = 0
    while i < len(ordered):
        size = getattr(ordered[i], key)
        group = [p for p in ordered[i:] if getattr(p, key) == size]
        top = group[0].psnr
        if top > best:
            out.extend(p for p in group if p.psnr == top)
            best = top
        i += len(group)
    return out


# --- CSV -------------------------------------------------------------------

CSV_COLUMNS = ("tuple", "threshold", "seed", "model_bytes", "file_bytes", "psnr")


def format_bytes(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return repr(float(x)) if (x.denominator & (x.denominator - 1)) == 0 else f"{float(x):.6f}"


def format_psnr(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.6f}"


def points_to_csv(points: Iterable[RDPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for p in points:
        writer.writerow([p.label, p.threshold, p.seed, format_bytes(p.model_bytes), p.file_bytes, format_psnr(p.psnr)])
    return buf.getvalue()


def points_from_csv(text: str) -> list[RDPoint]:
    rows = csv.DictReader(io.StringIO(text))
    return [
        RDPoint(
            vtuple=VTuple(tuple(int(j) for j in r["tuple"].split("-"))),
            threshold=int(r["threshold"]),
            seed=int(r["seed"]),
            model_bytes=Fraction(r["model_bytes"]),
            file_bytes=int(r["file_bytes"]),
            psnr=float(r["psnr"]),
        )
        for r in rows
    ]
