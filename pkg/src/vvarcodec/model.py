"""V-tuples, the compressed code, storage accounting and the .vvar format.

Layout of a ``.vvar`` file (big-endian)::

    "VVAR" | version u8 | m u8 | threshold u8 | width u16 | height u16 | j_1 .. j_m
    per active level k (ascending):
        constant-flag bitmask over V_{k-1} parents (MSB first, ceil(R/8) bytes)
        type ids, j_k bits each, MSB first: 1 per flagged parent, else 4;
        zero padded to a byte boundary
    leaf stage:
        constant-flag bitmask over V_{m-1} representatives
        1 or 4 colour bytes per representative

Levels with V_k = 4 V_{k-1} are not stored; they expand as child(t, q) = 4t + q.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    CodeFormatError,
    InvalidTupleError,
    TruncatedCodeError,
    TypeIdRangeError,
    UnsupportedVersionError,
)

MAGIC = b"VVAR"
VERSION = 1
_HEADER = struct.Struct(">4sBBBHH")


@dataclass(frozen=True)
class VTuple:
    """Per-level variability bounds V_k = 2^j_k, k = 1..m."""

    exponents: tuple[int, ...]

    def __post_init__(self):
        exps = tuple(int(j) for j in self.exponents)
        object.__setattr__(self, "exponents", exps)
        if not exps:
            raise InvalidTupleError("a V-tuple needs at least one level")
        prev = 0
        for k, j in enumerate(exps, start=1):
            if j < 0:
                raise InvalidTupleError(f"negative exponent at level {k}")
            if j > min(2 * k, prev + 2):
                raise InvalidTupleError(
                    f"V_{k} = {1 << j} exceeds min(4^{k}, 4 V_{k-1}) = {min(4 ** k, 4 << prev)}"
                )
            prev = j

    @classmethod
    def from_values(cls, values: Sequence[int]) -> "VTuple":
        exps = []
        for k, v in enumerate(values, start=1):
            v = int(v)
            if v < 1 or v & (v - 1):
                raise InvalidTupleError(f"V_{k} = {v} is not a power of two")
            exps.append(v.bit_length() - 1)
        return cls(tuple(exps))

    @classmethod
    def full(cls, m: int, leaf: int = 256) -> "VTuple":
        """The fully variable tuple: V_k = 4^k below the leaf level."""
        vals = [4 ** k for k in range(1, m)]
        vals.append(min(leaf, 4 ** m))
        return cls.from_values(vals)

    @property
    def m(self) -> int:
        return len(self.exponents)

    @property
    def values(self) -> tuple[int, ...]:
        return tuple(1 << j for j in self.exponents)

    def value(self, k: int) -> int:
        """V_k with the convention V_0 = 1."""
        return 1 if k == 0 else 1 << self.exponents[k - 1]

    def exponent(self, k: int) -> int:
        return 0 if k == 0 else self.exponents[k - 1]

    @property
    def n0(self) -> int:
        """Smallest level with V_n < 4^n (m if there is none)."""
        for k, j in enumerate(self.exponents, start=1):
            if j < 2 * k:
                return k
        return self.m

    @property
    def fully_variable(self) -> bool:
        return all(j == 2 * k for k, j in enumerate(self.exponents[:-1], start=1))

    def __str__(self):
        return "(" + ",".join(str(v) for v in self.values) + ")"


def active_levels(v: VTuple) -> list[int]:
    """Levels n0 <= k <= m-1 with V_k < 4 V_{k-1}, ascending."""
    return [k for k in range(1, v.m) if v.exponent(k) < v.exponent(k - 1) + 2]


def storage_upper_bound(v: VTuple) -> Fraction:
    total = sum((Fraction(4 * v.value(k - 1) * v.exponent(k), 8) for k in active_levels(v)), Fraction(0))
    return total + 4 * v.value(v.m - 1)


def storage_with_constants(v: VTuple, proportions: Mapping[int, Fraction | float] | None = None) -> Fraction:
    """Storage when a fraction p_k of level-k substitutions needs one id instead of four.

    ``proportions`` maps a parent level k to p_k; missing levels count as 0.
    """
    p = {int(k): Fraction(x) for k, x in (proportions or {}).items()}
    for k, x in p.items():
        if not 0 <= x <= 1:
            raise ValueError(f"proportion at level {k} is {x}, outside [0, 1]")
    total = Fraction(0)
    for k in active_levels(v):
        total += Fraction(v.exponent(k) * v.value(k - 1), 8) * (4 - 3 * p.get(k - 1, 0))
    return total + v.value(v.m - 1) * (4 - 3 * p.get(v.m - 1, 0))


def header_size(m: int) -> int:
    return _HEADER.size + m


def overhead_bound(v: VTuple) -> int:
    """Bytes a serialized code may use beyond ceil(storage_upper_bound(v)).

    Header, one flag bitmask per stored stage, and one padding byte per stage.
    """
    stages = [v.value(k - 1) for k in active_levels(v)] + [v.value(v.m - 1)]
    return header_size(v.m) + sum(ceil(r / 8) + 1 for r in stages)


# --- code data model -------------------------------------------------------

def _frozen(arr, dtype) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class LevelTable:
    """Substitutions from level k-1 representatives to level k types.

    ``children[t]`` holds the quadrant-ordered child types of parent t; a
    flagged (constant) parent stores one id, so its four entries are equal.
    """

    level: int
    constant: np.ndarray
    children: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "constant", _frozen(self.constant, bool))
        object.__setattr__(self, "children", _frozen(self.children, np.int64))
        if self.children.ndim != 2 or self.children.shape[1] != 4:
            raise CodeFormatError(f"level {self.level}: children must have shape (R, 4)")
        if self.constant.shape != (self.children.shape[0],):
            raise CodeFormatError(f"level {self.level}: one constant flag per parent required")
        flagged = self.children[self.constant]
        if flagged.size and np.any(flagged != flagged[:, :1]):
            raise CodeFormatError(f"level {self.level}: constant parent with distinct children")

    @property
    def parents(self) -> int:
        return self.children.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LevelTable):
            return NotImplemented
        return (
            self.level == other.level
            and np.array_equal(self.constant, other.constant)
            and np.array_equal(self.children, other.children)
        )


@dataclass(frozen=True, eq=False)
class LeafTable:
    """Colours of the one-pixel children of each level m-1 representative."""

    constant: np.ndarray
    colours: np.ndarray

    def __post_init__(self):
        colours = np.asarray(self.colours)
        if colours.size and (colours.min() < 0 or colours.max() > 255):
            raise TypeIdRangeError("leaf colour outside [0, 255]")
        object.__setattr__(self, "constant", _frozen(self.constant, bool))
        object.__setattr__(self, "colours", _frozen(colours, np.uint8))
        if self.colours.ndim != 2 or self.colours.shape[1] != 4:
            raise CodeFormatError("leaf colours must have shape (R, 4)")
        if self.constant.shape != (self.colours.shape[0],):
            raise CodeFormatError("one leaf constant flag per representative required")
        flagged = self.colours[self.constant]
        if flagged.size and np.any(flagged != flagged[:, :1]):
            raise CodeFormatError("constant leaf representative with distinct colours")

    def __eq__(self, other):
        if not isinstance(other, LeafTable):
            return NotImplemented
        return np.array_equal(self.constant, other.constant) and np.array_equal(self.colours, other.colours)


@dataclass(frozen=True)
class VVarCode:
    vtuple: VTuple
    tables: Mapping[int, LevelTable]
    leaf: LeafTable
    width: int
    height: int
    threshold: int = 0

    def __post_init__(self):
        object.__setattr__(self, "tables", dict(sorted(self.tables.items())))
        validate(self)

    @property
    def m(self) -> int:
        return self.vtuple.m

    def __eq__(self, other):
        if not isinstance(other, VVarCode):
            return NotImplemented
        return (
            self.vtuple == other.vtuple
            and self.width == other.width
            and self.height == other.height
            and self.threshold == other.threshold
            and self.tables == other.tables
            and self.leaf == other.leaf
        )


def validate(code: VVarCode) -> None:
    """Check table sizes and id ranges against the tuple."""
    v = code.vtuple
    side = 1 << v.m
    if not (0 < code.width <= min(side, 0xFFFF) and 0 < code.height <= min(side, 0xFFFF)):
        raise CodeFormatError(f"size {code.width}x{code.height} does not fit m={v.m}")
    if not 0 <= code.threshold <= 255:
        raise CodeFormatError(f"threshold {code.threshold} outside [0, 255]")
    levels = active_levels(v)
    if sorted(code.tables) != levels:
        raise CodeFormatError(f"tables for levels {sorted(code.tables)}, expected {levels}")
    for k in levels:
        table = code.tables[k]
        if table.level != k:
            raise CodeFormatError(f"table stored under level {k} claims level {table.level}")
        if table.parents != v.value(k - 1):
            raise CodeFormatError(f"level {k}: {table.parents} parents, expected {v.value(k - 1)}")
        if table.children.size and (table.children.min() < 0 or table.children.max() >= v.value(k)):
            raise TypeIdRangeError(f"level {k}: type id outside [0, {v.value(k)})")
    if code.leaf.colours.shape[0] != v.value(v.m - 1):
        raise CodeFormatError(
            f"leaf stage has {code.leaf.colours.shape[0]} representatives, expected {v.value(v.m - 1)}"
        )


def constant_proportions(code: VVarCode) -> dict[int, Fraction]:
    """Fraction of flagged substitutions per parent level (k-1 for each stored table, and m-1)."""
    out = {k - 1: Fraction(int(t.constant.sum()), t.parents) for k, t in code.tables.items()}
    leaf = code.leaf.constant
    out[code.m - 1] = Fraction(int(leaf.sum()), leaf.size)
    return out


@dataclass(frozen=True)
class StorageReport:
    model_bytes: Fraction
    upper_bound: Fraction
    file_bytes: int
    per_level: dict[int, Fraction] = field(default_factory=dict)


def storage_report(code: VVarCode) -> StorageReport:
    v = code.vtuple
    props = constant_proportions(code)
    per_level = {
        k: Fraction(v.exponent(k) * v.value(k - 1), 8) * (4 - 3 * props[k - 1]) for k in code.tables
    }
    per_level[v.m] = v.value(v.m - 1) * (4 - 3 * props[v.m - 1])
    return StorageReport(
        model_bytes=storage_with_constants(v, props),
        upper_bound=storage_upper_bound(v),
        file_bytes=len(serialize(code)),
        per_level=per_level,
    )


# --- bit packing -----------------------------------------------------------

def pack_bits(values: np.ndarray, width: int) -> bytes:
    """Pack non-negative ints MSB first at ``width`` bits each, zero padded to a byte."""
    values = np.asarray(values, dtype=np.int64)
    if width == 0 or values.size == 0:
        return b""
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    bits = ((values[:, None] >> shifts) & 1).astype(np.uint8)
    return np.packbits(bits.ravel()).tobytes()


def unpack_bits(data: bytes, count: int, width: int) -> np.ndarray:
    if width == 0 or count == 0:
        return np.zeros(count, dtype=np.int64)
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[: count * width]
    weights = np.int64(1) << np.arange(width - 1, -1, -1, dtype=np.int64)
    return bits.reshape(count, width).astype(np.int64) @ weights


def _nbytes(bits: int) -> int:
    return (bits + 7) // 8


def _entries(constant: np.ndarray, children: np.ndarray) -> np.ndarray:
    keep = np.repeat(~constant[:, None], 4, axis=1)
    keep[:, 0] = True
    return children[keep]


def serialize(code: VVarCode) -> bytes:
    v = code.vtuple
    out = bytearray(_HEADER.pack(MAGIC, VERSION, v.m, code.threshold, code.width, code.height))
    out += bytes(v.exponents)
    for k, table in code.tables.items():
        out += pack_bits(table.constant.astype(np.int64), 1)
        out += pack_bits(_entries(table.constant, table.children), v.exponent(k))
    out += pack_bits(code.leaf.constant.astype(np.int64), 1)
    out += _entries(code.leaf.constant, code.leaf.colours.astype(np.int64)).astype(np.uint8).tobytes()
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedCodeError(f"stream ends inside {what}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk


def _read_stage(reader: _Reader, parents: int, width: int, what: str) -> tuple[np.ndarray, np.ndarray]:
    flag_bytes = reader.take(_nbytes(parents), f"{what} flags")
    constant = unpack_bits(flag_bytes, parents, 1).astype(bool)
    counts = np.where(constant, 1, 4)
    n = int(counts.sum())
    raw = reader.take(_nbytes(n * width), f"{what} ids")
    _check_padding(flag_bytes, parents, what)
    _check_padding(raw, n * width, what)
    ids = unpack_bits(raw, n, width)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    cols = np.where(constant[:, None], 0, np.arange(4)[None, :])
    return constant, ids[starts[:, None] + cols]


def _check_padding(chunk: bytes, used_bits: int, what: str) -> None:
    spare = len(chunk) * 8 - used_bits
    if spare and chunk[-1] & ((1 << spare) - 1):
        raise CodeFormatError(f"non-zero padding bits after {what}")


def deserialize(data: bytes) -> VVarCode:
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError("not a .vvar stream (bad magic)")
    if len(data) < _HEADER.size:
        raise TruncatedCodeError("stream ends inside the header")
    _, version, m, threshold, width, height = _HEADER.unpack_from(data)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    if not 1 <= m <= 16:
        raise CodeFormatError(f"depth m={m} outside 1..16")
    reader = _Reader(data)
    reader.pos = _HEADER.size
    v = VTuple(tuple(reader.take(m, "exponents")))
    tables = {}
    for k in active_levels(v):
        constant, children = _read_stage(reader, v.value(k - 1), v.exponent(k), f"level {k}")
        tables[k] = LevelTable(k, constant, children)
    leaf_constant, colours = _read_stage(reader, v.value(m - 1), 8, "leaf stage")
    if reader.pos != len(data):
        raise CodeFormatError(f"{len(data) - reader.pos} trailing bytes after the leaf stage")
    return VVarCode(v, tables, LeafTable(leaf_constant, colours), width, height, threshold)
