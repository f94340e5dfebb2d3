"""Multi-scale partitions of a matrix index set.

A partition is an ordered list of scales. Each standard scale tiles the
``M x N`` index set into ``m_i x n_i`` blocks; when ``m_i`` does not divide
``M`` (or ``n_i`` does not divide ``N``) the last block row (column) is
ragged rather than zero padded. An optional noise scale treats the whole
matrix as a single ``MN x 1`` column, flattened row-major.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np

STANDARD = "standard"
NOISE = "noise"
TWO_SIDED = "two-sided"
ONE_SIDED = "one-sided"


@dataclass(frozen=True)
class Scale:
    index: int
    block_rows: int
    block_cols: int
    kind: str = STANDARD

    @property
    def is_noise(self):
        return self.kind == NOISE

    @property
    def area(self):
        return self.block_rows * self.block_cols

    def label(self):
        if self.is_noise:
            return f"noise({self.block_rows}x1)"
        return f"{self.block_rows}x{self.block_cols}"


@dataclass(frozen=True)
class BlockIndex:
    scale: int
    row: int
    col: int
    row_start: int
    col_start: int
    height: int
    width: int
    noise: bool = False

    @property
    def shape(self):
        return (self.height, self.width)


@dataclass(frozen=True)
class MultiScalePartition:
    rows: int
    cols: int
    scales: tuple[Scale, ...]
    mode: str = TWO_SIDED
    axis: str = "rows"

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("matrix dimensions must be positive")
        if not self.scales:
            raise ValueError("a partition needs at least one scale")
        if any(s.is_noise for s in self.scales[:-1]):
            raise ValueError("the noise scale must be the last scale")
        areas = [s.area for s in self.scales if not s.is_noise]
        if any(b <= a for a, b in zip(areas, areas[1:])):
            raise ValueError(f"scale block areas must strictly increase, got {areas}")
        for s in self.scales:
            if s.is_noise:
                if (s.block_rows, s.block_cols) != (self.rows * self.cols, 1):
                    raise ValueError("noise scale must reshape to an MN x 1 vector")
            elif not (1 <= s.block_rows <= self.rows and 1 <= s.block_cols <= self.cols):
                raise ValueError(f"scale {s.label()} does not fit a {self.shape} matrix")

    @property
    def shape(self):
        return (self.rows, self.cols)

    def __len__(self):
        return len(self.scales)

    def __iter__(self) -> Iterator[Scale]:
        return iter(self.scales)

    def __getitem__(self, i) -> Scale:
        return self.scales[i]

    def grid(self, scale):
        """Number of block rows and block columns at `scale`."""
        if scale.is_noise:
            return (1, 1)
        return (-(-self.rows // scale.block_rows), -(-self.cols // scale.block_cols))

    def num_blocks(self, scale):
        br, bc = self.grid(scale)
        return br * bc

    def blocks(self, scale) -> list[BlockIndex]:
        if scale.is_noise:
            return [BlockIndex(scale.index, 0, 0, 0, 0, self.rows * self.cols, 1, noise=True)]
        m, n = scale.block_rows, scale.block_cols
        br, bc = self.grid(scale)
        out = []
        for r in range(br):
            for c in range(bc):
                r0, c0 = r * m, c * n
                out.append(BlockIndex(scale.index, r, c, r0, c0,
                                      min(m, self.rows - r0), min(n, self.cols - c0)))
        return out

    def block(self, scale, row, col) -> BlockIndex:
        br, bc = self.grid(scale)
        if not (0 <= row < br and 0 <= col < bc):
            raise IndexError(f"block ({row}, {col}) outside {br}x{bc} grid of scale {scale.label()}")
        if scale.is_noise:
            return self.blocks(scale)[0]
        m, n = scale.block_rows, scale.block_cols
        r0, c0 = row * m, col * n
        return BlockIndex(scale.index, row, col, r0, c0,
                          min(m, self.rows - r0), min(n, self.cols - c0))

    def regions(self, scale):
        """Split the index set into at most four rectangles, each tiled by equal blocks.

        Yields ``(row_slice, col_slice, h, w)``; every block inside a region
        has extent ``h x w``. Used for batched per-block linear algebra.
        """
        m, n = scale.block_rows, scale.block_cols
        row_parts = _split(self.rows, m)
        col_parts = _split(self.cols, n)
        for rs, h in row_parts:
            for cs, w in col_parts:
                yield rs, cs, h, w


def _split(total, size):
    full = (total // size) * size
    parts = []
    if full:
        parts.append((slice(0, full), size))
    if full < total:
        parts.append((slice(full, total), total - full))
    return parts


def build_partition(rows, cols, mode=TWO_SIDED, min_block=(1, 1), factor=2,
                    include_noise_scale=False, axis="rows"):
    """Build a geometric multi-scale partition of a ``rows x cols`` matrix.

    Two-sided partitions grow both block dimensions by `factor` per scale
    (each clipped at the matrix size) until one block covers the matrix.
    One-sided partitions grow only the dimension named by `axis`; the other
    block dimension is always the full matrix extent, so the matching entry
    of `min_block` is ignored.
    """
    if rows < 1 or cols < 1:
        raise ValueError("matrix dimensions must be positive")
    if int(factor) != factor or factor < 2:
        raise ValueError(f"factor must be an integer >= 2, got {factor}")
    m1, n1 = (int(v) for v in min_block)
    if m1 < 1 or n1 < 1:
        raise ValueError("min_block entries must be >= 1")
    if mode == ONE_SIDED:
        if axis == "rows":
            n1 = cols
        elif axis == "cols":
            m1 = rows
        else:
            raise ValueError(f"axis must be 'rows' or 'cols', got {axis!r}")
    elif mode != TWO_SIDED:
        raise ValueError(f"unknown partition mode {mode!r}")
    if m1 > rows or n1 > cols:
        raise ValueError(f"min_block {m1}x{n1} larger than the {rows}x{cols} matrix")

    sizes = []
    m, n = m1, n1
    while True:
        sizes.append((min(m, rows), min(n, cols)))
        if m >= rows and n >= cols:
            break
        if mode == TWO_SIDED or axis == "rows":
            m *= factor
        if mode == TWO_SIDED or axis == "cols":
            n *= factor
    scales = [Scale(i + 1, a, b) for i, (a, b) in enumerate(sizes)]
    if include_noise_scale:
        scales.append(Scale(len(scales) + 1, rows * cols, 1, NOISE))
    return MultiScalePartition(rows, cols, tuple(scales), mode, axis)


def partition_from_sizes(rows, cols, sizes, include_noise_scale=False):
    """Partition with explicitly listed block sizes, e.g. ``[(1, 1), (4, 4), (64, 64)]``."""
    scales = [Scale(i + 1, int(m), int(n)) for i, (m, n) in enumerate(sizes)]
    if include_noise_scale:
        scales.append(Scale(len(scales) + 1, rows * cols, 1, NOISE))
    return MultiScalePartition(rows, cols, tuple(scales), mode="explicit")


@dataclass
class PartitionSpec:
    """Shape-independent partition description, serialisable as JSON.

    Either a geometric chain (`mode`, `min_block`, `factor`) or an explicit
    list of block `sizes`.
    """

    mode: str = TWO_SIDED
    min_block: tuple[int, int] = (1, 1)
    factor: int = 2
    include_noise_scale: bool = False
    axis: str = "rows"
    sizes: list | None = field(default=None)

    def build(self, rows, cols):
        if self.sizes is not None:
            return partition_from_sizes(rows, cols, self.sizes, self.include_noise_scale)
        return build_partition(rows, cols, self.mode, tuple(self.min_block), self.factor,
                               self.include_noise_scale, self.axis)

    def to_dict(self):
        d = asdict(self)
        d["min_block"] = list(self.min_block)
        if self.sizes is None:
            del d["sizes"]
        else:
            d["sizes"] = [list(s) for s in self.sizes]
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        known = {"mode", "min_block", "factor", "include_noise_scale", "axis", "sizes"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown partition keys: {sorted(unknown)}")
        d = dict(d)
        if "min_block" in d:
            d["min_block"] = tuple(int(v) for v in d["min_block"])
        if d.get("sizes") is not None:
            d["sizes"] = [tuple(int(v) for v in s) for s in d["sizes"]]
        return cls(**d)

    @classmethod
    def parse(cls, text):
        """Parse ``mode:MxN:factor[:noise][:cols]`` or ``sizes:1x1,4x4,64x64[:noise]``."""
        parts = text.strip().split(":")
        if parts[0] == "sizes" and len(parts) >= 2:
            sizes = [_parse_pair(tok) for tok in parts[1].split(",")]
            flags = parts[2:]
            _check_flags(flags, {"noise"}, text)
            return cls(mode="explicit", sizes=sizes, include_noise_scale="noise" in flags)
        if len(parts) < 3 or parts[0] not in (TWO_SIDED, ONE_SIDED):
            raise ValueError(f"cannot parse partition spec {text!r}")
        flags = parts[3:]
        _check_flags(flags, {"noise", "rows", "cols"}, text)
        return cls(mode=parts[0], min_block=_parse_pair(parts[1]), factor=int(parts[2]),
                   include_noise_scale="noise" in flags,
                   axis="cols" if "cols" in flags else "rows")


def _parse_pair(tok):
    m = re.fullmatch(r"\s*(\d+)x(\d+)\s*", tok)
    if not m:
        raise ValueError(f"expected block size like 4x4, got {tok!r}")
    return (int(m.group(1)), int(m.group(2)))


def _check_flags(flags, allowed, text):
    bad = [f for f in flags if f not in allowed]
    if bad:
        raise ValueError(f"unknown flags {bad} in partition spec {text!r}")


def load_partition_spec(text_or_path):
    """Accept an inline spec string or a path to a JSON partition document."""
    s = str(text_or_path)
    if s.endswith(".json"):
        with open(s) as f:
            return PartitionSpec.from_dict(json.load(f))
    return PartitionSpec.parse(s)


def extract_block(X, b: BlockIndex):
    """Copy block `b` out of `X` (the ``R_b`` operator)."""
    X = np.asarray(X)
    if b.noise:
        return X.reshape(-1, 1).copy()
    M, N = X.shape
    if b.row_start < 0 or b.col_start < 0 or b.row_start + b.height > M or b.col_start + b.width > N:
        raise IndexError(f"block {b} out of range for a {M}x{N} matrix")
    return X[b.row_start:b.row_start + b.height, b.col_start:b.col_start + b.width].copy()


def embed_block(B, b: BlockIndex, rows, cols):
    """Adjoint of :func:`extract_block`: zero matrix with `B` placed at block `b`."""
    B = np.asarray(B, dtype=np.float64)
    if B.shape != b.shape:
        raise ValueError(f"block data has shape {B.shape}, block expects {b.shape}")
    out = np.zeros((rows, cols))
    if b.noise:
        if b.height != rows * cols:
            raise ValueError("noise block does not match matrix size")
        return B.reshape(rows, cols).copy()
    if b.row_start + b.height > rows or b.col_start + b.width > cols:
        raise IndexError(f"block {b} out of range for a {rows}x{cols} matrix")
    out[b.row_start:b.row_start + b.height, b.col_start:b.col_start + b.width] = B
    return out


def cyclic_shift(X, shift):
    """Move entry ``(r, c)`` to ``((r + dr) mod M, (c + dc) mod N)``."""
    dr, dc = shift
    return np.roll(X, (int(dr), int(dc)), axis=(0, 1))


def cyclic_unshift(X, shift):
    dr, dc = shift
    return np.roll(X, (-int(dr), -int(dc)), axis=(0, 1))


def draw_shift(scale: Scale, rng: np.random.Generator):
    """Uniform cyclic offset within one block period of `scale`.

    The noise scale is shift invariant and always gets ``(0, 0)``.
    """
    if scale.is_noise:
        return (0, 0)
    return (int(rng.integers(scale.block_rows)), int(rng.integers(scale.block_cols)))
