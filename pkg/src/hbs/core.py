"""Hierarchical block sparse (HBS) matrix data model.

An HBS matrix is a sum of block sparse levels over one rows x cols grid.
Each level tiles the matrix exactly with its own block shape, every level's
block shape divides the previous level's shape evenly on both axes, and the
kept blocks of different levels never overlap: each matrix cell is owned by
at most one level. Cells covered by no level are zero.

This module defines the immutable structures (:class:`BlockShape`,
:class:`HBSConfig`, :class:`BlockSparseLevel`, :class:`HBSMatrix`), the
invariant checker :func:`validate`, and the basic whole-matrix views
:func:`reconstruct`, :func:`density` and :func:`support_mask`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ConfigError, DimensionError, ValidationError

# Float slack for the cumulative-density bound, which is a sum of user
# supplied fractions.
_DENSITY_SLACK = 1e-9


def as_matrix(values, *, check_finite: bool = True) -> np.ndarray:
    """Return ``values`` as a C-contiguous float32 2-D array.

    Args:
        values: Anything ``np.asarray`` accepts; must be two dimensional.
        check_finite: Reject NaN and infinity when True.

    Raises:
        DimensionError: If the input is not two dimensional.
        ValueError: If ``check_finite`` and a non-finite value is present.
    """
    arr = np.ascontiguousarray(values, dtype=np.float32)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got {arr.ndim} dimension(s)")
    if check_finite and not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains non-finite values")
    return arr


def _own(arr: np.ndarray) -> np.ndarray:
    """Return a frozen array with private storage.

    Copies unless the input is already immutable and self-owned, so neither
    the caller's array nor its flags are ever touched.
    """
    if arr.flags.writeable or arr.base is not None or not arr.flags.owndata:
        arr = arr.copy()
        arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class BlockShape:
    """Block dimensions of one sparsity level: ``bh`` rows by ``bw`` columns."""

    bh: int
    bw: int

    def __post_init__(self):
        for name in ("bh", "bw"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ConfigError(f"block {name} must be an integer, got {v!r}")
            if v < 1:
                raise ConfigError(f"block {name} must be >= 1, got {v}")
            object.__setattr__(self, name, int(v))

    @property
    def area(self) -> int:
        return self.bh * self.bw

    def divides(self, coarser: "BlockShape") -> bool:
        """True if this shape evenly divides ``coarser`` on both axes."""
        return coarser.bh % self.bh == 0 and coarser.bw % self.bw == 0

    @classmethod
    def parse(cls, text: str) -> "BlockShape":
        """Parse ``"<bh>x<bw>"``, e.g. ``"32x1"``."""
        parts = text.strip().split("x")
        if len(parts) != 2:
            raise ConfigError(f"bad block shape {text!r}, expected <bh>x<bw>")
        try:
            bh, bw = int(parts[0]), int(parts[1])
        except ValueError:
            raise ConfigError(f"bad block shape {text!r}, expected <bh>x<bw>") from None
        return cls(bh, bw)

    def __str__(self) -> str:
        return f"{self.bh}x{self.bw}"


def hierarchy_violation(index: int, coarse: BlockShape, fine: BlockShape) -> str | None:
    """Divisibility failure message between consecutive levels, or None.

    ``index`` is the 0-based position of the coarser level; messages use
    1-based level numbers. The same wording is used by config construction
    and by :func:`validate` so both surfaces report identically.
    """
    if fine.divides(coarse):
        return None
    if coarse.bh % fine.bh != 0:
        axis, a, b = "rows", coarse.bh, fine.bh
    else:
        axis, a, b = "cols", coarse.bw, fine.bw
    return (
        f"level {index + 2} block {fine} does not evenly divide "
        f"level {index + 1} block {coarse} ({a} % {b} != 0 on {axis})"
    )


@dataclass(frozen=True)
class LevelSpec:
    """One step of a pruning plan: prune ``sparsity`` of the full grid at ``shape``.

    The sparsity is the fraction of the whole matrix's grid blocks pruned at
    this level, not a fraction of whatever the previous levels left behind.
    """

    shape: BlockShape
    sparsity: float

    def __post_init__(self):
        sp = float(self.sparsity)
        if not np.isfinite(sp) or sp < 0.0 or sp > 1.0:
            hint = ""
            if np.isfinite(sp) and sp > 1.0:
                hint = " (sparsities are fractions in [0, 1], not percentages)"
            raise ConfigError(f"sparsity must be in [0, 1], got {self.sparsity!r}{hint}")
        object.__setattr__(self, "sparsity", sp)

    @property
    def density(self) -> float:
        return 1.0 - self.sparsity

    def __str__(self) -> str:
        return f"{self.shape}:{self.sparsity:g}"


@dataclass(frozen=True)
class HBSConfig:
    """Ordered pruning plan: one (block shape, sparsity) pair per level.

    Invariants, enforced at construction:
      * at least one level;
      * each level's shape divides the previous level's shape evenly;
      * the cumulative density ``sum(1 - sparsity_k)`` does not exceed 1.
    """

    levels: tuple[LevelSpec, ...]

    def __post_init__(self):
        levels = tuple(self.levels)
        if not levels:
            raise ConfigError("config needs at least one level")
        for lv in levels:
            if not isinstance(lv, LevelSpec):
                raise ConfigError(f"expected LevelSpec, got {type(lv).__name__}")
        for i in range(len(levels) - 1):
            msg = hierarchy_violation(i, levels[i].shape, levels[i + 1].shape)
            if msg is not None:
                raise ConfigError(msg)
        total = sum(lv.density for lv in levels)
        if total > 1.0 + _DENSITY_SLACK:
            raise ConfigError(
                f"cumulative density {total:g} exceeds 1 (level densities "
                f"{[lv.density for lv in levels]})"
            )
        object.__setattr__(self, "levels", levels)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def cumulative_density(self) -> float:
        return sum(lv.density for lv in self.levels)

    @classmethod
    def of(cls, *pairs: tuple) -> "HBSConfig":
        """Build from ``(bh, bw, sparsity)`` or ``(BlockShape, sparsity)`` tuples."""
        levels = []
        for p in pairs:
            if len(p) == 3:
                levels.append(LevelSpec(BlockShape(p[0], p[1]), p[2]))
            else:
                levels.append(LevelSpec(p[0], p[1]))
        return cls(tuple(levels))

    @classmethod
    def parse(cls, text: str) -> "HBSConfig":
        """Parse a comma list of ``<bh>x<bw>:<sparsity>`` entries.

        Example: ``"32x1:0.75,16x1:0.875,1x1:0.96875"``.
        """
        entries = [e for e in text.split(",") if e.strip()]
        if not entries:
            raise ConfigError(f"empty level spec {text!r}")
        levels = []
        for entry in entries:
            head, sep, tail = entry.strip().partition(":")
            if not sep:
                raise ConfigError(f"bad level spec {entry!r}, expected <bh>x<bw>:<sparsity>")
            shape = BlockShape.parse(head)
            try:
                sparsity = float(tail)
            except ValueError:
                raise ConfigError(f"bad sparsity {tail!r} in level spec {entry!r}") from None
            levels.append(LevelSpec(shape, sparsity))
        return cls(tuple(levels))

    def __str__(self) -> str:
        return ",".join(str(lv) for lv in self.levels)


def grid_dims(rows: int, cols: int, shape: BlockShape) -> tuple[int, int]:
    """Grid dimensions of a rows x cols matrix tiled by ``shape``.

    Raises:
        DimensionError: Naming the offending axis when a dimension is not
            divisible by the block dimension.
    """
    if rows % shape.bh != 0:
        raise DimensionError(f"rows ({rows}) not divisible by block height {shape.bh}")
    if cols % shape.bw != 0:
        raise DimensionError(f"cols ({cols}) not divisible by block width {shape.bw}")
    return rows // shape.bh, cols // shape.bw


@dataclass(frozen=True)
class BlockSparseLevel:
    """Kept blocks of one shape on a grid, with their dense tile values.

    Storage is struct-of-arrays: ``block_rows[i], block_cols[i]`` give the
    grid coordinates of kept block ``i`` and ``values[i]`` its ``bh x bw``
    float32 tile. Blocks are expected in strictly ascending row-major grid
    order (``gr * grid_cols + gc``); :func:`validate` reports violations.
    All arrays are frozen after construction.
    """

    shape: BlockShape
    grid_rows: int
    grid_cols: int
    block_rows: np.ndarray
    block_cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise ValueError("grid dimensions must be positive")
        object.__setattr__(self, "grid_rows", int(self.grid_rows))
        object.__setattr__(self, "grid_cols", int(self.grid_cols))
        br = np.ascontiguousarray(self.block_rows, dtype=np.int64)
        bc = np.ascontiguousarray(self.block_cols, dtype=np.int64)
        vals = np.ascontiguousarray(self.values, dtype=np.float32)
        if br.ndim != 1 or bc.ndim != 1 or br.shape != bc.shape:
            raise ValueError("block_rows and block_cols must be 1-D and equal length")
        expected = (br.shape[0], self.shape.bh, self.shape.bw)
        if vals.shape != expected:
            raise ValueError(f"values shape {vals.shape} != {expected}")
        object.__setattr__(self, "block_rows", _own(br))
        object.__setattr__(self, "block_cols", _own(bc))
        object.__setattr__(self, "values", _own(vals))

    @property
    def n_blocks(self) -> int:
        return self.block_rows.shape[0]

    @property
    def rows(self) -> int:
        return self.grid_rows * self.shape.bh

    @property
    def cols(self) -> int:
        return self.grid_cols * self.shape.bw

    def flat_indices(self) -> np.ndarray:
        """Row-major grid index of each kept block."""
        return self.block_rows * self.grid_cols + self.block_cols

    def iter_blocks(self) -> Iterator[tuple[int, int, np.ndarray]]:
        for i in range(self.n_blocks):
            yield int(self.block_rows[i]), int(self.block_cols[i]), self.values[i]

    @classmethod
    def empty(cls, shape: BlockShape, grid_rows: int, grid_cols: int) -> "BlockSparseLevel":
        return cls(
            shape,
            grid_rows,
            grid_cols,
            np.zeros(0, np.int64),
            np.zeros(0, np.int64),
            np.zeros((0, shape.bh, shape.bw), np.float32),
        )


@dataclass(frozen=True)
class HBSMatrix:
    """A rows x cols matrix expressed as an ordered sum of block sparse levels."""

    rows: int
    cols: int
    levels: tuple[BlockSparseLevel, ...]

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("matrix dimensions must be positive")
        object.__setattr__(self, "rows", int(self.rows))
        object.__setattr__(self, "cols", int(self.cols))
        object.__setattr__(self, "levels", tuple(self.levels))

    @property
    def n_levels(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one invariant family: name, pass/fail, failure detail."""

    name: str
    passed: bool
    detail: str | None = None


@dataclass(frozen=True)
class ValidationReport:
    """Per-invariant results for one HBS matrix. Never raised, only reported."""

    checks: tuple[CheckResult, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def first_failure(self) -> CheckResult | None:
        for c in self.checks:
            if not c.passed:
                return c
        return None

    def render(self) -> str:
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            line = f"{c.name:13s} {status}"
            if not c.passed and c.detail:
                line += f"  ({c.detail})"
            lines.append(line)
        return "\n".join(lines)


def _check_tiling(m: HBSMatrix) -> CheckResult:
    for i, lv in enumerate(m.levels):
        if lv.rows != m.rows or lv.cols != m.cols:
            detail = (
                f"level {i + 1}: {lv.grid_rows}x{lv.grid_cols} grid of {lv.shape} "
                f"blocks covers {lv.rows}x{lv.cols}, matrix is {m.rows}x{m.cols}"
            )
            return CheckResult("tiling", False, detail)
    return CheckResult("tiling", True)


def _check_divisibility(m: HBSMatrix) -> CheckResult:
    for i in range(len(m.levels) - 1):
        msg = hierarchy_violation(i, m.levels[i].shape, m.levels[i + 1].shape)
        if msg is not None:
            return CheckResult("divisibility", False, msg)
    return CheckResult("divisibility", True)


def _check_blocks(m: HBSMatrix) -> CheckResult:
    for i, lv in enumerate(m.levels):
        if lv.n_blocks == 0:
            continue
        br, bc = lv.block_rows, lv.block_cols
        bad = (br < 0) | (br >= lv.grid_rows) | (bc < 0) | (bc >= lv.grid_cols)
        if bad.any():
            j = int(np.argmax(bad))
            detail = (
                f"level {i + 1}: block ({br[j]},{bc[j]}) outside "
                f"{lv.grid_rows}x{lv.grid_cols} grid"
            )
            return CheckResult("blocks", False, detail)
        flat = lv.flat_indices()
        order = np.diff(flat)
        if (order <= 0).any():
            j = int(np.argmax(order <= 0)) + 1
            detail = (
                f"level {i + 1}: blocks unsorted or duplicated at ({br[j]},{bc[j]})"
            )
            return CheckResult("blocks", False, detail)
    return CheckResult("blocks", True)


def _level_mask(lv: BlockSparseLevel) -> np.ndarray:
    """Boolean rows x cols mask of the cells covered by a level's kept blocks."""
    mask = np.zeros((lv.rows, lv.cols), dtype=bool)
    if lv.n_blocks:
        view = mask.reshape(lv.grid_rows, lv.shape.bh, lv.grid_cols, lv.shape.bw)
        view[lv.block_rows, :, lv.block_cols, :] = True
    return mask


def _check_disjointness(m: HBSMatrix, structure_ok: bool) -> CheckResult:
    if not structure_ok:
        return CheckResult(
            "disjointness", False, "not evaluated: requires valid tiling and block indices"
        )
    counts = np.zeros((m.rows, m.cols), dtype=np.uint16)
    for lv in m.levels:
        counts += _level_mask(lv)
    if (counts > 1).any():
        r, c = (int(x) for x in np.argwhere(counts > 1)[0])
        owners = [
            str(i + 1)
            for i, lv in enumerate(m.levels)
            if lv.n_blocks and _level_mask(lv)[r, c]
        ]
        detail = f"cell ({r},{c}) covered by levels {', '.join(owners)}"
        return CheckResult("disjointness", False, detail)
    return CheckResult("disjointness", True)


def validate(m: HBSMatrix) -> ValidationReport:
    """Check all invariant families of an HBS matrix; report, never raise.

    Families, in order: exact tiling of every level, hierarchical
    divisibility of consecutive block shapes, per-level block index
    sanity (in bounds, strictly sorted, no duplicates), and cross-level
    support disjointness. Each failure names the first offending
    coordinate.
    """
    tiling = _check_tiling(m)
    divisibility = _check_divisibility(m)
    blocks = _check_blocks(m)
    disjointness = _check_disjointness(m, tiling.passed and blocks.passed)
    return ValidationReport((tiling, divisibility, blocks, disjointness))


def ensure_valid(m: HBSMatrix) -> None:
    """Run :func:`validate` and raise on the first violated invariant."""
    report = validate(m)
    if not report.ok:
        raise ValidationError(report)


def reconstruct(m: HBSMatrix) -> np.ndarray:
    """Dense float32 sum of all levels; uncovered cells are exactly 0.0.

    Because level supports are disjoint, each covered cell carries its
    level's stored tile value bit for bit.

    Raises:
        ValidationError: If ``m`` fails :func:`validate`; the message names
            the first violated invariant.
    """
    ensure_valid(m)
    out = np.zeros((m.rows, m.cols), dtype=np.float32)
    for lv in m.levels:
        if lv.n_blocks == 0:
            continue
        view = out.reshape(lv.grid_rows, lv.shape.bh, lv.grid_cols, lv.shape.bw)
        view[lv.block_rows, :, lv.block_cols, :] = lv.values
    return out


def density(m: HBSMatrix) -> float:
    """Fraction of cells covered by kept blocks (covered cells, not nonzeros).

    Exact: integer covered-cell count divided in double precision.
    """
    covered = sum(lv.n_blocks * lv.shape.area for lv in m.levels)
    return covered / (m.rows * m.cols)


def support_mask(m: HBSMatrix) -> np.ndarray:
    """Boolean rows x cols mask of cells covered by any level."""
    mask = np.zeros((m.rows, m.cols), dtype=bool)
    for lv in m.levels:
        if lv.n_blocks == 0:
            continue
        view = mask.reshape(lv.grid_rows, lv.shape.bh, lv.grid_cols, lv.shape.bw)
        view[lv.block_rows, :, lv.block_cols, :] = True
    return mask
