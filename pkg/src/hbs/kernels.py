"""Dense and block sparse matmul kernels, plus exact FLOP accounting.

The dense kernel is the correctness oracle for the sparse ones. All kernels
share one accumulation contract: double precision accumulators with a fixed
traversal order (ascending inner index for dense, stored block order for
sparse), rounded to float32 once at the end. That keeps results bit-stable
across runs and makes oracle comparisons meaningful at tight tolerances.

FLOP counts follow the multiply-add-times-two convention.
"""

from __future__ import annotations

import numpy as np

from .core import BlockSparseLevel, HBSMatrix, ensure_valid
from .errors import DimensionError


def _as_f32(x, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.float32)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got {arr.ndim} dimension(s)")
    return arr


def dense_matmul(a, b) -> np.ndarray:
    """Reference dense product a @ b.

    Accumulates each output cell over ascending k in double precision and
    rounds to float32 at the end.
    """
    a = _as_f32(a, "a")
    b = _as_f32(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"inner dimensions differ: a is {a.shape}, b is {b.shape}")
    a64 = a.astype(np.float64)
    b64 = b.astype(np.float64)
    acc = np.zeros((a.shape[0], b.shape[1]), dtype=np.float64)
    for k in range(a.shape[1]):
        acc += a64[:, k, None] * b64[k]
    return acc.astype(np.float32)


def _apply_level(level: BlockSparseLevel, b64: np.ndarray, out64: np.ndarray) -> None:
    """Add one level's product into a double-precision accumulator.

    Kept blocks are visited in stored (sorted) order and a block's source
    columns in ascending order, so contributions to any output row arrive
    in ascending source-column order.
    """
    bh, bw = level.shape.bh, level.shape.bw
    vals64 = level.values.astype(np.float64)
    for i in range(level.n_blocks):
        r0 = int(level.block_rows[i]) * bh
        c0 = int(level.block_cols[i]) * bw
        block = vals64[i]
        for j in range(bw):
            out64[r0 : r0 + bh] += block[:, j, None] * b64[c0 + j]


def level_matmul_acc(level: BlockSparseLevel, b, acc) -> np.ndarray:
    """Return acc + (level as dense) @ b, without mutating acc.

    Accumulation is double precision in the fixed order of
    :func:`_apply_level`, rounded to float32 at the end.
    """
    b = _as_f32(b, "b")
    acc = _as_f32(acc, "acc")
    if level.cols != b.shape[0]:
        raise DimensionError(
            f"level is {level.rows}x{level.cols}, b is {b.shape[0]}x{b.shape[1]}"
        )
    if acc.shape != (level.rows, b.shape[1]):
        raise DimensionError(
            f"acc shape {acc.shape} != ({level.rows}, {b.shape[1]})"
        )
    out = acc.astype(np.float64)
    _apply_level(level, b.astype(np.float64), out)
    return out.astype(np.float32)


def hbs_matmul(m: HBSMatrix, b) -> np.ndarray:
    """Multiply an HBS matrix by a dense matrix, level by level.

    Levels are applied in stored order into one shared double-precision
    accumulator, rounded to float32 once at the end. A single rounding
    keeps the result within one float32 ulp of the dense product of the
    reconstruction even when level contributions cancel.

    Raises:
        ValidationError: If ``m`` fails validation.
        DimensionError: On inner-dimension mismatch.
    """
    ensure_valid(m)
    b = _as_f32(b, "b")
    if m.cols != b.shape[0]:
        raise DimensionError(f"matrix is {m.rows}x{m.cols}, b is {b.shape[0]}x{b.shape[1]}")
    b64 = b.astype(np.float64)
    out64 = np.zeros((m.rows, b.shape[1]), dtype=np.float64)
    for level in m.levels:
        _apply_level(level, b64, out64)
    return out64.astype(np.float32)


def max_rel_error(got, want) -> float:
    """Largest per-cell relative difference between two matrices.

    Each cell's difference is scaled by the larger magnitude of the two
    values, floored at 1e-30 so all-zero cells compare equal instead of
    dividing by zero.

    Raises:
        DimensionError: If the shapes differ.
    """
    g = _as_f32(got, "got").astype(np.float64)
    w = _as_f32(want, "want").astype(np.float64)
    if g.shape != w.shape:
        raise DimensionError(f"shape mismatch: {g.shape} vs {w.shape}")
    scale = np.maximum(np.maximum(np.abs(g), np.abs(w)), 1e-30)
    return float(np.max(np.abs(g - w) / scale))


def flops_dense(m_rows: int, k: int, n: int) -> int:
    """FLOPs of a dense (m x k) @ (k x n) product: 2*m*k*n."""
    if min(m_rows, k, n) < 0:
        raise ValueError("dimensions must be non-negative")
    return 2 * m_rows * k * n


def flops_sparse_level(level: BlockSparseLevel, n: int) -> int:
    """FLOPs of one level's product against n output columns."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return 2 * level.n_blocks * level.shape.area * n


def flops_sparse(m: HBSMatrix, n: int) -> int:
    """Total FLOPs across all levels (additive)."""
    return sum(flops_sparse_level(level, n) for level in m.levels)
