"""Explicit-Kronecker vector-form reference solvers.

These form the full ``B kron A`` measurement matrix and run the classic
vector algorithms on it. They exist as correctness oracles and runtime
baselines for the matrix-form solvers, so they are deliberately limited to
desk scale by a memory cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DimensionError, DivergenceError, SparsityError
from .fista import FistaConfig, lipschitz, soft_threshold
from .omp import factor_append, factor_solve

MEMORY_CAP = 200_000_000  # refuse explicit Kronecker matrices above this entry count


def kron(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Standard Kronecker product: block (p, q) equals ``left[p, q] * right``."""
    left = np.atleast_2d(np.asarray(left, dtype=float))
    right = np.atleast_2d(np.asarray(right, dtype=float))
    if left.size == 0 or right.size == 0:
        raise DimensionError("kron requires nonempty inputs")
    entries = left.size * right.size
    if entries > MEMORY_CAP:
        raise CapacityError(
            f"explicit Kronecker product would hold {entries} entries "
            f"(cap {MEMORY_CAP})")
    return np.kron(left, right)


def vectorize(x: np.ndarray) -> np.ndarray:
    """Stack the columns of ``x`` into one vector."""
    return np.asarray(x, dtype=float).flatten(order="F")


def devectorize(x: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vectorize` for the given shape."""
    x = np.asarray(x, dtype=float)
    if x.size != rows * cols:
        raise DimensionError(
            f"cannot reshape length-{x.size} vector to {rows}x{cols}")
    return x.reshape((rows, cols), order="F")


@dataclass
class VectorizedSystem:
    """Vector form of the two-sided sketch: ``y = (B kron A) x``.

    Keeps the originating pair (a, b) so step sizes derived from them match
    the matrix-form solver bit for bit.
    """

    y: np.ndarray
    c: np.ndarray
    n: int
    a: np.ndarray
    b: np.ndarray


def build_system(y: np.ndarray, a: np.ndarray, b: np.ndarray) -> VectorizedSystem:
    """Form the explicit vectorized system for an observation and matrix pair."""
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[1]
    if b.shape[1] != n or y.shape != (a.shape[0], b.shape[0]):
        raise DimensionError(
            f"inconsistent shapes: Y {y.shape}, A {a.shape}, B {b.shape}")
    return VectorizedSystem(y=vectorize(y), c=kron(b, a), n=n, a=a, b=b)


def run_fista_vector(system: VectorizedSystem, config: FistaConfig, *,
                     lip: float | None = None, iterate_hook=None):
    """Classic vector-input accelerated shrinkage on the explicit system.

    Initialization, schedule, and stopping mirror the matrix solver exactly;
    returns ``(x_hat, iters_used, history)`` with the vectorized estimate.
    """
    if lip is None:
        lip = lipschitz(system.a, system.b)
    c = system.c
    y = system.y
    x_curr = np.zeros(system.n * system.n)
    x_prev = np.zeros_like(x_curr)
    t_curr = t_prev = 1.0
    lam = config.lambda_init
    history: list[float] = []
    iters = 0
    for k in range(1, config.max_iters + 1):
        accel = (t_prev - 1.0) / t_curr
        z = x_curr + accel * (x_curr - x_prev)
        u = z - (c.T @ (c @ z - y)) / lip
        x_next = soft_threshold(u, lam / lip)
        if not np.all(np.isfinite(x_next)):
            raise DivergenceError(f"nonfinite iterate at iteration {k}", iteration=k)
        t_prev, t_curr = t_curr, 0.5 * (1.0 + math.sqrt(4.0 * t_curr ** 2 + 1.0))
        lam = max(config.beta * lam, config.lambda_bar)
        iters += 1
        resid = y - c @ x_next
        history.append(0.5 * float(resid @ resid)
                       + config.lambda_bar * float(np.sum(np.abs(x_next))))
        if iterate_hook is not None:
            iterate_hook(x_next)
        if config.rel_tol > 0.0:
            change = np.linalg.norm(x_next - x_curr) / max(1.0, np.linalg.norm(x_curr))
            x_prev, x_curr = x_curr, x_next
            if change < config.rel_tol:
                break
        else:
            x_prev, x_curr = x_curr, x_next
    return x_curr, iters, history


def column_to_pair(col: int, n: int) -> tuple[int, int]:
    """Map a vectorized column index to its (i, j) pair: col == j * n + i."""
    return col % n, col // n


def run_omp_vector(system: VectorizedSystem, d: int, *,
                   res_tol: float | None = None):
    """Textbook greedy pursuit on the explicit system.

    Uses the same bordered Gram factor as the matrix pursuit for the
    least-squares refit and breaks correlation ties toward the smallest
    (i, j) pair under the column-to-pair map. ``d == 0`` is allowed and
    returns an empty selection.

    Returns ``(columns, coeffs)`` in selection order.
    """
    n = system.n
    if not 0 <= d <= min(system.y.size, n * n):
        raise SparsityError(
            f"sparsity budget d={d} outside [0, {min(system.y.size, n * n)}]")
    c = system.c
    y = system.y
    cols: list[int] = []
    coeffs = np.zeros(0)
    lower = np.zeros((0, 0))
    rhs = np.zeros(0)
    resid = y.copy()
    y_norm = np.linalg.norm(y)
    for _ in range(d):
        if not np.any(resid):
            break
        if res_tol is not None and np.linalg.norm(resid) < res_tol * y_norm:
            break
        corr = np.abs(c.T @ resid)
        ties = np.flatnonzero(corr == corr.max())
        col = int(min(ties, key=lambda idx: column_to_pair(int(idx), n)))
        cross = c[:, cols].T @ c[:, col]
        diag = float(c[:, col] @ c[:, col])
        lower = factor_append(lower, cross, diag)
        rhs = np.append(rhs, float(c[:, col] @ y))
        cols.append(col)
        coeffs = factor_solve(lower, rhs)
        resid = y - c[:, cols] @ coeffs
    return cols, coeffs
