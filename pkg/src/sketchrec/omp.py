"""Greedy rank-one matching pursuit on the two-sided sketch.

Each iteration picks the column pair (i, j) whose rank-one atom
``a_i @ b_j.T`` is most correlated with the residual, then refits all chosen
coefficients by least squares. The Gram system of selected atoms is kept as
an incrementally bordered Cholesky factor, one new row per iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DegenerateAtomError, DimensionError, SparsityError, ZeroResidualError
from .sensing import SparseSignal

PIVOT_TOL = 1e-12  # smallest acceptable Cholesky pivot before atoms count as dependent


@dataclass
class OmpState:
    """Mutable per-solve state: residual, chosen pairs, bordered Gram factor."""

    residual: np.ndarray
    selected: list[tuple[int, int]] = field(default_factory=list)
    coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gram_factor: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    rhs: np.ndarray = field(default_factory=lambda: np.zeros(0))


def factor_append(lower: np.ndarray, cross: np.ndarray, diag: float) -> np.ndarray:
    """Border a lower-triangular Cholesky factor with one new row.

    ``cross`` holds the inner products of the new atom against the ones
    already factored, ``diag`` its squared norm. Raises
    :class:`DegenerateAtomError` when the new pivot falls below ``PIVOT_TOL``.
    """
    t = lower.shape[0]
    if t:
        w = solve_triangular(lower, np.asarray(cross, dtype=float),
                             lower=True, check_finite=False)
        pivot_sq = float(diag) - float(w @ w)
    else:
        w = np.zeros(0)
        pivot_sq = float(diag)
    if pivot_sq <= PIVOT_TOL ** 2:
        raise DegenerateAtomError(
            f"new atom is numerically dependent on the {t} already selected")
    out = np.zeros((t + 1, t + 1))
    out[:t, :t] = lower
    out[t, :t] = w
    out[t, t] = math.sqrt(pivot_sq)
    return out


def factor_solve(lower: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(L @ L.T) x = rhs`` by forward and back substitution."""
    halfway = solve_triangular(lower, rhs, lower=True, check_finite=False)
    return solve_triangular(lower.T, halfway, lower=False, check_finite=False)


def select_atom(a: np.ndarray, b: np.ndarray, r: np.ndarray) -> tuple[int, int]:
    """Index pair of the atom most correlated with the residual.

    Computes the full correlation matrix ``A.T @ R @ B`` as two matrix
    products; ties break toward the smallest (i, j) in lexicographic order.
    """
    if not np.any(r):
        raise ZeroResidualError("residual is exactly zero; nothing to select")
    corr = np.abs(a.T @ r @ b)
    flat = int(np.argmax(corr))  # first max in row-major order == lexicographic
    return flat // corr.shape[1], flat % corr.shape[1]


def solve_coeffs(state: OmpState, a: np.ndarray, b: np.ndarray,
                 y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients over the selected atoms.

    Borders the Gram factor with any pairs appended to ``state.selected``
    since the last call, extends the right-hand side, and solves the normal
    equations. Mutates ``state`` (gram_factor, rhs, coeffs) and returns the
    coefficient vector.
    """
    if not state.selected:
        raise SparsityError("no atoms selected")
    while state.gram_factor.shape[0] < len(state.selected):
        t = state.gram_factor.shape[0]
        i_new, j_new = state.selected[t]
        a_new = a[:, i_new]
        b_new = b[:, j_new]
        prev_i = [i for i, _ in state.selected[:t]]
        prev_j = [j for _, j in state.selected[:t]]
        cross = (a[:, prev_i].T @ a_new) * (b[:, prev_j].T @ b_new)
        diag = float(a_new @ a_new) * float(b_new @ b_new)
        state.gram_factor = factor_append(state.gram_factor, cross, diag)
        state.rhs = np.append(state.rhs, float(a_new @ y @ b_new))
    state.coeffs = factor_solve(state.gram_factor, state.rhs)
    return state.coeffs


def update_residual(y: np.ndarray, a: np.ndarray, b: np.ndarray,
                    state: OmpState) -> np.ndarray:
    """Residual after subtracting the rank-t approximation of the selection."""
    if not state.selected:
        return np.array(y, dtype=float, copy=True)
    ii = [i for i, _ in state.selected]
    jj = [j for _, j in state.selected]
    return y - (a[:, ii] * state.coeffs) @ b[:, jj].T


def run_omp(y: np.ndarray, a: np.ndarray, b: np.ndarray, d: int, *,
            res_tol: float | None = None):
    """Greedy pursuit for ``d`` selections, with early exit on zero residual.

    ``res_tol``, when given, additionally stops once
    ``||R||_F < res_tol * ||Y||_F`` (useful for noiseless data).

    Returns the ordered list of selected pairs and the sparse estimate whose
    (i, j) entries carry the final least-squares coefficients.
    """
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[1]
    if b.shape[1] != n or y.shape != (a.shape[0], b.shape[0]):
        raise DimensionError(
            f"inconsistent shapes: Y {y.shape}, A {a.shape}, B {b.shape}")
    if not 1 <= d <= min(y.size, n * n):
        raise SparsityError(
            f"sparsity budget d={d} outside [1, {min(y.size, n * n)}]")
    y_norm = np.linalg.norm(y)
    state = OmpState(residual=y.copy())
    for _ in range(d):
        if not np.any(state.residual):
            break
        if res_tol is not None and np.linalg.norm(state.residual) < res_tol * y_norm:
            break
        state.selected.append(select_atom(a, b, state.residual))
        solve_coeffs(state, a, b, y)
        state.residual = update_residual(y, a, b, state)
    keep = state.coeffs != 0.0
    estimate = SparseSignal(n=n,
                            support=[p for p, k in zip(state.selected, keep) if k],
                            values=state.coeffs[keep])
    return list(state.selected), estimate
