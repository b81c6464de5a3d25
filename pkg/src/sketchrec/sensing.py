"""Measurement ensembles, sparse ground-truth signals, and the two-sided sketch.

All generators take an explicit ``numpy.random.Generator`` and are pure given
that handle, so callers can split streams per trial and reproduce any draw
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.fft import dct

from .errors import ConfigError, DimensionError, SparsityError

# magnitude window for generated nonzero values
VALUE_LOW = 200.0
VALUE_HIGH = 250.0


class EnsembleKind(str, Enum):
    """Supported measurement-matrix ensembles."""

    GAUSSIAN = "gaussian"  # i.i.d. normal draw, rows orthonormalized
    DCT = "dct"            # distinct random rows of the orthonormal DCT-II matrix
    BINARY = "binary"      # i.i.d. entries, 0 or 1/cols with equal probability
    IDENTITY = "identity"  # square identity; debugging only


@dataclass
class SparseSignal:
    """Square sparse matrix stored as explicit support pairs plus values.

    ``support[m] = (i, j)`` places ``values[m]`` at row ``i``, column ``j`` of
    the dense ``n``-by-``n`` matrix; the pair order is meaningful (generators
    emit column-major sorted supports, greedy solvers emit selection order).
    """

    n: int
    support: list[tuple[int, int]]
    values: np.ndarray

    def __post_init__(self):
        self.support = [(int(i), int(j)) for i, j in self.support]
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or len(self.support) != self.values.size:
            raise DimensionError("support and values must have equal length")
        if len(set(self.support)) != len(self.support):
            raise SparsityError("support pairs must be distinct")
        for i, j in self.support:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise SparsityError(f"support pair ({i}, {j}) outside [0, {self.n})^2")

    @classmethod
    def from_dense(cls, x: np.ndarray) -> "SparseSignal":
        """Collect the nonzero entries of a square matrix."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {x.shape}")
        rows, cols = np.nonzero(x)
        support = list(zip(rows.tolist(), cols.tolist()))
        return cls(n=x.shape[0], support=support, values=x[rows, cols])

    @property
    def support_set(self) -> set[tuple[int, int]]:
        return set(self.support)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for (i, j), v in zip(self.support, self.values):
            out[i, j] = v
        return out


def _check_dims(rows: int, cols: int) -> None:
    if rows < 1 or cols < 1:
        raise DimensionError(f"dimensions must be positive, got {rows}x{cols}")


def gen_gaussian(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Random matrix with orthonormal rows spanning an i.i.d. normal draw.

    Makes one ``standard_normal((rows, cols))`` draw from ``rng`` and
    orthonormalizes its rows via a QR factorization of the transpose, so the
    row space is exactly that of the raw draw and ``G @ G.T == I``.
    """
    _check_dims(rows, cols)
    if rows > cols:
        raise DimensionError(
            f"cannot orthonormalize {rows} rows of length {cols}")
    draw = rng.standard_normal((rows, cols))
    q, _ = np.linalg.qr(draw.T)
    return np.ascontiguousarray(q.T)


def gen_dct_rows(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Distinct rows of the cols-by-cols orthonormal DCT-II matrix, chosen uniformly."""
    _check_dims(rows, cols)
    if rows > cols:
        raise DimensionError(
            f"cannot choose {rows} distinct rows from a {cols}x{cols} transform")
    table = dct(np.eye(cols), type=2, norm="ortho", axis=0)
    picks = rng.choice(cols, size=rows, replace=False)
    return np.ascontiguousarray(table[picks])


def gen_binary(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Entries drawn i.i.d. from {0, 1/cols} with equal probability."""
    _check_dims(rows, cols)
    return np.where(rng.random((rows, cols)) < 0.5, 1.0 / cols, 0.0)


def make_ensemble(kind: EnsembleKind | str, rows: int, cols: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Dispatch to the generator for ``kind``."""
    kind = EnsembleKind(kind)
    if kind is EnsembleKind.GAUSSIAN:
        return gen_gaussian(rows, cols, rng)
    if kind is EnsembleKind.DCT:
        return gen_dct_rows(rows, cols, rng)
    if kind is EnsembleKind.BINARY:
        return gen_binary(rows, cols, rng)
    if rows != cols:
        raise DimensionError(f"identity ensemble requires rows == cols, got {rows}x{cols}")
    return np.eye(rows)


def gen_sparse_signal(n: int, k: int, rng: np.random.Generator) -> SparseSignal:
    """Signal with exactly ``k`` nonzeros per column at uniform locations.

    Each value gets a fair random sign and a magnitude uniform on
    [200, 250]. Column supports are drawn without replacement; the support
    list is ordered column by column with rows ascending.
    """
    if n < 1:
        raise SparsityError(f"signal dimension must be positive, got {n}")
    if not 1 <= k <= n:
        raise SparsityError(f"column sparsity k={k} outside [1, {n}]")
    support: list[tuple[int, int]] = []
    values = []
    for j in range(n):
        locs = np.sort(rng.choice(n, size=k, replace=False))
        signs = np.where(rng.random(k) < 0.5, -1.0, 1.0)
        mags = rng.uniform(VALUE_LOW, VALUE_HIGH, size=k)
        support.extend((int(i), j) for i in locs)
        values.append(signs * mags)
    return SparseSignal(n=n, support=support, values=np.concatenate(values))


def apply_model(a: np.ndarray, x: np.ndarray, b: np.ndarray, sigma_v: float = 0.0,
                rng: np.random.Generator | None = None) -> np.ndarray:
    """Two-sided sketch ``A @ X @ B.T`` plus i.i.d. Normal(0, sigma_v**2) noise.

    ``sigma_v == 0`` returns the exact noiseless sketch and needs no ``rng``.
    """
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or x.ndim != 2 or b.ndim != 2:
        raise DimensionError("apply_model expects three 2-d arrays")
    n = a.shape[1]
    if x.shape != (n, n) or b.shape[1] != n:
        raise DimensionError(
            f"inconsistent shapes: A {a.shape}, X {x.shape}, B {b.shape}")
    if sigma_v < 0:
        raise ConfigError(f"sigma_v must be nonnegative, got {sigma_v}")
    y = a @ x @ b.T
    if sigma_v > 0:
        if rng is None:
            raise ConfigError("rng is required when sigma_v > 0")
        y = y + sigma_v * rng.standard_normal(y.shape)
    return y


def save_matrix_csv(mat: np.ndarray, path) -> None:
    """Write a matrix as bare CSV: one row per line, '.'-decimal, no header.

    Values are written with shortest round-trip precision; debugging format,
    not a performance path.
    """
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    with open(path, "w", newline="\n") as fh:
        for row in mat:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    """Read a matrix written by :func:`save_matrix_csv`.

    Raises :class:`ConfigError` naming the file and 1-based line number on
    malformed input.
    """
    rows: list[list[float]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                parsed = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise ConfigError(f"{path}: line {lineno}: {exc}") from exc
            if rows and len(parsed) != len(rows[0]):
                raise ConfigError(
                    f"{path}: line {lineno}: expected {len(rows[0])} columns, "
                    f"got {len(parsed)}")
            rows.append(parsed)
    if not rows:
        raise ConfigError(f"{path}: empty matrix file")
    return np.array(rows, dtype=float)
