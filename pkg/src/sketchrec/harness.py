"""Seeded recovery sweeps, metrics, runtime benchmarks, and result persistence.

A sweep runs independent trials per (M, L) grid point, each with its own RNG
stream derived from the base seed and the (point, trial) indices, so results
are reproducible and trials can run in parallel without reseeding races.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import fista, kron_oracle, omp
from .errors import (CapacityError, ConfigError, DimensionError, MetricError,
                     SolverFailure)
from .fista import FistaConfig
from .sensing import (EnsembleKind, SparseSignal, apply_model, gen_sparse_signal,
                      make_ensemble)


class Solver(str, Enum):
    """Recovery algorithms a sweep can drive."""

    FISTA_MATRIX = "fista_matrix"
    FISTA_VECTOR = "fista_vector"
    OMP_MATRIX = "omp_matrix"
    OMP_VECTOR = "omp_vector"


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one sweep.

    ``l_values=None`` locks L = M (a diagonal sweep over ``m_values``);
    otherwise every (M, L) combination is run. ``solver_params`` is a
    :class:`FistaConfig` for the shrinkage solvers, an integer sparsity
    budget for the pursuit solvers, or ``None`` for data-driven defaults
    (pursuit then uses the true count ``k * n``). Wall time is recorded in
    the result rows only when ``measure_time`` is set, so that identical
    configurations produce identical rows.
    """

    n: int
    m_values: tuple[int, ...]
    k: int
    solver: Solver
    l_values: tuple[int, ...] | None = None
    sigma_v2: float = 0.0
    trials: int = 1
    ensemble_a: EnsembleKind = EnsembleKind.GAUSSIAN
    ensemble_b: EnsembleKind = EnsembleKind.GAUSSIAN
    solver_params: FistaConfig | int | None = None
    seed: int = 0
    measure_time: bool = False

    def __post_init__(self):
        object.__setattr__(self, "m_values", tuple(int(m) for m in self.m_values))
        if self.l_values is not None:
            object.__setattr__(self, "l_values", tuple(int(l) for l in self.l_values))
        object.__setattr__(self, "solver", Solver(self.solver))
        object.__setattr__(self, "ensemble_a", EnsembleKind(self.ensemble_a))
        object.__setattr__(self, "ensemble_b", EnsembleKind(self.ensemble_b))
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.sigma_v2 < 0:
            raise ConfigError(f"sigma_v2 must be nonnegative, got {self.sigma_v2}")
        if not 1 <= self.k <= self.n:
            raise ConfigError(f"column sparsity k={self.k} outside [1, {self.n}]")
        for m in self.m_values:
            if not 1 <= m <= self.n:
                raise ConfigError(f"M={m} outside [1, N={self.n}]")
        for l in self.l_values or ():
            if not 1 <= l <= self.n:
                raise ConfigError(f"L={l} outside [1, N={self.n}]")

    def points(self) -> list[tuple[int, int]]:
        """Grid of (M, L) pairs this sweep visits, in order."""
        if self.l_values is None:
            return [(m, m) for m in self.m_values]
        return [(m, l) for m in self.m_values for l in self.l_values]


@dataclass
class ResultRow:
    """One aggregated measurement line; field order matches the CSV columns."""

    n: int
    m: int
    l: int
    k: int
    sigma_v2: float
    ensemble_a: str
    ensemble_b: str
    solver: str
    trials: int
    failures: int
    mean_nre: float
    mean_support_frac: float
    mean_runtime_s: float
    seed: int


CSV_FIELDS = ("n", "m", "l", "k", "sigma_v2", "ensemble_a", "ensemble_b",
              "solver", "trials", "failures", "mean_nre", "mean_support_frac",
              "mean_runtime_s", "seed")


def normalized_error(x_true: np.ndarray, x_hat: np.ndarray) -> float:
    """Frobenius error of the estimate relative to the reference norm."""
    x_true = np.asarray(x_true, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x_true.shape != x_hat.shape:
        raise DimensionError(
            f"shape mismatch: truth {x_true.shape}, estimate {x_hat.shape}")
    denom = np.linalg.norm(x_true)
    if denom == 0:
        raise MetricError("normalized error undefined for a zero reference")
    return float(np.linalg.norm(x_true - x_hat) / denom)


def support_fraction(truth: SparseSignal, estimate: SparseSignal) -> float:
    """Fraction of the true nonzero locations present in the estimate."""
    if truth.n != estimate.n:
        raise DimensionError(
            f"dimension mismatch: truth n={truth.n}, estimate n={estimate.n}")
    if not truth.support:
        raise MetricError("support fraction undefined for an empty true support")
    return len(truth.support_set & estimate.support_set) / len(truth.support)


def trial_rng(seed: int, point_index: int, trial_index: int) -> np.random.Generator:
    """Independent stream for one trial, stable across platforms and runs."""
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(point_index, trial_index)))


def _pursuit_budget(config: ExperimentConfig) -> int:
    if isinstance(config.solver_params, (int, np.integer)):
        return int(config.solver_params)
    return config.k * config.n


def _solve_trial(config: ExperimentConfig, m: int, l: int, point_index: int,
                 trial_index: int) -> tuple[float, float, float]:
    """One seeded draw-and-recover; returns (nre, support fraction, seconds).

    The trial stream is consumed in a fixed order: A, then B, then the
    signal, then the noise.
    """
    rng = trial_rng(config.seed, point_index, trial_index)
    a = make_ensemble(config.ensemble_a, m, config.n, rng)
    b = make_ensemble(config.ensemble_b, l, config.n, rng)
    signal = gen_sparse_signal(config.n, config.k, rng)
    x_true = signal.to_dense()
    y = apply_model(a, x_true, b, math.sqrt(config.sigma_v2), rng)

    start = time.perf_counter()
    if config.solver is Solver.FISTA_MATRIX:
        cfg = config.solver_params or fista.default_config(y, a, b)
        x_hat, _, _ = fista.run_fista(y, a, b, cfg)
        est_signal = SparseSignal.from_dense(x_hat)
    elif config.solver is Solver.FISTA_VECTOR:
        cfg = config.solver_params or fista.default_config(y, a, b)
        system = kron_oracle.build_system(y, a, b)
        x_vec, _, _ = kron_oracle.run_fista_vector(system, cfg)
        x_hat = kron_oracle.devectorize(x_vec, config.n, config.n)
        est_signal = SparseSignal.from_dense(x_hat)
    elif config.solver is Solver.OMP_MATRIX:
        _, est_signal = omp.run_omp(y, a, b, _pursuit_budget(config))
        x_hat = est_signal.to_dense()
    else:
        system = kron_oracle.build_system(y, a, b)
        cols, coeffs = kron_oracle.run_omp_vector(system, _pursuit_budget(config))
        pairs = [kron_oracle.column_to_pair(c, config.n) for c in cols]
        keep = coeffs != 0.0
        est_signal = SparseSignal(n=config.n,
                                  support=[p for p, kp in zip(pairs, keep) if kp],
                                  values=coeffs[keep])
        x_hat = est_signal.to_dense()
    seconds = time.perf_counter() - start

    return (normalized_error(x_true, x_hat),
            support_fraction(signal, est_signal),
            seconds)


def _trial_outcome(task):
    """Run one trial, capturing per-trial solver failures instead of raising."""
    config, m, l, point_index, trial_index = task
    try:
        return _solve_trial(config, m, l, point_index, trial_index)
    except (SolverFailure, CapacityError) as exc:
        return exc


def _aggregate(config: ExperimentConfig, m: int, l: int, outcomes) -> ResultRow:
    results = [o for o in outcomes if not isinstance(o, Exception)]
    failures = len(outcomes) - len(results)
    if results:
        mean_nre = float(np.mean([r[0] for r in results]))
        mean_support = float(np.mean([r[1] for r in results]))
        mean_runtime = float(np.mean([r[2] for r in results]))
    else:
        mean_nre = mean_support = mean_runtime = float("nan")
    return ResultRow(
        n=config.n, m=m, l=l, k=config.k, sigma_v2=config.sigma_v2,
        ensemble_a=config.ensemble_a.value, ensemble_b=config.ensemble_b.value,
        solver=config.solver.value, trials=config.trials, failures=failures,
        mean_nre=mean_nre, mean_support_frac=mean_support,
        mean_runtime_s=mean_runtime if config.measure_time else 0.0,
        seed=config.seed)


def run_sweep(config: ExperimentConfig, n_jobs: int = 1) -> list[ResultRow]:
    """Run every (M, L) point of the sweep and aggregate per-point means.

    Per-trial solver failures are counted in the row instead of aborting the
    sweep. ``n_jobs > 1`` distributes trials over worker processes; results
    are reduced in trial order, so parallel runs match serial runs exactly.
    """
    points = config.points()
    tasks = [(config, m, l, p_idx, t_idx)
             for p_idx, (m, l) in enumerate(points)
             for t_idx in range(config.trials)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(_trial_outcome, tasks, chunksize=1))
    else:
        outcomes = [_trial_outcome(task) for task in tasks]
    rows = []
    for p_idx, (m, l) in enumerate(points):
        chunk = outcomes[p_idx * config.trials:(p_idx + 1) * config.trials]
        rows.append(_aggregate(config, m, l, chunk))
    return rows


def run_timing(n_values, iters: int, seed: int = 0,
               repeats: int = 1) -> list[ResultRow]:
    """Time the matrix and vector shrinkage solvers on identical instances.

    For each N: column sparsity ceil(N/20), M = L = N/2, row-orthonormal
    Gaussian matrices, and exactly ``iters`` iterations for both solvers
    (the convergence exit is disabled and the schedules are shared). With
    ``repeats > 1`` each solve is repeated and the best wall time kept. The
    vector solver hitting the explicit-Kronecker capacity limit is recorded
    as a failure row, not an error.
    """
    if iters < 1:
        raise ConfigError(f"iters must be >= 1, got {iters}")
    if repeats < 1:
        raise ConfigError(f"repeats must be >= 1, got {repeats}")
    sigma_v2 = 0.01
    rows = []
    for idx, n in enumerate(n_values):
        n = int(n)
        if n < 2:
            raise ConfigError(f"benchmark dimension must be >= 2, got {n}")
        m = l = n // 2
        k = max(1, math.ceil(n / 20))
        rng = trial_rng(seed, idx, 0)
        a = make_ensemble(EnsembleKind.GAUSSIAN, m, n, rng)
        b = make_ensemble(EnsembleKind.GAUSSIAN, l, n, rng)
        signal = gen_sparse_signal(n, k, rng)
        x_true = signal.to_dense()
        y = apply_model(a, x_true, b, math.sqrt(sigma_v2), rng)
        cfg = replace(fista.default_config(y, a, b), max_iters=iters, rel_tol=0.0)

        def _row(solver: Solver, nre, frac, seconds, failed=False) -> ResultRow:
            return ResultRow(n=n, m=m, l=l, k=k, sigma_v2=sigma_v2,
                             ensemble_a=EnsembleKind.GAUSSIAN.value,
                             ensemble_b=EnsembleKind.GAUSSIAN.value,
                             solver=solver.value, trials=1,
                             failures=1 if failed else 0, mean_nre=nre,
                             mean_support_frac=frac, mean_runtime_s=seconds,
                             seed=seed)

        best = math.inf
        for _ in range(repeats):
            start = time.perf_counter()
            x_hat, _, _ = fista.run_fista(y, a, b, cfg)
            best = min(best, time.perf_counter() - start)
        rows.append(_row(Solver.FISTA_MATRIX,
                         normalized_error(x_true, x_hat),
                         support_fraction(signal, SparseSignal.from_dense(x_hat)),
                         best))

        try:
            system = kron_oracle.build_system(y, a, b)
            best = math.inf
            for _ in range(repeats):
                start = time.perf_counter()
                x_vec, _, _ = kron_oracle.run_fista_vector(system, cfg)
                best = min(best, time.perf_counter() - start)
            x_hat_v = kron_oracle.devectorize(x_vec, n, n)
            rows.append(_row(Solver.FISTA_VECTOR,
                             normalized_error(x_true, x_hat_v),
                             support_fraction(signal,
                                              SparseSignal.from_dense(x_hat_v)),
                             best))
        except CapacityError:
            nan = float("nan")
            rows.append(_row(Solver.FISTA_VECTOR, nan, nan, nan, failed=True))
    return rows


def timing_ratios(rows: list[ResultRow]) -> dict[int, float]:
    """Vector-over-matrix runtime ratio per dimension, where both succeeded."""
    by_n: dict[int, dict[str, float]] = {}
    for row in rows:
        if row.failures == 0:
            by_n.setdefault(row.n, {})[row.solver] = row.mean_runtime_s
    return {n: t[Solver.FISTA_VECTOR.value] / t[Solver.FISTA_MATRIX.value]
            for n, t in sorted(by_n.items())
            if Solver.FISTA_MATRIX.value in t and Solver.FISTA_VECTOR.value in t}


def per_iteration_seconds(n_values, iters: int = 50, repeats: int = 3,
                          seed: int = 0) -> list[tuple[int, float]]:
    """Best-of-``repeats`` per-iteration wall time of the matrix solver.

    Instances use M = L = N/2 Gaussian pairs and a fixed iteration count with
    the convergence exit disabled.
    """
    if iters < 1:
        raise ConfigError(f"iters must be >= 1, got {iters}")
    out = []
    for idx, n in enumerate(n_values):
        n = int(n)
        m = l = n // 2
        rng = trial_rng(seed, idx, 0)
        a = make_ensemble(EnsembleKind.GAUSSIAN, m, n, rng)
        b = make_ensemble(EnsembleKind.GAUSSIAN, l, n, rng)
        x_true = gen_sparse_signal(n, max(1, math.ceil(n / 20)), rng).to_dense()
        y = apply_model(a, x_true, b)
        cfg = replace(fista.default_config(y, a, b), max_iters=iters, rel_tol=0.0)
        best = math.inf
        for _ in range(repeats):
            start = time.perf_counter()
            fista.run_fista(y, a, b, cfg)
            best = min(best, (time.perf_counter() - start) / iters)
        out.append((n, best))
    return out


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv_text(rows: list[ResultRow]) -> str:
    """Render rows as CSV: fixed header, '.'-decimal floats, LF endings."""
    lines = [",".join(CSV_FIELDS)]
    for row in rows:
        lines.append(",".join(_format_value(getattr(row, f)) for f in CSV_FIELDS))
    return "\n".join(lines) + "\n"


def write_rows_csv(rows: list[ResultRow], path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(rows_to_csv_text(rows))


def write_rows_json(rows: list[ResultRow], path) -> None:
    """JSON mirror of the CSV rows: one array, same field names."""
    payload = [{f: getattr(row, f) for f in CSV_FIELDS} for row in rows]
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


GRID_N40 = (8, 12, 16, 20, 24, 28, 32, 36, 40)
PAPER_TRIALS = 500   # full-scale trial count; presets default to a desk-scale 50
PRESET_NAMES = ("fig1", "fig2", "fig3")


def preset_configs(name: str, trials: int = 50, seed: int = 0,
                   measure_time: bool = False) -> list[ExperimentConfig]:
    """Benchmark presets behind the CLI.

    fig1: reconstruction error vs M = L (N = 40, noisy) for Gaussian pairs at
    column sparsities 1, 2, 4 plus DCT/DCT, binary/binary and binary/Gaussian
    pairs at sparsity 2.
    fig2: reconstruction error vs L at fixed M = 8 for DCT pairs, plus the
    M = L diagonal as a baseline.
    fig3: fraction of support recovered by greedy pursuit vs M = L (noiseless,
    sparsity 1) for Gaussian/Gaussian, binary/binary and binary/Gaussian.
    """
    common = dict(n=40, m_values=GRID_N40, trials=trials, seed=seed,
                  measure_time=measure_time)
    if name == "fig1":
        fista_common = dict(solver=Solver.FISTA_MATRIX, sigma_v2=0.01, **common)
        configs = [ExperimentConfig(k=k, ensemble_a=EnsembleKind.GAUSSIAN,
                                    ensemble_b=EnsembleKind.GAUSSIAN, **fista_common)
                   for k in (1, 2, 4)]
        for ens_a, ens_b in ((EnsembleKind.DCT, EnsembleKind.DCT),
                             (EnsembleKind.BINARY, EnsembleKind.BINARY),
                             (EnsembleKind.BINARY, EnsembleKind.GAUSSIAN)):
            configs.append(ExperimentConfig(k=2, ensemble_a=ens_a,
                                            ensemble_b=ens_b, **fista_common))
        return configs
    if name == "fig2":
        fista_common = dict(solver=Solver.FISTA_MATRIX, sigma_v2=0.01, k=2,
                            ensemble_a=EnsembleKind.DCT,
                            ensemble_b=EnsembleKind.DCT)
        fixed_m = dict(common)
        fixed_m["m_values"] = (8,)
        return [ExperimentConfig(l_values=GRID_N40, **fixed_m, **fista_common),
                ExperimentConfig(**common, **fista_common)]
    if name == "fig3":
        omp_common = dict(solver=Solver.OMP_MATRIX, sigma_v2=0.0, k=1, **common)
        return [ExperimentConfig(ensemble_a=ens_a, ensemble_b=ens_b, **omp_common)
                for ens_a, ens_b in ((EnsembleKind.GAUSSIAN, EnsembleKind.GAUSSIAN),
                                     (EnsembleKind.BINARY, EnsembleKind.BINARY),
                                     (EnsembleKind.BINARY, EnsembleKind.GAUSSIAN))]
    raise ConfigError(
        f"unknown preset {name!r}; available presets: {', '.join(PRESET_NAMES)}")
