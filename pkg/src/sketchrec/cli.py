"""Command-line front door: generate problems, recover, sweep, bench, verify.

Exit codes: 0 on success, 1 on verification or solver failure, 2 on usage,
configuration, or input errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from . import fista, harness, kron_oracle, omp
from .errors import CapacityError, ConfigError, DimensionError, InputError, SolverFailure
from .fista import FistaConfig
from .harness import ExperimentConfig, Solver, preset_configs, trial_rng
from .sensing import (EnsembleKind, apply_model, gen_sparse_signal, load_matrix_csv,
                      make_ensemble, save_matrix_csv)

FISTA_VERIFY_TOL = 1e-8
OMP_VERIFY_TOL = 1e-8
VERIFY_MAX_N = 12


def _resolve_seed(args) -> int:
    """--seed flag, then the SKETCHREC_SEED environment variable, then 0."""
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("SKETCHREC_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"SKETCHREC_SEED must be an integer, got {env!r}")
    return 0


def _parse_int_list(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in raw.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"expected a comma-separated integer list, got {raw!r}")


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _apply_override(config: ExperimentConfig, key: str, raw: str) -> ExperimentConfig:
    """Apply one KEY=VALUE override to an experiment configuration."""
    if key in ("n", "k", "trials", "seed"):
        return dataclasses.replace(config, **{key: int(raw)})
    if key == "sigma_v2":
        return dataclasses.replace(config, sigma_v2=float(raw))
    if key == "m_values":
        return dataclasses.replace(config, m_values=_parse_int_list(raw))
    if key == "l_values":
        values = None if raw.lower() in ("none", "") else _parse_int_list(raw)
        return dataclasses.replace(config, l_values=values)
    if key in ("ensemble_a", "ensemble_b"):
        return dataclasses.replace(config, **{key: EnsembleKind(raw)})
    if key == "solver":
        return dataclasses.replace(config, solver=Solver(raw))
    if key == "d":
        return dataclasses.replace(config, solver_params=int(raw))
    if key == "measure_time":
        return dataclasses.replace(config, measure_time=_parse_bool(raw))
    raise ConfigError(f"unknown config key {key!r}")


def config_from_file(path) -> ExperimentConfig:
    """Parse a flat key=value config file into one experiment configuration."""
    entries: dict[str, str] = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected KEY=VALUE")
            key, raw = (part.strip() for part in line.split("=", 1))
            entries[key] = raw

    for required in ("n", "m_values", "k", "solver"):
        if required not in entries:
            raise ConfigError(f"{path}: missing required key {required!r}")

    fista_keys = ("lambda_init", "beta", "lambda_bar", "max_iters", "rel_tol")
    solver_params: FistaConfig | int | None = None
    if "d" in entries:
        solver_params = int(entries.pop("d"))
    elif "lambda_init" in entries:
        solver_params = FistaConfig(
            lambda_init=float(entries.pop("lambda_init")),
            beta=float(entries.pop("beta", "0.97")),
            lambda_bar=float(entries.pop("lambda_bar")),
            max_iters=int(entries.pop("max_iters", "10000")),
            rel_tol=float(entries.pop("rel_tol", "1e-8")))
    elif any(key in entries for key in fista_keys):
        raise ConfigError(
            f"{path}: partial solver schedule; lambda_init and lambda_bar are required")

    config = ExperimentConfig(n=int(entries.pop("n")),
                              m_values=_parse_int_list(entries.pop("m_values")),
                              k=int(entries.pop("k")),
                              solver=Solver(entries.pop("solver")),
                              solver_params=solver_params)
    for key, raw in entries.items():
        config = _apply_override(config, key, raw)
    return config


def _config_payload(config: ExperimentConfig) -> dict:
    payload = dataclasses.asdict(config)
    payload["ensemble_a"] = config.ensemble_a.value
    payload["ensemble_b"] = config.ensemble_b.value
    payload["solver"] = config.solver.value
    return payload


def _write_rows(rows, output, fmt) -> None:
    if fmt == "json":
        harness.write_rows_json(rows, output)
    else:
        harness.write_rows_csv(rows, output)


def cmd_gen(args) -> int:
    seed = _resolve_seed(args)
    rng = trial_rng(seed, 0, 0)
    a = make_ensemble(args.ensemble_a, args.m, args.n, rng)
    b = make_ensemble(args.ensemble_b, args.l, args.n, rng)
    signal = gen_sparse_signal(args.n, args.k, rng)
    x = signal.to_dense()
    y = apply_model(a, x, b, math.sqrt(args.sigma_v2), rng)
    prefix = args.output
    paths = {}
    for tag, mat in (("A", a), ("B", b), ("X", x), ("Y", y)):
        paths[tag] = f"{prefix}{tag}.csv"
        save_matrix_csv(mat, paths[tag])
    print(f"seed: {seed}")
    for tag, path in paths.items():
        print(f"{tag}: {path}")
    return 0


def _load_problem(args):
    y = load_matrix_csv(args.y)
    a = load_matrix_csv(args.a)
    b = load_matrix_csv(args.b)
    n = a.shape[1]
    if b.shape[1] != n or y.shape != (a.shape[0], b.shape[0]):
        raise DimensionError(
            f"inconsistent dimensions: {args.y} is {y.shape[0]}x{y.shape[1]}, "
            f"{args.a} is {a.shape[0]}x{a.shape[1]}, "
            f"{args.b} is {b.shape[0]}x{b.shape[1]}")
    return y, a, b


def cmd_recover(args) -> int:
    y, a, b = _load_problem(args)
    if args.solver == "fista":
        if args.lambda_init is not None:
            cfg = FistaConfig(lambda_init=args.lambda_init, beta=args.beta,
                              lambda_bar=args.lambda_bar
                              if args.lambda_bar is not None else args.lambda_init,
                              max_iters=args.max_iters, rel_tol=args.rel_tol)
        else:
            cfg = fista.default_config(y, a, b, max_iters=args.max_iters,
                                       rel_tol=args.rel_tol)
        x_hat, iters, history = fista.run_fista(y, a, b, cfg)
        save_matrix_csv(x_hat, args.output)
        print(f"iterations: {iters}")
        print(f"objective: {history[-1]!r}")
    else:
        if args.d is None:
            raise ConfigError("--d (sparsity budget) is required for the omp solver")
        support, estimate = omp.run_omp(y, a, b, args.d, res_tol=args.res_tol)
        x_hat = estimate.to_dense()
        save_matrix_csv(x_hat, args.output)
        residual = np.linalg.norm(y - a @ x_hat @ b.T)
        print(f"iterations: {len(support)}")
        print(f"residual_norm: {residual!r}")
    print(f"estimate: {args.output}")
    return 0


def cmd_sweep(args) -> int:
    overrides = list(args.overrides)
    preset = args.preset
    if preset and "=" in preset:
        overrides.insert(0, preset)
        preset = None
    seed = _resolve_seed(args)

    if preset is not None:
        if preset not in harness.PRESET_NAMES:
            raise ConfigError(
                f"unknown preset {preset!r}; available presets: "
                f"{', '.join(harness.PRESET_NAMES)}")
        trials = args.trials if args.trials is not None else 50
        configs = preset_configs(preset, trials=trials, seed=seed,
                                 measure_time=args.timing)
    elif args.config is not None:
        config = config_from_file(args.config)
        if args.trials is not None:
            config = dataclasses.replace(config, trials=args.trials)
        if args.seed is not None or "SKETCHREC_SEED" in os.environ:
            config = dataclasses.replace(config, seed=seed)
        if args.timing:
            config = dataclasses.replace(config, measure_time=True)
        configs = [config]
    else:
        raise ConfigError("a preset name or --config file is required")

    for pair in overrides:
        if "=" not in pair:
            raise ConfigError(f"override must look like KEY=VALUE, got {pair!r}")
        key, raw = pair.split("=", 1)
        configs = [_apply_override(c, key.strip(), raw.strip()) for c in configs]

    rows = []
    for config in configs:
        rows.extend(harness.run_sweep(config, n_jobs=args.jobs))

    output = args.output or ("results.json" if args.format == "json" else "results.csv")
    _write_rows(rows, output, args.format)
    sidecar = f"{output}.config.json"
    with open(sidecar, "w", newline="\n") as fh:
        json.dump([_config_payload(c) for c in configs], fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"seed: {seed}")
    print(f"rows: {len(rows)}")
    print(f"results: {output}")
    print(f"config echo: {sidecar}")
    return 0


def cmd_bench(args) -> int:
    seed = _resolve_seed(args)
    n_values = _parse_int_list(args.n_values)
    if not n_values:
        raise ConfigError("--n-values must name at least one dimension")
    rows = harness.run_timing(n_values, args.iters, seed=seed)
    output = args.output or ("bench.json" if args.format == "json" else "bench.csv")
    _write_rows(rows, output, args.format)
    print(f"seed: {seed}")
    for row in rows:
        print(f"n={row.n} solver={row.solver} seconds={row.mean_runtime_s:.4f} "
              f"nre={row.mean_nre:.4g} failures={row.failures}")
    for n, ratio in harness.timing_ratios(rows).items():
        print(f"n={n} speedup (vector/matrix): {ratio:.2f}x")
    print(f"results: {output}")
    return 0


def cmd_verify(args) -> int:
    if args.n > VERIFY_MAX_N:
        raise CapacityError(
            f"verify is capped at n <= {VERIFY_MAX_N} (explicit Kronecker oracle), "
            f"got n={args.n}")
    seed = _resolve_seed(args)
    print(f"seed: {seed}")
    rng = trial_rng(seed, 0, 0)
    a = make_ensemble(EnsembleKind.GAUSSIAN, args.m, args.n, rng)
    b = make_ensemble(EnsembleKind.GAUSSIAN, args.l, args.n, rng)
    x_true = gen_sparse_signal(args.n, 1, rng).to_dense()
    y = apply_model(a, x_true, b, 0.1, rng)
    system = kron_oracle.build_system(y, a, b)

    cfg = dataclasses.replace(fista.default_config(y, a, b),
                              max_iters=args.iters, rel_tol=0.0)
    vec_cfg = cfg
    if args.perturb:
        vec_cfg = dataclasses.replace(
            cfg, lambda_init=cfg.lambda_init * (1.0 + args.perturb),
            lambda_bar=cfg.lambda_bar * (1.0 + args.perturb))
    mat_iterates: list[np.ndarray] = []
    vec_iterates: list[np.ndarray] = []
    fista.run_fista(y, a, b, cfg,
                    iterate_hook=lambda x: mat_iterates.append(kron_oracle.vectorize(x)))
    kron_oracle.run_fista_vector(system, vec_cfg,
                                 iterate_hook=lambda x: vec_iterates.append(x.copy()))
    fista_diff = max(float(np.max(np.abs(mv - vv)))
                     for mv, vv in zip(mat_iterates, vec_iterates))
    fista_ok = len(mat_iterates) == len(vec_iterates) and fista_diff < FISTA_VERIFY_TOL

    d = args.d if args.d is not None else min(args.n, args.m * args.l)
    support, estimate = omp.run_omp(y, a, b, d)
    cols, coeffs = kron_oracle.run_omp_vector(system, d)
    mapped = [kron_oracle.column_to_pair(c, args.n) for c in cols]
    vec_dense = np.zeros((args.n, args.n))
    for pair, value in zip(mapped, coeffs):
        vec_dense[pair] = value
    omp_selection_ok = mapped == support
    omp_coeff_diff = float(np.max(np.abs(estimate.to_dense() - vec_dense)))
    omp_ok = omp_selection_ok and omp_coeff_diff < OMP_VERIFY_TOL

    print(f"fista iterate difference (max abs over {len(mat_iterates)} iterations): "
          f"{fista_diff:.3e}")
    print(f"omp selections identical: {omp_selection_ok}")
    print(f"omp coefficient difference (max abs): {omp_coeff_diff:.3e}")
    verdict = fista_ok and omp_ok
    print(f"equivalence: {'ok' if verdict else 'FAILED'}")
    return 0 if verdict else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sketchrec",
        description="Sparse matrix recovery from two-sided sketches: "
                    "problem generation, recovery, benchmark sweeps, and "
                    "matrix-vs-vector equivalence checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a seeded problem instance as CSV files")
    gen.add_argument("--n", type=int, required=True, help="signal dimension N")
    gen.add_argument("--m", type=int, required=True, help="rows of A")
    gen.add_argument("--l", type=int, required=True, help="rows of B")
    gen.add_argument("--k", type=int, required=True, help="nonzeros per column of X")
    gen.add_argument("--sigma-v2", type=float, default=0.0, help="noise variance")
    gen.add_argument("--ensemble-a", default="gaussian",
                     choices=[e.value for e in EnsembleKind])
    gen.add_argument("--ensemble-b", default="gaussian",
                     choices=[e.value for e in EnsembleKind])
    gen.add_argument("--seed", type=int, default=None,
                     help="RNG seed (default: SKETCHREC_SEED or 0)")
    gen.add_argument("--output", default="problem_",
                     help="path prefix for the A/B/X/Y CSV files")
    gen.set_defaults(func=cmd_gen)

    rec = sub.add_parser("recover", help="recover X from CSV files for Y, A, B")
    rec.add_argument("--y", required=True, help="observation CSV")
    rec.add_argument("--a", required=True, help="left measurement matrix CSV")
    rec.add_argument("--b", required=True, help="right measurement matrix CSV")
    rec.add_argument("--solver", choices=("fista", "omp"), default="fista")
    rec.add_argument("--output", default="x_hat.csv", help="estimate CSV path")
    rec.add_argument("--d", type=int, default=None, help="omp sparsity budget")
    rec.add_argument("--res-tol", type=float, default=None,
                     help="omp early exit once ||R||_F < res_tol * ||Y||_F")
    rec.add_argument("--lambda-init", type=float, default=None,
                     help="fista starting weight (default: data-driven)")
    rec.add_argument("--beta", type=float, default=0.97,
                     help="fista weight decay factor")
    rec.add_argument("--lambda-bar", type=float, default=None,
                     help="fista weight floor (default: lambda-init)")
    rec.add_argument("--max-iters", type=int, default=10000)
    rec.add_argument("--rel-tol", type=float, default=1e-8)
    rec.set_defaults(func=cmd_recover)

    swp = sub.add_parser("sweep", help="run a preset or config-file experiment sweep")
    swp.add_argument("preset", nargs="?", default=None,
                     help=f"preset name ({', '.join(harness.PRESET_NAMES)})")
    swp.add_argument("overrides", nargs="*", metavar="KEY=VALUE",
                     help="config overrides applied last")
    swp.add_argument("--config", default=None, help="flat key=value config file")
    swp.add_argument("--trials", type=int, default=None, help="trials per grid point")
    swp.add_argument("--seed", type=int, default=None,
                     help="base RNG seed (default: SKETCHREC_SEED or 0)")
    swp.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                     help="parallel trial workers (default: machine core count)")
    swp.add_argument("--output", default=None, help="result table path")
    swp.add_argument("--format", choices=("csv", "json"), default="csv")
    swp.add_argument("--timing", action="store_true",
                     help="record wall time per row (breaks byte-for-byte "
                          "reproducibility of the output file)")
    swp.set_defaults(func=cmd_sweep)

    ben = sub.add_parser("bench", help="time matrix vs vector solvers on one instance per N")
    ben.add_argument("--n-values", default="20,40,60",
                     help="comma-separated signal dimensions")
    ben.add_argument("--iters", type=int, default=1000,
                     help="fixed iteration count for both solvers")
    ben.add_argument("--seed", type=int, default=None)
    ben.add_argument("--output", default=None)
    ben.add_argument("--format", choices=("csv", "json"), default="csv")
    ben.set_defaults(func=cmd_bench)

    ver = sub.add_parser("verify",
                         help="check matrix solvers against the explicit-Kronecker "
                              "vector oracles on a seeded instance")
    ver.add_argument("--n", type=int, required=True)
    ver.add_argument("--m", type=int, required=True)
    ver.add_argument("--l", type=int, required=True)
    ver.add_argument("--seed", type=int, default=None)
    ver.add_argument("--iters", type=int, default=200,
                     help="fista iterations to compare")
    ver.add_argument("--d", type=int, default=None,
                     help="omp budget (default: min(n, m*l))")
    ver.add_argument("--perturb", type=float, default=0.0,
                     help="scale the vector-side schedule by (1+perturb); "
                          "nonzero values should make verification fail")
    ver.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles usage errors with code 2
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
