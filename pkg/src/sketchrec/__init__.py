"""Sparse matrix recovery from two-sided sketches.

Recovers an unknown column-sparse matrix X from the compressed observation
``Y = A @ X @ B.T`` using matrix-form accelerated shrinkage (FISTA) and
matrix-form greedy pursuit (OMP), with explicit-Kronecker vector-form
solvers kept as equivalence oracles and runtime baselines.
"""

from .errors import (CapacityError, ConfigError, DegenerateAtomError,
                     DegenerateOperatorError, DimensionError, DivergenceError,
                     InputError, MetricError, SketchRecError, SolverFailure,
                     SparsityError, ZeroResidualError)
from .fista import (FistaConfig, FistaState, default_config, fista_step,
                    initial_state, lipschitz, objective, run_fista,
                    soft_threshold, spectral_norm)
from .harness import (ExperimentConfig, ResultRow, Solver, normalized_error,
                      per_iteration_seconds, preset_configs, run_sweep,
                      run_timing, support_fraction, timing_ratios,
                      trial_rng, write_rows_csv, write_rows_json)
from .kron_oracle import (VectorizedSystem, build_system, column_to_pair,
                          devectorize, kron, run_fista_vector, run_omp_vector,
                          vectorize)
from .omp import OmpState, run_omp, select_atom, solve_coeffs, update_residual
from .sensing import (EnsembleKind, SparseSignal, apply_model, gen_binary,
                      gen_dct_rows, gen_gaussian, gen_sparse_signal,
                      load_matrix_csv, make_ensemble, save_matrix_csv)

__version__ = "0.1.0"
