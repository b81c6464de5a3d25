"""Exception types shared across the package.

Two families matter to callers: :class:`InputError` covers bad arguments,
shapes, files or configuration (the CLI maps these to exit code 2), and
:class:`SolverFailure` covers numerical breakdowns inside a solver (exit
code 1).
"""


class SketchRecError(Exception):
    """Base class for all package-specific errors."""


class InputError(SketchRecError, ValueError):
    """Invalid arguments, dimensions, files, or configuration."""


class DimensionError(InputError):
    """Matrix or vector dimensions are inconsistent or impossible."""


class SparsityError(InputError):
    """Sparsity level or support description out of range."""


class ConfigError(InputError):
    """Malformed configuration value, file, or CLI usage."""


class CapacityError(InputError):
    """An explicit Kronecker object would exceed the memory cap."""


class MetricError(InputError):
    """Metric undefined for the given inputs (e.g. zero reference signal)."""


class DegenerateOperatorError(InputError):
    """Operator has no usable spectral norm (zero matrix)."""


class SolverFailure(SketchRecError, RuntimeError):
    """Numerical failure inside a solver."""


class DivergenceError(SolverFailure):
    """Iterates became nonfinite; carries the iteration index."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class ZeroResidualError(SolverFailure):
    """Atom selection was asked to act on an exactly zero residual."""


class DegenerateAtomError(SolverFailure):
    """Selected atoms are numerically linearly dependent."""
