"""
Exception types for the homogenization toolkit.

Every class carries the process exit code the command-line entry point
returns when the error reaches it.
"""


class HomogError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(HomogError):
    """Invalid field spec, model, run configuration, mesh or spectral parameter."""

    exit_code = 1


class InsufficientPointsError(ConfigError):
    """Slope fit requested with fewer than the required number of ε points."""


class SolverError(HomogError):
    """Singular system, non-convergence or a broken solver post-condition."""

    exit_code = 2


class CoercivityError(SolverError):
    """Assembled form or cell operator is not coercive."""


class CriteriaError(HomogError):
    """One or more verification criteria failed."""

    exit_code = 3


def annotate(exc: HomogError, epsilon: float, zeta: complex) -> HomogError:
    """Return a copy of ``exc`` (same class) with the sweep point prepended."""
    message = f"(eps={epsilon:.6g}, zeta={zeta.real:.6g}{zeta.imag:+.6g}j) {exc}"
    annotated = type(exc)(message)
    annotated.__cause__ = exc
    return annotated
