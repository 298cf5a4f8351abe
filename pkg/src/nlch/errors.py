"""Exception types raised across the package.

Every failure mode carries a message naming the offending quantity, so
callers (and the command-line harness) can report it without guessing.
"""

from __future__ import annotations


class NlchError(Exception):
    """Base class for all package-specific errors."""


class GridError(NlchError, ValueError):
    """Invalid grid construction (dimension, cell counts, extents)."""


class FieldError(NlchError, ValueError):
    """Field data inconsistent with its grid, or non-finite."""


class SingularPotentialError(NlchError, ValueError):
    """Entropy potential evaluated at or beyond the pure phases +-1."""


class KernelError(NlchError, ValueError):
    """Interaction kernel misconfigured (family, parameters, padding)."""


class SolverError(NlchError, RuntimeError):
    """Iterative linear solver failed to reach its tolerance.

    Attributes
    ----------
    residual : float
        Relative residual at the final iterate.
    iterations : int
        Number of iterations performed.
    """

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class StepError(NlchError, RuntimeError):
    """A time step of the state system could not be completed."""


class CflError(StepError):
    """Advective CFL bound violated for the requested step."""


class NewtonError(StepError):
    """Newton iteration for the implicit step did not converge.

    Carries the final residual so the failure is diagnosable.
    """

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ProjectionError(NlchError, RuntimeError):
    """Admissible-set projection failed its feasibility postcondition."""


class ConfigError(NlchError, ValueError):
    """Config document rejected; message names the section and key."""


class FieldIOError(NlchError, ValueError):
    """Field file malformed: bad magic, truncated payload, or bad values."""
