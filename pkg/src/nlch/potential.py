"""Logarithmic double-obstacle entropy for the phase variable.

The convex potential

    F(s) = (theta/2) * ((1+s)*log(1+s) + (1-s)*log(1-s)),   s in (-1, 1)

with absolute temperature ``theta > 0``.  It is even, vanishes together
with its first derivative at s = 0, and its second derivative
``theta / (1 - s^2)`` is bounded below by ``theta`` on the whole open
interval, which is what keeps the implicit time step monotone.  The
derivatives blow up at the pure phases, so evaluation refuses |s| >= 1
outright; trimming values into the open interval is a separate, counted
operation (:func:`clip_to_domain`), never something the evaluator does
silently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularPotentialError
from .fields import ScalarField


@dataclass(frozen=True)
class PotentialParams:
    """Temperature and the evaluation guard band next to the pure phases."""

    theta: float = 0.2
    guard: float = 1e-9

    def __post_init__(self):
        if not (self.theta > 0.0 and np.isfinite(self.theta)):
            raise SingularPotentialError(
                f"theta must be positive and finite, got {self.theta}")
        if not (0.0 < self.guard <= 1e-2):
            raise SingularPotentialError(
                f"guard must lie in (0, 1e-2], got {self.guard}")


def potential_eval(s, order: int, params: PotentialParams):
    """Evaluate F or one of its first three derivatives, elementwise.

    ``order`` 0..3 selects F, F', F'', F'''.  Accepts scalars or arrays;
    raises :class:`SingularPotentialError` if any value satisfies
    |s| >= 1.  Values inside the open interval are evaluated as given:
    clipping is the caller's explicit move, not this function's.
    """
    if order not in (0, 1, 2, 3):
        raise ValueError(f"derivative order must be 0..3, got {order}")
    arr = np.asarray(s, dtype=np.float64)
    if np.abs(arr).max(initial=0.0) >= 1.0:
        raise SingularPotentialError(
            "potential evaluated at |s| >= 1 (pure phase); clip first")
    th = params.theta
    if order == 0:
        out = 0.5 * th * ((1.0 + arr) * np.log1p(arr) + (1.0 - arr) * np.log1p(-arr))
    elif order == 1:
        out = 0.5 * th * (np.log1p(arr) - np.log1p(-arr))
    elif order == 2:
        out = th / (1.0 - arr * arr)
    else:
        om = 1.0 - arr * arr
        out = 2.0 * th * arr / (om * om)
    if np.isscalar(s):
        return float(out)
    return out


def potential_field(f: ScalarField, order: int, params: PotentialParams) -> ScalarField:
    """Field-valued convenience wrapper around :func:`potential_eval`."""
    return ScalarField(f.grid, potential_eval(f.data, order, params))


def clip_to_domain(f: ScalarField, params: PotentialParams) -> tuple[ScalarField, int]:
    """Trim values into [-1 + guard, 1 - guard]; report how many moved.

    The count is the honesty mechanism: a nonzero count in a place where
    the solver promises separation is a bug surfacing, not noise to hide.
    """
    lo, hi = -1.0 + params.guard, 1.0 - params.guard
    clipped = np.clip(f.data, lo, hi)
    moved = int(np.count_nonzero(clipped != f.data))
    if moved == 0:
        return f, 0
    return ScalarField(f.grid, clipped), moved
