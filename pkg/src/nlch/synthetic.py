"""Seeded synthetic data for experiments and tests.

Everything here is deterministic in (grid, seed): generators draw a
fixed number of coefficients from ``numpy.random.default_rng(seed)`` in
a fixed order, so instances reproduce bit-for-bit across runs.  The
solenoidal generator lives with the projection machinery in
:mod:`nlch.leray`; this module adds the scalar counterpart and the
piecewise-constant-in-time control built from it.
"""

from __future__ import annotations

import numpy as np

from .control import ControlField
from .fields import Grid, ScalarField
from .leray import _random_smooth, random_solenoidal

__all__ = ["smooth_field", "random_solenoidal", "synthetic_control"]


def smooth_field(grid: Grid, seed: int, amplitude: float,
                 kmax: int = 3) -> ScalarField:
    """Random low-wavenumber cosine series scaled to ``max|.| = amplitude``.

    The cosine basis has vanishing normal derivative at the walls, which
    keeps the discrete boundary fluxes honest; coefficients are damped
    by 1/(1+|k|^2) so the field is smooth on the grid scale.  Amplitude
    0 returns the zero field.
    """
    if amplitude < 0.0:
        raise ValueError(f"amplitude must be nonnegative, got {amplitude}")
    data = _random_smooth(grid, np.random.default_rng(seed), kmax)
    peak = np.abs(data).max()
    if peak > 0.0 and amplitude > 0.0:
        data *= amplitude / peak
    else:
        data = np.zeros(grid.shape)
    return ScalarField(grid, data)


def synthetic_control(grid: Grid, dt: float, n_steps: int, seed: int,
                      amplitude: float) -> ControlField:
    """Piecewise-constant-in-time control; slice n uses ``seed + n``."""
    return ControlField(grid, dt, tuple(
        random_solenoidal(grid, seed + n, amplitude) for n in range(n_steps)))
