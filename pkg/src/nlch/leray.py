"""Helmholtz decomposition and projections onto the admissible controls.

The admissible set is the intersection of a componentwise box with the
discretely solenoidal subspace H_sigma = {v : div v = 0}.  Pointwise
clipping alone leaves the box but breaks solenoidality, and the Leray
projector alone does the reverse, so the metric projection onto the
intersection is computed by Dykstra's alternating scheme, which (unlike
plain alternating projection) converges to the *nearest* point.

Because the divergence here is the exact transpose of the gradient, the
solenoidal subspace is exactly the orthogonal complement of discrete
gradients, and leray_project is an orthogonal projector to solver
tolerance: idempotent, self-adjoint, annihilating every gradient field.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .control import ControlField
from .errors import FieldError, ProjectionError
from .fields import (Grid, ScalarField, VectorField, divergence, gradient,
                     inner_vector, norm_l2_vector)
from .solvers import solve_neumann_poisson


@dataclass(frozen=True)
class ControlBounds:
    """Componentwise box [vmin_c, vmax_c] containing zero.

    Zero must be admissible so the intersection with the solenoidal
    subspace is guaranteed nonempty.
    """

    vmin: tuple[float, ...]
    vmax: tuple[float, ...]

    def __post_init__(self):
        if len(self.vmin) != len(self.vmax):
            raise FieldError("vmin and vmax must have the same number of components")
        for c, (lo, hi) in enumerate(zip(self.vmin, self.vmax)):
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise FieldError(f"control bounds must be finite, component {c}")
            if lo > hi:
                raise FieldError(
                    f"control bounds infeasible: vmin > vmax for component {c} "
                    f"({lo} > {hi})")
            if lo > 0.0 or hi < 0.0:
                raise FieldError(
                    f"control bounds must contain 0 for component {c} "
                    f"(got [{lo}, {hi}])")

    @classmethod
    def isotropic(cls, dim: int, vmax: float) -> "ControlBounds":
        return cls(tuple(-vmax for _ in range(dim)), tuple(vmax for _ in range(dim)))


@dataclass(frozen=True)
class DykstraInfo:
    iterations: int
    change: float
    box_violation: float
    div_residual: float
    converged: bool


def poisson_neumann(rhs: ScalarField, tol: float = 1e-10) -> ScalarField:
    """Solve ``laplacian_neumann(psi) = rhs`` for mean-zero ``psi``.

    Raises :class:`FieldError` for incompatible (non-mean-free) data.
    """
    l2 = np.sqrt(float(np.vdot(rhs.data, rhs.data).real) * rhs.grid.cell_volume)
    mean_mass = abs(float(rhs.data.mean())) * np.sqrt(rhs.grid.volume)
    if mean_mass > 1e-10 * max(l2, 1e-300):
        raise FieldError(
            f"incompatible Neumann data: rhs mean {rhs.data.mean():.3e} is not zero")
    psi, _ = solve_neumann_poisson(-rhs.data, rhs.grid.h, tol=tol)
    return ScalarField(rhs.grid, psi)


def leray_project(v: VectorField, tol: float = 1e-10) -> VectorField:
    """Orthogonal projection onto the discretely solenoidal subspace."""
    dv = divergence(v)
    # div of anything is exactly mean-free (transpose construction), so
    # the Poisson problem is always compatible; the solver handles -lap
    psi, _ = solve_neumann_poisson(-dv.data, v.grid.h, tol=tol)
    return v - gradient(ScalarField(v.grid, psi))


def clip_to_box(v: VectorField, bounds: ControlBounds) -> VectorField:
    comps = [np.clip(c.data, lo, hi)
             for c, lo, hi in zip(v.components, bounds.vmin, bounds.vmax)]
    return VectorField.from_arrays(v.grid, comps)


def box_violation(v: VectorField, bounds: ControlBounds) -> float:
    worst = 0.0
    for c, lo, hi in zip(v.components, bounds.vmin, bounds.vmax):
        worst = max(worst,
                    float(np.maximum(lo - c.data, 0.0).max()),
                    float(np.maximum(c.data - hi, 0.0).max()))
    return worst


def divergence_linf(v: VectorField) -> float:
    """Max-norm of the discrete divergence; feasibility diagnostic."""
    return float(np.abs(divergence(v).data).max())


def project_to_admissible(v: VectorField, bounds: ControlBounds,
                          tol: float = 1e-8, max_iter: int = 500,
                          full_output: bool = False):
    """Metric projection onto box ∩ H_sigma by Dykstra's algorithm.

    Alternates the box clip and the Leray projector with Dykstra's
    correction increments; stops when successive solenoidal iterates
    differ by at most ``tol`` in L2 and the iterate sits inside the box
    within ``tol``.  The returned field is solenoidal to solver
    tolerance.  Non-convergence is reported, not raised: the best
    iterate comes back with its achieved residuals in the info record
    (``full_output=True``) and a warning otherwise.
    """
    if tol <= 0.0:
        raise ProjectionError(f"projection tolerance must be positive, got {tol}")
    x = v
    p = VectorField.zeros(v.grid)
    q = VectorField.zeros(v.grid)
    change = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        y = clip_to_box(x + p, bounds)
        p = (x + p) - y
        x_new = leray_project(y + q)
        q = (y + q) - x_new
        change = norm_l2_vector(x_new - x)
        x = x_new
        if change <= tol and box_violation(x, bounds) <= tol:
            break
    info = DykstraInfo(iterations=it, change=change,
                       box_violation=box_violation(x, bounds),
                       div_residual=float(np.abs(divergence(x).data).max()),
                       converged=change <= tol
                       and box_violation(x, bounds) <= tol)
    if not info.converged and not full_output:
        warnings.warn(
            f"admissible-set projection stopped at change {info.change:.3e}, "
            f"box violation {info.box_violation:.3e} after {info.iterations} "
            "iterations", RuntimeWarning, stacklevel=2)
    if full_output:
        return x, info
    return x


def project_control(v: ControlField, bounds: ControlBounds,
                    tol: float = 1e-8, max_iter: int = 500) -> ControlField:
    """Slice-by-slice projection of a time-dependent control.

    The admissible set has no temporal coupling, so projecting each time
    slice is the space-time metric projection.
    """
    return ControlField(v.grid, v.dt,
                        tuple(project_to_admissible(s, bounds, tol, max_iter)
                              for s in v.slices))


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def _boundary_window(grid: Grid, margin_cells: int = 2,
                     ramp_fraction: float = 0.3) -> np.ndarray:
    """Smooth window that is exactly zero on the outermost cell layers.

    The exact-zero margin is load-bearing: the curl construction below
    is divergence-free to rounding only where the boundary-modified
    stencil rows see zeros.
    """
    w = np.ones(grid.shape)
    for a in range(grid.dim):
        x = grid.cell_centers(a)
        h = grid.h[a]
        lo = margin_cells * h
        hi = grid.length[a] - margin_cells * h
        if hi <= lo:
            raise FieldError("grid too small for a windowed stream function")
        t = (x - lo) / (hi - lo)
        prof = np.where((t <= 0.0) | (t >= 1.0), 0.0,
                        _smoothstep(t / ramp_fraction)
                        * _smoothstep((1.0 - t) / ramp_fraction))
        shape = [1] * grid.dim
        shape[a] = grid.n[a]
        w = w * prof.reshape(shape)
    return w


def _random_smooth(grid: Grid, rng: np.random.Generator, kmax: int = 3) -> np.ndarray:
    """Random low-frequency cosine series at cell centers."""
    out = np.zeros(grid.shape)
    axes = [np.cos(np.pi * np.outer(np.arange(kmax + 1), grid.cell_centers(a))
                   / grid.length[a]) for a in range(grid.dim)]
    for idx in np.ndindex(*([kmax + 1] * grid.dim)):
        if all(k == 0 for k in idx):
            continue
        coef = rng.standard_normal() / (1.0 + float(sum(k * k for k in idx)))
        term = axes[0][idx[0]]
        for a in range(1, grid.dim):
            term = np.multiply.outer(term, axes[a][idx[a]])
        out += coef * term
    return out


def random_solenoidal(grid: Grid, seed: int, amplitude: float) -> VectorField:
    """Divergence-free random field vanishing near the boundary.

    2D: the rotated gradient of a windowed random stream function.
    3D: the curl of a windowed random vector potential.  Either way the
    discrete divergence vanishes to rounding because the window zeroes
    the stream data on the cells where the transposed stencil differs
    from the interior one.  Scaled so the max-norm equals ``amplitude``;
    deterministic per seed.
    """
    if amplitude < 0.0:
        raise FieldError(f"amplitude must be nonnegative, got {amplitude}")
    if amplitude == 0.0:
        return VectorField.zeros(grid)
    rng = np.random.default_rng(seed)
    window = _boundary_window(grid)
    from . import stencils
    hs = grid.h
    if grid.dim == 2:
        s = _random_smooth(grid, rng) * window
        comps = [stencils.grad_axis(s, 1, hs[1]), -stencils.grad_axis(s, 0, hs[0])]
    else:
        pot = [_random_smooth(grid, rng) * window for _ in range(3)]
        comps = [
            stencils.grad_axis(pot[2], 1, hs[1]) - stencils.grad_axis(pot[1], 2, hs[2]),
            stencils.grad_axis(pot[0], 2, hs[2]) - stencils.grad_axis(pot[2], 0, hs[0]),
            stencils.grad_axis(pot[1], 0, hs[0]) - stencils.grad_axis(pot[0], 1, hs[1]),
        ]
    peak = max(float(np.abs(c).max()) for c in comps)
    if peak == 0.0:
        return VectorField.zeros(grid)
    return VectorField.from_arrays(grid, [c * (amplitude / peak) for c in comps])
