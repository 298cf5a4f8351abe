"""Time integration of the convective nonlocal phase-field system.

One step advances ``phi`` by the semi-implicit convex splitting

    (phi1 - phi0)/dt + div(phi0 v) - lap(F'(phi1) - K*phi0) = 0,

treating the convex entropy implicitly and the interaction term and
transport explicitly.  The implicit part is a monotone nonlinear system
(F'' >= theta > 0), solved by damped Newton; every linearized solve
reduces to the SPD screened operator in :mod:`nlch.solvers`.

The reported chemical potential keeps the splitting's kernel lag,
``mu1 = F'(phi1) - K*phi0``, because that is the quantity the discrete
energy balance sees.  Entry 0 of a trajectory's ``mu`` list is the
instantaneous potential of the initial datum, for reporting only.

Mass is conserved to rounding by construction: the update is a discrete
divergence, the stencils are exact transposes, and the Newton iteration
is pinned to the initial mean (residual deflation plus mean-free
updates), so solver tolerance never leaks into the mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import stencils
from .control import ControlField
from .errors import CflError, NewtonError, StepError
from .fields import Grid, ScalarField, VectorField, inner, reduce
from .kernels import KernelTable, _convolve_arr, convolve
from .potential import PotentialParams, potential_eval, potential_field
from .solvers import solve_screened

CFL_LIMIT = 0.9

# smallest admissible Newton damping factor before the step gives up
_MIN_DAMPING = 2.0 ** -60


@dataclass(frozen=True)
class StateParams:
    """Time discretization and Newton controls for the state solver."""

    dt: float
    n_steps: int
    newton_tol: float = 1e-10
    newton_max: int = 50
    guard: float = 1e-6

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0.0):
            raise StepError(f"dt must be a positive real, got {self.dt}")
        if self.n_steps < 0:
            raise StepError(f"n_steps must be nonnegative, got {self.n_steps}")
        if not (self.newton_tol > 0.0):
            raise StepError(
                f"newton_tol must be positive, got {self.newton_tol}")
        if self.newton_max < 1:
            raise StepError(
                f"newton_max must be at least 1, got {self.newton_max}")
        if not (0.0 < self.guard < 0.1):
            raise StepError(
                f"iterate guard must lie in (0, 0.1), got {self.guard}")

    @property
    def final_time(self) -> float:
        return self.dt * self.n_steps


@dataclass(frozen=True, eq=False)
class StateTrajectory:
    """Full time history of a simulation plus scalar diagnostics.

    ``phi`` and ``mu`` have ``n_steps + 1`` entries; ``mass`` is the
    integral of phi, ``energy`` the nonlocal free energy, and
    ``separation`` the distance ``1 - max|phi|`` to the pure phases.
    """

    grid: Grid
    dt: float
    phi: tuple[ScalarField, ...]
    mu: tuple[ScalarField, ...]
    mass: np.ndarray
    energy: np.ndarray
    separation: np.ndarray

    @property
    def n_steps(self) -> int:
        return len(self.phi) - 1

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.phi))


def cfl_number(v: VectorField, dt: float) -> float:
    vmax = max(float(np.abs(c.data).max()) for c in v.components)
    return dt * vmax / v.grid.hmin


def _check_cfl(v: VectorField, dt: float) -> None:
    c = cfl_number(v, dt)
    if c > CFL_LIMIT:
        raise CflError(
            f"advective CFL number {c:.4f} exceeds {CFL_LIMIT}: "
            f"dt = {dt:.6e}, min cell width = {v.grid.hmin:.6e}")


def energy(phi: ScalarField, kernel: KernelTable, pot: PotentialParams) -> float:
    """Nonlocal free energy: -1/2 <K*phi, phi> + integral of F(phi)."""
    interaction = -0.5 * inner(convolve(kernel, phi), phi)
    return interaction + reduce(potential_field(phi, 0, pot), "integral")


def state_step(phi_n: ScalarField, v: VectorField, kernel: KernelTable,
               pot: PotentialParams,
               params: StateParams) -> tuple[ScalarField, ScalarField]:
    """One semi-implicit step; returns (phi at the new level, its mu).

    The nonlinear system ``u/dt - lap F'(u) = b`` is solved by Newton
    with the update damped (halved) until the iterate stays strictly
    inside ``(-1 + guard, 1 - guard)``, which the singular entropy
    requires.  Residuals are measured in the cell-weighted L2 norm.
    """
    grid = phi_n.grid
    if v.grid != grid or kernel.grid != grid:
        raise StepError("phase field, velocity, and kernel grids differ")
    amax = float(np.abs(phi_n.data).max())
    if amax >= 1.0 - params.guard:
        raise StepError(
            f"phase field is not separated: max |phi| = {amax:.8f} "
            f"reaches 1 - guard = {1.0 - params.guard:.8f}")
    _check_cfl(v, params.dt)

    hs = grid.h
    dt = params.dt
    arr = phi_n.data
    conv = _convolve_arr(kernel, arr, kernel._khat)
    transport = stencils.divergence([arr * c.data for c in v.components], hs)
    b = arr / dt - transport - stencils.laplacian(conv, hs)

    # the exact solution carries the old mean; the iterate starts there
    # and every update below is mean-free, so solver tolerance cannot
    # pollute the mass
    u = arr.copy()
    vol = grid.cell_volume

    res = np.inf
    for it in range(params.newton_max + 1):
        r = u / dt - stencils.laplacian(potential_eval(u, 1, pot), hs) - b
        r -= r.mean()
        res = float(np.sqrt(np.vdot(r, r).real * vol))
        if res <= params.newton_tol:
            break
        if it == params.newton_max:
            raise NewtonError(
                f"implicit step stalled at residual {res:.3e} after "
                f"{params.newton_max} iterations (tol {params.newton_tol:.1e})",
                residual=res, iterations=it)
        d = potential_eval(u, 2, pot)
        y, _ = solve_screened_newton(d, dt, -r, hs)
        delta = y / d
        delta -= delta.mean()
        alpha = 1.0
        while float(np.abs(u + alpha * delta).max()) >= 1.0 - params.guard:
            alpha *= 0.5
            if alpha < _MIN_DAMPING:
                raise NewtonError(
                    f"Newton damping underflow at residual {res:.3e}: "
                    "iterate pinned against the separation guard",
                    residual=res, iterations=it)
        u = u + alpha * delta

    mu = potential_eval(u, 1, pot) - conv
    return ScalarField(grid, u), ScalarField(grid, mu)


def solve_screened_newton(d: np.ndarray, dt: float, rhs: np.ndarray,
                          hs: tuple[float, ...]):
    """Solve ``(I/dt - lap diag(d)) delta = rhs`` via the SPD core.

    Substituting ``y = d*delta`` turns the nonsymmetric Newton system
    into ``(diag(1/(d dt)) - lap) y = rhs``, which is SPD.  Exposed
    because the linearized and adjoint sweeps reuse the identical
    substitution (transposed, the factors commute the other way).
    """
    return solve_screened(1.0 / (d * dt), rhs, hs)


def simulate(phi0: ScalarField, v: ControlField, kernel: KernelTable,
             pot: PotentialParams, params: StateParams) -> StateTrajectory:
    """Run ``n_steps`` steps with slice ``v.slices[n]`` active on step n."""
    grid = phi0.grid
    if v.n_slices != params.n_steps:
        raise StepError(
            f"control has {v.n_slices} slices but the run needs "
            f"{params.n_steps}")
    if abs(v.dt - params.dt) > 1e-12 * params.dt:
        raise StepError(
            f"control dt {v.dt!r} does not match solver dt {params.dt!r}")
    if abs(float(phi0.data.mean())) >= 1.0:
        raise StepError("initial datum mean must lie strictly inside (-1, 1)")

    phis = [phi0]
    mus = [potential_field(phi0, 1, pot) - convolve(kernel, phi0)]
    for n in range(params.n_steps):
        try:
            phi_next, mu_next = state_step(phis[-1], v.slices[n], kernel,
                                           pot, params)
        except (StepError, NewtonError) as e:
            raise type(e)(f"step {n}: {e.args[0]}", *e.args[1:]) from e
        phis.append(phi_next)
        mus.append(mu_next)

    mass = np.array([reduce(p, "integral") for p in phis])
    en = np.array([energy(p, kernel, pot) for p in phis])
    sep = np.array([1.0 - float(np.abs(p.data).max()) for p in phis])
    for a in (mass, en, sep):
        a.setflags(write=False)
    return StateTrajectory(grid=grid, dt=params.dt, phi=tuple(phis),
                           mu=tuple(mus), mass=mass, energy=en,
                           separation=sep)


def energy_identity_residual(traj: StateTrajectory, v: ControlField,
                             kernel: KernelTable,
                             pot: PotentialParams) -> np.ndarray:
    """Cumulative defect of the discrete energy balance, per time level.

    Testing the scheme against mu gives, exactly up to Newton residual,

        E(phi^m) - E(phi^0)
          + sum_{n<m} dt [ <div(phi^n v^n), mu^{n+1}> + |grad mu^{n+1}|^2 ]
          = - sum_{n<m} [ <F''(s) d, d>/2 + <K*d, d>/2 ],   d = phi^{n+1}-phi^n,

    whose right side is the one-sided convex-splitting slack, O(dt) after
    summation.  The returned series is the left side; it vanishes at
    first order under dt refinement and is nonpositive for a kernel with
    nonnegative transform (that is the dissipation statement).
    """
    n_steps = traj.n_steps
    if v.n_slices != n_steps:
        raise StepError(
            f"control has {v.n_slices} slices but the trajectory has "
            f"{n_steps} steps")
    hs = traj.grid.h
    vol = traj.grid.cell_volume
    out = np.zeros(n_steps + 1)
    cum = 0.0
    for n in range(n_steps):
        mu1 = traj.mu[n + 1].data
        gmu = stencils.gradient(mu1, hs)
        flux = [traj.phi[n].data * c.data for c in v.slices[n].components]
        transport = float(np.vdot(stencils.divergence(flux, hs), mu1).real * vol)
        diss = sum(float(np.vdot(g, g).real) for g in gmu) * vol
        cum += traj.dt * (transport + diss)
        out[n + 1] = (traj.energy[n + 1] - traj.energy[0]) + cum
    return out
