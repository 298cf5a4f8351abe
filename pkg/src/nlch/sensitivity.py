"""Linearized and adjoint sweeps of the discrete state map.

Both systems are read off the implemented time step, not discretized
anew.  Writing one step of the state update as G(phi1; phi0, v) = 0 with

    A_{n+1} = I/dt - lap o diag(F''(phi_{n+1}))     (implicit part)
    B_n     = I/dt - div(. v_n) - lap o (K * .)     (explicit part)

the derivative in a control direction w obeys the forward recursion

    A_{n+1} xi_{n+1} = B_n xi_n - div(phi_n w_n),        xi_0 = 0,

and the multiplier for the tracking cost obeys the transposed one,

    A_N^T p_{N-1} = p_N / dt,                      p_N = g2 (phi_N - phi_Om),
    A_m^T p_{m-1} = B_m^T p_m + g1 (phi_m - phi_Q^m),    m = N-1 .. 1,

with A^T z = z/dt - F'' lap(z) and B^T z = z/dt + v.grad(z) - K*(lap z).
The index placement is what the transpose dictates: the multiplier slice
p[n] pairs with control slice n through the term -<phi_n grad p[n], w_n>,
and the tracking sum runs over the left endpoints n = 0..N-1 only, so no
g1 source enters at the terminal level.

Because A = S o diag(F'') with S the SPD screened operator, both sweeps
reduce to the same preconditioned solve: forward solves S(F'' xi) = rhs,
backward solves S p = rhs / F''.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import stencils
from .control import ControlField
from .errors import ConfigError, StepError
from .fields import ScalarField, VectorField, gradient, inner, inner_vector
from .kernels import KernelTable, _convolve_arr
from .leray import leray_project
from .potential import PotentialParams, potential_eval
from .state import StateParams, StateTrajectory, solve_screened_newton


@dataclass(frozen=True)
class TargetData:
    """Tracking data and cost weights.

    ``phi_Q`` is either a single field (constant-in-time target) or one
    field per time step; ``gamma`` weights the running misfit, terminal
    misfit, and control energy, in that order.
    """

    phi_Q: ScalarField | tuple[ScalarField, ...]
    phi_Omega: ScalarField
    gamma: tuple[float, float, float]

    def __post_init__(self):
        g = self.gamma
        if len(g) != 3 or any(not np.isfinite(x) or x < 0.0 for x in g):
            raise ConfigError(
                f"cost weights must be three nonnegative finite reals, got {g}")
        if sum(g) == 0.0:
            raise ConfigError("cost weights must not all be zero")

    def tracking_target(self, n: int) -> ScalarField:
        """Running target on time level n."""
        if isinstance(self.phi_Q, ScalarField):
            return self.phi_Q
        return self.phi_Q[n]


@dataclass(frozen=True, eq=False)
class AdjointTrajectory:
    """Backward multipliers: p has n_steps+1 slices, q[n] = -lap p[n]."""

    p: tuple[ScalarField, ...]
    q: tuple[ScalarField, ...]


def _check_layout(traj: StateTrajectory, v: ControlField, what: str) -> None:
    if v.grid != traj.grid:
        raise StepError(f"{what} lives on a different grid than the trajectory")
    if v.n_slices != traj.n_steps:
        raise StepError(
            f"{what} has {v.n_slices} slices but the trajectory has "
            f"{traj.n_steps} steps")


def _apply_b(arr: np.ndarray, v: VectorField, kernel: KernelTable,
             hs: tuple[float, ...], dt: float) -> np.ndarray:
    """Explicit-part operator B: z/dt - div(z v) - lap(K*z)."""
    out = arr / dt
    out -= stencils.divergence([arr * c.data for c in v.components], hs)
    out -= stencils.laplacian(_convolve_arr(kernel, arr, kernel._khat), hs)
    return out


def _apply_bt(arr: np.ndarray, v: VectorField, kernel: KernelTable,
              hs: tuple[float, ...], dt: float) -> np.ndarray:
    """Transpose of B: z/dt + v.grad(z) - K*(lap z)."""
    grads = stencils.gradient(arr, hs)
    out = arr / dt
    for g, c in zip(grads, v.components):
        out += c.data * g
    out -= _convolve_arr(kernel, stencils.laplacian(arr, hs), kernel._khat)
    return out


def linearized_solve(traj: StateTrajectory, v_bar: ControlField,
                     w: ControlField, kernel: KernelTable,
                     pot: PotentialParams, params: StateParams
                     ) -> tuple[tuple[ScalarField, ...], tuple[ScalarField, ...]]:
    """Derivative (xi, eta) of the discrete state map in direction w."""
    _check_layout(traj, v_bar, "base control")
    _check_layout(traj, w, "direction")
    grid = traj.grid
    hs = grid.h
    dt = params.dt

    xi = [np.zeros(grid.shape)]
    eta = [np.zeros(grid.shape)]
    for n in range(traj.n_steps):
        rhs = _apply_b(xi[n], v_bar.slices[n], kernel, hs, dt)
        flux = [traj.phi[n].data * c.data for c in w.slices[n].components]
        rhs -= stencils.divergence(flux, hs)
        d = potential_eval(traj.phi[n + 1].data, 2, pot)
        y, _ = solve_screened_newton(d, dt, rhs, hs)
        xi.append(y / d)
        eta.append(d * xi[n + 1]
                   - _convolve_arr(kernel, xi[n], kernel._khat))
    return (tuple(ScalarField(grid, a) for a in xi),
            tuple(ScalarField(grid, a) for a in eta))


def adjoint_solve(traj: StateTrajectory, v_bar: ControlField,
                  targets: TargetData, kernel: KernelTable,
                  pot: PotentialParams,
                  params: StateParams) -> AdjointTrajectory:
    """Backward multiplier sweep; exact transpose of the linearized map.

    The terminal slice is the assignment g2*(phi(T) - phi_Omega); no
    solve touches it.
    """
    _check_layout(traj, v_bar, "base control")
    grid = traj.grid
    hs = grid.h
    dt = params.dt
    g1, g2, _ = targets.gamma
    n_steps = traj.n_steps

    p = [None] * (n_steps + 1)
    p[n_steps] = g2 * (traj.phi[n_steps].data - targets.phi_Omega.data)
    rhs = p[n_steps] / dt
    for m in range(n_steps, 0, -1):
        d = potential_eval(traj.phi[m].data, 2, pot)
        y, _ = solve_screened_newton(d, dt, rhs / d, hs)
        p[m - 1] = y
        if m > 1:
            rhs = _apply_bt(p[m - 1], v_bar.slices[m - 1], kernel, hs, dt)
            rhs += g1 * (traj.phi[m - 1].data
                         - targets.tracking_target(m - 1).data)
    p_fields = tuple(ScalarField(grid, a) for a in p)
    q_fields = tuple(ScalarField(grid, -stencils.laplacian(a, hs)) for a in p)
    return AdjointTrajectory(p=p_fields, q=q_fields)


def tracking_derivative(traj: StateTrajectory, xi: tuple[ScalarField, ...],
                        targets: TargetData) -> float:
    """Directional derivative of the tracking cost through xi."""
    g1, g2, _ = targets.gamma
    n_steps = traj.n_steps
    total = 0.0
    if g1 > 0.0:
        for n in range(n_steps):
            misfit = traj.phi[n] - targets.tracking_target(n)
            total += g1 * traj.dt * inner(misfit, xi[n])
    if g2 > 0.0:
        total += g2 * inner(traj.phi[n_steps] - targets.phi_Omega, xi[n_steps])
    return total


def adjoint_flow(traj: StateTrajectory, adj: AdjointTrajectory,
                 n: int) -> VectorField:
    """Discrete representative of p grad(phi) on control slice n.

    The transpose of the control-to-state coupling div(phi_n w_n) pairs
    w_n with -phi_n grad(p[n]) exactly.  Continuously that equals
    p grad(phi) modulo a full gradient (which the projector kills), but
    the stencils satisfy no pointwise product rule, so substituting
    p grad(phi) literally would cost an O(h^2) consistency defect.  All
    duality and gradient assembly therefore goes through this form.
    """
    return gradient(adj.p[n]) * (traj.phi[n] * -1.0)


def duality_residual(traj: StateTrajectory,
                     lin: tuple[tuple[ScalarField, ...], tuple[ScalarField, ...]],
                     adj: AdjointTrajectory, w: ControlField,
                     targets: TargetData) -> float:
    """Defect of the transpose identity for a solenoidal direction w.

    Compares -sum_n dt <P_sigma(adjoint_flow(n)), w_n> against the
    tracking derivative carried by xi.  For the transpose-built adjoint
    the two agree to solver tolerance, step size plays no role.  The
    identity needs div w = 0; for general w the P_sigma on the left has
    nothing to annihilate it against.
    """
    _check_layout(traj, w, "direction")
    xi = lin[0]
    lhs = 0.0
    for n in range(traj.n_steps):
        lhs -= traj.dt * inner_vector(
            leray_project(adjoint_flow(traj, adj, n)), w.slices[n])
    return abs(lhs - tracking_derivative(traj, xi, targets))
