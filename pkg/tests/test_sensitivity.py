"""Linearized state system and its exact-transpose adjoint.

The backbone check is the duality identity: the pairing of the adjoint
with the control direction must reproduce the tracking derivative
computed through the linearized system, to rounding.  Everything the
optimizer believes about gradients rests on this.
"""

import numpy as np
import pytest

from nlch import (ControlField, KernelSpec, PotentialParams, StateParams,
                  TargetData, adjoint_flow, adjoint_solve, build_kernel,
                  duality_residual, gradient, linearized_solve, make_grid,
                  norm_l2, simulate, smooth_field, synthetic_control,
                  tracking_derivative)

POT = PotentialParams(theta=0.2)


def instance(n=16, n_steps=20, dt=2e-3, seed_phi=2, seed_v=100):
    g = make_grid(2, n, 1.0)
    kern = build_kernel(g, KernelSpec("gaussian", sigma=0.15))
    params = StateParams(dt=dt, n_steps=n_steps)
    phi0 = smooth_field(g, seed_phi, 0.4)
    vbar = synthetic_control(g, dt, n_steps, seed_v, 0.8)
    traj = simulate(phi0, vbar, kern, POT, params)
    return g, kern, params, phi0, vbar, traj


def tracking_targets(g, n_steps, gamma=(1.0, 1.0, 1e-4)):
    return TargetData(
        phi_Q=tuple(smooth_field(g, 500 + n, 0.3) for n in range(n_steps)),
        phi_Omega=smooth_field(g, 600, 0.3), gamma=gamma)


def test_zero_direction_gives_zero_solution():
    g, kern, params, _, vbar, traj = instance(n=12, n_steps=6)
    w = ControlField.zeros(g, params.dt, params.n_steps)
    xi, eta = linearized_solve(traj, vbar, w, kern, POT, params)
    assert all(np.all(x.data == 0.0) for x in xi)
    assert all(np.all(e.data == 0.0) for e in eta)


def test_linearized_solution_scales_linearly():
    g, kern, params, _, vbar, traj = instance(n=12, n_steps=6)
    w = synthetic_control(g, params.dt, params.n_steps, 300, 0.5)
    xi1, _ = linearized_solve(traj, vbar, w, kern, POT, params)
    xi2, _ = linearized_solve(traj, vbar, w * 2.0, kern, POT, params)
    for a, b in zip(xi1, xi2):
        assert norm_l2(b - a * 2.0) <= 1e-10 * max(norm_l2(b), 1e-30)


def test_linearization_is_second_order_accurate():
    # remainder of S(v + h w) - S(v) - h xi shrinks at order >= 1.9
    g, kern, params, phi0, vbar, traj = instance()
    w = synthetic_control(g, params.dt, params.n_steps, 300, 0.5)
    xi, _ = linearized_solve(traj, vbar, w, kern, POT, params)
    rems = []
    for h in (2e-2, 1e-2, 5e-3):
        pert = simulate(phi0, vbar + h * w, kern, POT, params)
        rem = max(norm_l2(pert.phi[n] - traj.phi[n] - h * xi[n])
                  for n in range(params.n_steps + 1))
        rems.append(rem)
    orders = [np.log2(rems[i] / rems[i + 1]) for i in range(2)]
    assert min(orders) >= 1.9


def test_adjoint_vanishes_without_tracking_sources():
    g, kern, params, _, vbar, traj = instance(n=12, n_steps=6)
    targets = tracking_targets(g, params.n_steps, gamma=(0.0, 0.0, 1.0))
    adj = adjoint_solve(traj, vbar, targets, kern, POT, params)
    assert all(np.all(p.data == 0.0) for p in adj.p)
    assert all(np.all(q.data == 0.0) for q in adj.q)


def test_adjoint_terminal_slice_is_terminal_misfit():
    g, kern, params, _, vbar, traj = instance(n=12, n_steps=6)
    targets = tracking_targets(g, params.n_steps)
    adj = adjoint_solve(traj, vbar, targets, kern, POT, params)
    want = (traj.phi[params.n_steps] - targets.phi_Omega) * targets.gamma[1]
    assert np.array_equal(adj.p[params.n_steps].data, want.data)


def test_duality_identity_random_instances():
    g, kern, params, _, vbar, traj = instance()
    targets = tracking_targets(g, params.n_steps)
    adj = adjoint_solve(traj, vbar, targets, kern, POT, params)
    for seed in (300, 301, 302):
        w = synthetic_control(g, params.dt, params.n_steps, seed, 0.5)
        lin = linearized_solve(traj, vbar, w, kern, POT, params)
        res = duality_residual(traj, lin, adj, w, targets)
        scale = abs(tracking_derivative(traj, lin[0], targets))
        assert res <= 1e-8 * max(scale, 1e-300)


def test_duality_trivial_cases():
    g, kern, params, _, vbar, traj = instance(n=12, n_steps=6)
    # no tracking: both sides vanish identically
    targets0 = tracking_targets(g, params.n_steps, gamma=(0.0, 0.0, 1.0))
    adj0 = adjoint_solve(traj, vbar, targets0, kern, POT, params)
    w = synthetic_control(g, params.dt, params.n_steps, 300, 0.5)
    lin = linearized_solve(traj, vbar, w, kern, POT, params)
    assert duality_residual(traj, lin, adj0, w, targets0) == 0.0
    assert tracking_derivative(traj, lin[0], targets0) == 0.0
    # zero direction: xi = 0, pairing 0
    targets = tracking_targets(g, params.n_steps)
    adj = adjoint_solve(traj, vbar, targets, kern, POT, params)
    wz = ControlField.zeros(g, params.dt, params.n_steps)
    linz = linearized_solve(traj, vbar, wz, kern, POT, params)
    assert duality_residual(traj, linz, adj, wz, targets) <= 1e-300
    assert tracking_derivative(traj, linz[0], targets) == 0.0


def test_adjoint_flow_is_scaled_pressure_gradient():
    g, kern, params, _, vbar, traj = instance(n=12, n_steps=6)
    targets = tracking_targets(g, params.n_steps)
    adj = adjoint_solve(traj, vbar, targets, kern, POT, params)
    for n in (0, 3, 5):
        got = adjoint_flow(traj, adj, n)
        want = gradient(adj.p[n]) * -1.0
        for gc, wc, in zip(got.components, want.components):
            assert np.array_equal(gc.data, wc.data * traj.phi[n].data)
