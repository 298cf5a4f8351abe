"""Registered self-checks, one suite per module.

``run_verify`` executes fast, deterministic versions of each module's
defining properties: transpose identities for the stencils, dual-route
oracles for the spectral convolution, projector identities, mass and
energy behavior of the state scheme, the adjoint duality certificate,
gradient-vs-FD agreement, and artifact round-trips.  Acceptance-scale
versions of the same properties live in the test suite; this module is
what the command line runs on demand.

The registry is the contract: every library module must keep at least
one check here, and a meta-test enumerates the keys so silently losing
a suite fails loudly.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import stencils
from .config import parse_config
from .control import ControlField, inner_q
from .errors import ConfigError, SingularPotentialError
from .fields import (ScalarField, VectorField, inner, inner_vector, make_grid,
                     norm_l2, norm_l2_vector, reduce)
from .kernels import KernelSpec, KernelTable, build_kernel, convolve
from .leray import (ControlBounds, box_violation, divergence_linf,
                    leray_project, project_to_admissible, random_solenoidal)
from .optimizer import (ControlProblem, OptimizerOptions,
                        fd_directional_derivative, projected_gradient_descent,
                        reduced_gradient)
from .potential import PotentialParams, potential_eval
from .sensitivity import (TargetData, adjoint_solve, duality_residual,
                          linearized_solve)
from .state import StateParams, energy, simulate
from .synthetic import smooth_field, synthetic_control

__all__ = ["CheckResult", "REGISTRY", "run_verify", "direct_convolve",
           "direct_nonlocal_energy"]


@dataclass(frozen=True)
class CheckResult:
    check: str
    value: float
    threshold: float
    passed: bool


def _le(check: str, value: float, threshold: float) -> CheckResult:
    return CheckResult(check, float(value), float(threshold),
                       bool(value <= threshold))


def _ge(check: str, value: float, threshold: float) -> CheckResult:
    return CheckResult(check, float(value), float(threshold),
                       bool(value >= threshold))


# ---------------------------------------------------------------- oracles

def direct_convolve(kernel: KernelTable, f: ScalarField) -> ScalarField:
    """O(N^2) quadrature of the domain-restricted convolution.

    Same sampled kernel table, same midpoint rule, no transforms: this
    is the independent route the spectral path is checked against.
    """
    g = f.grid
    out = np.zeros(g.shape)
    for i in np.ndindex(*g.shape):
        acc = 0.0
        for j in np.ndindex(*g.shape):
            idx = tuple(a - b + n - 1 for a, b, n in zip(i, j, g.n))
            acc += kernel.samples[idx] * f.data[j]
        out[i] = acc
    return ScalarField(g, out * g.cell_volume)


def direct_nonlocal_energy(kernel: KernelTable, phi: ScalarField,
                           pot: PotentialParams) -> float:
    """Energy through the direct convolution route."""
    conv = direct_convolve(kernel, phi)
    entropy = reduce(ScalarField(phi.grid, potential_eval(phi.data, 0, pot)),
                     "integral")
    return -0.5 * inner(conv, phi) + entropy


# ----------------------------------------------------------------- fields

def _check_stencil_transpose() -> CheckResult:
    g = make_grid(2, 24, 1.0)
    f = smooth_field(g, 11, 1.0)
    w = VectorField(g, (smooth_field(g, 12, 1.0), smooth_field(g, 13, 1.0)))
    lhs = inner_vector(stencils_gradient(f), w)
    rhs = inner(f, stencils_divergence(w))
    scale = norm_l2(f) * norm_l2_vector(w)
    return _le("fields.gradient-divergence-transpose",
               abs(lhs + rhs) / scale, 1e-13)


def stencils_gradient(f: ScalarField) -> VectorField:
    return VectorField.from_arrays(
        f.grid, stencils.gradient(f.data, f.grid.h))


def stencils_divergence(w: VectorField) -> ScalarField:
    return ScalarField(w.grid, stencils.divergence(
        [c.data for c in w.components], w.grid.h))


def _check_laplacian_selfadjoint() -> CheckResult:
    g = make_grid(2, 24, 1.0)
    f = smooth_field(g, 14, 1.0)
    q = smooth_field(g, 15, 1.0)
    lf = stencils.laplacian(f.data, g.h)
    lq = stencils.laplacian(q.data, g.h)
    lhs = inner(ScalarField(g, lf), q)
    rhs = inner(f, ScalarField(g, lq))
    return _le("fields.laplacian-selfadjoint",
               abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300), 1e-13)


# -------------------------------------------------------------- potential

def _check_potential_derivatives() -> CheckResult:
    pot = PotentialParams(theta=0.2)
    s = np.linspace(-0.95, 0.95, 41)
    h = 1e-5
    worst = 0.0
    for order in (0, 1, 2):
        fd = (potential_eval(s + h, order, pot)
              - potential_eval(s - h, order, pot)) / (2.0 * h)
        exact = potential_eval(s, order + 1, pot)
        worst = max(worst, np.max(np.abs(fd - exact)
                                  / np.maximum(np.abs(exact), 1.0)))
    return _le("potential.derivative-consistency", worst, 1e-7)


def _check_potential_guard() -> CheckResult:
    pot = PotentialParams(theta=0.2)
    missed = 0
    for s in (1.0, -1.0, 1.5, -2.0):
        try:
            potential_eval(s, 1, pot)
            missed += 1
        except SingularPotentialError:
            pass
    return _le("potential.singularity-guard", float(missed), 0.0)


# ---------------------------------------------------------------- kernels

def _check_convolution_oracle() -> CheckResult:
    g = make_grid(2, 8, 1.0)
    kern = build_kernel(g, KernelSpec("gaussian"))
    f = smooth_field(g, 21, 0.7)
    fast = convolve(kern, f)
    slow = direct_convolve(kern, f)
    rel = norm_l2(fast - slow) / max(norm_l2(slow), 1e-300)
    return _le("kernels.convolution-oracle", rel, 1e-12)


def _check_energy_oracle() -> CheckResult:
    g = make_grid(2, 8, 1.0)
    kern = build_kernel(g, KernelSpec("mollified_newtonian"))
    pot = PotentialParams(theta=0.2)
    phi = smooth_field(g, 22, 0.7)
    fast = energy(phi, kern, pot)
    slow = direct_nonlocal_energy(kern, phi, pot)
    rel = abs(fast - slow) / max(abs(slow), 1e-300)
    return _le("kernels.energy-oracle", rel, 1e-12)


# ------------------------------------------------------------------ leray

def _check_leray_annihilates_gradients() -> CheckResult:
    g = make_grid(2, 24, 1.0)
    f = smooth_field(g, 31, 1.0)
    gf = stencils_gradient(f)
    ratio = norm_l2_vector(leray_project(gf)) / norm_l2_vector(gf)
    return _le("leray.annihilates-gradients", ratio, 1e-8)


def _check_leray_fixes_solenoidal() -> CheckResult:
    g = make_grid(2, 24, 1.0)
    v = random_solenoidal(g, 32, 1.0)
    rel = norm_l2_vector(leray_project(v) - v) / norm_l2_vector(v)
    return _le("leray.fixes-solenoidal", rel, 1e-8)


def _check_projection_feasible() -> CheckResult:
    g = make_grid(2, 16, 1.0)
    bounds = ControlBounds((-1.0, -1.0), (1.0, 1.0))
    v = random_solenoidal(g, 33, 2.0)  # sticks out of the box by 2x
    w = project_to_admissible(v, bounds)
    worst = max(box_violation(w, bounds), divergence_linf(w))
    return _le("leray.projection-feasible", worst, 1e-8)


# ------------------------------------------------------------------ state

_POT = PotentialParams(theta=0.2)


def _small_instance(n=16, n_steps=20, seed=41, amp=0.8):
    g = make_grid(2, n, 1.0)
    kern = build_kernel(g, KernelSpec("gaussian", sigma=0.15))
    phi0 = smooth_field(g, 2, 0.4)
    params = StateParams(dt=2e-3, n_steps=n_steps)
    v = synthetic_control(g, params.dt, n_steps, seed, amp)
    return g, kern, phi0, params, v


def _check_mass_conservation() -> CheckResult:
    g, kern, phi0, params, v = _small_instance()
    traj = simulate(phi0, v, kern, _POT, params)
    drift = np.abs(traj.mass - traj.mass[0]).max()
    return _le("state.mass-conservation", drift, 1e-12)


def _check_energy_dissipation() -> CheckResult:
    g, kern, phi0, params, _ = _small_instance(n_steps=10)
    v = ControlField.zeros(g, params.dt, 10)
    traj = simulate(phi0, v, kern, _POT, StateParams(dt=params.dt, n_steps=10))
    return _le("state.energy-dissipation", np.diff(traj.energy).max(), 1e-10)


def _check_separation() -> CheckResult:
    g, kern, phi0, params, v = _small_instance()
    traj = simulate(phi0, v, kern, _POT, params)
    return _ge("state.separation-margin", traj.separation.min(), 1e-6)


# ------------------------------------------------------------ sensitivity

def _check_duality() -> CheckResult:
    g, kern, phi0, params, v = _small_instance(n=12, n_steps=8)
    w = synthetic_control(g, params.dt, 8, 300, 0.5)
    targets = TargetData(
        phi_Q=tuple(smooth_field(g, 500 + n, 0.3) for n in range(8)),
        phi_Omega=smooth_field(g, 600, 0.3), gamma=(1.0, 1.0, 1e-4))
    traj = simulate(phi0, v, kern, _POT, params)
    lin = linearized_solve(traj, v, w, kern, _POT, params)
    adj = adjoint_solve(traj, v, targets, kern, _POT, params)
    from .sensitivity import tracking_derivative
    res = duality_residual(traj, lin, adj, w, targets)
    scale = abs(tracking_derivative(traj, lin[0], targets))
    return _le("sensitivity.duality-identity", res / max(scale, 1e-300), 1e-8)


def _check_linearized_order() -> CheckResult:
    g, kern, phi0, params, v = _small_instance(n=12, n_steps=8)
    w = synthetic_control(g, params.dt, 8, 300, 0.5)
    traj = simulate(phi0, v, kern, _POT, params)
    xi, _ = linearized_solve(traj, v, w, kern, _POT, params)
    rems = []
    for h in (2e-2, 1e-2):
        trp = simulate(phi0, v + h * w, kern, _POT, params)
        rems.append(max(norm_l2(trp.phi[n] - traj.phi[n] - h * xi[n])
                        for n in range(traj.n_steps + 1)))
    order = np.log2(rems[0] / rems[1])
    return _ge("sensitivity.linearized-remainder-order", order, 1.9)


# -------------------------------------------------------------- optimizer

def _recovery_problem(n=12, n_steps=6):
    g, kern, phi0, params, _ = _small_instance(n=n, n_steps=n_steps)
    bounds = ControlBounds((-1.0, -1.0), (1.0, 1.0))
    vdag = synthetic_control(g, params.dt, n_steps, 40, 0.5)
    ref = simulate(phi0, vdag, kern, _POT, params)
    targets = TargetData(phi_Q=tuple(ref.phi[n] for n in range(n_steps)),
                         phi_Omega=ref.phi[n_steps], gamma=(1.0, 1.0, 1e-4))
    return ControlProblem(phi0, kern, _POT, params, targets, bounds)


def _check_gradient_vs_fd() -> CheckResult:
    problem = _recovery_problem()
    params = problem.params
    g = problem.phi0.grid
    v = synthetic_control(g, params.dt, params.n_steps, 100, 0.4)
    w = synthetic_control(g, params.dt, params.n_steps, 300, 0.5)
    traj = problem.solve(v)
    adj = problem.adjoint(traj, v)
    grad = reduced_gradient(traj, adj, v, problem.targets)
    dj = inner_q(grad, w)
    best = min(abs(fd_directional_derivative(problem, v, w, h) - dj)
               / max(abs(dj), 1e-300) for h in (1e-2, 1e-3, 1e-4))
    return _le("optimizer.gradient-vs-fd", best, 1e-6)


def _check_descent_monotone() -> CheckResult:
    problem = _recovery_problem()
    v0 = ControlField.zeros(problem.phi0.grid, problem.params.dt,
                            problem.params.n_steps)
    res = projected_gradient_descent(
        v0, problem, OptimizerOptions(max_iter=3, tol=1e-14))
    return _le("optimizer.descent-monotone",
               np.diff(res.cost_history).max(), 0.0)


# ---------------------------------------------------------------- harness

def _check_fieldio_roundtrip() -> CheckResult:
    from .fieldio import read_field, write_field
    g = make_grid(2, 16, 1.0)
    f = smooth_field(g, 51, 0.9)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "f.nlchf")
        write_field(f, path)
        back = read_field(path)
    same = (back.grid == g) and np.array_equal(back.data, f.data)
    return _le("harness.fieldio-roundtrip", 0.0 if same else 1.0, 0.0)


def _check_csv_roundtrip() -> CheckResult:
    from .fieldio import read_timeseries, write_timeseries
    rows = [(0, 0.0, 1 / 3, -1.234567890123456e-12, 0.25),
            (1, 1e-3, 1 / 3 + 1e-17, -1.3e-12, 0.24)]
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "ts.csv")
        write_timeseries(path, rows)
        back = read_timeseries(path)
    worst = max(abs(back[name][i] - rows[i][k])
                for i in range(2)
                for k, name in enumerate(("step", "time", "mass",
                                          "energy", "separation")))
    return _le("harness.csv-roundtrip", worst, 0.0)


def _check_config_validation() -> CheckResult:
    bad = 0
    try:
        parse_config("")
    except ConfigError:
        bad += 1
    try:
        parse_config("[targets]\ngamma = 0 0 0")
        bad += 1
    except ConfigError:
        pass
    try:
        parse_config("[control]\nvmin = 0.5\nvmax = 0.2")
        bad += 1
    except ConfigError:
        pass
    return _le("harness.config-validation", float(bad), 0.0)


REGISTRY: dict[str, tuple[Callable[[], CheckResult], ...]] = {
    "fields": (_check_stencil_transpose, _check_laplacian_selfadjoint),
    "potential": (_check_potential_derivatives, _check_potential_guard),
    "kernels": (_check_convolution_oracle, _check_energy_oracle),
    "leray": (_check_leray_annihilates_gradients,
              _check_leray_fixes_solenoidal, _check_projection_feasible),
    "state": (_check_mass_conservation, _check_energy_dissipation,
              _check_separation),
    "sensitivity": (_check_duality, _check_linearized_order),
    "optimizer": (_check_gradient_vs_fd, _check_descent_monotone),
    "harness": (_check_fieldio_roundtrip, _check_csv_roundtrip,
                _check_config_validation),
}


def run_verify(modules: list[str] | None = None) -> list[CheckResult]:
    """Run the registered checks; optionally restrict to listed modules."""
    if modules is None:
        modules = list(REGISTRY)
    unknown = set(modules) - set(REGISTRY)
    if unknown:
        raise ConfigError(f"unknown verify module(s): {sorted(unknown)}")
    out = []
    for name in modules:
        for fn in REGISTRY[name]:
            out.append(fn())
    return out
