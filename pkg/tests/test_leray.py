"""Solenoidal projection and the admissible-set (box + solenoidal) metric
projection.

The oracle for the metric projection is a dense QP solved by cvxpy: with
uniform cell volumes the weighted projection equals the Euclidean one, so
minimize ||u - v||^2 subject to the exact stencil divergence as a linear
equality and the componentwise box.  The alternating-projection route
under test must land on the same point.
"""

import numpy as np
import pytest

from nlch import (ControlBounds, ControlField, FieldError, ScalarField,
                  VectorField, box_violation, divergence, divergence_linf,
                  gradient, inner_vector, leray_project, make_grid, norm_q,
                  project_control, project_to_admissible, random_solenoidal)
from nlch.fields import norm_l2_vector
from nlch import stencils

cvxpy = pytest.importorskip("cvxpy")


def divergence_matrix(grid):
    """Dense matrix of the stencil divergence acting on stacked components."""
    ncell = grid.num_cells
    cols = []
    for axis in range(grid.dim):
        for j in range(ncell):
            comps = [np.zeros(grid.shape) for _ in range(grid.dim)]
            comps[axis].flat[j] = 1.0
            cols.append(stencils.divergence(comps, grid.h).ravel())
    return np.array(cols).T


def qp_project(v, bounds):
    """Exact metric projection onto {div u = 0} intersect box, via cvxpy."""
    grid = v.grid
    ncell = grid.num_cells
    A = divergence_matrix(grid)
    target = np.concatenate([c.data.ravel() for c in v.components])
    u = cvxpy.Variable(target.size)
    cons = [A @ u == 0]
    for axis in range(grid.dim):
        seg = u[axis * ncell:(axis + 1) * ncell]
        cons += [seg >= bounds.vmin[axis], seg <= bounds.vmax[axis]]
    prob = cvxpy.Problem(cvxpy.Minimize(cvxpy.sum_squares(u - target)), cons)
    # default interior-point accuracy (~1e-5 on the solution here) would
    # dominate the comparison; the oracle must out-resolve the route under test
    prob.solve(solver=cvxpy.CLARABEL,
               tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    assert prob.status == cvxpy.OPTIMAL
    sol = np.asarray(u.value)
    return VectorField.from_arrays(
        grid, [sol[a * ncell:(a + 1) * ncell].reshape(grid.shape)
               for a in range(grid.dim)])


def random_vector(grid, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return VectorField.from_arrays(
        grid, [scale * rng.standard_normal(grid.shape)
               for _ in range(grid.dim)])


# ---------------------------------------------------------------- leray


def test_leray_annihilates_gradients():
    g = make_grid(2, 32, 1.0)
    rng = np.random.default_rng(8)
    f = ScalarField(g, rng.standard_normal(g.shape))
    gf = gradient(f)
    assert norm_l2_vector(leray_project(gf)) <= 1e-8 * norm_l2_vector(gf)


def test_leray_fixes_solenoidal_fields():
    g = make_grid(2, 32, 1.0)
    v = random_solenoidal(g, seed=4, amplitude=1.0)
    assert norm_l2_vector(leray_project(v) - v) <= 1e-8 * norm_l2_vector(v)


def test_leray_zero_input():
    g = make_grid(2, 16, 1.0)
    out = leray_project(VectorField.zeros(g))
    assert np.all(np.concatenate([c.data.ravel() for c in out.components]) == 0.0)


def test_leray_idempotent():
    g = make_grid(2, 32, 1.0)
    for seed in (1, 2, 3):
        v = random_vector(g, seed)
        pv = leray_project(v)
        assert norm_l2_vector(leray_project(pv) - pv) <= 1e-10 * norm_l2_vector(v)


def test_leray_self_adjoint():
    g = make_grid(2, 32, 1.0)
    for seed in (10, 20):
        v, w = random_vector(g, seed), random_vector(g, seed + 5)
        lhs = inner_vector(leray_project(v), w)
        rhs = inner_vector(v, leray_project(w))
        assert abs(lhs - rhs) <= 1e-8 * norm_l2_vector(v) * norm_l2_vector(w)


def test_leray_output_is_divergence_free():
    g = make_grid(3, 8, 1.0)
    v = random_vector(g, 6)
    assert divergence_linf(leray_project(v)) <= 1e-8 * norm_l2_vector(v)


# ---------------------------------------------- solenoidal sample fields


def test_random_solenoidal_is_divergence_free():
    for dim, n in ((2, 24), (3, 8)):
        g = make_grid(dim, n, 1.0)
        v = random_solenoidal(g, seed=9, amplitude=0.7)
        assert divergence_linf(v) <= 1e-10 * 0.7


def test_random_solenoidal_determinism_and_amplitude():
    g = make_grid(2, 16, 1.0)
    a = random_solenoidal(g, seed=12, amplitude=0.5)
    b = random_solenoidal(g, seed=12, amplitude=0.5)
    for ca, cb in zip(a.components, b.components):
        assert np.array_equal(ca.data, cb.data)
    sup = max(np.abs(c.data).max() for c in a.components)
    assert sup == pytest.approx(0.5, rel=1e-12)
    z = random_solenoidal(g, seed=12, amplitude=0.0)
    assert all(np.all(c.data == 0.0) for c in z.components)


# ------------------------------------------------- admissible projection


def test_member_is_fixed_point():
    g = make_grid(2, 16, 1.0)
    bounds = ControlBounds((-1.0, -1.0), (1.0, 1.0))
    v = random_solenoidal(g, seed=3, amplitude=0.5)
    out = project_to_admissible(v, bounds)
    assert norm_l2_vector(out - v) <= 1e-12 * norm_l2_vector(v)


def test_projection_restores_both_feasibilities():
    g = make_grid(2, 16, 1.0)
    bounds = ControlBounds((-0.4, -0.4), (0.4, 0.4))
    # solenoidal field exceeding the box in a patch
    v = random_solenoidal(g, seed=7, amplitude=1.0)
    out = project_to_admissible(v, bounds, tol=1e-9, max_iter=4000)
    assert box_violation(out, bounds) <= 1e-8
    assert divergence_linf(out) <= 1e-8


def test_projection_of_scaled_solenoidal_lands_in_box():
    g = make_grid(2, 16, 1.0)
    bounds = ControlBounds((-1.0, -1.0), (1.0, 1.0))
    v = random_solenoidal(g, seed=15, amplitude=1.0) * 10.0
    out = project_to_admissible(v, bounds, tol=1e-9, max_iter=4000)
    sup = max(np.abs(c.data).max() for c in out.components)
    assert sup <= 1.0 + 1e-8


def test_projection_matches_qp_oracle_single_slice():
    g = make_grid(2, 8, 1.0)
    bounds = ControlBounds((-0.3, -0.25), (0.35, 0.3))
    v = random_vector(g, 44, scale=0.8)
    want = qp_project(v, bounds)
    got = project_to_admissible(v, bounds, tol=1e-10, max_iter=20000)
    dist_got = norm_l2_vector(got - v)
    dist_want = norm_l2_vector(want - v)
    assert abs(dist_got - dist_want) <= 1e-6
    assert norm_l2_vector(got - want) <= 1e-6


def test_projection_matches_qp_oracle_two_slices():
    # slices are coupled through nothing: the admissible set is a product,
    # so the control-trajectory projection must solve each slice's QP
    g = make_grid(2, 8, 1.0)
    bounds = ControlBounds((-0.3, -0.3), (0.3, 0.3))
    slices = (random_vector(g, 61, scale=0.6), random_vector(g, 62, scale=0.6))
    v = ControlField(g, dt=0.1, slices=slices)
    got = project_control(v, bounds, tol=1e-10, max_iter=20000)
    for k in range(2):
        want = qp_project(slices[k], bounds)
        gap = norm_l2_vector(got.slices[k] - want)
        assert gap <= 1e-6
        d_got = norm_l2_vector(got.slices[k] - slices[k])
        d_want = norm_l2_vector(want - slices[k])
        assert abs(d_got - d_want) <= 1e-6


def test_bounds_validation():
    with pytest.raises(FieldError, match="component 1"):
        ControlBounds((-1.0, 0.5), (1.0, 0.2))
    with pytest.raises(FieldError):
        ControlBounds((-1.0,), (1.0, 1.0))
    # box must contain zero for an admissible zero control
    with pytest.raises(FieldError):
        ControlBounds((0.2, -1.0), (1.0, 1.0))
