"""Sampled interaction kernels and the zero-extension convolution.

The oracle is the literal O(N^2) double sum over cell pairs; the FFT
route under test must reproduce it to near machine precision, which is
the whole justification for trusting the fast path downstream.
"""

import numpy as np
import pytest

from nlch import (KernelError, KernelSpec, ScalarField, build_kernel,
                  convolve, grad_convolve, inner, make_grid, norm_l2)


def brute_force_convolve(kernel, f):
    """Direct quadrature sum over all cell pairs; no FFT anywhere."""
    grid = f.grid
    n = grid.n
    out = np.zeros(grid.shape)
    for i in np.ndindex(*n):
        acc = 0.0
        for j in np.ndindex(*n):
            off = tuple(a - b + m - 1 for a, b, m in zip(i, j, n))
            acc += kernel.samples[off] * f.data[j]
        out[i] = acc
    return ScalarField(grid, out * grid.cell_volume)


def brute_force_grad_convolve(kernel, f, axis):
    grid = f.grid
    n = grid.n
    out = np.zeros(grid.shape)
    for i in np.ndindex(*n):
        acc = 0.0
        for j in np.ndindex(*n):
            off = tuple(a - b + m - 1 for a, b, m in zip(i, j, n))
            acc += kernel.grad_samples[axis][off] * f.data[j]
        out[i] = acc
    return ScalarField(grid, out * grid.cell_volume)


def random_field(grid, seed):
    rng = np.random.default_rng(seed)
    return ScalarField(grid, rng.standard_normal(grid.shape))


def test_spec_rejects_bad_parameters():
    with pytest.raises(KernelError, match="family"):
        KernelSpec(family="tophat")
    with pytest.raises(KernelError):
        KernelSpec(sigma=-0.1)
    with pytest.raises(KernelError):
        KernelSpec(r0=0.0)
    with pytest.raises(KernelError):
        KernelSpec(amplitude=-1.0)
    # the zero kernel is legitimate
    KernelSpec(amplitude=0.0)


def test_gaussian_samples_even_to_the_bit():
    g = make_grid(2, 32, 1.0)
    k = build_kernel(g, KernelSpec(family="gaussian", sigma=0.1))
    flipped = k.samples[::-1, ::-1]
    assert np.array_equal(k.samples, flipped)
    # gradient samples are odd
    for gs in k.grad_samples:
        assert np.array_equal(gs, -gs[::-1, ::-1])


def test_gaussian_mass_matches_integral():
    g = make_grid(2, 32, 1.0)
    sigma = 4.0 * max(g.h)
    k = build_kernel(g, KernelSpec(family="gaussian", sigma=sigma, amplitude=1.0))
    want = (2.0 * np.pi * sigma ** 2) ** (g.dim / 2.0)
    assert abs(k.mass - want) <= 1e-3 * want


def test_gaussian_default_amplitude_gives_unit_mass():
    g = make_grid(2, 32, 1.0)
    k = build_kernel(g, KernelSpec(family="gaussian"))
    assert k.mass == pytest.approx(1.0, rel=1e-3)


def test_newtonian_cap_value():
    g = make_grid(2, 16, 1.0)
    r0 = 2.0 * max(g.h)
    for amp in (1.0, 3.5):
        k = build_kernel(g, KernelSpec(family="mollified_newtonian", r0=r0,
                                       amplitude=amp))
        assert k.samples.max() == pytest.approx(amp / (4.0 * np.pi * r0), rel=1e-14)


def test_convolve_zero_field_and_zero_kernel():
    g = make_grid(2, 12, 1.0)
    k = build_kernel(g, KernelSpec())
    assert np.all(convolve(k, ScalarField.zeros(g)).data == 0.0)
    kz = build_kernel(g, KernelSpec(amplitude=0.0))
    f = random_field(g, 2)
    assert np.all(convolve(kz, f).data == 0.0)


def test_convolve_matches_brute_force_both_families():
    for family, kw in (("gaussian", {"sigma": 0.15}),
                       ("mollified_newtonian", {"r0": 0.1})):
        g = make_grid(2, 8, 1.0)
        k = build_kernel(g, KernelSpec(family=family, **kw))
        f = random_field(g, 31)
        want = brute_force_convolve(k, f)
        got = convolve(k, f)
        assert norm_l2(got - want) <= 1e-12 * norm_l2(want)


def test_convolve_matches_brute_force_3d():
    g = make_grid(3, 5, 1.0)
    k = build_kernel(g, KernelSpec(sigma=0.2))
    f = random_field(g, 37)
    want = brute_force_convolve(k, f)
    got = convolve(k, f)
    assert norm_l2(got - want) <= 1e-12 * norm_l2(want)


def test_convolve_self_adjoint():
    g = make_grid(2, 16, 1.0)
    k = build_kernel(g, KernelSpec(sigma=0.1))
    rng_seeds = (101, 102, 103, 104, 105)
    for s in rng_seeds:
        u = random_field(g, s)
        w = random_field(g, s + 50)
        gap = abs(inner(convolve(k, u), w) - inner(u, convolve(k, w)))
        assert gap <= 1e-12 * norm_l2(u) * norm_l2(w)


def test_grad_convolve_matches_brute_force():
    g = make_grid(2, 8, 1.0)
    for family, kw in (("gaussian", {"sigma": 0.15}),
                       ("mollified_newtonian", {"r0": 0.1})):
        k = build_kernel(g, KernelSpec(family=family, **kw))
        f = random_field(g, 41)
        got = grad_convolve(k, f)
        for axis in range(g.dim):
            want = brute_force_grad_convolve(k, f, axis)
            assert norm_l2(got.components[axis] - want) <= 1e-12 * max(
                norm_l2(want), 1e-30)


def test_grad_convolve_commutes_with_stencil_gradient():
    # analytic-derivative sampling agrees with differentiating the
    # convolution at the stencil's own truncation order.  Measured on a
    # fixed interior window: at the walls the zero-extension convolution
    # is not a Neumann function, so the reflected-ghost stencil differs
    # at O(1) on an O(h) strip there, by construction rather than by bug.
    from nlch import gradient
    errs = []
    for n in (32, 64):
        g = make_grid(2, n, 1.0)
        k = build_kernel(g, KernelSpec(sigma=0.2))
        f = ScalarField.from_function(
            g, lambda x, y: np.sin(2 * np.pi * x) * np.cos(np.pi * y))
        a = grad_convolve(k, f)
        b = gradient(convolve(k, f))
        m = n // 4  # physical margin 0.25 on the unit square
        win = (slice(m, n - m), slice(m, n - m))
        err = np.sqrt(sum(((ac.data[win] - bc.data[win]) ** 2).sum()
                          * g.cell_volume
                          for ac, bc in zip(a.components, b.components)))
        errs.append(err / norm_l2(f))
    assert np.log2(errs[0] / errs[1]) >= 1.9


def test_grid_mismatch_rejected():
    k = build_kernel(make_grid(2, 8, 1.0), KernelSpec())
    f = ScalarField.zeros(make_grid(2, 12, 1.0))
    with pytest.raises(KernelError, match="grid"):
        convolve(k, f)
    with pytest.raises(KernelError, match="grid"):
        grad_convolve(k, f)
