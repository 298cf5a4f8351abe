"""Array-level finite-difference stencils on cell-centered grids.

All operators act on plain ndarrays; the field types in :mod:`nlch.fields`
wrap these.  The design constraint that everything downstream leans on:

* ``grad_axis`` is the central difference closed with *even* reflection
  ghosts (the discrete homogeneous-Neumann extension),
* ``div_axis`` is its exact negative transpose, which works out to the
  central difference closed with *odd* reflection ghosts,

so that ``<grad f, u> + <f, div u> = 0`` holds to rounding for every pair
of arrays, with no quadrature fudge at the walls.  The composed Laplacian
``div(grad(.))`` is then symmetric negative semidefinite with kernel equal
to the constants, and the cell-centered cosine modes diagonalize it
exactly (eigenvalue ``-(sin(pi k / n) / h)^2`` per axis), which is what
the spectral preconditioner in :mod:`nlch.solvers` exploits.
"""

from __future__ import annotations

import numpy as np


def _sl(ndim: int, axis: int, index) -> tuple:
    """Slice tuple selecting ``index`` along ``axis``, all else full."""
    out: list = [slice(None)] * ndim
    out[axis] = index
    return tuple(out)


def grad_axis(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Central difference along one axis with even-reflection ghosts."""
    out = np.empty_like(f)
    nd = f.ndim
    inner = _sl(nd, axis, slice(1, -1))
    up = _sl(nd, axis, slice(2, None))
    dn = _sl(nd, axis, slice(None, -2))
    out[inner] = (f[up] - f[dn]) / (2.0 * h)
    # ghost f[-1] = f[0] and f[n] = f[n-1]
    first, second = _sl(nd, axis, 0), _sl(nd, axis, 1)
    last, penult = _sl(nd, axis, -1), _sl(nd, axis, -2)
    out[first] = (f[second] - f[first]) / (2.0 * h)
    out[last] = (f[last] - f[penult]) / (2.0 * h)
    return out


def div_axis(u: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Exact negative transpose of :func:`grad_axis` along one axis.

    Transposing the gradient stencil produces the central difference with
    odd-reflection ghosts ``u[-1] = -u[0]``, ``u[n] = -u[n-1]``; the wall
    rows carry the normal-trace flux of ``u``.
    """
    out = np.empty_like(u)
    nd = u.ndim
    inner = _sl(nd, axis, slice(1, -1))
    up = _sl(nd, axis, slice(2, None))
    dn = _sl(nd, axis, slice(None, -2))
    out[inner] = (u[up] - u[dn]) / (2.0 * h)
    first, second = _sl(nd, axis, 0), _sl(nd, axis, 1)
    last, penult = _sl(nd, axis, -1), _sl(nd, axis, -2)
    out[first] = (u[first] + u[second]) / (2.0 * h)
    out[last] = -(u[last] + u[penult]) / (2.0 * h)
    return out


def gradient(f: np.ndarray, hs: tuple[float, ...]) -> list[np.ndarray]:
    return [grad_axis(f, a, hs[a]) for a in range(f.ndim)]


def divergence(comps: list[np.ndarray] | tuple[np.ndarray, ...],
               hs: tuple[float, ...]) -> np.ndarray:
    out = div_axis(comps[0], 0, hs[0])
    for a in range(1, len(comps)):
        out += div_axis(comps[a], a, hs[a])
    return out


def laplacian(f: np.ndarray, hs: tuple[float, ...]) -> np.ndarray:
    """divergence(gradient(f)); symmetric, conservative, kernel = constants."""
    out = div_axis(grad_axis(f, 0, hs[0]), 0, hs[0])
    for a in range(1, f.ndim):
        out += div_axis(grad_axis(f, a, hs[a]), a, hs[a])
    return out
