"""Linear solvers for the cell-centered Neumann operators.

The composed Laplacian from :mod:`nlch.stencils` is diagonalized exactly
by the type-II cosine transform: the mode with index ``k`` along an axis
with ``n`` cells of spacing ``h`` has eigenvalue ``-(sin(pi k / n)/h)^2``.
That gives an exact spectral preconditioner, so the preconditioned CG
below typically certifies its residual within a handful of iterations.
CG is kept (rather than a bare transform solve) because the variable
coefficient systems of the implicit time step are only *preconditioned*
by the constant-coefficient factor, and because every solve then reports
an honest residual against the stencil operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.fft import dctn, idctn

from ._runtime import get_workers
from .errors import SolverError
from .stencils import laplacian

_eig_cache: dict[tuple, np.ndarray] = {}


def laplacian_symbol(shape: tuple[int, ...], hs: tuple[float, ...]) -> np.ndarray:
    """Eigenvalues of minus the composed Neumann Laplacian, >= 0.

    Entry ``[k0, k1, ...]`` is ``sum_a (sin(pi k_a / n_a) / h_a)^2``; the
    zero mode (constants) sits at the origin.
    """
    key = (shape, hs)
    lam = _eig_cache.get(key)
    if lam is None:
        axes = []
        for n, h in zip(shape, hs):
            k = np.arange(n)
            axes.append((np.sin(np.pi * k / n) / h) ** 2)
        lam = axes[0]
        for a in axes[1:]:
            lam = np.add.outer(lam, a)
        lam = np.ascontiguousarray(lam)
        lam.setflags(write=False)
        _eig_cache[key] = lam
    return lam


def dct_forward(x: np.ndarray) -> np.ndarray:
    return dctn(x, type=2, norm="ortho", workers=get_workers())


def dct_inverse(x: np.ndarray) -> np.ndarray:
    return idctn(x, type=2, norm="ortho", workers=get_workers())


def shifted_inverse(rhs: np.ndarray, hs: tuple[float, ...], sigma: float) -> np.ndarray:
    """Apply ``(sigma*I - Lap)^{-1}`` exactly via the cosine transform.

    With ``sigma = 0`` the zero mode is annihilated instead of divided,
    which is the mean-deflated pseudoinverse of ``-Lap``.
    """
    lam = laplacian_symbol(rhs.shape, hs)
    coeff = dct_forward(rhs)
    if sigma == 0.0:
        out = np.zeros_like(coeff)
        np.divide(coeff, lam, out=out, where=lam > 0.0)
    else:
        out = coeff / (sigma + lam)
    return dct_inverse(out)


@dataclass(frozen=True)
class PcgInfo:
    iterations: int
    relative_residual: float
    converged: bool


def pcg(apply_op: Callable[[np.ndarray], np.ndarray],
        b: np.ndarray,
        precondition: Callable[[np.ndarray], np.ndarray],
        tol: float,
        max_iter: int,
        deflate_mean: bool = False,
        x0: np.ndarray | None = None) -> tuple[np.ndarray, PcgInfo]:
    """Preconditioned conjugate gradient with optional mean deflation.

    ``deflate_mean`` restricts the solve to the mean-zero complement of
    the constants (the null space of the Neumann Laplacian): the right
    hand side, the iterates, and the residual are all kept mean-free.
    Raises :class:`SolverError` if the relative residual does not reach
    ``tol`` within ``max_iter`` iterations.
    """
    b = np.asarray(b, dtype=np.float64)
    if deflate_mean:
        b = b - b.mean()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), PcgInfo(0, 0.0, True)

    x = np.zeros_like(b) if x0 is None else x0.copy()
    if deflate_mean and x0 is not None:
        x -= x.mean()
    r = b - apply_op(x)
    if deflate_mean:
        r -= r.mean()
    relres = float(np.linalg.norm(r)) / bnorm
    if relres <= tol:
        return x, PcgInfo(0, relres, True)

    z = precondition(r)
    if deflate_mean:
        z -= z.mean()
    p = z.copy()
    rz = float(np.vdot(r, z).real)
    for it in range(1, max_iter + 1):
        ap = apply_op(p)
        alpha = rz / float(np.vdot(p, ap).real)
        x += alpha * p
        r -= alpha * ap
        if deflate_mean:
            r -= r.mean()
        relres = float(np.linalg.norm(r)) / bnorm
        if relres <= tol:
            if deflate_mean:
                x -= x.mean()
            return x, PcgInfo(it, relres, True)
        z = precondition(r)
        if deflate_mean:
            z -= z.mean()
        rz_next = float(np.vdot(r, z).real)
        p = z + (rz_next / rz) * p
        rz = rz_next
    raise SolverError(
        f"pcg stalled at relative residual {relres:.3e} after {max_iter} "
        f"iterations (tolerance {tol:.3e})",
        residual=relres, iterations=max_iter)


def solve_neumann_poisson(f: np.ndarray, hs: tuple[float, ...],
                          tol: float = 1e-10,
                          max_iter: int | None = None) -> tuple[np.ndarray, PcgInfo]:
    """Solve ``-Lap psi = f`` for mean-zero ``psi``; f must be mean-free.

    The caller is responsible for the compatibility check; the mean is
    deflated here regardless to keep rounding drift out of the Krylov
    space.
    """
    if max_iter is None:
        max_iter = 10 * f.size
    return pcg(
        lambda x: -laplacian(x, hs),
        f,
        lambda r: shifted_inverse(r, hs, 0.0),
        tol=tol, max_iter=max_iter, deflate_mean=True)


def solve_screened(d_inv_over_dt: np.ndarray, rhs: np.ndarray,
                   hs: tuple[float, ...],
                   tol: float = 1e-12,
                   max_iter: int | None = None) -> tuple[np.ndarray, PcgInfo]:
    """Solve ``(diag(d_inv_over_dt) - Lap) y = rhs``.

    This is the symmetric positive definite core of every implicit step:
    the semi-implicit update, its linearization, and the transposed
    (adjoint) sweep all reduce to it.  Preconditioned by the exact
    inverse of ``sigma*I - Lap`` with ``sigma`` the geometric mean of the
    diagonal, which bounds the preconditioned condition number by the
    square root of the diagonal's spread.
    """
    if max_iter is None:
        max_iter = 10 * rhs.size
    dmin = float(d_inv_over_dt.min())
    dmax = float(d_inv_over_dt.max())
    if dmin <= 0.0:
        raise SolverError("screened solve requires a positive diagonal",
                          residual=np.inf, iterations=0)
    sigma = float(np.sqrt(dmin * dmax))
    return pcg(
        lambda x: d_inv_over_dt * x - laplacian(x, hs),
        rhs,
        lambda r: shifted_inverse(r, hs, sigma),
        tol=tol, max_iter=max_iter, deflate_mean=False)
