"""Cell-centered grids, field values, and the discrete calculus on them.

A :class:`Grid` is a uniform rectangular lattice of cell centers over a
box; :class:`ScalarField` and :class:`VectorField` are immutable value
types over one grid.  Operations are pure functions returning new fields.

The operator pair (gradient, divergence) is adjoint by construction:
divergence is the exact negative transpose of the reflecting-ghost
central-difference gradient under the cell-volume inner product, so

    inner(gradient(f), v) + inner(f, divergence(v)) == 0

to rounding for all fields.  Mass conservation of the transport scheme,
the Leray projection identities, and the duality checks of the control
solver all reduce to this one identity.  Note one consequence: since the
discrete integral of a gradient recovers boundary values (a divergence
theorem, not a defect), no consistent transposed divergence can vanish
on a constant vector field at the wall cells; it vanishes identically in
the interior and carries the normal trace at the walls.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import stencils
from .errors import FieldError, GridError
from .solvers import solve_neumann_poisson


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid over a rectangular box."""

    dim: int
    n: tuple[int, ...]
    length: tuple[float, ...]

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(L / m for L, m in zip(self.length, self.n))

    @property
    def hmin(self) -> float:
        return min(self.h)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def num_cells(self) -> int:
        out = 1
        for m in self.n:
            out *= m
        return out

    @property
    def cell_volume(self) -> float:
        out = 1.0
        for s in self.h:
            out *= s
        return out

    @property
    def volume(self) -> float:
        out = 1.0
        for L in self.length:
            out *= L
        return out

    def cell_centers(self, axis: int) -> np.ndarray:
        """Coordinates of cell centers along one axis."""
        h = self.h[axis]
        return (np.arange(self.n[axis]) + 0.5) * h

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*(self.cell_centers(a) for a in range(self.dim)),
                                 indexing="ij"))


def make_grid(dim: int, n: int | Iterable[int],
              length: float | Iterable[float]) -> Grid:
    """Build and validate a grid.

    Raises
    ------
    GridError
        If ``dim`` is not 2 or 3, any extent is nonpositive, or any axis
        has fewer than 4 cells.
    """
    if dim not in (2, 3):
        raise GridError(f"dim must be 2 or 3, got {dim}")
    ns = tuple(int(v) for v in (n if isinstance(n, Iterable) else [n] * dim))
    if isinstance(length, Iterable):
        ls = tuple(float(v) for v in length)
    else:
        ls = tuple(float(length) for _ in range(dim))
    if len(ns) != dim or len(ls) != dim:
        raise GridError(
            f"n and length must each have {dim} entries, got {len(ns)} and {len(ls)}")
    for a, m in enumerate(ns):
        if m < 4:
            raise GridError(f"grid too small: axis {a} has {m} cells, need >= 4")
    for a, L in enumerate(ls):
        if not np.isfinite(L) or L <= 0.0:
            raise GridError(f"length must be positive and finite, axis {a} has {L}")
    return Grid(dim=dim, n=ns, length=ls)


def _validated(grid: Grid, data: np.ndarray, what: str) -> np.ndarray:
    arr = np.array(data, dtype=np.float64, copy=True)
    if arr.shape != grid.shape:
        raise FieldError(
            f"{what} data shape {arr.shape} does not match grid shape {grid.shape}")
    if not np.isfinite(arr).all():
        raise FieldError(f"{what} data contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Immutable scalar values at cell centers."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _validated(self.grid, self.data, "scalar field"))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def full(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> "ScalarField":
        """Sample ``fn(x, y[, z])`` at cell centers."""
        return cls(grid, np.asarray(fn(*grid.meshgrid()), dtype=np.float64))

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.data + other.data)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.data - other.data)

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.data)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            return ScalarField(self.grid, self.data * other.data)
        return ScalarField(self.grid, self.data * float(other))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class VectorField:
    """Immutable vector values at cell centers, one component per axis."""

    grid: Grid
    components: tuple[ScalarField, ...]

    def __post_init__(self):
        if len(self.components) != self.grid.dim:
            raise FieldError(
                f"vector field needs {self.grid.dim} components, got {len(self.components)}")
        for c in self.components:
            if c.grid != self.grid:
                raise FieldError("vector field components live on different grids")

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, tuple(ScalarField.zeros(grid) for _ in range(grid.dim)))

    @classmethod
    def from_arrays(cls, grid: Grid, arrays: Iterable[np.ndarray]) -> "VectorField":
        return cls(grid, tuple(ScalarField(grid, a) for a in arrays))

    def arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(c.data for c in self.components)

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.grid, tuple(a + b for a, b in
                                            zip(self.components, other.components)))

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.grid, tuple(a - b for a, b in
                                            zip(self.components, other.components)))

    def __neg__(self) -> "VectorField":
        return VectorField(self.grid, tuple(-c for c in self.components))

    def __mul__(self, other):
        # scalar or ScalarField multiplier, applied to every component
        return VectorField(self.grid, tuple(c * other for c in self.components))

    __rmul__ = __mul__


def inner(f: ScalarField, g: ScalarField) -> float:
    """Cell-volume-weighted L2 inner product."""
    return float(np.vdot(f.data, g.data).real) * f.grid.cell_volume


def inner_vector(v: VectorField, w: VectorField) -> float:
    return sum(inner(a, b) for a, b in zip(v.components, w.components))


def dot(v: VectorField, w: VectorField) -> ScalarField:
    """Pointwise dot product of two vector fields."""
    acc = v.components[0].data * w.components[0].data
    for a in range(1, v.grid.dim):
        acc = acc + v.components[a].data * w.components[a].data
    return ScalarField(v.grid, acc)


def gradient(f: ScalarField) -> VectorField:
    """Central-difference gradient with even-reflection ghost cells."""
    hs = f.grid.h
    return VectorField.from_arrays(f.grid, stencils.gradient(f.data, hs))


def divergence(v: VectorField) -> ScalarField:
    """Exact negative adjoint of :func:`gradient` (stencil transpose)."""
    hs = v.grid.h
    return ScalarField(v.grid, stencils.divergence(v.arrays(), hs))


def laplacian_neumann(f: ScalarField) -> ScalarField:
    """divergence(gradient(f)): symmetric, conservative, kernel = constants."""
    return ScalarField(f.grid, stencils.laplacian(f.data, f.grid.h))


def _mean_compatible(f: ScalarField, what: str) -> None:
    l2 = np.sqrt(float(np.vdot(f.data, f.data).real) * f.grid.cell_volume)
    mean_mass = abs(float(f.data.mean())) * np.sqrt(f.grid.volume)
    if mean_mass > 1e-10 * max(l2, 1e-300):
        raise FieldError(
            f"incompatible Neumann data: {what} requires mean-zero input, "
            f"|mean| = {f.data.mean():.3e} exceeds 1e-10 of the field scale")


def inv_neumann_laplacian(f: ScalarField, tol: float = 1e-10) -> ScalarField:
    """Solve ``-laplacian_neumann(psi) = f`` for the mean-zero ``psi``.

    ``f`` must be compatible (mean zero to 1e-10 relative); the solve is
    mean-deflated preconditioned CG and raises :class:`SolverError` with
    the achieved residual if the tolerance is not met.
    """
    _mean_compatible(f, "inverse Neumann Laplacian")
    psi, _ = solve_neumann_poisson(f.data, f.grid.h, tol=tol)
    return ScalarField(f.grid, psi)


_REDUCE_KINDS = ("mean", "integral", "L2", "Linf", "H1seminorm", "Vstar")


def reduce(f: ScalarField, kind: str) -> float:
    """Reduce a scalar field to one number.

    Kinds: ``mean``, ``integral``, ``L2``, ``Linf``, ``H1seminorm`` (L2
    norm of the discrete gradient), and ``Vstar`` (the dual seminorm
    ``||grad(N f)||_{L2}`` with ``N`` the mean-deflated inverse Neumann
    Laplacian; requires mean-zero input).
    """
    if kind == "mean":
        return float(f.data.mean())
    if kind == "integral":
        return float(f.data.sum()) * f.grid.cell_volume
    if kind == "L2":
        return float(np.sqrt(np.vdot(f.data, f.data).real * f.grid.cell_volume))
    if kind == "Linf":
        return float(np.abs(f.data).max())
    if kind == "H1seminorm":
        g = stencils.gradient(f.data, f.grid.h)
        acc = sum(float(np.vdot(c, c).real) for c in g)
        return float(np.sqrt(acc * f.grid.cell_volume))
    if kind == "Vstar":
        if float(np.abs(f.data).max()) == 0.0:
            return 0.0
        _mean_compatible(f, "Vstar reduction")
        psi = inv_neumann_laplacian(f)
        return reduce(psi, "H1seminorm")
    raise FieldError(f"unknown reduction kind {kind!r}; expected one of {_REDUCE_KINDS}")


def norm_l2(f: ScalarField) -> float:
    return reduce(f, "L2")


def norm_l2_vector(v: VectorField) -> float:
    return float(np.sqrt(sum(reduce(c, "L2") ** 2 for c in v.components)))
