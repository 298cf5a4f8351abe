"""Time-dependent control fields: one velocity slice per time step.

A :class:`ControlField` is the discrete stand-in for a velocity in
L2(0,T; H_sigma): ``slices[n]`` acts on the interval [n*dt, (n+1)*dt).
It carries its own step size so space-time inner products and norms are
well-defined without dragging solver parameters around.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import FieldError
from .fields import Grid, VectorField, inner_vector


@dataclass(frozen=True, eq=False)
class ControlField:
    grid: Grid
    dt: float
    slices: tuple[VectorField, ...]

    def __post_init__(self):
        if not (self.dt > 0.0):
            raise FieldError(f"control dt must be positive, got {self.dt}")
        for s in self.slices:
            if s.grid != self.grid:
                raise FieldError("control slices live on different grids")

    @property
    def n_slices(self) -> int:
        return len(self.slices)

    @classmethod
    def zeros(cls, grid: Grid, dt: float, n_slices: int) -> "ControlField":
        return cls(grid, dt, tuple(VectorField.zeros(grid) for _ in range(n_slices)))

    @classmethod
    def constant(cls, v: VectorField, dt: float, n_slices: int) -> "ControlField":
        return cls(v.grid, dt, tuple(v for _ in range(n_slices)))

    @classmethod
    def from_slices(cls, slices: Iterable[VectorField], dt: float) -> "ControlField":
        ss = tuple(slices)
        if not ss:
            raise FieldError("control field needs at least one slice")
        return cls(ss[0].grid, dt, ss)

    def __add__(self, other: "ControlField") -> "ControlField":
        self._check_compatible(other)
        return ControlField(self.grid, self.dt,
                            tuple(a + b for a, b in zip(self.slices, other.slices)))

    def __sub__(self, other: "ControlField") -> "ControlField":
        self._check_compatible(other)
        return ControlField(self.grid, self.dt,
                            tuple(a - b for a, b in zip(self.slices, other.slices)))

    def __mul__(self, c: float) -> "ControlField":
        return ControlField(self.grid, self.dt, tuple(s * float(c) for s in self.slices))

    __rmul__ = __mul__

    def __neg__(self) -> "ControlField":
        return self * -1.0

    def _check_compatible(self, other: "ControlField") -> None:
        if other.grid != self.grid or other.n_slices != self.n_slices \
                or other.dt != self.dt:
            raise FieldError("control fields are not defined on the same partition")


def inner_q(u: ControlField, w: ControlField) -> float:
    """L2 inner product over space-time, rectangle rule in time."""
    u._check_compatible(w)
    return u.dt * sum(inner_vector(a, b) for a, b in zip(u.slices, w.slices))


def norm_q(u: ControlField) -> float:
    return float(inner_q(u, u) ** 0.5)
