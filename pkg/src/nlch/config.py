"""INI-style problem configuration.

One flat document with fixed sections drives every harness command:

    [grid] [kernel] [potential] [state] [control] [targets]
    [optimizer] [output]

Whitespace- or comma-separated lists are accepted wherever a value has
one entry per axis or component.  Every key is optional except where a
command needs it (``targets.manifest`` when ``targets.source = files``);
the defaults below make the empty document a runnable 16-square
instance.  Unknown sections or keys are rejected rather than ignored so
typos surface at parse time.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass

from .errors import ConfigError, NlchError
from .fields import Grid, make_grid
from .kernels import KernelSpec
from .leray import ControlBounds
from .optimizer import OptimizerOptions
from .potential import PotentialParams
from .state import StateParams

__all__ = ["ProblemConfig", "parse_config", "load_config", "DEFAULTS"]

# documented default table: the value used when a key is absent
DEFAULTS = {
    "grid": {"dim": "2", "cells": "16", "length": "1.0"},
    "kernel": {"family": "gaussian", "sigma": "", "r0": "", "amplitude": ""},
    "potential": {"theta": "0.2", "guard": "1e-9"},
    "state": {"dt": "1e-3", "n_steps": "100", "newton_tol": "1e-10",
              "newton_max": "50", "guard": "1e-6",
              "phi0_file": "", "phi0_amplitude": "0.5"},
    "control": {"vmin": "-1.0", "vmax": "1.0", "source": "synthetic",
                "amplitude": "0.5", "file": ""},
    "targets": {"source": "synthetic-reference", "manifest": "",
                "gamma": "1.0 1.0 1e-4"},
    "optimizer": {"step0": "1.0", "armijo_c": "1e-4", "shrink": "0.5",
                  "max_backtracks": "30", "max_iter": "50", "tol": "1e-6",
                  "proj_tol": "1e-8", "proj_max_iter": "8000"},
    "output": {"directory": "out", "figures": "true", "seed": "0"},
}

_CONTROL_SOURCES = ("zero", "synthetic", "file")
_TARGET_SOURCES = ("files", "synthetic-reference")


@dataclass(frozen=True)
class ProblemConfig:
    grid: Grid
    kernel: KernelSpec
    pot: PotentialParams
    params: StateParams
    bounds: ControlBounds
    phi0_file: str | None
    phi0_amplitude: float
    control_source: str
    control_amplitude: float
    control_file: str | None
    targets_source: str
    targets_manifest: str | None
    gamma: tuple[float, float, float]
    opts: OptimizerOptions
    seed: int
    out_dir: str
    figures: bool


def _split(raw: str) -> list[str]:
    return raw.replace(",", " ").split()


class _Section:
    """One section with defaults and typed getters."""

    def __init__(self, name: str, cp: configparser.ConfigParser):
        self.name = name
        self.given = dict(cp[name]) if cp.has_section(name) else {}

    def raw(self, key: str) -> str:
        if key in self.given:
            return self.given[key].strip()
        return DEFAULTS[self.name][key]

    def _convert(self, key: str, text: str, kind, what: str):
        try:
            return kind(text)
        except ValueError:
            raise ConfigError(
                f"[{self.name}] {key}: expected {what}, got {text!r}") from None

    def int(self, key: str, lo=None, hi=None) -> int:
        val = self._convert(key, self.raw(key), int, "an integer")
        self._range(key, val, lo, hi)
        return val

    def float(self, key: str, lo=None, hi=None) -> float:
        val = self._convert(key, self.raw(key), float, "a number")
        self._range(key, val, lo, hi)
        return val

    def floats(self, key: str, count: int) -> tuple[float, ...]:
        parts = _split(self.raw(key))
        if len(parts) == 1:
            parts = parts * count
        if len(parts) != count:
            raise ConfigError(
                f"[{self.name}] {key}: expected 1 or {count} values, "
                f"got {len(parts)}")
        return tuple(self._convert(key, p, float, "a number") for p in parts)

    def ints(self, key: str, count: int) -> tuple[int, ...]:
        parts = _split(self.raw(key))
        if len(parts) == 1:
            parts = parts * count
        if len(parts) != count:
            raise ConfigError(
                f"[{self.name}] {key}: expected 1 or {count} values, "
                f"got {len(parts)}")
        return tuple(self._convert(key, p, int, "an integer") for p in parts)

    def optional_float(self, key: str) -> float | None:
        raw = self.raw(key)
        return None if raw == "" else self._convert(key, raw, float, "a number")

    def optional_path(self, key: str) -> str | None:
        raw = self.raw(key)
        return raw or None

    def choice(self, key: str, allowed: tuple[str, ...]) -> str:
        val = self.raw(key)
        if val not in allowed:
            raise ConfigError(
                f"[{self.name}] {key}: expected one of {allowed}, got {val!r}")
        return val

    def bool(self, key: str) -> bool:
        raw = self.raw(key).lower()
        if raw in ("true", "yes", "on", "1"):
            return True
        if raw in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"[{self.name}] {key}: expected a boolean, got {raw!r}")

    def _range(self, key, val, lo, hi):
        if (lo is not None and val < lo) or (hi is not None and val > hi):
            lo_s = "-inf" if lo is None else str(lo)
            hi_s = "inf" if hi is None else str(hi)
            raise ConfigError(
                f"[{self.name}] {key}: value {val} outside [{lo_s}, {hi_s}]")

    def check_unknown(self):
        unknown = set(self.given) - set(DEFAULTS[self.name])
        if unknown:
            raise ConfigError(
                f"[{self.name}] unknown key(s): {', '.join(sorted(unknown))}")


def parse_config(text: str, base_dir: str = ".") -> ProblemConfig:
    """Parse a config document; defaults fill every absent key.

    Relative file references resolve against ``base_dir`` and must exist
    at parse time, so a command fails before any expensive work starts.
    """
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"config document malformed: {e}") from None
    unknown = set(cp.sections()) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")

    secs = {name: _Section(name, cp) for name in DEFAULTS}

    g = secs["grid"]
    dim = g.int("dim", 2, 3)
    cells = g.ints("cells", dim)
    length = g.floats("length", dim)

    k = secs["kernel"]
    kernel_kwargs = dict(
        family=k.choice("family", ("gaussian", "mollified_newtonian")),
        sigma=k.optional_float("sigma"), r0=k.optional_float("r0"),
        amplitude=k.optional_float("amplitude"))

    p = secs["potential"]
    pot_kwargs = dict(theta=p.float("theta"), guard=p.float("guard"))

    s = secs["state"]
    state_kwargs = dict(
        dt=s.float("dt"), n_steps=s.int("n_steps"),
        newton_tol=s.float("newton_tol"), newton_max=s.int("newton_max"),
        guard=s.float("guard"))
    phi0_file = s.optional_path("phi0_file")
    phi0_amplitude = s.float("phi0_amplitude", 0.0, 1.0)
    if phi0_amplitude >= 1.0:
        raise ConfigError(
            "[state] phi0_amplitude: initial data must stay strictly "
            f"inside the pure phases, got {phi0_amplitude}")

    c = secs["control"]
    vmin = c.floats("vmin", dim)
    vmax = c.floats("vmax", dim)
    control_source = c.choice("source", _CONTROL_SOURCES)
    control_amplitude = c.float("amplitude", 0.0)
    control_file = c.optional_path("file")
    if control_source == "file" and control_file is None:
        raise ConfigError("[control] file is required when source = file")

    t = secs["targets"]
    targets_source = t.choice("source", _TARGET_SOURCES)
    targets_manifest = t.optional_path("manifest")
    if targets_source == "files" and targets_manifest is None:
        raise ConfigError("[targets] manifest is required when source = files")
    gamma = t.floats("gamma", 3)
    if any(x < 0.0 for x in gamma) or all(x == 0.0 for x in gamma):
        raise ConfigError(
            f"[targets] gamma: cost weights must be nonnegative and not "
            f"all zero, got {gamma}")

    o = secs["optimizer"]
    opt_kwargs = dict(
        step0=o.float("step0"), armijo_c=o.float("armijo_c"),
        shrink=o.float("shrink"), max_backtracks=o.int("max_backtracks"),
        max_iter=o.int("max_iter"), tol=o.float("tol"),
        proj_tol=o.float("proj_tol"), proj_max_iter=o.int("proj_max_iter"))

    out = secs["output"]
    out_dir = out.raw("directory")
    figures = out.bool("figures")
    seed = out.int("seed", 0)

    for sec in secs.values():
        sec.check_unknown()

    def resolve(section: str, key: str, p: str | None) -> str | None:
        if p is None:
            return None
        full = os.path.normpath(os.path.join(base_dir, p))
        if not os.path.isfile(full):
            raise ConfigError(f"[{section}] {key}: file not found: {full}")
        return full

    phi0_file = resolve("state", "phi0_file", phi0_file)
    control_file = resolve("control", "file", control_file)
    targets_manifest = resolve("targets", "manifest", targets_manifest)

    # domain constructors own the cross-field validation; translate their
    # complaints into config-shaped ones so the section is named
    def build(section, ctor, **kwargs):
        try:
            return ctor(**kwargs)
        except NlchError as e:
            raise ConfigError(f"[{section}] {e}") from e

    return ProblemConfig(
        grid=build("grid", make_grid, dim=dim, n=cells, length=length),
        kernel=build("kernel", KernelSpec, **kernel_kwargs),
        pot=build("potential", PotentialParams, **pot_kwargs),
        params=build("state", StateParams, **state_kwargs),
        bounds=build("control", ControlBounds, vmin=vmin, vmax=vmax),
        phi0_file=phi0_file, phi0_amplitude=phi0_amplitude,
        control_source=control_source, control_amplitude=control_amplitude,
        control_file=control_file, targets_source=targets_source,
        targets_manifest=targets_manifest, gamma=tuple(gamma),
        opts=build("optimizer", OptimizerOptions, **opt_kwargs),
        seed=seed, out_dir=out_dir, figures=figures)


def load_config(path: str | os.PathLike) -> ProblemConfig:
    path = os.fspath(path)
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base_dir=os.path.dirname(path) or ".")
