"""Command-line harness.

    nlch <command> --config <path> [--out <dir>] [--seed <u64>] [--threads <n>]

Commands: ``simulate`` (state run with diagnostics), ``optimize``
(projected-gradient control solve), ``grad-check`` (adjoint gradient
against central differences over an h-sweep), ``verify`` (registered
module check suites), ``make-targets`` (reference run written as a
tracking-target set).  Every command reads one config document; --seed
and --out override the config.  Identical config and seed reproduce
identical CSV bytes and field files.

Failures exit nonzero and emit JSON lines ``{"check", "value",
"threshold"}`` on stdout, mirrored to ``failures.jsonl`` in the output
directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from ._runtime import set_workers
from .config import ProblemConfig, load_config
from .control import ControlField, inner_q
from .errors import ConfigError, NlchError
from .fieldio import (OPTIMIZER_COLUMNS, read_control, read_field,
                      read_targets, write_control, write_field,
                      write_targets, write_timeseries)
from .kernels import build_kernel
from .leray import project_control
from .optimizer import (ControlProblem, fd_directional_derivative,
                        projected_gradient_descent, reduced_gradient)
from .sensitivity import TargetData
from .state import StateTrajectory, simulate
from .synthetic import smooth_field, synthetic_control
from .verify import run_verify

_GRADCHECK_STEPS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
_GRADCHECK_PAIRS = 3
_GRADCHECK_TOL = 1e-5


def _emit_failures(cfg: ProblemConfig, failures: list[dict]) -> None:
    path = os.path.join(cfg.out_dir, "failures.jsonl")
    with open(path, "w", encoding="utf-8") as fh:
        for f in failures:
            line = json.dumps(f, sort_keys=True)
            fh.write(line + "\n")
            print(line)


def _initial_state(cfg: ProblemConfig):
    if cfg.phi0_file:
        f = read_field(cfg.phi0_file)
        if f.grid != cfg.grid:
            raise ConfigError(
                f"[state] phi0_file: field grid {f.grid.n} does not match "
                f"the configured grid {cfg.grid.n}")
        return f
    return smooth_field(cfg.grid, cfg.seed, cfg.phi0_amplitude)


def _configured_control(cfg: ProblemConfig) -> ControlField:
    """The velocity a simulate/make-targets run transports with."""
    dt, n = cfg.params.dt, cfg.params.n_steps
    if cfg.control_source == "zero":
        return ControlField.zeros(cfg.grid, dt, n)
    if cfg.control_source == "synthetic":
        raw = synthetic_control(cfg.grid, dt, n, cfg.seed + 1000,
                                cfg.control_amplitude)
        return project_control(raw, cfg.bounds, cfg.opts.proj_tol,
                               cfg.opts.proj_max_iter)
    v = read_control(cfg.control_file)
    if v.grid != cfg.grid:
        raise ConfigError(
            f"[control] file: control grid {v.grid.n} does not match the "
            f"configured grid {cfg.grid.n}")
    if v.n_slices != n or abs(v.dt - dt) > 1e-12 * dt:
        raise ConfigError(
            f"[control] file: control has {v.n_slices} slices of dt={v.dt}, "
            f"the configured run needs {n} slices of dt={dt}")
    return v


def _tracking_targets(cfg: ProblemConfig, kern, phi0) -> TargetData:
    n = cfg.params.n_steps
    if cfg.targets_source == "files":
        phi_q, phi_omega, dt = read_targets(cfg.targets_manifest)
        if phi_omega.grid != cfg.grid:
            raise ConfigError(
                f"[targets] manifest: target grid {phi_omega.grid.n} does "
                f"not match the configured grid {cfg.grid.n}")
        if len(phi_q) != n or abs(dt - cfg.params.dt) > 1e-12 * cfg.params.dt:
            raise ConfigError(
                f"[targets] manifest: {len(phi_q)} slices of dt={dt}, the "
                f"configured run needs {n} slices of dt={cfg.params.dt}")
        return TargetData(phi_Q=phi_q, phi_Omega=phi_omega, gamma=cfg.gamma)
    ref = simulate(phi0, _configured_control(cfg), kern, cfg.pot, cfg.params)
    return TargetData(phi_Q=tuple(ref.phi[m] for m in range(n)),
                      phi_Omega=ref.phi[n], gamma=cfg.gamma)


def _diagnostics_rows(traj: StateTrajectory):
    return [(m, traj.times[m], traj.mass[m], traj.energy[m],
             traj.separation[m]) for m in range(traj.n_steps + 1)]


def cmd_simulate(cfg: ProblemConfig) -> int:
    kern = build_kernel(cfg.grid, cfg.kernel)
    phi0 = _initial_state(cfg)
    v = _configured_control(cfg)
    traj = simulate(phi0, v, kern, cfg.pot, cfg.params)

    write_timeseries(os.path.join(cfg.out_dir, "diagnostics.csv"),
                     _diagnostics_rows(traj))
    write_field(traj.phi[0], os.path.join(cfg.out_dir, "phi_initial.nlchf"))
    write_field(traj.phi[-1], os.path.join(cfg.out_dir, "phi_final.nlchf"))
    if cfg.figures:
        from .report import render_simulate_report
        render_simulate_report(cfg.out_dir, traj)
    drift = np.abs(traj.mass - traj.mass[0]).max()
    print(f"simulate: {traj.n_steps} steps on {cfg.grid.n}, "
          f"mass drift {drift:.3e}, energy {traj.energy[0]:.6e} -> "
          f"{traj.energy[-1]:.6e}, min separation {traj.separation.min():.3e}")
    print(f"artifacts in {cfg.out_dir}")
    return 0


def cmd_make_targets(cfg: ProblemConfig) -> int:
    kern = build_kernel(cfg.grid, cfg.kernel)
    phi0 = _initial_state(cfg)
    v = _configured_control(cfg)
    traj = simulate(phi0, v, kern, cfg.pot, cfg.params)
    n = cfg.params.n_steps
    manifest = write_targets(os.path.join(cfg.out_dir, "targets"),
                             tuple(traj.phi[m] for m in range(n)),
                             traj.phi[n], cfg.params.dt)
    write_control(os.path.join(cfg.out_dir, "control_ref"), v)
    print(f"make-targets: wrote {n}+1 target fields, manifest {manifest}")
    return 0


def cmd_optimize(cfg: ProblemConfig) -> int:
    kern = build_kernel(cfg.grid, cfg.kernel)
    phi0 = _initial_state(cfg)
    targets = _tracking_targets(cfg, kern, phi0)
    problem = ControlProblem(phi0, kern, cfg.pot, cfg.params, targets,
                             cfg.bounds)
    v0 = ControlField.zeros(cfg.grid, cfg.params.dt, cfg.params.n_steps)
    horizon = cfg.params.n_steps * cfg.params.dt
    rows = []

    def record(k, v, traj, cost, stat):
        rows.append((k, horizon, traj.mass[-1], traj.energy[-1],
                     traj.separation.min(), cost, stat))

    res = projected_gradient_descent(v0, problem, cfg.opts, callback=record)

    write_timeseries(os.path.join(cfg.out_dir, "optimization.csv"), rows,
                     OPTIMIZER_COLUMNS)
    write_control(os.path.join(cfg.out_dir, "control_opt"), res.v_opt)
    summary = {
        "iterations": res.iterations,
        "converged": res.converged,
        "message": res.message,
        "cost_initial": float(res.cost_history[0]),
        "cost_final": float(res.cost_history[-1]),
        "stationarity_final": float(res.stationarity_history[-1]),
        "fixed_point_residual": res.fixed_point_residual,
    }
    with open(os.path.join(cfg.out_dir, "result.json"), "w",
              encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    if cfg.figures:
        from .report import render_optimize_report
        render_optimize_report(cfg.out_dir, res.cost_history,
                               res.stationarity_history, res.v_opt)
    print(f"optimize: {res.message}; cost {summary['cost_initial']:.6e} -> "
          f"{summary['cost_final']:.6e} in {res.iterations} iterations")
    print(f"artifacts in {cfg.out_dir}")
    if not res.converged:
        _emit_failures(cfg, [{"check": "optimizer-converged",
                              "value": summary["stationarity_final"],
                              "threshold": cfg.opts.tol}])
        return 3
    return 0


def cmd_grad_check(cfg: ProblemConfig) -> int:
    kern = build_kernel(cfg.grid, cfg.kernel)
    phi0 = _initial_state(cfg)
    targets = _tracking_targets(cfg, kern, phi0)
    problem = ControlProblem(phi0, kern, cfg.pot, cfg.params, targets,
                             cfg.bounds)
    dt, n = cfg.params.dt, cfg.params.n_steps

    rows = []
    curves = []
    worst_best = 0.0
    for i in range(_GRADCHECK_PAIRS):
        v = synthetic_control(cfg.grid, dt, n, cfg.seed + 3000 + 101 * i, 0.4)
        w = synthetic_control(cfg.grid, dt, n, cfg.seed + 4000 + 101 * i, 0.5)
        traj = problem.solve(v)
        adj = problem.adjoint(traj, v)
        grad = reduced_gradient(traj, adj, v, targets)
        dj = inner_q(grad, w)
        errs = []
        for h in _GRADCHECK_STEPS:
            fd = fd_directional_derivative(problem, v, w, h)
            rel = abs(fd - dj) / max(abs(dj), 1e-300)
            errs.append(rel)
            rows.append((i, h, fd, dj, rel))
        curves.append(errs)
        worst_best = max(worst_best, min(errs))

    write_timeseries(
        os.path.join(cfg.out_dir, "grad_check.csv"), rows,
        ("pair", "h", "fd_derivative", "adjoint_derivative", "rel_error"))
    if cfg.figures:
        from .report import render_gradcheck_report
        render_gradcheck_report(cfg.out_dir, np.asarray(_GRADCHECK_STEPS),
                                np.asarray(curves))
    print(f"grad-check: {_GRADCHECK_PAIRS} directions, worst best-in-sweep "
          f"relative error {worst_best:.3e} (tolerance {_GRADCHECK_TOL:g})")
    if worst_best > _GRADCHECK_TOL:
        _emit_failures(cfg, [{"check": "gradient-fd-mismatch",
                              "value": worst_best,
                              "threshold": _GRADCHECK_TOL}])
        return 1
    return 0


def cmd_verify(cfg: ProblemConfig) -> int:
    results = run_verify()
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark}  {r.check:42s} value={r.value:.6e} "
              f"threshold={r.threshold:.6e}")
    failures = [r for r in results if not r.passed]
    print(f"verify: {len(results) - len(failures)}/{len(results)} checks passed")
    if failures:
        _emit_failures(cfg, [{"check": r.check, "value": r.value,
                              "threshold": r.threshold} for r in failures])
        return 1
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "grad-check": cmd_grad_check,
    "verify": cmd_verify,
    "make-targets": cmd_make_targets,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlch",
        description="Desk-scale laboratory for a convective nonlocal "
                    "Cahn-Hilliard system and its velocity control.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True,
                       help="path to the INI problem description")
        p.add_argument("--out", help="output directory (overrides [output])")
        p.add_argument("--seed", type=int,
                       help="random seed (overrides [output] seed)")
        p.add_argument("--threads", type=int,
                       help="FFT worker count (fallback: NLCH_THREADS)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        set_workers(args.threads)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.out is not None:
            cfg = replace(cfg, out_dir=args.out)
        os.makedirs(cfg.out_dir, exist_ok=True)
        return _COMMANDS[args.command](cfg)
    except NlchError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
