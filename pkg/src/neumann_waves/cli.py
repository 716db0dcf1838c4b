"""Command-line experiments: ``run``, ``sweep``, ``check`` and ``convergence``.

    python -m neumann_waves run case1.cfg
    python -m neumann_waves sweep case1.cfg --axis h --values exp_decay "sine(0.2)" "saturating(5)" sqrt
    python -m neumann_waves check case1.cfg
    python -m neumann_waves convergence mode.cfg --levels 4

Exit status is 0 on success, 1 on a validation error and 2 when a solve
diverged (a partial CSV is still written).
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .artifacts import format_float, write_csv, write_svg
from .bounds import (
    BoundUndefinedError,
    DampedBoundParams,
    DecayFit,
    FitDomainError,
    data_norms,
    damped_bound_curve,
    decay_fit,
    visco_envelope,
)
from .config import KNOWN_KEYS, RunConfig, load_config, parse_config
from .core import SolutionField, ValidationError
from .damped import damped_solve
from .energy import EnergySeries, energy_damped, energy_modified, energy_rate_residual
from .inputs import check_A1, check_A2, check_damping, check_decay_hypothesis
from .oracle import mixed_eigenpairs, modal_damped_solution, pairwise_orders, observed_order
from .viscoelastic import visco_solve

__all__ = ["RunReport", "ConvergenceTable", "run", "sweep", "check", "convergence", "main", "WORKERS_ENV"]

log = logging.getLogger(__name__)

WORKERS_ENV = "NEUMANN_WAVES_WORKERS"

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED = 0, 1, 2


@dataclass
class RunReport:
    label: str
    config: dict[str, str]
    checks: dict[str, str] = field(default_factory=dict)
    diverged: bool = False
    wall_time: float = 0.0
    manifest: list[Path] = field(default_factory=list)
    error: Optional[str] = None
    energy: Optional[EnergySeries] = None
    fit: Optional[DecayFit] = None

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return EXIT_INVALID
        return EXIT_DIVERGED if self.diverged else EXIT_OK


# --------------------------------------------------------------------------
# checks
# --------------------------------------------------------------------------


def _verdict(ok: bool, text: str) -> str:
    return ("PASS" if ok else "WARN") + (f" {text}" if text else "")


def run_checks(cfg: RunConfig) -> dict[str, str]:
    """Hypothesis checks keyed by name; values start with PASS or WARN."""
    out: dict[str, str] = {}
    grid, fn = cfg.grid, cfg.functions
    if cfg.kind in ("classical", "damped"):
        out["cfl"] = _verdict(grid.r <= 1.0 + 1e-12, f"r = {grid.r:.6g}")
    if "a" in fn:
        rep = check_damping(fn["a"], grid)
        out["damping"] = _verdict(rep.positive, f"a_min = {rep.a_min:.6g}, a_max = {rep.a_max:.6g}")
    g = fn.get("g")
    if g is not None and not g.is_zero:
        r1 = check_A1(g)
        out["A1"] = _verdict(bool(r1.a1_pass), f"int g = {r1.integral_estimate:.6g}, L_max = {r1.L_max:.6g}"
                             + (f" ({r1.message})" if r1.message else ""))
        r2 = check_A2(g, grid)
        out["A2"] = _verdict(bool(r2.a2_pass), f"k = {r2.k:.6g}" + (f" ({r2.message})" if r2.message else ""))
    h = fn.get("h")
    if h is not None:
        rep = check_decay_hypothesis(h, grid)
        out["h_decay"] = _verdict(rep.satisfied, f"gamma = {rep.gamma_estimate:.6g}")
    warns = cfg.problem().compatibility_warnings()
    out["compatibility"] = _verdict(not warns, "; ".join(warns))
    return out


def check(cfg: RunConfig, stream=None) -> RunReport:
    stream = sys.stdout if stream is None else stream
    checks = run_checks(cfg)
    width = max(len(k) for k in checks)
    for k, v in checks.items():
        print(f"{k:<{width}}  {v}", file=stream)
    return RunReport(label=cfg.options["output.name"], config=dict(cfg.raw), checks=checks)


# --------------------------------------------------------------------------
# run
# --------------------------------------------------------------------------


def solve(cfg: RunConfig) -> SolutionField:
    spec = cfg.problem()
    return visco_solve(spec) if cfg.kind == "viscoelastic" else damped_solve(spec)


def _energy(cfg: RunConfig, field_: SolutionField, stride: int) -> EnergySeries:
    if cfg.kind == "viscoelastic":
        return energy_modified(field_, cfg.functions["g"], stride=stride)
    return energy_damped(field_, stride=stride)


def run(cfg: RunConfig) -> RunReport:
    """Solve, compute the energy (and optional residual, bound, fit) and write CSV/SVG."""
    t0 = time.perf_counter()
    opts = cfg.options
    report = RunReport(label=opts["output.name"], config=dict(cfg.raw), checks=run_checks(cfg))
    field_ = solve(cfg)
    report.diverged = field_.diverged
    meta: dict[str, object] = {f"config.{k}": v for k, v in cfg.raw.items()}
    meta.update({f"check.{k}": v for k, v in report.checks.items()})
    meta["diverged"] = str(field_.diverged).lower()
    if field_.diverged:
        meta["diverged_at_level"] = field_.diverged_at

    columns: dict[str, np.ndarray] = {}
    series = None
    if field_.valid_levels >= 2:
        stride = 1 if opts["energy.residual"] else opts["energy.stride"]
        # a diverging field has huge but finite values just before the blow-up
        with np.errstate(over="ignore", invalid="ignore"):
            series = _energy(cfg, field_, stride)
        columns = {"t": series.times, "energy": series.values}
        columns.update({k: series.components[k] for k in ("kinetic", "potential", "history")
                        if k in series.components})
        _add_bound(cfg, series, columns, meta)
        if opts["energy.residual"]:
            fn = cfg.functions
            res = energy_rate_residual(field_, series, fn.get("h", cfg.problem().h), a=fn.get("a"), g=fn.get("g"))
            columns["residual"] = np.concatenate(([math.nan], res))
        report.fit = _fit(cfg, series, meta)
    report.energy = series

    out_dir = cfg.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    name = opts["output.name"]
    if not columns:
        columns = {"t": np.array([]), "energy": np.array([])}
    report.manifest.append(write_csv(out_dir / f"{name}.csv", meta, columns))
    if opts["output.svg"] and series is not None:
        curves = {"energy": (series.times, series.values)}
        if "bound" in columns:
            curves["bound"] = (series.times, columns["bound"])
        title = f"{cfg.kind}: " + ", ".join(f"{k} = {cfg.raw[k]}" for k in ("a", "g", "h") if k in cfg.raw)
        report.manifest.append(write_svg(out_dir / f"{name}.svg", curves, title=title,
                                         log_scale=opts["output.log_scale"]))
    report.wall_time = time.perf_counter() - t0
    return report


def _add_bound(cfg: RunConfig, series: EnergySeries, columns: dict, meta: dict) -> None:
    opts = cfg.options
    if not opts["bound.enabled"] or cfg.kind == "classical":
        return
    fn, grid = cfg.functions, cfg.grid
    h = fn.get("h", cfg.problem().h)
    norms = data_norms(fn["phi"], fn["psi"], grid.L)
    try:
        if cfg.kind == "damped":
            rep = check_damping(fn["a"], grid)
            params = DampedBoundParams.build(rep.a_min, rep.a_max, grid.L, alpha=opts["bound.alpha"],
                                             delta=opts["bound.delta"])
            curve = damped_bound_curve(params, h, norms, grid, energy=series, margin=opts["bound.margin"])
            for k in ("c_p", "eps0", "alpha", "delta", "delta1", "c"):
                meta[f"bound.{k}"] = format_float(getattr(curve.params, k))
        else:
            curve = visco_envelope(fn["g"], h, grid, norms, params=cfg.bound_params(), energy=series,
                                   margin=opts["bound.margin"])
            for k in ("eps", "eps1", "eps2", "c", "kappa", "alpha2", "c_eps", "L_kernel", "xi_floor"):
                meta[f"bound.{k}"] = format_float(getattr(curve.params, k))
    except (BoundUndefinedError, ValidationError) as e:
        meta["bound"] = f"not available: {e}"
        return
    columns["bound"] = np.interp(series.times, curve.times, curve.envelope)


def _fit(cfg: RunConfig, series: EnergySeries, meta: dict) -> Optional[DecayFit]:
    t_end = float(series.times[-1])
    t_a = cfg.options["fit.t_a"] if cfg.options["fit.t_a"] is not None else 0.5 * t_end
    t_b = cfg.options["fit.t_b"] if cfg.options["fit.t_b"] is not None else t_end
    try:
        fit = decay_fit(series, (t_a, min(t_b, t_end)))
    except FitDomainError as e:
        meta["fit"] = f"not available: {e}"
        return None
    meta["fit.window"] = f"{format_float(fit.window[0])}, {format_float(fit.window[1])}"
    meta["fit.rate"] = format_float(fit.rate)
    meta["fit.r_squared"] = format_float(fit.r_squared)
    return fit


def _run_isolated(raw: dict[str, str]) -> RunReport:
    label = raw.get("output.name", "run")
    try:
        cfg = parse_config(raw)
        return run(cfg)
    except (ValidationError, ArithmeticError, np.linalg.LinAlgError) as e:
        return RunReport(label=label, config=dict(raw), error=str(e))


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------


def _slug(value: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", value).strip("_") or "value"


def worker_count(explicit: Optional[int] = None) -> int:
    if explicit is not None:
        return max(1, explicit)
    env = os.environ.get(WORKERS_ENV, "").strip()
    if not env:
        return 1
    try:
        return max(1, int(env))
    except ValueError:
        raise ValidationError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None


def sweep(cfg: RunConfig, axis: str, values: Sequence[str], workers: Optional[int] = None) -> list[RunReport]:
    """One run per value of ``axis``, each writing into ``<output.dir>/<axis>=<value>/``.

    A run that fails validation is reported and the sweep carries on. A
    combined ``sweep.csv`` (columns ``index,t,energy``) lands in ``output.dir``.
    """
    if not values:
        return []
    if axis not in KNOWN_KEYS:
        raise ValidationError(f"--axis {axis!r} is not a configuration key")
    base_dir = cfg.output_dir
    jobs = []
    for v in values:
        raw = dict(cfg.raw)
        raw[axis] = v
        raw["output.dir"] = str(base_dir / f"{_slug(axis)}={_slug(v)}")
        jobs.append(raw)
    n = worker_count(workers)
    if n > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(n, len(jobs))) as ex:
            reports = list(ex.map(_run_isolated, jobs))
    else:
        reports = [_run_isolated(j) for j in jobs]
    for v, rep in zip(values, reports):
        rep.label = f"{axis}={v}"

    idx, tt, ee = [], [], []
    meta = {f"config.{k}": v for k, v in cfg.raw.items()}
    meta["sweep.axis"] = axis
    for i, (v, rep) in enumerate(zip(values, reports)):
        meta[f"sweep.value.{i}"] = v
        if rep.error:
            meta[f"sweep.error.{i}"] = rep.error
        if rep.energy is not None:
            idx.append(np.full(len(rep.energy.times), float(i)))
            tt.append(rep.energy.times)
            ee.append(rep.energy.values)
    base_dir.mkdir(parents=True, exist_ok=True)
    cat = (lambda xs: np.concatenate(xs) if xs else np.array([]))
    write_csv(base_dir / "sweep.csv", meta, {"index": cat(idx), "t": cat(tt), "energy": cat(ee)})
    curves = {f"{axis}={v}": (rep.energy.times, rep.energy.values)
              for v, rep in zip(values, reports) if rep.energy is not None}
    if curves and cfg.options["output.svg"]:
        write_svg(base_dir / "sweep.svg", curves, title=f"sweep over {axis}", log_scale=cfg.options["output.log_scale"])
    return reports


# --------------------------------------------------------------------------
# convergence
# --------------------------------------------------------------------------


@dataclass
class ConvergenceTable:
    oracle: str
    nx: list[int]
    nt: list[int]
    dx: list[float]
    errors: list[float]
    orders: list[float]
    slope: float
    notice: str = ""

    def format(self) -> str:
        lines = []
        if self.notice:
            lines.append(self.notice)
        lines.append(f"oracle: {self.oracle}")
        lines.append(f"{'nx':>7} {'nt':>7} {'dx':>12} {'error':>14} {'order':>7}")
        for j, e in enumerate(self.errors):
            order = f"{self.orders[j - 1]:7.3f}" if j > 0 else " " * 7
            lines.append(f"{self.nx[j]:>7} {self.nt[j]:>7} {self.dx[j]:>12.5g} {e:>14.6g} {order}")
        lines.append(f"least-squares order: {self.slope:.3f}")
        return "\n".join(lines)


def _modal_damping(cfg: RunConfig) -> Optional[float]:
    """Constant damping for the modal oracle, or None when the problem has no closed form."""
    fn = cfg.functions
    for key in ("f", "h"):
        if key in fn and fn[key].family != "zero":
            return None
    if cfg.kind == "classical":
        return 0.0
    if cfg.kind == "viscoelastic":
        return 0.0 if fn["g"].is_zero else None
    a = fn["a"]
    if a.family == "zero":
        return 0.0
    if a.family == "constant":
        return float(a.params[0])
    return None


def convergence(cfg: RunConfig, levels: int, modes: int = 64) -> ConvergenceTable:
    """Nested refinement (dx and dt halved together) with the modal oracle or, failing that, Richardson."""
    if levels < 3:
        raise ValidationError(f"convergence needs at least 3 levels, got {levels}")
    a_const = _modal_damping(cfg)
    base = cfg.grid
    finals = []
    grids = []
    for j in range(levels + (1 if a_const is None else 0)):
        raw = dict(cfg.raw)
        raw.pop("grid.r", None)
        raw["grid.nx"] = str((base.nx - 1) * 2**j + 1)
        raw["grid.nt"] = str((base.nt - 1) * 2**j + 1)
        sub = parse_config(raw)
        fld = solve(sub)
        grids.append(sub.grid)
        finals.append(fld.values[:, -1] if not fld.diverged else np.full(sub.grid.nx, np.inf))

    errors = []
    if a_const is not None:
        oracle = f"modal (K = {modes}, a = {a_const:g})"
        notice = ""
        for gr, u in zip(grids, finals):
            basis = mixed_eigenpairs(gr.L, modes, x=gr.x)
            exact = modal_damped_solution(cfg.functions["phi"], cfg.functions["psi"], a_const, basis, gr.T)
            errors.append(float(np.max(np.abs(u - exact))))
    else:
        oracle = "Richardson (difference to the next finer level)"
        notice = "no closed-form oracle for this problem; falling back to Richardson differences"
        for j in range(levels):
            errors.append(float(np.max(np.abs(finals[j] - finals[j + 1][::2]))))
        grids = grids[:levels]
    orders = list(pairwise_orders(errors))
    dxs = [g.dx for g in grids]
    slope = observed_order(dxs, errors) if all(e > 0 and math.isfinite(e) for e in errors) else math.nan
    return ConvergenceTable(oracle=oracle, nx=[g.nx for g in grids], nt=[g.nt for g in grids], dx=dxs,
                            errors=errors, orders=[float(o) for o in orders], slope=slope, notice=notice)


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="neumann_waves", description="Damped and viscoelastic wave experiments.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log solver warnings")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="solve one configuration and write CSV/SVG")
    r.add_argument("config")
    r.add_argument("-o", "--output-dir", help="override output.dir")

    s = sub.add_parser("sweep", help="run one configuration per value of a key")
    s.add_argument("config")
    s.add_argument("--axis", required=True, help="configuration key to vary, e.g. h or a")
    s.add_argument("--values", nargs="*", default=[], help="values for the axis key")
    s.add_argument("--workers", type=int, help=f"parallel runs (default: ${WORKERS_ENV} or 1)")
    s.add_argument("-o", "--output-dir", help="override output.dir")

    c = sub.add_parser("check", help="check the kernel, damping and boundary hypotheses without solving")
    c.add_argument("config")

    v = sub.add_parser("convergence", help="refinement study against the modal oracle or Richardson")
    v.add_argument("config")
    v.add_argument("--levels", type=int, default=3)
    v.add_argument("--modes", type=int, default=64)
    return p


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "output_dir", None):
        cfg = cfg.with_value("output.dir", args.output_dir)
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        cfg = _load(args)
        if args.command == "run":
            rep = run(cfg)
            for p in rep.manifest:
                print(p)
            if rep.fit is not None:
                print(f"decay rate {rep.fit.rate:.6g} (r^2 = {rep.fit.r_squared:.4f}) on "
                      f"[{rep.fit.window[0]:g}, {rep.fit.window[1]:g}]")
            if rep.diverged:
                print("solution diverged; CSV holds the finite prefix", file=sys.stderr)
            return rep.exit_code
        if args.command == "sweep":
            reps = sweep(cfg, args.axis, args.values, args.workers)
            for rep in reps:
                status = "error: " + rep.error if rep.error else ("diverged" if rep.diverged else "ok")
                print(f"{rep.label}: {status}")
            codes = [r.exit_code for r in reps]
            if EXIT_INVALID in codes:
                return EXIT_INVALID
            return EXIT_DIVERGED if EXIT_DIVERGED in codes else EXIT_OK
        if args.command == "check":
            check(cfg)
            return EXIT_OK
        table = convergence(cfg, args.levels, args.modes)
        print(table.format())
        return EXIT_OK
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
