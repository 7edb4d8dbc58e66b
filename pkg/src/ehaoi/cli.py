"""Command-line front end: ``ehaoi {analyze,simulate,verify,figures}``.

Parameters come from built-in defaults, then an optional JSON scenario file,
then command-line flags.  Comma-separated values sweep an axis; all axes are
combined as a Cartesian product in a fixed order.

Exit codes: 0 ok, 1 verification failure, 2 usage or configuration error,
3 solver/closed-form deviation above tolerance under ``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import closed_form as cf
from . import figures, solver, verify
from .model import Discipline, EhMode, SystemParams, build_model
from .sim import SimConfig, replicate
from .svg import Series, line_chart

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_STRICT = 0, 1, 2, 3

ANALYZE_COLUMNS = (
    "rho", "beta", "B", "mu", "discipline", "eh_mode", "k",
    "solver_value", "closed_value", "rel_dev", "branch", "s", "status",
)
SIM_COLUMNS = ANALYZE_COLUMNS + ("sim_value", "sim_stderr", "ci_lo", "ci_hi", "horizon", "reps", "seed")
FORMATS = ("csv", "json", "svg")


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    rho: list[float] = field(default_factory=lambda: [1.0])
    beta: list[float] = field(default_factory=lambda: [1.0])
    mu: list[float] = field(default_factory=lambda: [1.0])
    battery: list[int] = field(default_factory=lambda: [1])
    discipline: list[Discipline] = field(default_factory=lambda: [Discipline.NP])
    eh_mode: list[EhMode] = field(default_factory=lambda: [EhMode.WHEN_EMPTY])
    k: list[int] = field(default_factory=lambda: [1, 2])
    s_grid: list[float] = field(default_factory=list)
    horizon: float = 1e5
    warmup: float = 100.0
    seed: int = 0
    reps: int = 10
    level: float = 0.99
    out: str = "-"
    format: str = "csv"
    strict: bool = False
    tol: float = 1e-9
    workers: int = 1

    def points(self):
        for rho, beta, mu, B, d, m in itertools.product(
            self.rho, self.beta, self.mu, self.battery, self.discipline, self.eh_mode
        ):
            yield SystemParams.from_utilization(rho, beta, B, mu), d, m


# ---------------------------------------------------------------------------
# scenario parsing


def _as_list(value):
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def _sweep(spec: dict) -> tuple[str, list[float]]:
    try:
        name, start, stop, step = spec["param"], float(spec["start"]), float(spec["stop"]), float(spec["step"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"sweep needs param/start/stop/step: {exc}") from exc
    if step <= 0 or stop < start:
        raise ScenarioError("sweep range is empty")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return name, [round(start + i * step, 12) for i in range(n)]


_ALIASES = {"eh": "eh_mode", "B": "battery", "s-grid": "s_grid"}


def _apply(sc: Scenario, key: str, value) -> None:
    key = _ALIASES.get(key, key).replace("-", "_")
    try:
        if key in ("rho", "beta", "mu"):
            setattr(sc, key, [float(v) for v in _as_list(value)])
        elif key == "s_grid":
            setattr(sc, key, [float(v) for v in _as_list(value)])
        elif key in ("battery", "k"):
            vals = [float(v) for v in _as_list(value)]
            if any(v != int(v) for v in vals):
                raise ScenarioError(f"{key} must be integers")
            setattr(sc, key, [int(v) for v in vals])
        elif key == "discipline":
            vals = _as_list(value)
            sc.discipline = list(Discipline) if vals == ["all"] else [Discipline(v.lower()) for v in vals]
        elif key == "eh_mode":
            vals = _as_list(value)
            sc.eh_mode = list(EhMode) if vals == ["all"] else [EhMode(v.lower()) for v in vals]
        elif key in ("horizon", "warmup", "level", "tol"):
            setattr(sc, key, float(value))
        elif key in ("seed", "reps", "workers"):
            setattr(sc, key, int(value))
        elif key in ("out", "format"):
            setattr(sc, key, str(value))
        elif key == "strict":
            sc.strict = bool(value)
        elif key == "sweep":
            for spec in value if isinstance(value, list) else [value]:
                name, vals = _sweep(spec)
                _apply(sc, name, vals)
        else:
            raise ScenarioError(f"unknown scenario field {key!r}")
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad value for {key}: {value!r}") from exc


def _validate(sc: Scenario) -> None:
    for name in ("rho", "beta", "mu", "battery", "discipline", "eh_mode", "k"):
        if not getattr(sc, name):
            raise ScenarioError(f"{name} is empty")
    if any(not (math.isfinite(v) and v > 0) for v in sc.rho + sc.beta + sc.mu):
        raise ScenarioError("rates must be positive and finite")
    if any(b < 1 for b in sc.battery):
        raise ScenarioError("battery must be >= 1")
    if any(k < 1 for k in sc.k):
        raise ScenarioError("moment orders must be >= 1")
    if any(not math.isfinite(s) for s in sc.s_grid):
        raise ScenarioError("s grid must be finite")
    if sc.format not in FORMATS:
        raise ScenarioError(f"format must be one of {FORMATS}")
    if not sc.horizon > sc.warmup >= 0:
        raise ScenarioError("need horizon > warmup >= 0")
    if sc.reps < 1 or sc.workers < 1:
        raise ScenarioError("reps and workers must be >= 1")
    if not 0 < sc.level < 1:
        raise ScenarioError("level must be in (0, 1)")


SCENARIO_FLAGS = (
    "rho", "beta", "mu", "battery", "discipline", "eh", "k", "s_grid", "horizon", "warmup",
    "seed", "reps", "level", "out", "format", "tol", "workers",
)


def load_scenario(args: argparse.Namespace) -> Scenario:
    sc = Scenario()
    if getattr(args, "scenario", None):
        try:
            data = json.loads(Path(args.scenario).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read scenario file: {exc}") from exc
        if not isinstance(data, dict):
            raise ScenarioError("scenario file must hold a JSON object")
        for key in sorted(data, key=lambda k: k == "sweep"):
            _apply(sc, key, data[key])
    for name in SCENARIO_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            _apply(sc, name, value)
    if getattr(args, "strict", False):
        sc.strict = True
    _validate(sc)
    return sc


# ---------------------------------------------------------------------------
# commands


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _analytic_rows(p: SystemParams, d: Discipline, m: EhMode, ks, s_grid) -> list[dict]:
    model = build_model(p, d, m)
    pi = solver.steady_state(model)
    vecs = solver.moment_vectors(model, pi, max(ks))
    base = dict(rho=p.rho, beta=p.beta, B=p.battery, mu=p.mu, discipline=d.value, eh_mode=m.value)
    rows = []
    for k in ks:
        num = vecs.aoi_moment(k, model.aoi_component)
        closed = branch = None
        status = "no-closed-form"
        if k in (1, 2) and cf.has_closed_moment(p, d, m):
            res = cf.moments_closed(p, d, m, k)
            closed, branch, status = res.value, res.branch.value, "ok"
        rows.append(dict(base, k=k, solver_value=num, closed_value=closed,
                         rel_dev=None if closed is None else verify.rel_dev(num, closed),
                         branch=branch, s=None, status=status))
    for s_bar in s_grid:
        sample = solver.mgf(model, s_bar * p.mu, pi=pi)
        closed = branch = None
        try:
            res = cf.mgf_closed(p, d, m, s_bar)
            closed, branch = res.value, res.branch.value
        except cf.PoleViolation:
            pass
        ok = sample.converged and closed is not None
        rows.append(dict(base, k="mgf", solver_value=sample.value if sample.converged else None,
                         closed_value=closed, rel_dev=verify.rel_dev(sample.value, closed) if ok else None,
                         branch=branch, s=s_bar, status="ok" if sample.converged else "diverged"))
    return rows


def _analyze_point(job):
    p, d, m, ks, s_grid = job
    return _analytic_rows(p, d, m, ks, s_grid)


def _map(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def _simulate_point(job):
    p, d, m, sc, index = job
    seed = _point_seed(sc.seed, index)
    cfg = SimConfig(p, d, m, horizon=sc.horizon, warmup=sc.warmup, seed=seed,
                    mgf_points=tuple(s * p.mu for s in sc.s_grid))
    res = replicate(cfg, sc.reps, workers=1)
    rows = _analytic_rows(p, d, m, [k for k in sc.k if k in (1, 2)], sc.s_grid)
    extra = dict(horizon=sc.horizon, reps=sc.reps, seed=seed)
    q = float(stats.t.ppf(0.5 + sc.level / 2, res.dof))
    for row in rows:
        if row["k"] == 1:
            val, se = res.mean_age, res.stderr_age
        elif row["k"] == 2:
            val, se = res.mean_age_sq, res.stderr_age_sq
        else:
            val, se = res.mgf_at(row["s"] * p.mu)
        row.update(extra, sim_value=val, sim_stderr=se, ci_lo=val - q * se, ci_hi=val + q * se)
    return rows


def _write(rows: list[dict], columns, sc: Scenario, title: str) -> None:
    if sc.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])
        text = buf.getvalue()
    elif sc.format == "json":
        text = json.dumps({"columns": list(columns), "rows": [{c: r.get(c) for c in columns} for r in rows]}, indent=1) + "\n"
    else:
        groups: dict[str, list[dict]] = {}
        for r in rows:
            if r["k"] != "mgf" and r["solver_value"] is not None:
                key = f"{r['discipline']}-{r['eh_mode']} B={r['B']} beta={r['beta']:g} k={r['k']}"
                groups.setdefault(key, []).append(r)
        series = [Series(key, [r["rho"] for r in g], [r["solver_value"] for r in g]) for key, g in groups.items()]
        text = line_chart(series, title=title, xlabel="rho", ylabel="moment of AoI")
    if sc.out == "-":
        sys.stdout.write(text)
    else:
        Path(sc.out).parent.mkdir(parents=True, exist_ok=True)
        Path(sc.out).write_text(text)


def _strict_breach(rows, sc: Scenario) -> bool:
    devs = [r["rel_dev"] for r in rows if r["rel_dev"] is not None]
    worst = max(devs, default=0.0)
    if sc.strict and worst > sc.tol:
        print(f"strict: max solver/closed-form deviation {worst:.3e} exceeds {sc.tol:g}", file=sys.stderr)
        return True
    return False


def cmd_analyze(args) -> int:
    sc = load_scenario(args)
    jobs = [(p, d, m, sc.k, sc.s_grid) for p, d, m in sc.points()]
    rows = [r for chunk in _map(_analyze_point, jobs, sc.workers) for r in chunk]
    _write(rows, ANALYZE_COLUMNS, sc, "solver moments")
    return EXIT_STRICT if _strict_breach(rows, sc) else EXIT_OK


def cmd_simulate(args) -> int:
    sc = load_scenario(args)
    if any(k not in (1, 2) for k in sc.k):
        raise ScenarioError("simulation reports k in {1, 2} only")
    jobs = [(p, d, m, sc, i) for i, (p, d, m) in enumerate(sc.points())]
    rows = [r for chunk in _map(_simulate_point, jobs, sc.workers) for r in chunk]
    _write(rows, SIM_COLUMNS, sc, "simulated moments")
    return EXIT_STRICT if _strict_breach(rows, sc) else EXIT_OK


def cmd_verify(args) -> int:
    checks = verify.run_checks(quick=args.quick)
    for c in checks:
        print(c.line())
        if not c.passed or args.verbose:
            for d in c.details:
                print(f"    {d}")
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_figures(args) -> int:
    if args.which not in figures.FIGURES:
        raise ScenarioError(f"unknown figure {args.which!r}; choose from {', '.join(figures.FIGURES)}")
    fmt = args.format or "csv"
    if fmt not in FORMATS:
        raise ScenarioError(f"format must be one of {FORMATS}")
    out = Path(args.out or "figures")
    out.mkdir(parents=True, exist_ok=True)
    points = figures.figure_points(args.which)
    if fmt == "json":
        rows = [dict(zip(figures.COLUMNS, p.row())) for p in points]
        (out / f"{args.which}.json").write_text(json.dumps({"columns": list(figures.COLUMNS), "rows": rows}, indent=1) + "\n")
    else:
        with open(out / f"{args.which}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(figures.COLUMNS)
            for p in points:
                w.writerow([_fmt(v) for v in p.row()])
    for panel, svg in figures.panel_svgs(points).items():
        (out / f"{args.which}_{panel}.svg").write_text(svg)
    print(f"wrote {args.which} ({len(points)} points) to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _scenario_args(p: argparse.ArgumentParser, sim: bool = False) -> None:
    p.add_argument("--scenario", help="JSON scenario file; flags override its fields")
    p.add_argument("--rho", help="server utilisation lambda/mu (comma list sweeps)")
    p.add_argument("--beta", help="energy utilisation eta/mu (comma list sweeps)")
    p.add_argument("--mu", help="service rate (comma list sweeps)")
    p.add_argument("--battery", help="battery capacity B (comma list sweeps)")
    p.add_argument("--discipline", help="np, ps, pw, comma list or 'all'")
    p.add_argument("--eh", help="harvesting mode: empty, any, comma list or 'all'")
    p.add_argument("--k", help="moment orders, e.g. 1,2")
    p.add_argument("--s-grid", dest="s_grid", help="normalised MGF arguments s/mu, comma separated")
    p.add_argument("--out", help="output file ('-' for stdout)")
    p.add_argument("--format", help="csv, json or svg")
    p.add_argument("--strict", action="store_true", help="exit 3 if solver and closed form deviate")
    p.add_argument("--tol", help="relative tolerance for --strict (default 1e-9)")
    p.add_argument("--workers", help="worker processes for sweep points (default 1)")
    if sim:
        p.add_argument("--horizon", help="simulated time per replication")
        p.add_argument("--warmup", help="simulated time discarded at the start")
        p.add_argument("--seed", help="root seed")
        p.add_argument("--reps", help="independent replications")
        p.add_argument("--level", help="confidence level of the interval (default 0.99)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ehaoi", description="AoI moments and MGFs for energy-harvesting status-update queues")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="solver and closed-form moments/MGF")
    _scenario_args(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo estimates next to analytical values")
    _scenario_args(p, sim=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the cross-validation checks")
    p.add_argument("--quick", action="store_true", help="skip the Monte Carlo check")
    p.add_argument("--verbose", action="store_true", help="print details of passing checks too")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("figures", help="curve data and SVG panels for a figure")
    p.add_argument("which", help="fig5, fig6, fig7 or fig8")
    p.add_argument("--out", help="output directory (default ./figures)")
    p.add_argument("--format", help="csv (default) or json; SVG panels are always written")
    p.set_defaults(func=cmd_figures)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
