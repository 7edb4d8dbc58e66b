"""Cross-validation checks between the solver, the closed forms and the simulator.

Each ``check_*`` function returns a :class:`Check`; :func:`run_checks` runs
them in order.  The same checks back ``ehaoi verify`` and the acceptance
tests.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import closed_form as cf
from . import solver
from .model import Discipline, EhMode, SystemParams, build_model
from .sim import SimConfig, replicate

RHOS = (0.5, 1.0, 2.0)
BETAS = (0.5, 1.0, 2.0, 50.0)
BATTERIES = (1, 2, 5, 10)
CONFIGS = tuple(itertools.product(Discipline, EhMode))
S_BARS = (-1.0, -0.5, -0.1, 0.0, 0.1)


@dataclass
class Check:
    name: str
    passed: bool
    summary: str
    details: list[str] = field(default_factory=list)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.summary}"


def rel_dev(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _params(rho, beta, B, mu=1.0):
    return SystemParams.from_utilization(rho, beta, B, mu)


def check_when_empty_moments(tol: float = 1e-9, time_limit: float = 1.0) -> Check:
    worst, slowest, bad = 0.0, 0.0, []
    for d in Discipline:
        for rho, beta, B in itertools.product(RHOS, BETAS, BATTERIES):
            p = _params(rho, beta, B)
            start = time.perf_counter()
            model = build_model(p, d, EhMode.WHEN_EMPTY)
            for k in (1, 2):
                a = solver.aoi_moment(model, k)
                c = cf.moments_closed(p, d, EhMode.WHEN_EMPTY, k).value
                dev = rel_dev(a, c)
                worst = max(worst, dev)
                if dev > tol:
                    bad.append(f"{d.value} rho={rho} beta={beta} B={B} k={k}: solver {a!r} closed {c!r}")
            slowest = max(slowest, time.perf_counter() - start)
    ok = not bad and slowest < time_limit
    return Check("1 solver vs closed form, idle-only harvesting", ok,
                 f"max rel dev {worst:.2e} (tol {tol:g}), slowest point {slowest * 1e3:.1f} ms", bad)


def anytime_cases():
    for d in Discipline:
        for B in ((2,) if d is Discipline.PW else (1, 2)):
            yield d, B


def check_anytime_moments(tol: float = 1e-9) -> Check:
    worst, bad = 0.0, []
    for d, B in anytime_cases():
        for rho, beta in itertools.product(RHOS, BETAS):
            p = _params(rho, beta, B)
            model = build_model(p, d, EhMode.ANYTIME)
            for k in (1, 2):
                a = solver.aoi_moment(model, k)
                c = cf.moments_closed(p, d, EhMode.ANYTIME, k).value
                dev = rel_dev(a, c)
                worst = max(worst, dev)
                if dev > tol:
                    bad.append(f"{d.value} rho={rho} beta={beta} B={B} k={k}: solver {a!r} closed {c!r}")
    return Check("2 solver vs closed form, anytime harvesting", not bad, f"max rel dev {worst:.2e} (tol {tol:g})", bad)


def check_mgf(tol: float = 1e-9, unit_tol: float = 1e-12) -> Check:
    p = _params(1.0, 2.0, 2)
    worst, unit, bad = 0.0, 0.0, []
    for d, m in CONFIGS:
        model = build_model(p, d, m)
        for s in S_BARS:
            a = solver.mgf(model, s * p.mu)
            c = cf.mgf_closed(p, d, m, s).value
            dev = rel_dev(a.value, c)
            worst = max(worst, dev)
            if dev > tol or not a.converged:
                bad.append(f"{d.value}-{m.value} s={s}: solver {a.value!r} closed {c!r}")
            if s == 0.0:
                u = max(abs(a.value - 1), abs(c - 1))
                unit = max(unit, u)
                if u > unit_tol:
                    bad.append(f"{d.value}-{m.value}: M(0) off by {u:.1e}")
    return Check("3 MGF solver vs closed form", not bad, f"max rel dev {worst:.2e}, max |M(0)-1| {unit:.1e}", bad)


def check_spot_values(closed_tol: float = 1e-12, solver_tol: float = 1e-9) -> Check:
    p = _params(1.0, 1.0, 1)
    np_model = build_model(p, Discipline.NP, EhMode.WHEN_EMPTY)
    ps_model = build_model(p, Discipline.PS, EhMode.WHEN_EMPTY)
    cases = [
        ("NP mean", 3.0, cf.moments_closed(p, "np", "empty", 1).value, solver.aoi_moment(np_model, 1)),
        ("NP second moment", 38 / 3, cf.moments_closed(p, "np", "empty", 2).value, solver.aoi_moment(np_model, 2)),
        ("NP M(-1)", 7 / 48, cf.mgf_closed(p, "np", "empty", -1.0).value, solver.mgf(np_model, -1.0).value),
        ("PS mean", 2.5, cf.moments_closed(p, "ps", "empty", 1).value, solver.aoi_moment(ps_model, 1)),
    ]
    bad = []
    for name, want, closed, num in cases:
        if rel_dev(closed, want) > closed_tol:
            bad.append(f"{name}: closed {closed!r} vs {want!r}")
        if rel_dev(num, want) > solver_tol:
            bad.append(f"{name}: solver {num!r} vs {want!r}")
    return Check("4 spot values", not bad, "3.0, 38/3, 7/48, 2.5" if not bad else f"{len(bad)} mismatches", bad)


def check_symmetry(n_pairs: int = 20, tol: float = 1e-12, seed: int = 5) -> Check:
    rng = np.random.default_rng(seed)
    worst, bad = 0.0, []
    done = 0
    while done < n_pairs:
        rho, beta = rng.uniform(0.1, 5.0, size=2)
        B = int(rng.integers(1, 11))
        if abs(rho - beta) < 1e-3:
            continue
        done += 1
        a = cf.moments_closed(_params(rho, beta, B), "np", "empty", 2).value
        b = cf.moments_closed(_params(beta, rho, B), "np", "empty", 2).value
        dev = rel_dev(a, b)
        worst = max(worst, dev)
        if dev > tol:
            bad.append(f"rho={rho:.6g} beta={beta:.6g} B={B}: {a!r} vs {b!r}")
    return Check("5 NP second-moment symmetry in rho and beta", not bad, f"{n_pairs} pairs, max rel dev {worst:.2e}", bad)


def check_ordering(slack: float = 1e-12) -> Check:
    bad, n = [], 0
    for m in EhMode:
        for rho, beta, B in itertools.product(RHOS, BETAS, BATTERIES):
            p = _params(rho, beta, B)
            for k in (1, 2):
                ps = cf.moment(p, Discipline.PS, m, k)
                for other in (Discipline.NP, Discipline.PW):
                    v = cf.moment(p, other, m, k)
                    n += 1
                    if ps > v * (1 + slack):
                        bad.append(f"{m.value} rho={rho} beta={beta} B={B} k={k}: PS {ps!r} > {other.value} {v!r}")
    return Check("6 PS never worse than NP or PW", not bad, f"{n} comparisons", bad)


def check_limits(beta: float = 1e6, tol: float = 1e-4) -> Check:
    worst, bad = 0.0, []
    for d, m in CONFIGS:
        for rho, B in itertools.product(RHOS, BATTERIES):
            p = _params(rho, beta, B)
            if not cf.has_closed_moment(p, d, m):
                continue
            for k in (1, 2):
                v = cf.moments_closed(p, d, m, k).value
                lim = cf.limits_beta_inf(p, d, m, k).value
                dev = rel_dev(v, lim)
                worst = max(worst, dev)
                if dev > tol:
                    bad.append(f"{d.value}-{m.value} rho={rho} B={B} k={k}: {v!r} vs limit {lim!r}")
    lim = cf.limits_beta_inf(_params(1.0, beta, 2), "pw", "empty", 1).value
    if rel_dev(lim, 2.5) > 1e-12:
        bad.append(f"PW idle-only limit at rho=1, B=2 is {lim!r}, expected 2.5")
    dep = cf.limits_beta_inf(_params(1.0, beta, 5), "pw", "empty", 1).value
    if rel_dev(dep, lim) < 1e-6:
        bad.append("PW idle-only limit does not depend on B")
    return Check("7 large-beta limits", not bad, f"beta={beta:g}, max rel dev {worst:.2e}; PW limit(rho=1,B=2)={lim:g}", bad)


MC_POINTS = ((0.5, 1.0, 1), (1.0, 2.0, 2), (2.0, 1.5, 2))


def check_monte_carlo(
    horizon: float = 1e5,
    reps: int = 10,
    seed: int = 2024,
    level: float = 0.99,
    mgf_sigmas: float = 3.0,
    warmup: float = 100.0,
) -> Check:
    start = time.perf_counter()
    bad, lines = [], []
    for d, m in CONFIGS:
        for i, (rho, beta, B) in enumerate(MC_POINTS):
            p = _params(rho, beta, B)
            cfg = SimConfig(p, d, m, horizon=horizon, warmup=warmup, seed=seed + i, mgf_points=(-0.5, -0.1))
            res = replicate(cfg, reps, workers=1)
            tag = f"{d.value}-{m.value} rho={rho} beta={beta} B={B}"
            for k, stat in ((1, "age"), (2, "age_sq")):
                want = cf.moments_closed(p, d, m, k).value
                lo, hi = res.ci(stat, level)
                lines.append(f"{tag} k={k}: analytic {want:.6g}, CI [{lo:.6g}, {hi:.6g}]")
                if not lo <= want <= hi:
                    bad.append(lines[-1])
            for s in (-0.5, -0.1):
                want = cf.mgf_closed(p, d, m, s).value
                got, se = res.mgf_at(s * p.mu)
                z = abs(got - want) / se
                lines.append(f"{tag} s={s}: analytic {want:.6g}, sim {got:.6g} ({z:.2f} stderr)")
                if z > mgf_sigmas:
                    bad.append(lines[-1])
    elapsed = time.perf_counter() - start
    return Check("8 Monte Carlo agreement", not bad,
                 f"{len(lines) - len(bad)}/{len(lines)} statistics consistent, {elapsed:.1f} s", bad or lines)


def check_np_ps_gap(tol: float = 1e-9) -> Check:
    worst, bad, flags = 0.0, [], []
    for rho, B in itertools.product(RHOS, (1, 2, 5)):
        p = _params(rho, rho, B)
        gap = cf.discipline_gap(p, EhMode.WHEN_EMPTY, 1, "np-ps")
        want = rho / (p.mu * (1 + rho))
        dev = rel_dev(gap, want)
        worst = max(worst, dev)
        if dev > tol:
            bad.append(f"rho=beta={rho} B={B}: gap {gap!r} vs {want!r}")
        printed = cf.printed_np_ps_gap(p, 1)
        if rel_dev(printed, gap) > tol:
            flags.append(f"rho=beta={rho} B={B}: printed equal-rate gap {printed:.6g} differs from computed {gap:.6g}")
    summary = f"gap = rho/(mu(1+rho)) to {worst:.1e}; printed equal-rate branch deviates at {len(flags)}/9 points"
    return Check("9 NP-PS mean gap at rho = beta", not bad, summary, bad + flags)


def check_mgf_derivatives(h: float = 1e-4, tol1: float = 1e-4, tol2: float = 1e-3) -> Check:
    p = _params(1.0, 2.0, 2)
    bad, worst1, worst2 = [], 0.0, 0.0
    for d, m in CONFIGS:
        model = build_model(p, d, m)
        curve = solver.mgf_curve(model, [-h, 0.0, h])
        e1, e2 = solver.aoi_moment(model, 1), solver.aoi_moment(model, 2)
        d1, d2 = rel_dev(curve.first_derivative, e1), rel_dev(curve.second_derivative, e2)
        worst1, worst2 = max(worst1, d1), max(worst2, d2)
        if d1 > tol1 or d2 > tol2:
            bad.append(f"{d.value}-{m.value}: M'(0)={curve.first_derivative!r} vs {e1!r}, M''(0)={curve.second_derivative!r} vs {e2!r}")
    return Check("10 MGF derivatives vs moments", not bad, f"max rel dev {worst1:.1e} (k=1), {worst2:.1e} (k=2)", bad)


ANALYTIC_CHECKS: tuple[Callable[[], Check], ...] = (
    check_when_empty_moments,
    check_anytime_moments,
    check_mgf,
    check_spot_values,
    check_symmetry,
    check_ordering,
    check_limits,
    check_np_ps_gap,
    check_mgf_derivatives,
)


def run_checks(quick: bool = False) -> list[Check]:
    checks = [c() for c in ANALYTIC_CHECKS]
    if not quick:
        checks.insert(7, check_monte_carlo())
    return checks
