"""Curve data for the four result figures (moments versus rho, mu = 1).

* ``fig5``: NP and PS moments for B = 1 and B = 2 in both harvesting modes.
* ``fig6``: PW moments for B = 2 in both modes, plus the large-beta limit
  with idle-only harvesting for several batteries.
* ``fig7``: effect of the battery size with idle-only harvesting, beta = 1.5.
* ``fig8``: discipline comparison at B = 2 including the standard deviation.

Closed forms are used where they exist; every point also carries the solver
value so the curves double as a verification sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import closed_form as cf
from . import solver
from .model import Discipline, EhMode, SystemParams, build_model
from .svg import Series, line_chart

FIGURES = ("fig5", "fig6", "fig7", "fig8")
RHO_GRID = tuple(float(r) for r in np.round(np.linspace(0.1, 4.0, 40), 10))
VERIFY_BETAS = (0.5, 1.0, 50.0)
LIMIT = math.inf

COLUMNS = ("figure", "panel", "discipline", "eh_mode", "B", "beta", "rho", "stat", "closed_value", "solver_value")


@dataclass(frozen=True)
class Point:
    figure: str
    panel: str
    discipline: Discipline
    eh_mode: EhMode
    battery: int
    beta: float
    rho: float
    stat: str
    closed_value: float | None
    solver_value: float | None

    def row(self) -> tuple:
        return (
            self.figure,
            self.panel,
            self.discipline.value,
            self.eh_mode.value,
            self.battery,
            "inf" if self.beta == LIMIT else self.beta,
            self.rho,
            self.stat,
            self.closed_value,
            self.solver_value,
        )

    @property
    def value(self) -> float:
        return self.closed_value if self.closed_value is not None else self.solver_value


def _moment_points(figure, panel, d, m, B, beta, rho, with_sigma=False):
    if beta == LIMIT:
        p = SystemParams.from_utilization(rho, 1.0, B)
        vals = {k: (cf.limits_beta_inf(p, d, m, k).value, None) for k in (1, 2)}
    else:
        p = SystemParams.from_utilization(rho, beta, B)
        model = build_model(p, d, m)
        pi = solver.steady_state(model)
        vecs = solver.moment_vectors(model, pi, 2)
        vals = {}
        for k in (1, 2):
            closed = cf.moments_closed(p, d, m, k).value if cf.has_closed_moment(p, d, m) else None
            vals[k] = (closed, vecs.aoi_moment(k))
    out = [Point(figure, panel, d, m, B, beta, rho, f"m{k}", *vals[k]) for k in (1, 2)]
    if with_sigma:
        var = lambda a, b: None if a is None or b is None else math.sqrt(max(b - a * a, 0.0))
        out.append(
            Point(figure, panel, d, m, B, beta, rho, "sigma",
                  var(vals[1][0], vals[2][0]), var(vals[1][1], vals[2][1]))
        )
    return out


def _verification_panels(figure, disciplines, cases):
    pts = []
    for d in disciplines:
        for B, m in cases:
            panel = f"{d.value}-{m.value}-B{B}"
            for beta in VERIFY_BETAS + (LIMIT,):
                for rho in RHO_GRID:
                    pts += _moment_points(figure, panel, d, m, B, beta, rho)
    return pts


def figure_points(which: str) -> list[Point]:
    if which == "fig5":
        cases = ((1, EhMode.WHEN_EMPTY), (2, EhMode.WHEN_EMPTY), (2, EhMode.ANYTIME))
        return _verification_panels(which, (Discipline.NP, Discipline.PS), cases)
    if which == "fig6":
        pts = _verification_panels(which, (Discipline.PW,), ((2, EhMode.WHEN_EMPTY), (2, EhMode.ANYTIME)))
        for B in (2, 3, 5, 10):
            for rho in RHO_GRID:
                pts += _moment_points(which, "pw-empty-limit", Discipline.PW, EhMode.WHEN_EMPTY, B, LIMIT, rho)
        return pts
    if which == "fig7":
        pts = []
        for d in Discipline:
            for B in (1, 2, 3, 5, 10):
                for rho in RHO_GRID:
                    pts += _moment_points(which, f"{d.value}-empty", d, EhMode.WHEN_EMPTY, B, 1.5, rho)
        return pts
    if which == "fig8":
        pts = []
        for m in EhMode:
            for beta in VERIFY_BETAS:
                for d in Discipline:
                    for rho in RHO_GRID:
                        pts += _moment_points(which, f"{m.value}-beta{beta:g}", d, m, 2, beta, rho, with_sigma=True)
        return pts
    raise KeyError(which)


def _series_key(p: Point, figure: str) -> str:
    beta = "inf" if p.beta == LIMIT else f"{p.beta:g}"
    if figure == "fig8":
        return f"{p.discipline.label} {p.stat}"
    if figure == "fig7" or p.panel.endswith("limit"):
        return f"B={p.battery} {p.stat}"
    return f"beta={beta} {p.stat}"


def panel_svgs(points: list[Point]) -> dict[str, str]:
    """One SVG per panel, keyed by panel name."""
    panels: dict[str, dict[str, list[Point]]] = {}
    for p in points:
        panels.setdefault(p.panel, {}).setdefault(_series_key(p, p.figure), []).append(p)
    out = {}
    stat_dash = {"m1": 0, "m2": 1, "sigma": 2}
    for panel, groups in panels.items():
        series = [
            Series(label, [p.rho for p in pts], [p.value for p in pts], dash=stat_dash[pts[0].stat])
            for label, pts in groups.items()
        ]
        fig = next(iter(groups.values()))[0].figure
        out[panel] = line_chart(series, title=f"{fig} {panel}", xlabel="rho", ylabel="moment of AoI")
    return out
