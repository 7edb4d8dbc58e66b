"""Discrete-event Monte Carlo simulation of the energy-harvesting status-update queue.

The simulator works on the physical system (update and energy packets,
battery, server, one-slot waiting buffer for LCFS-PW), not on the SHS model,
so it is an independent check of both the solver and the closed forms.

Inter-event times come from competing exponential clocks: with total active
rate ``R`` the next event is ``Exp(R)`` away and is of each kind with
probability proportional to its rate.  The age process is piecewise linear,
so the time integrals of ``age``, ``age**2`` and ``exp(s * age)`` are added
exactly per segment.  Standard errors use batch means over the measured
window.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import stats

from .model import Discipline, EhMode, SystemParams

N_BATCHES = 100
CHUNK = 1 << 16

_DISCIPLINE_CODE = {Discipline.NP: 0, Discipline.PS: 1, Discipline.PW: 2}


@dataclass(frozen=True)
class SimConfig:
    params: SystemParams
    discipline: Discipline
    eh_mode: EhMode
    horizon: float
    warmup: float = 0.0
    seed: int = 0
    mgf_points: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "discipline", Discipline(self.discipline))
        object.__setattr__(self, "eh_mode", EhMode(self.eh_mode))
        object.__setattr__(self, "mgf_points", tuple(float(s) for s in self.mgf_points))
        if not (math.isfinite(self.horizon) and self.horizon > self.warmup >= 0):
            raise ValueError("need horizon > warmup >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class SimResult:
    mean_age: float
    mean_age_sq: float
    empirical_mgf: tuple[float, ...]
    mgf_points: tuple[float, ...]
    stderr_age: float
    stderr_age_sq: float
    stderr_mgf: tuple[float, ...]
    events_processed: int
    effective_time: float
    # time fraction spent in each (energy, updates) pair, shape (B + 1, 3)
    occupancy: np.ndarray = field(repr=False)
    reps: int = 1
    # degrees of freedom behind the stderr values
    dof: int = N_BATCHES - 1

    def mgf_at(self, s: float) -> tuple[float, float]:
        i = self.mgf_points.index(float(s))
        return self.empirical_mgf[i], self.stderr_mgf[i]

    def ci(self, stat: str = "age", level: float = 0.99) -> tuple[float, float]:
        """Two-sided Student-t confidence interval for ``age`` or ``age_sq``."""
        mean, se = {
            "age": (self.mean_age, self.stderr_age),
            "age_sq": (self.mean_age_sq, self.stderr_age_sq),
        }[stat]
        q = float(stats.t.ppf(0.5 + level / 2, self.dof))
        return mean - q * se, mean + q * se


@numba.njit(cache=True)
def _segment(acc, b, a, tau, svals):
    # integrals of age, age^2 and exp(s*age) over an age ramp from a to a + tau
    e = a + tau
    acc[b, 0] += tau
    acc[b, 1] += a * tau + 0.5 * tau * tau
    acc[b, 2] += (e * e * e - a * a * a) / 3.0
    for j in range(svals.shape[0]):
        s = svals[j]
        if s == 0.0:
            acc[b, 3 + j] += tau
        else:
            acc[b, 3 + j] += (math.exp(s * e) - math.exp(s * a)) / s


@numba.njit(cache=True)
def _advance(state, occ, acc, expo, unif, rates, cfg, svals, warmup, horizon, width):
    """Run events until the random block is used up or the horizon is hit.

    ``state`` = [t, energy, updates, gen_service, gen_waiting, gen_delivered,
    events, done]; it is updated in place so runs can span several blocks.
    """
    lam, eta, mu = rates[0], rates[1], rates[2]
    disc, anytime, B = cfg[0], cfg[1], cfg[2]
    t, e, u = state[0], int(state[1]), int(state[2])
    g1, g2, gd = state[3], state[4], state[5]
    events = int(state[6])
    n_batches = acc.shape[0]
    for i in range(expo.shape[0]):
        # active clocks
        r_arr = 0.0
        if u == 0:
            if e >= 1:
                r_arr = lam
        elif disc == 1:
            r_arr = lam
        elif disc == 2 and (u == 2 or e >= 2):
            r_arr = lam
        r_eta = 0.0
        if e < B and (u == 0 or anytime == 1):
            r_eta = eta
        r_mu = mu if u > 0 else 0.0
        total = r_arr + r_eta + r_mu
        dt = expo[i] / total
        t_next = t + dt
        done = t_next >= horizon
        if done:
            t_next = horizon
        # accumulate the age ramp over [t, t_next] restricted to the window
        lo = t if t > warmup else warmup
        if t_next > lo:
            occ[e, u] += t_next - lo
            pos = lo
            while pos < t_next:
                b = int((pos - warmup) / width)
                if b >= n_batches:
                    b = n_batches - 1
                edge = warmup + (b + 1) * width
                stop = t_next if (t_next < edge or b == n_batches - 1) else edge
                _segment(acc, b, pos - gd, stop - pos, svals)
                pos = stop
        t = t_next
        if done:
            state[7] = 1.0
            break
        events += 1
        x = unif[i] * total
        if x < r_arr:
            if u == 0:
                g1 = t
                u = 1
            elif disc == 1:
                g1 = t
            elif u == 1:
                g2 = t
                u = 2
            else:
                g2 = t
        elif x < r_arr + r_eta:
            e += 1
        else:
            gd = g1
            e -= 1
            if u == 2:
                g1 = g2
                u = 1
            else:
                u = 0
    state[0], state[1], state[2] = t, e, u
    state[3], state[4], state[5] = g1, g2, gd
    state[6] = events


def _run(cfg: SimConfig, seed_seq: np.random.SeedSequence) -> SimResult:
    p = cfg.params
    rng = np.random.Generator(np.random.Philox(seed_seq))
    svals = np.asarray(cfg.mgf_points, dtype=float)
    rates = np.array([p.lam, p.eta, p.mu])
    icfg = np.array([_DISCIPLINE_CODE[cfg.discipline], int(cfg.eh_mode is EhMode.ANYTIME), p.battery], dtype=np.int64)
    # empty system, one stored energy packet, age 1/mu
    state = np.array([0.0, 1.0, 0.0, 0.0, 0.0, -1.0 / p.mu, 0.0, 0.0])
    occ = np.zeros((p.battery + 1, 3))
    acc = np.zeros((N_BATCHES, 3 + len(svals)))
    width = (cfg.horizon - cfg.warmup) / N_BATCHES
    while state[7] == 0.0:
        expo = rng.standard_exponential(CHUNK)
        unif = rng.random(CHUNK)
        _advance(state, occ, acc, expo, unif, rates, icfg, svals, cfg.warmup, cfg.horizon, width)

    per_batch = acc[:, 1:] / acc[:, :1]
    total_time = acc[:, 0].sum()
    means = acc[:, 1:].sum(axis=0) / total_time
    se = per_batch.std(axis=0, ddof=1) / math.sqrt(N_BATCHES)
    mgf_vals = tuple(float(1.0 if s == 0.0 else v) for s, v in zip(svals, means[2:]))
    mgf_se = tuple(float(0.0 if s == 0.0 else v) for s, v in zip(svals, se[2:]))
    return SimResult(
        mean_age=float(means[0]),
        mean_age_sq=float(means[1]),
        empirical_mgf=mgf_vals,
        mgf_points=cfg.mgf_points,
        stderr_age=float(se[0]),
        stderr_age_sq=float(se[1]),
        stderr_mgf=mgf_se,
        events_processed=int(state[6]),
        effective_time=float(total_time),
        occupancy=occ / total_time,
    )


def simulate(cfg: SimConfig) -> SimResult:
    """One run; the stream is the first child of ``cfg.seed``."""
    return _run(cfg, np.random.SeedSequence(int(cfg.seed)).spawn(1)[0])


def _pool(results: list[SimResult]) -> SimResult:
    n = len(results)
    if n == 1:
        return results[0]

    def between(values):
        arr = np.asarray(values, dtype=float)
        return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(n))

    m1, s1 = between([r.mean_age for r in results])
    m2, s2 = between([r.mean_age_sq for r in results])
    mgf = [between([r.empirical_mgf[j] for r in results]) for j in range(len(results[0].mgf_points))]
    return SimResult(
        mean_age=m1,
        mean_age_sq=m2,
        empirical_mgf=tuple(v for v, _ in mgf),
        mgf_points=results[0].mgf_points,
        stderr_age=s1,
        stderr_age_sq=s2,
        stderr_mgf=tuple(e for _, e in mgf),
        events_processed=sum(r.events_processed for r in results),
        effective_time=sum(r.effective_time for r in results),
        occupancy=sum(r.occupancy for r in results) / n,
        reps=n,
        dof=n - 1,
    )


def replicate(cfg: SimConfig, n_reps: int, workers: int | None = None) -> SimResult:
    """Independent replications pooled by between-replication standard error.

    Replication ``i`` uses child ``i`` of ``SeedSequence(cfg.seed)``, so
    ``n_reps=1`` reproduces :func:`simulate` and results do not depend on
    ``workers``.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    seqs = np.random.SeedSequence(int(cfg.seed)).spawn(n_reps)
    if workers is None:
        workers = min(n_reps, os.cpu_count() or 1)
    if workers <= 1 or n_reps == 1:
        results = [_run(cfg, s) for s in seqs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run, [cfg] * n_reps, seqs))
    return _pool(results)
