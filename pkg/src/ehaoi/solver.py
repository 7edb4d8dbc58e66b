"""Generic numeric solver for SHS age models.

Everything here works on any :class:`~ehaoi.model.SHSModel`: stationary
probabilities of the discrete chain, per-state moment vectors of any order and
the stationary MGF of the age vector.  All systems are small and dense and
are solved with LU factorisation (LAPACK via numpy).

Moment vectors of order ``j`` come from differentiating the MGF equations
``j`` times at ``s = 0``::

    v_q^(j) * out_q = j * v_q^(j-1) + sum_{l into q} rate_l * v_{src(l)}^(j) @ A_l

with ``v_q^(0) = pi_q * 1``.  Order one is the usual first-moment SHS system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .model import SHSModel


class SingularSystem(np.linalg.LinAlgError):
    """The linear system of a model is singular (malformed model)."""


COND_LIMIT = 1e12


@dataclass(frozen=True)
class StationaryDistribution:
    pi: np.ndarray

    def __getitem__(self, q):
        return self.pi[q]

    def __len__(self):
        return len(self.pi)


@dataclass(frozen=True)
class MomentVectors:
    order: int
    # vectors[j - 1] has shape (n_states, age_dim) and holds v_q^(j)
    vectors: tuple[np.ndarray, ...]

    def of_order(self, j: int) -> np.ndarray:
        return self.vectors[j - 1]

    def aoi_moment(self, j: int, component: int = 0) -> float:
        return float(self.vectors[j - 1][:, component].sum())


@dataclass(frozen=True)
class MgfSample:
    s: float
    value: float
    converged: bool
    vectors: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class MgfCurve:
    samples: tuple[MgfSample, ...]
    first_derivative: float | None = None
    second_derivative: float | None = None

    def __iter__(self) -> Iterator[MgfSample]:
        return iter(self.samples)

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    @property
    def values(self) -> list[float]:
        return [m.value for m in self.samples]


def generator_matrix(model: SHSModel) -> np.ndarray:
    """CTMC generator; self-transitions do not contribute."""
    n = model.n_states
    Q = np.zeros((n, n))
    for t in model.transitions:
        if not t.is_self:
            Q[t.source, t.target] += t.rate
            Q[t.source, t.source] -= t.rate
    return Q


def steady_state(model: SHSModel) -> StationaryDistribution:
    Q = generator_matrix(model)
    n = model.n_states
    if n == 1:
        return StationaryDistribution(np.ones(1))
    if np.linalg.matrix_rank(Q) < n - 1:
        raise SingularSystem("balance equations have more than one degree of freedom")
    # pi Q = 0 with one balance equation swapped for normalisation
    M = Q.T.copy()
    M[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    pi = np.where(np.abs(pi) < 1e-300, 0.0, pi)
    return StationaryDistribution(pi)


def _transfer_matrix(model: SHSModel, s: float = 0.0) -> np.ndarray:
    """Matrix ``K`` of the stacked system ``K @ vec(v) = rhs``.

    Unknown ``(q, c)`` sits at ``q * d + c``; row ``(q, c)`` is the balance of
    component ``c`` in state ``q``.
    """
    n, d = model.n_states, model.age_dim
    K = np.zeros((n * d, n * d))
    for q in range(n):
        out = model.outgoing_rate(q)
        for c in range(d):
            K[q * d + c, q * d + c] += out - s
    for t in model.transitions:
        src, dst = t.source, t.target
        rows, cols = np.nonzero(t.reset_map)
        for c_old, c_new in zip(rows, cols):
            K[dst * d + c_new, src * d + c_old] -= t.rate
    return K


def _solve(K: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc


def moment_vectors(model: SHSModel, pi: StationaryDistribution, k: int) -> MomentVectors:
    if k < 1:
        raise ValueError("moment order must be >= 1")
    n, d = model.n_states, model.age_dim
    K = _transfer_matrix(model)
    prev = np.repeat(np.asarray(pi.pi, dtype=float)[:, None], d, axis=1)
    out = []
    for j in range(1, k + 1):
        v = _solve(K, (j * prev).reshape(-1)).reshape(n, d)
        out.append(v)
        prev = v
    return MomentVectors(order=k, vectors=tuple(out))


def aoi_moment(model: SHSModel, k: int) -> float:
    pi = steady_state(model)
    return moment_vectors(model, pi, k).aoi_moment(k, model.aoi_component)


def _aoi_support(model: SHSModel) -> np.ndarray:
    """Indices of unknowns that the AoI components depend on.

    Irrelevant age components may diverge before the AoI MGF does; only the
    closure of the ``(q, 0)`` unknowns under the reset dependencies matters.
    """
    n, d = model.n_states, model.age_dim
    feeds: dict[int, set[int]] = {i: set() for i in range(n * d)}
    for t in model.transitions:
        rows, cols = np.nonzero(t.reset_map)
        for c_old, c_new in zip(rows, cols):
            feeds[t.target * d + c_new].add(t.source * d + c_old)
    seen = {q * d + model.aoi_component for q in range(n)}
    todo = list(seen)
    while todo:
        for nxt in feeds[todo.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return np.array(sorted(seen))


def mgf_abscissa(model: SHSModel) -> float:
    """Largest ``s0`` such that the AoI MGF is finite for every ``s < s0``.

    The MGF system matrix is ``K(0) - s*I``; on the AoI-relevant block it is a
    nonsingular M-matrix exactly while ``s`` is below its smallest eigenvalue
    (which is real by Perron-Frobenius).
    """
    idx = _aoi_support(model)
    K = _transfer_matrix(model)[np.ix_(idx, idx)]
    return float(np.min(np.linalg.eigvals(K).real))


def _hat_rhs(model: SHSModel, pi: np.ndarray) -> np.ndarray:
    n, d = model.n_states, model.age_dim
    rhs = np.zeros((n, d))
    for t in model.transitions:
        rhs[t.target] += t.rate * pi[t.source] * np.diag(t.hat_map)
    return rhs.reshape(-1)


def mgf(model: SHSModel, s: float, *, keep_vectors: bool = False, pi: StationaryDistribution | None = None) -> MgfSample:
    """Stationary MGF ``E[exp(s * AoI)]`` at the unnormalised argument ``s``."""
    s = float(s)
    if pi is None:
        pi = steady_state(model)
    n, d = model.n_states, model.age_dim
    K = _transfer_matrix(model, s)
    rhs = _hat_rhs(model, pi.pi)
    idx = _aoi_support(model)
    converged = True
    try:
        v = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        v = np.full(n * d, np.nan)
        converged = False
    if converged:
        block = K[np.ix_(idx, idx)]
        if not np.all(np.isfinite(v[idx])):
            converged = False
        elif np.any(v[idx] < 0):
            converged = False
        elif np.linalg.cond(block) > COND_LIMIT:
            converged = False
        elif s >= mgf_abscissa(model):
            converged = False
    v = v.reshape(n, d)
    value = float(v[:, model.aoi_component].sum())
    return MgfSample(s=s, value=value, converged=converged, vectors=v if keep_vectors else None)


def mgf_curve(model: SHSModel, s_grid: Sequence[float]) -> MgfCurve:
    """MGF samples over a grid plus finite-difference derivatives at zero.

    When 0 is in the grid with neighbours on both sides, the central first
    difference (and second difference, for symmetric neighbours) estimate
    ``M'(0)`` and ``M''(0)``.
    """
    grid = [float(s) for s in s_grid]
    if not all(np.isfinite(grid)):
        raise ValueError("s grid must be finite")
    pi = steady_state(model)
    samples = tuple(mgf(model, s, pi=pi) for s in grid)
    d1 = d2 = None
    if 0.0 in grid:
        lo = [m for m in samples if m.s < 0 and m.converged]
        hi = [m for m in samples if m.s > 0 and m.converged]
        zero = next(m for m in samples if m.s == 0.0)
        if lo and hi:
            a = max(lo, key=lambda m: m.s)
            b = min(hi, key=lambda m: m.s)
            d1 = (b.value - a.value) / (b.s - a.s)
            ha, hb = -a.s, b.s
            d2 = 2.0 * (hb * a.value - (ha + hb) * zero.value + ha * b.value) / (ha * hb * (ha + hb))
    return MgfCurve(samples=samples, first_derivative=d1, second_derivative=d2)
