"""System parameters and SHS transition systems for the six queue configurations.

A configuration is a queueing discipline (LCFS-NP, LCFS-PS, LCFS-PW) paired
with an energy-harvesting mode (harvest only when the system is empty, or
harvest at any time).  :func:`build_model` turns one configuration plus a set
of rates into an immutable :class:`SHSModel` that the generic solver in
:mod:`ehaoi.solver` consumes.

Age vectors are row vectors and resets act on the right, ``x' = x @ A``.
Component 0 is always the age of information at the destination.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np


class Discipline(str, enum.Enum):
    NP = "np"
    PS = "ps"
    PW = "pw"

    @property
    def label(self) -> str:
        return "LCFS-" + self.name


class EhMode(str, enum.Enum):
    WHEN_EMPTY = "empty"
    ANYTIME = "any"


class RateKind(str, enum.Enum):
    ARRIVAL = "lambda"
    HARVEST = "eta"
    SERVICE = "mu"


@dataclass(frozen=True)
class SystemParams:
    """Rates of the energy-harvesting status-update queue.

    ``lam`` is the update arrival rate, ``eta`` the energy-packet arrival rate,
    ``mu`` the service rate and ``battery`` the battery capacity B.
    """

    lam: float
    eta: float
    mu: float
    battery: int

    def __post_init__(self):
        for name in ("lam", "eta", "mu"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite rate, got {value!r}")
        if isinstance(self.battery, bool) or int(self.battery) != self.battery or self.battery < 1:
            raise ValueError(f"battery must be an integer >= 1, got {self.battery!r}")
        object.__setattr__(self, "battery", int(self.battery))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "mu", float(self.mu))

    @classmethod
    def from_utilization(cls, rho: float, beta: float, battery: int, mu: float = 1.0) -> "SystemParams":
        return cls(lam=rho * mu, eta=beta * mu, mu=mu, battery=battery)

    @property
    def rho(self) -> float:
        return self.lam / self.mu

    @property
    def beta(self) -> float:
        return self.eta / self.mu

    def rate(self, kind: RateKind) -> float:
        return {RateKind.ARRIVAL: self.lam, RateKind.HARVEST: self.eta, RateKind.SERVICE: self.mu}[kind]


@dataclass(frozen=True)
class DiscreteState:
    id: int
    label: int
    energy: int
    updates: int


@dataclass(frozen=True, eq=False)
class Transition:
    source: int
    target: int
    rate: float
    kind: RateKind
    reset_map: np.ndarray
    hat_map: np.ndarray

    @property
    def is_self(self) -> bool:
        return self.source == self.target


@dataclass(frozen=True, eq=False)
class SHSModel:
    states: tuple[DiscreteState, ...]
    transitions: tuple[Transition, ...]
    age_dim: int
    params: SystemParams | None = None
    discipline: Discipline | None = None
    eh_mode: EhMode | None = None
    aoi_component: int = 0
    _by_pair: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_pair", {(s.energy, s.updates): s.id for s in self.states})

    @property
    def n_states(self) -> int:
        return len(self.states)

    def state_id(self, energy: int, updates: int) -> int:
        return self._by_pair[(energy, updates)]

    def by_label(self, label: int) -> DiscreteState:
        for s in self.states:
            if s.label == label:
                return s
        raise KeyError(label)

    def outgoing_rate(self, q: int) -> float:
        return sum(t.rate for t in self.transitions if t.source == q)


def reset_matrix(sources, dim: int) -> np.ndarray:
    """Binary reset matrix from a per-component source list.

    ``sources[c]`` is the index of the old component copied into new component
    ``c``, or ``None`` when the new component is zeroed.
    """
    A = np.zeros((dim, dim))
    for c, src in enumerate(sources):
        if src is not None:
            A[src, c] = 1.0
    return A


def hat_matrix(A: np.ndarray) -> np.ndarray:
    """Diagonal marker of the components that ``A`` zeroes."""
    return np.diag((~A.any(axis=0)).astype(float))


def _state_label(energy: int, updates: int, discipline: Discipline) -> int:
    if discipline is not Discipline.PW:
        if energy == 0:
            return 1
        return 2 * energy + updates
    if energy == 0:
        return 1
    if energy == 1:
        return 2 + updates
    return 3 * energy - 2 + updates


def _enumerate_states(B: int, discipline: Discipline) -> list[tuple[int, int]]:
    pairs = [(0, 0)]
    max_u = 2 if discipline is Discipline.PW else 1
    for e in range(1, B + 1):
        for u in range(0, max_u + 1):
            if u == 2 and e < 2:
                continue
            pairs.append((e, u))
    return pairs


def build_model(params: SystemParams, discipline: Discipline | str, eh_mode: EhMode | str) -> SHSModel:
    """Exact SHS transition system for one configuration and battery size.

    Lost arrivals (busy server under NP, full battery, PW with a full slot or a
    single energy packet) are simply absent; identity-reset self-loops would
    cancel in every stationary equation.
    """
    discipline = Discipline(discipline)
    eh_mode = EhMode(eh_mode)
    B = params.battery
    dim = 3 if discipline is Discipline.PW else 2

    pairs = sorted(_enumerate_states(B, discipline), key=lambda p: _state_label(*p, discipline))
    states = tuple(
        DiscreteState(id=i, label=_state_label(e, u, discipline), energy=e, updates=u)
        for i, (e, u) in enumerate(pairs)
    )
    index = {(s.energy, s.updates): s.id for s in states}

    transitions: list[Transition] = []

    def add(src, dst, kind, sources):
        A = reset_matrix(sources, dim)
        transitions.append(
            Transition(
                source=index[src],
                target=index[dst],
                rate=params.rate(kind),
                kind=kind,
                reset_map=A,
                hat_map=hat_matrix(A),
            )
        )

    keep_aoi = (0,) + (None,) * (dim - 1)
    identity = tuple(range(dim))
    anytime = eh_mode is EhMode.ANYTIME

    for e, u in pairs:
        if u == 0:
            if e < B:
                add((e, 0), (e + 1, 0), RateKind.HARVEST, keep_aoi)
            if e >= 1:
                add((e, 0), (e, 1), RateKind.ARRIVAL, keep_aoi)
        elif u == 1:
            deliver = (1,) + (None,) * (dim - 1)
            add((e, 1), (e - 1, 0), RateKind.SERVICE, deliver)
            if discipline is Discipline.PS:
                add((e, 1), (e, 1), RateKind.ARRIVAL, keep_aoi)
            elif discipline is Discipline.PW and e >= 2:
                add((e, 1), (e, 2), RateKind.ARRIVAL, (0, 1, None))
            if anytime and e < B:
                grow = identity if discipline is not Discipline.PW else (0, 1, None)
                add((e, 1), (e + 1, 1), RateKind.HARVEST, grow)
        else:
            add((e, 2), (e - 1, 1), RateKind.SERVICE, (1, 2, None))
            add((e, 2), (e, 2), RateKind.ARRIVAL, (0, 1, None))
            if anytime and e < B:
                add((e, 2), (e + 1, 2), RateKind.HARVEST, identity)

    return SHSModel(
        states=states,
        transitions=tuple(transitions),
        age_dim=dim,
        params=params,
        discipline=discipline,
        eh_mode=eh_mode,
    )


def validate_model(model: SHSModel) -> list[str]:
    """Structural diagnostics; an empty list means the model is well formed."""
    findings = []
    n = model.n_states
    for i, t in enumerate(model.transitions):
        A, H = t.reset_map, t.hat_map
        if A.shape != (model.age_dim, model.age_dim) or H.shape != A.shape:
            findings.append(f"transition {i}: reset map has wrong shape")
            continue
        if not np.all((A == 0) | (A == 1)):
            findings.append(f"transition {i}: reset map is not binary")
        if np.any((A != 0).sum(axis=0) > 1):
            findings.append(f"transition {i}: reset map column sums components")
        if not np.array_equal(H, hat_matrix(A)):
            findings.append(f"transition {i}: hat-map rule violated")
        if not (0 <= t.source < n and 0 <= t.target < n):
            findings.append(f"transition {i}: endpoint out of range")
        if not (math.isfinite(t.rate) and t.rate > 0):
            findings.append(f"transition {i}: non-positive rate")
    for q in range(n):
        if not any(t.source == q and not t.is_self for t in model.transitions):
            findings.append(f"state {model.states[q].label}: no outgoing transition")
    if n and not _strongly_connected(model):
        findings.append("not irreducible")
    if model.discipline is Discipline.PW:
        for s in model.states:
            if s.updates == 2 and s.energy < 2:
                findings.append(f"state {s.label}: two updates with fewer than two energy packets")
    return findings


def _strongly_connected(model: SHSModel) -> bool:
    n = model.n_states
    fwd = [[] for _ in range(n)]
    bwd = [[] for _ in range(n)]
    for t in model.transitions:
        if 0 <= t.source < n and 0 <= t.target < n:
            fwd[t.source].append(t.target)
            bwd[t.target].append(t.source)

    def reach(adj):
        seen = {0}
        todo = deque([0])
        while todo:
            for nxt in adj[todo.popleft()]:
                if nxt not in seen:
                    seen.add(nxt)
                    todo.append(nxt)
        return len(seen) == n

    return reach(fwd) and reach(bwd)
