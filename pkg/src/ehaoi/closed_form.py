"""Exact closed-form AoI results for the six configurations.

Steady states, MGFs and first/second moments are evaluated from their
polynomial/rational closed forms in the normalised rates ``rho = lam/mu`` and
``beta = eta/mu``; the MGF argument is normalised too, ``s_bar = s/mu``.

Where no closed form exists (the anytime-harvesting chains with large
batteries) the aggregate probability ratios are taken from the numeric
stationary distribution, and moments must come from :mod:`ehaoi.solver`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import Discipline, EhMode, SystemParams, build_model
from . import solver

BRANCH_RTOL = 1e-12


class UnsupportedB(ValueError):
    """No closed form exists for this battery size; use the solver."""


class PoleViolation(ValueError):
    """The MGF argument is at or beyond the first pole."""


class Branch(str, enum.Enum):
    RHO_EQ_BETA = "rho=beta"
    RHO_NEQ_BETA = "rho!=beta"
    BETA_EQ_RHO_1P_RHO = "beta=rho(1+rho)"
    GENERAL = "general"


@dataclass(frozen=True)
class ClosedFormResult:
    value: float
    branch: Branch
    source: str

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite closed-form value from {self.source}")

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class AuxFactors:
    theta: float | None = None
    theta1: float | None = None
    theta2: float | None = None
    gamma: float | None = None
    gamma_prime: float | None = None
    gamma1: float | None = None
    gamma2: float | None = None
    pi1: float | None = None
    branch: Branch = Branch.GENERAL
    numeric: bool = False


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= BRANCH_RTOL * max(abs(a), abs(b))


def branch_rho_beta(rho: float, beta: float) -> Branch:
    return Branch.RHO_EQ_BETA if _close(rho, beta) else Branch.RHO_NEQ_BETA


def branch_pw(rho: float, beta: float) -> Branch:
    return Branch.BETA_EQ_RHO_1P_RHO if _close(beta, rho * (1 + rho)) else Branch.GENERAL


def poly(coeffs, x: float) -> float:
    """``sum(coeffs[n] * x**n)``."""
    return float(np.polynomial.polynomial.polyval(x, coeffs))


# ---------------------------------------------------------------------------
# steady states


def _theta_np(rho, beta, B, branch):
    if branch is Branch.RHO_EQ_BETA:
        return float(B)
    return beta * (beta**B - rho**B) / (rho**B * (beta - rho))


def _pi1_np(rho, beta, B, branch):
    if branch is Branch.RHO_EQ_BETA:
        return 1.0 / (1.0 + B * (1.0 + rho))
    num = rho**B * (beta - rho)
    return num / (num + beta * (1 + rho) * (beta**B - rho**B))


def prop1_steady_state(params: SystemParams) -> np.ndarray:
    """Stationary probabilities of the NP/PS chain with idle-only harvesting.

    Ordered by state label: ``[pi_1, pi_2, ..., pi_{2B+1}]``.
    """
    rho, beta, B = params.rho, params.beta, params.battery
    pi1 = _pi1_np(rho, beta, B, branch_rho_beta(rho, beta))
    out = np.empty(2 * B + 1)
    out[0] = pi1
    for i in range(1, B + 1):
        out[2 * i - 1] = (beta / rho) ** i * pi1
        out[2 * i] = rho * (beta / rho) ** i * pi1
    return out


def _pw_pi1(rho, beta, B, branch):
    if branch is Branch.BETA_EQ_RHO_1P_RHO:
        return rho / (beta + rho * (1 + beta) * B)
    g = 1 + rho + beta
    num = rho * (beta - rho * (1 + rho)) * (rho * g) ** (B - 1)
    den = beta ** (B + 1) * (1 + rho) ** (B - 1) * (rho**2 + rho + 1) - rho ** (B + 1) * g**B * (1 + beta)
    return num / den


def prop2_steady_state(params: SystemParams) -> np.ndarray:
    """Stationary probabilities of the PW chain with idle-only harvesting.

    Ordered by state label: ``[pi_1, ..., pi_{3B}]``.
    """
    rho, beta, B = params.rho, params.beta, params.battery
    pi1 = _pw_pi1(rho, beta, B, branch_pw(rho, beta))
    if B == 1:
        return np.array([pi1, beta / rho * pi1, beta * pi1])
    g = 1 + rho + beta
    r = beta * (1 + rho) / (rho * g)
    out = np.empty(3 * B)
    out[0] = pi1
    out[1] = r * pi1
    out[2] = beta * pi1
    for k in range(2, B + 1):
        idle = (beta / rho) * r ** (B - 1) if k == B else r**k
        out[3 * k - 3] = idle * pi1
        out[3 * k - 2] = rho * g / (1 + rho) ** 2 * r**k * pi1
        out[3 * k - 1] = rho**2 * g / (1 + rho) ** 2 * r**k * pi1
    return out


def _pi2_any_b2(rho, beta):
    num = beta**3 * rho + beta**2 * rho * (1 + rho) + beta * rho**2
    den = (
        beta**4 * (1 + rho)
        + beta**3 * (2 * rho**2 + 3 * rho + 1)
        + beta**2 * (rho**3 + 3 * rho**2 + 2 * rho)
        + beta * (rho**3 + 2 * rho**2)
        + rho**3
    )
    return num / den


def _pw_thetas(rho, beta, B, branch):
    if branch is Branch.BETA_EQ_RHO_1P_RHO:
        return beta * B, beta / rho + B
    g = 1 + rho + beta
    d = beta - rho * (1 + rho)
    theta1 = (beta ** (B + 1) * (1 + rho) ** B - beta * rho**B * g**B) / (rho ** (B - 1) * g ** (B - 1) * d)
    theta2 = (beta ** (B + 1) * (1 + rho) ** (B - 1) - rho ** (B + 1) * g**B) / (rho**B * g ** (B - 1) * d)
    return theta1, theta2


def _numeric_aux(params, d, m) -> AuxFactors:
    model = build_model(params, d, m)
    pi = solver.steady_state(model).pi
    labels = {s.id: s for s in model.states}
    pi1 = pi[model.by_label(1).id]
    idle = sum(pi[q] for q, s in labels.items() if s.updates == 0)
    busy = sum(pi[q] for q, s in labels.items() if s.updates > 0)
    if d is Discipline.NP:
        return AuxFactors(gamma=(idle - pi1) / pi1, pi1=pi1, numeric=True)
    if d is Discipline.PS:
        return AuxFactors(gamma_prime=(1 - pi1) / pi1, pi1=pi1, numeric=True)
    return AuxFactors(gamma1=busy / pi1, gamma2=idle / pi1, pi1=pi1, numeric=True)


def compute_aux(params: SystemParams, d: Discipline | str, m: EhMode | str) -> AuxFactors:
    """Aggregate probability ratios used by the MGF closed forms.

    Anytime harvesting with B > 2 has no closed form; the ratios are then
    computed from the numeric stationary distribution.
    """
    d, m = Discipline(d), EhMode(m)
    rho, beta, B = params.rho, params.beta, params.battery
    if m is EhMode.WHEN_EMPTY or B == 1:
        # with B = 1 both harvesting modes give the same chain
        if d is Discipline.PW and B > 1:
            br = branch_pw(rho, beta)
            t1, t2 = _pw_thetas(rho, beta, B, br)
            return AuxFactors(theta1=t1, theta2=t2, pi1=_pw_pi1(rho, beta, B, br), branch=br)
        br = branch_rho_beta(rho, beta)
        return AuxFactors(theta=_theta_np(rho, beta, B, br), pi1=_pi1_np(rho, beta, B, br), branch=br)
    if B == 2:
        if d is Discipline.NP:
            pi1 = rho * _pi2_any_b2(rho, beta) / (beta * (1 + beta))
            return AuxFactors(gamma=beta / rho**2 * (rho + beta * (1 + rho + beta)), pi1=pi1)
        if d is Discipline.PS:
            pi1 = rho * _pi2_any_b2(rho, beta) / (beta * (1 + beta))
            return AuxFactors(gamma_prime=beta / rho**2 * (1 + rho) * (rho + beta * (1 + rho + beta)), pi1=pi1)
        g1 = beta / rho * (beta + rho * (1 + beta))
        g2 = (beta**2 + beta * rho + rho**2) / rho**2
        return AuxFactors(gamma1=g1, gamma2=g2, pi1=1.0 / (g1 + g2))
    return _numeric_aux(params, d, m)


# ---------------------------------------------------------------------------
# MGFs


def mgf_pole(params: SystemParams, d: Discipline | str, m: EhMode | str) -> float:
    """Smallest positive root of the MGF denominator, in units of ``s_bar``."""
    return min(1.0, params.rho, params.beta)


def _mgf_np_empty(rho, beta, s, theta, pi1):
    num = rho * pi1 * (s**2 * theta - s * theta * (1 + rho + beta) + beta * (1 + theta + theta * rho))
    return num / ((1 - s) ** 2 * (rho - s) * (beta - s))


def _mgf_np_any(rho, beta, s, gamma, pi1):
    # the s-linear coefficient keeps the -beta(1+beta) term from the delivery path
    num = rho * pi1 * (
        -(s**3) * gamma
        + s**2 * gamma * (2 * beta + rho + 2)
        - s * (gamma * (beta**2 + beta * (2 * rho + 3) + 1 + rho) + beta * (1 + beta))
        + (beta**2 + beta) * (1 + gamma + gamma * rho)
    )
    return num / ((1 - s) ** 2 * (rho - s) * (beta - s) * (1 + beta - s))


def _mgf_ps_empty(rho, beta, s, theta, pi1):
    num = rho * (1 + rho) * pi1 * (s**2 * theta - s * theta * (1 + rho + beta) + beta * (1 + theta + theta * rho))
    return num / ((1 - s) * (rho - s) * (1 + rho - s) * (beta - s))


def _mgf_ps_any(rho, beta, s, gp, pi1):
    num = rho * pi1 * (s**2 * gp - s * gp * (1 + rho + 2 * beta) + (1 + gp) * beta * (1 + rho + beta))
    return num / ((1 - s) * (rho - s) * (beta - s) * (1 + rho + beta - s))


def _pw_delivery_ratios(rho, beta, B, anytime):
    """``(pi_2, pi_5 + pi_6) / pi_1`` for the PW chains with B >= 2.

    These are the probabilities feeding the pending-update age of the
    single-energy busy state.
    """
    g = 1 + rho + beta
    if not anytime:
        r = beta * (1 + rho) / (rho * g)
        return r, rho * g * r**2 / (1 + rho)
    if B == 2:
        # the top-energy states cannot harvest, which changes the ratios
        return beta / rho, beta**2 / rho + beta**2
    h = 1 + rho + 2 * beta
    p2 = (beta * (1 + beta) ** 2 + rho * beta) / (rho * h)
    p56 = beta**2 * g * (1 + beta) / (rho * h) + beta**2 * g / h
    return p2, p56


def _mgf_pw(rho, beta, s, busy, idle, p2, p56, pi1, anytime, top_two=False):
    """PW MGF from aggregate ratios.

    ``busy`` and ``idle`` are the busy/idle probability mass over ``pi_1``;
    ``p2`` and ``p56`` come from :func:`_pw_delivery_ratios`.  Rates are in
    units of ``mu``.  ``top_two`` marks anytime harvesting with B = 2, where
    the two-update state cannot harvest.
    """
    lam, eta = rho, beta
    if anytime and top_two:
        v31 = lam * (p56 + p2 * (lam + 1 - s)) / ((eta + 1 - s) * (lam + 1 - s))
    elif anytime:
        v31 = lam * (p56 + p2 * (eta + lam + 1 - s)) / ((eta + 1 - s) * (eta + lam + 1 - s))
    else:
        v31 = lam * (p56 + p2 * (lam + 1 - s)) / ((1 - s) * (lam + 1 - s))
    # busy mass without state 3 is busy - beta; idle mass without state 1 is idle - 1
    busy_v1 = lam * v31 / (lam + 1 - s) + lam * ((busy - beta) + (lam + 1 - s) * (idle - 1)) / (lam + 1 - s) ** 2
    num = (eta - s) * ((1 - s) * (lam + 1 - s) + lam * (lam - s)) * busy_v1 + lam * v31 * (
        (1 - s) - (lam - s) * (eta - s)
    )
    return pi1 * num / ((1 - s) ** 2 * (lam - s) * (eta - s))


def mgf_closed(
    params: SystemParams,
    d: Discipline | str,
    m: EhMode | str,
    s_bar: float,
    aux: AuxFactors | None = None,
) -> ClosedFormResult:
    """Closed-form AoI MGF at the normalised argument ``s_bar``."""
    d, m = Discipline(d), EhMode(m)
    rho, beta, B = params.rho, params.beta, params.battery
    pole = mgf_pole(params, d, m)
    if not s_bar < pole:
        raise PoleViolation(f"s_bar={s_bar} is not below the first pole {pole}")
    if aux is None:
        aux = compute_aux(params, d, m)
    s = float(s_bar)
    empty_chain = m is EhMode.WHEN_EMPTY or B == 1
    if B == 1:
        # a single energy packet never admits a waiting update, so PW is NP
        d = Discipline.NP if d is Discipline.PW else d
    tag = f"{d.value}-{'empty' if empty_chain else 'any'}/mgf"
    if d is Discipline.NP:
        if empty_chain:
            return ClosedFormResult(_mgf_np_empty(rho, beta, s, aux.theta, aux.pi1), aux.branch, tag)
        return ClosedFormResult(_mgf_np_any(rho, beta, s, aux.gamma, aux.pi1), aux.branch, tag)
    if d is Discipline.PS:
        if empty_chain:
            return ClosedFormResult(_mgf_ps_empty(rho, beta, s, aux.theta, aux.pi1), aux.branch, tag)
        return ClosedFormResult(_mgf_ps_any(rho, beta, s, aux.gamma_prime, aux.pi1), aux.branch, tag)
    p2, p56 = _pw_delivery_ratios(rho, beta, B, not empty_chain)
    if empty_chain:
        value = _mgf_pw(rho, beta, s, aux.theta1, aux.theta2, p2, p56, aux.pi1, False)
    else:
        value = _mgf_pw(rho, beta, s, aux.gamma1, aux.gamma2, p2, p56, aux.pi1, True, B == 2)
    return ClosedFormResult(value, aux.branch, tag)


# ---------------------------------------------------------------------------
# moments


def _np_empty_moment(rho, beta, B, mu, k, br):
    if br is Branch.RHO_EQ_BETA:
        if k == 1:
            return (2 * B * rho**2 + 2 * (1 + B) * rho + B + 2) / (mu * (B * rho**2 + (1 + B) * rho))
        num = 2 * (3 * B * rho**3 + (3 * B + 3) * rho**2 + (2 * B + 4) * rho + B + 3)
        return num / (mu**2 * rho**2 * (1 + B + B * rho))
    if k == 1:
        bB, rB = beta ** (B + 2), rho ** (B + 2)
        num = bB * (2 * rho**2 + 2 * rho + 1) - rB * (2 * beta**2 + 2 * beta + 1)
        return num / (mu * (bB * (rho**2 + rho) - rB * (beta**2 + beta)))
    bB, rB = beta ** (B + 3), rho ** (B + 3)
    num = 2 * (bB * (3 * rho**3 + 3 * rho**2 + 2 * rho + 1) - rB * (3 * beta**3 + 3 * beta**2 + 2 * beta + 1))
    return num / (mu**2 * (bB * rho**2 * (1 + rho) - rB * beta**2 * (beta + 1)))


def _ps_empty_moment(rho, beta, B, mu, k, br):
    if br is Branch.RHO_EQ_BETA:
        if k == 1:
            num = B * rho**3 + (3 * B + 1) * rho**2 + (3 * B + 4) * rho + B + 2
            return num / (mu * rho * (1 + rho) * (rho * B + B + 1))
        num = 2 * (
            B * rho**5
            + (4 * B + 1) * rho**4
            + (7 * B + 5) * rho**3
            + (7 * B + 12) * rho**2
            + (4 * B + 10) * rho
            + B
            + 3
        )
        return num / (mu**2 * rho**2 * (1 + rho) ** 2 * (1 + B + B * rho))
    if k == 1:
        bB, rB = beta ** (B + 2), rho ** (B + 2)
        num = bB * (1 + rho) ** 3 - rB * ((beta**2 + beta) * (rho + 2) + 1 + rho)
        return num / (mu * (1 + rho) * (bB * (rho**2 + rho) - rB * (beta**2 + beta)))
    bB, rB = beta ** (B + 3), rho ** (B + 3)
    num = 2 * bB * (1 + rho) ** 3 * (1 + rho + rho**2) - 2 * rB * (
        (beta**3 + beta**2 + beta) * (rho**2 + 3 * rho + 2) + beta**3 + beta**2 + (1 + rho) ** 2
    )
    return num / (mu**2 * (1 + rho) ** 2 * (bB * rho**2 * (1 + rho) - rB * beta**2 * (1 + beta)))


def _np_any_moment(rho, beta, B, mu, k):
    if B == 1:
        lin = beta * (1 + rho) + rho
        if k == 1:
            num = beta**2 * (2 * rho**2 + 2 * rho + 1) + beta * rho * (1 + 2 * rho) + rho**2
            return num / (mu * rho * beta * lin)
        alpha = [
            2 * rho**3,
            4 * rho**3 + 2 * rho**2,
            6 * rho**3 + 4 * rho**2 + 2 * rho,
            6 * rho**3 + 6 * rho**2 + 4 * rho + 2,
        ]
        return poly(alpha, beta) / (mu**2 * rho**2 * beta**2 * lin)
    pi2 = _pi2_any_b2(rho, beta)
    if k == 1:
        abar = [
            rho**3,
            3 * rho**3 + rho**2,
            3 * rho**3 + 3 * rho**2 + rho,
            4 * rho**3 + 6 * rho**2 + 4 * rho + 1,
            2 * rho**3 + 6 * rho**2 + 5 * rho + 2,
            2 * rho**2 + 2 * rho + 1,
        ]
        return pi2 * poly(abar, beta) / (mu * rho**2 * beta**2 * (1 + beta) ** 2)
    aprime = [
        rho**4,
        4 * rho**4 + rho**3,
        7 * rho**4 + 4 * rho**3 + rho**2,
        7 * rho**4 + 7 * rho**3 + 4 * rho**2 + rho,
        10 * rho**4 + 13 * rho**3 + 10 * rho**2 + 5 * rho + 1,
        9 * rho**4 + 18 * rho**3 + 15 * rho**2 + 9 * rho + 3,
        3 * rho**4 + 12 * rho**3 + 11 * rho**2 + 7 * rho + 3,
        3 * rho**3 + 3 * rho**2 + 2 * rho + 1,
    ]
    return 2 * pi2 * poly(aprime, beta) / (mu**2 * rho**3 * beta**3 * (1 + beta) ** 3)


def _ps_any_moment(rho, beta, B, mu, k):
    r1 = 1 + rho
    if B == 1:
        lin = beta * r1 + rho
        if k == 1:
            num = beta**2 * r1**3 + beta * (rho**3 + 3 * rho**2 + rho) + rho**3 + rho**2
            return num / (mu * rho * r1 * beta * lin)
        zeta = [
            rho**3 * r1**2,
            rho**2 * r1 * (rho**2 + 3 * rho + 1),
            rho * (rho**4 + 4 * rho**3 + 7 * rho**2 + 4 * rho + 1),
            r1**3 * (rho**2 + rho + 1),
        ]
        return 2 * poly(zeta, beta) / (mu**2 * rho**2 * r1**2 * beta**2 * lin)
    pi2 = _pi2_any_b2(rho, beta)
    g = 1 + rho + beta
    if k == 1:
        zbar = [
            rho**3 * r1**2,
            rho**2 * r1 * (rho**2 + 5 * rho + 1),
            rho**5 + 6 * rho**4 + 12 * rho**3 + 6 * rho**2 + rho,
            r1 * (rho**2 + 3 * rho + 1) ** 2,
            r1**2 * (3 * rho**2 + 7 * rho + 3),
            3 * r1**3,
            r1**2,
        ]
        return pi2 * poly(zbar, beta) / (mu * rho**2 * beta**2 * (1 + beta) * g**2)
    q = rho**2 + rho + 1
    zp = [
        rho**4 * r1**3,
        rho**3 * r1**2 * (rho**2 + 6 * rho + 1),
        rho**2 * r1 * (rho**4 + 7 * rho**3 + 18 * rho**2 + 7 * rho + 1),
        rho * (rho**6 + 8 * rho**5 + 25 * rho**4 + 39 * rho**3 + 25 * rho**2 + 8 * rho + 1),
        r1 * (rho**2 + 3 * rho + 1) * (rho**4 + 5 * rho**3 + 7 * rho**2 + 5 * rho + 1),
        q * (4 * rho**4 + 19 * rho**3 + 31 * rho**2 + 19 * rho + 4),
        r1 * q * (2 * rho + 3) * (3 * rho + 2),
        4 * r1**2 * q,
        r1 * q,
    ]
    return 2 * pi2 * poly(zp, beta) / (mu**2 * rho**3 * beta**3 * (1 + beta) * g**3)


def _pw_empty_moment(rho, beta, B, mu, k, br):
    r1 = 1 + rho
    g = 1 + rho + beta
    pi1 = _pw_pi1(rho, beta, B, br)
    if br is Branch.BETA_EQ_RHO_1P_RHO:
        if k == 1:
            psi = [
                0.0,
                rho * r1**2 * ((2 * rho**4 + 4 * rho**3 + 3 * rho**2 + 3 * rho + 1) * B - rho * (2 * rho**3 + 2 * rho**2 - 3 * rho - 2)),
                r1 * (rho * (4 * rho**4 + 9 * rho**3 + 7 * rho**2 + 7 * rho + 2) * B - (2 * rho**5 - rho**4 - 12 * rho**3 - 9 * rho**2 - 4 * rho - 1)),
                rho * (2 * rho**4 + 5 * rho**3 + 4 * rho**2 + 4 * rho + 1) * B + 3 * rho**4 + 10 * rho**3 + 8 * rho**2 + 4 * rho + 1,
            ]
            num = poly(psi, beta) + rho**2 * r1**4
            return pi1 * num / (mu * rho**2 * beta * r1**3 * g)
        psib = [
            0.0,
            rho**2 * r1**4 * (2 * rho**2 + 4 * rho + 1),
            rho * r1**2 * (3 * rho**6 + 9 * rho**5 + 10 * rho**4 + 7 * rho**3 + 7 * rho**2 + 4 * rho + 1) * B
            - rho**2 * r1**2 * (3 * rho**5 + 6 * rho**4 - 3 * rho**3 - 15 * rho**2 - 10 * rho - 2),
            rho * r1 * (6 * rho**6 + 20 * rho**5 + 25 * rho**4 + 18 * rho**3 + 18 * rho**2 + 9 * rho + 2) * B
            - r1 * (3 * rho**7 + 2 * rho**6 - 20 * rho**5 - 43 * rho**4 - 30 * rho**3 - 14 * rho**2 - 5 * rho - 1),
            rho * (3 * rho**6 + 11 * rho**5 + 15 * rho**4 + 11 * rho**3 + 11 * rho**2 + 5 * rho + 1) * B
            + 4 * rho**6 + 19 * rho**5 + 35 * rho**4 + 26 * rho**3 + 13 * rho**2 + 5 * rho + 1,
        ]
        num = poly(psib, beta) + rho**3 * r1**5
        return 2 * pi1 * num / (mu**2 * rho**3 * beta**2 * r1**4 * g)
    theta1, theta2 = _pw_thetas(rho, beta, B, br)
    tb2 = 1 - theta2
    if k == 1:
        psi = [
            rho * r1**4,
            r1**3 * (2 * rho**2 + 4 * rho + 1),
            -r1 * (2 * rho**4 + rho**3 - 8 * rho**2 - 6 * rho - 1),
            -rho * (2 * rho**3 + 3 * rho**2 - 3 * rho - 2),
        ]
        psi4 = beta * g * (2 * rho**4 + 5 * rho**3 + 4 * rho**2 + 4 * rho + 1)
        psi5 = beta * r1 * g * (2 * rho**4 + 4 * rho**3 + 3 * rho**2 + 3 * rho + 1)
        num = poly(psi, beta) + theta1 * psi4 - tb2 * psi5
        return pi1 * num / (mu * rho * beta * r1**3 * g)
    psi = [
        rho**2 * r1**5,
        rho * r1**4 * (2 * rho**2 + 4 * rho + 1),
        r1**3 * (3 * rho**4 + 10 * rho**3 + 12 * rho**2 + 5 * rho + 1),
        -r1 * (3 * rho**6 + 5 * rho**5 - 11 * rho**4 - 33 * rho**3 - 23 * rho**2 - 7 * rho - 1),
        -rho * (3 * rho**5 + 8 * rho**4 - 18 * rho**2 - 12 * rho - 2),
    ]
    psi5 = beta**2 * g * (3 * rho**6 + 11 * rho**5 + 15 * rho**4 + 11 * rho**3 + 11 * rho**2 + 5 * rho + 1)
    psi6 = beta**2 * r1 * g * (3 * rho**6 + 9 * rho**5 + 10 * rho**4 + 7 * rho**3 + 7 * rho**2 + 4 * rho + 1)
    num = poly(psi, beta) + theta1 * psi5 - tb2 * psi6
    return 2 * pi1 * num / (mu**2 * rho**2 * beta**2 * r1**4 * g)


def _pw_any_moment(rho, beta, mu, k):
    r1 = 1 + rho
    lead = beta**2 * (rho**2 + rho + 1) + beta * rho * r1 + rho**2
    if k == 1:
        a = [
            rho**3 * r1**2,
            rho**2 * (4 * rho**3 + 9 * rho**2 + 6 * rho + 1),
            rho * r1 * (6 * rho**3 + 11 * rho**2 + 5 * rho + 1),
            r1 * (7 * rho**4 + 15 * rho**3 + 11 * rho**2 + 5 * rho + 1),
            6 * rho**5 + 19 * rho**4 + 23 * rho**3 + 18 * rho**2 + 9 * rho + 2,
            2 * rho**5 + 7 * rho**4 + 8 * rho**3 + 7 * rho**2 + 4 * rho + 1,
        ]
        return poly(a, beta) / (mu * rho * beta * r1**2 * (1 + beta) ** 2 * lead)
    z = [
        rho**4 * r1**3,
        rho**3 * r1**3 * (5 * rho + 1),
        rho**2 * r1**2 * (11 * rho**3 + 17 * rho**2 + 6 * rho + 1),
        rho * r1 * (14 * rho**5 + 43 * rho**4 + 47 * rho**3 + 23 * rho**2 + 7 * rho + 1),
        r1 * (17 * rho**6 + 54 * rho**5 + 69 * rho**4 + 47 * rho**3 + 23 * rho**2 + 7 * rho + 1),
        19 * rho**7 + 78 * rho**6 + 132 * rho**5 + 129 * rho**4 + 95 * rho**3 + 52 * rho**2 + 18 * rho + 3,
        12 * rho**7 + 52 * rho**6 + 87 * rho**5 + 81 * rho**4 + 66 * rho**3 + 41 * rho**2 + 16 * rho + 3,
        3 * rho**7 + 14 * rho**6 + 24 * rho**5 + 21 * rho**4 + 18 * rho**3 + 12 * rho**2 + 5 * rho + 1,
    ]
    return 2 * poly(z, beta) / (mu**2 * rho**2 * beta**2 * r1**3 * (1 + beta) ** 3 * lead)


def has_closed_moment(params: SystemParams, d: Discipline | str, m: EhMode | str) -> bool:
    d, m = Discipline(d), EhMode(m)
    if m is EhMode.WHEN_EMPTY:
        return True
    return params.battery in (1, 2)


def moments_closed(params: SystemParams, d: Discipline | str, m: EhMode | str, k: int) -> ClosedFormResult:
    """Closed-form first (``k=1``) or second (``k=2``) AoI moment."""
    d, m = Discipline(d), EhMode(m)
    if k not in (1, 2):
        raise ValueError("closed forms exist for k in {1, 2} only")
    rho, beta, B, mu = params.rho, params.beta, params.battery, params.mu
    if not has_closed_moment(params, d, m):
        raise UnsupportedB(f"no closed-form moments for {d.label} with anytime harvesting and B={B}")
    if B == 1:
        # identical chains: both modes coincide and PW never holds a waiting update
        m = EhMode.WHEN_EMPTY
        d = Discipline.NP if d is Discipline.PW else d
    tag = f"{d.value}-{m.value}/moment{k}"
    if m is EhMode.WHEN_EMPTY:
        if d is Discipline.PW:
            br = branch_pw(rho, beta)
            return ClosedFormResult(_pw_empty_moment(rho, beta, B, mu, k, br), br, tag)
        br = branch_rho_beta(rho, beta)
        fn = _np_empty_moment if d is Discipline.NP else _ps_empty_moment
        return ClosedFormResult(fn(rho, beta, B, mu, k, br), br, tag)
    if d is Discipline.NP:
        return ClosedFormResult(_np_any_moment(rho, beta, B, mu, k), Branch.GENERAL, tag)
    if d is Discipline.PS:
        return ClosedFormResult(_ps_any_moment(rho, beta, B, mu, k), Branch.GENERAL, tag)
    return ClosedFormResult(_pw_any_moment(rho, beta, mu, k), Branch.GENERAL, tag)


def limits_beta_inf(params: SystemParams, d: Discipline | str, m: EhMode | str, k: int) -> ClosedFormResult:
    """Limit of the k-th AoI moment as the harvesting rate goes to infinity.

    Only LCFS-PW with idle-only harvesting keeps a dependence on B: a delivery
    from the single-packet, single-energy state still blocks new updates.
    """
    d, m = Discipline(d), EhMode(m)
    if k not in (1, 2):
        raise ValueError("limits exist for k in {1, 2} only")
    rho, B, mu = params.rho, params.battery, params.mu
    lam = params.lam
    if B == 1 and d is Discipline.PW:
        d = Discipline.NP
    tag = f"{d.value}-{m.value}/limit{k}"
    if d is Discipline.NP:
        if k == 1:
            v = (2 * rho**2 + 2 * rho + 1) / (mu * (rho**2 + rho))
        else:
            v = 2 * (3 * rho**3 + 3 * rho**2 + 2 * rho + 1) / (mu**2 * rho**2 * (1 + rho))
    elif d is Discipline.PS:
        v = 1 / lam + 1 / mu if k == 1 else 2 * (1 / lam**2 + 1 / (mu * lam) + 1 / mu**2)
    elif m is EhMode.ANYTIME:
        q = rho**2 + rho + 1
        if k == 1:
            v = (2 * rho**5 + 7 * rho**4 + 8 * rho**3 + 7 * rho**2 + 4 * rho + 1) / (mu * rho * (1 + rho) ** 2 * q)
        else:
            p7 = 3 * rho**7 + 14 * rho**6 + 24 * rho**5 + 21 * rho**4 + 18 * rho**3 + 12 * rho**2 + 5 * rho + 1
            v = 2 * p7 / (mu**2 * rho**2 * (1 + rho) ** 3 * q)
    else:
        q = rho**2 + rho + 1
        den_core = (1 + rho) ** (B - 1) * q - rho ** (B + 1)
        if k == 1:
            p = 2 * rho**5 + 7 * rho**4 + 8 * rho**3 + 7 * rho**2 + 4 * rho + 1
            num = (1 + rho) ** (B - 2) * p - rho ** (B + 1) * (2 * rho**2 + 3 * rho - 1)
            v = num / (mu * rho * (1 + rho) * den_core)
        else:
            p7 = 3 * rho**7 + 14 * rho**6 + 24 * rho**5 + 21 * rho**4 + 18 * rho**3 + 12 * rho**2 + 5 * rho + 1
            p8 = 3 * rho**4 + 8 * rho**3 + 4 * rho**2 - 5 * rho - 1
            v = 2 * (p7 * (1 + rho) ** (B - 2) - p8 * rho ** (B + 1)) / (mu**2 * rho**2 * (1 + rho) ** 2 * den_core)
    return ClosedFormResult(v, Branch.GENERAL, tag)


# ---------------------------------------------------------------------------
# discipline comparison


def moment(params: SystemParams, d: Discipline | str, m: EhMode | str, k: int) -> float:
    """k-th AoI moment from the closed form when one exists, else the solver."""
    if k in (1, 2) and has_closed_moment(params, d, m):
        return moments_closed(params, d, m, k).value
    return solver.aoi_moment(build_model(params, d, m), k)


GAP_PAIRS = {
    "np-ps": (Discipline.NP, Discipline.PS),
    "pw-ps": (Discipline.PW, Discipline.PS),
    "np-pw": (Discipline.NP, Discipline.PW),
}


def discipline_gap(params: SystemParams, m: EhMode | str, k: int, pair: str) -> float:
    """Signed difference of the k-th moments of two disciplines."""
    a, b = GAP_PAIRS[pair.lower().replace("−", "-")]
    return moment(params, a, m, k) - moment(params, b, m, k)


def printed_np_ps_gap(params: SystemParams, k: int) -> float:
    """The NP minus PS gap formula as printed for idle-only harvesting.

    Kept for reporting only: its rho = beta branch disagrees with the
    difference of the two moment closed forms (e.g. 2/3 vs 1/2 at
    rho = beta = B = mu = 1).
    """
    rho, beta, B, mu = params.rho, params.beta, params.battery, params.mu
    br = branch_rho_beta(rho, beta)
    if k == 1:
        if br is Branch.RHO_EQ_BETA:
            return (B * rho**2 + rho * (B + 1) + B) / (mu * (B * rho**2 + rho * (2 * B + 1) + B + 1))
        return rho / (mu * (1 + rho))
    if br is Branch.RHO_EQ_BETA:
        num = 2 * (2 * B * rho**3 + rho**2 * (5 * B + 2) + rho * (4 * B + 5) + B + 2)
        return num / (mu**2 * (B * rho**3 + rho**2 * (3 * B + 1) + rho * (3 * B + 2) + B + 1))
    bB, rB = beta ** (B + 3), rho ** (B + 3)
    num = 2 * bB * (1 + rho) ** 2 * (2 * rho**3 + rho**2) - 2 * rB * (
        (beta**3 + beta**2) * (2 * rho**2 + 3 * rho) + beta * (rho**2 + rho)
    )
    return num / (mu**2 * (1 + rho) ** 2 * (bB * rho**2 * (1 + rho) - rB * beta**2 * (1 + beta)))
