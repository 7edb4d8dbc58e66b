import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehaoi import closed_form as cf
from ehaoi import solver
from ehaoi.closed_form import Branch, PoleViolation, UnsupportedB
from ehaoi.model import Discipline, EhMode, SystemParams, build_model

ALL = [(d, m) for d in Discipline for m in EhMode]


def params(rho, beta, B, mu=1.0):
    return SystemParams.from_utilization(rho, beta, B, mu)


def rel(a, b):
    return abs(a - b) / max(abs(a), abs(b))


class TestSteadyStates:
    @pytest.mark.parametrize("rho,beta,B", [(1.0, 1.0, 1), (0.5, 2.0, 3), (2.0, 0.5, 5), (1.5, 1.5, 4)])
    def test_np_family_matches_solver(self, rho, beta, B):
        p = params(rho, beta, B)
        want = solver.steady_state(build_model(p, "np", "empty")).pi
        np.testing.assert_allclose(cf.prop1_steady_state(p), want, rtol=1e-12)

    @pytest.mark.parametrize("rho,beta,B", [(1.0, 1.0, 2), (0.5, 2.0, 3), (2.0, 0.5, 5), (3.0, 1.5, 2)])
    def test_pw_matches_solver(self, rho, beta, B):
        p = params(rho, beta, B)
        want = solver.steady_state(build_model(p, "pw", "empty")).pi
        np.testing.assert_allclose(cf.prop2_steady_state(p), want, rtol=1e-12)

    def test_single_battery_value(self):
        np.testing.assert_allclose(cf.prop1_steady_state(params(1, 2, 1)), [0.2, 0.4, 0.4], rtol=1e-14)


class TestAux:
    def test_theta_spot_value(self):
        aux = cf.compute_aux(params(1, 2, 1), "np", "empty")
        assert aux.theta == pytest.approx(2.0, rel=1e-14)
        assert aux.pi1 == pytest.approx(0.2, rel=1e-14)
        assert aux.branch is Branch.RHO_NEQ_BETA

    def test_branch_tags(self):
        assert cf.compute_aux(params(1.3, 1.3, 2), "np", "empty").branch is Branch.RHO_EQ_BETA
        assert cf.compute_aux(params(1.3, 1.3 * 2.3, 2), "pw", "empty").branch is Branch.BETA_EQ_RHO_1P_RHO

    def test_large_battery_anytime_is_numeric(self):
        assert cf.compute_aux(params(1, 2, 3), "np", "any").numeric
        assert not cf.compute_aux(params(1, 2, 2), "np", "any").numeric


class TestMgf:
    @pytest.mark.parametrize("d,m", ALL)
    @pytest.mark.parametrize("B", [1, 2, 3])
    def test_unit_at_zero(self, d, m, B):
        assert cf.mgf_closed(params(0.7, 1.9, B), d, m, 0.0).value == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("d,m", ALL)
    @pytest.mark.parametrize("rho,beta,B", [(0.5, 2.0, 2), (2.0, 0.5, 1), (1.0, 3.0, 3), (1.7, 1.7, 2)])
    @pytest.mark.parametrize("s", [-2.0, -0.3, 0.2])
    def test_matches_solver(self, d, m, rho, beta, B, s):
        p = params(rho, beta, B)
        if s >= cf.mgf_pole(p, d, m):
            pytest.skip("beyond the first pole")
        want = solver.mgf(build_model(p, d, m), s * p.mu).value
        assert cf.mgf_closed(p, d, m, s).value == pytest.approx(want, rel=1e-9)

    def test_pole_violation(self):
        p = params(0.5, 2.0, 2)
        with pytest.raises(PoleViolation):
            cf.mgf_closed(p, "np", "empty", 0.5)

    def test_spot_value(self):
        assert cf.mgf_closed(params(1, 1, 1), "np", "empty", -1.0).value == pytest.approx(7 / 48, rel=1e-13)

    @pytest.mark.parametrize("d", list(Discipline))
    def test_anytime_missing_term_regression(self, d):
        # regression for the anytime numerator and the PW bracket sign
        p = params(1.0, 2.0, 2)
        want = solver.mgf(build_model(p, d, "any"), -1.0).value
        assert cf.mgf_closed(p, d, "any", -1.0).value == pytest.approx(want, rel=1e-12)


class TestMoments:
    @pytest.mark.parametrize("d", list(Discipline))
    @pytest.mark.parametrize("k", [1, 2])
    @pytest.mark.parametrize("B", [1, 2, 5])
    def test_branch_continuity(self, d, k, B):
        # the rho = beta (and PW beta = rho(1+rho)) branches are limits of the general one
        rho = 1.2
        betas = [rho, rho * (1 + rho)] if d is Discipline.PW else [rho]
        for beta in betas:
            exact = cf.moments_closed(params(rho, beta, B), d, "empty", k).value
            near = cf.moments_closed(params(rho, beta * (1 + 1e-8), B), d, "empty", k).value
            assert rel(exact, near) < 1e-6

    @pytest.mark.parametrize("d", list(Discipline))
    @pytest.mark.parametrize("k", [1, 2])
    def test_single_battery_modes_agree(self, d, k):
        p = params(0.8, 2.5, 1)
        a = cf.moments_closed(p, d, "empty", k)
        b = cf.moments_closed(p, d, "any", k)
        assert a.value == pytest.approx(b.value, rel=1e-14)

    @pytest.mark.parametrize("k", [1, 2])
    def test_pw_single_battery_is_np(self, k):
        p = params(0.8, 2.5, 1)
        assert cf.moments_closed(p, "pw", "empty", k).value == pytest.approx(
            cf.moments_closed(p, "np", "empty", k).value, rel=1e-14)

    def test_unsupported_battery(self):
        p = params(1, 2, 3)
        assert not cf.has_closed_moment(p, "ps", "any")
        with pytest.raises(UnsupportedB):
            cf.moments_closed(p, "ps", "any", 1)

    def test_moment_falls_back_to_solver(self):
        p = params(1, 2, 3)
        assert cf.moment(p, "ps", "any", 1) == pytest.approx(solver.aoi_moment(build_model(p, "ps", "any"), 1), rel=1e-14)

    def test_rejects_higher_orders(self):
        with pytest.raises(ValueError):
            cf.moments_closed(params(1, 1, 1), "np", "empty", 3)

    def test_source_tag(self):
        r = cf.moments_closed(params(1, 1, 1), "np", "empty", 1)
        assert r.source == "np-empty/moment1"
        assert r.branch is Branch.RHO_EQ_BETA

    @given(
        rho=st.floats(0.05, 10),
        beta=st.floats(0.05, 10),
        B=st.integers(1, 8),
        mu=st.floats(0.2, 5),
    )
    @settings(max_examples=80, deadline=None)
    def test_np_second_moment_symmetric(self, rho, beta, B, mu):
        a = cf.moments_closed(params(rho, beta, B, mu), "np", "empty", 2).value
        b = cf.moments_closed(params(beta, rho, B, mu), "np", "empty", 2).value
        assert rel(a, b) < 1e-10

    @pytest.mark.parametrize("mu", [0.5, 4.0])
    def test_scaling_in_mu(self, mu):
        for d, k in itertools.product(Discipline, (1, 2)):
            base = cf.moments_closed(params(0.9, 1.4, 3), d, "empty", k).value
            scaled = cf.moments_closed(params(0.9, 1.4, 3, mu), d, "empty", k).value
            assert scaled == pytest.approx(base / mu**k, rel=1e-12)


class TestLimits:
    def test_unlimited_energy_queues(self):
        p = params(1, 1, 1)
        assert cf.limits_beta_inf(p, "np", "empty", 1).value == pytest.approx(2.5, rel=1e-14)
        assert cf.limits_beta_inf(p, "ps", "empty", 1).value == pytest.approx(2.0, rel=1e-14)

    def test_pw_limit_spot_value(self):
        assert cf.limits_beta_inf(params(1, 1, 2), "pw", "empty", 1).value == pytest.approx(2.5, rel=1e-14)

    @pytest.mark.parametrize("d,m", ALL)
    @pytest.mark.parametrize("B", [1, 2])
    def test_approached_by_large_beta(self, d, m, B):
        for k in (1, 2):
            lim = cf.limits_beta_inf(params(0.7, 1.0, B), d, m, k).value
            far = cf.moments_closed(params(0.7, 1e7, B), d, m, k).value
            assert rel(lim, far) < 1e-5


class TestGap:
    @pytest.mark.parametrize("B", [1, 2, 5])
    def test_endpoints(self, B):
        small = cf.discipline_gap(params(1e-6, 1e-6, B), "empty", 1, "np-ps")
        large = cf.discipline_gap(params(1e6, 1e6, B), "empty", 1, "np-ps")
        assert small == pytest.approx(0.0, abs=1e-5)
        assert large == pytest.approx(1.0, rel=1e-5)

    def test_pairs_are_consistent(self):
        p = params(1.1, 0.9, 2)
        for m, k in itertools.product(EhMode, (1, 2)):
            np_ps = cf.discipline_gap(p, m, k, "np-ps")
            pw_ps = cf.discipline_gap(p, m, k, "pw-ps")
            np_pw = cf.discipline_gap(p, m, k, "np-pw")
            assert np_ps == pytest.approx(pw_ps + np_pw, rel=1e-12)

    def test_printed_equal_rate_branch_disagrees(self):
        p = params(1, 1, 1)
        assert cf.printed_np_ps_gap(p, 1) == pytest.approx(2 / 3, rel=1e-14)
        assert cf.discipline_gap(p, "empty", 1, "np-ps") == pytest.approx(0.5, rel=1e-14)

    @pytest.mark.parametrize("rho,beta,B", [(1.0, 1.0, 1), (0.5, 2.0, 3), (2.0, 0.7, 2)])
    def test_printed_second_moment_gap_agrees(self, rho, beta, B):
        p = params(rho, beta, B)
        assert cf.printed_np_ps_gap(p, 2) == pytest.approx(cf.discipline_gap(p, "empty", 2, "np-ps"), rel=1e-10)
