import dataclasses
import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from ehaoi import closed_form as cf
from ehaoi import solver
from ehaoi.model import Discipline, EhMode, SystemParams, build_model

ALL = [(d, m) for d in Discipline for m in EhMode]


def params(rho, beta, B, mu=1.0):
    return SystemParams.from_utilization(rho, beta, B, mu)


def null_space_pi(model):
    """Stationary law from the null space of Q^T (independent of the LU path)."""
    Q = solver.generator_matrix(model)
    ns = scipy.linalg.null_space(Q.T)
    assert ns.shape[1] == 1
    v = ns[:, 0]
    return v / v.sum()


class TestSteadyState:
    @pytest.mark.parametrize("d,m", ALL)
    @pytest.mark.parametrize("rho,beta,B", [(0.5, 2.0, 1), (1.0, 1.0, 3), (3.0, 0.7, 5)])
    def test_matches_null_space(self, d, m, rho, beta, B):
        model = build_model(params(rho, beta, B), d, m)
        np.testing.assert_allclose(solver.steady_state(model).pi, null_space_pi(model), atol=1e-13)

    @pytest.mark.parametrize("rho,beta,want", [
        (1.0, 1.0, [1 / 3, 1 / 3, 1 / 3]),
        (1.0, 2.0, [1 / 5, 2 / 5, 2 / 5]),
        (0.5, 3.0, [0.1, 0.6, 0.3]),
    ])
    def test_single_battery_values(self, rho, beta, want):
        model = build_model(params(rho, beta, 1), "np", "empty")
        np.testing.assert_allclose(solver.steady_state(model).pi, want, rtol=1e-13)

    def test_generator_rows_sum_to_zero(self):
        Q = solver.generator_matrix(build_model(params(1.3, 0.4, 4), "pw", "any"))
        np.testing.assert_allclose(Q.sum(axis=1), 0.0, atol=1e-13)

    def test_disconnected_chain_raises(self):
        model = build_model(params(1, 1, 2), "np", "empty")
        # drop every transition out of the empty-battery state
        kept = tuple(t for t in model.transitions if t.source != 0 and t.target != 0)
        with pytest.raises(solver.SingularSystem):
            solver.steady_state(dataclasses.replace(model, transitions=kept))


class TestMoments:
    def test_spot_values(self):
        p = params(1, 1, 1)
        assert solver.aoi_moment(build_model(p, "np", "empty"), 1) == pytest.approx(3.0, rel=1e-12)
        assert solver.aoi_moment(build_model(p, "np", "empty"), 2) == pytest.approx(38 / 3, rel=1e-12)
        assert solver.aoi_moment(build_model(p, "ps", "empty"), 1) == pytest.approx(2.5, rel=1e-12)

    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
    def test_unlimited_energy_queues(self, lam):
        # with energy almost always available the B = 1 systems become
        # M/M/1/1 with blocking (NP) and with preemption (PS)
        p = SystemParams(lam, 1e8, 1.0, 1)
        assert solver.aoi_moment(build_model(p, "np", "empty"), 1) == pytest.approx(1 / lam + 2 - 1 / (lam + 1), rel=1e-6)
        assert solver.aoi_moment(build_model(p, "ps", "empty"), 1) == pytest.approx(1 / lam + 1, rel=1e-6)

    def test_moment_vectors_solve_their_system(self):
        model = build_model(params(0.8, 1.7, 3), "pw", "empty")
        pi = solver.steady_state(model)
        vecs = solver.moment_vectors(model, pi, 2)
        assert vecs.aoi_moment(1) == pytest.approx(solver.aoi_moment(model, 1), rel=1e-13)
        assert vecs.aoi_moment(2) == pytest.approx(solver.aoi_moment(model, 2), rel=1e-13)

    def test_rejects_order_zero(self):
        model = build_model(params(1, 1, 1), "np", "empty")
        with pytest.raises(ValueError):
            solver.moment_vectors(model, solver.steady_state(model), 0)

    @given(
        rho=st.floats(0.05, 20),
        beta=st.floats(0.05, 20),
        B=st.integers(1, 6),
        cfg=st.sampled_from(ALL),
    )
    @settings(max_examples=60, deadline=None)
    def test_second_moment_exceeds_square_of_mean(self, rho, beta, B, cfg):
        model = build_model(params(rho, beta, B), *cfg)
        m1, m2 = solver.aoi_moment(model, 1), solver.aoi_moment(model, 2)
        assert m1 > 0
        assert m2 >= m1 * m1 * (1 - 1e-9)


class TestMgf:
    @pytest.mark.parametrize("d,m", ALL)
    def test_unit_at_zero(self, d, m):
        model = build_model(params(1.3, 0.6, 3), d, m)
        assert solver.mgf(model, 0.0).value == pytest.approx(1.0, abs=1e-12)

    def test_spot_value(self):
        model = build_model(params(1, 1, 1), "np", "empty")
        assert solver.mgf(model, -1.0).value == pytest.approx(7 / 48, rel=1e-12)

    def test_delivery_state_component(self):
        # the age in the empty-battery state with idle-only harvesting,
        # v = beta * pi_1 / ((1 - s)(beta - s)) in normalised units
        rho, beta, s = 1.0, 2.0, -0.5
        model = build_model(params(rho, beta, 2), "np", "empty")
        pi = solver.steady_state(model).pi
        v = solver.mgf(model, s, keep_vectors=True).vectors
        assert v[0, 0] == pytest.approx(beta * pi[0] / ((1 - s) * (beta - s)), rel=1e-13)

    @pytest.mark.parametrize("d,m", ALL)
    @pytest.mark.parametrize("rho,beta,B", [(0.5, 2.0, 2), (3.0, 0.4, 1), (2.0, 5.0, 3)])
    def test_abscissa_is_smallest_rate(self, d, m, rho, beta, B):
        p = params(rho, beta, B)
        model = build_model(p, d, m)
        assert solver.mgf_abscissa(model) == pytest.approx(p.mu * cf.mgf_pole(p, d, m), rel=1e-9)

    def test_diverges_beyond_abscissa(self):
        model = build_model(params(0.5, 2.0, 2), "np", "empty")
        assert solver.mgf(model, 0.4).converged
        assert not solver.mgf(model, 0.5).converged
        assert not solver.mgf(model, 0.7).converged

    @given(s=st.floats(-5.0, 0.45), cfg=st.sampled_from(ALL))
    @settings(max_examples=60, deadline=None)
    def test_increasing_and_positive(self, s, cfg):
        model = build_model(params(0.5, 2.0, 2), *cfg)
        a, b = solver.mgf(model, s), solver.mgf(model, s + 0.01)
        assert a.converged and b.converged
        assert 0 < a.value < b.value

    def test_curve_derivatives(self):
        model = build_model(params(1, 2, 2), "ps", "any")
        curve = solver.mgf_curve(model, [-1e-4, 0.0, 1e-4])
        assert curve.first_derivative == pytest.approx(solver.aoi_moment(model, 1), rel=1e-4)
        assert curve.second_derivative == pytest.approx(solver.aoi_moment(model, 2), rel=1e-3)

    def test_curve_without_zero_has_no_derivatives(self):
        curve = solver.mgf_curve(build_model(params(1, 2, 2), "np", "empty"), [-1.0, -0.5])
        assert curve.first_derivative is None and curve.second_derivative is None
        assert len(curve.samples) == 2

    def test_curve_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            solver.mgf_curve(build_model(params(1, 2, 2), "np", "empty"), [math.nan])
