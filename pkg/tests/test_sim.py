import numpy as np
import pytest

from ehaoi import closed_form as cf
from ehaoi.model import Discipline, EhMode, SystemParams
from ehaoi.sim import SimConfig, replicate, simulate


def params(rho, beta, B, mu=1.0):
    return SystemParams.from_utilization(rho, beta, B, mu)


def config(d="np", m="empty", rho=1.0, beta=1.0, B=1, horizon=2e4, seed=7, s=()):
    return SimConfig(params(rho, beta, B), d, m, horizon=horizon, warmup=50.0, seed=seed, mgf_points=s)


class TestConfig:
    def test_rejects_bad_horizon(self):
        with pytest.raises(ValueError):
            SimConfig(params(1, 1, 1), "np", "empty", horizon=10.0, warmup=20.0)

    def test_rejects_huge_seed(self):
        with pytest.raises(ValueError):
            SimConfig(params(1, 1, 1), "np", "empty", horizon=10.0, seed=2**64)

    def test_coerces_enums(self):
        cfg = config(d="pw", m="any")
        assert cfg.discipline is Discipline.PW and cfg.eh_mode is EhMode.ANYTIME


class TestDeterminism:
    def test_same_seed_same_result(self):
        a, b = simulate(config(s=(-0.5,))), simulate(config(s=(-0.5,)))
        assert a.mean_age == b.mean_age and a.empirical_mgf == b.empirical_mgf
        assert a.events_processed == b.events_processed

    def test_different_seed_differs(self):
        assert simulate(config(seed=1)).mean_age != simulate(config(seed=2)).mean_age

    def test_single_replication_is_simulate(self):
        cfg = config(d="ps", B=2)
        assert replicate(cfg, 1).mean_age == simulate(cfg).mean_age

    def test_workers_do_not_change_results(self):
        cfg = config(horizon=5e3)
        a, b = replicate(cfg, 3, workers=1), replicate(cfg, 3, workers=2)
        assert a.mean_age == b.mean_age and a.stderr_age == b.stderr_age


class TestStatistics:
    def test_mgf_at_zero_is_one(self):
        r = simulate(config(s=(0.0, -1.0)))
        assert r.mgf_at(0.0) == (1.0, 0.0)
        assert 0 < r.mgf_at(-1.0)[0] < 1

    def test_effective_time(self):
        r = simulate(config(horizon=1e4))
        assert r.effective_time == pytest.approx(1e4 - 50.0, rel=1e-12)
        assert r.occupancy.sum() == pytest.approx(1.0, rel=1e-12)

    def test_ci_contains_mean(self):
        r = simulate(config())
        lo, hi = r.ci("age", 0.99)
        assert lo < r.mean_age < hi
        lo95, hi95 = r.ci("age", 0.95)
        assert lo < lo95 and hi95 < hi

    @pytest.mark.slow
    def test_np_spot_value(self):
        r = simulate(config(horizon=1e6, s=(-1.0,)))
        assert r.mean_age == pytest.approx(3.0, rel=0.02)
        assert r.mean_age_sq == pytest.approx(38 / 3, rel=0.03)
        assert r.mgf_at(-1.0)[0] == pytest.approx(7 / 48, rel=0.02)

    @pytest.mark.slow
    @pytest.mark.parametrize("d,m,rho,beta,B", [
        ("ps", "empty", 1.0, 1.0, 1),
        ("pw", "empty", 1.5, 2.0, 3),
        ("np", "any", 0.7, 1.2, 2),
        ("pw", "any", 2.0, 1.0, 2),
    ])
    def test_agrees_with_closed_forms(self, d, m, rho, beta, B):
        p = params(rho, beta, B)
        r = replicate(config(d, m, rho, beta, B, horizon=5e4, seed=11), 8, workers=1)
        for k, stat in ((1, "age"), (2, "age_sq")):
            lo, hi = r.ci(stat, 0.999)
            assert lo <= cf.moments_closed(p, d, m, k).value <= hi


class TestOccupancy:
    @pytest.mark.slow
    @pytest.mark.parametrize("rho,beta,B", [(1.0, 2.0, 2), (0.5, 0.8, 3)])
    def test_np_matches_stationary_law(self, rho, beta, B):
        p = params(rho, beta, B)
        r = simulate(config("np", "empty", rho, beta, B, horizon=3e5))
        pi = cf.prop1_steady_state(p)
        # labels 1 = (0,0), 2e = (e,0), 2e+1 = (e,1)
        occ = [r.occupancy[0, 0]] + [r.occupancy[e, u] for e in range(1, B + 1) for u in (0, 1)]
        np.testing.assert_allclose(occ, pi, atol=0.01)

    @pytest.mark.slow
    def test_pw_matches_stationary_law(self):
        p = params(1.0, 2.0, 2)
        r = simulate(config("pw", "empty", 1.0, 2.0, 2, horizon=3e5))
        pi = cf.prop2_steady_state(p)
        occ = [r.occupancy[0, 0], r.occupancy[1, 0], r.occupancy[1, 1],
               r.occupancy[2, 0], r.occupancy[2, 1], r.occupancy[2, 2]]
        np.testing.assert_allclose(occ, pi, atol=0.01)

    @pytest.mark.parametrize("d", ["np", "ps", "pw"])
    def test_unreachable_states_never_visited(self, d):
        r = simulate(config(d, "empty", 1.5, 1.0, 3, horizon=5e3))
        assert r.occupancy[0, 1:].sum() == 0.0
        assert r.occupancy[1, 2] == 0.0
        if d != "pw":
            assert r.occupancy[:, 2].sum() == 0.0
