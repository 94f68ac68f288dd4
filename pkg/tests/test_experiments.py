import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from brwlab import experiments as ex
from brwlab.envmodel import EnvironmentLaw
from brwlab.particles import Configuration
from brwlab.stats import bernoulli_estimate, wilson_interval

GW = EnvironmentLaw.single([0.25, 0.25, 0.5])
TWO = EnvironmentLaw.single([0.0, 0.0, 1.0])
DELTA0 = EnvironmentLaw.single([1.0])
MIX = EnvironmentLaw.mixture([(0.5, [0.0, 0.0, 1.0]), (0.5, [0.5, 0.5])])

ORIGIN = Configuration.point(0, 1, dimension=1)


class TestWilson:
    @given(st.integers(1, 500), st.data())
    def test_interval_brackets_the_mean(self, n, data):
        k = data.draw(st.integers(0, n))
        est = bernoulli_estimate(k, n)
        assert 0.0 <= est.wilson_low <= est.mean <= est.wilson_high <= 1.0

    def test_known_value(self):
        lo, hi = wilson_interval(0, 10)
        assert lo == 0.0 and 0.25 < hi < 0.35


class TestSurvival:
    def test_delta0_is_zero_with_zero_variance(self):
        est = ex.survival_probability(DELTA0, ORIGIN, 1, 50, None, 200, 3)
        assert est.mean == 0.0 and est.std_error == 0.0

    def test_matches_pgf_oracle(self):
        want = oracles.gw_survival_probability((0.25, 0.25, 0.5))
        est = ex.survival_probability(GW, ORIGIN, 1, 200, 10_000, 1500, 7)
        se = math.sqrt(want * (1 - want) / est.replicas)
        assert abs(est.mean - want) <= 3 * se

    def test_empty_initial_rejected(self):
        with pytest.raises(ValueError):
            ex.survival_probability(GW, Configuration.empty(1), 1, 10, None, 5, 0)

    def test_quenched_mode_fixes_environment(self):
        a = ex.survival_runs(MIX, ORIGIN, 1, 30, 1000, 50, 3, quenched_seed=99)
        b = ex.survival_runs(MIX, ORIGIN, 1, 30, 1000, 50, 4, quenched_seed=99)
        # same environment, fresh dynamics: outcomes differ but are legal
        assert len(a) == len(b) == 50

    def test_threads_do_not_change_results(self):
        a = ex.survival_runs(GW, ORIGIN, 1, 60, 5000, 60, 11, threads=1)
        b = ex.survival_runs(GW, ORIGIN, 1, 60, 5000, 60, 11, threads=3)
        assert a == b


class TestRhoSweep:
    def test_rho_one_reproduces_survival(self):
        replicas, horizon, cap = 150, 80, 5000
        sweep = ex.rho_sweep(GW, 1, (0.7, 1.0), horizon, cap, replicas, 60, 13,
                             psi_replicas=5)
        direct = ex.survival_probability(GW, ORIGIN, 1, horizon, cap, replicas, 13)
        assert sweep.survival_proxy[-1].mean == direct.mean

    def test_monotone_and_prediction(self):
        sweep = ex.rho_sweep(TWO, 1, (0.4, 0.6, 0.8), 120, 20_000, 200, 80, 5,
                             psi_replicas=5)
        assert sweep.rho_c_predicted == pytest.approx(0.5, abs=1e-9)
        assert sweep.psi_hat.psi_hat == pytest.approx(math.log(2), abs=1e-9)
        means = [e.mean for e in sweep.survival_proxy]
        assert means == sorted(means)
        assert np.all(~sweep.survived[:, :-1] | sweep.survived[:, 1:])
        assert sweep.warnings  # no mass at zero is flagged, not fatal

    def test_subcritical_thinning_dies(self):
        sweep = ex.rho_sweep(TWO, 1, (0.4,), 150, 20_000, 150, 80, 5,
                             psi_replicas=5)
        assert sweep.survival_proxy[0].mean <= 3 * 0.5 / math.sqrt(150)

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            ex.rho_sweep(GW, 1, (0.8, 0.4), 10, None, 5, 10, 0, psi_replicas=5)
        with pytest.raises(ValueError):
            ex.rho_sweep(GW, 1, (0.0, 0.4), 10, None, 5, 10, 0, psi_replicas=5)

    def test_zero_mean_component_rejected(self):
        bad = EnvironmentLaw.mixture([(0.5, [1.0]), (0.5, [0.0, 0.0, 1.0])])
        with pytest.raises(ValueError):
            ex.rho_sweep(bad, 1, (0.5,), 10, None, 5, 10, 0, psi_replicas=5)


class TestFunctionalCatalog:
    def test_parse_and_evaluate(self):
        cfg = Configuration.from_sites({(0,): 2, (3,): 1})
        f = ex.parse_functional("total", 1)
        assert f(cfg) == 3.0
        assert ex.parse_functional("occupied", 1)(cfg) == 2.0
        assert ex.parse_functional("site:0", 1)(cfg) == 1.0
        assert ex.parse_functional("site:1", 1)(cfg) == 0.0
        assert ex.parse_functional("halfspace:0:1", 1)(cfg) == 1.0
        assert ex.parse_functional("total_capped:2", 1)(cfg) == 2.0
        assert ex.parse_functional("occupied_capped:1", 1)(cfg) == 1.0

    def test_refuses_non_catalog(self):
        for bad in ("variance", "site", "halfspace:0", "site:0,0",
                    "halfspace:3:1", "total_capped:0"):
            with pytest.raises(ex.CatalogError):
                ex.parse_functional(bad, 1)

    def test_catalog_functionals_are_monotone(self):
        small = Configuration.from_sites({(0,): 1, (2,): 1})
        big = Configuration.from_sites({(0,): 3, (2,): 1, (-2,): 2})
        for spec in ex.default_catalog(1):
            f = ex.parse_functional(spec, 1)
            assert f(small) <= f(big), spec


class TestFKG:
    def test_f_equals_g_passes(self):
        rep = ex.fkg_test(MIX, 1, ORIGIN, 10, "total", "total", 300, 3)
        assert rep.covariance >= 0 and rep.passed

    def test_delta0_degenerate(self):
        rep = ex.fkg_test(DELTA0, 1, ORIGIN, 5, "total", "occupied", 100, 3)
        assert rep.covariance == 0.0 and rep.passed

    def test_suite_all_pairs_pass(self):
        reports = ex.fkg_suite(MIX, 1, ORIGIN, 15, ex.default_catalog(1), 2000, 9)
        assert len(reports) == 21
        assert all(r.passed for r in reports)

    def test_mass_and_origin_occupation(self):
        rep = ex.fkg_test(MIX, 1, ORIGIN, 20, "total", "site:0", 2000, 5)
        assert rep.passed


class TestDiagnostics:
    def test_bundle_shapes_and_monotonicity(self):
        opts = ex.DiagnosticsOptions(replicas=80, growth_horizon=12,
                                     seed_spread_grid=(0, 1, 2, 4, 8),
                                     diamond_grid=(0, 2, 4),
                                     survival_horizon=40, cap=20_000,
                                     saturation_grid=(2, 4, 8),
                                     saturation_t=12, saturation_N=5)
        bundle = ex.diagnostics(GW, 1, 21, opts)
        assert bundle.seed_spread.estimates[0].mean == 0.0  # zero seeds
        spread = [e.mean for e in bundle.seed_spread.estimates]
        assert spread == sorted(spread)
        surv = [e.mean for e in bundle.diamond_survival.estimates]
        assert surv == sorted(surv)
        sat = [e.mean for e in bundle.truncation_saturation.estimates]
        assert sat == sorted(sat)
        assert len(bundle.growth.times) == 13

    def test_always_two_diamond_curve_saturates(self):
        # no deaths: every run survives, matching the naive oracle
        opts = ex.DiagnosticsOptions(replicas=60, growth_horizon=10,
                                     diamond_grid=(0, 2, 6),
                                     survival_horizon=100, cap=10_000,
                                     saturation_grid=(2, 4),
                                     saturation_t=10, saturation_N=5)
        bundle = ex.diagnostics(TWO, 1, 31, opts)
        means = [e.mean for e in bundle.diamond_survival.estimates]
        assert means[-1] >= 0.99
        naive = oracles.naive_survival_fraction((0.0, 0.0, 1.0), 100, 100,
                                                10_000, seed=2)
        assert naive == 1.0
