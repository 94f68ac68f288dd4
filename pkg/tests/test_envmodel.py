import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from brwlab.envmodel import (EnvironmentLaw, LawValidationError, OffspringLaw,
                             QuenchedEnvironment, perturb, sample_offspring,
                             validate)


@st.composite
def pmfs(draw, max_support=5):
    k = draw(st.integers(1, max_support))
    raw = draw(st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=k + 1,
                        max_size=k + 1).filter(lambda v: sum(v) > 1e-6))
    total = sum(raw)
    vals = [v / total for v in raw]
    vals[-1] = 1.0 - sum(vals[:-1])
    if vals[-1] < 0:
        vals[-1] = 0.0
        s = sum(vals)
        vals = [v / s for v in vals]
    return tuple(vals)


class TestOffspringLaw:
    def test_mean_and_trim(self):
        q = OffspringLaw((0.25, 0.25, 0.5, 0.0))
        assert q.pmf == (0.25, 0.25, 0.5)
        assert q.mean == pytest.approx(1.25, abs=1e-15)
        assert q.max_children == 2

    def test_rejects_bad_pmfs(self):
        with pytest.raises(LawValidationError):
            OffspringLaw((0.5, 0.4))
        with pytest.raises(LawValidationError):
            OffspringLaw((-0.1, 1.1))

    def test_delta(self):
        assert OffspringLaw.delta(0).pmf == (1.0,)
        assert OffspringLaw.delta(2).mean == 2.0

    @given(pmfs())
    def test_tail_is_nonincreasing_and_ends_at_zero(self, pmf):
        q = OffspringLaw(pmf)
        assert q.tail[-1] == 0.0
        assert all(a >= b for a, b in zip(q.tail, q.tail[1:]))


class TestSampler:
    def test_delta_zero(self):
        q = OffspringLaw((1.0,))
        assert sample_offspring(q, 0.0) == 0
        assert sample_offspring(q, 0.999) == 0

    def test_inverse_cdf_thresholds(self):
        q = OffspringLaw((0.3, 0.2, 0.5))
        assert sample_offspring(q, 0.25) == 0
        assert sample_offspring(q, 0.4) == 1
        assert sample_offspring(q, 0.9) == 2

    def test_u_one_returns_top_of_support(self):
        q = OffspringLaw((0.3, 0.2, 0.5))
        assert sample_offspring(q, 1.0) == 2

    @given(pmfs(), st.floats(0.0, 1.0, exclude_max=True, allow_nan=False))
    def test_matches_direct_cdf_scan(self, pmf, u):
        q = OffspringLaw(pmf)
        cdf = np.cumsum(q.pmf)
        want = int(np.searchsorted(cdf, u, side="right"))
        want = min(want, q.max_children)
        got = sample_offspring(q, u)
        # tail representation may differ from the cdf by one ulp at the
        # boundaries; anywhere else the two scans agree exactly
        if not any(abs(u - c) < 1e-12 for c in cdf):
            assert got == want

    def test_empirical_tv_distance(self):
        from brwlab import streams
        q = OffspringLaw((0.25, 0.25, 0.5))
        n = 100_000
        u = streams.vuniform(streams.vmix64(np.arange(n, dtype=np.uint64)))
        counts = np.bincount([sample_offspring(q, float(x)) for x in u],
                             minlength=3)
        tv = 0.5 * np.abs(counts / n - np.array(q.pmf)).sum()
        assert tv <= 0.01


class TestPerturb:
    def test_simple_thinning(self):
        law = EnvironmentLaw.single([0.0, 1.0])
        thinned = perturb(law, 0.5)
        q = thinned.components[0][1]
        assert q.pmf == pytest.approx((0.5, 0.5), abs=1e-15)
        assert q.mean == pytest.approx(0.5, abs=1e-15)

    def test_identity_at_one(self):
        law = EnvironmentLaw.mixture([(0.3, [0.5, 0.5]), (0.7, [0.0, 0.0, 1.0])])
        assert perturb(law, 1.0) is law

    def test_worked_example(self):
        law = EnvironmentLaw.single([0.25, 0.25, 0.5])
        q = perturb(law, 0.8).components[0][1]
        assert q.pmf == pytest.approx((0.4, 0.2, 0.4), abs=1e-12)
        assert q.mean == pytest.approx(1.0, abs=1e-15)

    def test_domain(self):
        law = EnvironmentLaw.single([0.5, 0.5])
        for rho in (0.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                perturb(law, rho)

    @given(pmfs(), st.floats(0.01, 1.0, allow_nan=False))
    def test_mean_scales_exactly(self, pmf, rho):
        law = EnvironmentLaw.single(pmf)
        base = law.components[0][1].mean
        thinned = perturb(law, rho).components[0][1].mean
        assert thinned == pytest.approx(rho * base, rel=1e-15, abs=1e-300)

    @given(pmfs(), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
    def test_composition(self, pmf, r1, r2):
        law = EnvironmentLaw.single(pmf)
        twice = perturb(perturb(law, r1), r2).components[0][1].pmf
        once = perturb(law, r1 * r2).components[0][1].pmf
        assert len(twice) == len(once)
        for a, b in zip(twice, once):
            assert a == pytest.approx(b, abs=1e-12)

    @given(pmfs(), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
    def test_tails_monotone_in_rho_exactly(self, pmf, r1, r2):
        lo, hi = sorted((r1, r2))
        law = OffspringLaw(pmf)
        assert all(a <= b for a, b in zip(law.thin(lo).tail, law.thin(hi).tail))


class TestEnvironmentLaw:
    def test_merges_duplicates_and_drops_zero_weight(self):
        law = EnvironmentLaw.mixture([(0.25, [0.5, 0.5]), (0.25, [0.5, 0.5]),
                                      (0.5, [0.0, 1.0]), (0.0, [1.0])])
        assert law.n_components == 2
        assert law.components[0][0] == pytest.approx(0.5)

    def test_rejects_bad_weights(self):
        with pytest.raises(LawValidationError):
            EnvironmentLaw.mixture([(0.4, [1.0]), (0.4, [0.5, 0.5])])


class TestValidate:
    def test_supercritical_single(self):
        report = validate(EnvironmentLaw.single([0.25, 0.25, 0.5]))
        assert report.hyp1_ok and report.hyp2_ok
        assert report.dichotomy == "H_complement"

    def test_pure_delta_zero(self):
        report = validate(EnvironmentLaw.single([1.0]))
        assert not report.hyp1_ok
        assert report.dichotomy == "H"

    def test_support_confined_to_zero_one(self):
        report = validate(EnvironmentLaw.mixture([(0.5, [0.0, 1.0]),
                                                  (0.5, [0.5, 0.5])]))
        assert not report.hyp2_ok  # nobody can have two children

    def test_no_mass_at_zero(self):
        report = validate(EnvironmentLaw.single([0.0, 0.0, 1.0]))
        assert not report.hyp2_ok


class TestQuenchedEnvironment:
    def test_single_component_degenerate(self):
        law = EnvironmentLaw.single([0.25, 0.25, 0.5])
        env = QuenchedEnvironment(law, seed=1, dimension=2)
        assert env.query(3, (1, -5)) == law.components[0][1]

    def test_purity_and_order_independence(self):
        law = EnvironmentLaw.mixture([(0.3, [0.0, 1.0]), (0.7, [0.5, 0.5])])
        env = QuenchedEnvironment(law, seed=9, dimension=1)
        a = [env.query(t, (x,)) for t in range(5) for x in range(-5, 5)]
        b = [env.query(t, (x,)) for t in reversed(range(5))
             for x in reversed(range(-5, 5))]
        assert a == list(reversed(b))

    def test_scalar_matches_vector(self):
        law = EnvironmentLaw.mixture([(0.3, [0.0, 1.0]), (0.7, [0.5, 0.5])])
        env = QuenchedEnvironment(law, seed=4, dimension=2)
        coords = np.array([(x, y) for x in range(-4, 4) for y in range(-4, 4)])
        vec = env.component_indices(2, coords)
        scal = [env.component_index(2, tuple(c)) for c in coords]
        assert vec.tolist() == scal

    def test_component_frequency(self):
        law = EnvironmentLaw.mixture([(0.3, [0.0, 1.0]), (0.7, [0.5, 0.5])])
        env = QuenchedEnvironment(law, seed=123, dimension=1)
        coords = np.arange(100_000, dtype=np.int64).reshape(-1, 1)
        idx = env.component_indices(0, coords)
        freq = float((idx == 0).mean())
        assert abs(freq - 0.3) <= 0.01

    def test_marginal_over_seeds(self):
        # the law of query(t, x) over random seeds is the mixture itself
        law = EnvironmentLaw.mixture([(0.3, [0.0, 1.0]), (0.7, [0.5, 0.5])])
        hits = sum(QuenchedEnvironment(law, seed=s, dimension=1)
                   .component_index(7, (3,)) == 0 for s in range(20_000))
        assert abs(hits / 20_000 - 0.3) <= 0.01


def test_chi_square_goodness_of_fit_all_shipped_pmfs():
    from scipy.stats import chisquare
    from brwlab import streams
    from brwlab.laws import SHIPPED_LAWS

    n = 100_000
    u = streams.vuniform(streams.vmix64(np.arange(n, dtype=np.uint64) + np.uint64(17)))
    for name, law in SHIPPED_LAWS.items():
        for _, q in law.components:
            draws = np.fromiter((sample_offspring(q, float(x)) for x in u),
                                dtype=np.int64, count=n)
            counts = np.bincount(draws, minlength=len(q.pmf))
            expected = np.array(q.pmf) * n
            keep = expected > 0
            assert counts[~keep].sum() == 0, name
            if keep.sum() < 2:
                continue
            stat, p = chisquare(counts[keep], expected[keep])
            assert p > 0.001, (name, q.pmf, p)
