import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brwlab.envmodel import EnvironmentLaw, QuenchedEnvironment
from brwlab.particles import Configuration
from brwlab.renorm import (BlockEventSpec, block_event, block_event_probability,
                           contains_translate, diamond, face_trick_checks,
                           orthant_statistics, square_root_trick_checks)
from brwlab.streams import replica_seeds

TWO = EnvironmentLaw.single([0.0, 0.0, 1.0])
DELTA0 = EnvironmentLaw.single([1.0])
MIX = EnvironmentLaw.mixture([(0.5, [0.0, 0.0, 1.0]), (0.5, [0.5, 0.5])])


def brute_diamond(n, d):
    out = set()
    for x in itertools.product(range(-n, n + 1), repeat=d):
        if sum(abs(v) for v in x) <= n and sum(x) % 2 == 0:
            out.add(x)
    return out


class TestDiamond:
    def test_radius_zero(self):
        assert diamond(0, 1).sites.tolist() == [[0]]
        assert diamond(0, 3).sites.tolist() == [[0, 0, 0]]

    def test_one_dimensional(self):
        assert diamond(2, 1).sites.ravel().tolist() == [-2, 0, 2]

    def test_two_dimensional_radius_two(self):
        got = {tuple(x) for x in diamond(2, 2).sites}
        assert got == {(0, 0), (2, 0), (-2, 0), (0, 2), (0, -2),
                       (1, 1), (1, -1), (-1, 1), (-1, -1)}

    @given(st.integers(0, 5), st.integers(1, 3))
    @settings(max_examples=20)
    def test_matches_enumeration(self, n, d):
        assert {tuple(x) for x in diamond(n, d).sites} == brute_diamond(n, d)

    @given(st.integers(0, 4), st.integers(1, 3))
    @settings(max_examples=15)
    def test_signed_permutation_symmetry(self, n, d):
        sites = {tuple(x) for x in diamond(n, d).sites}
        assert (0,) * d in sites or n % 2 == 1 or n == 0 or (0,) * d in sites
        for perm in itertools.permutations(range(d)):
            for signs in itertools.product((1, -1), repeat=d):
                mapped = {tuple(signs[j] * x[perm[j]] for j in range(d))
                          for x in sites}
                assert mapped == sites


class TestContainsTranslate:
    def test_exact_translate(self):
        dia = diamond(2, 1)
        occ = {(x + 4,) for x in (-2, 0, 2)}
        assert contains_translate(occ, (4,), dia)

    def test_missing_site(self):
        dia = diamond(2, 1)
        occ = {(2,), (4,)}
        assert not contains_translate(occ, (4,), dia)

    def test_full_box_contains_interior_translate(self):
        dia = diamond(2, 2)
        occ = set(itertools.product(range(-6, 7), repeat=2))
        assert contains_translate(occ, (1, 1), dia)

    def test_accepts_configuration(self):
        dia = diamond(0, 1)
        cfg = Configuration.from_sites({(3,): 2})
        assert contains_translate(cfg, (3,), dia)


class TestBlockEvent:
    def test_delta0_never_occurs(self):
        spec = BlockEventSpec(n=2, L=4, T=5, d=1)
        env = QuenchedEnvironment(DELTA0, seed=1, dimension=1)
        res = block_event(env, spec, 3)
        assert not res.occurred and res.witness is None

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            BlockEventSpec(n=5, L=4, T=5, d=1)

    def test_witness_in_window(self):
        spec = BlockEventSpec(n=2, L=6, T=15, d=1)
        env = QuenchedEnvironment(TWO, seed=2, dimension=1)
        res = block_event(env, spec, 5)
        assert res.occurred
        t, x = res.witness
        assert spec.T <= t <= 2 * spec.T
        assert spec.L + spec.n <= x[0] <= 2 * spec.L + spec.n

    def test_n_zero_reduces_to_single_site(self):
        spec = BlockEventSpec(n=0, L=4, T=10, d=1)
        env = QuenchedEnvironment(TWO, seed=3, dimension=1)
        res = block_event(env, spec, 7)
        assert res.occurred  # a lone site in the slab suffices

    def test_monotone_in_initial_set(self):
        spec = BlockEventSpec(n=2, L=6, T=12, d=1)
        small = diamond(0, 1).as_configuration()
        for r in range(30):
            env_seed, dyn_seed = replica_seeds(17, r)
            env = QuenchedEnvironment(MIX, seed=env_seed, dimension=1)
            lo = block_event(env, spec, dyn_seed, initial=small)
            hi = block_event(env, spec, dyn_seed)
            assert hi.occurred or not lo.occurred

    def test_probability_estimate(self):
        spec = BlockEventSpec(n=2, L=6, T=15, d=1)
        est, results = block_event_probability(TWO, spec, 40, 23)
        assert est.mean >= 0.95
        assert len(results) == 40
        assert 0 <= est.wilson_low <= est.mean <= est.wilson_high <= 1


class TestOrthantStatistics:
    def test_delta0_all_zero(self):
        table = orthant_statistics(DELTA0, 1, 2, 5, 6, 6, 3, 20)
        for name in ("total", "orthant_total", "occupied", "orthant_occupied",
                     "face_particles", "face_occupied",
                     "face_orthant_particles", "face_orthant_occupied"):
            assert getattr(table, name).sum() == 0

    def test_orthant_bounded_by_total(self):
        table = orthant_statistics(MIX, 2, 2, 5, 6, 6, 3, 100)
        assert np.all(table.orthant_total <= table.total)
        assert np.all(table.orthant_occupied <= table.occupied)
        assert np.all(table.face_orthant_particles <= table.face_particles)
        assert np.all(table.face_orthant_occupied <= table.face_occupied)

    def test_requires_room(self):
        with pytest.raises(ValueError):
            orthant_statistics(MIX, 1, 4, 4, 5, 5, 3, 10)

    def test_trick_inequalities_small(self):
        table = orthant_statistics(MIX, 1, 2, 6, 8, 8, 29, 600)
        for check in square_root_trick_checks(table, (1, 2, 4, 8)):
            assert check.ok, check
        for check in face_trick_checks(table, (1, 2, 4)):
            assert check.ok, check
