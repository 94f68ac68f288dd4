"""Cross-module consistency: particles vs polymer on one environment.

For a fixed quenched environment, the partition function at time t is
the conditional expectation of the population size at t for the process
started from a single particle at the origin. Agreement ties together
the environment hashing, the offspring sampler, the displacement draws
and the polymer recursion in one statistical check.
"""

import math

import numpy as np
import pytest

from brwlab import polymer
from brwlab.envmodel import EnvironmentLaw, QuenchedEnvironment
from brwlab.particles import Configuration, TruncationBox, run
from brwlab.streams import derive_seed


@pytest.mark.parametrize("d,t", [(1, 6), (2, 4)])
def test_population_mean_equals_partition_function(d, t):
    law = EnvironmentLaw.mixture([(0.5, [0.0, 0.0, 1.0]), (0.5, [0.5, 0.5])])
    env = QuenchedEnvironment(law, seed=1234 + d, dimension=d)
    log_z, _ = polymer.partition_function(env, t)
    z = math.exp(log_z)

    replicas = 4000
    totals = np.empty(replicas)
    A = Configuration.point((0,) * d, 1)
    for r in range(replicas):
        traj = run(env, A, t, TruncationBox.none(), None,
                   derive_seed(55, "xmod", d, r))
        totals[r] = traj.total_at(t)
    se = totals.std(ddof=1) / math.sqrt(replicas)
    assert abs(totals.mean() - z) <= 4 * se


def test_three_dimensional_run_smoke():
    law = EnvironmentLaw.single([0.25, 0.25, 0.5])
    env = QuenchedEnvironment(law, seed=9, dimension=3)
    A = Configuration.point((0, 0, 0), 2)
    traj = run(env, A, 10, TruncationBox.cube(4), 10_000, 31)
    for cfg in traj.fields:
        if not cfg.is_empty():
            assert (np.abs(cfg.coords) <= 4).all()
    chain_env = QuenchedEnvironment(law, seed=10, dimension=3)
    from brwlab.particles import run_truncation_chain
    run_truncation_chain(chain_env, A, 8, [2, 3], None, 77)
