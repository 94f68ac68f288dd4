"""Block-scale geometry and renormalization observables.

The diamond of radius n is the set of sites the walk can maximally reach
at (even) time n: the l1-ball intersected with the even coordinate-sum
sublattice. The block event asks whether a process seeded with one
particle per diamond site, truncated to a large cube, occupies some
translate of the diamond inside a forward slab within a time window.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import stats, streams
from .envmodel import EnvironmentLaw, QuenchedEnvironment
from .parallel import pmap
from .particles import Configuration, TruncationBox, face_counts, run

DEFAULT_SITE_CEILING = 4096


@dataclass(frozen=True, eq=False)
class Diamond:
    n: int
    d: int
    sites: np.ndarray  # (m, d) int64, lexicographically sorted

    def as_configuration(self) -> Configuration:
        """One particle per site."""
        return Configuration(self.sites, np.ones(self.sites.shape[0], dtype=np.int64))

    def translate(self, x) -> np.ndarray:
        return self.sites + np.asarray(x, dtype=np.int64)

    def __eq__(self, other):
        return (isinstance(other, Diamond) and self.n == other.n
                and self.d == other.d)


def diamond(n: int, d: int) -> Diamond:
    """Sites with l1-norm <= n and even coordinate sum."""
    if n < 0 or d < 1:
        raise ValueError("need n >= 0 and d >= 1")
    sites = []
    for x in itertools.product(range(-n, n + 1), repeat=d):
        if sum(abs(c) for c in x) <= n and sum(x) % 2 == 0:
            sites.append(x)
    arr = np.array(sites, dtype=np.int64).reshape(len(sites), d)
    order = np.lexsort(arr.T[::-1])
    return Diamond(n=n, d=d, sites=arr[order])


def contains_translate(occupied, x, dia: Diamond) -> bool:
    """True iff x + diamond is a subset of the occupied sites."""
    if isinstance(occupied, Configuration):
        occupied = occupied.occupied_set()
    x = tuple(int(v) for v in (x if np.iterable(x) else (x,)))
    return all(tuple(int(v) for v in site) in occupied
               for site in dia.translate(x))


@dataclass(frozen=True)
class BlockEventSpec:
    n: int
    L: int
    T: int
    d: int

    def __post_init__(self):
        if not (0 <= self.n <= self.L) or self.T < 1 or self.d < 1:
            raise ValueError("need 0 <= n <= L, T >= 1, d >= 1")

    @property
    def box_radius(self) -> int:
        return 2 * self.L + 2 * self.n


@dataclass(frozen=True)
class BlockEventResult:
    occurred: bool
    witness: tuple | None  # (t, x-tuple)


def _slab_sites(spec: BlockEventSpec):
    first = range(spec.L + spec.n, 2 * spec.L + spec.n + 1)
    rest = [range(0, 2 * spec.L + 1)] * (spec.d - 1)
    return itertools.product(first, *rest)


def block_event(env: QuenchedEnvironment, spec: BlockEventSpec, master_seed: int,
                *, initial: Configuration | None = None,
                site_ceiling: int | None = DEFAULT_SITE_CEILING) -> BlockEventResult:
    """Run one realization and scan the window for an occupied translate.

    The scan returns the first witness in time, then lexicographic order
    in the translate origin. ``initial`` defaults to the diamond itself;
    passing a smaller seed set (coupled to the same master seed) gives
    monotone comparisons in the initial condition.
    """
    dia = diamond(spec.n, spec.d)
    if initial is None:
        initial = dia.as_configuration()
    box = TruncationBox.cube(spec.box_radius)
    traj = run(env, initial, 2 * spec.T, box, None, master_seed,
               site_ceiling=site_ceiling)
    for t in range(spec.T, 2 * spec.T + 1):
        if t >= len(traj.fields):
            break
        occ = traj.fields[t].occupied_set()
        if len(occ) < dia.sites.shape[0]:
            continue
        for x in _slab_sites(spec):
            if contains_translate(occ, x, dia):
                return BlockEventResult(occurred=True, witness=(t, tuple(x)))
    return BlockEventResult(occurred=False, witness=None)


def block_event_probability(law: EnvironmentLaw, spec: BlockEventSpec,
                            replicas: int, master_seed: int, *,
                            initial: Configuration | None = None,
                            site_ceiling: int | None = DEFAULT_SITE_CEILING,
                            threads: int = 1
                            ) -> tuple[stats.MCEstimate, list[BlockEventResult]]:
    """Annealed block-event probability: fresh environment per replica."""

    def one(r: int) -> BlockEventResult:
        env_seed, dyn_seed = streams.replica_seeds(master_seed, r)
        env = QuenchedEnvironment(law, seed=env_seed, dimension=spec.d)
        return block_event(env, spec, dyn_seed, initial=initial,
                           site_ceiling=site_ceiling)

    results = pmap(one, range(replicas), threads)
    hits = sum(res.occurred for res in results)
    return stats.bernoulli_estimate(hits, replicas), results


@dataclass(eq=False)
class OrthantTable:
    """Per-replica counts used by the orthant/face inequality checks.

    total/occupied are taken at time t_top in the cube of radius L;
    orthant versions restrict to the all-nonnegative orthant. Face counts
    accumulate over t <= T_face on the boundary face and its positive
    orthant patch (x_0 = L, other coordinates >= 0).
    """

    n: int
    L: int
    d: int
    t_top: int
    T_face: int
    total: np.ndarray
    orthant_total: np.ndarray
    occupied: np.ndarray
    orthant_occupied: np.ndarray
    face_particles: np.ndarray
    face_occupied: np.ndarray
    face_orthant_particles: np.ndarray
    face_orthant_occupied: np.ndarray

    @property
    def replicas(self) -> int:
        return self.total.size


def orthant_statistics(law: EnvironmentLaw, d: int, n: int, L: int,
                       t_top: int, T_face: int, master_seed: int,
                       replicas: int, *,
                       site_ceiling: int | None = DEFAULT_SITE_CEILING,
                       threads: int = 1) -> OrthantTable:
    """Sample the truncated process from the diamond and tabulate counts."""
    if L <= n:
        raise ValueError("need L > n")
    dia = diamond(n, d)
    A = dia.as_configuration()
    box = TruncationBox.cube(L)
    horizon = max(t_top, T_face)

    def one(r: int) -> tuple:
        env_seed, dyn_seed = streams.replica_seeds(master_seed, r)
        env = QuenchedEnvironment(law, seed=env_seed, dimension=d)
        traj = run(env, A, horizon, box, None, dyn_seed, site_ceiling=site_ceiling)
        total = orth_total = occ = orth_occ = 0
        if t_top < len(traj.fields):
            cfg = traj.fields[t_top]
            if not cfg.is_empty():
                total = cfg.total
                occ = cfg.occupied
                orth = (cfg.coords >= 0).all(axis=1)
                orth_total = int(cfg.counts[orth].sum())
                orth_occ = int(orth.sum())
        fc = face_counts(traj, L, T_face)
        return (total, orth_total, occ, orth_occ, fc.particles_on_face,
                fc.occupied_on_face, fc.particles_on_positive_orthant_face,
                fc.occupied_on_positive_orthant_face)

    rows = np.array(pmap(one, range(replicas), threads), dtype=np.int64)
    rows = rows.reshape(replicas, 8)
    names = ("total", "orthant_total", "occupied", "orthant_occupied",
             "face_particles", "face_occupied",
             "face_orthant_particles", "face_orthant_occupied")
    cols = {name: rows[:, i] for i, name in enumerate(names)}
    return OrthantTable(n=n, L=L, d=d, t_top=t_top, T_face=T_face, **cols)


@dataclass(frozen=True)
class TrickCheck:
    kind: str
    threshold: int
    lhs: float
    rhs: float
    combined_se: float
    ok: bool


def _trick_row(kind: str, small: np.ndarray, big: np.ndarray, threshold: int,
               exponent: int, scale: int) -> TrickCheck:
    r = small.size
    p_small = float((small <= threshold).mean())
    p_big = float((big <= threshold * scale).mean())
    se_small = np.sqrt(p_small * (1 - p_small) / r)
    se_big = np.sqrt(p_big * (1 - p_big) / r)
    lhs = p_small ** exponent
    # delta method for p^exponent
    se_lhs = exponent * p_small ** (exponent - 1) * se_small if p_small > 0 else 0.0
    combined = float(np.hypot(se_lhs, se_big))
    return TrickCheck(kind=kind, threshold=threshold, lhs=lhs, rhs=p_big,
                      combined_se=combined, ok=lhs <= p_big + 3 * combined)


def square_root_trick_checks(table: OrthantTable, thresholds) -> list[TrickCheck]:
    """Orthant-restriction inequality: P(orthant <= N)^(2^d) <= P(total <= N 2^d)."""
    e = 2 ** table.d
    out = []
    for N in thresholds:
        out.append(_trick_row("particles", table.orthant_total, table.total, N, e, e))
        out.append(_trick_row("occupied", table.orthant_occupied, table.occupied, N, e, e))
    return out


def face_trick_checks(table: OrthantTable, thresholds) -> list[TrickCheck]:
    """Face-orthant inequality: P(N+ <= M)^(d 2^d) <= P(N <= M d 2^d)."""
    e = table.d * 2 ** table.d
    out = []
    for M in thresholds:
        out.append(_trick_row("face_particles", table.face_orthant_particles,
                              table.face_particles, M, e, e))
        out.append(_trick_row("face_occupied", table.face_orthant_occupied,
                              table.face_occupied, M, e, e))
    return out
