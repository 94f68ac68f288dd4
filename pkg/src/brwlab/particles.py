"""Branching random walk engine.

One update step: every particle at an occupied site draws a displacement
to one of the 2d nearest neighbors and an offspring count from the
site's quenched offspring law; all its children land on the displaced
site; sites outside the truncation region are discarded. Offspring
uniforms and displacements come from counter-based streams keyed by
(dynamics seed, stream, t, x, k), so distinct runs sharing a seed share
all randomness — couplings across initial conditions, truncation boxes
and thinned laws are exact, not statistical.

Counts can optionally saturate at a per-site ceiling. A site at the
ceiling deterministically sends `ceiling` children to every neighbor and
consumes no randomness. The saturated update is still monotone in the
configuration and in the underlying draws (a saturated source forces its
neighbors to the ceiling, which dominates anything an exact source could
deliver after clipping), so all coupling guarantees survive; the law of
any bounded-count observable is distorted by at most a probability
exponentially small in the ceiling. This is what makes supercritical
block experiments runnable: exact counts would exceed 2^60 within a few
dozen steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import streams
from .envmodel import QuenchedEnvironment
from .streams import nb_fold

CELL_LIMIT = 8_000_000


class EngineError(RuntimeError):
    """Unrunnable request (e.g. unbounded region too large to address)."""


class CouplingError(RuntimeError):
    """A coupled run violated a pointwise ordering; indicates a bug."""


def directions(d: int) -> np.ndarray:
    """The 2d unit displacement vectors, axis-major, + before -."""
    out = np.zeros((2 * d, d), dtype=np.int64)
    for j in range(d):
        out[2 * j, j] = 1
        out[2 * j + 1, j] = -1
    return out


# ---------------------------------------------------------------------------
# configurations

class Configuration:
    """Sparse particle configuration: lexicographically sorted sites."""

    __slots__ = ("coords", "counts")

    def __init__(self, coords, counts, *, _canonical=False):
        coords = np.ascontiguousarray(coords, dtype=np.int64)
        counts = np.ascontiguousarray(counts, dtype=np.int64)
        if coords.ndim != 2:
            raise ValueError("coords must be (n, d)")
        if counts.shape != (coords.shape[0],):
            raise ValueError("counts must align with coords")
        if not _canonical:
            if np.any(counts < 0):
                raise ValueError("counts must be nonnegative")
            keep = counts > 0
            coords, counts = coords[keep], counts[keep]
            if coords.shape[0] > 1:
                order = np.lexsort(coords.T[::-1])
                coords, counts = coords[order], counts[order]
                dup = np.any(coords[1:] != coords[:-1], axis=1)
                starts = np.flatnonzero(np.concatenate(([True], dup)))
                if starts.size != coords.shape[0]:
                    counts = np.add.reduceat(counts, starts)
                    coords = coords[starts]
        self.coords = coords
        self.counts = counts

    @classmethod
    def empty(cls, dimension: int) -> "Configuration":
        return cls(np.zeros((0, dimension), dtype=np.int64),
                   np.zeros(0, dtype=np.int64), _canonical=True)

    @classmethod
    def from_sites(cls, sites, dimension: int | None = None) -> "Configuration":
        """Build from a {site: count} mapping or (site, count) pairs."""
        items = sites.items() if hasattr(sites, "items") else list(sites)
        coords, counts = [], []
        for x, c in items:
            x = tuple(int(v) for v in (x if np.iterable(x) else (x,)))
            coords.append(x)
            counts.append(int(c))
        if not coords:
            if dimension is None:
                raise ValueError("dimension required for an empty configuration")
            return cls.empty(dimension)
        d = len(coords[0])
        if dimension is not None and d != dimension:
            raise ValueError(f"sites have dimension {d}, expected {dimension}")
        return cls(np.array(coords, dtype=np.int64).reshape(len(coords), d),
                   np.array(counts, dtype=np.int64))

    @classmethod
    def point(cls, x=0, count: int = 1, dimension: int | None = None) -> "Configuration":
        x = tuple(int(v) for v in (x if np.iterable(x) else (x,)))
        if dimension is not None and len(x) != dimension:
            x = x + (0,) * (dimension - len(x))
        return cls.from_sites({x: count})

    @property
    def dimension(self) -> int:
        return self.coords.shape[1]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def occupied(self) -> int:
        return self.coords.shape[0]

    def is_empty(self) -> bool:
        return self.coords.shape[0] == 0

    def as_dict(self) -> dict[tuple, int]:
        return {tuple(int(v) for v in x): int(c)
                for x, c in zip(self.coords, self.counts)}

    def as_dict_str(self) -> dict[str, int]:
        """JSON-friendly form: ','-joined coordinates as keys."""
        return {",".join(str(v) for v in x): c for x, c in self.as_dict().items()}

    def occupied_set(self) -> set[tuple]:
        return {tuple(int(v) for v in x) for x in self.coords}

    def dominates(self, other: "Configuration") -> bool:
        """Pointwise >= comparison."""
        mine = self.as_dict()
        return all(mine.get(x, 0) >= c for x, c in other.as_dict().items())

    def clip(self, ceiling: int) -> "Configuration":
        if self.counts.size == 0 or self.counts.max(initial=0) <= ceiling:
            return self
        return Configuration(self.coords, np.minimum(self.counts, ceiling),
                             _canonical=True)

    def __eq__(self, other):
        return (isinstance(other, Configuration)
                and self.coords.shape == other.coords.shape
                and np.array_equal(self.coords, other.coords)
                and np.array_equal(self.counts, other.counts))

    def __repr__(self):
        return f"Configuration({self.as_dict()!r})"

    def __getstate__(self):
        return (self.coords, self.counts)

    def __setstate__(self, state):
        self.coords, self.counts = state


# ---------------------------------------------------------------------------
# truncation boxes

class TruncationBox:
    """Region outside which particles are discarded."""

    __slots__ = ("kind", "radius", "sites")

    def __init__(self, kind, radius=None, sites=None):
        self.kind = kind
        self.radius = radius
        self.sites = sites

    @classmethod
    def none(cls) -> "TruncationBox":
        return cls("none")

    @classmethod
    def cube(cls, radius: int) -> "TruncationBox":
        if radius < 0:
            raise ValueError("cube radius must be >= 0")
        return cls("cube", radius=int(radius))

    @classmethod
    def explicit(cls, sites, dimension: int | None = None) -> "TruncationBox":
        arr = np.array([tuple(int(v) for v in (x if np.iterable(x) else (x,)))
                        for x in sites], dtype=np.int64)
        if arr.size == 0:
            raise ValueError("explicit box must be a nonempty finite set")
        if dimension is not None and arr.shape[1] != dimension:
            raise ValueError("box sites have the wrong dimension")
        order = np.lexsort(arr.T[::-1])
        return cls("explicit", sites=arr[order])

    def contains(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64)
        if self.kind == "none":
            return np.ones(coords.shape[0], dtype=bool)
        if self.kind == "cube":
            if coords.shape[0] == 0:
                return np.zeros(0, dtype=bool)
            return (np.abs(coords) <= self.radius).all(axis=1)
        box = {tuple(x) for x in self.sites}
        return np.array([tuple(x) in box for x in coords], dtype=bool)

    def __eq__(self, other):
        if not isinstance(other, TruncationBox) or self.kind != other.kind:
            return False
        if self.kind == "cube":
            return self.radius == other.radius
        if self.kind == "explicit":
            return np.array_equal(self.sites, other.sites)
        return True

    def __repr__(self):
        if self.kind == "cube":
            return f"TruncationBox.cube({self.radius})"
        if self.kind == "explicit":
            return f"TruncationBox.explicit(<{self.sites.shape[0]} sites>)"
        return "TruncationBox.none()"


# ---------------------------------------------------------------------------
# trajectories

@dataclass(eq=False)
class Trajectory:
    """One realization: configurations for t = 0..T_stop plus observables.

    tau is the extinction time, or None while the population is alive at
    the last recorded step; capped means the run stopped because the
    total population reached the cap (read as survival in proxies).
    """

    fields: list
    tau: int | None
    capped: bool
    totals: np.ndarray
    occupied: np.ndarray
    box: TruncationBox
    horizon: int
    dimension: int

    @property
    def final(self) -> Configuration:
        return self.fields[-1]

    def config_at(self, t: int) -> Configuration:
        """Configuration at time t; empty beyond an early stop by extinction."""
        if t < len(self.fields):
            return self.fields[t]
        if self.tau is not None:
            return Configuration.empty(self.dimension)
        raise ValueError(f"time {t} not recorded (run stopped at {len(self.fields) - 1})")

    def total_at(self, t: int) -> int:
        if t < len(self.totals):
            return int(self.totals[t])
        if self.tau is not None:
            return 0
        raise ValueError(f"time {t} not recorded (run stopped at {len(self.totals) - 1})")


@dataclass(frozen=True)
class FaceCounts:
    particles_on_face: int
    occupied_on_face: int
    particles_on_positive_orthant_face: int
    occupied_on_positive_orthant_face: int


# ---------------------------------------------------------------------------
# dense workspace: packs lattice sites of a finite region into cell ids

class _Workspace:
    __slots__ = ("lo", "sizes", "strides", "cells", "accum", "mask",
                 "move", "twod", "d")

    def __init__(self, lo, hi, box, d):
        self.d = d
        self.lo = lo
        self.sizes = hi - lo + 1
        strides = np.ones(d, dtype=np.int64)
        for j in range(d - 2, -1, -1):
            strides[j] = strides[j + 1] * self.sizes[j + 1]
        self.strides = strides
        cells = int(self.sizes.prod())
        if cells > CELL_LIMIT:
            raise EngineError(
                f"simulation region has {cells} cells (> {CELL_LIMIT}); "
                "provide a truncation box or reduce the horizon")
        self.cells = cells
        self.accum = np.zeros(cells, dtype=np.int64)
        dirs = directions(d)
        self.move = dirs @ strides
        self.twod = 2 * d
        if box.kind == "none":
            self.mask = None
        elif box.kind == "cube":
            self.mask = np.zeros(cells, dtype=np.uint8)
            inside = np.ones(cells, dtype=bool)
            idx = np.arange(cells, dtype=np.int64)
            for j in range(d):
                coord = lo[j] + (idx // strides[j]) % self.sizes[j]
                inside &= np.abs(coord) <= box.radius
            self.mask[inside] = 1
        else:
            self.mask = np.zeros(cells, dtype=np.uint8)
            self.mask[self.pack(box.sites)] = 1

    def pack(self, coords: np.ndarray) -> np.ndarray:
        return (coords - self.lo) @ self.strides

    def unpack(self, cells: np.ndarray) -> np.ndarray:
        out = np.empty((cells.shape[0], self.d), dtype=np.int64)
        for j in range(self.d):
            out[:, j] = self.lo[j] + (cells // self.strides[j]) % self.sizes[j]
        return out


def _region_bounds(A: Configuration, box: TruncationBox, horizon: int, d: int):
    if box.kind == "cube":
        lo = np.full(d, -box.radius - 1, dtype=np.int64)
        hi = np.full(d, box.radius + 1, dtype=np.int64)
    elif box.kind == "explicit":
        lo = box.sites.min(axis=0) - 1
        hi = box.sites.max(axis=0) + 1
    else:
        if A.is_empty():
            lo = np.full(d, -1, dtype=np.int64)
            hi = np.full(d, 1, dtype=np.int64)
        else:
            lo = A.coords.min(axis=0) - horizon - 1
            hi = A.coords.max(axis=0) + horizon + 1
    return lo, hi


@njit(cache=True, nogil=True)
def _step_kernel(cells, coords, counts, pref_u, pref_d, pref_e,
                 n_components, cum_weights, tails, ceiling,
                 use_mask, mask, accum, touched, move, twod):
    ptr = 0
    d = coords.shape[1]
    width = tails.shape[1]
    for i in range(counts.shape[0]):
        p = counts[i]
        base = cells[i]
        if ceiling > 0 and p >= ceiling:
            # saturated source: ceiling children to every neighbor, no draws
            for v in range(twod):
                cell = base + move[v]
                if (not use_mask) or mask[cell]:
                    if accum[cell] == 0:
                        touched[ptr] = cell
                        ptr += 1
                    accum[cell] += ceiling
            continue
        if n_components == 1:
            c = 0
        else:
            be = pref_e
            for j in range(d):
                be = nb_fold(be, np.uint64(coords[i, j]))
            ue = (be >> np.uint64(11)) * 1.1102230246251565e-16
            c = 0
            while c < n_components - 1 and cum_weights[c] <= ue:
                c += 1
        bu = pref_u
        bd = pref_d
        for j in range(d):
            w = np.uint64(coords[i, j])
            bu = nb_fold(bu, w)
            bd = nb_fold(bd, w)
        for k in range(1, p + 1):
            hu = nb_fold(bu, np.uint64(k))
            v = 1.0 - (hu >> np.uint64(11)) * 1.1102230246251565e-16
            nk = 0
            while nk < width and tails[c, nk] >= v:
                nk += 1
            if nk == 0:
                continue
            hd = nb_fold(bd, np.uint64(k))
            dv = np.int64(((hd >> np.uint64(11)) * np.uint64(twod)) >> np.uint64(53))
            cell = base + move[dv]
            if (not use_mask) or mask[cell]:
                if accum[cell] == 0:
                    touched[ptr] = cell
                    ptr += 1
                accum[cell] += nk
    return ptr


def _advance(env: QuenchedEnvironment, t: int, current: Configuration,
             ws: _Workspace, dyn_seed: int, ceiling: int | None) -> Configuration:
    if current.is_empty():
        return current
    cells = ws.pack(current.coords)
    pref_u = np.uint64(streams.stream_prefix(dyn_seed, streams.OFFSPRING_STREAM, t))
    pref_d = np.uint64(streams.stream_prefix(dyn_seed, streams.DISPLACEMENT_STREAM, t))
    pref_e = np.uint64(streams.stream_prefix(env.seed, streams.ENV_STREAM, t))
    law = env.law
    touched = np.empty(ws.twod * current.occupied + 8, dtype=np.int64)
    use_mask = ws.mask is not None
    mask = ws.mask if use_mask else _DUMMY_MASK
    m = _step_kernel(cells, current.coords, current.counts,
                     pref_u, pref_d, pref_e,
                     law.n_components, law.cum_weights, law.tail_table,
                     np.int64(ceiling or -1),
                     use_mask, mask, ws.accum, touched,
                     ws.move, ws.twod)
    hit = touched[:m]
    new_counts = ws.accum[hit]
    ws.accum[hit] = 0
    order = np.argsort(hit)
    hit = hit[order]
    new_counts = new_counts[order]
    if ceiling:
        np.minimum(new_counts, ceiling, out=new_counts)
    return Configuration(ws.unpack(hit), new_counts, _canonical=True)


_DUMMY_MASK = np.ones(1, dtype=np.uint8)


def step(env: QuenchedEnvironment, t: int, current: Configuration,
         box: TruncationBox, master_seed: int, *,
         site_ceiling: int | None = None) -> Configuration:
    """One synchronous update of the particle field at time t."""
    _check_inside(current, box)
    _check_ceiling(site_ceiling)
    if box.kind == "none" and not current.is_empty():
        lo = current.coords.min(axis=0) - 1
        hi = current.coords.max(axis=0) + 1
    else:
        lo, hi = _region_bounds(current, box, 1, current.dimension)
    ws = _Workspace(lo, hi, box, current.dimension)
    return _advance(env, t, current, ws, master_seed, site_ceiling)


def _check_inside(config: Configuration, box: TruncationBox):
    if box.kind != "none" and not config.is_empty():
        if not box.contains(config.coords).all():
            raise ValueError("configuration has particles outside the truncation box")


def _check_ceiling(site_ceiling: int | None):
    if site_ceiling is not None and site_ceiling < 1:
        raise ValueError("site_ceiling must be a positive integer or None")


def run(env: QuenchedEnvironment, A: Configuration, horizon: int,
        box: TruncationBox, cap: int | None, master_seed: int, *,
        site_ceiling: int | None = None) -> Trajectory:
    """Iterate steps until extinction, the horizon, or the population cap."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    _check_ceiling(site_ceiling)
    if A.dimension != env.dimension:
        raise ValueError("initial configuration and environment dimensions differ")
    _check_inside(A, box)
    if site_ceiling is not None:
        A = A.clip(site_ceiling)
    fields = [A]
    totals = [A.total]
    occupied = [A.occupied]
    tau: int | None = 0 if A.is_empty() else None
    capped = False
    if tau is None and cap is not None and A.total >= cap:
        capped = True
    if tau is None and not capped:
        lo, hi = _region_bounds(A, box, horizon, A.dimension)
        ws = _Workspace(lo, hi, box, A.dimension)
        for t in range(horizon):
            nxt = _advance(env, t, fields[-1], ws, master_seed, site_ceiling)
            fields.append(nxt)
            totals.append(nxt.total)
            occupied.append(nxt.occupied)
            if nxt.is_empty():
                tau = t + 1
                break
            if cap is not None and nxt.total >= cap:
                capped = True
                break
            if cap is None and site_ceiling is None and nxt.total > 2 ** 53:
                raise EngineError(
                    f"population reached {nxt.total} at time {t + 1} with no "
                    "cap or site ceiling; counts would overflow")
    return Trajectory(fields=fields, tau=tau, capped=capped,
                      totals=np.array(totals, dtype=np.int64),
                      occupied=np.array(occupied, dtype=np.int64),
                      box=box, horizon=horizon, dimension=A.dimension)


def _assert_dominates(small: Trajectory, big: Trajectory, context: str):
    n = min(len(small.fields), len(big.fields))
    for t in range(n):
        if not big.fields[t].dominates(small.fields[t]):
            raise CouplingError(f"{context}: ordering violated at time {t}")


def run_coupled(env: QuenchedEnvironment, A: Configuration, A_prime: Configuration,
                horizon: int, box: TruncationBox, cap: int | None,
                master_seed: int, *, site_ceiling: int | None = None
                ) -> tuple[Trajectory, Trajectory]:
    """Evolve A and A_prime >= A on shared randomness; verify domination."""
    if not A_prime.dominates(A):
        raise ValueError("run_coupled requires A <= A_prime pointwise")
    ta = run(env, A, horizon, box, cap, master_seed, site_ceiling=site_ceiling)
    tb = run(env, A_prime, horizon, box, cap, master_seed, site_ceiling=site_ceiling)
    _assert_dominates(ta, tb, "initial-condition coupling")
    return ta, tb


def run_truncation_chain(env: QuenchedEnvironment, A: Configuration, horizon: int,
                         L_list, cap: int | None, master_seed: int, *,
                         site_ceiling: int | None = None) -> list[Trajectory]:
    """Truncated runs for each L (ascending) plus the free process, coupled.

    Returns len(L_list) + 1 trajectories; the last one is untruncated.
    """
    L_list = list(L_list)
    if any(b <= a for a, b in zip(L_list, L_list[1:])):
        raise ValueError("L_list must be strictly increasing")
    trajs = [run(env, A, horizon, TruncationBox.cube(L), cap, master_seed,
                 site_ceiling=site_ceiling) for L in L_list]
    trajs.append(run(env, A, horizon, TruncationBox.none(), cap, master_seed,
                     site_ceiling=site_ceiling))
    for a, b in zip(trajs, trajs[1:]):
        _assert_dominates(a, b, "truncation coupling")
    return trajs


def face_counts(trajectory: Trajectory, L: int, T: int) -> FaceCounts:
    """Particle/occupancy totals on the boundary face of the cube, t <= T.

    The positive-orthant face is x_0 = L with the remaining coordinates
    nonnegative.
    """
    box = trajectory.box
    if box.kind != "cube" or box.radius != L:
        raise ValueError(f"trajectory was not truncated to the cube of radius {L}")
    if trajectory.horizon < T:
        raise ValueError("trajectory horizon is shorter than the requested window")
    pf = of = pp = op = 0
    for t in range(T + 1):
        if t >= len(trajectory.fields):
            break
        cfg = trajectory.fields[t]
        if cfg.is_empty():
            continue
        on_face = np.abs(cfg.coords).max(axis=1) == L
        pf += int(cfg.counts[on_face].sum())
        of += int(on_face.sum())
        orth = cfg.coords[:, 0] == L
        if trajectory.dimension > 1:
            orth &= (cfg.coords[:, 1:] >= 0).all(axis=1)
        pp += int(cfg.counts[orth].sum())
        op += int(orth.sum())
    return FaceCounts(particles_on_face=pf, occupied_on_face=of,
                      particles_on_positive_orthant_face=pp,
                      occupied_on_positive_orthant_face=op)


def verify_invariants(trajectory: Trajectory, A: Configuration):
    """Assert parity and range invariants on every recorded step.

    Parity applies when all initial sites share the same coordinate-sum
    parity; the support must stay within l1 distance t of the initial
    support either way.
    """
    if A.is_empty():
        return
    parities = np.unique(A.coords.sum(axis=1) % 2)
    check_parity = parities.size == 1
    for t, cfg in enumerate(trajectory.fields):
        if cfg.is_empty():
            continue
        if check_parity:
            want = (int(parities[0]) + t) % 2
            got = np.unique(cfg.coords.sum(axis=1) % 2)
            if got.size != 1 or int(got[0]) != want:
                raise AssertionError(f"parity violated at time {t}")
        dist = np.abs(cfg.coords[:, None, :] - A.coords[None, :, :]).sum(axis=2).min(axis=1)
        if int(dist.max()) > t:
            raise AssertionError(f"range violated at time {t}")
        if cfg.occupied > cfg.total:
            raise AssertionError(f"occupied exceeds total at time {t}")
