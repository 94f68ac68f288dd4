"""Offspring laws, environment mixtures and the quenched random field.

An offspring law is a finite-support pmf on {0, 1, ..., K}. An
environment law is a finite mixture of offspring laws; the quenched
environment realizes an i.i.d. field of offspring laws over space-time
lazily, as a pure function of (seed, t, x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import streams

PROB_TOL = 1e-12


class LawValidationError(ValueError):
    """A pmf or mixture is structurally invalid."""


def _clean_pmf(pmf) -> tuple[float, ...]:
    entries = [float(p) for p in pmf]
    if not entries:
        raise LawValidationError("pmf must have at least one entry")
    for k, p in enumerate(entries):
        if not math.isfinite(p) or p < 0.0:
            raise LawValidationError(f"pmf[{k}] = {p!r} is not a probability")
    total = math.fsum(entries)
    if abs(total - 1.0) > PROB_TOL:
        raise LawValidationError(f"pmf sums to {total!r}, not 1 within {PROB_TOL}")
    while len(entries) > 1 and entries[-1] == 0.0:
        entries.pop()
    return tuple(entries)


@dataclass(frozen=True, eq=False)
class OffspringLaw:
    """Finite-support offspring distribution.

    ``tail[k]`` stores P(N > k) with tail[K] forced to exactly 0.0; the
    sampler thresholds against tails so that thinned laws (see ``thin``)
    stay exactly monotone in the thinning parameter, float for float.
    """

    pmf: tuple[float, ...]
    tail: tuple[float, ...] = None
    mean: float = None

    def __post_init__(self):
        object.__setattr__(self, "pmf", _clean_pmf(self.pmf))
        if self.tail is None:
            rev = np.cumsum(self.pmf[::-1])[::-1]
            tail = tuple(float(x) for x in rev[1:]) + (0.0,)
            object.__setattr__(self, "tail", tail)
        if self.mean is None:
            m = math.fsum(k * p for k, p in enumerate(self.pmf))
            object.__setattr__(self, "mean", m)

    @classmethod
    def delta(cls, k: int) -> "OffspringLaw":
        return cls(pmf=(0.0,) * k + (1.0,))

    @property
    def max_children(self) -> int:
        return len(self.pmf) - 1

    def thin(self, rho: float) -> "OffspringLaw":
        """Mix with extinction: keep the law w.p. rho, else zero children.

        The thinned mean is exactly rho * mean and the thinned tails are
        exactly rho * tail entry-wise, so coupled samples are monotone
        in rho without any floating-point caveat.
        """
        if rho == 1.0:
            return self
        pmf = (rho * self.pmf[0] + (1.0 - rho),) + tuple(rho * p for p in self.pmf[1:])
        tail = tuple(rho * t for t in self.tail)
        return OffspringLaw(pmf=pmf, tail=tail, mean=rho * self.mean)

    def __eq__(self, other):
        return isinstance(other, OffspringLaw) and self.pmf == other.pmf

    def __hash__(self):
        return hash(self.pmf)

    def __repr__(self):
        return f"OffspringLaw({list(self.pmf)!r})"


def sample_offspring(q: OffspringLaw, u: float) -> int:
    """Inverse-CDF draw: the count whose cdf first exceeds u.

    Exactly distributed as q when u is uniform on [0, 1); u >= 1 falls
    back to the top of the support.
    """
    v = 1.0 - u
    n = 0
    for t in q.tail:
        if t >= v:
            n += 1
        else:
            break
    return min(n, q.max_children)


@dataclass(frozen=True, eq=False)
class EnvironmentLaw:
    """Finite mixture of offspring laws with normalized weights."""

    components: tuple[tuple[float, OffspringLaw], ...]

    def __post_init__(self):
        comps = []
        for i, (w, law) in enumerate(self.components):
            w = float(w)
            if not math.isfinite(w) or w < 0.0:
                raise LawValidationError(f"component {i}: weight {w!r} is not a probability")
            if not isinstance(law, OffspringLaw):
                law = OffspringLaw(tuple(law))
            if w == 0.0:
                continue
            for j, (w0, law0) in enumerate(comps):
                if law0 == law:
                    comps[j] = (w0 + w, law0)
                    break
            else:
                comps.append((w, law))
        if not comps:
            raise LawValidationError("mixture has no positive-weight component")
        total = math.fsum(w for w, _ in comps)
        if abs(total - 1.0) > PROB_TOL:
            raise LawValidationError(f"mixture weights sum to {total!r}, not 1 within {PROB_TOL}")
        object.__setattr__(self, "components", tuple(comps))

    @classmethod
    def single(cls, pmf) -> "EnvironmentLaw":
        return cls(components=((1.0, OffspringLaw(tuple(pmf))),))

    @classmethod
    def mixture(cls, pairs) -> "EnvironmentLaw":
        comps = []
        for i, (w, p) in enumerate(pairs):
            try:
                law = p if isinstance(p, OffspringLaw) else OffspringLaw(tuple(p))
            except LawValidationError as exc:
                raise LawValidationError(f"component {i}: {exc}") from exc
            comps.append((w, law))
        return cls(components=tuple(comps))

    @property
    def n_components(self) -> int:
        return len(self.components)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components], dtype=np.float64)

    @cached_property
    def cum_weights(self) -> np.ndarray:
        return np.cumsum(self.weights)

    @cached_property
    def means(self) -> np.ndarray:
        return np.array([q.mean for _, q in self.components], dtype=np.float64)

    @cached_property
    def max_children(self) -> int:
        return max(q.max_children for _, q in self.components)

    @cached_property
    def tail_table(self) -> np.ndarray:
        """(n_components, max_children + 1) tail matrix, zero padded."""
        table = np.zeros((self.n_components, self.max_children + 1), dtype=np.float64)
        for i, (_, q) in enumerate(self.components):
            table[i, : len(q.tail)] = q.tail
        return table

    def __eq__(self, other):
        return (isinstance(other, EnvironmentLaw)
                and self.components == other.components)

    def __hash__(self):
        return hash(self.components)

    def __repr__(self):
        parts = ", ".join(f"({w:g}, {list(q.pmf)})" for w, q in self.components)
        return f"EnvironmentLaw([{parts}])"


def perturb(law: EnvironmentLaw, rho: float) -> EnvironmentLaw:
    """Thin every component: q -> rho*q + (1-rho)*delta_0, weights kept.

    Each component mean scales by exactly rho; rho = 1 returns the law
    unchanged so that coupled comparisons against the base law are
    bit-identical.
    """
    rho = float(rho)
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho!r}")
    if rho == 1.0:
        return law
    return EnvironmentLaw(components=tuple((w, q.thin(rho)) for w, q in law.components))


@dataclass(frozen=True)
class ValidationReport:
    hyp1_ok: bool
    hyp2_ok: bool
    dichotomy: str  # "H" | "H_complement"
    messages: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "hyp1_ok": self.hyp1_ok,
            "hyp2_ok": self.hyp2_ok,
            "dichotomy": self.dichotomy,
            "messages": list(self.messages),
        }


def validate(law: EnvironmentLaw) -> ValidationReport:
    """Check the standing assumptions on an environment law.

    hyp1: every positive-weight component has positive mean progeny (so
    both the mean and its reciprocal are integrable; finite support makes
    the mean finite automatically).
    hyp2: extinction is locally possible (some component puts mass on 0)
    and growth is locally possible (some component has mass above 1).
    The dichotomy flag is "H" when some component is exactly delta_0.
    """
    messages = []
    hyp1_ok = True
    for i, (w, q) in enumerate(law.components):
        if q.mean == 0.0:
            hyp1_ok = False
            messages.append(f"component {i} (weight {w:g}) has mean 0")
    can_die = any(q.pmf[0] > 0.0 for _, q in law.components)
    can_branch = any(q.pmf[0] + (q.pmf[1] if q.max_children >= 1 else 0.0) < 1.0
                     for _, q in law.components)
    hyp2_ok = can_die and can_branch
    if not can_die:
        messages.append("no component puts mass on 0: extinction impossible")
    if not can_branch:
        messages.append("every component is supported on {0,1}: growth impossible")
    dichotomy = "H" if any(q.pmf == (1.0,) for _, q in law.components) else "H_complement"
    return ValidationReport(hyp1_ok=hyp1_ok, hyp2_ok=hyp2_ok, dichotomy=dichotomy,
                            messages=tuple(messages))


@dataclass(frozen=True, eq=False)
class QuenchedEnvironment:
    """I.i.d. field of offspring laws, realized lazily.

    query(t, x) is a pure function of (seed, t, x): any number of
    callers, in any order, see the same field. Its marginal over random
    seeds is the environment law.
    """

    law: EnvironmentLaw
    seed: int
    dimension: int

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")

    def _prefix(self, t: int) -> int:
        return streams.stream_prefix(self.seed, streams.ENV_STREAM, t)

    def component_index(self, t: int, x) -> int:
        if self.law.n_components == 1:
            return 0
        u = streams.uniform(streams.site_key(self._prefix(t), x))
        cw = self.law.cum_weights
        c = int(np.searchsorted(cw, u, side="right"))
        return min(c, len(cw) - 1)

    def component_indices(self, t: int, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64)
        if self.law.n_components == 1:
            return np.zeros(coords.shape[0], dtype=np.int64)
        u = streams.vuniform(streams.vsite_key(self._prefix(t), coords))
        c = np.searchsorted(self.law.cum_weights, u, side="right")
        return np.minimum(c, self.law.n_components - 1).astype(np.int64)

    def query(self, t: int, x) -> OffspringLaw:
        x = tuple(int(c) for c in (x if np.iterable(x) else (x,)))
        if len(x) != self.dimension:
            raise ValueError(f"site {x} has dimension {len(x)}, environment has {self.dimension}")
        return self.law.components[self.component_index(t, x)][1]

    def mean_at(self, t: int, coords: np.ndarray) -> np.ndarray:
        """Mean progeny at each of the (n, d) sites at time t."""
        return self.law.means[self.component_indices(t, coords)]
