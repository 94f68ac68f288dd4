"""Monte Carlo estimate containers and interval arithmetic."""

from __future__ import annotations

import math
from dataclasses import dataclass

Z95 = 1.959963984540054


@dataclass(frozen=True)
class MCEstimate:
    """Bernoulli Monte Carlo estimate with a 95% Wilson interval."""

    mean: float
    std_error: float
    replicas: int
    wilson_low: float
    wilson_high: float

    def as_dict(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error,
                "replicas": self.replicas, "wilson_low": self.wilson_low,
                "wilson_high": self.wilson_high}


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("need at least one trial")
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
    # the interval contains the MLE; clamp away rounding at the endpoints
    return max(0.0, min(center - half, p)), min(1.0, max(center + half, p))


def bernoulli_estimate(successes: int, n: int) -> MCEstimate:
    p = successes / n
    low, high = wilson_interval(successes, n)
    return MCEstimate(mean=p, std_error=math.sqrt(p * (1.0 - p) / n),
                      replicas=n, wilson_low=low, wilson_high=high)
