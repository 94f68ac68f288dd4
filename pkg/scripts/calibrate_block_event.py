"""Calibrate the block-event acceptance threshold with the naive simulator.

Runs the dict-based reference simulator (tests/oracles.py) on the
always-two-children law at the acceptance geometry (d=1, n=4, L=12,
T=40) and prints the estimate used to freeze the acceptance threshold.
Run from the repository root:

    python scripts/calibrate_block_event.py
"""

import math
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "tests"))

import oracles  # noqa: E402


def wilson_low(successes, n, z=2.5758293035489004):  # 99% one-sided-ish
    p = successes / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return center - half


def main():
    pmf = (0.0, 0.0, 1.0)
    n, L, T = 4, 12, 40
    replicas = 400
    frac = oracles.naive_block_event_fraction(pmf, n, L, T, replicas, seed=2024)
    low = wilson_low(round(frac * replicas), replicas)
    print(f"naive block-event estimate (n={n}, L={L}, T={T}, "
          f"{replicas} replicas): {frac:.4f}; Wilson-99 lower bound {low:.4f}")
    frozen = min(0.95, max(0.90, math.floor(low * 100) / 100))
    print(f"frozen acceptance threshold: {frozen:.2f} "
          "(capped at 0.95; tests/test_acceptance.py pins this value)")

    frac_face = oracles.naive_face_positive_fraction(pmf, 3, 10, 500, seed=7)
    print(f"naive face-positivity estimate (L=3, T=10): {frac_face:.4f}")

    surv = oracles.naive_survival_fraction(pmf, 300, 100, 10_000, seed=11)
    print(f"naive survival fraction from a single particle: {surv:.4f}")


if __name__ == "__main__":
    main()
