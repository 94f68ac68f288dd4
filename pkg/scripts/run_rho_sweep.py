"""Thinning sweep around the predicted critical point.

Estimates the free energy of a law, predicts the critical thinning
parameter exp(-psi), then runs a coupled survival sweep on a grid
straddling the prediction and prints the phase picture.

    python scripts/run_rho_sweep.py [--law double_or_half] [--replicas 1000]
"""

import argparse

from brwlab import polymer
from brwlab.experiments import rho_sweep
from brwlab.laws import SHIPPED_LAWS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--law", default="double_or_half", choices=sorted(SHIPPED_LAWS))
    ap.add_argument("--replicas", type=int, default=1000)
    ap.add_argument("--horizon", type=int, default=200)
    ap.add_argument("--cap", type=int, default=100_000)
    ap.add_argument("--t-polymer", type=int, default=100)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    law = SHIPPED_LAWS[args.law]
    psi = polymer.free_energy(law, 1, args.t_polymer, 100, args.seed)
    rc = 1.0 if psi.psi_hat <= 0 else min(1.0, pow(2.718281828459045, -psi.psi_hat))
    grid = sorted({round(min(1.0, max(0.05, rc * f)), 3)
                   for f in (0.6, 0.8, 0.95, 1.0, 1.05, 1.2, 1.5)} | {1.0})

    result = rho_sweep(law, 1, tuple(grid), args.horizon, args.cap,
                       args.replicas, args.t_polymer, args.seed,
                       psi_replicas=100)
    print(f"law={args.law}  psi_hat={result.psi_hat.psi_hat:.4f} "
          f"(SE {result.psi_hat.std_error:.4f})  "
          f"rho_c_predicted={result.rho_c_predicted:.4f}")
    for warning in result.warnings:
        print(f"  warning: {warning}")
    print(f"{'rho':>8} {'proxy':>8} {'wilson_low':>11} {'wilson_high':>12}")
    for rho, est in zip(result.rho_grid, result.survival_proxy):
        near = abs(rho - result.rho_c_predicted) < 0.05
        mark = "  <- near predicted rho_c" if near else ""
        print(f"{rho:>8.3f} {est.mean:>8.4f} {est.wilson_low:>11.4f} "
              f"{est.wilson_high:>12.4f}{mark}")


if __name__ == "__main__":
    main()
