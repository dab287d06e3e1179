#!/usr/bin/env python3
"""Finite-volume pressure trend against the annealed value.

Runs exact-enumeration pressure estimates for a symmetric three-layer model
at a ladder of system sizes, prints the trend table as CSV, and reports the
worst standardised deviation of the energy-covariance identity as a sanity
check of the disorder sampling.
"""
import argparse

from dbmlab import finite_volume_lab as fvl
from dbmlab.machine import ModelParams


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--beta", type=float, default=0.5)
    parser.add_argument("--sizes", type=int, nargs="+", default=[12, 18, 24])
    parser.add_argument("--disorder", type=int, default=200)
    parser.add_argument("--seed", type=int, default=2)
    args = parser.parse_args()

    params = ModelParams(K=3, beta=(args.beta, args.beta),
                         lam=(1 / 3, 1 / 3, 1 / 3), fields=())
    sizes = [fvl.LayerAssignment.from_weights(params.lam, n)
             for n in sorted(args.sizes)]
    report = fvl.annealed_trend(params, sizes, n_disorder=args.disorder,
                                seed=args.seed)
    print(report.to_csv(), end="")
    print(f"# annealed pressure: {report.p_annealed!r}")
    print(f"# every estimate below annealed within 3 s.e.: {report.jensen_ok}")
    print(f"# gap shrinks from smallest to largest size: "
          f"{report.gap_decreasing}")

    worst = fvl.covariance_check(sizes[0], params, n_disorder=args.disorder,
                                 seed=args.seed)
    print(f"# worst standardised covariance deviation at N={sizes[0].N}: "
          f"{worst:.3f}")


if __name__ == "__main__":
    main()
