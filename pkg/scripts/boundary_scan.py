#!/usr/bin/env python3
"""Sweep the coupling strength of a symmetric chain and find the boundary.

For a K-layer model with equal layer weights, equal couplings ``beta`` and
no external fields, prints one CSV row per sweep point (beta, spectral
radius, verdict) and then bisects for the critical coupling where the
spectral radius crosses one.
"""
import argparse

import numpy as np

from dbmlab import machine
from dbmlab.machine import ModelParams


def symmetric_params(K: int, beta: float) -> ModelParams:
    return ModelParams(K=K, beta=(beta,) * (K - 1), lam=(1.0 / K,) * K,
                       fields=())


def critical_coupling(K: int, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Bisect for the coupling where the spectral radius equals one."""
    f = lambda b: machine.spectral_radius(symmetric_params(K, b)) - 1.0
    if f(lo) >= 0.0 or f(hi) <= 0.0:
        raise ValueError("bracket does not straddle the boundary")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--layers", type=int, default=3)
    parser.add_argument("--min", dest="lo", type=float, default=0.5)
    parser.add_argument("--max", dest="hi", type=float, default=2.5)
    parser.add_argument("--steps", type=int, default=21)
    args = parser.parse_args()

    print("beta,rho,verdict")
    for beta in np.linspace(args.lo, args.hi, args.steps):
        verdict = machine.classify_annealed(symmetric_params(args.layers,
                                                             float(beta)))
        print(f"{float(beta)!r},{float(verdict.rho)!r},{verdict.verdict}")

    crit = critical_coupling(args.layers, args.lo, args.hi)
    print(f"# critical coupling for K={args.layers}: {crit!r}")
    rho = machine.spectral_radius(symmetric_params(args.layers, crit))
    print(f"# spectral radius there: {rho!r}")


if __name__ == "__main__":
    main()
