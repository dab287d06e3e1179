"""Seeded random model instances shared across the test suite."""
from __future__ import annotations

import numpy as np

from dbmlab.machine import FieldSpec, ModelParams


def random_lambda(rng: np.random.Generator, K: int, floor: float = 0.0) -> tuple[float, ...]:
    """Random point on the simplex, optionally bounded away from the faces."""
    lam = rng.dirichlet(np.ones(K))
    if floor > 0.0:
        lam = (1.0 - K * floor) * lam + floor
    return tuple(float(v) for v in lam)


def random_field(rng: np.random.Generator, kind: str,
                 v_lo: float = 0.05, v_hi: float = 1.0) -> FieldSpec:
    if kind == "zero":
        return FieldSpec.zero()
    if kind == "gaussian":
        return FieldSpec.gaussian(float(rng.uniform(v_lo, v_hi)))
    if kind == "point_mass":
        return FieldSpec.point_mass(float(rng.uniform(-1.0, 1.0)))
    if kind == "discrete":
        n = int(rng.integers(2, 5))
        values = rng.uniform(-1.5, 1.5, size=n)
        probs = rng.dirichlet(np.ones(n))
        return FieldSpec.discrete(tuple(values), tuple(probs))
    raise ValueError(kind)


def random_params(rng: np.random.Generator,
                  K: int | None = None,
                  k_range: tuple[int, int] = (2, 10),
                  beta_range: tuple[float, float] = (0.2, 1.5),
                  lam_floor: float = 0.0,
                  field_kind: str = "zero",
                  v_range: tuple[float, float] = (0.05, 1.0)) -> ModelParams:
    """Draw a random chain model.

    ``field_kind`` is one of ``zero | gaussian | point_mass | discrete |
    mixed`` (``mixed`` draws a kind per layer).
    """
    if K is None:
        K = int(rng.integers(k_range[0], k_range[1] + 1))
    beta = tuple(float(b) for b in rng.uniform(*beta_range, size=max(K - 1, 0)))
    lam = random_lambda(rng, K, floor=lam_floor)
    kinds = {"zero", "gaussian", "point_mass", "discrete"}
    fields = []
    for _ in range(K):
        kind = field_kind
        if field_kind == "mixed":
            kind = rng.choice(sorted(kinds))
        fields.append(random_field(rng, kind, *v_range))
    return ModelParams(K=K, beta=beta, lam=lam, fields=tuple(fields))
