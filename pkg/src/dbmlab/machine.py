"""Layered chain spin models: parameters, activities, annealed quantities.

A model has ``K`` layers carrying fractions ``lam`` of the spins (a point on
the simplex), inverse temperatures ``beta_p > 0`` on the ``K-1`` consecutive
layer pairs, and an external field law per layer.  All interaction structure
is carried by three matrices:

* ``M0``: zero-diagonal tridiagonal with off-diagonal entries ``beta_p**2``;
* ``M1 = diag(lam) @ M0 @ diag(lam)`` (the quadratic-form weights);
* ``M  = 2 * M0 @ diag(lam)`` (the consistency-map linearisation at zero).

The characteristic polynomial of ``M`` is the chain matching polynomial with
activities ``t_p = 4 lam_p beta_p^4 lam_{p+1}`` (:mod:`dbmlab.chainpoly`), so
the spectral radius of ``M`` is the largest matching-polynomial zero.  The
annealed pressure is ``log 2 + sum_p lam_p beta_p^2 lam_{p+1}``, and the
annealed region is the set of parameters where ``rho(M) < 1`` — equivalently
where the chain values ``z_p = Delta_p(1; t)`` stay positive, equivalently
where the forward witness recursion for the layer inequality system stays
positive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import chainpoly

__all__ = [
    "FieldSpec",
    "ModelParams",
    "RegionVerdict",
    "ExtremalLambda",
    "activities",
    "annealed_pressure",
    "interaction_half_quadratic",
    "build_matrices",
    "spectral_radius",
    "classify_annealed",
    "extremal_lambda",
    "chain_quadratic_bound",
]

_FIELD_KINDS = ("zero", "gaussian_centered", "point_mass", "discrete")
MAX_FIELD_ATOMS = 64
_SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class FieldSpec:
    """External field law for one layer.

    ``kind`` is one of ``zero`` (no field), ``gaussian_centered`` (centered
    Gaussian with variance ``v``), ``point_mass`` (deterministic field, the
    single entry of ``values``), or ``discrete`` (atoms ``values`` with
    probabilities ``probs``, at most ``MAX_FIELD_ATOMS`` of them).
    """

    kind: str = "zero"
    v: float = 0.0
    values: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.kind == "gaussian_centered":
            if not (math.isfinite(self.v) and self.v >= 0.0):
                raise ValueError("gaussian field variance must be finite and >= 0")
        elif self.kind == "point_mass":
            if len(self.values) != 1 or not math.isfinite(self.values[0]):
                raise ValueError("point-mass field needs exactly one finite value")
        elif self.kind == "discrete":
            n = len(self.values)
            if not (1 <= n <= MAX_FIELD_ATOMS):
                raise ValueError(f"discrete field needs 1..{MAX_FIELD_ATOMS} atoms")
            if len(self.probs) != n:
                raise ValueError("discrete field needs one probability per atom")
            if not all(math.isfinite(x) for x in self.values):
                raise ValueError("discrete field atoms must be finite")
            p = np.asarray(self.probs, dtype=float)
            if np.any(p < 0.0) or abs(p.sum() - 1.0) > _SIMPLEX_TOL:
                raise ValueError("discrete field probabilities must be a distribution")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero() -> "FieldSpec":
        return FieldSpec(kind="zero")

    @staticmethod
    def gaussian(v: float) -> "FieldSpec":
        return FieldSpec(kind="gaussian_centered", v=float(v))

    @staticmethod
    def point_mass(h0: float) -> "FieldSpec":
        return FieldSpec(kind="point_mass", values=(float(h0),), probs=(1.0,))

    @staticmethod
    def discrete(values: Sequence[float], probs: Sequence[float]) -> "FieldSpec":
        return FieldSpec(
            kind="discrete",
            values=tuple(float(x) for x in values),
            probs=tuple(float(p) for p in probs),
        )

    # -- predicates / serialization -----------------------------------------

    @property
    def is_zero(self) -> bool:
        if self.kind == "zero":
            return True
        if self.kind == "gaussian_centered":
            return self.v == 0.0
        if self.kind == "point_mass":
            return self.values[0] == 0.0
        return all(x == 0.0 for x in self.values)

    @property
    def is_gaussian(self) -> bool:
        return self.kind == "gaussian_centered"

    def to_dict(self) -> dict:
        if self.kind == "zero":
            return {"kind": "zero"}
        if self.kind == "gaussian_centered":
            return {"kind": "gaussian_centered", "v": self.v}
        if self.kind == "point_mass":
            return {"kind": "point_mass", "h0": self.values[0]}
        return {"kind": "discrete", "values": list(self.values), "probs": list(self.probs)}

    @staticmethod
    def from_dict(d: dict) -> "FieldSpec":
        kind = d.get("kind", "zero")
        if kind == "zero":
            return FieldSpec.zero()
        if kind == "gaussian_centered":
            return FieldSpec.gaussian(d["v"])
        if kind == "point_mass":
            return FieldSpec.point_mass(d["h0"])
        if kind == "discrete":
            return FieldSpec.discrete(d["values"], d["probs"])
        raise ValueError(f"unknown field kind {kind!r}")


@dataclass(frozen=True)
class ModelParams:
    """Parameters of a K-layer chain model.

    ``beta`` has ``K - 1`` positive entries, ``lam`` is a point on the
    K-simplex (layer widths), and ``fields`` holds one :class:`FieldSpec` per
    layer (defaulting to all-zero fields).
    """

    K: int
    beta: tuple[float, ...]
    lam: tuple[float, ...]
    fields: tuple[FieldSpec, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.K, int) or self.K < 1:
            raise ValueError("K must be a positive integer")
        if self.K > chainpoly.MAX_LAYERS:
            raise ValueError(f"K exceeds MAX_LAYERS = {chainpoly.MAX_LAYERS}")
        if len(self.beta) != self.K - 1:
            raise ValueError("beta must have K - 1 entries")
        if not all(math.isfinite(b) and b > 0.0 for b in self.beta):
            raise ValueError("beta entries must be finite and positive")
        if len(self.lam) != self.K:
            raise ValueError("lambda must have K entries")
        lam = np.asarray(self.lam, dtype=float)
        if not np.all(np.isfinite(lam)) or np.any(lam < 0.0):
            raise ValueError("lambda entries must be finite and nonnegative")
        if abs(lam.sum() - 1.0) > _SIMPLEX_TOL:
            raise ValueError("lambda must sum to one")
        if self.fields == ():
            object.__setattr__(self, "fields", tuple(FieldSpec.zero() for _ in range(self.K)))
        if len(self.fields) != self.K:
            raise ValueError("fields must have one entry per layer")
        if not all(isinstance(f, FieldSpec) for f in self.fields):
            raise ValueError("fields entries must be FieldSpec instances")

    @property
    def zero_fields(self) -> bool:
        return all(f.is_zero for f in self.fields)

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "beta": list(self.beta),
            "lambda": list(self.lam),
            "fields": [f.to_dict() for f in self.fields],
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelParams":
        fields = tuple(FieldSpec.from_dict(f) for f in d.get("fields", []))
        return ModelParams(
            K=int(d["K"]),
            beta=tuple(float(b) for b in d["beta"]),
            lam=tuple(float(x) for x in d["lambda"]),
            fields=fields,
        )


@dataclass(frozen=True)
class RegionVerdict:
    """Result of the annealed-region classification.

    ``verdict`` is ``inside`` / ``outside`` / ``boundary`` (the latter when
    ``|rho - 1| <= boundary_tol``); ``z_chain`` holds the chain values
    ``(z_0, ..., z_K)`` at ``x = 1``; ``feasible_a`` is the witness for the
    layer inequality system when inside (``None`` when outside, on the
    boundary, or when some layer width vanishes; the empty tuple for K = 1).
    The witness saturates the first ``K - 1`` inequalities exactly and
    satisfies the last one strictly; strict interior witnesses follow by an
    arbitrarily small perturbation.
    """

    verdict: str
    rho: float
    z_chain: tuple[float, ...]
    feasible_a: tuple[float, ...] | None
    boundary_tol: float


@dataclass(frozen=True)
class ExtremalLambda:
    """Supremum of the spectral radius over layer widths, with maximizers.

    ``value = max_p beta_p^2``.  ``maximizers`` lists width vectors achieving
    the value: equal halves on the endpoints of each maximal edge, and — when
    two consecutive edges are both maximal — the midpoint of the interior
    family ``(x, 1/2, 1/2 - x)`` supported on those three layers.
    """

    value: float
    maximizers: tuple[tuple[float, ...], ...]


# ---------------------------------------------------------------------------
# basic quantities
# ---------------------------------------------------------------------------


def activities(params: ModelParams) -> np.ndarray:
    """Chain activities ``t_p = 4 lam_p beta_p^4 lam_{p+1}``."""
    lam = np.asarray(params.lam)
    beta = np.asarray(params.beta)
    return 4.0 * lam[:-1] * beta**4 * lam[1:]


def interaction_half_quadratic(params: ModelParams, u: Sequence[float]) -> float:
    """``(1/2) u^T M1 u = sum_p lam_p beta_p^2 lam_{p+1} u_p u_{p+1}``.

    Shared by the annealed pressure (``u = 1``) and the replica-symmetric
    pressure functional, so that the two agree exactly where they should.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (params.K,):
        raise ValueError("u must have one entry per layer")
    lam = np.asarray(params.lam)
    beta = np.asarray(params.beta)
    return float(np.sum(lam[:-1] * beta**2 * lam[1:] * u[:-1] * u[1:]))


def annealed_pressure(params: ModelParams) -> float:
    """``log 2 + sum_p lam_p beta_p^2 lam_{p+1}`` (no field contribution)."""
    return math.log(2.0) + interaction_half_quadratic(params, np.ones(params.K))


def build_matrices(params: ModelParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Interaction matrices ``(M0, M1, M)`` (see the module docstring)."""
    K = params.K
    M0 = np.zeros((K, K))
    beta_sq = np.asarray(params.beta) ** 2
    for p in range(K - 1):
        M0[p, p + 1] = M0[p + 1, p] = beta_sq[p]
    D = np.diag(params.lam)
    M1 = D @ M0 @ D
    M = 2.0 * M0 @ D
    return M0, M1, M


def spectral_radius(params: ModelParams) -> float:
    """Spectral radius of ``M`` (the largest matching-polynomial zero)."""
    return chainpoly.largest_zero(activities(params))


# ---------------------------------------------------------------------------
# annealed-region classification
# ---------------------------------------------------------------------------


def classify_annealed(params: ModelParams, boundary_tol: float = 1e-9) -> RegionVerdict:
    """Classify the parameters against the annealed region.

    Computes the spectral radius ``rho``, the chain values
    ``z_p = Delta_p(1; t)``, and — strictly inside with all layer widths
    positive — the feasibility witness from the forward recursion

        a_1 = 1 / (2 lam_1 beta_1^2),
        a_p = 1 / (2 lam_p beta_p^2) - (beta_{p-1}^2 / beta_p^2) / a_{p-1},

    equal to ``z_p / (2 lam_p beta_p^2 z_{p-1})``.  Verdicts within
    ``boundary_tol`` of ``rho = 1`` are reported as ``boundary``.
    """
    t = activities(params)
    rho = chainpoly.largest_zero(t)
    K = params.K
    z = np.empty(K + 1)
    z[0] = z[1] = 1.0
    for p in range(1, K):
        z[p + 1] = z[p] - t[p - 1] * z[p - 1]
    if rho < 1.0 - boundary_tol:
        verdict = "inside"
    elif rho > 1.0 + boundary_tol:
        verdict = "outside"
    else:
        verdict = "boundary"

    feasible_a: tuple[float, ...] | None = None
    if verdict == "inside":
        if K == 1:
            feasible_a = ()
        elif all(l > 0.0 for l in params.lam):
            lam = params.lam
            beta_sq = np.asarray(params.beta) ** 2
            a = np.empty(K - 1)
            a[0] = 1.0 / (2.0 * lam[0] * beta_sq[0])
            ok = a[0] > 0.0
            for p in range(1, K - 1):
                a[p] = 1.0 / (2.0 * lam[p] * beta_sq[p]) - (beta_sq[p - 1] / beta_sq[p]) / a[p - 1]
                if a[p] <= 0.0:
                    ok = False
                    break
            if ok:
                final = 1.0 / (2.0 * lam[K - 1]) - beta_sq[K - 2] / a[K - 2]
                ok = final > 0.0
            if ok:
                feasible_a = tuple(float(v) for v in a)
    return RegionVerdict(
        verdict=verdict,
        rho=float(rho),
        z_chain=tuple(float(v) for v in z),
        feasible_a=feasible_a,
        boundary_tol=boundary_tol,
    )


# ---------------------------------------------------------------------------
# extremal layer widths and the quadratic chain bound
# ---------------------------------------------------------------------------


def extremal_lambda(beta: Sequence[float]) -> ExtremalLambda:
    """Supremum over layer widths of the spectral radius, ``max_p beta_p^2``.

    Maximizers returned: for each edge ``p`` with maximal ``beta_p``, the
    vector with ``1/2`` on layers ``p`` and ``p+1``; for each pair of
    consecutive maximal edges, the midpoint ``(..., 1/4, 1/2, 1/4, ...)`` of
    the one-parameter family that also achieves the value.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 1 or beta.size < 1:
        raise ValueError("need at least one edge")
    if np.any(beta <= 0.0) or not np.all(np.isfinite(beta)):
        raise ValueError("beta entries must be finite and positive")
    K = beta.size + 1
    beta_sq = beta**2
    value = float(beta_sq.max())
    tol = 1e-12 * value
    maximizers: list[tuple[float, ...]] = []
    for p in range(K - 1):
        if beta_sq[p] >= value - tol:
            lam = np.zeros(K)
            lam[p] = lam[p + 1] = 0.5
            maximizers.append(tuple(lam))
    for p in range(1, K - 1):
        if beta_sq[p - 1] >= value - tol and beta_sq[p] >= value - tol:
            lam = np.zeros(K)
            lam[p - 1], lam[p], lam[p + 1] = 0.25, 0.5, 0.25
            maximizers.append(tuple(lam))
    return ExtremalLambda(value=value, maximizers=tuple(maximizers))


def chain_quadratic_bound(b: Sequence[float], x: Sequence[float]) -> tuple[float, float, bool]:
    """Evaluate ``4 sum_p b_p x_p x_{p+1}`` against ``max(b) * (sum x)^2``.

    Returns ``(lhs, rhs, tight)`` for nonnegative weights ``b`` and
    nonnegative ``x``; the inequality ``lhs <= rhs`` always holds, with
    equality exactly on the extremal width configurations.
    """
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    if b.ndim != 1 or x.ndim != 1 or x.size != b.size + 1 or b.size < 1:
        raise ValueError("need len(x) = len(b) + 1 >= 2")
    if np.any(b < 0.0) or np.any(x < 0.0):
        raise ValueError("b and x must be nonnegative")
    lhs = float(4.0 * np.sum(b * x[:-1] * x[1:]))
    rhs = float(b.max() * x.sum() ** 2)
    tight = abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))
    return lhs, rhs, tight
