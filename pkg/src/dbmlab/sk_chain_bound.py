"""Auxiliary-split upper bound for the layered-model pressure.

Every vector of positive auxiliary weights ``a = (a_1, ..., a_{K-1})``
splits the inter-layer interaction into independent one-layer models with
effective squared temperatures ``theta_p^2`` (see
:func:`theta_map`).  Evaluating each layer's one-layer replica-symmetric
pressure at its own surrogate overlap and re-adding the exchanged
quadratic terms yields an upper bound for the pressure of the full model,
valid for every admissible ``a``; maximizing over ``a`` gives the best
bound of this family.

The surrogate for layer ``p`` couples to the rest of the chain only
through ``theta_p``; with centred Gaussian (or zero) external fields the
surrogate overlap is the unique non-negative solution of the scalar
consistency equation ``x = E tanh^2(z sqrt(2 x theta_p^2) + h_p)``.

An overlap vector ``q`` and auxiliary weights ``a`` are *related* when
``lam_p q_p a_p = lam_{p+1} q_{p+1}`` for every bond; for related pairs
the bound evaluated with the given overlaps collapses onto the
replica-symmetric functional of the full model (see :func:`bridge_check`),
which is what makes certified maximizers comparable across solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import ghquad, machine, rs_solver
from .ghquad import INV_COSH4, LOG_COSH, TANH_SQ, QuadratureRule
from .machine import ModelParams
from .rs_solver import _theta_sq_from_aux

_LOG2 = math.log(2.0)

# Relatedness tolerance for (overlap, auxiliary) pairs.
_RELATED_TOL = 1e-10
# A layer is certified outright when theta^2 stays below this line.
_TALAGRAND_LINE = 0.125
# Scalar consistency solves stop at this defect.
_SCALAR_TOL = 1e-13
# Optimization box in u = log(a), and the width beyond which a maximizer
# is flagged as suspiciously close to the box.
_LOG_BOX = 30.0
_SUSPECT_WIDTH = 12.0


# ---------------------------------------------------------------------------
# auxiliary geometry
# ---------------------------------------------------------------------------


def theta_map(a, params: ModelParams) -> np.ndarray:
    """Effective one-layer temperatures ``theta_p`` for auxiliary weights.

    ``a`` must be a positive vector of length ``K - 1``; a single layer has
    no bonds and maps to ``theta = (0,)``.
    """
    return np.sqrt(_theta_sq_from_aux(a, params))


def related_aux(q, params: ModelParams) -> np.ndarray:
    """Auxiliary weights related to a strictly positive overlap vector.

    Solves ``lam_p q_p a_p = lam_{p+1} q_{p+1}`` bond by bond, which is the
    stationarity condition of the bound in ``a`` and the matching condition
    used by :func:`bridge_check`.
    """
    K = params.K
    q = np.asarray(q, dtype=float)
    if q.shape != (K,) or not np.all(np.isfinite(q)):
        raise ValueError(f"overlap vector must be finite with shape ({K},)")
    if np.any(q <= 0.0):
        raise ValueError("related auxiliary weights need strictly positive overlaps")
    lam = np.asarray(params.lam, dtype=float)
    if np.any(lam <= 0.0):
        raise ValueError("related auxiliary weights need positive layer weights")
    return lam[1:] * q[1:] / (lam[:-1] * q[:-1])


def _require_supported_fields(params: ModelParams, what: str) -> None:
    for p, f in enumerate(params.fields):
        if f.kind not in ("zero", "gaussian_centered"):
            raise ValueError(
                f"{what} supports only zero or centred Gaussian external "
                f"fields (layer {p} has kind '{f.kind}')")


# ---------------------------------------------------------------------------
# scalar surrogate overlaps
# ---------------------------------------------------------------------------


def _scalar_overlap(theta_sq: float, field, rule, warm: float | None = None) -> float:
    """Surrogate overlap of one decoupled layer.

    Returns the largest solution of ``x = E tanh^2(z sqrt(2 x theta_sq) + h)``
    in ``[0, 1)``.  For zero-like fields this is ``0`` up to the critical
    line ``2 theta_sq = 1`` and the positive branch beyond it; for Gaussian
    fields with positive variance the positive solution is unique.  Uses
    bracketed Newton iteration; ``warm`` seeds the iteration when a nearby
    solve is available.
    """
    two_t = 2.0 * float(theta_sq)
    if field.is_zero and two_t <= 1.0:
        return 0.0
    lo, hi = 0.0, 1.0
    x = warm if warm is not None and 0.0 < warm < 1.0 else 0.5
    best_x, best_defect = x, math.inf
    for _ in range(60):
        value = ghquad.expect(TANH_SQ, two_t * x, field, rule)
        defect = value - x
        if abs(defect) < abs(best_defect):
            best_x, best_defect = x, defect
        if abs(defect) < _SCALAR_TOL:
            return x
        if defect > 0.0:
            lo = x
        else:
            hi = x
        slope = two_t * ghquad.expect_derivative_in_s(TANH_SQ, two_t * x, field, rule)
        candidate = x + defect / (1.0 - slope) if slope < 1.0 else 0.5 * (lo + hi)
        if not lo < candidate < hi:
            candidate = 0.5 * (lo + hi)
        x = candidate
    return best_x


def _surrogate_overlaps(theta_sq: np.ndarray, params: ModelParams, rule,
                        warm: dict[int, float] | None = None) -> np.ndarray:
    out = np.zeros(params.K)
    for p in range(params.K):
        seed = None if warm is None else warm.get(p)
        out[p] = _scalar_overlap(theta_sq[p], params.fields[p], rule, seed)
        if warm is not None and out[p] > 0.0:
            warm[p] = out[p]
    return out


# ---------------------------------------------------------------------------
# bound functional
# ---------------------------------------------------------------------------


def _functional_value(theta_sq: np.ndarray, overlaps: np.ndarray,
                      params: ModelParams, rule) -> float:
    """Value of the split bound at given temperatures and overlaps."""
    lam = np.asarray(params.lam, dtype=float)
    value = 0.0
    for p in range(params.K):
        m = 2.0 * float(overlaps[p]) * float(theta_sq[p])
        layer = _LOG2 + ghquad.expect(LOG_COSH, m, params.fields[p], rule)
        layer += 0.5 * float(theta_sq[p]) * (1.0 - float(overlaps[p])) ** 2
        value += float(lam[p]) * layer
    value -= 0.5 * float(np.dot(lam, theta_sq))
    value += machine.interaction_half_quadratic(params, np.ones(params.K))
    return float(value)


def _certified_layers(theta_sq: np.ndarray, overlaps: np.ndarray,
                      params: ModelParams, rule) -> list[bool]:
    """Per-layer validity flags for the replica-symmetric surrogate.

    A layer passes when its temperature sits strictly below the
    high-temperature line ``theta^2 < 1/8`` or when the scalar
    Almeida-Thouless criterion holds at its surrogate overlap.
    """
    flags = []
    for p in range(params.K):
        t = float(theta_sq[p])
        if t < _TALAGRAND_LINE:
            flags.append(True)
            continue
        m = 2.0 * float(overlaps[p]) * t
        ec4 = ghquad.expect(INV_COSH4, m, params.fields[p], rule)
        flags.append(bool(m * ec4 <= overlaps[p]))
    return flags


def p_dbm_functional(a, params: ModelParams, *,
                     rule: QuadratureRule | None = None) -> tuple[float, bool]:
    """Evaluate the split bound at auxiliary weights ``a``.

    Returns ``(value, certified)`` where ``value`` bounds the pressure of
    the full model from above and ``certified`` records whether every
    decoupled layer passed its replica-symmetric validity check, so that
    the one-layer pressures entering the bound are exact rather than
    merely bounds themselves.  Fields must be zero or centred Gaussian.
    """
    _require_supported_fields(params, "the split bound")
    theta_sq = _theta_sq_from_aux(a, params)
    overlaps = _surrogate_overlaps(theta_sq, params, rule)
    value = _functional_value(theta_sq, overlaps, params, rule)
    certified = all(_certified_layers(theta_sq, overlaps, params, rule))
    return value, bool(certified)


# ---------------------------------------------------------------------------
# maximization over auxiliary weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundResult:
    """Outcome of maximizing the split bound over auxiliary weights.

    ``a`` is the maximizer, ``value`` the bound there, ``certified``
    whether every layer passed its validity check, ``boundary_suspect``
    whether the maximizer pressed against the search box in ``log a``,
    ``theta`` and ``overlaps`` the induced temperatures and surrogate
    overlaps, and ``stationarity`` the largest violation of the bond-wise
    matching conditions at the reported point.
    """

    a: np.ndarray
    value: float
    certified: bool
    boundary_suspect: bool
    theta: np.ndarray
    overlaps: np.ndarray
    stationarity: float

    def to_dict(self) -> dict:
        return {
            "a": [float(x) for x in self.a],
            "value": float(self.value),
            "certified": bool(self.certified),
            "boundary_suspect": bool(self.boundary_suspect),
            "theta": [float(x) for x in self.theta],
            "overlaps": [float(x) for x in self.overlaps],
            "stationarity": float(self.stationarity),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BoundResult":
        return cls(
            a=np.asarray(data["a"], dtype=float),
            value=float(data["value"]),
            certified=bool(data["certified"]),
            boundary_suspect=bool(data["boundary_suspect"]),
            theta=np.asarray(data["theta"], dtype=float),
            overlaps=np.asarray(data["overlaps"], dtype=float),
            stationarity=float(data["stationarity"]),
        )


def _evaluate(u: np.ndarray, params: ModelParams, rule,
              warm: dict[int, float]) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Bound value and its gradient in ``u = log a``, plus the layer state.

    The gradient uses the envelope identity: at its own consistency point
    each one-layer pressure depends on ``theta_p^2`` with slope
    ``(1 - q_p^2) / 2``, so only the explicit temperature terms survive.
    """
    a = np.exp(u)
    theta_sq = _theta_sq_from_aux(a, params)
    overlaps = _surrogate_overlaps(theta_sq, params, rule, warm)
    value = _functional_value(theta_sq, overlaps, params, rule)
    lam_q = np.asarray(params.lam, dtype=float) * overlaps
    beta_sq = np.asarray(params.beta, dtype=float) ** 2
    grad_u = 0.5 * beta_sq * (lam_q[1:] ** 2 / a - lam_q[:-1] ** 2 * a)
    return value, grad_u, overlaps, theta_sq


def _matching_defect(a: np.ndarray, lam: np.ndarray, overlaps: np.ndarray) -> np.ndarray:
    """Bond-wise residuals of the relatedness equations."""
    lam_q = lam * overlaps
    return lam_q[:-1] * a - lam_q[1:]


def _polish_stationarity(u: np.ndarray, params: ModelParams, rule,
                         warm: dict[int, float], target: float) -> np.ndarray:
    """Newton steps on the matching residuals, keeping only improvements."""
    lam = np.asarray(params.lam, dtype=float)

    def residual(vec: np.ndarray) -> np.ndarray:
        _, _, overlaps, _ = _evaluate(vec, params, rule, warm)
        return _matching_defect(np.exp(vec), lam, overlaps)

    best_u = u
    best_err = float(np.max(np.abs(residual(u))))
    if best_err <= target:
        return best_u
    n = u.size
    eps = 1e-6
    for _ in range(8):
        r0 = residual(best_u)
        jac = np.empty((n, n))
        for j in range(n):
            bumped = best_u.copy()
            bumped[j] += eps
            jac[:, j] = (residual(bumped) - r0) / eps
        try:
            delta = np.linalg.solve(jac, -r0)
        except np.linalg.LinAlgError:
            break
        candidate = np.clip(best_u + delta, -_LOG_BOX, _LOG_BOX)
        err = float(np.max(np.abs(residual(candidate))))
        if not err < best_err:
            break
        best_u, best_err = candidate, err
        if best_err <= target:
            break
    return best_u


def maximize_bound(params: ModelParams, tol: float = 1e-10, *, seed: int = 0,
                   n_random_starts: int = 8,
                   rule: QuadratureRule | None = None) -> BoundResult:
    """Maximize the split bound over positive auxiliary weights.

    Runs bounded quasi-Newton ascent in ``u = log a`` from several
    deterministic starts (balanced weights, the annealed-region witness
    when one exists, weights related to the nested-solver overlaps when
    fields are Gaussian) plus ``n_random_starts`` seeded random ones, then
    sharpens the best maximizer with Newton steps on the bond-matching
    residuals.  Needs at least two layers and zero or centred Gaussian
    fields.
    """
    if params.K == 1:
        raise ValueError("the split bound needs at least two layers")
    _require_supported_fields(params, "the split bound")
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    n_bonds = params.K - 1

    starts: list[np.ndarray] = [np.zeros(n_bonds)]
    verdict = machine.classify_annealed(params)
    if verdict.feasible_a:
        starts.append(np.log(np.asarray(verdict.feasible_a, dtype=float)))
    if (all(f.is_gaussian and f.v > 0.0 for f in params.fields)
            and min(params.lam) > 0.0):
        try:
            nested = rs_solver.solve_nested(params, rule=rule)
            starts.append(np.log(related_aux(nested.q, params)))
        except (RuntimeError, ValueError):
            pass
    rng = np.random.default_rng(seed)
    for _ in range(n_random_starts):
        starts.append(rng.normal(0.0, 1.5, n_bonds))

    warm: dict[int, float] = {}

    def objective(u: np.ndarray) -> tuple[float, np.ndarray]:
        value, grad_u, _, _ = _evaluate(u, params, rule, warm)
        return -value, -grad_u

    best_u: np.ndarray | None = None
    best_value = -math.inf
    for u0 in starts:
        result = minimize(
            objective, np.clip(u0, -_LOG_BOX, _LOG_BOX), jac=True,
            method="L-BFGS-B", bounds=[(-_LOG_BOX, _LOG_BOX)] * n_bonds,
            options={"maxiter": 300, "ftol": 1e-15, "gtol": 1e-12})
        if -result.fun > best_value:
            best_value = -float(result.fun)
            best_u = np.asarray(result.x, dtype=float)

    target = max(1e-14, 0.01 * tol)
    best_u = _polish_stationarity(best_u, params, rule, warm, target)

    value, _, overlaps, theta_sq = _evaluate(best_u, params, rule, warm)
    a = np.exp(best_u)
    defect = _matching_defect(a, np.asarray(params.lam, dtype=float), overlaps)
    certified = all(_certified_layers(theta_sq, overlaps, params, rule))
    return BoundResult(
        a=a,
        value=value,
        certified=bool(certified),
        boundary_suspect=bool(np.any(np.abs(best_u) > _SUSPECT_WIDTH)),
        theta=np.sqrt(theta_sq),
        overlaps=overlaps,
        stationarity=float(np.max(np.abs(defect))),
    )


# ---------------------------------------------------------------------------
# bridge to the replica-symmetric functional
# ---------------------------------------------------------------------------


def bridge_check(q, a, params: ModelParams, *,
                 rule: QuadratureRule | None = None) -> tuple[bool, float]:
    """Compare the split bound at given overlaps with the full functional.

    ``q`` must be strictly positive with entries in ``(0, 1]`` and ``a``
    positive of length ``K - 1``.  Returns ``(related, gap)`` where
    ``related`` states whether the pair satisfies the bond-matching
    equations within ``1e-10`` and ``gap`` is the replica-symmetric
    pressure minus the bound evaluated at ``q`` itself (no surrogate
    overlap solve).  For related pairs the two agree up to roundoff; for
    unrelated pairs the gap carries no sign guarantee.  Works for every
    supported field kind.
    """
    K = params.K
    q = np.asarray(q, dtype=float)
    if q.shape != (K,) or not np.all(np.isfinite(q)):
        raise ValueError(f"overlap vector must be finite with shape ({K},)")
    if np.any(q <= 0.0) or np.any(q > 1.0):
        raise ValueError("overlap entries must lie in (0, 1]")
    theta_sq = _theta_sq_from_aux(a, params)
    if K == 1:
        related = True
    else:
        a = np.asarray(a, dtype=float)
        lam = np.asarray(params.lam, dtype=float)
        related = bool(np.max(np.abs(_matching_defect(a, lam, q))) <= _RELATED_TOL)
    surrogate = _functional_value(theta_sq, q, params, rule)
    gap = rs_solver.rs_pressure(q, params, rule=rule) - surrogate
    return related, float(gap)
