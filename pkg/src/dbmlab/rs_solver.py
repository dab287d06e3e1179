"""Replica-symmetric layer of the deep chain model.

The replica-symmetric (RS) pressure functional in a per-layer overlap
vector ``q`` is

    p_rs(q) = log 2 + sum_p lam_p E log cosh(z sqrt((M q)_p) + h_p)
              + (1/2) (1 - q)^T M1 (1 - q),

with ``z`` standard normal, ``h_p`` the layer-``p`` external field and
``M``, ``M1`` the interaction matrices of :mod:`dbmlab.machine`.
Stationary points solve the consistency equations

    q_p = E tanh^2(z sqrt((M q)_p) + h_p),          p = 1..K.

This module provides the functional, the consistency map and its Jacobian
at ``q = 0``, the scalar single-layer solver (the classical
Latala--Guerra uniqueness argument), a damped fixed-point solver, a
globally convergent nested solver for Gaussian fields, and the
Talagrand / de Almeida--Thouless sufficient conditions used to certify
the scalar surrogate downstream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import ghquad, machine
from .ghquad import INV_COSH4, LOG_COSH, TANH_SQ, QuadratureRule
from .machine import FieldSpec, ModelParams

__all__ = [
    "Certificates",
    "RsSolution",
    "SolverError",
    "rs_pressure",
    "rs_map",
    "jacobian_at_zero",
    "latala_guerra",
    "solve_fixed_point",
    "solve_nested",
    "check_talagrand",
    "check_at",
]

_LOG2 = math.log(2.0)
_ZERO_FIELD = FieldSpec.zero()
# smallest relative tolerance scipy's brentq accepts is ~4*eps
_BRENTQ_RTOL = 1e-15


class SolverError(RuntimeError):
    """Raised when an iterative solver fails to reach its tolerance.

    Carries the last iterate and its residual so callers can inspect or
    restart from where the solver stopped.
    """

    def __init__(self, message: str, last_q: np.ndarray, residual: float,
                 iterations: int):
        super().__init__(message)
        self.last_q = np.asarray(last_q, dtype=float)
        self.residual = float(residual)
        self.iterations = int(iterations)


@dataclass(frozen=True)
class Certificates:
    """Certification flags attached to a solution.

    ``talagrand_ok``: every layer passes the high-temperature criterion
    ``(Mq)_p < q_p / 4`` (``None`` when some layer is indeterminate).
    ``at_ok``: every layer passes the de Almeida--Thouless stability
    inequality (``None`` when the fields are not centred Gaussian).
    ``stable_at_zero``: the consistency map is a local contraction at
    ``q = 0``, i.e. the spectral radius of ``M`` is below one.
    """

    talagrand_ok: bool | None
    at_ok: bool | None
    stable_at_zero: bool

    def to_dict(self) -> dict:
        return {
            "talagrand_ok": self.talagrand_ok,
            "at_ok": self.at_ok,
            "stable_at_zero": self.stable_at_zero,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Certificates":
        return cls(talagrand_ok=data["talagrand_ok"], at_ok=data["at_ok"],
                   stable_at_zero=data["stable_at_zero"])


@dataclass(frozen=True, eq=False)
class RsSolution:
    """Solver output: overlap vector, pressure value and certificates.

    ``residual`` is ``max_p |q_p - F_p(q)|`` at the returned ``q``;
    ``method`` identifies the solver (``fixed_point`` or ``nested``).
    """

    q: np.ndarray
    pressure: float
    residual: float
    method: str
    certificates: Certificates

    def to_dict(self) -> dict:
        return {
            "q": [float(x) for x in self.q],
            "pressure": float(self.pressure),
            "residual": float(self.residual),
            "method": self.method,
            "certificates": self.certificates.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RsSolution":
        return cls(q=np.asarray(data["q"], dtype=float),
                   pressure=float(data["pressure"]),
                   residual=float(data["residual"]),
                   method=str(data["method"]),
                   certificates=Certificates.from_dict(data["certificates"]))


# ---------------------------------------------------------------------------
# validation helpers
# ---------------------------------------------------------------------------


def _check_overlap(q, K: int) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (K,):
        raise ValueError(f"overlap vector must have shape ({K},), got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("overlap entries must be finite")
    if np.any(q < 0.0) or np.any(q > 1.0):
        raise ValueError("overlap entries must lie in [0, 1]")
    return q


def _require_positive_lambda(params: ModelParams) -> None:
    if any(lam <= 0.0 for lam in params.lam):
        raise ValueError(
            "solvers require strictly positive layer weights; prune "
            "zero-weight layers from the model first")


def _require_gaussian_fields(params: ModelParams, what: str) -> np.ndarray:
    """Return the per-layer field variances, or raise if unsupported."""
    variances = []
    for p, f in enumerate(params.fields):
        if not f.is_gaussian or f.v <= 0.0:
            raise ValueError(
                f"{what} requires centred Gaussian fields with positive "
                f"variance on every layer (layer {p} has kind '{f.kind}'"
                + (f", v={f.v}" if f.is_gaussian else "") + ")")
        variances.append(f.v)
    return np.asarray(variances, dtype=float)


def _theta_sq_from_aux(a, params: ModelParams) -> np.ndarray:
    """Effective squared layer temperatures induced by auxiliary variables.

    theta_1^2 = lam_1 a_1 beta_1^2, interior
    theta_p^2 = lam_p (beta_{p-1}^2 / a_{p-1} + a_p beta_p^2), and
    theta_K^2 = lam_K beta_{K-1}^2 / a_{K-1}.  A single layer has no
    interaction, so theta = (0,).
    """
    K = params.K
    a = np.asarray(a, dtype=float)
    if a.shape != (K - 1,):
        raise ValueError(f"auxiliary vector must have shape ({K - 1},)")
    if K == 1:
        return np.zeros(1)
    if np.any(a <= 0.0) or not np.all(np.isfinite(a)):
        raise ValueError("auxiliary entries must be positive and finite")
    lam = np.asarray(params.lam)
    beta_sq = np.asarray(params.beta, dtype=float) ** 2
    theta_sq = np.empty(K)
    theta_sq[0] = lam[0] * a[0] * beta_sq[0]
    for p in range(1, K - 1):
        theta_sq[p] = lam[p] * (beta_sq[p - 1] / a[p - 1] + a[p] * beta_sq[p])
    theta_sq[K - 1] = lam[K - 1] * beta_sq[K - 2] / a[K - 2]
    return theta_sq


# ---------------------------------------------------------------------------
# functional, consistency map, Jacobian
# ---------------------------------------------------------------------------


def rs_pressure(q, params: ModelParams, *, rule: QuadratureRule | None = None) -> float:
    """Replica-symmetric pressure at overlap ``q`` (nats per spin).

    At ``q = 0`` with all-zero fields this reduces, through the shared
    quadratic code path, to exactly ``machine.annealed_pressure``.
    """
    q = _check_overlap(q, params.K)
    _, _, M = machine.build_matrices(params)
    m = M @ q
    lam = params.lam
    field_term = 0.0
    for p in range(params.K):
        field_term += lam[p] * ghquad.expect(LOG_COSH, float(m[p]),
                                             params.fields[p], rule)
    return _LOG2 + field_term + machine.interaction_half_quadratic(params, 1.0 - q)


def rs_map(q, params: ModelParams, *, rule: QuadratureRule | None = None) -> np.ndarray:
    """Consistency map ``F_p(q) = E tanh^2(z sqrt((Mq)_p) + h_p)``."""
    q = _check_overlap(q, params.K)
    _, _, M = machine.build_matrices(params)
    m = M @ q
    return np.array([
        ghquad.expect(TANH_SQ, float(m[p]), params.fields[p], rule)
        for p in range(params.K)
    ])


def jacobian_at_zero(params: ModelParams) -> np.ndarray:
    """Jacobian of the consistency map at ``q = 0`` for zero fields.

    Equals the interaction matrix ``M`` exactly: near zero overlap,
    ``E tanh^2(z sqrt(s)) = s + O(s^2)``, so ``F(q) = Mq + O(|q|^2)``.
    The expansion needs the fields to vanish; other fields are rejected.
    """
    if not params.zero_fields:
        raise ValueError("jacobian_at_zero supports zero external fields only")
    _, _, M = machine.build_matrices(params)
    return M


# ---------------------------------------------------------------------------
# scalar single-layer solver
# ---------------------------------------------------------------------------


def latala_guerra(beta: float, v: float, tol: float = 1e-12, *,
                  rule: QuadratureRule | None = None) -> float:
    """Unique positive root of ``q = E tanh^2(z sqrt(2 q beta^2 + v))``.

    Uniqueness for ``v > 0`` is the classical Latala--Guerra argument:
    ``F(q)/q`` is strictly decreasing on ``(0, 1]``, so bisection on the
    sign of ``F(q) - q`` converges to the single crossing.  Stops when
    ``|q - F(q)| < tol``.
    """
    beta = float(beta)
    v = float(v)
    if v <= 0.0:
        raise ValueError("field variance v must be positive")
    if beta < 0.0:
        raise ValueError("beta must be nonnegative")
    two_beta_sq = 2.0 * beta * beta

    def consistency(x: float) -> float:
        return ghquad.expect(TANH_SQ, two_beta_sq * x + v, _ZERO_FIELD, rule)

    lo, hi = 0.0, 1.0
    mid = 0.5
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        f_mid = consistency(mid)
        if abs(f_mid - mid) < tol:
            return mid
        if f_mid > mid:
            lo = mid
        else:
            hi = mid
    raise RuntimeError(
        "bisection failed to reach tolerance; this should be impossible "
        "for v > 0 and indicates a bug")


# ---------------------------------------------------------------------------
# certification checks
# ---------------------------------------------------------------------------


def check_talagrand(q, params: ModelParams, a=None) -> list:
    """Per-layer high-temperature flags ``(Mq)_p < q_p / 4``.

    For ``q_p > 0`` the flag is the overlap-form inequality above.  A
    ``q_p = 0`` layer carries no overlap scale, so the equivalent
    effective-temperature form ``theta_p(a)^2 < 1/8`` is used when the
    auxiliary vector ``a`` is supplied; otherwise the layer is marked
    ``None`` (indeterminate).  A single layer has no interaction and is
    vacuously ``True``.
    """
    q = _check_overlap(q, params.K)
    if params.K == 1:
        return [True]
    theta_sq = _theta_sq_from_aux(a, params) if a is not None else None
    _, _, M = machine.build_matrices(params)
    m = M @ q
    flags: list = []
    for p in range(params.K):
        if q[p] > 0.0:
            flags.append(bool(m[p] < 0.25 * q[p]))
        elif theta_sq is not None:
            flags.append(bool(theta_sq[p] < 0.125))
        else:
            flags.append(None)
    return flags


def check_at(q, params: ModelParams, *,
             rule: QuadratureRule | None = None) -> list:
    """Per-layer de Almeida--Thouless stability flags (Gaussian fields).

    Layer ``p`` passes when
    ``(Mq)_p * E cosh^{-4}(z sqrt((Mq)_p + v_p)) <= q_p``; a decoupled
    layer (``(Mq)_p = 0``) passes trivially.
    """
    q = _check_overlap(q, params.K)
    _require_gaussian_fields(params, "check_at")
    _, _, M = machine.build_matrices(params)
    m = M @ q
    flags = []
    for p in range(params.K):
        ec4 = ghquad.expect(INV_COSH4, float(m[p]), params.fields[p], rule)
        flags.append(bool(m[p] * ec4 <= q[p]))
    return flags


def _certificates(q, params: ModelParams, a=None, *,
                  rule: QuadratureRule | None = None) -> Certificates:
    tala_flags = check_talagrand(q, params, a)
    if any(f is False for f in tala_flags):
        talagrand_ok: bool | None = False
    elif all(f is True for f in tala_flags):
        talagrand_ok = True
    else:
        talagrand_ok = None
    at_ok: bool | None
    if all(f.is_gaussian and f.v > 0.0 for f in params.fields):
        at_ok = all(check_at(q, params, rule=rule))
    else:
        at_ok = None
    stable = bool(machine.spectral_radius(params) < 1.0)
    return Certificates(talagrand_ok=talagrand_ok, at_ok=at_ok,
                        stable_at_zero=stable)


# ---------------------------------------------------------------------------
# damped fixed-point solver
# ---------------------------------------------------------------------------


def solve_fixed_point(params: ModelParams, q0=None, damping: float = 0.5,
                      tol: float = 1e-10, max_iter: int = 10_000, *,
                      rule: QuadratureRule | None = None) -> RsSolution:
    """Damped iteration ``q <- (1 - damping) q + damping F(q)``.

    Damping widens the convergence basin without moving fixed points.
    Raises :class:`SolverError` (carrying the last iterate and residual)
    when ``max_iter`` iterations do not reach ``tol``.
    """
    _require_positive_lambda(params)
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    if tol <= 0.0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter at least 1")
    q = np.full(params.K, 0.5) if q0 is None else _check_overlap(q0, params.K)
    residual = math.inf
    for iteration in range(max_iter):
        f = rs_map(q, params, rule=rule)
        residual = float(np.max(np.abs(q - f)))
        if residual < tol:
            return RsSolution(
                q=q.copy(),
                pressure=rs_pressure(q, params, rule=rule),
                residual=residual,
                method="fixed_point",
                certificates=_certificates(q, params, rule=rule),
            )
        q = (1.0 - damping) * q + damping * f
    raise SolverError(
        f"fixed-point iteration did not reach tol={tol} within "
        f"{max_iter} iterations (residual {residual:.3e})",
        last_q=q, residual=residual, iterations=max_iter)


# ---------------------------------------------------------------------------
# nested solver (Gaussian fields)
# ---------------------------------------------------------------------------

_TINV_CAP = 1e9


def _tanh_sq_variance(s: float, rule: QuadratureRule | None) -> float:
    """``T(s) = E tanh^2(z sqrt(s))`` for total variance ``s``."""
    return ghquad.expect(TANH_SQ, s, _ZERO_FIELD, rule)


def _tanh_sq_inverse(target: float, rule: QuadratureRule | None) -> float | None:
    """Solve ``T(s) = target`` for ``s >= 0``; ``None`` if out of reach.

    ``T`` is strictly increasing with ``T(0) = 0`` and ``T -> 1``, so the
    root is unique.  Targets so close to one that ``s`` would exceed the
    numeric cap are reported as unreachable.
    """
    if target <= 0.0:
        return 0.0
    hi = 1.0
    while _tanh_sq_variance(hi, rule) < target:
        hi *= 4.0
        if hi > _TINV_CAP:
            return None
    return float(brentq(lambda s: _tanh_sq_variance(s, rule) - target,
                        0.0, hi, xtol=1e-30, rtol=_BRENTQ_RTOL))


def _shoot_once(s1: float, params: ModelParams, v: np.ndarray,
                rule: QuadratureRule | None):
    """One forward sweep of the layer chain from a trial first-layer variance.

    Builds ``(q, a)`` layer by layer from ``s1 = (Mq)_1 + v_1`` using the
    auxiliary-variable correspondence ``lam_p q_p a_p = lam_{p+1} q_{p+1}``,
    and returns ``(mismatch, q, a)`` where ``mismatch`` is the defect of
    the final-layer temperature identity.  ``mismatch`` is ``-inf`` when
    the trial overshoots (some overlap would reach one) and ``+inf`` when
    it undershoots (the auxiliary chain would go nonpositive); it is
    strictly decreasing in ``s1`` in between, which makes the outer root
    solve a bracketed scalar problem.
    """
    lam = np.asarray(params.lam)
    beta_sq = np.asarray(params.beta, dtype=float) ** 2
    K = params.K
    q = np.zeros(K)
    a = np.zeros(K - 1)
    q[0] = _tanh_sq_variance(s1, rule)
    theta_sq_first = (s1 - v[0]) / (2.0 * q[0])
    if theta_sq_first <= 0.0:
        return math.inf, None, None
    a[0] = theta_sq_first / (lam[0] * beta_sq[0])
    level = lam[0] * q[0] * a[0]
    for p in range(1, K - 1):
        q_p = level / lam[p]
        if q_p >= 1.0:
            return -math.inf, None, None
        s_p = _tanh_sq_inverse(q_p, rule)
        if s_p is None:
            return -math.inf, None, None
        q[p] = q_p
        theta_sq = (s_p - v[p]) / (2.0 * q_p)
        a[p] = (theta_sq / lam[p] - beta_sq[p - 1] / a[p - 1]) / beta_sq[p]
        if a[p] <= 0.0:
            return math.inf, None, None
        level *= a[p]
    q_last = level / lam[K - 1]
    if q_last >= 1.0:
        return -math.inf, None, None
    s_last = _tanh_sq_inverse(q_last, rule)
    if s_last is None:
        return -math.inf, None, None
    q[K - 1] = q_last
    from_chain = lam[K - 1] * beta_sq[K - 2] / a[K - 2]
    needed = (s_last - v[K - 1]) / (2.0 * q_last)
    return from_chain - needed, q, a


def _solve_shoot(params: ModelParams, v: np.ndarray,
                 rule: QuadratureRule | None) -> np.ndarray:
    """Root-find the sweep mismatch over ``s1 = v_1 + exp(u)``."""

    def mismatch(u: float) -> float:
        return _shoot_once(v[0] + math.exp(u), params, v, rule)[0]

    lo = hi = 0.0
    f_lo = f_hi = mismatch(0.0)
    steps = 0
    while f_lo <= 0.0:
        lo -= 1.0
        f_lo = mismatch(lo)
        steps += 1
        if steps > 600:
            raise RuntimeError("failed to bracket the chain mismatch from "
                               "below; this indicates a bug")
    steps = 0
    while f_hi >= 0.0:
        hi += 1.0
        f_hi = mismatch(hi)
        steps += 1
        if steps > 600:
            raise RuntimeError("failed to bracket the chain mismatch from "
                               "above; this indicates a bug")
    # Narrow by bisection until both ends are finite, then polish the root.
    for _ in range(200):
        if math.isfinite(f_lo) and math.isfinite(f_hi) and hi - lo < 0.5:
            break
        mid = 0.5 * (lo + hi)
        f_mid = mismatch(mid)
        if f_mid > 0.0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    else:
        raise RuntimeError("mismatch bracket never became finite; this "
                           "indicates a bug")
    u_root = brentq(mismatch, lo, hi, xtol=1e-15, rtol=_BRENTQ_RTOL)
    _, q, _ = _shoot_once(v[0] + math.exp(u_root), params, v, rule)
    if q is None:
        # The root evaluation landed on a shot boundary; nudge inward.
        for shift in (1e-12, -1e-12, 1e-9, -1e-9):
            _, q, _ = _shoot_once(v[0] + math.exp(u_root + shift), params, v, rule)
            if q is not None:
                break
    if q is None:
        raise RuntimeError("shoot root evaluation failed; this indicates a bug")
    return q


def _newton_polish(q: np.ndarray, params: ModelParams, target: float,
                   max_steps: int, rule: QuadratureRule | None):
    """Newton steps on ``q - F(q) = 0`` from a near-solution start.

    Returns the best iterate seen and its residual; never returns a worse
    point than the input.
    """
    def residual_of(x: np.ndarray) -> float:
        return float(np.max(np.abs(x - rs_map(x, params, rule=rule))))

    best_q = q.copy()
    best_res = residual_of(best_q)
    current = q.copy()
    for _ in range(max_steps):
        if best_res < target:
            break
        f = rs_map(current, params, rule=rule)
        defect = current - f
        step = np.minimum(1e-6, np.minimum(current, 1.0 - current) / 2.0)
        step = np.maximum(step, 1e-12)
        jac = np.empty((params.K, params.K))
        for j in range(params.K):
            hp = current.copy()
            hm = current.copy()
            hp[j] += step[j]
            hm[j] -= step[j]
            col = (rs_map(hp, params, rule=rule)
                   - rs_map(hm, params, rule=rule)) / (2.0 * step[j])
            jac[:, j] = col
        system = np.eye(params.K) - jac
        try:
            delta = np.linalg.solve(system, defect)
        except np.linalg.LinAlgError:
            break
        candidate = np.clip(current - delta, 1e-15, 1.0 - 1e-15)
        cand_res = residual_of(candidate)
        if cand_res >= best_res:
            break
        best_q, best_res = candidate.copy(), cand_res
        current = candidate
    return best_q, best_res


def solve_nested(params: ModelParams, tol: float = 1e-10, *,
                 rule: QuadratureRule | None = None) -> RsSolution:
    """Constructive solver for the unique consistency solution.

    Requires centred Gaussian fields with positive variance on every
    layer (the regime where the solution is unique and strictly
    positive).  The layer recursion is reduced to a single scalar
    root-find on the first layer's total variance: a forward sweep
    propagates a trial value through the auxiliary-variable
    correspondence, and the defect of the final layer's temperature
    identity is strictly decreasing in the trial, so the outer problem
    brackets.  A short Newton polish on the full consistency system then
    drives the residual to the requested tolerance.
    """
    _require_positive_lambda(params)
    v = _require_gaussian_fields(params, "solve_nested")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if params.K == 1:
        q = np.array([ghquad.expect(TANH_SQ, 0.0, params.fields[0], rule)])
        residual = float(np.max(np.abs(q - rs_map(q, params, rule=rule))))
        return RsSolution(
            q=q, pressure=rs_pressure(q, params, rule=rule),
            residual=residual, method="nested",
            certificates=_certificates(q, params, rule=rule))

    q_shoot = _solve_shoot(params, v, rule)
    q_best, res_best = _newton_polish(q_shoot, params,
                                      target=max(1e-14, 0.01 * tol),
                                      max_steps=12, rule=rule)
    if res_best > tol:
        # Fall back to damped iteration from the shoot point.
        q_iter = q_best.copy()
        for _ in range(5000):
            f = rs_map(q_iter, params, rule=rule)
            res = float(np.max(np.abs(q_iter - f)))
            if res < res_best:
                q_best, res_best = q_iter.copy(), res
            if res_best < tol:
                break
            q_iter = 0.5 * q_iter + 0.5 * f
        if res_best > tol:
            raise SolverError(
                f"nested solve stalled at residual {res_best:.3e} > tol={tol}",
                last_q=q_best, residual=res_best, iterations=0)
    return RsSolution(
        q=q_best,
        pressure=rs_pressure(q_best, params, rule=rule),
        residual=res_best,
        method="nested",
        certificates=_certificates(q_best, params, rule=rule))
