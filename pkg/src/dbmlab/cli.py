"""Command-line surface: parameter files in, reports out.

One binary with subcommands:

``region``  annealed-region classification, optionally over a scan grid
``poly``    chain-polynomial report (activities, coefficients, zeros)
``rs``      consistency-equation solutions with certificates
``bound``   variational lower bound with certification flags
``verify``  finite-size ground-truth checks (trend, covariance, criteria)
``scan``    grid evaluation of selected quantities over 1-2 parameter axes

Every command reads a JSON config holding the model parameters plus
optional ``scan`` / ``solver`` / ``verify`` sections, and writes CSV or
JSON to ``--out`` (default: stdout).  Given the same config and seed, a
rerun produces byte-identical output.  Exit codes: 0 success, 1 invariant
or solver failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import chainpoly, finite_volume_lab, machine, rs_solver, sk_chain_bound
from .ghquad import QuadratureRule, normal_trapezoid_rule
from .machine import FieldSpec, ModelParams

_OUTPUT_COLUMNS = {
    "region": ("verdict",),
    "rho": ("rho",),
    "rs_pressure": ("rs_pressure",),
    "bound": ("bound_value", "bound_certified"),
    "certificates": ("talagrand_ok", "at_ok", "stable_at_zero"),
}
_DEFAULT_OUTPUTS = ("region", "rho")

_AXIS_RE = re.compile(r"^(beta|lambda|fields)\[(\d+)\](\.v)?$")


class ConfigError(Exception):
    """Problem with the config file or flags; maps to exit code 2."""


# ---------------------------------------------------------------------------
# config loading
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScanAxis:
    """One scanned parameter axis: a path plus an inclusive value range."""

    path: str
    kind: str  # "beta" | "lambda" | "field_v"
    index: int
    lo: float
    hi: float
    steps: int

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)


@dataclass(frozen=True)
class ScanSpec:
    """Validated scan request: one or two axes over a base model."""

    axes: tuple[ScanAxis, ...]
    fixed: ModelParams
    outputs: tuple[str, ...]


@dataclass(frozen=True)
class _Config:
    raw: dict
    params: ModelParams
    scan: ScanSpec | None
    solver: dict
    verify: dict


def _parse_axis(obj: dict, params: ModelParams) -> ScanAxis:
    try:
        path = str(obj["path"])
        lo = float(obj["min"])
        hi = float(obj["max"])
        steps = int(obj["steps"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"scan axis needs path/min/max/steps: {exc}") from exc
    match = _AXIS_RE.match(path)
    if match is None:
        raise ConfigError(
            f"unknown parameter path '{path}' "
            "(expected beta[i], lambda[i] or fields[i].v)")
    name, index_text, suffix = match.groups()
    index = int(index_text)
    if name == "fields" and not suffix:
        raise ConfigError(
            f"field axes must target the variance, e.g. '{path}.v'")
    if name != "fields" and suffix:
        raise ConfigError(f"'.v' applies only to field paths, not '{path}'")
    limit = params.K - 1 if name == "beta" else params.K
    if not 0 <= index < limit:
        raise ConfigError(f"index out of range in '{path}' (K = {params.K})")
    if steps < 2:
        raise ConfigError("scan axes need at least 2 steps")
    if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
        raise ConfigError(f"invalid range [{lo}, {hi}] for '{path}'")
    if name == "beta" and lo <= 0.0:
        raise ConfigError("inverse temperatures must stay positive on the grid")
    if name == "lambda" and not (0.0 <= lo and hi <= 1.0):
        raise ConfigError("layer weights must stay within [0, 1] on the grid")
    if name == "fields":
        if lo < 0.0:
            raise ConfigError("field variances must stay non-negative")
        if params.fields[index].kind not in ("zero", "gaussian_centered"):
            raise ConfigError(
                f"'{path}' requires a zero or centred-Gaussian base field")
    kind = {"beta": "beta", "lambda": "lambda", "fields": "field_v"}[name]
    return ScanAxis(path=path, kind=kind, index=index, lo=lo, hi=hi, steps=steps)


def _parse_scan(obj, params: ModelParams) -> ScanSpec:
    if not isinstance(obj, dict):
        raise ConfigError("the scan section must be a JSON object")
    axes_raw = obj.get("axes")
    if not isinstance(axes_raw, list) or not 1 <= len(axes_raw) <= 2:
        raise ConfigError("scan needs an axes list with one or two entries")
    axes = tuple(_parse_axis(a, params) for a in axes_raw)
    outputs = tuple(obj.get("outputs", _DEFAULT_OUTPUTS))
    unknown = [o for o in outputs if o not in _OUTPUT_COLUMNS]
    if unknown:
        raise ConfigError(
            f"unknown scan outputs {unknown}; "
            f"choose from {sorted(_OUTPUT_COLUMNS)}")
    return ScanSpec(axes=axes, fixed=params, outputs=outputs)


def _load_config(path: str) -> _Config:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    try:
        params = ModelParams.from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model parameters: {exc}") from exc
    scan = _parse_scan(raw["scan"], params) if "scan" in raw else None
    solver = raw.get("solver", {})
    verify = raw.get("verify", {})
    if not isinstance(solver, dict) or not isinstance(verify, dict):
        raise ConfigError("solver/verify sections must be JSON objects")
    return _Config(raw=raw, params=params, scan=scan, solver=solver,
                   verify=verify)


def _apply_point(base: ModelParams, axes, values) -> ModelParams:
    """Model at one grid point; scanned layer weights renormalize the rest."""
    beta = list(base.beta)
    lam = list(base.lam)
    fields = list(base.fields)
    scanned_lam: dict[int, float] = {}
    for axis, value in zip(axes, values):
        value = float(value)
        if axis.kind == "beta":
            beta[axis.index] = value
        elif axis.kind == "field_v":
            fields[axis.index] = FieldSpec.gaussian(value)
        else:
            scanned_lam[axis.index] = value
    if scanned_lam:
        total = sum(scanned_lam.values())
        rest = [i for i in range(len(lam)) if i not in scanned_lam]
        for i, value in scanned_lam.items():
            lam[i] = value
        remaining = 1.0 - total
        if rest:
            if remaining < -1e-12:
                raise ConfigError(
                    f"scanned layer weights sum to {total} > 1 at a grid point")
            rest_mass = sum(lam[i] for i in rest)
            if rest_mass > 0.0:
                for i in rest:
                    lam[i] = lam[i] * remaining / rest_mass
            else:
                for i in rest:
                    lam[i] = remaining / len(rest)
        elif abs(total - 1.0) > 1e-9:
            raise ConfigError(
                "scanning every layer weight requires the values to sum to one")
    try:
        return ModelParams(K=base.K, beta=tuple(beta), lam=tuple(lam),
                           fields=tuple(fields))
    except ValueError as exc:
        raise ConfigError(f"invalid model at a grid point: {exc}") from exc


def _grid(axes) -> list[tuple]:
    return list(itertools.product(*(axis.values() for axis in axes)))


def _pooled(worker, grid: list) -> list:
    if len(grid) <= 1:
        return [worker(point) for point in grid]
    with ThreadPoolExecutor(max_workers=min(8, os.cpu_count() or 1)) as pool:
        return list(pool.map(worker, grid))


# ---------------------------------------------------------------------------
# output formatting
# ---------------------------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _csv_table(columns, rows) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_cell(row.get(c)) for c in columns))
    return "\n".join(lines) + "\n"


def _kv_csv(pairs) -> str:
    lines = ["key,value"]
    for key, value in pairs:
        lines.append(f"{key},{_cell(value)}")
    return "\n".join(lines) + "\n"


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def _json_text(payload: dict) -> str:
    return json.dumps(_jsonable(payload), indent=2) + "\n"


def _flatten_kv(prefix: str, value) -> list[tuple[str, object]]:
    if isinstance(value, dict):
        out = []
        for key, sub in value.items():
            out.extend(_flatten_kv(f"{prefix}.{key}" if prefix else key, sub))
        return out
    if isinstance(value, (list, tuple, np.ndarray)):
        out = []
        for i, sub in enumerate(value):
            out.extend(_flatten_kv(f"{prefix}[{i}]", sub))
        return out
    return [(prefix, value)]


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# shared solver plumbing
# ---------------------------------------------------------------------------


def _tol(args, config: _Config) -> float:
    if args.tol is not None:
        return float(args.tol)
    return float(config.solver.get("tol", 1e-10))


def _nested_supported(params: ModelParams) -> bool:
    return (all(f.is_gaussian and f.v > 0.0 for f in params.fields)
            and min(params.lam) > 0.0)


def _solve_rs(params: ModelParams, method: str, tol: float,
              rule: QuadratureRule | None, damping: float = 0.5):
    if method == "nested":
        return rs_solver.solve_nested(params, tol, rule=rule)
    return rs_solver.solve_fixed_point(params, tol=tol, damping=damping,
                                       rule=rule)


def _bound_point(params: ModelParams, tol: float, seed: int,
                 rule: QuadratureRule | None) -> tuple[float, bool]:
    """Bound value and certification; single-layer models short-circuit."""
    if params.K == 1:
        return sk_chain_bound.p_dbm_functional(np.zeros(0), params, rule=rule)
    res = sk_chain_bound.maximize_bound(params, tol, seed=seed, rule=rule)
    return res.value, res.certified


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_region(config: _Config, args, rule) -> tuple[str, bool]:
    axes = config.scan.axes if config.scan is not None else ()
    grid = _grid(axes) if axes else [()]

    def worker(values):
        params = _apply_point(config.params, axes, values)
        verdict = machine.classify_annealed(params)
        row = {axis.path: float(v) for axis, v in zip(axes, values)}
        row["rho"] = float(verdict.rho)
        row["verdict"] = verdict.verdict
        row["witness"] = (None if verdict.feasible_a is None
                          else [float(x) for x in verdict.feasible_a])
        return row

    rows = _pooled(worker, grid)
    if args.format == "json":
        return _json_text({"command": "region", "rows": rows}), True
    columns = [axis.path for axis in axes] + ["rho", "verdict"]
    return _csv_table(columns, rows), True


def cmd_poly(config: _Config, args, rule) -> tuple[str, bool]:
    params = config.params
    t = machine.activities(params)
    payload = {
        "command": "poly",
        "activities": [float(x) for x in t],
        "coefficients": [float(c) for c in chainpoly.coefficients(t)],
        "zeros": [float(z) for z in chainpoly.zeros(t)],
        "largest_zero": float(chainpoly.largest_zero(t)),
        "spectral_radius": float(machine.spectral_radius(params)),
        "interlacing_ok": bool(chainpoly.interlacing_check(t)),
    }
    if args.format == "json":
        return _json_text(payload), True
    pairs = []
    for i, x in enumerate(payload["activities"]):
        pairs.append((f"activity[{i}]", x))
    for i, c in enumerate(payload["coefficients"]):
        pairs.append((f"coefficient[{i}]", c))
    for i, z in enumerate(payload["zeros"]):
        pairs.append((f"zero[{i}]", z))
    pairs.append(("largest_zero", payload["largest_zero"]))
    pairs.append(("spectral_radius", payload["spectral_radius"]))
    pairs.append(("interlacing_ok", payload["interlacing_ok"]))
    return _kv_csv(pairs), True


def cmd_rs(config: _Config, args, rule) -> tuple[str, bool]:
    params = config.params
    tol = _tol(args, config)
    method = str(config.solver.get("method", "auto"))
    if method not in {"auto", "nested", "fixed_point", "both"}:
        raise ConfigError(f"unknown solver method '{method}'")
    supported = _nested_supported(params)
    if method == "auto":
        method = "nested" if supported else "fixed_point"
    if method in {"nested", "both"} and not supported:
        raise ConfigError(
            "the nested solver requires centred Gaussian fields with positive "
            "variance on every layer (and positive layer weights); "
            "use method 'fixed_point' for this model")
    methods = ("nested", "fixed_point") if method == "both" else (method,)
    damping = float(config.solver.get("damping", 0.5))
    solutions = [_solve_rs(params, m, tol, rule, damping) for m in methods]
    payload = {
        "command": "rs",
        "p_annealed": float(machine.annealed_pressure(params)),
        "solutions": [sol.to_dict() for sol in solutions],
    }
    if len(solutions) == 2:
        sup = float(np.max(np.abs(solutions[0].q - solutions[1].q)))
        payload["agreement"] = {"sup_diff": sup}
    if args.format == "json":
        return _json_text(payload), True
    pairs = []
    for sol in solutions:
        data = sol.to_dict()
        prefix = data.pop("method")
        pairs.extend(_flatten_kv(prefix, data))
    pairs.append(("p_annealed", payload["p_annealed"]))
    if "agreement" in payload:
        pairs.append(("agreement.sup_diff", payload["agreement"]["sup_diff"]))
    return _kv_csv(pairs), True


def cmd_bound(config: _Config, args, rule) -> tuple[str, bool]:
    params = config.params
    tol = _tol(args, config)
    if params.K == 1:
        value, certified = sk_chain_bound.p_dbm_functional(np.zeros(0), params,
                                                           rule=rule)
        data = {"a": [], "value": float(value), "certified": bool(certified),
                "boundary_suspect": False, "theta": [0.0], "overlaps": None,
                "stationarity": 0.0}
    else:
        result = sk_chain_bound.maximize_bound(params, tol, seed=args.seed,
                                               rule=rule)
        data = result.to_dict()
    p_annealed = float(machine.annealed_pressure(params))
    flags = []
    if not data["certified"]:
        flags.append("uncertified")
    if data["boundary_suspect"]:
        flags.append("boundary_suspect")
    payload = {"command": "bound", **data, "p_annealed": p_annealed,
               "annealed_gap": p_annealed - data["value"], "flags": flags}
    if args.format == "json":
        return _json_text(payload), True
    pairs = _flatten_kv("", {k: v for k, v in payload.items()
                             if k not in ("command", "flags")})
    pairs.append(("flags", ";".join(flags)))
    return _kv_csv(pairs), True


def cmd_verify(config: _Config, args, rule) -> tuple[str, bool]:
    params = config.params
    section = config.verify
    totals = section.get("sizes", (12, 18, 24))
    n_disorder = int(section.get("n_disorder", 200))
    sweeps = int(section.get("sweeps", 400))
    replicas = int(section.get("replicas", 21))
    cov_total = int(section.get("covariance_total", 12))
    cov_n = int(section.get("covariance_n_disorder", 1000))
    n_pairs = int(section.get("n_pairs", 10))
    try:
        assignments = [
            finite_volume_lab.LayerAssignment.from_weights(params.lam, int(n))
            for n in totals]
        report = finite_volume_lab.annealed_trend(
            params, assignments, n_disorder, args.seed,
            sweeps=sweeps, replicas=replicas)
        cov_assignment = finite_volume_lab.LayerAssignment.from_weights(
            params.lam, cov_total)
        cov_rows = finite_volume_lab.covariance_report(
            cov_assignment, params, cov_n, args.seed, n_pairs=n_pairs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    worst = max(row.standardized for row in cov_rows)
    verdict = machine.classify_annealed(params)
    if verdict.verdict == "boundary":
        consistent = True
    else:
        inside = verdict.rho < 1.0
        consistent = inside == all(z > 0.0 for z in verdict.z_chain)
        if min(params.lam) > 0.0:
            consistent = consistent and (
                inside == (verdict.feasible_a is not None))
    ok = bool(report.jensen_ok and worst < 5.0 and consistent)
    if args.format == "json":
        payload = {
            "command": "verify",
            "trend": report.to_dict(),
            "covariance": {"worst": float(worst),
                           "rows": [row.to_dict() for row in cov_rows]},
            "criteria_consistent": consistent,
            "ok": ok,
        }
        return _json_text(payload), ok
    return report.to_csv(), ok


def cmd_scan(config: _Config, args, rule) -> tuple[str, bool]:
    if config.scan is None:
        raise ConfigError("the scan command requires a scan section in the config")
    scan = config.scan
    tol = _tol(args, config)
    outputs = scan.outputs
    need_verdict = "region" in outputs or "rho" in outputs
    need_solution = "rs_pressure" in outputs or "certificates" in outputs

    def worker(values):
        params = _apply_point(config.params, scan.axes, values)
        row = {axis.path: float(v) for axis, v in zip(scan.axes, values)}
        flags = []
        verdict = machine.classify_annealed(params) if need_verdict else None
        solution = None
        if need_solution:
            try:
                method = "nested" if _nested_supported(params) else "fixed_point"
                solution = _solve_rs(params, method, tol, rule)
            except (rs_solver.SolverError, ValueError):
                flags.append("rs_failed")
        for name in outputs:
            if name == "region":
                row["verdict"] = verdict.verdict
            elif name == "rho":
                row["rho"] = float(verdict.rho)
            elif name == "rs_pressure":
                row["rs_pressure"] = (None if solution is None
                                      else float(solution.pressure))
            elif name == "certificates":
                certs = (solution.certificates.to_dict()
                         if solution is not None
                         else {"talagrand_ok": None, "at_ok": None,
                               "stable_at_zero": None})
                row.update(certs)
            elif name == "bound":
                try:
                    value, certified = _bound_point(params, tol, args.seed, rule)
                except ValueError:
                    value, certified = None, None
                    flags.append("bound_failed")
                row["bound_value"] = value
                row["bound_certified"] = certified
                if certified is False:
                    flags.append("uncertified")
        row["flags"] = ";".join(flags)
        return row

    rows = _pooled(worker, _grid(scan.axes))
    columns = [axis.path for axis in scan.axes]
    for name in outputs:
        columns.extend(_OUTPUT_COLUMNS[name])
    columns.append("flags")
    if args.format == "json":
        return _json_text({"command": "scan", "columns": columns,
                           "rows": rows}), True
    return _csv_table(columns, rows), True


_HANDLERS = {
    "region": cmd_region,
    "poly": cmd_poly,
    "rs": cmd_rs,
    "bound": cmd_bound,
    "verify": cmd_verify,
    "scan": cmd_scan,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbmlab",
        description="Numerics for layered mean-field spin systems: "
                    "region classification, chain polynomials, consistency "
                    "solutions, pressure bounds and finite-size checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "region": "classify points of the annealed region",
        "poly": "report the chain polynomial of the configured model",
        "rs": "solve the consistency equations with certificates",
        "bound": "maximize the variational lower bound",
        "verify": "run finite-size trend and covariance checks",
        "scan": "evaluate selected quantities over a parameter grid",
    }
    for name, desc in descriptions.items():
        p = sub.add_parser(name, help=desc, description=desc)
        p.add_argument("--config", required=True,
                       help="path to the JSON config file")
        p.add_argument("--seed", type=int, default=0,
                       help="master seed for stochastic steps (default 0)")
        p.add_argument("--out", default=None,
                       help="output file path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="output format (default csv)")
        p.add_argument("--quadrature-order", type=int, default=None,
                       dest="quadrature_order",
                       help="override the Gaussian-expectation grid size")
        p.add_argument("--tol", type=float, default=None,
                       help="solver tolerance (default: config or 1e-10)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _load_config(args.config)
        rule = None
        if args.quadrature_order is not None:
            try:
                rule = normal_trapezoid_rule(args.quadrature_order)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        text, ok = _HANDLERS[args.command](config, args, rule)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except rs_solver.SolverError as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return 1
    _emit(text, args.out)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
