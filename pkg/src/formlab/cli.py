"""Config-driven scenarios: ``formlab run``, ``formlab study`` and ``formlab catalog``.

A scenario names a cataloged example (or an inline constant potential), a
mesh, and a list of operations executed in order.  Results are written as a
JSON run record; studies rerun the scenario on refined meshes and write a CSV
table with observed convergence orders.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .diagnostics import diagnose
from .forms import IDENTITY, assemble, form_bounds
from .mesh import build_exhaustion, build_graded_mesh, build_uniform_mesh, interval_quadrature
from .potential import CATALOG_NAMES, ExampleSpec, catalog, parse_example
from .solver import (
    critical_sweep,
    form_bounds_from_riccati,
    log_transform,
    riccati_residual,
    solve_exhaustion,
    solve_gauge,
)

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

ARTIFACT_VERSION = f"formlab {__version__} (record schema 1)"
OPERATIONS = ("formbound", "solve", "riccati", "diagnose", "gauge", "sweep")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ scenario


@dataclass
class Scenario:
    name: str
    example: str
    params: dict
    operations: list[str]
    mesh: dict = field(default_factory=dict)
    exhaustion: dict = field(default_factory=dict)
    gauge: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    expect: dict = field(default_factory=dict)
    study: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def spec(self) -> ExampleSpec:
        return catalog(self.example, **self.params)

    def refined(self, k: int) -> "Scenario":
        """Copy with every element count multiplied by 2^k."""
        out = copy.deepcopy(self)
        base = int(out.mesh.get("elements", 1000))
        out.mesh["elements"] = base * 2**k
        out.exhaustion["elements"] = int(self.exhaustion.get("elements", base)) * 2**k
        out.gauge["elements"] = int(self.gauge.get("elements", 1000)) * 2**k
        return out

    def elements_for(self, op: str) -> int:
        section = {"gauge": self.gauge, "solve": self.exhaustion}.get(op, self.mesh)
        return int(section.get("elements", self.mesh.get("elements", 1000)))


_KNOWN_KEYS = {
    "name", "example", "potential", "operations", "mesh", "exhaustion", "gauge", "sweep",
    "diagnostics", "tolerances", "expect", "study", "output",
}


def scenario_from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ConfigError("config must be a table")
    unknown = set(data) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    ops = data.get("operations")
    if not isinstance(ops, list) or not ops:
        raise ConfigError("operation list must be nonempty")
    bad = [op for op in ops if op not in OPERATIONS]
    if bad:
        raise ConfigError(f"unknown operations {bad}; choose from {', '.join(OPERATIONS)}")

    if "potential" in data:
        pot = data["potential"]
        if not isinstance(pot, dict) or pot.get("kind") != "constant" or "value" not in pot:
            raise ConfigError("inline potentials must be {kind = 'constant', value = q}")
        example, params = "constant", {"q": float(pot["value"])}
    elif "example" in data:
        try:
            example, params = parse_example(str(data["example"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        raise ConfigError("config needs an 'example' or an inline 'potential'")
    if example not in CATALOG_NAMES:
        raise ConfigError(f"unknown example {example!r}; choose from {', '.join(CATALOG_NAMES)}")

    tol = dict(data.get("tolerances", {}))
    for key, val in tol.items():
        if not (isinstance(val, (int, float)) and val > 0):
            raise ConfigError(f"tolerance {key!r} must be positive")
    sc = Scenario(
        name=str(data.get("name", example)),
        example=example,
        params=params,
        operations=list(ops),
        mesh=dict(data.get("mesh", {})),
        exhaustion=dict(data.get("exhaustion", {})),
        gauge=dict(data.get("gauge", {})),
        sweep=dict(data.get("sweep", {})),
        diagnostics=dict(data.get("diagnostics", {})),
        tolerances=tol,
        expect=dict(data.get("expect", {})),
        study=dict(data.get("study", {})),
        output=dict(data.get("output", {})),
    )
    try:
        sc.spec()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad example parameters: {exc}") from None
    return sc


def load_scenario(path: Path) -> Scenario:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    try:
        if str(path).endswith(".json"):
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode())
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return scenario_from_dict(data)


# ---------------------------------------------------------------- operations


def _mesh(sc: Scenario, ex: ExampleSpec):
    cfg = sc.mesh
    a, b = cfg.get("domain", ex.domain)
    elements = int(cfg.get("elements", 1000))
    grading = cfg.get("grading", "log" if ex.scale == "log" else "uniform")
    if grading == "uniform":
        return build_uniform_mesh(a, b, elements, ex.weight)
    if grading == "log":
        return build_graded_mesh(a, b, elements, ex.weight)
    if isinstance(grading, (int, float)):
        return build_graded_mesh(a, b, elements, ex.weight, ratio=float(grading))
    raise ConfigError(f"unknown grading {grading!r}")


def _op_formbound(sc, ex, state):
    mesh = _mesh(sc, ex)
    rep = form_bounds(assemble(mesh, IDENTITY, ex.potential), tol=sc.tolerances.get("eigen", 1e-8))
    return rep.to_record()


def _op_solve(sc, ex, state):
    cfg = sc.exhaustion
    a, b = cfg.get("domain", sc.mesh.get("domain", ex.domain))
    scale = cfg.get("scale", ex.scale)
    spec = build_exhaustion((a, b), int(cfg.get("levels", 4)), scale)
    ball = tuple(cfg["ball"]) if "ball" in cfg else None
    rep = solve_exhaustion(
        spec, IDENTITY, ex.potential,
        elements=int(cfg.get("elements", sc.mesh.get("elements", 1000))),
        weight=ex.weight, ball=ball,
        drift_tol=sc.tolerances.get("drift", 1e-4),
    )
    state["u"] = rep.u
    state["U"] = rep.common
    rec = rep.to_record()
    if ex.name == "constant" and ex.solution is not None:
        # every level solution is the closed form up to normalization on the ball
        c, r = rep.ball
        pts, wts = interval_quadrature(rep.u.mesh, c - r, c + r)
        k = math.sqrt(float(np.sum(ex.solution(pts) ** 2 * wts) / np.sum(wts)))
        rec["closed_form_sup_error"] = float(
            np.max(np.abs(rep.u.values - ex.solution(rep.u.mesh.nodes) / k))
        )
    return rec


def _solution_field(sc, ex, state):
    if "u" in state:
        return state["u"]
    if ex.solution is None:
        return None
    mesh = _mesh(sc, ex)
    return mesh.interpolate(ex.solution)


def _op_riccati(sc, ex, state):
    u = _solution_field(sc, ex, state)
    if u is None:
        return None
    v = log_transform(u).v
    res = riccati_residual(v, IDENTITY, ex.potential)
    bounds = form_bounds_from_riccati(v)
    return {"max_residual": res.max_residual, "max_abs": res.max_abs, "bounds": bounds.to_record()}


def _op_diagnose(sc, ex, state):
    u = _solution_field(sc, ex, state)
    if u is None:
        return None
    U = tuple(sc.diagnostics.get("U", state.get("U", (u.mesh.a, u.mesh.b))))
    q = sc.diagnostics.get("q")
    return diagnose(u, U, q=q, count=int(sc.diagnostics.get("count", 32))).to_record()


def _op_gauge(sc, ex, state):
    cfg = sc.gauge
    if ex.weight.is_radial or tuple(ex.domain) != (0.0, 1.0):
        raise ValueError("the gauge solver works on the unit interval only")
    rep = solve_gauge(
        ex.potential,
        elements=int(cfg.get("elements", 1000)),
        method=cfg.get("method", "fem"),
        tol=sc.tolerances.get("series", 1e-8),
    )
    return rep.to_record()


def _op_sweep(sc, ex, state):
    cfg = sc.sweep
    mesh = _mesh(sc, ex)
    if "lambdas" in cfg:
        lambdas = [float(x) for x in cfg["lambdas"]]
    else:
        lambdas = [1 - 2.0**-j for j in range(1, int(cfg.get("steps", 8)) + 1)]
    ball = tuple(cfg.get("ball", (0.5 * (mesh.a + mesh.b), 0.1 * (mesh.b - mesh.a))))
    annuli = [tuple(a) for a in cfg.get("annuli", [])]
    rep = critical_sweep(ex.potential, IDENTITY, mesh, lambdas, ball, annuli)
    rec = rep.to_record()
    if annuli and rep.rows:
        rec["energy_growth"] = rep.energy_growth()
    return rec


_OPS = {
    "formbound": _op_formbound,
    "solve": _op_solve,
    "riccati": _op_riccati,
    "diagnose": _op_diagnose,
    "gauge": _op_gauge,
    "sweep": _op_sweep,
}


# ---------------------------------------------------------------- verdicts


def _lookup(payload: dict, dotted: str):
    cur: Any = payload
    for part in dotted.split("."):
        if isinstance(cur, list):
            cur = cur[int(part)]
        else:
            cur = cur[part]
    return cur


def check_expectations(op: str, payload: dict, expect: dict) -> list[dict]:
    """Evaluate ``expect[op]`` entries: {key = {value, rtol|atol} | {min} | {max}}."""
    checks = []
    for key, rule in expect.get(op, {}).items():
        try:
            got = _lookup(payload, key)
        except (KeyError, IndexError, ValueError, TypeError):
            checks.append({"key": key, "ok": False, "reason": "missing"})
            continue
        if not isinstance(rule, dict):
            rule = {"value": rule}
        ok = True
        if "value" in rule:
            want = float(rule["value"])
            tol = float(rule.get("atol", 0.0)) + float(rule.get("rtol", 0.0)) * abs(want)
            ok &= abs(float(got) - want) <= (tol if tol > 0 else 1e-12 * max(1.0, abs(want)))
        if "min" in rule:
            ok &= float(got) >= float(rule["min"])
        if "max" in rule:
            ok &= float(got) <= float(rule["max"])
        if "equals" in rule:
            ok &= got == rule["equals"]
        checks.append({"key": key, "ok": bool(ok), "got": got, "rule": rule})
    return checks


def run_scenario(sc: Scenario) -> dict:
    """Run every operation in order and return the run record."""
    ex = sc.spec()
    state: dict = {}
    ops = []
    for op in sc.operations:
        t0 = time.perf_counter()
        entry: dict = {"name": op}
        try:
            payload = _OPS[op](sc, ex, state)
        except Exception as exc:  # recorded, the run continues
            entry.update(verdict="fail", payload={"error": f"{type(exc).__name__}: {exc}"})
        else:
            if payload is None:
                entry.update(verdict="skipped", payload={"reason": "no solution field available"})
            else:
                checks = check_expectations(op, payload, sc.expect)
                entry.update(
                    verdict="pass" if all(c["ok"] for c in checks) else "fail",
                    payload=payload,
                    checks=checks,
                )
        entry["seconds"] = time.perf_counter() - t0
        ops.append(entry)
    return {
        "artifact_version": ARTIFACT_VERSION,
        "scenario": sc.name,
        "example": {"name": ex.name, "params": ex.params},
        "operations": ops,
        "status": "fail" if any(o["verdict"] == "fail" for o in ops) else "pass",
    }


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path: Path, data: dict):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(data, indent=2, default=_json_default, sort_keys=True) + "\n")


# ------------------------------------------------------------------- study

_DEFAULT_TRACK = {
    "formbound": "lambda_upper",
    "solve": "min_u",
    "riccati": "max_residual",
    "diagnose": "log_caccioppoli_ratio",
    "gauge": "value_at_half",
    "sweep": "energy_growth",
}


def observed_order(values: list[float]) -> list[Optional[float | str]]:
    """Richardson order log2(|Q_{k-1} - Q_{k-2}| / |Q_k - Q_{k-1}|) per row."""
    out: list = [None] * len(values)
    for k in range(2, len(values)):
        d1 = abs(values[k - 1] - values[k - 2])
        d2 = abs(values[k] - values[k - 1])
        if d1 == 0 and d2 == 0:
            out[k] = "exact"
        elif d2 == 0 or d1 == 0:
            out[k] = "exact" if d2 == 0 else None
        else:
            out[k] = math.log2(d1 / d2)
    return out


def convergence_study(sc: Scenario, refinements: int, out_csv: Path) -> list[dict]:
    """Rerun on meshes h, h/2, ... and write one CSV row per level.

    Rows are flushed as they are produced, so a failure leaves a partial table.
    """
    if refinements < 2:
        raise ConfigError("a study needs at least 2 refinements")
    track = sc.study.get("track")
    if track is None:
        op = sc.operations[0]
        track = f"{op}.{_DEFAULT_TRACK[op]}"
    op, _, key = track.partition(".")
    if op not in sc.operations:
        raise ConfigError(f"tracked operation {op!r} is not in the operation list")
    rows: list[dict] = []
    values: list[float] = []
    Path(out_csv).parent.mkdir(parents=True, exist_ok=True)
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "elements", "quantity", "value", "difference", "observed_order"])
        fh.flush()
        for k in range(refinements):
            sub = sc.refined(k)
            record = run_scenario(sub)
            entry = next(o for o in record["operations"] if o["name"] == op)
            if entry["verdict"] == "fail" and "error" in entry["payload"]:
                raise RuntimeError(f"level {k}: {entry['payload']['error']}")
            if entry["verdict"] == "skipped":
                raise RuntimeError(f"level {k}: operation {op} skipped")
            value = float(_lookup(entry["payload"], key))
            values.append(value)
            n_el = sub.elements_for(op)
            order = observed_order(values)[-1]
            diff = values[-1] - values[-2] if k else None
            row = {"level": k, "elements": n_el, "quantity": track, "value": value,
                   "difference": diff, "observed_order": order}
            rows.append(row)
            writer.writerow([k, n_el, track, repr(value),
                             "" if diff is None else repr(diff),
                             "" if order is None else (order if isinstance(order, str) else repr(order))])
            fh.flush()
    return rows


# --------------------------------------------------------------------- catalog


def catalog_listing() -> list[dict]:
    return [catalog(name).describe() for name in CATALOG_NAMES]


def format_catalog() -> str:
    lines = []
    for d in catalog_listing():
        params = ", ".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in d["params"].items())
        lines.append(f"{d['name']}({params})")
        lines.append(f"    dimension {d['dimension']}, domain {tuple(d['domain'])}, weight {d['weight']['kind']}")
        if d["exponents"]:
            lines.append(f"    exponents alpha+- = {d['exponents'][0]:g}, {d['exponents'][1]:g}")
        lines.append(f"    {d['notes']}")
    return "\n".join(lines)


# ------------------------------------------------------------------------ main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="formlab", description=__doc__.splitlines()[0])
    p.add_argument("--out", default=".", help="output directory (default: current)")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario and write its JSON record")
    r.add_argument("config")
    s = sub.add_parser("study", help="refinement study with observed orders (CSV)")
    s.add_argument("config")
    s.add_argument("--refinements", type=int, default=3)
    c = sub.add_parser("catalog", help="list the built-in examples")
    c.add_argument("--json", action="store_true", help="emit JSON instead of text")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    if args.command == "catalog":
        if args.json:
            print(json.dumps(catalog_listing(), indent=2))
        else:
            print(format_catalog())
        return EXIT_OK
    try:
        sc = load_scenario(Path(args.config))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.command == "run":
        record = run_scenario(sc)
        target = out / sc.output.get("record", f"{sc.name}.json")
        try:
            write_json(target, record)
        except OSError as exc:
            print(f"i/o error: {exc}", file=sys.stderr)
            return EXIT_IO
        for o in record["operations"]:
            print(f"{o['name']:10s} {o['verdict']}")
        return EXIT_OK if record["status"] == "pass" else EXIT_FAIL
    target = out / sc.output.get("study", f"{sc.name}_study.csv")
    try:
        rows = convergence_study(sc, args.refinements, target)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:
        print(f"study failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for row in rows:
        print(f"{row['level']:3d} {row['elements']:8d} {row['value']:.10g} {row['observed_order']}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
