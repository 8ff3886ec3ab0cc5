"""Command-line driver: JSON run specs in, deterministic CSV and text out.

Run spec (JSON)::

    {
      "regime": "non-holonomic" | "semi-holonomic" | "holonomic",
      "moduli": {"a": 1, "b": 1, "c": 1, "d": 1, "e": 1},
      "L": 1.0,
      "ell4_over_12": 0.0,
      "frozen_N_jalpha": [[[...]]],          # 3x3x2, semi-holonomic only
      "frozen_u_alpha_slope": [[...]],       # 3x2, holonomic only
      "subsystem": "full" | "traction" | "bending2" | "bending3",
      "grid": 401,
      "clamp": ["0"],                        # homogeneous clamp presets
      "anchors": [{"end": "0", "dof": "u^1", "value": 0.0}],
      "loads": {
        "presets": [{"name": "cantilever-tip-force", "component": 2, "value": 1.0}],
        "f0": {"constant": [0, 0, 0]} | {"polynomial": [c0, c1, ...]} | {"table": {"X": [...], "values": [...]}},
        "T0_right": [0, 0, 0], ...
      },
      "outputs": ["fields", "energy", "defects", "graph"],
      "sweep": {"modulus": "e", "values": [1e2, 1e3]}
    }

Exit codes: 0 success, 1 invalid spec or configuration, 2 ill-posed
anchoring, 3 solver failure.  Outputs are written only after every solve
succeeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import jsonschema
import numpy as np

from . import assembly as A
from .defects import defect_columns, defect_report
from .energy import total_energy
from ._discrete import IllPosedError, SolverError, residual_ok
from .model import (
    BeamConfig,
    BoundarySpec,
    FieldState,
    LoadSet,
    Regime,
    cantilever_bcs,
    field_values,
)
from .solver import DEFAULT_N, discretize, expand_solution, solve_vector
from .structure import build_graph, connected_components
from .validation import d_limit_sweep, e_limit_sweep

ENV_OUT = "GCBEAM_OUT"
OUTPUT_KINDS = ("fields", "energy", "defects", "graph")

_ARRAY = {"type": "array"}
_LOAD = {
    "oneOf": [
        {"type": "object", "required": ["constant"], "properties": {"constant": _ARRAY}, "additionalProperties": False},
        {
            "type": "object",
            "required": ["polynomial"],
            "properties": {"polynomial": {"type": "array", "minItems": 1}},
            "additionalProperties": False,
        },
        {
            "type": "object",
            "required": ["table"],
            "properties": {
                "table": {
                    "type": "object",
                    "required": ["X", "values"],
                    "properties": {"X": {"type": "array", "items": {"type": "number"}, "minItems": 2}, "values": _ARRAY},
                    "additionalProperties": False,
                }
            },
            "additionalProperties": False,
        },
    ]
}
_NUM = {"type": "number"}

SCHEMA = {
    "type": "object",
    "required": ["regime", "moduli"],
    "additionalProperties": False,
    "properties": {
        "regime": {"enum": ["non-holonomic", "semi-holonomic", "holonomic"]},
        "moduli": {
            "type": "object",
            "properties": {k: _NUM for k in "abcde"},
            "required": list("abcde"),
            "additionalProperties": False,
        },
        "L": {"type": "number", "exclusiveMinimum": 0},
        "ell4_over_12": {"type": "number", "minimum": 0},
        "frozen_N_jalpha": _ARRAY,
        "frozen_u_alpha_slope": _ARRAY,
        "subsystem": {"enum": ["full", "traction", "bending2", "bending3"]},
        "grid": {"type": "integer", "minimum": 5},
        "clamp": {"type": "array", "items": {"enum": ["0", "L"]}},
        "anchors": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["end", "dof"],
                "properties": {"end": {"enum": ["0", "L"]}, "dof": {"type": "string"}, "value": _NUM},
                "additionalProperties": False,
            },
        },
        "loads": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "presets": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["name"],
                        "properties": {
                            "name": {"enum": ["cantilever-tip-force", "uniform-f0"]},
                            "component": {"type": "integer", "minimum": 1, "maximum": 3},
                            "value": {"oneOf": [_NUM, _ARRAY]},
                        },
                        "additionalProperties": False,
                    },
                },
                "f0": _LOAD,
                "f1": _LOAD,
                "f2": _LOAD,
                **{f"T{k}_{s}": _ARRAY for k in range(3) for s in ("left", "right")},
            },
        },
        "outputs": {"type": "array", "items": {"enum": list(OUTPUT_KINDS) + ["sweep"]}},
        "sweep": {
            "type": "object",
            "required": ["modulus", "values"],
            "properties": {
                "modulus": {"enum": ["e", "d"]},
                "values": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "seed": {"type": "integer"},
    },
}


class SpecError(ValueError):
    """The run spec is malformed or describes an invalid configuration."""


@dataclass
class RunSpec:
    config: BeamConfig
    loads: LoadSet
    bcs: BoundarySpec
    n: int = DEFAULT_N
    subsystem: str = "full"
    outputs: tuple = ("fields",)
    sweep: Optional[dict] = None
    notes: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# parsing


def _bulk_sampler(entry: dict, shape: tuple):
    if "constant" in entry:
        value = np.array(entry["constant"], dtype=float)
        if value.shape != shape:
            raise SpecError(f"constant load must have shape {shape}")
        return value
    if "polynomial" in entry:
        coefs = [np.array(c, dtype=float) for c in entry["polynomial"]]
        if any(c.shape != shape for c in coefs):
            raise SpecError(f"polynomial coefficients must have shape {shape}")
        stack = np.stack(coefs)

        def poly(X, stack=stack):
            X = np.asarray(X, dtype=float)
            powers = X[:, None] ** np.arange(len(stack))[None, :]
            return np.tensordot(powers, stack, axes=(1, 0))

        return poly
    table = entry["table"]
    Xt = np.array(table["X"], dtype=float)
    vals = np.array(table["values"], dtype=float)
    if vals.shape != (len(Xt),) + shape or np.any(np.diff(Xt) <= 0):
        raise SpecError(f"table load needs increasing X and values of shape (len(X),) + {shape}")
    flat = vals.reshape(len(Xt), -1)

    def interp(X, Xt=Xt, flat=flat):
        X = np.asarray(X, dtype=float)
        cols = [np.interp(X, Xt, flat[:, k]) for k in range(flat.shape[1])]
        return np.stack(cols, axis=1).reshape((len(X),) + shape)

    return interp


def _loads(data: dict) -> LoadSet:
    shapes = {0: (3,), 1: (3, 3), 2: (3, 3, 3)}
    kwargs = {}
    for k in range(3):
        if f"f{k}" in data:
            kwargs[f"f{k}"] = _bulk_sampler(data[f"f{k}"], shapes[k])
        for side in ("left", "right"):
            key = f"T{k}_{side}"
            if key in data:
                arr = np.array(data[key], dtype=float)
                if arr.shape != shapes[k]:
                    raise SpecError(f"{key} must have shape {shapes[k]}")
                kwargs[key] = arr
    loads = LoadSet(**kwargs)
    for preset in data.get("presets", []):
        value = preset.get("value", 1.0)
        if preset["name"] == "cantilever-tip-force":
            T = np.zeros(3)
            if np.ndim(value):
                T[:] = value
            else:
                T[preset.get("component", 1) - 1] = value
            loads = loads + LoadSet(T0_right=T)
        else:
            f = np.zeros(3)
            if np.ndim(value):
                f[:] = value
            else:
                f[preset.get("component", 1) - 1] = value
            loads = loads + LoadSet(f0=f)
    return loads


def parse_spec(data: dict, grid: Optional[int] = None) -> RunSpec:
    """Validate a decoded JSON run spec and build the run objects."""
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SpecError(f"schema error at {list(exc.absolute_path)}: {exc.message}") from None
    try:
        config = BeamConfig(
            **{k: float(v) for k, v in data["moduli"].items()},
            L=float(data.get("L", 1.0)),
            ell4_over_12=float(data.get("ell4_over_12", 0.0)),
            regime=Regime.parse(data["regime"]),
            frozen_N_jalpha=data.get("frozen_N_jalpha"),
            frozen_u_alpha_slope=data.get("frozen_u_alpha_slope"),
        )
        loads = _loads(data.get("loads", {}))
        bcs = BoundarySpec({})
        for end in data.get("clamp", []):
            bcs = bcs.with_anchors(cantilever_bcs(config, end).anchors)
        bcs = bcs.with_anchors({(a["end"], a["dof"]): a.get("value", 0.0) for a in data.get("anchors", [])})
    except (ValueError, TypeError) as exc:
        raise SpecError(str(exc)) from None
    outputs = tuple(data.get("outputs", ["fields"]))
    sweep = data.get("sweep")
    if "sweep" in outputs and sweep is None:
        raise SpecError("output 'sweep' requested without a sweep block")
    n = int(grid if grid is not None else data.get("grid", DEFAULT_N))
    return RunSpec(config, loads, bcs, n, data.get("subsystem", "full"), outputs, sweep)


def load_spec(path: str, grid: Optional[int] = None) -> RunSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read spec {path}: {exc}") from None
    return parse_spec(data, grid)


# ---------------------------------------------------------------------------
# running


def build_bvp(spec: RunSpec) -> A.LinearBVP:
    cfg, loads, bcs = spec.config, spec.loads, spec.bcs
    if spec.subsystem == "full":
        return A.assemble_full(cfg, loads, bcs)
    if spec.subsystem == "traction":
        return A.assemble_traction_subsystem(cfg.regime, cfg, loads, bcs)
    return A.assemble_bending_subsystem(cfg.regime, cfg, loads, bcs, plane=int(spec.subsystem[-1]))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.17g}" for v in row])
    return buf.getvalue()


def fields_csv(state: FieldState, labels) -> str:
    cols = [state.X] + [field_values(state, lab) for lab in labels]
    return _csv_text(["X"] + list(labels), np.column_stack(cols))


def run(spec: RunSpec) -> tuple[dict, list[str]]:
    """Solve and render outputs: ({file name: text}, report lines)."""
    cfg = spec.config
    files: dict = {}
    report = [
        f"regime: {cfg.regime.name}",
        f"moduli: " + ", ".join(f"{k}={v:.17g}" for k, v in cfg.moduli.items()),
        f"L = {cfg.L:.17g}, ell^4/12 = {cfg.ell4_over_12:.17g}, grid n = {spec.n}",
        f"system: {spec.subsystem}",
    ]
    if cfg.regime == Regime.NonHolonomic:
        report.append("note: " + A.INDEX_NOTE)
    if spec.sweep is not None:
        modulus = spec.sweep["modulus"]
        fn = e_limit_sweep if modulus == "e" else d_limit_sweep
        try:
            result = fn(cfg, spec.loads, spec.bcs, sorted(spec.sweep["values"]), n=spec.n)
        except ValueError as exc:
            raise SpecError(str(exc)) from None
        buf = io.StringIO()
        names = list(result.gaps)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([modulus] + names + ["tip"])
        for k, v in enumerate(result.values):
            w.writerow([f"{v:.17g}"] + [f"{result.gaps[c][k]:.17g}" for c in names] + [f"{result.tip[k]:.17g}"])
        w.writerow([f"# fitted exponent of {result.internal_gap}: {result.exponent:.17g}"])
        files[f"sweep_{modulus}.csv"] = buf.getvalue()
        report.append(f"{modulus}-sweep fitted exponent of {result.internal_gap}: {result.exponent:.6f}")
        if set(spec.outputs) <= {"sweep"}:
            return files, report

    bvp = build_bvp(spec)
    ds = discretize(bvp, spec.n)
    x = solve_vector(ds)
    state = expand_solution(ds, x)
    _, res, bound = residual_ok(ds.matrix, x, ds.rhs_vector)
    report.append(f"residual: {res:.6e} (tolerance {bound:.6e})")

    if "fields" in spec.outputs:
        files["fields.csv"] = fields_csv(state, list(bvp.unknowns))
    if "energy" in spec.outputs:
        tot = total_energy(state, cfg, spec.loads)
        lines = ["term,value"] + [f"{k},{v:.17g}" for k, v in tot.as_dict().items()]
        files["energy.csv"] = "\n".join(lines) + "\n"
        report.append("energy (stored = half the written integral):")
        report.extend(f"  {k} = {v:.17g}" for k, v in tot.as_dict().items())
    if "defects" in spec.outputs:
        header, data = defect_columns(state)
        files["defects.csv"] = _csv_text(header, data)
        report.extend(defect_report(state).lines())
    if "graph" in spec.outputs:
        g = build_graph(cfg)
        files["graph.tsv"] = g.to_edge_list()
        comps = [c for c in connected_components(g) if len(c) > 1]
        report.append(f"graph: {len(g.nodes)} nodes, {len(comps)} coupled components")
        report.extend("  " + ", ".join(c) for c in comps)
    return files, report


def _write(outdir: str, files: dict, report: list[str]) -> None:
    os.makedirs(outdir, exist_ok=True)
    for name, text in files.items():
        with open(os.path.join(outdir, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    with open(os.path.join(outdir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(report) + "\n")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gcbeam", description="Solve generalised-continuum beam problems.")
    p.add_argument("--spec", required=True, help="JSON run spec")
    p.add_argument("--grid", type=int, help="number of grid nodes (overrides the run spec)")
    p.add_argument("--out", help=f"output directory (default: ${ENV_OUT} or ./gcbeam_out)")
    p.add_argument("--sweep", choices=["e", "d"], help="run a penalty-limit sweep on this modulus")
    p.add_argument("--values", help="comma-separated sweep values")
    p.add_argument("--emit", help=f"comma-separated outputs among {','.join(OUTPUT_KINDS)}")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    outdir = args.out or os.environ.get(ENV_OUT) or "gcbeam_out"
    try:
        spec = load_spec(args.spec, args.grid)
        if args.emit:
            kinds = tuple(k.strip() for k in args.emit.split(",") if k.strip())
            bad = [k for k in kinds if k not in OUTPUT_KINDS]
            if bad:
                raise SpecError(f"unknown outputs {bad}")
            spec.outputs = kinds
        if args.sweep:
            if not args.values:
                raise SpecError("--sweep needs --values")
            try:
                values = [float(v) for v in args.values.split(",")]
            except ValueError:
                raise SpecError("--values must be comma-separated numbers") from None
            spec.sweep = {"modulus": args.sweep, "values": values}
            if not args.emit:
                spec.outputs = ("sweep",)
        files, report = run(spec)
    except (SpecError, A.ConfigError, A.LoadSupportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except IllPosedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    _write(outdir, files, report)
    print("\n".join(report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
