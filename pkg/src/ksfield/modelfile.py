"""Model-file ingestion: one YAML document describing a field theory setup.

A model file declares the dimensions, a Lagrangian and/or Hamiltonian in
the expression DSL, named symmetry candidates, named solutions (analytic
maps or solver grids), the sampling box, seed and tolerance overrides.
See README.md for the full schema.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import yaml

from .coords import VarTable
from .expr import Expr, ParseError, parse
from .hamiltonian import HamiltonianModel
from .lagrangian import LagrangianModel
from .solver import Axis, GridSpec
from .symmetry import SymmetryCandidate

DEFAULT_TOLERANCES = {
    "cartan": 1e-9,          # Lie-derivative residuals of the symmetry checks
    "noether": 1e-9,         # current construction and defining relation
    "conservation": 1e-9,    # analytic divergence along solutions
    "sopde": 1e-10,          # second-order condition residual
    "kvector": 1e-12,        # field-equation residual of constructed fields
    "closedness": 1e-10,     # curl of gauge one-forms
    "gauge": 1e-9,           # decomposition reconstruction
    "transport": 1e-10,      # residual of transported solutions
    "inverse": 1e-9,         # declared-inverse round trip
    "hessian": 1e-10,        # relative regularity threshold
}


class ModelFileError(ValueError):
    pass


@dataclass
class AnalyticSolution:
    side: str                      # "lagrangian" | "hamiltonian"
    components: tuple              # n expressions in t
    momenta: Optional[tuple] = None  # k x n expressions in t (hamiltonian side)
    t_box: Optional[list] = None


@dataclass
class GridSolution:
    grid: GridSpec
    q0: Optional[list] = None      # k = 1 initial data
    v0: Optional[list] = None
    initial: Optional[tuple] = None       # k = 2: field on the periodic axis
    initial_rate: Optional[tuple] = None  # k = 2: its evolution rate


@dataclass
class ModelSpec:
    table: VarTable
    lagrangian: Optional[LagrangianModel]
    hamiltonian: Optional[HamiltonianModel]
    symmetries: dict
    solutions: dict
    box: dict
    seed: int
    samples: int
    tolerances: dict

    def tol(self, key: str) -> float:
        return self.tolerances[key]


def _require(mapping, key, context):
    if key not in mapping:
        raise ModelFileError(f"{context}: missing required key '{key}'")
    return mapping[key]


def _parse_expr(source, names, context) -> Expr:
    if not isinstance(source, str):
        raise ModelFileError(f"{context}: expected a DSL string, got {source!r}")
    try:
        return parse(source, names)
    except ParseError as exc:
        raise ModelFileError(f"{context}: {exc}") from exc


def _parse_exprs(sources, names, context, count=None) -> tuple:
    if not isinstance(sources, (list, tuple)):
        raise ModelFileError(f"{context}: expected a list of DSL strings")
    if count is not None and len(sources) != count:
        raise ModelFileError(f"{context}: expected {count} entries, got {len(sources)}")
    return tuple(
        _parse_expr(src, names, f"{context}[{idx}]") for idx, src in enumerate(sources)
    )


def _float(value, context) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ModelFileError(f"{context}: expected a number, got {value!r}") from None


def _load_symmetry(name, raw, table: VarTable) -> SymmetryCandidate:
    context = f"symmetries.{name}"
    if not isinstance(raw, dict):
        raise ModelFileError(f"{context}: expected a mapping")
    kind = _require(raw, "kind", context)
    side = raw.get("side")
    if side not in (None, "lagrangian", "hamiltonian"):
        raise ModelFileError(f"{context}: unknown side {side!r}")

    gauge = raw.get("gauge")
    if gauge is not None:
        gauge = _parse_exprs(gauge, table.q_names, f"{context}.gauge", table.k)
    zeta = raw.get("zeta")

    if kind == "vector-field-on-q":
        comps = _parse_exprs(
            _require(raw, "components", context), table.q_names, f"{context}.components", table.n
        )
        if zeta is not None:
            zeta = _parse_exprs(zeta, table.momentum_chart, f"{context}.zeta", table.k)
        return SymmetryCandidate("vector-field-on-q", comps, side, gauge=gauge, zeta=zeta)

    if kind == "vector-field":
        if side is None:
            raise ModelFileError(f"{context}: general vector fields need a side")
        chart = table.chart(side)
        comps = _parse_exprs(
            _require(raw, "components", context), chart, f"{context}.components", len(chart)
        )
        if zeta is not None:
            zeta = _parse_exprs(zeta, chart, f"{context}.zeta", table.k)
        return SymmetryCandidate("vector-field", comps, side, gauge=gauge, zeta=zeta)

    if kind == "diffeomorphism":
        if side is None:
            raise ModelFileError(f"{context}: diffeomorphisms need a side")
        chart = table.chart(side)
        comps = _parse_exprs(
            _require(raw, "components", context), chart, f"{context}.components", len(chart)
        )
        inverse = _parse_exprs(
            _require(raw, "inverse", context), chart, f"{context}.inverse", len(chart)
        )
        return SymmetryCandidate("diffeomorphism", comps, side, inverse=inverse)

    raise ModelFileError(f"{context}: unknown kind {kind!r}")


def _load_solution(name, raw, table: VarTable):
    context = f"solutions.{name}"
    if not isinstance(raw, dict):
        raise ModelFileError(f"{context}: expected a mapping")
    kind = _require(raw, "kind", context)

    if kind == "analytic":
        side = raw.get("side", "lagrangian")
        comps = _parse_exprs(
            _require(raw, "components", context), table.t_names, f"{context}.components", table.n
        )
        momenta = None
        if side == "hamiltonian":
            rows = _require(raw, "momenta", context)
            if not isinstance(rows, (list, tuple)) or len(rows) != table.k:
                raise ModelFileError(f"{context}.momenta: expected {table.k} rows")
            momenta = tuple(
                _parse_exprs(row, table.t_names, f"{context}.momenta[{A}]", table.n)
                for A, row in enumerate(rows)
            )
        elif side != "lagrangian":
            raise ModelFileError(f"{context}: unknown side {side!r}")
        t_box = raw.get("t_box")
        if t_box is not None:
            if len(t_box) != table.k:
                raise ModelFileError(f"{context}.t_box: expected {table.k} intervals")
            t_box = [
                (_float(lo, context), _float(hi, context)) for lo, hi in t_box
            ]
        return AnalyticSolution(side, comps, momenta, t_box)

    if kind == "grid":
        axes_raw = _require(raw, "axes", context)
        if not isinstance(axes_raw, (list, tuple)) or len(axes_raw) != table.k:
            raise ModelFileError(f"{context}.axes: expected {table.k} axes")
        try:
            grid = GridSpec(
                tuple(
                    Axis(_float(a[0], context), _float(a[1], context), _float(a[2], context))
                    for a in axes_raw
                )
            )
        except (ValueError, IndexError) as exc:
            raise ModelFileError(f"{context}.axes: {exc}") from exc
        if table.k == 1:
            q0 = [_float(x, context) for x in _require(raw, "q0", context)]
            v0 = [_float(x, context) for x in _require(raw, "v0", context)]
            if len(q0) != table.n or len(v0) != table.n:
                raise ModelFileError(f"{context}: q0/v0 must have {table.n} entries")
            return GridSolution(grid, q0=q0, v0=v0)
        initial = _parse_exprs(
            _require(raw, "initial", context), ("t2",), f"{context}.initial", table.n
        )
        rate = _parse_exprs(
            _require(raw, "initial_rate", context), ("t2",), f"{context}.initial_rate", table.n
        )
        return GridSolution(grid, initial=initial, initial_rate=rate)

    raise ModelFileError(f"{context}: unknown kind {kind!r}")


def load_model(path) -> ModelSpec:
    try:
        with open(path) as handle:
            raw = yaml.safe_load(handle)
    except FileNotFoundError:
        raise ModelFileError(f"model file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ModelFileError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ModelFileError(f"{path}: expected a mapping at the top level")

    n = raw.get("n")
    k = raw.get("k")
    if not isinstance(n, int) or not isinstance(k, int):
        raise ModelFileError("n and k must be positive integers")
    try:
        table = VarTable(n, k)
    except ValueError as exc:
        raise ModelFileError(str(exc)) from exc

    lagrangian = None
    if "lagrangian" in raw:
        expr = _parse_expr(raw["lagrangian"], table.velocity_chart, "lagrangian")
        lagrangian = LagrangianModel(table, expr)
    hamiltonian = None
    if "hamiltonian" in raw:
        expr = _parse_expr(raw["hamiltonian"], table.momentum_chart, "hamiltonian")
        hamiltonian = HamiltonianModel(table, expr)
    if lagrangian is None and hamiltonian is None:
        raise ModelFileError("model declares neither a lagrangian nor a hamiltonian")

    box = {}
    for name, interval in (raw.get("box") or {}).items():
        if name not in table.velocity_chart and name not in table.momentum_chart:
            raise ModelFileError(f"box: unknown coordinate {name!r}")
        lo, hi = interval
        box[name] = (_float(lo, "box"), _float(hi, "box"))

    tolerances = dict(DEFAULT_TOLERANCES)
    for key, value in (raw.get("tolerances") or {}).items():
        if key not in DEFAULT_TOLERANCES:
            raise ModelFileError(f"tolerances: unknown key {key!r}")
        tolerances[key] = _float(value, f"tolerances.{key}")

    symmetries = {
        str(name): _load_symmetry(name, value, table)
        for name, value in (raw.get("symmetries") or {}).items()
    }
    solutions = {
        str(name): _load_solution(name, value, table)
        for name, value in (raw.get("solutions") or {}).items()
    }

    seed = raw.get("seed", 0)
    samples = raw.get("samples", 100)
    if not isinstance(seed, int) or not isinstance(samples, int) or samples < 1:
        raise ModelFileError("seed must be an integer and samples a positive integer")

    return ModelSpec(
        table=table,
        lagrangian=lagrangian,
        hamiltonian=hamiltonian,
        symmetries=symmetries,
        solutions=solutions,
        box=box,
        seed=seed,
        samples=samples,
        tolerances=tolerances,
    )
