"""From diagrams to dynamical systems.

A diagram compiles to a vector field: a pure evaluator taking a state
vector (one value per stock, in stock order) and a parameter table, and
returning the per-stock rate of change.  For a simple diagram each flow's
rate is its expression evaluated on the linked stock values in slot
order; the field is, per stock, the sum of rates of flows filling it
minus the sum of rates of flows draining it.  For a full-fledged diagram
evaluation runs in a fixed order: sum variables (plain sums of their
linked stocks), then auxiliary variables, then flow rates (each flow
reads its rate variable), then the same per-stock netting, with partial
flows contributing on their single side only.

Open diagrams compile to open systems (the same legs, stock components
only), and open systems compose by the same stock-set pushout as open
diagrams, with the composite field the sum of the component fields pushed
forward into the glued stock set.  Both composition paths use the same
quotient machinery, so they produce identically ordered stock sets.

Parameters are never baked into a compiled system; every evaluation call
takes the parameter table, so one system serves many scenarios.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .compose import (
    Leg,
    OpenDiagram,
    SimpleFoot,
    _correspond,
    _merge_names,
    _offsets,
    _UnionFind,
)
from .core import FullStockFlow, StockFlowDiagram
from .errors import DiagramMismatch, EvalError, UnknownReference
from .expr import Binary, Expression, Unary, eval_expression, format_expression

__all__ = [
    "DynamicalSystem",
    "OpenDynamicalSystem",
    "vector_field",
    "vector_field_full",
    "open_vector_field",
    "pushforward_system",
    "compose_open_systems",
    "equations",
]

Params = Mapping[str, float] | None
FieldFn = Callable[[np.ndarray, Params], np.ndarray]


@dataclass(frozen=True)
class DynamicalSystem:
    stocks: tuple[str, ...]
    field: FieldFn

    def __call__(self, state: Sequence[float], params: Params = None) -> np.ndarray:
        x = np.asarray(state, dtype=float)
        if x.shape != (len(self.stocks),):
            raise DiagramMismatch(
                f"state has shape {x.shape}, system has {len(self.stocks)} stocks"
            )
        return self.field(x, params)


@dataclass(frozen=True)
class OpenDynamicalSystem:
    system: DynamicalSystem
    legs: tuple[Leg, ...]


def vector_field(d: StockFlowDiagram) -> DynamicalSystem:
    """Compile a simple diagram to its vector field."""
    n = len(d.stocks)
    flows = d.flows
    flow_fn = d.flow_fn
    slot_sources = [
        tuple(d.links[l].src for l in d.flow_links(f)) for f in range(len(flows))
    ]

    def field(x: np.ndarray, params: Params = None) -> np.ndarray:
        out = np.zeros(n)
        for f, flow in enumerate(flows):
            try:
                rate = eval_expression(
                    flow_fn[f], [x[s] for s in slot_sources[f]], params=params
                )
            except EvalError as e:
                e.context = f"flow '{flow.name}' ({d.stocks[flow.up]} -> {d.stocks[flow.down]})"
                raise
            out[flow.down] += rate
            out[flow.up] -= rate
        return out

    return DynamicalSystem(tuple(d.stocks), field)


def variable_evaluator(
    d: FullStockFlow,
) -> Callable[[np.ndarray, Params], tuple[list[float], list[float]]]:
    """Evaluator for the sum-variable and auxiliary-variable layers.

    Returns a function of (state, params) yielding (sum variable values,
    auxiliary variable values), each in table order.  Sum variables are
    computed first so auxiliaries may read them.
    """
    sum_members = [d.sum_members(sv) for sv in range(len(d.sum_variables))]
    var_stocks = [d.variable_stock_slots(v) for v in range(len(d.variables))]
    var_sumvars = [d.variable_sumvar_slots(v) for v in range(len(d.variables))]

    def layers(x: np.ndarray, params: Params = None) -> tuple[list[float], list[float]]:
        sum_values = [float(sum(x[s] for s in members)) for members in sum_members]
        var_values = []
        for v in range(len(d.variables)):
            try:
                var_values.append(
                    eval_expression(
                        d.aux_fn[v],
                        [x[s] for s in var_stocks[v]],
                        [sum_values[sv] for sv in var_sumvars[v]],
                        params,
                    )
                )
            except EvalError as e:
                e.context = f"variable '{d.variables[v]}'"
                raise
        return sum_values, var_values

    return layers


def vector_field_full(d: FullStockFlow) -> DynamicalSystem:
    """Compile a full-fledged diagram to its vector field."""
    n = len(d.stocks)
    layers = variable_evaluator(d)

    def field(x: np.ndarray, params: Params = None) -> np.ndarray:
        _, var_values = layers(x, params)
        rates = [var_values[v] for v in d.fv]
        out = np.zeros(n)
        for rec in d.outflows:
            out[rec.stock] += rates[rec.flow]
        for rec in d.inflows:
            out[rec.stock] -= rates[rec.flow]
        return out

    return DynamicalSystem(tuple(d.stocks), field)


def open_vector_field(od: OpenDiagram) -> OpenDynamicalSystem:
    """Compile an open diagram; legs keep their stock components."""
    if od.is_full:
        system = vector_field_full(od.inner)
        legs = tuple(
            Leg(SimpleFoot(leg.foot.stocks), leg.stock_map) for leg in od.legs
        )
    else:
        system = vector_field(od.inner)
        legs = tuple(Leg(leg.foot, leg.stock_map) for leg in od.legs)
    return OpenDynamicalSystem(system, legs)


def pushforward_system(
    stock_map: Sequence[int],
    system: DynamicalSystem,
    target_stocks: Sequence[str] | None = None,
) -> DynamicalSystem:
    """Transport a system along a stock map.

    The new field pulls the target state back (every source stock reads
    its image's value), evaluates, then sums each target stock's preimage
    rates.  `target_stocks` names the target set; by default it is the
    quotient implied by the map, with merged names joined.
    """
    stock_map = tuple(stock_map)
    if len(stock_map) != len(system.stocks):
        raise DiagramMismatch(
            f"map covers {len(stock_map)} of {len(system.stocks)} stocks"
        )
    if target_stocks is None:
        m = max(stock_map, default=-1) + 1
        names = []
        for j in range(m):
            members = [system.stocks[s] for s in range(len(stock_map)) if stock_map[s] == j]
            seen = []
            for name in members:
                if name not in seen:
                    seen.append(name)
            names.append("≡".join(seen) if seen else f"stock{j}")
        target_stocks = names
    else:
        for s, j in enumerate(stock_map):
            if not 0 <= j < len(target_stocks):
                raise UnknownReference(
                    f"stock map sends {s} to {j}, outside the target of "
                    f"{len(target_stocks)} stocks"
                )
    target = tuple(target_stocks)
    indices = np.fromiter(stock_map, dtype=int, count=len(stock_map))

    def field(x: np.ndarray, params: Params = None) -> np.ndarray:
        y = system.field(x[indices], params)
        out = np.zeros(len(target))
        for s, j in enumerate(stock_map):
            out[j] += y[s]
        return out

    return DynamicalSystem(target, field)


def compose_open_systems(
    a: OpenDynamicalSystem,
    a_leg: int,
    b: OpenDynamicalSystem,
    b_leg: int,
    correspondence: Mapping[str, str] | None = None,
) -> OpenDynamicalSystem:
    """Glue two open systems along one leg of each.

    The stock sets are pushed out exactly as for diagrams (same union-find
    order, so the result's stock order matches composing the diagrams and
    then compiling).  The composite field is the sum of the two component
    fields pushed forward along their inclusions.
    """
    if not 0 <= a_leg < len(a.legs):
        raise UnknownReference(f"system has no leg {a_leg}")
    if not 0 <= b_leg < len(b.legs):
        raise UnknownReference(f"system has no leg {b_leg}")
    la, lb = a.legs[a_leg], b.legs[b_leg]
    stock_pairs, _, _ = _correspond(la.foot, lb.foot, correspondence)

    nA, nB = len(a.system.stocks), len(b.system.stocks)
    uf = _UnionFind(nA + nB)
    for i, j in stock_pairs:
        uf.union(la.stock_map[i], nA + lb.stock_map[j])
    quot, n_classes = uf.quotient()

    global_names = list(a.system.stocks) + list(b.system.stocks)
    global_part = [0] * nA + [1] * nB
    stocks = _merge_names(
        uf, n_classes, quot, global_names, global_part, ["a", "b"], False, "stock"
    )

    map_a = quot[:nA]
    map_b = quot[nA:]
    idx_a = np.array(map_a, dtype=int)
    idx_b = np.array(map_b, dtype=int)
    sys_a, sys_b = a.system, b.system

    def field(x: np.ndarray, params: Params = None) -> np.ndarray:
        ya = sys_a.field(x[idx_a], params)
        yb = sys_b.field(x[idx_b], params)
        out = np.zeros(n_classes)
        for s, j in enumerate(map_a):
            out[j] += ya[s]
        for s, j in enumerate(map_b):
            out[j] += yb[s]
        return out

    composite = DynamicalSystem(stocks, field)
    legs = [
        Leg(l.foot, tuple(quot[i] for i in l.stock_map))
        for k, l in enumerate(a.legs)
        if k != a_leg
    ] + [
        Leg(l.foot, tuple(quot[nA + i] for i in l.stock_map))
        for k, l in enumerate(b.legs)
        if k != b_leg
    ]
    return OpenDynamicalSystem(composite, tuple(legs))


# --- human-readable equations ---------------------------------------------


def _term(expr: Expression, link_names: Sequence[str], sumvar_names: Sequence[str] = ()) -> str:
    text = format_expression(expr, link_names, sumvar_names)
    needs_parens = (isinstance(expr, Binary) and expr.op in ("add", "sub")) or (
        isinstance(expr, Unary) and expr.op == "neg"
    )
    return f"({text})" if needs_parens else text


def equations(d: StockFlowDiagram | FullStockFlow) -> str:
    """Render the system as one ``d<stock>/dt = ...`` line per stock.

    Full-fledged diagrams also list each auxiliary variable's definition
    and each sum variable's member sum.
    """
    lines = []
    if isinstance(d, StockFlowDiagram):
        for s, name in enumerate(d.stocks):
            terms: list[str] = []
            for f, flow in enumerate(d.flows):
                rendered = _term(d.flow_fn[f], d.link_source_names(f))
                if flow.down == s:
                    terms.append(f"+ {rendered}")
                if flow.up == s:
                    terms.append(f"- {rendered}")
            rhs = " ".join(terms).lstrip("+ ") if terms else "0"
            lines.append(f"d{name}/dt = {rhs}")
        return "\n".join(lines)

    if not isinstance(d, FullStockFlow):
        raise TypeError(f"not a diagram: {d!r}")

    for sv, name in enumerate(d.sum_variables):
        members = [d.stocks[s] for s in d.sum_members(sv)]
        lines.append(f"{name} = {' + '.join(members) if members else '0'}")
    for v, name in enumerate(d.variables):
        link_names = [d.stocks[s] for s in d.variable_stock_slots(v)]
        sumvar_names = [d.sum_variables[s] for s in d.variable_sumvar_slots(v)]
        lines.append(f"{name} = {format_expression(d.aux_fn[v], link_names, sumvar_names)}")
    for s, name in enumerate(d.stocks):
        terms = []
        for rec in d.outflows:
            if rec.stock == s:
                terms.append(f"+ {d.variables[d.fv[rec.flow]]}")
        for rec in d.inflows:
            if rec.stock == s:
                terms.append(f"- {d.variables[d.fv[rec.flow]]}")
        rhs = " ".join(terms).lstrip("+ ") if terms else "0"
        lines.append(f"d{name}/dt = {rhs}")
    return "\n".join(lines)
