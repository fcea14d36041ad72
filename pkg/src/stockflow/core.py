"""Diagram types: primitive, simple, and full-fledged stock-flow diagrams.

A diagram is a set of finite tables with cross-references by dense 0-based
id (position in the table).  Names appear only at the builder boundary and
in rendered output; after construction everything is id-based.

Three levels:

* `PrimitiveStockFlow`: stocks, flows (each with one upstream and one
  downstream stock), and links feeding stock values to flows.  No rate
  functions.
* `StockFlowDiagram`: a primitive diagram plus one rate expression per
  flow.  Slot ``k`` of a flow's expression reads the source stock of the
  ``k``-th link targeting that flow, in link-table order.
* `FullStockFlow`: adds auxiliary variables (each flow's rate equals the
  value of one variable), sum variables (value = sum of linked stocks),
  and partial flows (a flow may touch a stock on one side only).

Orientation of the full-diagram incidence tables: an `Inflow` record pairs
a flow with its upstream stock (the flow drains it); an `Outflow` record
pairs a flow with its downstream stock (the flow fills it).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence, Union

from .errors import (
    ArityMismatch,
    DanglingFlow,
    DuplicateDownstream,
    DuplicateName,
    DuplicateUpstream,
    MissingFlowFunction,
    UnknownReference,
    ValidationError,
)
from .expr import (
    Binary,
    Const,
    Expression,
    LinkRef,
    Param,
    SumVarRef,
    Unary,
    expression_arity,
    parse_expression,
)

__all__ = [
    "Flow",
    "Link",
    "Inflow",
    "Outflow",
    "VariableLink",
    "SumVariableLink",
    "SumLink",
    "PrimitiveStockFlow",
    "StockFlowDiagram",
    "FullStockFlow",
    "Diagram",
    "build_primitive",
    "build_stock_flow",
    "build_full",
    "validate",
]


class Flow(NamedTuple):
    name: str
    up: int    # stock id the flow drains
    down: int  # stock id the flow fills


class Link(NamedTuple):
    src: int  # stock id whose value the flow's expression reads
    tgt: int  # flow id


class Inflow(NamedTuple):
    stock: int  # upstream stock id: the flow drains it
    flow: int


class Outflow(NamedTuple):
    flow: int
    stock: int  # downstream stock id: the flow fills it


class VariableLink(NamedTuple):
    src: int  # stock id
    tgt: int  # variable id


class SumVariableLink(NamedTuple):
    src: int  # sum-variable id
    tgt: int  # variable id


class SumLink(NamedTuple):
    src: int  # stock id
    tgt: int  # sum-variable id


@dataclass(frozen=True)
class PrimitiveStockFlow:
    stocks: tuple[str, ...]
    flows: tuple[Flow, ...]
    links: tuple[Link, ...]

    def stock_id(self, name: str) -> int:
        try:
            return self.stocks.index(name)
        except ValueError:
            raise UnknownReference(f"unknown stock '{name}'") from None

    def flow_id(self, name: str) -> int:
        for i, f in enumerate(self.flows):
            if f.name == name:
                return i
        raise UnknownReference(f"unknown flow '{name}'")

    def flow_links(self, flow: int) -> tuple[int, ...]:
        """Ids of links targeting `flow`, in link-table order."""
        return tuple(i for i, l in enumerate(self.links) if l.tgt == flow)

    def link_source_names(self, flow: int) -> tuple[str, ...]:
        """Source-stock names of the links targeting `flow`, in slot order."""
        return tuple(self.stocks[self.links[i].src] for i in self.flow_links(flow))


@dataclass(frozen=True)
class StockFlowDiagram:
    primitive: PrimitiveStockFlow
    flow_fn: tuple[Expression, ...]  # indexed by flow id

    @property
    def stocks(self) -> tuple[str, ...]:
        return self.primitive.stocks

    @property
    def flows(self) -> tuple[Flow, ...]:
        return self.primitive.flows

    @property
    def links(self) -> tuple[Link, ...]:
        return self.primitive.links

    def stock_id(self, name: str) -> int:
        return self.primitive.stock_id(name)

    def flow_id(self, name: str) -> int:
        return self.primitive.flow_id(name)

    def flow_links(self, flow: int) -> tuple[int, ...]:
        return self.primitive.flow_links(flow)

    def link_source_names(self, flow: int) -> tuple[str, ...]:
        return self.primitive.link_source_names(flow)


@dataclass(frozen=True)
class FullStockFlow:
    stocks: tuple[str, ...]
    flows: tuple[str, ...]
    variables: tuple[str, ...]
    sum_variables: tuple[str, ...]
    inflows: tuple[Inflow, ...]
    outflows: tuple[Outflow, ...]
    fv: tuple[int, ...]  # flow id -> the variable giving its rate
    variable_links: tuple[VariableLink, ...]
    sum_variable_links: tuple[SumVariableLink, ...]
    sum_links: tuple[SumLink, ...]
    aux_fn: tuple[Expression, ...]  # indexed by variable id

    def stock_id(self, name: str) -> int:
        try:
            return self.stocks.index(name)
        except ValueError:
            raise UnknownReference(f"unknown stock '{name}'") from None

    def upstream(self, flow: int) -> int | None:
        for rec in self.inflows:
            if rec.flow == flow:
                return rec.stock
        return None

    def downstream(self, flow: int) -> int | None:
        for rec in self.outflows:
            if rec.flow == flow:
                return rec.stock
        return None

    def variable_stock_slots(self, var: int) -> tuple[int, ...]:
        """Stock ids feeding `var`, in variable-link table order."""
        return tuple(l.src for l in self.variable_links if l.tgt == var)

    def variable_sumvar_slots(self, var: int) -> tuple[int, ...]:
        """Sum-variable ids feeding `var`, in sum-variable-link table order."""
        return tuple(l.src for l in self.sum_variable_links if l.tgt == var)

    def sum_members(self, sum_variable: int) -> tuple[int, ...]:
        """Stock ids a sum variable adds up, in sum-link table order."""
        return tuple(l.src for l in self.sum_links if l.tgt == sum_variable)


Diagram = Union[PrimitiveStockFlow, StockFlowDiagram, FullStockFlow]


# --- builders -------------------------------------------------------------


def _check_distinct(names: Sequence[str], sort: str) -> None:
    seen = set()
    for n in names:
        if n in seen:
            raise DuplicateName(f"duplicate {sort} name '{n}'")
        seen.add(n)


def _index(names: Sequence[str]) -> dict[str, int]:
    return {n: i for i, n in enumerate(names)}


def _resolve(table: Mapping[str, int], name: str, context: str) -> int:
    try:
        return table[name]
    except KeyError:
        raise UnknownReference(f"{context}: unknown name '{name}'") from None


def build_primitive(
    stocks: Sequence[str],
    flows: Sequence[tuple[str, str, str]],
    links: Sequence[tuple[str, str]] = (),
) -> PrimitiveStockFlow:
    """Build a primitive diagram from names.

    `flows` rows are (name, upstream stock, downstream stock); `links`
    rows are (source stock, target flow).  Ids are assigned in input
    order.
    """
    stock_names = tuple(stocks)
    _check_distinct(stock_names, "stock")
    sid = _index(stock_names)

    flow_names = [row[0] for row in flows]
    _check_distinct(flow_names, "flow")
    flow_rows = tuple(
        Flow(
            name,
            _resolve(sid, up, f"flow '{name}' upstream"),
            _resolve(sid, down, f"flow '{name}' downstream"),
        )
        for name, up, down in flows
    )
    fid = _index(flow_names)

    link_rows = tuple(
        Link(_resolve(sid, src, "link source"), _resolve(fid, tgt, "link target"))
        for src, tgt in links
    )

    d = PrimitiveStockFlow(stock_names, flow_rows, link_rows)
    _raise_first(validate(d))
    return d


def build_stock_flow(
    primitive: PrimitiveStockFlow,
    flow_fn: Mapping[str, Expression | str],
) -> StockFlowDiagram:
    """Attach one rate expression per flow, keyed by flow name.

    A string value is parsed as infix text against the flow's link-source
    stock names, so ``"beta * S * I / N"`` on a flow linked from S then I
    reads those two stocks positionally and leaves beta, N as parameters.
    """
    by_name = dict(flow_fn)
    exprs = []
    for f, flow in enumerate(primitive.flows):
        if flow.name not in by_name:
            raise MissingFlowFunction(f"flow '{flow.name}' has no rate expression")
        expr = by_name.pop(flow.name)
        if isinstance(expr, str):
            expr = parse_expression(expr, link_names=primitive.link_source_names(f))
        exprs.append(expr)
    if by_name:
        stray = next(iter(by_name))
        raise UnknownReference(f"rate expression for unknown flow '{stray}'")

    d = StockFlowDiagram(primitive, tuple(exprs))
    _raise_first(validate(d))
    return d


def build_full(
    stocks: Sequence[str],
    flows: Sequence[tuple[str, str]],
    variables: Sequence[tuple[str, Expression | str]],
    sum_variables: Sequence[str] = (),
    inflows: Sequence[tuple[str, str]] = (),
    outflows: Sequence[tuple[str, str]] = (),
    variable_links: Sequence[tuple[str, str]] = (),
    sum_variable_links: Sequence[tuple[str, str]] = (),
    sum_links: Sequence[tuple[str, str]] = (),
) -> FullStockFlow:
    """Build a full-fledged diagram from names.

    `flows` rows are (flow name, rate-variable name); `variables` rows are
    (name, expression).  `inflows` rows are (upstream stock, flow): the
    flow drains the stock.  `outflows` rows are (flow, downstream stock):
    the flow fills the stock.  A flow listed in only one of the two is a
    partial flow.  String expressions parse against the variable's linked
    stock and sum-variable names.
    """
    stock_names = tuple(stocks)
    _check_distinct(stock_names, "stock")
    sid = _index(stock_names)

    flow_names = tuple(row[0] for row in flows)
    _check_distinct(flow_names, "flow")
    fid = _index(flow_names)

    var_names = tuple(row[0] for row in variables)
    _check_distinct(var_names, "variable")
    vid = _index(var_names)

    sumvar_names = tuple(sum_variables)
    _check_distinct(sumvar_names, "sum variable")
    svid = _index(sumvar_names)

    fv = tuple(_resolve(vid, var, f"flow '{name}' rate variable") for name, var in flows)
    inflow_rows = tuple(
        Inflow(_resolve(sid, s, "inflow stock"), _resolve(fid, f, "inflow flow"))
        for s, f in inflows
    )
    outflow_rows = tuple(
        Outflow(_resolve(fid, f, "outflow flow"), _resolve(sid, s, "outflow stock"))
        for f, s in outflows
    )
    vl_rows = tuple(
        VariableLink(_resolve(sid, s, "variable link source"), _resolve(vid, v, "variable link target"))
        for s, v in variable_links
    )
    svl_rows = tuple(
        SumVariableLink(
            _resolve(svid, sv, "sum-variable link source"),
            _resolve(vid, v, "sum-variable link target"),
        )
        for sv, v in sum_variable_links
    )
    sl_rows = tuple(
        SumLink(_resolve(sid, s, "sum link source"), _resolve(svid, sv, "sum link target"))
        for s, sv in sum_links
    )

    exprs = []
    for v, (name, expr) in enumerate(variables):
        if isinstance(expr, str):
            link_names = tuple(stock_names[l.src] for l in vl_rows if l.tgt == v)
            sv_names = tuple(sumvar_names[l.src] for l in svl_rows if l.tgt == v)
            expr = parse_expression(expr, link_names=link_names, sumvar_names=sv_names)
        exprs.append(expr)

    d = FullStockFlow(
        stocks=stock_names,
        flows=flow_names,
        variables=var_names,
        sum_variables=sumvar_names,
        inflows=inflow_rows,
        outflows=outflow_rows,
        fv=fv,
        variable_links=vl_rows,
        sum_variable_links=svl_rows,
        sum_links=sl_rows,
        aux_fn=tuple(exprs),
    )
    _raise_first(validate(d))
    return d


def _raise_first(report: list[ValidationError]) -> None:
    if report:
        raise report[0]


# --- validation -----------------------------------------------------------


def validate(diagram: Diagram) -> list[ValidationError]:
    """Collect every invariant violation; an empty list means valid."""
    if isinstance(diagram, PrimitiveStockFlow):
        return _validate_primitive(diagram)
    if isinstance(diagram, StockFlowDiagram):
        return _validate_stock_flow(diagram)
    if isinstance(diagram, FullStockFlow):
        return _validate_full(diagram)
    raise TypeError(f"not a diagram: {diagram!r}")


def _dup_errors(names: Sequence[str], sort: str) -> list[ValidationError]:
    errs: list[ValidationError] = []
    seen = set()
    for n in names:
        if n in seen:
            errs.append(DuplicateName(f"duplicate {sort} name '{n}'"))
        seen.add(n)
    return errs


def _validate_primitive(d: PrimitiveStockFlow) -> list[ValidationError]:
    errs = _dup_errors(d.stocks, "stock")
    errs += _dup_errors([f.name for f in d.flows], "flow")
    n_stocks, n_flows = len(d.stocks), len(d.flows)
    for i, f in enumerate(d.flows):
        if not 0 <= f.up < n_stocks:
            errs.append(UnknownReference(f"flow '{f.name}' upstream id {f.up} out of range"))
        if not 0 <= f.down < n_stocks:
            errs.append(UnknownReference(f"flow '{f.name}' downstream id {f.down} out of range"))
    for i, l in enumerate(d.links):
        if not 0 <= l.src < n_stocks:
            errs.append(UnknownReference(f"link {i} source id {l.src} out of range"))
        if not 0 <= l.tgt < n_flows:
            errs.append(UnknownReference(f"link {i} target id {l.tgt} out of range"))
    return errs


def _expression_errors(
    expr: Expression, owner: str, n_links: int, n_sumvars: int | None
) -> list[ValidationError]:
    """Arity and finiteness checks; `n_sumvars` None forbids SumVarRef."""
    errs: list[ValidationError] = []
    link_arity, sumvar_arity = expression_arity(expr)
    if link_arity > n_links:
        errs.append(
            ArityMismatch(
                f"{owner}: expression reads link slot {link_arity - 1} "
                f"but only {n_links} links target it"
            )
        )
    if n_sumvars is None:
        if sumvar_arity > 0:
            errs.append(
                ArityMismatch(f"{owner}: sum-variable references are only valid on auxiliary variables")
            )
    elif sumvar_arity > n_sumvars:
        errs.append(
            ArityMismatch(
                f"{owner}: expression reads sum-variable slot {sumvar_arity - 1} "
                f"but only {n_sumvars} sum variables feed it"
            )
        )
    for node in _walk(expr):
        if isinstance(node, Const) and not math.isfinite(node.value):
            errs.append(ValidationError(f"{owner}: non-finite constant {node.value!r}"))
        elif isinstance(node, Unary) and node.op not in ("neg", "exp", "log"):
            errs.append(ValidationError(f"{owner}: unknown unary operator {node.op!r}"))
        elif isinstance(node, Binary) and node.op not in (
            "add", "sub", "mul", "div", "pow", "min", "max",
        ):
            errs.append(ValidationError(f"{owner}: unknown binary operator {node.op!r}"))
    return errs


def _walk(expr: Expression):
    stack = [expr]
    while stack:
        e = stack.pop()
        yield e
        if isinstance(e, Unary):
            stack.append(e.child)
        elif isinstance(e, Binary):
            stack.append(e.left)
            stack.append(e.right)


def _validate_stock_flow(d: StockFlowDiagram) -> list[ValidationError]:
    errs = _validate_primitive(d.primitive)
    if len(d.flow_fn) != len(d.flows):
        errs.append(
            MissingFlowFunction(
                f"{len(d.flows)} flows but {len(d.flow_fn)} rate expressions"
            )
        )
        return errs
    for f, flow in enumerate(d.flows):
        n_links = len(d.flow_links(f))
        errs += _expression_errors(d.flow_fn[f], f"flow '{flow.name}'", n_links, None)
    return errs


def _validate_full(d: FullStockFlow) -> list[ValidationError]:
    errs = _dup_errors(d.stocks, "stock")
    errs += _dup_errors(d.flows, "flow")
    errs += _dup_errors(d.variables, "variable")
    errs += _dup_errors(d.sum_variables, "sum variable")

    n_stocks, n_flows = len(d.stocks), len(d.flows)
    n_vars, n_sumvars = len(d.variables), len(d.sum_variables)

    def check_ref(value: int, n: int, what: str) -> None:
        if not 0 <= value < n:
            errs.append(UnknownReference(f"{what} id {value} out of range"))

    if len(d.fv) != n_flows:
        errs.append(MissingFlowFunction(f"{n_flows} flows but {len(d.fv)} rate-variable entries"))
    for f, v in enumerate(d.fv):
        check_ref(v, n_vars, f"flow '{d.flows[f]}' rate variable" if f < n_flows else "rate variable")

    seen_up: set[int] = set()
    for rec in d.inflows:
        check_ref(rec.stock, n_stocks, "inflow stock")
        check_ref(rec.flow, n_flows, "inflow flow")
        if rec.flow in seen_up:
            name = d.flows[rec.flow] if 0 <= rec.flow < n_flows else rec.flow
            errs.append(DuplicateUpstream(f"flow '{name}' has more than one upstream stock"))
        seen_up.add(rec.flow)
    seen_down: set[int] = set()
    for rec in d.outflows:
        check_ref(rec.flow, n_flows, "outflow flow")
        check_ref(rec.stock, n_stocks, "outflow stock")
        if rec.flow in seen_down:
            name = d.flows[rec.flow] if 0 <= rec.flow < n_flows else rec.flow
            errs.append(DuplicateDownstream(f"flow '{name}' has more than one downstream stock"))
        seen_down.add(rec.flow)
    for f in range(n_flows):
        if f not in seen_up and f not in seen_down:
            errs.append(DanglingFlow(f"flow '{d.flows[f]}' touches no stock"))

    for l in d.variable_links:
        check_ref(l.src, n_stocks, "variable link source")
        check_ref(l.tgt, n_vars, "variable link target")
    for l in d.sum_variable_links:
        check_ref(l.src, n_sumvars, "sum-variable link source")
        check_ref(l.tgt, n_vars, "sum-variable link target")
    for l in d.sum_links:
        check_ref(l.src, n_stocks, "sum link source")
        check_ref(l.tgt, n_sumvars, "sum link target")

    if len(d.aux_fn) != n_vars:
        errs.append(
            MissingFlowFunction(f"{n_vars} variables but {len(d.aux_fn)} expressions")
        )
        return errs
    for v in range(n_vars):
        n_links = sum(1 for l in d.variable_links if l.tgt == v)
        n_sv = sum(1 for l in d.sum_variable_links if l.tgt == v)
        errs += _expression_errors(d.aux_fn[v], f"variable '{d.variables[v]}'", n_links, n_sv)
    return errs
