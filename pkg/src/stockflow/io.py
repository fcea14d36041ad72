"""File formats: versioned JSON documents, CSV trajectories, DOT export.

Every document has a top-level ``kind`` ("primitive", "stockflow",
"full", "open", "uwd", "morphism", "scenario") and ``version: 1``.
Bodies refer to everything by name; dense internal ids never appear.
Flow and variable formulas are stored as infix strings and parsed back
through the diagram's link tables, so a hand-edited file stays writable.

Two flows reading the same stock through parallel links format to the
same identifier, so reloading collapses their slots onto the first
matching link.  Link values only depend on the source stock, so the
collapsed form evaluates identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Mapping, Sequence

from .compose import Box, FullFoot, OpenDiagram, SimpleFoot, UWD, make_open
from .core import (
    FullStockFlow,
    PrimitiveStockFlow,
    StockFlowDiagram,
    build_full,
    build_primitive,
    build_stock_flow,
)
from .errors import (
    DomainMismatch,
    SchemaViolation,
    UnknownReference,
    VersionMismatch,
)
from .expr import format_expression
from .integrate import Scenario, Table, Trajectory
from .morphism import DiagramMorphism

FORMAT_VERSION = 1

KINDS = ("primitive", "stockflow", "full", "open", "uwd", "morphism", "scenario")


@dataclass(frozen=True)
class MorphismSpec:
    """A diagram morphism by name, independent of any loaded diagram.

    Stocks and flows map name to name; links are anonymous rows, so the
    link map stays positional (source link index to target link index).
    """

    stock_map: tuple[tuple[str, str], ...]
    flow_map: tuple[tuple[str, str], ...]
    link_map: tuple[int, ...]

    def resolve(
        self, src: StockFlowDiagram, dst: StockFlowDiagram
    ) -> DiagramMorphism:
        """Bind the named maps against concrete source and target diagrams."""
        stock_pairs = dict(self.stock_map)
        flow_pairs = dict(self.flow_map)
        for name in stock_pairs:
            if name not in src.stocks:
                raise UnknownReference(f"unknown source stock '{name}'")
        for name in flow_pairs:
            if name not in [f.name for f in src.flows]:
                raise UnknownReference(f"unknown source flow '{name}'")
        stock_map = []
        for name in src.stocks:
            if name not in stock_pairs:
                raise DomainMismatch(f"no image given for stock '{name}'")
            stock_map.append(dst.stock_id(stock_pairs[name]))
        flow_map = []
        for f in src.flows:
            if f.name not in flow_pairs:
                raise DomainMismatch(f"no image given for flow '{f.name}'")
            flow_map.append(dst.flow_id(flow_pairs[f.name]))
        if len(self.link_map) != len(src.links):
            raise DomainMismatch(
                f"link map covers {len(self.link_map)} links, "
                f"source has {len(src.links)}"
            )
        for i in self.link_map:
            if not 0 <= i < len(dst.links):
                raise DomainMismatch(f"link image {i} out of range")
        return DiagramMorphism(
            tuple(stock_map), tuple(flow_map), tuple(self.link_map)
        )


def morphism_spec(
    alpha: DiagramMorphism, src: StockFlowDiagram, dst: StockFlowDiagram
) -> MorphismSpec:
    """Express a resolved morphism by name so it can be saved."""
    return MorphismSpec(
        stock_map=tuple(
            (src.stocks[i], dst.stocks[j]) for i, j in enumerate(alpha.stock_map)
        ),
        flow_map=tuple(
            (src.flows[i].name, dst.flows[j].name)
            for i, j in enumerate(alpha.flow_map)
        ),
        link_map=tuple(alpha.link_map),
    )


# --- schema helpers -------------------------------------------------------


def _obj(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaViolation("expected an object", path)
    return value


def _arr(value, path: str) -> list:
    if not isinstance(value, list):
        raise SchemaViolation("expected an array", path)
    return value


def _str(value, path: str) -> str:
    if not isinstance(value, str):
        raise SchemaViolation("expected a string", path)
    return value


def _num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaViolation("expected a number", path)
    return float(value)


def _int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaViolation("expected an integer", path)
    return value


def _fields(obj: dict, path: str, required: Sequence[str], optional: Sequence[str] = ()):
    for key in obj:
        if key not in required and key not in optional:
            raise SchemaViolation(f"unknown field '{key}'", path)
    for key in required:
        if key not in obj:
            raise SchemaViolation("missing required field", f"{path}/{key}")


def _str_list(value, path: str) -> list[str]:
    return [_str(v, f"{path}/{i}") for i, v in enumerate(_arr(value, path))]


def _name_map(value, path: str) -> dict[str, str]:
    obj = _obj(value, path)
    return {k: _str(v, f"{path}/{k}") for k, v in obj.items()}


def _num_map(value, path: str) -> dict[str, float]:
    obj = _obj(value, path)
    return {k: _num(v, f"{path}/{k}") for k, v in obj.items()}


# --- document -> object ---------------------------------------------------


def _load_primitive_body(doc: dict, path: str) -> PrimitiveStockFlow:
    _fields(doc, path, ["kind", "version", "stocks"], ["flows", "links"])
    stocks = _str_list(doc["stocks"], f"{path}/stocks")
    flows = []
    for i, entry in enumerate(_arr(doc.get("flows", []), f"{path}/flows")):
        p = f"{path}/flows/{i}"
        _fields(_obj(entry, p), p, ["name", "upstream", "downstream"])
        flows.append(
            (
                _str(entry["name"], f"{p}/name"),
                _str(entry["upstream"], f"{p}/upstream"),
                _str(entry["downstream"], f"{p}/downstream"),
            )
        )
    links = _link_rows(doc.get("links", []), f"{path}/links", "source", "flow")
    return build_primitive(stocks, flows, links)


def _link_rows(value, path: str, first: str, second: str) -> list[tuple[str, str]]:
    rows = []
    for i, entry in enumerate(_arr(value, path)):
        p = f"{path}/{i}"
        _fields(_obj(entry, p), p, [first, second])
        rows.append((_str(entry[first], f"{p}/{first}"), _str(entry[second], f"{p}/{second}")))
    return rows


def _load_stockflow_body(doc: dict, path: str) -> StockFlowDiagram:
    _fields(doc, path, ["kind", "version", "stocks"], ["flows", "links"])
    stocks = _str_list(doc["stocks"], f"{path}/stocks")
    flows = []
    functions = {}
    for i, entry in enumerate(_arr(doc.get("flows", []), f"{path}/flows")):
        p = f"{path}/flows/{i}"
        _fields(_obj(entry, p), p, ["name", "upstream", "downstream", "function"])
        name = _str(entry["name"], f"{p}/name")
        flows.append(
            (
                name,
                _str(entry["upstream"], f"{p}/upstream"),
                _str(entry["downstream"], f"{p}/downstream"),
            )
        )
        functions[name] = _str(entry["function"], f"{p}/function")
    links = _link_rows(doc.get("links", []), f"{path}/links", "source", "flow")
    return build_stock_flow(build_primitive(stocks, flows, links), functions)


def _load_full_body(doc: dict, path: str) -> FullStockFlow:
    _fields(
        doc,
        path,
        ["kind", "version", "stocks"],
        [
            "flows",
            "variables",
            "sum_variables",
            "inflows",
            "outflows",
            "variable_links",
            "sum_variable_links",
            "sum_links",
        ],
    )
    stocks = _str_list(doc["stocks"], f"{path}/stocks")
    flows = []
    for i, entry in enumerate(_arr(doc.get("flows", []), f"{path}/flows")):
        p = f"{path}/flows/{i}"
        _fields(_obj(entry, p), p, ["name", "variable"])
        flows.append(
            (_str(entry["name"], f"{p}/name"), _str(entry["variable"], f"{p}/variable"))
        )
    variables = []
    for i, entry in enumerate(_arr(doc.get("variables", []), f"{path}/variables")):
        p = f"{path}/variables/{i}"
        _fields(_obj(entry, p), p, ["name", "function"])
        variables.append(
            (_str(entry["name"], f"{p}/name"), _str(entry["function"], f"{p}/function"))
        )
    return build_full(
        stocks=stocks,
        flows=flows,
        variables=variables,
        sum_variables=_str_list(doc.get("sum_variables", []), f"{path}/sum_variables"),
        inflows=_link_rows(doc.get("inflows", []), f"{path}/inflows", "stock", "flow"),
        outflows=_link_rows(doc.get("outflows", []), f"{path}/outflows", "flow", "stock"),
        variable_links=_link_rows(
            doc.get("variable_links", []), f"{path}/variable_links", "stock", "variable"
        ),
        sum_variable_links=_link_rows(
            doc.get("sum_variable_links", []),
            f"{path}/sum_variable_links",
            "sum_variable",
            "variable",
        ),
        sum_links=_link_rows(
            doc.get("sum_links", []), f"{path}/sum_links", "stock", "sum_variable"
        ),
    )


def _load_open_body(doc: dict, path: str) -> OpenDiagram:
    _fields(doc, path, ["kind", "version", "diagram", "feet"])
    inner_doc = _obj(doc["diagram"], f"{path}/diagram")
    inner = _load_document(inner_doc, f"{path}/diagram")
    if not isinstance(inner, (StockFlowDiagram, FullStockFlow)):
        raise SchemaViolation(
            "inner diagram must be kind 'stockflow' or 'full'", f"{path}/diagram/kind"
        )
    feet = []
    for i, entry in enumerate(_arr(doc["feet"], f"{path}/feet")):
        p = f"{path}/feet/{i}"
        _fields(
            _obj(entry, p),
            p,
            ["stocks"],
            ["sum_variables", "sum_links", "map"],
        )
        stocks = tuple(_str_list(entry["stocks"], f"{p}/stocks"))
        names = _name_map(entry.get("map", {}), f"{p}/map")
        if "sum_variables" in entry or "sum_links" in entry:
            sum_variables = tuple(
                _str_list(entry.get("sum_variables", []), f"{p}/sum_variables")
            )
            sum_links = []
            for j, row in enumerate(_arr(entry.get("sum_links", []), f"{p}/sum_links")):
                q = f"{p}/sum_links/{j}"
                _fields(_obj(row, q), q, ["stock", "sum_variable"])
                s_name = _str(row["stock"], f"{q}/stock")
                v_name = _str(row["sum_variable"], f"{q}/sum_variable")
                if s_name not in stocks:
                    raise SchemaViolation(f"unknown foot stock '{s_name}'", f"{q}/stock")
                if v_name not in sum_variables:
                    raise SchemaViolation(
                        f"unknown foot sum variable '{v_name}'", f"{q}/sum_variable"
                    )
                sum_links.append((stocks.index(s_name), sum_variables.index(v_name)))
            foot = FullFoot(stocks, sum_variables, tuple(sum_links))
            feet.append((foot, names))
        else:
            feet.append((SimpleFoot(stocks), names))
    return make_open(inner, feet)


def _load_uwd_body(doc: dict, path: str) -> UWD:
    _fields(doc, path, ["kind", "version", "junctions", "boxes"], ["outer_ports"])
    junctions = _str_list(doc["junctions"], f"{path}/junctions")
    if len(set(junctions)) != len(junctions):
        raise SchemaViolation("duplicate junction names", f"{path}/junctions")
    index = {name: j for j, name in enumerate(junctions)}

    def resolve(name: str, p: str) -> int:
        if name not in index:
            raise SchemaViolation(f"unknown junction '{name}'", p)
        return index[name]

    boxes = []
    for i, entry in enumerate(_arr(doc["boxes"], f"{path}/boxes")):
        p = f"{path}/boxes/{i}"
        _fields(_obj(entry, p), p, ["name", "ports"])
        ports = tuple(
            resolve(_str(v, f"{p}/ports/{j}"), f"{p}/ports/{j}")
            for j, v in enumerate(_arr(entry["ports"], f"{p}/ports"))
        )
        boxes.append(Box(_str(entry["name"], f"{p}/name"), ports))
    outer = tuple(
        resolve(_str(v, f"{path}/outer_ports/{j}"), f"{path}/outer_ports/{j}")
        for j, v in enumerate(_arr(doc.get("outer_ports", []), f"{path}/outer_ports"))
    )
    return UWD(tuple(boxes), len(junctions), outer)


def _load_morphism_body(doc: dict, path: str) -> MorphismSpec:
    _fields(doc, path, ["kind", "version", "stock_map", "flow_map", "link_map"])
    links = tuple(
        _int(v, f"{path}/link_map/{i}")
        for i, v in enumerate(_arr(doc["link_map"], f"{path}/link_map"))
    )
    return MorphismSpec(
        stock_map=tuple(_name_map(doc["stock_map"], f"{path}/stock_map").items()),
        flow_map=tuple(_name_map(doc["flow_map"], f"{path}/flow_map").items()),
        link_map=links,
    )


def _load_scenario_body(doc: dict, path: str) -> Scenario:
    _fields(
        doc,
        path,
        ["kind", "version", "initial", "t1", "dt"],
        ["params", "t0", "method", "save_every"],
    )
    return Scenario(
        initial=_num_map(doc["initial"], f"{path}/initial"),
        params=_num_map(doc.get("params", {}), f"{path}/params"),
        t0=_num(doc.get("t0", 0.0), f"{path}/t0"),
        t1=_num(doc["t1"], f"{path}/t1"),
        dt=_num(doc["dt"], f"{path}/dt"),
        method=_str(doc.get("method", "rk4"), f"{path}/method"),
        save_every=_int(doc.get("save_every", 1), f"{path}/save_every"),
    )


_LOADERS = {
    "primitive": _load_primitive_body,
    "stockflow": _load_stockflow_body,
    "full": _load_full_body,
    "open": _load_open_body,
    "uwd": _load_uwd_body,
    "morphism": _load_morphism_body,
    "scenario": _load_scenario_body,
}


def _load_document(doc: dict, path: str = ""):
    _obj(doc, path or "/")
    if "kind" not in doc:
        raise SchemaViolation("missing required field", f"{path}/kind")
    kind = _str(doc["kind"], f"{path}/kind")
    if kind not in KINDS:
        raise SchemaViolation(f"unknown kind '{kind}'", f"{path}/kind")
    if "version" not in doc:
        raise SchemaViolation("missing required field", f"{path}/version")
    version = doc["version"]
    if version != FORMAT_VERSION:
        raise VersionMismatch(
            f"file version {version!r} not supported, expected {FORMAT_VERSION}"
        )
    return _LOADERS[kind](doc, path)


def loads(text: str):
    """Parse one JSON document into its typed object."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaViolation(f"not valid JSON: {e}", "") from None
    return _load_document(doc)


def load(path: str | Path):
    """Read a diagram, pattern, morphism, or scenario file."""
    return loads(Path(path).read_text())


# --- object -> document ---------------------------------------------------


def _primitive_doc(d: PrimitiveStockFlow) -> dict:
    return {
        "kind": "primitive",
        "version": FORMAT_VERSION,
        "stocks": list(d.stocks),
        "flows": [
            {"name": f.name, "upstream": d.stocks[f.up], "downstream": d.stocks[f.down]}
            for f in d.flows
        ],
        "links": [
            {"source": d.stocks[l.src], "flow": d.flows[l.tgt].name} for l in d.links
        ],
    }


def _stockflow_doc(d: StockFlowDiagram) -> dict:
    doc = _primitive_doc(d.primitive)
    doc["kind"] = "stockflow"
    for f, entry in enumerate(doc["flows"]):
        entry["function"] = format_expression(
            d.flow_fn[f], link_names=d.link_source_names(f)
        )
    return doc


def _full_doc(d: FullStockFlow) -> dict:
    variables = []
    for v, name in enumerate(d.variables):
        link_names = [d.stocks[s] for s in d.variable_stock_slots(v)]
        sumvar_names = [d.sum_variables[sv] for sv in d.variable_sumvar_slots(v)]
        variables.append(
            {
                "name": name,
                "function": format_expression(
                    d.aux_fn[v], link_names=link_names, sumvar_names=sumvar_names
                ),
            }
        )
    return {
        "kind": "full",
        "version": FORMAT_VERSION,
        "stocks": list(d.stocks),
        "flows": [
            {"name": f, "variable": d.variables[d.fv[i]]}
            for i, f in enumerate(d.flows)
        ],
        "variables": variables,
        "sum_variables": list(d.sum_variables),
        "inflows": [
            {"stock": d.stocks[r.stock], "flow": d.flows[r.flow]} for r in d.inflows
        ],
        "outflows": [
            {"flow": d.flows[r.flow], "stock": d.stocks[r.stock]} for r in d.outflows
        ],
        "variable_links": [
            {"stock": d.stocks[r.src], "variable": d.variables[r.tgt]}
            for r in d.variable_links
        ],
        "sum_variable_links": [
            {"sum_variable": d.sum_variables[r.src], "variable": d.variables[r.tgt]}
            for r in d.sum_variable_links
        ],
        "sum_links": [
            {"stock": d.stocks[r.src], "sum_variable": d.sum_variables[r.tgt]}
            for r in d.sum_links
        ],
    }


def _open_doc(od: OpenDiagram) -> dict:
    inner = od.inner
    feet = []
    for leg in od.legs:
        if isinstance(leg.foot, SimpleFoot):
            elements = leg.foot.elements
            entry = {
                "stocks": list(elements),
                "map": {e: inner.stocks[s] for e, s in zip(elements, leg.stock_map)},
            }
        else:
            entry = {
                "stocks": list(leg.foot.stocks),
                "map": {
                    e: inner.stocks[s]
                    for e, s in zip(leg.foot.stocks, leg.stock_map)
                },
            }
            if leg.foot.sum_variables:
                entry["sum_variables"] = list(leg.foot.sum_variables)
                entry["map"].update(
                    {
                        e: inner.sum_variables[v]
                        for e, v in zip(leg.foot.sum_variables, leg.sumvar_map)
                    }
                )
            if leg.foot.sum_links:
                entry["sum_links"] = [
                    {
                        "stock": leg.foot.stocks[s],
                        "sum_variable": leg.foot.sum_variables[v],
                    }
                    for s, v in leg.foot.sum_links
                ]
        feet.append(entry)
    if isinstance(inner, FullStockFlow):
        inner_doc = _full_doc(inner)
    else:
        inner_doc = _stockflow_doc(inner)
    return {
        "kind": "open",
        "version": FORMAT_VERSION,
        "diagram": inner_doc,
        "feet": feet,
    }


def _uwd_doc(pattern: UWD) -> dict:
    junctions = [f"j{j}" for j in range(pattern.n_junctions)]
    return {
        "kind": "uwd",
        "version": FORMAT_VERSION,
        "junctions": junctions,
        "boxes": [
            {"name": b.name, "ports": [junctions[j] for j in b.ports]}
            for b in pattern.boxes
        ],
        "outer_ports": [junctions[j] for j in pattern.outer_ports],
    }


def _morphism_doc(spec: MorphismSpec) -> dict:
    return {
        "kind": "morphism",
        "version": FORMAT_VERSION,
        "stock_map": dict(spec.stock_map),
        "flow_map": dict(spec.flow_map),
        "link_map": list(spec.link_map),
    }


def _scenario_doc(s: Scenario) -> dict:
    return {
        "kind": "scenario",
        "version": FORMAT_VERSION,
        "initial": {k: float(v) for k, v in s.initial.items()},
        "params": {k: float(v) for k, v in s.params.items()},
        "t0": float(s.t0),
        "t1": float(s.t1),
        "dt": float(s.dt),
        "method": s.method,
        "save_every": s.save_every,
    }


def dumps(obj) -> str:
    """Serialize a supported object to its JSON document text."""
    if isinstance(obj, StockFlowDiagram):
        doc = _stockflow_doc(obj)
    elif isinstance(obj, PrimitiveStockFlow):
        doc = _primitive_doc(obj)
    elif isinstance(obj, FullStockFlow):
        doc = _full_doc(obj)
    elif isinstance(obj, OpenDiagram):
        doc = _open_doc(obj)
    elif isinstance(obj, UWD):
        doc = _uwd_doc(obj)
    elif isinstance(obj, MorphismSpec):
        doc = _morphism_doc(obj)
    elif isinstance(obj, Scenario):
        doc = _scenario_doc(obj)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def save(obj, path: str | Path) -> None:
    """Write a supported object as a JSON document file."""
    Path(path).write_text(dumps(obj))


# --- CSV ------------------------------------------------------------------


def write_csv(result: Trajectory | Table, out: IO[str]) -> None:
    """Write a trajectory or observed table with 17 significant digits."""
    if isinstance(result, Table):
        values = result.values
    else:
        values = result.states
    out.write("t," + ",".join(result.columns) + "\n")
    for t, row in zip(result.times, values):
        out.write(f"{t:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")


def write_csv_path(result: Trajectory | Table, path: str | Path) -> None:
    with open(path, "w") as out:
        write_csv(result, out)


# --- DOT export -----------------------------------------------------------


def _q(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(d: PrimitiveStockFlow | StockFlowDiagram | FullStockFlow) -> str:
    """Render a diagram as Graphviz DOT.

    Stocks are boxes, each flow runs through a valve node on double
    edges, dependency links are blue, and sum/auxiliary variables are
    ellipses.  Output is deterministic for a given diagram.
    """
    lines = ["digraph stockflow {"]
    flow_edge = '[color="black:invis:black"]'

    def stock_nodes(stocks):
        for name in stocks:
            lines.append(f"  {_q(name)} [shape=box];")

    if isinstance(d, FullStockFlow):
        stock_nodes(d.stocks)
        for name in d.flows:
            lines.append(f"  {_q('flow:' + name)} [shape=invtriangle, label={_q(name)}];")
        for name in d.sum_variables:
            lines.append(
                f"  {_q('sumvar:' + name)} [shape=ellipse, style=dashed, label={_q(name)}];"
            )
        for name in d.variables:
            lines.append(f"  {_q('var:' + name)} [shape=ellipse, label={_q(name)}];")
        for i, name in enumerate(d.flows):
            up, down = d.upstream(i), d.downstream(i)
            if up is None:
                lines.append(f"  {_q('source:' + name)} [shape=point];")
                lines.append(f"  {_q('source:' + name)} -> {_q('flow:' + name)} {flow_edge};")
            else:
                lines.append(f"  {_q(d.stocks[up])} -> {_q('flow:' + name)} {flow_edge};")
            if down is None:
                lines.append(f"  {_q('sink:' + name)} [shape=point];")
                lines.append(f"  {_q('flow:' + name)} -> {_q('sink:' + name)} {flow_edge};")
            else:
                lines.append(f"  {_q('flow:' + name)} -> {_q(d.stocks[down])} {flow_edge};")
            lines.append(
                f"  {_q('var:' + d.variables[d.fv[i]])} -> {_q('flow:' + name)} [style=dashed];"
            )
        for r in d.variable_links:
            lines.append(
                f"  {_q(d.stocks[r.src])} -> {_q('var:' + d.variables[r.tgt])} [color=blue];"
            )
        for r in d.sum_variable_links:
            lines.append(
                f"  {_q('sumvar:' + d.sum_variables[r.src])} -> "
                f"{_q('var:' + d.variables[r.tgt])} [color=blue];"
            )
        for r in d.sum_links:
            lines.append(
                f"  {_q(d.stocks[r.src])} -> {_q('sumvar:' + d.sum_variables[r.tgt])} [color=blue];"
            )
    else:
        prim = d.primitive if isinstance(d, StockFlowDiagram) else d
        stock_nodes(prim.stocks)
        for f in prim.flows:
            lines.append(f"  {_q('flow:' + f.name)} [shape=invtriangle, label={_q(f.name)}];")
        for f in prim.flows:
            lines.append(f"  {_q(prim.stocks[f.up])} -> {_q('flow:' + f.name)} {flow_edge};")
            lines.append(f"  {_q('flow:' + f.name)} -> {_q(prim.stocks[f.down])} {flow_edge};")
        for l in prim.links:
            lines.append(
                f"  {_q(prim.stocks[l.src])} -> {_q('flow:' + prim.flows[l.tgt].name)} [color=blue];"
            )
    lines.append("}")
    return "\n".join(lines) + "\n"
