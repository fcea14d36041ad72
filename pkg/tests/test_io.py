"""JSON document round trips, schema rejection, CSV and DOT output."""

import io as stringio
import json

import numpy as np
import pytest

from stockflow.compose import Box, FullFoot, SimpleFoot, UWD, make_open
from stockflow.core import build_full, build_primitive, build_stock_flow
from stockflow.errors import SchemaViolation, VersionMismatch
from stockflow.expr import Const, LinkRef, Unary
from stockflow.integrate import Scenario, simulate
from stockflow.io import (
    MorphismSpec,
    dumps,
    export_dot,
    load,
    loads,
    morphism_spec,
    save,
    write_csv,
)
from stockflow.morphism import lump
from stockflow.semantics import vector_field


def sir_diagram():
    prim = build_primitive(
        stocks=["S", "I", "R"],
        flows=[("inf", "S", "I"), ("rec", "I", "R")],
        links=[("S", "inf"), ("I", "inf"), ("I", "rec")],
    )
    return build_stock_flow(prim, {"inf": "beta * S * I / N", "rec": "I / t_r"})


def full_sir_diagram():
    return build_full(
        stocks=["S", "I", "R"],
        flows=[("inf", "infection"), ("rec", "recovery")],
        variables=[("infection", "beta * S * I / N"), ("recovery", "I / t_r")],
        sum_variables=["N"],
        inflows=[("S", "inf"), ("I", "rec")],
        outflows=[("inf", "I"), ("rec", "R")],
        variable_links=[("S", "infection"), ("I", "infection"), ("I", "recovery")],
        sum_variable_links=[("N", "infection")],
        sum_links=[("S", "N"), ("I", "N"), ("R", "N")],
    )


def test_primitive_round_trip(tmp_path):
    prim = build_primitive(["A", "B"], [("f", "A", "B")], [("A", "f"), ("B", "f")])
    path = tmp_path / "prim.json"
    save(prim, path)
    assert load(path) == prim


def test_stockflow_round_trip(tmp_path):
    d = sir_diagram()
    path = tmp_path / "sir.json"
    save(d, path)
    assert load(path) == d


def test_full_round_trip():
    d = full_sir_diagram()
    assert loads(dumps(d)) == d


def test_open_round_trip_with_renamed_foot():
    od = make_open(
        sir_diagram(),
        [(SimpleFoot(("left",)), {"left": "S"}), ("R",)],
    )
    back = loads(dumps(od))
    assert back == od
    assert back.legs[0].foot == SimpleFoot(("left",))


def test_open_full_round_trip():
    foot = FullFoot(stocks=("S",), sum_variables=("N",), sum_links=((0, 0),))
    od = make_open(full_sir_diagram(), [foot])
    back = loads(dumps(od))
    assert back == od


def test_uwd_round_trip():
    pattern = UWD(
        boxes=(Box("a", (0, 1)), Box("b", (1,))),
        n_junctions=3,
        outer_ports=(2, 0),
    )
    assert loads(dumps(pattern)) == pattern


def test_morphism_round_trip():
    spec = MorphismSpec(
        stock_map=(("S", "S"), ("I", "I")),
        flow_map=(("f", "g"),),
        link_map=(0, 1),
    )
    assert loads(dumps(spec)) == spec


def test_scenario_round_trip():
    scenario = Scenario(
        initial={"S": 990.0, "I": 10.0},
        params={"beta": 0.3},
        t0=0.0,
        t1=20.0,
        dt=0.5,
        method="euler",
        save_every=2,
    )
    assert loads(dumps(scenario)) == scenario


def test_saved_text_is_stable():
    for obj in (sir_diagram(), full_sir_diagram()):
        text = dumps(obj)
        assert dumps(loads(text)) == text


def test_negative_constant_normalizes_to_negation():
    prim = build_primitive(["A", "B"], [("f", "A", "B")], [])
    d = build_stock_flow(prim, {"f": Const(-3.0)})
    back = loads(dumps(d))
    assert back.flow_fn[0] == Unary("neg", Const(3.0))
    # stable from the canonical form on
    assert dumps(loads(dumps(back))) == dumps(back)


def test_expression_identifiers_bind_to_links():
    d = loads(dumps(sir_diagram()))
    assert d.flow_fn[0].left.left.right == LinkRef(0)
    assert d.flow_fn[0].left.right == LinkRef(1)


def test_missing_flow_function_reports_pointer():
    doc = json.loads(dumps(sir_diagram()))
    del doc["flows"][1]["function"]
    with pytest.raises(SchemaViolation) as exc:
        loads(json.dumps(doc))
    assert "/flows/1/function" in str(exc.value)


def test_future_version_rejected():
    doc = json.loads(dumps(sir_diagram()))
    doc["version"] = 2
    with pytest.raises(VersionMismatch):
        loads(json.dumps(doc))


def test_unknown_field_rejected():
    doc = json.loads(dumps(sir_diagram()))
    doc["color"] = "red"
    with pytest.raises(SchemaViolation, match="unknown field"):
        loads(json.dumps(doc))


def test_unknown_kind_rejected():
    with pytest.raises(SchemaViolation, match="kind"):
        loads('{"kind": "sketch", "version": 1}')


def test_invalid_json_rejected():
    with pytest.raises(SchemaViolation, match="JSON"):
        loads("{not json")


def test_wrong_entry_type_reports_pointer():
    doc = json.loads(dumps(sir_diagram()))
    doc["stocks"][1] = 7
    with pytest.raises(SchemaViolation) as exc:
        loads(json.dumps(doc))
    assert "/stocks/1" in str(exc.value)


def test_morphism_spec_resolves_to_lump():
    prim = build_primitive(
        stocks=["S", "I", "R", "D"],
        flows=[("inf", "S", "I"), ("rec", "I", "R"), ("death", "I", "D")],
        links=[("S", "inf"), ("I", "inf"), ("I", "rec"), ("I", "death")],
    )
    d = build_stock_flow(
        prim, {"inf": "0.001 * S * I", "rec": "0.1 * I", "death": "0.05 * I"}
    )
    q, alpha = lump(d, [0, 1, 2, 2], [0, 1, 1], [0, 1, 2, 2])
    spec = morphism_spec(alpha, d, q)
    assert loads(dumps(spec)) == spec
    assert spec.resolve(d, q) == alpha


def test_csv_writer_format():
    prim = build_primitive(["A", "B"], [("f", "A", "B")], [("A", "f")])
    d = build_stock_flow(prim, {"f": "A / 3"})
    traj = simulate(
        vector_field(d),
        Scenario(initial={"A": 1.0, "B": 0.0}, t1=1.0, dt=0.5, method="euler"),
    )
    out = stringio.StringIO()
    write_csv(traj, out)
    lines = out.getvalue().splitlines()
    assert lines[0] == "t,A,B"
    assert len(lines) == 4
    # 17 significant digits survive the trip back to float
    first_row = [float(v) for v in lines[1].split(",")]
    assert first_row == [0.0, 1.0, 0.0]
    a_values = np.array([float(l.split(",")[1]) for l in lines[1:]])
    assert np.array_equal(a_values, traj.states[:, 0])


def test_dot_counts_for_sir():
    text = export_dot(sir_diagram())
    lines = text.splitlines()
    assert sum("[shape=box]" in l for l in lines) == 3
    assert sum("shape=invtriangle" in l for l in lines) == 2
    assert sum("[color=blue]" in l for l in lines) == 3
    assert text == export_dot(loads(dumps(sir_diagram())))


def test_dot_empty_diagram():
    assert export_dot(build_primitive([], [], [])) == "digraph stockflow {\n}\n"


def test_dot_full_diagram_marks_variables():
    text = export_dot(full_sir_diagram())
    assert '"sumvar:N" [shape=ellipse, style=dashed, label="N"];' in text.splitlines()[6]
    assert sum("shape=ellipse" in l for l in text.splitlines()) == 3


def test_dot_partial_flows_get_endpoints():
    d = build_full(
        stocks=["X"],
        flows=[("birth", "rate"), ("death", "rate2")],
        variables=[("rate", Const(2.0)), ("rate2", "X")],
        outflows=[("birth", "X")],
        inflows=[("X", "death")],
        variable_links=[("X", "rate2")],
    )
    text = export_dot(d)
    assert '"source:birth" [shape=point];' in text
    assert '"sink:death" [shape=point];' in text
