"""Diagram construction and validation."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from stockflow.core import (
    Flow,
    FullStockFlow,
    Link,
    PrimitiveStockFlow,
    StockFlowDiagram,
    build_full,
    build_primitive,
    build_stock_flow,
    validate,
)
from stockflow.errors import (
    ArityMismatch,
    DanglingFlow,
    DuplicateDownstream,
    DuplicateName,
    DuplicateUpstream,
    MissingFlowFunction,
    UnknownReference,
    ValidationError,
)
from stockflow.expr import Binary, Const, LinkRef, Param, SumVarRef, Unary


def sir_primitive() -> PrimitiveStockFlow:
    return build_primitive(
        stocks=["S", "I", "R"],
        flows=[("inf", "S", "I"), ("rec", "I", "R")],
        links=[("S", "inf"), ("I", "inf"), ("I", "rec")],
    )


def test_build_primitive_sir_shape():
    d = sir_primitive()
    assert len(d.stocks) == 3
    assert len(d.flows) == 2
    assert len(d.links) == 3
    assert d.flows[0] == Flow("inf", 0, 1)
    assert d.links[2] == Link(1, 1)
    assert validate(d) == []


def test_build_primitive_single_stock_no_flows():
    d = build_primitive(stocks=["X"], flows=[], links=[])
    assert d.stocks == ("X",)
    assert validate(d) == []


def test_build_primitive_unknown_stock_rejected():
    with pytest.raises(UnknownReference):
        build_primitive(stocks=["S"], flows=[("f", "S", "Q")])


def test_build_primitive_duplicate_names_rejected():
    with pytest.raises(DuplicateName):
        build_primitive(stocks=["S", "S"], flows=[])
    with pytest.raises(DuplicateName):
        build_primitive(stocks=["S", "I"], flows=[("f", "S", "I"), ("f", "I", "S")])


def test_build_primitive_unknown_link_target_rejected():
    with pytest.raises(UnknownReference):
        build_primitive(stocks=["S"], flows=[], links=[("S", "ghost")])


def test_link_slot_order_follows_link_table():
    d = sir_primitive()
    assert d.link_source_names(d.flow_id("inf")) == ("S", "I")
    assert d.link_source_names(d.flow_id("rec")) == ("I",)


def test_build_stock_flow_sir():
    d = build_stock_flow(
        sir_primitive(),
        {"inf": "beta * S * I / N", "rec": "I / t_r"},
    )
    inf = d.flow_fn[d.flow_id("inf")]
    assert inf == Binary(
        "div",
        Binary("mul", Binary("mul", Param("beta"), LinkRef(0)), LinkRef(1)),
        Param("N"),
    )
    assert validate(d) == []


def test_constant_rate_flow_with_no_links_valid():
    p = build_primitive(stocks=["A", "B"], flows=[("f", "A", "B")], links=[])
    d = build_stock_flow(p, {"f": Const(5.0)})
    assert validate(d) == []


def test_missing_flow_function_rejected():
    with pytest.raises(MissingFlowFunction):
        build_stock_flow(sir_primitive(), {"inf": Const(1.0)})


def test_stray_flow_function_rejected():
    p = build_primitive(stocks=["A", "B"], flows=[("f", "A", "B")], links=[])
    with pytest.raises(UnknownReference):
        build_stock_flow(p, {"f": Const(1.0), "g": Const(2.0)})


def test_out_of_arity_link_ref_rejected():
    # inf has two links; slot 2 is out of range
    with pytest.raises(ArityMismatch):
        build_stock_flow(sir_primitive(), {"inf": LinkRef(2), "rec": LinkRef(0)})


def test_sumvar_ref_rejected_on_simple_flow():
    with pytest.raises(ArityMismatch):
        build_stock_flow(sir_primitive(), {"inf": SumVarRef(0), "rec": LinkRef(0)})


def test_non_finite_constant_rejected():
    p = build_primitive(stocks=["A", "B"], flows=[("f", "A", "B")], links=[])
    with pytest.raises(ValidationError):
        build_stock_flow(p, {"f": Const(float("inf"))})


def test_validate_reports_all_violations_without_raising():
    d = PrimitiveStockFlow(
        stocks=("S", "S"),
        flows=(Flow("f", 0, 5),),
        links=(Link(9, 0),),
    )
    report = validate(d)
    kinds = {type(e) for e in report}
    assert DuplicateName in kinds
    assert UnknownReference in kinds
    assert len(report) == 3


def full_sir() -> FullStockFlow:
    return build_full(
        stocks=["S", "I", "R"],
        flows=[("inf", "infection"), ("rec", "recovery")],
        variables=[
            ("infection", "beta * S * I / N"),
            ("recovery", "I / t_r"),
        ],
        sum_variables=["N"],
        inflows=[("S", "inf"), ("I", "rec")],
        outflows=[("inf", "I"), ("rec", "R")],
        variable_links=[("S", "infection"), ("I", "infection"), ("I", "recovery")],
        sum_variable_links=[("N", "infection")],
        sum_links=[("S", "N"), ("I", "N"), ("R", "N")],
    )


def test_build_full_sir():
    d = full_sir()
    assert validate(d) == []
    assert d.variable_stock_slots(0) == (0, 1)
    assert d.variable_sumvar_slots(0) == (0,)
    assert d.sum_members(0) == (0, 1, 2)
    assert d.upstream(0) == 0 and d.downstream(0) == 1
    # "N" resolves to the linked sum variable, not a parameter
    assert d.aux_fn[0] == Binary(
        "div",
        Binary("mul", Binary("mul", Param("beta"), LinkRef(0)), LinkRef(1)),
        SumVarRef(0),
    )


def test_partial_flow_birth_valid():
    d = build_full(
        stocks=["S"],
        flows=[("birth", "rate")],
        variables=[("rate", Const(2.0))],
        outflows=[("birth", "S")],
    )
    assert validate(d) == []
    assert d.upstream(0) is None
    assert d.downstream(0) == 0


def test_duplicate_upstream_rejected():
    with pytest.raises(DuplicateUpstream):
        build_full(
            stocks=["A", "B"],
            flows=[("f", "r")],
            variables=[("r", Const(1.0))],
            inflows=[("A", "f"), ("B", "f")],
        )


def test_duplicate_downstream_rejected():
    with pytest.raises(DuplicateDownstream):
        build_full(
            stocks=["A", "B"],
            flows=[("f", "r")],
            variables=[("r", Const(1.0))],
            inflows=[("A", "f")],
            outflows=[("f", "A"), ("f", "B")],
        )


def test_dangling_flow_rejected():
    with pytest.raises(DanglingFlow):
        build_full(
            stocks=["A"],
            flows=[("f", "r")],
            variables=[("r", Const(1.0))],
        )


def test_variable_arity_checked():
    with pytest.raises(ArityMismatch):
        build_full(
            stocks=["A", "B"],
            flows=[("f", "r")],
            variables=[("r", LinkRef(0))],  # no variable links feed r
            inflows=[("A", "f")],
            outflows=[("f", "B")],
        )


def test_full_unknown_rate_variable_rejected():
    with pytest.raises(UnknownReference):
        build_full(
            stocks=["A", "B"],
            flows=[("f", "ghost")],
            variables=[("r", Const(1.0))],
            inflows=[("A", "f")],
        )


# --- random structure properties ------------------------------------------


@st.composite
def primitives(draw):
    n_stocks = draw(st.integers(1, 6))
    stocks = [f"s{i}" for i in range(n_stocks)]
    n_flows = draw(st.integers(0, 6))
    flows = []
    for j in range(n_flows):
        up = draw(st.integers(0, n_stocks - 1))
        down = draw(st.integers(0, n_stocks - 1))
        flows.append((f"f{j}", stocks[up], stocks[down]))
    links = []
    if n_flows:
        for _ in range(draw(st.integers(0, 8))):
            src = draw(st.integers(0, n_stocks - 1))
            tgt = draw(st.integers(0, n_flows - 1))
            links.append((stocks[src], f"f{tgt}"))
    return build_primitive(stocks, flows, links)


@given(primitives())
def test_random_primitives_validate_clean(d):
    assert validate(d) == []
    # ids are dense positions
    for f in d.flows:
        assert 0 <= f.up < len(d.stocks)
        assert 0 <= f.down < len(d.stocks)


@given(primitives())
def test_flow_links_partition_link_table(d):
    all_slots = [i for f in range(len(d.flows)) for i in d.flow_links(f)]
    assert sorted(all_slots) == list(range(len(d.links)))


@given(primitives())
def test_default_rate_attachment_validates(d):
    # one link-product expression per flow, using every slot
    fns = {}
    for f, flow in enumerate(d.flows):
        expr = Const(1.0)
        for slot in range(len(d.flow_links(f))):
            expr = Binary("mul", expr, LinkRef(slot))
        fns[flow.name] = expr
    sf = build_stock_flow(d, fns)
    assert validate(sf) == []
