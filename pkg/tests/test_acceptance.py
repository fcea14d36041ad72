"""Release gate: one end-to-end check per headline guarantee.

Each test exercises the public API the way a caller would (build the
catalog models, compose, lump, compile, simulate, save, load) and prints
a single PASS line carrying the measured figure; on failure the same
line is raised.  Run with -s to see the lines for passing tests too.
"""

from __future__ import annotations

import math
import random

import numpy as np
from click.testing import CliRunner

from diagram_strategies import attach_product_rates, inflate
from stockflow.cli import main
from stockflow.compose import (
    UWD,
    Box,
    OpenDiagram,
    SimpleFoot,
    compose_pair,
    disjoint_union,
    identity_open,
    iso_check,
    make_open,
    oapply,
)
from stockflow.core import FullStockFlow, StockFlowDiagram, build_primitive
from stockflow.expr import Binary, Const
from stockflow.integrate import Scenario, simulate
from stockflow.io import dumps, loads, morphism_spec, save
from stockflow.models import (
    MODELS,
    covid_components,
    covid_composite,
    covid_pattern,
    reference_scenario,
    sir,
    sir_simple,
    sird_and_lumped,
)
from stockflow.morphism import check_flow_equation, check_naturality, lump
from stockflow.semantics import (
    DynamicalSystem,
    compose_open_systems,
    open_vector_field,
    pushforward_system,
    vector_field,
    vector_field_full,
)

CANONICAL_STOCKS = ("S", "E", "I", "R", "HICU", "HNICU", "VP", "VF", "IA")


def _report(name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    print(line)
    assert ok, line


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    """Worst componentwise error relative to max(1, |a|, |b|)."""
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / scale))


def _system(model: object) -> DynamicalSystem:
    inner = model.inner if isinstance(model, OpenDiagram) else model
    if isinstance(inner, FullStockFlow):
        return vector_field_full(inner)
    return vector_field(inner)


def _random_diagram(
    rng: random.Random, max_stocks: int = 5, max_flows: int = 4
) -> StockFlowDiagram:
    n = rng.randint(1, max_stocks)
    stocks = [f"s{i}" for i in range(n)]
    flows = [
        (f"f{j}", stocks[rng.randrange(n)], stocks[rng.randrange(n)])
        for j in range(rng.randint(0, max_flows))
    ]
    links = []
    for j, _ in enumerate(flows):
        for _ in range(rng.randint(0, 2)):
            links.append((stocks[rng.randrange(n)], f"f{j}"))
    prim = build_primitive(stocks, flows, links)
    return attach_product_rates(prim, rng.choice([0.25, 0.5, 1.0, 2.0]))


def _with_feet(
    rng: random.Random,
    d: StockFlowDiagram,
    sizes: list[int],
    prefixes: list[str],
) -> OpenDiagram:
    """Wrap `d` with one leg per entry, onto distinct random stocks."""
    feet = []
    for size, prefix in zip(sizes, prefixes):
        chosen = rng.sample(range(len(d.stocks)), size)
        names = tuple(f"{prefix}{m}" for m in range(size))
        feet.append((SimpleFoot(names), dict(zip(names, (d.stocks[i] for i in chosen)))))
    return make_open(d, feet)


# --- nine-compartment oracle ----------------------------------------------

def _epi_params(rng: random.Random) -> dict[str, float]:
    return {
        "beta": rng.uniform(0.05, 1.0),
        "N": rng.uniform(1e5, 1e7),
        "r_v": rng.uniform(0.001, 0.05),
        "e_p": rng.uniform(0.2, 0.9),
        "e_f": rng.uniform(0.5, 0.99),
        "r_i": rng.uniform(0.05, 0.5),
        "r_ia": rng.uniform(0.01, 0.2),
        "t_r": rng.uniform(3.0, 20.0),
        "t_w": rng.uniform(30.0, 400.0),
        "t_H": rng.uniform(3.0, 30.0),
        "t_ICU": rng.uniform(2.0, 20.0),
        "f_H": rng.uniform(0.02, 0.3),
        "f_ICU": rng.uniform(0.1, 0.9),
    }


def _nine_compartment_rhs(x: np.ndarray, p: dict[str, float]) -> np.ndarray:
    """Hand-written balance of all sixteen transfer terms, one line per stock."""
    S, E, I, R, HICU, HNICU, VP, VF, IA = x
    beta, N = p["beta"], p["N"]
    return np.array([
        R / p["t_w"] + VP / p["t_w"] - beta * S * I / N - p["r_v"] * S,
        beta * S * I / N
        + beta * (1 - p["e_p"]) * I * VP / N
        + beta * (1 - p["e_f"]) * I * VF / N
        - p["r_ia"] * E
        - p["r_i"] * E,
        p["r_i"] * E - I / p["t_r"],
        (1 - p["f_H"]) * I / p["t_r"] + IA / p["t_r"] + HNICU / p["t_H"] - R / p["t_w"],
        p["f_H"] * p["f_ICU"] * I / p["t_r"] - HICU / p["t_ICU"],
        HICU / p["t_ICU"] + p["f_H"] * (1 - p["f_ICU"]) * I / p["t_r"] - HNICU / p["t_H"],
        p["r_v"] * S + VF / p["t_w"] - VP / p["t_w"] - p["r_v"] * VP
        - beta * (1 - p["e_p"]) * I * VP / N,
        p["r_v"] * VP - VF / p["t_w"] - beta * (1 - p["e_f"]) * I * VF / N,
        p["r_ia"] * E - IA / p["t_r"],
    ])


def test_nine_compartment_oracle():
    system = _system(covid_composite())
    assert system.stocks == CANONICAL_STOCKS
    rng = random.Random(11)
    param_sets = [_epi_params(rng) for _ in range(5)]
    states = [
        np.array([rng.uniform(0.0, 1e5) for _ in range(9)]) for _ in range(200)
    ]
    worst = max(
        _rel(system(x, p), _nine_compartment_rhs(x, p))
        for p in param_sets
        for x in states
    )
    _report(
        "nine-compartment oracle",
        worst <= 1e-12,
        f"max rel err {worst:.3g} over 200 states x 5 parameter sets (tol 1e-12)",
    )


# --- composing diagrams commutes with compiling them ----------------------

def test_compose_commutes_with_semantics_on_components():
    a, b, c = covid_components()
    a2 = make_open(a.inner, [("S", "E", "I"), ("E", "R")])
    b2 = make_open(b.inner, [("S", "E", "I")])
    c2 = make_open(c.inner, [("E", "R")])
    semantics_first = compose_open_systems(
        compose_open_systems(open_vector_field(a2), 0, open_vector_field(b2), 0),
        0,
        open_vector_field(c2),
        0,
    ).system
    compose_first = _system(covid_composite())
    assert semantics_first.stocks == compose_first.stocks
    params = reference_scenario("covid_composite").params
    rng = random.Random(17)
    worst = max(
        _rel(semantics_first(x, params), compose_first(x, params))
        for x in ([rng.uniform(0.0, 1e5) for _ in range(9)] for _ in range(100))
    )
    _report(
        "functoriality on the epidemic components",
        worst <= 1e-12,
        f"max rel err {worst:.3g} at 100 states (tol 1e-12)",
    )


def test_compose_commutes_with_semantics_on_random_pairs():
    rng = random.Random(23)
    worst = 0.0
    for _ in range(50):
        da, db = _random_diagram(rng), _random_diagram(rng)
        k = rng.randint(0, min(len(da.stocks), len(db.stocks)))
        a = _with_feet(rng, da, [k], ["p"])
        b = _with_feet(rng, db, [k], ["p"])
        compose_first = vector_field(compose_pair(a, 0, b, 0).inner)
        semantics_first = compose_open_systems(
            open_vector_field(a), 0, open_vector_field(b), 0
        ).system
        assert semantics_first.stocks == compose_first.stocks
        for _ in range(100):
            x = [rng.uniform(0.0, 100.0) for _ in compose_first.stocks]
            worst = max(worst, _rel(semantics_first(x), compose_first(x)))
    _report(
        "functoriality on random pairs",
        worst <= 1e-12,
        f"max rel err {worst:.3g} over 50 glued pairs x 100 states (tol 1e-12)",
    )


# --- closed models conserve total mass ------------------------------------

def test_closed_models_conserve_total():
    rng = random.Random(29)
    worst_field = 0.0
    worst_drift = 0.0
    closed = []
    for name, build in MODELS.items():
        model = build()
        if isinstance(model, OpenDiagram) and model.legs:
            continue
        closed.append(name)
        system = _system(model)
        scenario = reference_scenario(name)
        for _ in range(1000):
            x = [rng.uniform(0.0, 100.0) for _ in system.stocks]
            worst_field = max(worst_field, abs(float(system(x, scenario.params).sum())))
        totals = simulate(system, scenario).states.sum(axis=1)
        worst_drift = max(worst_drift, float(np.max(np.abs(totals - totals[0]))))
    _report(
        "closed-model conservation",
        worst_field <= 1e-12 and worst_drift <= 1e-8,
        f"{len(closed)} closed models; max |field sum| {worst_field:.3g} at 1000 "
        f"states each (tol 1e-12); max trajectory drift {worst_drift:.3g} (tol 1e-8)",
    )


# --- lump morphisms and the rate condition --------------------------------

def _bump_flow(d: StockFlowDiagram, g: int) -> StockFlowDiagram:
    fns = tuple(
        Binary("add", fn, Const(1.0)) if i == g else fn
        for i, fn in enumerate(d.flow_fn)
    )
    return StockFlowDiagram(d.primitive, fns)


def test_lump_morphisms_satisfy_rate_condition():
    left, right, alpha = sird_and_lumped()
    cases = [(left, right, alpha)]
    bases = [left, _random_diagram(random.Random(41)), _random_diagram(random.Random(43))]
    for base in bases:
        for seed in range(4):
            inflated, labels = inflate(base, seed)
            quotient, m = lump(inflated, *labels)
            cases.append((inflated, quotient, m))
    all_pass = all(
        check_naturality(m, src, dst) == []
        and check_flow_equation(m, src, dst).passed
        for src, dst, m in cases
    )
    # a unit offset on any single target rate must be caught, loudly
    min_gap = math.inf
    caught = True
    for src, dst, m in cases:
        for g in range(len(dst.flows)):
            bad = check_flow_equation(m, src, _bump_flow(dst, g))
            caught = caught and not bad.passed
            min_gap = min(min_gap, max(bad.max_discrepancy))
    _report(
        "lump rate condition",
        all_pass and caught and min_gap >= 0.999,
        f"{len(cases)} lump morphisms pass; every +1 rate perturbation fails "
        f"with discrepancy >= {min_gap:.6f} (want >= 0.999)",
    )


# --- composition algebra ---------------------------------------------------

def test_composition_algebra():
    rng = random.Random(37)
    assoc_ok = unit_ok = True
    for _ in range(50):
        da = _random_diagram(rng, max_stocks=6)
        db = _random_diagram(rng, max_stocks=6)
        dc = _random_diagram(rng, max_stocks=6)
        k0 = rng.randint(1, min(len(da.stocks), len(db.stocks)))
        k1 = rng.randint(1, min(len(db.stocks), len(dc.stocks)))
        a = _with_feet(rng, da, [k0], ["p"])
        b = _with_feet(rng, db, [k0, k1], ["p", "q"])
        c = _with_feet(rng, dc, [k1], ["q"])
        lhs = compose_pair(compose_pair(a, 0, b, 0), 0, c, 0)
        rhs = compose_pair(a, 0, compose_pair(b, 1, c, 0), 0)
        assoc_ok = assoc_ok and iso_check(lhs, rhs, max_stocks=20) is not None
        unit = identity_open([f"p{m}" for m in range(k0)])
        unit_ok = unit_ok and iso_check(compose_pair(a, 0, unit, 0), a) is not None
    pattern_ok = union_ok = True
    for _ in range(50):
        da, db = _random_diagram(rng), _random_diagram(rng)
        k = rng.randint(0, min(len(da.stocks), len(db.stocks)))
        a = _with_feet(rng, da, [k], ["p"])
        b = _with_feet(rng, db, [k], ["p"])
        shared = UWD(boxes=(Box("a", (0,)), Box("b", (0,))), n_junctions=1, outer_ports=())
        via_pattern = oapply(shared, {"a": a, "b": b})
        pattern_ok = pattern_ok and iso_check(via_pattern, compose_pair(a, 0, b, 0)) is not None
        union = disjoint_union(a, b)
        union_ok = union_ok and (
            len(union.inner.stocks) == len(da.stocks) + len(db.stocks)
            and len(union.inner.flows) == len(da.flows) + len(db.flows)
            and len(union.inner.links) == len(da.links) + len(db.links)
            and len(union.legs) == len(a.legs) + len(b.legs)
        )
    _report(
        "composition algebra",
        assoc_ok and unit_ok and pattern_ok and union_ok,
        f"50 triples associative {assoc_ok}, unital {unit_ok}; 50 two-box "
        f"patterns match pairwise gluing {pattern_ok}; unions exact {union_ok}",
    )


# --- pushforward along lumps ----------------------------------------------

def test_pushforward_matches_quotient_field():
    rng = random.Random(53)
    left, right, alpha = sird_and_lumped()
    cases = [(left, right, alpha)]
    for base in (left, _random_diagram(random.Random(59)), _random_diagram(random.Random(61))):
        for seed in range(5):
            inflated, labels = inflate(base, seed)
            quotient, m = lump(inflated, *labels)
            cases.append((inflated, quotient, m))
    worst = 0.0
    for src, dst, m in cases:
        pushed = pushforward_system(m.stock_map, vector_field(src), dst.stocks)
        direct = vector_field(dst)
        for _ in range(100):
            x = [rng.uniform(0.0, 100.0) for _ in dst.stocks]
            worst = max(worst, _rel(pushed(x), direct(x)))
    _report(
        "pushforward along lumps",
        worst <= 1e-12,
        f"max rel err {worst:.3g} over {len(cases)} morphisms x 100 states (tol 1e-12)",
    )


# --- integrator convergence orders ----------------------------------------

def test_integrator_error_orders():
    decay = DynamicalSystem(("x",), lambda x, params=None: -x)

    def error_at_one(method: str, dt: float) -> float:
        trajectory = simulate(decay, Scenario(initial={"x": 1.0}, t1=1.0, dt=dt, method=method))
        return abs(float(trajectory.states[-1, 0]) - math.exp(-1.0))

    ok = True
    parts = []
    for method, lo, hi in (("euler", 1.8, 2.2), ("rk4", 14.0, 18.0)):
        errors = [error_at_one(method, dt) for dt in (0.1, 0.05, 0.025)]
        ratios = [errors[i] / errors[i + 1] for i in range(2)]
        ok = ok and all(lo <= r <= hi for r in ratios)
        parts.append(f"{method} halving ratios {ratios[0]:.2f}, {ratios[1]:.2f} (want [{lo}, {hi}])")
    final = error_at_one("rk4", 0.01)
    ok = ok and final <= 1e-6
    parts.append(f"rk4 dt=0.01 error {final:.3g} (tol 1e-6)")
    _report("integrator convergence", ok, "; ".join(parts))


# --- layered and inline SIR agree -----------------------------------------

def test_layered_and_inline_sir_agree():
    layered = _system(sir())
    inline = _system(sir_simple())
    assert layered.stocks == inline.stocks
    params = reference_scenario("sir").params
    rng = random.Random(67)
    worst = max(
        _rel(layered(x, params), inline(x, params))
        for x in ([rng.uniform(0.0, 1e4) for _ in range(3)] for _ in range(100))
    )
    _report(
        "layered vs inline SIR",
        worst <= 1e-12,
        f"max rel err {worst:.3g} at 100 states (tol 1e-12)",
    )


# --- round trips and the command line -------------------------------------

def test_round_trip_and_cli_columns(tmp_path):
    stale = [
        name
        for name, build in MODELS.items()
        if loads(dumps(build())) != build()
    ]
    stale += [
        f"{name} scenario"
        for name in MODELS
        if loads(dumps(reference_scenario(name))) != reference_scenario(name)
    ]
    if loads(dumps(covid_pattern())) != covid_pattern():
        stale.append("pattern")
    left, right, alpha = sird_and_lumped()
    spec = morphism_spec(alpha, left, right)
    if loads(dumps(spec)) != spec:
        stale.append("morphism")

    model_path = tmp_path / "composite.json"
    scenario_path = tmp_path / "scenario.json"
    save(covid_composite(), model_path)
    save(reference_scenario("covid_composite"), scenario_path)
    out_path = tmp_path / "run.csv"
    result = CliRunner().invoke(
        main,
        ["simulate", str(model_path), "--scenario", str(scenario_path), "-o", str(out_path)],
    )
    assert result.exit_code == 0, result.output
    header = out_path.read_text().splitlines()[0]
    expected = "t," + ",".join(CANONICAL_STOCKS)
    _report(
        "round trips and CLI columns",
        not stale and header == expected,
        f"{len(MODELS)} models, {len(MODELS)} scenarios, pattern, morphism all "
        f"reload identically; CSV header '{header}'",
    )
