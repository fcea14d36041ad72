"""Built-in model library.

Every entry validates, and every entry here is closed (each flow has
both ends), so total stock is conserved along any trajectory.

The COVID-19 composite carries these rate terms, flow by flow:

  infection             S -> E       beta * S * I / N
  incubation            E -> I       r_i * E
  recovery              I -> R       (1 - f_H) * I / t_r
  waning                R -> S       R / t_w
  icu_admission         I -> HICU    f_H * f_ICU * I / t_r
  non_icu_admission     I -> HNICU   f_H * (1 - f_ICU) * I / t_r
  icu_step_down         HICU -> HNICU  HICU / t_ICU
  discharge             HNICU -> R   HNICU / t_H
  first_dose            S -> VP      r_v * S
  second_dose           VP -> VF     r_v * VP
  partial_waning        VP -> S      VP / t_w
  full_waning           VF -> VP     VF / t_w
  partial_breakthrough  VP -> E      beta * (1 - e_p) * I * VP / N
  full_breakthrough     VF -> E      beta * (1 - e_f) * I * VF / N
  asymptomatic_onset    E -> IA      r_ia * E
  asymptomatic_recovery IA -> R      IA / t_r

Net per stock, those terms reproduce the nine-compartment equation set
the composite denotes.  The three components split this table: the
transmission-and-hospitalization box holds the first eight flows, the
vaccination box the next six, the asymptomatic box the last two.

All scenario numbers returned by `reference_scenario` are illustrative
desk-scale defaults chosen for this library, not calibrated values;
swap in your own estimates for real work.
"""

from __future__ import annotations

from typing import Callable

from .compose import Box, OpenDiagram, UWD, compose_pair, make_open, oapply
from .core import (
    FullStockFlow,
    StockFlowDiagram,
    build_full,
    build_primitive,
    build_stock_flow,
)
from .errors import UnknownModel
from .integrate import Scenario
from .morphism import DiagramMorphism


def sir() -> FullStockFlow:
    """Three-compartment epidemic with waning immunity, full-fledged.

    The infection rate is built from a chain of auxiliary variables
    (fractional prevalence, force of infection, infection) over the
    total-population sum variable.
    """
    return build_full(
        stocks=["S", "I", "R"],
        flows=[
            ("Infection", "Infection"),
            ("Recovery", "Recovery"),
            ("Waning of Immunity", "Waning of Immunity"),
        ],
        variables=[
            ("Fractional Prevalence", "I / N"),
            ("Force of Infection", "beta * I / N"),
            ("Infection", "beta * S * I / N"),
            ("Recovery", "I / t_r"),
            ("Waning of Immunity", "R / t_w"),
        ],
        sum_variables=["N"],
        inflows=[("S", "Infection"), ("I", "Recovery"), ("R", "Waning of Immunity")],
        outflows=[
            ("Infection", "I"),
            ("Recovery", "R"),
            ("Waning of Immunity", "S"),
        ],
        variable_links=[
            ("I", "Fractional Prevalence"),
            ("I", "Force of Infection"),
            ("S", "Infection"),
            ("I", "Infection"),
            ("I", "Recovery"),
            ("R", "Waning of Immunity"),
        ],
        sum_variable_links=[
            ("N", "Fractional Prevalence"),
            ("N", "Force of Infection"),
            ("N", "Infection"),
        ],
        sum_links=[("S", "N"), ("I", "N"), ("R", "N")],
    )


def sir_simple() -> StockFlowDiagram:
    """The same epidemic on the plain schema, total population inlined."""
    prim = build_primitive(
        stocks=["S", "I", "R"],
        flows=[("inf", "S", "I"), ("rec", "I", "R"), ("wane", "R", "S")],
        links=[
            ("S", "inf"),
            ("I", "inf"),
            ("R", "inf"),
            ("I", "rec"),
            ("R", "wane"),
        ],
    )
    return build_stock_flow(
        prim,
        {
            "inf": "beta * S * I / (S + I + R)",
            "rec": "I / t_r",
            "wane": "R / t_w",
        },
    )


def sird_and_lumped() -> tuple[StockFlowDiagram, StockFlowDiagram, DiagramMorphism]:
    """A four-compartment model, its three-compartment quotient, and the
    morphism between them.

    The quotient merges recovered and deceased into a single removed
    compartment E; the removal flow e carries the sum of the recovery
    and death rates.  Rate constants are fixed numbers so the morphism
    checks run parameter-free.
    """
    left = build_stock_flow(
        build_primitive(
            stocks=["S", "I", "R", "D"],
            flows=[("i", "S", "I"), ("r", "I", "R"), ("d", "I", "D")],
            links=[("S", "i"), ("I", "i"), ("I", "r"), ("I", "d")],
        ),
        {"i": "0.001 * S * I", "r": "0.1 * I", "d": "0.05 * I"},
    )
    right = build_stock_flow(
        build_primitive(
            stocks=["S", "I", "E"],
            flows=[("i", "S", "I"), ("e", "I", "E")],
            links=[("S", "i"), ("I", "i"), ("I", "e")],
        ),
        {"i": "0.001 * S * I", "e": "0.1 * I + 0.05 * I"},
    )
    alpha = DiagramMorphism(
        stock_map=(0, 1, 2, 2),
        flow_map=(0, 1, 1),
        link_map=(0, 1, 2, 2),
    )
    return left, right, alpha


def sird() -> StockFlowDiagram:
    return sird_and_lumped()[0]


def sird_lumped() -> StockFlowDiagram:
    return sird_and_lumped()[1]


def covid_a() -> OpenDiagram:
    """Transmission, course of infection, and hospitalization.

    Feet: S, E, I, R, one stock each.
    """
    prim = build_primitive(
        stocks=["S", "E", "I", "R", "HICU", "HNICU"],
        flows=[
            ("infection", "S", "E"),
            ("incubation", "E", "I"),
            ("recovery", "I", "R"),
            ("waning", "R", "S"),
            ("icu_admission", "I", "HICU"),
            ("non_icu_admission", "I", "HNICU"),
            ("icu_step_down", "HICU", "HNICU"),
            ("discharge", "HNICU", "R"),
        ],
        links=[
            ("S", "infection"),
            ("I", "infection"),
            ("E", "incubation"),
            ("I", "recovery"),
            ("R", "waning"),
            ("I", "icu_admission"),
            ("I", "non_icu_admission"),
            ("HICU", "icu_step_down"),
            ("HNICU", "discharge"),
        ],
    )
    d = build_stock_flow(
        prim,
        {
            "infection": "beta * S * I / N",
            "incubation": "r_i * E",
            "recovery": "(1 - f_H) * I / t_r",
            "waning": "R / t_w",
            "icu_admission": "f_H * f_ICU * I / t_r",
            "non_icu_admission": "f_H * (1 - f_ICU) * I / t_r",
            "icu_step_down": "HICU / t_ICU",
            "discharge": "HNICU / t_H",
        },
    )
    return make_open(d, [("S",), ("E",), ("I",), ("R",)])


def covid_b() -> OpenDiagram:
    """Vaccination: dosing, waning, and breakthrough infection.

    Feet: S, E, I, one stock each.  I carries no flows here; it only
    drives the breakthrough rates.
    """
    prim = build_primitive(
        stocks=["S", "E", "I", "VP", "VF"],
        flows=[
            ("first_dose", "S", "VP"),
            ("second_dose", "VP", "VF"),
            ("partial_waning", "VP", "S"),
            ("full_waning", "VF", "VP"),
            ("partial_breakthrough", "VP", "E"),
            ("full_breakthrough", "VF", "E"),
        ],
        links=[
            ("S", "first_dose"),
            ("VP", "second_dose"),
            ("VP", "partial_waning"),
            ("VF", "full_waning"),
            ("I", "partial_breakthrough"),
            ("VP", "partial_breakthrough"),
            ("I", "full_breakthrough"),
            ("VF", "full_breakthrough"),
        ],
    )
    d = build_stock_flow(
        prim,
        {
            "first_dose": "r_v * S",
            "second_dose": "r_v * VP",
            "partial_waning": "VP / t_w",
            "full_waning": "VF / t_w",
            "partial_breakthrough": "beta * (1 - e_p) * I * VP / N",
            "full_breakthrough": "beta * (1 - e_f) * I * VF / N",
        },
    )
    return make_open(d, [("S",), ("E",), ("I",)])


def covid_c() -> OpenDiagram:
    """Persistently asymptomatic course of infection.

    Feet: E, R, one stock each.
    """
    prim = build_primitive(
        stocks=["E", "IA", "R"],
        flows=[
            ("asymptomatic_onset", "E", "IA"),
            ("asymptomatic_recovery", "IA", "R"),
        ],
        links=[("E", "asymptomatic_onset"), ("IA", "asymptomatic_recovery")],
    )
    d = build_stock_flow(
        prim,
        {
            "asymptomatic_onset": "r_ia * E",
            "asymptomatic_recovery": "IA / t_r",
        },
    )
    return make_open(d, [("E",), ("R",)])


def covid_components() -> tuple[OpenDiagram, OpenDiagram, OpenDiagram]:
    return covid_a(), covid_b(), covid_c()


def covid_pattern() -> UWD:
    """The three-box gluing pattern: junctions S, E, I, R.

    Box a exposes all four, box b touches S, E, I, box c touches E, R.
    No outer ports: the composite is a closed system.
    """
    return UWD(
        boxes=(
            Box("a", (0, 1, 2, 3)),
            Box("b", (0, 1, 2)),
            Box("c", (1, 3)),
        ),
        n_junctions=4,
        outer_ports=(),
    )


def covid_composite() -> OpenDiagram:
    """The nine-compartment model, glued junction-wise."""
    a, b, c = covid_components()
    return oapply(covid_pattern(), {"a": a, "b": b, "c": c})


def covid_composite_pairwise() -> OpenDiagram:
    """The same composite built by two pairwise gluings.

    The first gluing shares {S, E, I}, the second {E, R}; the stock
    order comes out identical to the junction-wise build.
    """
    a, b, c = covid_components()
    a2 = make_open(a.inner, [("S", "E", "I"), ("E", "R")])
    b2 = make_open(b.inner, [("S", "E", "I")])
    c2 = make_open(c.inner, [("E", "R")])
    ab = compose_pair(a2, 0, b2, 0)
    return compose_pair(ab, 0, c2, 0)


MODELS: dict[str, Callable[[], object]] = {
    "sir": sir,
    "sir_simple": sir_simple,
    "sird": sird,
    "sird_lumped": sird_lumped,
    "covid_a": covid_a,
    "covid_b": covid_b,
    "covid_c": covid_c,
    "covid_composite": covid_composite,
}


def build(name: str):
    """Construct a catalog entry by name."""
    if name not in MODELS:
        raise UnknownModel(
            f"unknown model '{name}', available: {', '.join(sorted(MODELS))}"
        )
    return MODELS[name]()


_SIR_SCENARIO = dict(
    initial={"S": 990.0, "I": 10.0, "R": 0.0},
    params={"beta": 0.3, "t_r": 5.0, "t_w": 90.0},
    t0=0.0,
    t1=100.0,
    dt=0.1,
)

_COVID_PARAMS = {
    "beta": 0.4,
    "N": 1.0e6,
    "r_v": 0.01,
    "e_p": 0.6,
    "e_f": 0.9,
    "r_i": 0.2,
    "r_ia": 0.05,
    "t_r": 10.0,
    "t_w": 180.0,
    "t_H": 10.0,
    "t_ICU": 7.0,
    "f_H": 0.1,
    "f_ICU": 0.3,
}

_SCENARIOS: dict[str, dict] = {
    "sir": _SIR_SCENARIO,
    "sir_simple": _SIR_SCENARIO,
    "sird": dict(
        initial={"S": 990.0, "I": 10.0, "R": 0.0, "D": 0.0},
        t0=0.0,
        t1=100.0,
        dt=0.1,
    ),
    "sird_lumped": dict(
        initial={"S": 990.0, "I": 10.0, "E": 0.0},
        t0=0.0,
        t1=100.0,
        dt=0.1,
    ),
    "covid_a": dict(
        initial={
            "S": 990000.0,
            "E": 5000.0,
            "I": 5000.0,
            "R": 0.0,
            "HICU": 0.0,
            "HNICU": 0.0,
        },
        params=_COVID_PARAMS,
        t0=0.0,
        t1=120.0,
        dt=0.1,
    ),
    "covid_b": dict(
        initial={
            "S": 900000.0,
            "E": 0.0,
            "I": 10000.0,
            "VP": 50000.0,
            "VF": 40000.0,
        },
        params=_COVID_PARAMS,
        t0=0.0,
        t1=120.0,
        dt=0.1,
    ),
    "covid_c": dict(
        initial={"E": 1000.0, "IA": 100.0, "R": 0.0},
        params=_COVID_PARAMS,
        t0=0.0,
        t1=100.0,
        dt=0.1,
    ),
    "covid_composite": dict(
        initial={
            "S": 993500.0,
            "E": 2000.0,
            "I": 1000.0,
            "R": 0.0,
            "HICU": 0.0,
            "HNICU": 0.0,
            "VP": 2000.0,
            "VF": 1000.0,
            "IA": 500.0,
        },
        params=_COVID_PARAMS,
        t0=0.0,
        t1=120.0,
        dt=0.1,
    ),
}


def reference_scenario(name: str) -> Scenario:
    """A runnable desk-scale scenario for a catalog entry.

    The numbers are illustrative defaults chosen for this library.
    """
    if name not in _SCENARIOS:
        raise UnknownModel(
            f"no reference scenario for '{name}', "
            f"available: {', '.join(sorted(_SCENARIOS))}"
        )
    return Scenario(**_SCENARIOS[name])
