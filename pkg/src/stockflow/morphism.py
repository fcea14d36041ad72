"""Morphisms between stock-flow diagrams.

A morphism is a triple of total maps (stocks, flows, links) from a source
diagram to a target diagram that commutes with the structure maps: a
mapped flow drains and fills the images of its endpoints, and a mapped
link reads the image of its source stock and feeds the image of its
target flow.

On top of the structural maps sits the rate condition: each target flow's
rate must equal the sum of the rates of its preimage flows, with every
source expression reading its stock values through the link map.  That
equality is checked numerically by seeded sampling (`check_flow_equation`)
and can be satisfied by construction (`lump`, which builds the quotient
rate as the explicit slot-substituted sum).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

from .core import Flow, Link, PrimitiveStockFlow, StockFlowDiagram, validate
from .errors import DomainMismatch, IllFormedPartition
from .expr import Binary, Expression, LinkRef, SumVarRef, Unary, eval_expression

__all__ = [
    "DiagramMorphism",
    "FlowEquationReport",
    "identity_morphism",
    "check_naturality",
    "check_flow_equation",
    "compose_morphisms",
    "lump",
]


@dataclass(frozen=True)
class DiagramMorphism:
    stock_map: tuple[int, ...]
    flow_map: tuple[int, ...]
    link_map: tuple[int, ...]


def identity_morphism(d: PrimitiveStockFlow | StockFlowDiagram) -> DiagramMorphism:
    prim = d.primitive if isinstance(d, StockFlowDiagram) else d
    return DiagramMorphism(
        stock_map=tuple(range(len(prim.stocks))),
        flow_map=tuple(range(len(prim.flows))),
        link_map=tuple(range(len(prim.links))),
    )


def check_naturality(
    alpha: DiagramMorphism,
    src: PrimitiveStockFlow | StockFlowDiagram,
    dst: PrimitiveStockFlow | StockFlowDiagram,
) -> list[str]:
    """Report every structure square the maps fail to commute with."""
    F = src.primitive if isinstance(src, StockFlowDiagram) else src
    G = dst.primitive if isinstance(dst, StockFlowDiagram) else dst
    errs: list[str] = []

    for label, fmap, n_src, n_dst in (
        ("stock", alpha.stock_map, len(F.stocks), len(G.stocks)),
        ("flow", alpha.flow_map, len(F.flows), len(G.flows)),
        ("link", alpha.link_map, len(F.links), len(G.links)),
    ):
        if len(fmap) != n_src:
            errs.append(f"{label} map covers {len(fmap)} of {n_src} elements")
        for i, v in enumerate(fmap):
            if not 0 <= v < n_dst:
                errs.append(f"{label} map sends {i} to {v}, out of range")
    if errs:
        return errs

    for f, flow in enumerate(F.flows):
        image = G.flows[alpha.flow_map[f]]
        if image.up != alpha.stock_map[flow.up]:
            errs.append(
                f"upstream square fails at flow '{flow.name}': "
                f"maps to '{image.name}' draining stock {image.up}, "
                f"expected {alpha.stock_map[flow.up]}"
            )
        if image.down != alpha.stock_map[flow.down]:
            errs.append(
                f"downstream square fails at flow '{flow.name}': "
                f"maps to '{image.name}' filling stock {image.down}, "
                f"expected {alpha.stock_map[flow.down]}"
            )
    for l, link in enumerate(F.links):
        image = G.links[alpha.link_map[l]]
        if image.src != alpha.stock_map[link.src]:
            errs.append(
                f"link-source square fails at link {l}: image reads stock "
                f"{image.src}, expected {alpha.stock_map[link.src]}"
            )
        if image.tgt != alpha.flow_map[link.tgt]:
            errs.append(
                f"link-target square fails at link {l}: image feeds flow "
                f"{image.tgt}, expected {alpha.flow_map[link.tgt]}"
            )
    return errs


@dataclass(frozen=True)
class FlowEquationReport:
    """Max absolute discrepancy per target flow, against a tolerance."""

    max_discrepancy: tuple[float, ...]  # indexed by target flow id
    tol: float

    @property
    def passed(self) -> bool:
        return all(m <= self.tol for m in self.max_discrepancy)

    @property
    def worst(self) -> float:
        return max(self.max_discrepancy, default=0.0)


def _pullback_slots(
    alpha: DiagramMorphism,
    src: StockFlowDiagram,
    dst: StockFlowDiagram,
    f: int,
    g: int,
) -> tuple[int, ...]:
    """For source flow f over target flow g: target slot read by each source slot."""
    g_links = dst.flow_links(g)
    slots = []
    for l in src.flow_links(f):
        mapped = alpha.link_map[l]
        try:
            slots.append(g_links.index(mapped))
        except ValueError:
            raise DomainMismatch(
                f"link {l} of flow '{src.flows[f].name}' maps to link {mapped}, "
                f"which does not feed the image flow '{dst.flows[g].name}'"
            ) from None
    return tuple(slots)


def check_flow_equation(
    alpha: DiagramMorphism,
    src: StockFlowDiagram,
    dst: StockFlowDiagram,
    sample_count: int = 100,
    seed: int = 0,
    tol: float = 1e-12,
    params: Mapping[str, float] | None = None,
) -> FlowEquationReport:
    """Numerically check the rate condition on a structural morphism.

    For each target flow g, compares its rate expression with the sum of
    the preimage flows' expressions (arguments pulled back through the
    link map) at `sample_count` argument vectors with components uniform
    in [0, 100], drawn deterministically from `seed`.
    """
    preimages: dict[int, list[int]] = {g: [] for g in range(len(dst.flows))}
    for f, g in enumerate(alpha.flow_map):
        preimages[g].append(f)

    rng = random.Random(seed)
    worst = []
    for g in range(len(dst.flows)):
        arity = len(dst.flow_links(g))
        slot_tables = {f: _pullback_slots(alpha, src, dst, f, g) for f in preimages[g]}
        worst_g = 0.0
        for _ in range(sample_count):
            ys = [rng.uniform(0.0, 100.0) for _ in range(arity)]
            lhs = eval_expression(dst.flow_fn[g], ys, params=params)
            rhs = 0.0
            for f in preimages[g]:
                xs = [ys[s] for s in slot_tables[f]]
                rhs += eval_expression(src.flow_fn[f], xs, params=params)
            worst_g = max(worst_g, abs(lhs - rhs))
        worst.append(worst_g)
    return FlowEquationReport(tuple(worst), tol)


def compose_morphisms(alpha: DiagramMorphism, beta: DiagramMorphism) -> DiagramMorphism:
    """Componentwise composition: first `alpha`, then `beta`."""
    for label, first, second in (
        ("stock", alpha.stock_map, beta.stock_map),
        ("flow", alpha.flow_map, beta.flow_map),
        ("link", alpha.link_map, beta.link_map),
    ):
        for v in first:
            if not 0 <= v < len(second):
                raise DomainMismatch(
                    f"{label} maps do not compose: intermediate id {v} "
                    f"outside the second map's domain of {len(second)}"
                )
    return DiagramMorphism(
        stock_map=tuple(beta.stock_map[v] for v in alpha.stock_map),
        flow_map=tuple(beta.flow_map[v] for v in alpha.flow_map),
        link_map=tuple(beta.link_map[v] for v in alpha.link_map),
    )


# --- quotients ------------------------------------------------------------


def _classes(labels: Sequence[Hashable], n: int, sort: str) -> tuple[list[list[int]], list[int]]:
    """Group ids by label; classes ordered by smallest member. Returns
    (classes, class-of-id)."""
    if len(labels) != n:
        raise IllFormedPartition(f"partition assigns {len(labels)} of {n} {sort}s a class")
    by_label: dict[Hashable, list[int]] = {}
    for i, lab in enumerate(labels):
        by_label.setdefault(lab, []).append(i)
    classes = sorted(by_label.values(), key=lambda ids: ids[0])
    class_of = [0] * n
    for c, ids in enumerate(classes):
        for i in ids:
            class_of[i] = c
    return classes, class_of


def _merged_name(names: Sequence[str]) -> str:
    first = names[0]
    if all(n == first for n in names):
        return first
    return "≡".join(names)  # joined with '≡'


def _substitute_slots(expr: Expression, table: Sequence[int]) -> Expression:
    if isinstance(expr, LinkRef):
        return LinkRef(table[expr.slot])
    if isinstance(expr, Unary):
        return Unary(expr.op, _substitute_slots(expr.child, table))
    if isinstance(expr, Binary):
        return Binary(
            expr.op,
            _substitute_slots(expr.left, table),
            _substitute_slots(expr.right, table),
        )
    if isinstance(expr, SumVarRef):
        raise IllFormedPartition("sum-variable reference in a simple flow expression")
    return expr


def lump(
    src: StockFlowDiagram,
    stock_partition: Sequence[Hashable],
    flow_partition: Sequence[Hashable],
    link_partition: Sequence[Hashable],
) -> tuple[StockFlowDiagram, DiagramMorphism]:
    """Quotient a diagram by compatible partitions of stocks, flows, links.

    Each partition is a sequence of class labels, one per id.  The
    structure maps must respect the classes: merged flows must share the
    class of their upstream stocks and of their downstream stocks, and
    merged links the classes of their endpoints.  The quotient flow's
    rate is built as the sum of its preimage flows' expressions with link
    slots renumbered into the quotient's slot order, so the rate
    condition holds by construction.

    Class representatives are the smallest member ids; classes are
    ordered by representative.  Returns the quotient diagram and the
    quotient morphism.
    """
    prim = src.primitive
    stock_classes, stock_of = _classes(stock_partition, len(prim.stocks), "stock")
    flow_classes, flow_of = _classes(flow_partition, len(prim.flows), "flow")
    link_classes, link_of = _classes(link_partition, len(prim.links), "link")

    for ids in flow_classes:
        rep = prim.flows[ids[0]]
        for f in ids[1:]:
            flow = prim.flows[f]
            if stock_of[flow.up] != stock_of[rep.up]:
                raise IllFormedPartition(
                    f"flows '{rep.name}' and '{flow.name}' share a class but drain "
                    f"stocks '{prim.stocks[rep.up]}' and '{prim.stocks[flow.up]}' "
                    f"in different classes"
                )
            if stock_of[flow.down] != stock_of[rep.down]:
                raise IllFormedPartition(
                    f"flows '{rep.name}' and '{flow.name}' share a class but fill "
                    f"stocks '{prim.stocks[rep.down]}' and '{prim.stocks[flow.down]}' "
                    f"in different classes"
                )
    for ids in link_classes:
        rep = prim.links[ids[0]]
        for l in ids[1:]:
            link = prim.links[l]
            if stock_of[link.src] != stock_of[rep.src]:
                raise IllFormedPartition(
                    f"links {ids[0]} and {l} share a class but read stocks "
                    f"'{prim.stocks[rep.src]}' and '{prim.stocks[link.src]}' "
                    f"in different classes"
                )
            if flow_of[link.tgt] != flow_of[rep.tgt]:
                raise IllFormedPartition(
                    f"links {ids[0]} and {l} share a class but feed flows "
                    f"'{prim.flows[rep.tgt].name}' and '{prim.flows[link.tgt].name}' "
                    f"in different classes"
                )

    stocks = tuple(_merged_name([prim.stocks[i] for i in ids]) for ids in stock_classes)
    flows = tuple(
        Flow(
            _merged_name([prim.flows[i].name for i in ids]),
            stock_of[prim.flows[ids[0]].up],
            stock_of[prim.flows[ids[0]].down],
        )
        for ids in flow_classes
    )
    links = tuple(
        Link(stock_of[prim.links[ids[0]].src], flow_of[prim.links[ids[0]].tgt])
        for ids in link_classes
    )
    quotient_prim = PrimitiveStockFlow(stocks, flows, links)

    alpha = DiagramMorphism(tuple(stock_of), tuple(flow_of), tuple(link_of))

    exprs: list[Expression] = []
    for g, ids in enumerate(flow_classes):
        g_links = quotient_prim.flow_links(g)
        total: Expression | None = None
        for f in sorted(ids):
            table = [g_links.index(link_of[l]) for l in prim.flow_links(f)]
            term = _substitute_slots(src.flow_fn[f], table)
            total = term if total is None else Binary("add", total, term)
        exprs.append(total)
    quotient = StockFlowDiagram(quotient_prim, tuple(exprs))

    report = validate(quotient)
    if report:
        raise report[0]
    return quotient, alpha
