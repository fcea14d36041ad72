"""Open diagrams and their composition.

An open diagram wraps an inner diagram together with any number of legs.
A leg names an interface: a foot (a finite set of stocks, plus sum
variables and sum links for full-fledged diagrams) and maps sending each
foot element to an element of the inner diagram.  Legs are ordered; the
order is the port order used when wiring diagrams together.

Composition glues diagrams along feet.  Two gluing interfaces match when
their feet correspond element-by-element (by name unless an explicit
correspondence is given).  The glued diagram is computed concretely:
disjoint union of all parts, then identification of interface images by
union-find over the disjoint-union index space, with the smallest global
index as class representative and the result re-densified in
representative order.  Only the stock sort (and, for full-fledged
diagrams, the sum-variable and sum-link sorts) is ever identified; flows,
links, and auxiliary variables are copied verbatim, and every expression
survives unchanged because per-flow and per-variable slot order is
preserved.

Merged elements keep their common name when all merged names agree,
otherwise the distinct names are joined with '≡'.  Unmerged elements
whose names collide across parts are renamed with a part-index suffix
(or rejected when ``strict`` is on).  All merges and renames are logged
on the ``stockflow.compose`` logger.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

from .core import (
    Flow,
    FullStockFlow,
    Inflow,
    Link,
    Outflow,
    PrimitiveStockFlow,
    StockFlowDiagram,
    SumLink,
    SumVariableLink,
    VariableLink,
    validate,
)
from .errors import (
    DiagramMismatch,
    DuplicateName,
    FootMismatch,
    InconsistentFoot,
    JunctionFootMismatch,
    NameCollision,
    PortCountMismatch,
    SizeLimitExceeded,
    UnknownReference,
    ValidationError,
)
from .expr import Binary, Expression, LinkRef, Unary
from .morphism import DiagramMorphism

__all__ = [
    "SimpleFoot",
    "FullFoot",
    "Foot",
    "Leg",
    "OpenDiagram",
    "Box",
    "UWD",
    "make_open",
    "identity_open",
    "permute_legs",
    "compose_pair",
    "disjoint_union",
    "oapply",
    "validate_uwd",
    "iso_check",
]

log = logging.getLogger("stockflow.compose")


@dataclass(frozen=True)
class SimpleFoot:
    elements: tuple[str, ...]  # stock names; order is the element order


@dataclass(frozen=True)
class FullFoot:
    stocks: tuple[str, ...]
    sum_variables: tuple[str, ...] = ()
    sum_links: tuple[tuple[int, int], ...] = ()  # (stock idx, sum-variable idx)


Foot = Union[SimpleFoot, FullFoot]


@dataclass(frozen=True)
class Leg:
    foot: Foot
    stock_map: tuple[int, ...]  # foot stock idx -> inner stock id
    sumvar_map: tuple[int, ...] = ()
    sumlink_map: tuple[int, ...] = ()


@dataclass(frozen=True)
class OpenDiagram:
    inner: StockFlowDiagram | FullStockFlow
    legs: tuple[Leg, ...]

    @property
    def is_full(self) -> bool:
        return isinstance(self.inner, FullStockFlow)


@dataclass(frozen=True)
class Box:
    name: str
    ports: tuple[int, ...]  # junction id per port


@dataclass(frozen=True)
class UWD:
    boxes: tuple[Box, ...]
    n_junctions: int
    outer_ports: tuple[int, ...] = ()


# --- foot and leg construction --------------------------------------------


def _check_foot(foot: Foot) -> None:
    if isinstance(foot, SimpleFoot):
        if len(set(foot.elements)) != len(foot.elements):
            raise DuplicateName(f"foot has repeated elements: {foot.elements}")
        return
    if len(set(foot.stocks)) != len(foot.stocks):
        raise DuplicateName(f"foot has repeated stocks: {foot.stocks}")
    if len(set(foot.sum_variables)) != len(foot.sum_variables):
        raise DuplicateName(f"foot has repeated sum variables: {foot.sum_variables}")
    for s, v in foot.sum_links:
        if not 0 <= s < len(foot.stocks) or not 0 <= v < len(foot.sum_variables):
            raise UnknownReference(f"foot sum link ({s}, {v}) out of range")


def _foot_stocks(foot: Foot) -> tuple[str, ...]:
    return foot.elements if isinstance(foot, SimpleFoot) else foot.stocks


def make_open(
    inner: StockFlowDiagram | FullStockFlow,
    feet: Sequence[object] = (),
) -> OpenDiagram:
    """Wrap a diagram with legs, one per foot.

    A foot may be given as a sequence of stock names (sharing the inner
    names), a `SimpleFoot`/`FullFoot` whose element names match inner
    names, or a ``(foot, {foot name: inner name})`` pair for an explicit
    correspondence.
    """
    full = isinstance(inner, FullStockFlow)
    legs = []
    for entry in feet:
        foot, names = _normalize_foot(entry, full)
        _check_foot(foot)
        if isinstance(foot, SimpleFoot):
            stock_map = tuple(inner.stock_id(names.get(e, e)) for e in foot.elements)
            legs.append(Leg(foot, stock_map))
            continue
        stock_map = tuple(inner.stock_id(names.get(e, e)) for e in foot.stocks)
        sumvar_map = tuple(
            _sumvar_id(inner, names.get(e, e)) for e in foot.sum_variables
        )
        sumlink_map = _derive_sumlink_map(inner, foot, stock_map, sumvar_map)
        legs.append(Leg(foot, stock_map, sumvar_map, sumlink_map))
    return OpenDiagram(inner, tuple(legs))


def _normalize_foot(entry: object, full: bool) -> tuple[Foot, Mapping[str, str]]:
    names: Mapping[str, str] = {}
    if (
        isinstance(entry, tuple)
        and len(entry) == 2
        and isinstance(entry[0], (SimpleFoot, FullFoot))
        and isinstance(entry[1], Mapping)
    ):
        entry, names = entry
    if isinstance(entry, (SimpleFoot, FullFoot)):
        foot = entry
    else:
        foot = SimpleFoot(tuple(entry))
    if full and isinstance(foot, SimpleFoot):
        foot = FullFoot(stocks=foot.elements)
    if not full and isinstance(foot, FullFoot):
        raise DiagramMismatch("full-fledged foot on a simple diagram")
    return foot, names


def _sumvar_id(inner: FullStockFlow, name: str) -> int:
    try:
        return inner.sum_variables.index(name)
    except ValueError:
        raise UnknownReference(f"unknown sum variable '{name}'") from None


def _derive_sumlink_map(
    inner: FullStockFlow,
    foot: FullFoot,
    stock_map: tuple[int, ...],
    sumvar_map: tuple[int, ...],
) -> tuple[int, ...]:
    """Send each foot sum link to the matching inner sum link, by occurrence."""
    taken: list[int] = []
    out = []
    for s, v in foot.sum_links:
        want = SumLink(stock_map[s], sumvar_map[v])
        found = None
        for i, row in enumerate(inner.sum_links):
            if row == want and i not in taken:
                found = i
                break
        if found is None:
            raise InconsistentFoot(
                f"foot sum link ({foot.stocks[s]}, {foot.sum_variables[v]}) has no "
                f"matching sum link in the diagram"
            )
        taken.append(found)
        out.append(found)
    return tuple(out)


def identity_open(elements: Sequence[str]) -> OpenDiagram:
    """The identity interface: a discrete diagram with two identical legs."""
    inner = StockFlowDiagram(
        PrimitiveStockFlow(tuple(elements), (), ()), ()
    )
    foot = SimpleFoot(tuple(elements))
    ids = tuple(range(len(inner.stocks)))
    return OpenDiagram(inner, (Leg(foot, ids), Leg(foot, ids)))


def permute_legs(od: OpenDiagram, order: Sequence[int]) -> OpenDiagram:
    if sorted(order) != list(range(len(od.legs))):
        raise ValueError(f"not a permutation of {len(od.legs)} legs: {order}")
    return OpenDiagram(od.inner, tuple(od.legs[i] for i in order))


# --- union-find over disjoint-union indices -------------------------------


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        # smaller global index wins, so class representatives are canonical
        if rx > ry:
            rx, ry = ry, rx
        self.parent[ry] = rx

    def quotient(self) -> tuple[list[int], int]:
        """Dense new ids in representative order; returns (map, class count)."""
        roots = sorted({self.find(i) for i in range(len(self.parent))})
        new_id = {r: k for k, r in enumerate(roots)}
        return [new_id[self.find(i)] for i in range(len(self.parent))], len(roots)


def _offsets(counts: Sequence[int]) -> list[int]:
    out = [0]
    for c in counts:
        out.append(out[-1] + c)
    return out


def _merge_names(
    uf: _UnionFind,
    n_classes: int,
    quot: Sequence[int],
    global_names: Sequence[str],
    global_part: Sequence[int],
    part_names: Sequence[str],
    strict: bool,
    sort: str,
) -> tuple[str, ...]:
    """Name each quotient class; log merges; resolve collisions."""
    members: list[list[int]] = [[] for _ in range(n_classes)]
    for g, c in enumerate(quot):
        members[c].append(g)

    candidates: list[tuple[str, int]] = []
    for ids in members:
        names = []
        for g in ids:
            if global_names[g] not in names:
                names.append(global_names[g])
        merged = "≡".join(names)
        candidates.append((merged, global_part[ids[0]]))
        if len(ids) > 1:
            sources = ", ".join(
                f"{part_names[global_part[g]]}.{global_names[g]}" for g in ids
            )
            log.info("glued %ss into '%s': %s", sort, merged, sources)

    counts: dict[str, int] = {}
    for name, _ in candidates:
        counts[name] = counts.get(name, 0) + 1
    used: set[str] = set()
    out = []
    for c, (name, part) in enumerate(candidates):
        if counts[name] > 1 and len(members[c]) == 1:
            if strict:
                raise NameCollision(
                    f"{sort} name '{name}' appears in more than one part"
                )
            fresh = f"{name}_{part + 1}"
            n = part + 1
            while fresh in used or counts.get(fresh, 0) > 0:
                n += 1
                fresh = f"{name}_{n}"
            log.info("renamed %s '%s' from %s to '%s'", sort, name, part_names[part], fresh)
            name = fresh
        elif name in used:
            n = 1
            fresh = f"{name}_{n}"
            while fresh in used:
                n += 1
                fresh = f"{name}_{n}"
            name = fresh
        used.add(name)
        out.append(name)
    return tuple(out)


# --- gluing simple diagrams -----------------------------------------------


def _glue_simple(
    parts: Sequence[StockFlowDiagram],
    part_names: Sequence[str],
    unions: Iterable[tuple[int, int]],
    strict: bool,
) -> tuple[StockFlowDiagram, list[int]]:
    """Disjoint union of `parts` with global stock pairs identified.

    Returns the composite and the map from global stock index to new id.
    """
    s_off = _offsets([len(p.stocks) for p in parts])
    f_off = _offsets([len(p.flows) for p in parts])

    uf = _UnionFind(s_off[-1])
    for x, y in unions:
        uf.union(x, y)
    quot, n_classes = uf.quotient()

    global_names = [s for p in parts for s in p.stocks]
    global_part = [i for i, p in enumerate(parts) for _ in p.stocks]
    stocks = _merge_names(
        uf, n_classes, quot, global_names, global_part, part_names, strict, "stock"
    )

    flow_names = _unique_flat_names(
        [[f.name for f in p.flows] for p in parts], part_names, strict, "flow"
    )
    flows = []
    links = []
    flow_fn = []
    k = 0
    for i, p in enumerate(parts):
        for f in p.flows:
            flows.append(Flow(flow_names[k], quot[s_off[i] + f.up], quot[s_off[i] + f.down]))
            k += 1
        for l in p.links:
            links.append(Link(quot[s_off[i] + l.src], f_off[i] + l.tgt))
        flow_fn.extend(p.flow_fn)

    composite = StockFlowDiagram(
        PrimitiveStockFlow(stocks, tuple(flows), tuple(links)), tuple(flow_fn)
    )
    report = validate(composite)
    if report:
        raise report[0]
    return composite, quot


def _unique_flat_names(
    per_part: Sequence[Sequence[str]],
    part_names: Sequence[str],
    strict: bool,
    sort: str,
) -> list[str]:
    """Rename cross-part collisions among elements that never merge."""
    counts: dict[str, int] = {}
    for names in per_part:
        for n in names:
            counts[n] = counts.get(n, 0) + 1
    used: set[str] = set()
    out = []
    for part, names in enumerate(per_part):
        for name in names:
            if counts[name] > 1:
                if strict:
                    raise NameCollision(f"{sort} name '{name}' appears in more than one part")
                fresh = f"{name}_{part + 1}"
                n = part + 1
                while fresh in used or counts.get(fresh, 0) > 0:
                    n += 1
                    fresh = f"{name}_{n}"
                log.info("renamed %s '%s' from %s to '%s'", sort, name, part_names[part], fresh)
                name = fresh
            used.add(name)
            out.append(name)
    return out


# --- gluing full-fledged diagrams -----------------------------------------


def _glue_full(
    parts: Sequence[FullStockFlow],
    part_names: Sequence[str],
    stock_unions: Iterable[tuple[int, int]],
    sumvar_unions: Iterable[tuple[int, int]],
    sumlink_unions: Iterable[tuple[int, int]],
    strict: bool,
) -> tuple[FullStockFlow, list[int], list[int], list[int]]:
    s_off = _offsets([len(p.stocks) for p in parts])
    f_off = _offsets([len(p.flows) for p in parts])
    v_off = _offsets([len(p.variables) for p in parts])
    sv_off = _offsets([len(p.sum_variables) for p in parts])
    sl_off = _offsets([len(p.sum_links) for p in parts])

    s_uf = _UnionFind(s_off[-1])
    for x, y in stock_unions:
        s_uf.union(x, y)
    sv_uf = _UnionFind(sv_off[-1])
    for x, y in sumvar_unions:
        sv_uf.union(x, y)
    sl_uf = _UnionFind(sl_off[-1])
    for x, y in sumlink_unions:
        sl_uf.union(x, y)

    s_quot, s_n = s_uf.quotient()
    sv_quot, sv_n = sv_uf.quotient()
    sl_quot, sl_n = sl_uf.quotient()

    stocks = _merge_names(
        s_uf, s_n, s_quot,
        [s for p in parts for s in p.stocks],
        [i for i, p in enumerate(parts) for _ in p.stocks],
        part_names, strict, "stock",
    )
    sum_variables = _merge_names(
        sv_uf, sv_n, sv_quot,
        [s for p in parts for s in p.sum_variables],
        [i for i, p in enumerate(parts) for _ in p.sum_variables],
        part_names, strict, "sum variable",
    )
    flow_names = _unique_flat_names(
        [list(p.flows) for p in parts], part_names, strict, "flow"
    )
    var_names = _unique_flat_names(
        [list(p.variables) for p in parts], part_names, strict, "variable"
    )

    # sum links: one row per identified class, endpoints through the quotients
    sl_rows: list[SumLink | None] = [None] * sl_n
    for i, p in enumerate(parts):
        for l, row in enumerate(p.sum_links):
            c = sl_quot[sl_off[i] + l]
            glued = SumLink(s_quot[s_off[i] + row.src], sv_quot[sv_off[i] + row.tgt])
            if sl_rows[c] is None:
                sl_rows[c] = glued
            elif sl_rows[c] != glued:
                raise InconsistentFoot(
                    f"identified sum links disagree: {sl_rows[c]} vs {glued}"
                )

    inflows = []
    outflows = []
    fv = []
    variable_links = []
    sum_variable_links = []
    aux_fn = []
    for i, p in enumerate(parts):
        inflows += [Inflow(s_quot[s_off[i] + r.stock], f_off[i] + r.flow) for r in p.inflows]
        outflows += [Outflow(f_off[i] + r.flow, s_quot[s_off[i] + r.stock]) for r in p.outflows]
        fv += [v_off[i] + v for v in p.fv]
        variable_links += [
            VariableLink(s_quot[s_off[i] + r.src], v_off[i] + r.tgt) for r in p.variable_links
        ]
        sum_variable_links += [
            SumVariableLink(sv_quot[sv_off[i] + r.src], v_off[i] + r.tgt)
            for r in p.sum_variable_links
        ]
        aux_fn.extend(p.aux_fn)

    composite = FullStockFlow(
        stocks=stocks,
        flows=tuple(flow_names),
        variables=tuple(var_names),
        sum_variables=sum_variables,
        inflows=tuple(inflows),
        outflows=tuple(outflows),
        fv=tuple(fv),
        variable_links=tuple(variable_links),
        sum_variable_links=tuple(sum_variable_links),
        sum_links=tuple(sl_rows),
        aux_fn=tuple(aux_fn),
    )
    report = validate(composite)
    if report:
        raise report[0]
    return composite, s_quot, sv_quot, sl_quot


# --- foot correspondence --------------------------------------------------


def _correspond(
    fa: Foot, fb: Foot, correspondence: Mapping[str, str] | None
) -> tuple[list[tuple[int, int]], list[tuple[int, int]], list[tuple[int, int]]]:
    """Element-index pairs (a idx, b idx) for stocks, sum variables, sum links."""
    corr = correspondence or {}
    if type(fa) is not type(fb):
        raise FootMismatch(
            f"feet are different kinds: {type(fa).__name__} vs {type(fb).__name__}"
        )

    def match(names_a: Sequence[str], names_b: Sequence[str], what: str) -> list[tuple[int, int]]:
        if len(names_a) != len(names_b):
            raise FootMismatch(
                f"feet have {len(names_a)} and {len(names_b)} {what}s"
            )
        pairs = []
        seen = set()
        for i, name in enumerate(names_a):
            target = corr.get(name, name)
            try:
                j = names_b.index(target)
            except ValueError:
                raise FootMismatch(
                    f"foot {what} '{name}' has no counterpart '{target}'"
                ) from None
            if j in seen:
                raise FootMismatch(f"foot {what} '{target}' matched twice")
            seen.add(j)
            pairs.append((i, j))
        return pairs

    if isinstance(fa, SimpleFoot):
        return match(fa.elements, fb.elements, "element"), [], []

    stock_pairs = match(fa.stocks, fb.stocks, "stock")
    sumvar_pairs = match(fa.sum_variables, fb.sum_variables, "sum variable")
    s_to_b = dict(stock_pairs)
    v_to_b = dict(sumvar_pairs)

    if len(fa.sum_links) != len(fb.sum_links):
        raise FootMismatch(
            f"feet have {len(fa.sum_links)} and {len(fb.sum_links)} sum links"
        )
    remaining = list(range(len(fb.sum_links)))
    sumlink_pairs = []
    for k, (s, v) in enumerate(fa.sum_links):
        want = (s_to_b[s], v_to_b[v])
        hit = next((m for m in remaining if tuple(fb.sum_links[m]) == want), None)
        if hit is None:
            raise FootMismatch(
                f"foot sum link ({fa.stocks[s]}, {fa.sum_variables[v]}) has no counterpart"
            )
        remaining.remove(hit)
        sumlink_pairs.append((k, hit))
    return stock_pairs, sumvar_pairs, sumlink_pairs


# --- pairwise composition and disjoint union ------------------------------


def _remap_leg(leg: Leg, s_quot, s_base, sv_quot=None, sv_base=0, sl_quot=None, sl_base=0) -> Leg:
    return Leg(
        leg.foot,
        tuple(s_quot[s_base + i] for i in leg.stock_map),
        tuple(sv_quot[sv_base + i] for i in leg.sumvar_map) if sv_quot is not None else (),
        tuple(sl_quot[sl_base + i] for i in leg.sumlink_map) if sl_quot is not None else (),
    )


def compose_pair(
    a: OpenDiagram,
    a_leg: int,
    b: OpenDiagram,
    b_leg: int,
    correspondence: Mapping[str, str] | None = None,
    strict: bool = False,
) -> OpenDiagram:
    """Glue `a` and `b` along one leg of each.

    The two feet must correspond element-by-element, by name unless
    `correspondence` maps a-foot names to b-foot names.  The result keeps
    all remaining legs of `a` followed by those of `b`.
    """
    if a.is_full != b.is_full:
        raise DiagramMismatch("cannot compose a simple with a full-fledged diagram")
    if not 0 <= a_leg < len(a.legs):
        raise UnknownReference(f"diagram has no leg {a_leg}")
    if not 0 <= b_leg < len(b.legs):
        raise UnknownReference(f"diagram has no leg {b_leg}")

    la, lb = a.legs[a_leg], b.legs[b_leg]
    stock_pairs, sumvar_pairs, sumlink_pairs = _correspond(la.foot, lb.foot, correspondence)

    if not a.is_full:
        nA = len(a.inner.stocks)
        unions = [
            (la.stock_map[i], nA + lb.stock_map[j]) for i, j in stock_pairs
        ]
        composite, quot = _glue_simple(
            [a.inner, b.inner], ["a", "b"], unions, strict
        )
        legs = [
            _remap_leg(l, quot, 0) for k, l in enumerate(a.legs) if k != a_leg
        ] + [
            _remap_leg(l, quot, nA) for k, l in enumerate(b.legs) if k != b_leg
        ]
        return OpenDiagram(composite, tuple(legs))

    nA = len(a.inner.stocks)
    nAv = len(a.inner.sum_variables)
    nAl = len(a.inner.sum_links)
    composite, s_quot, sv_quot, sl_quot = _glue_full(
        [a.inner, b.inner],
        ["a", "b"],
        [(la.stock_map[i], nA + lb.stock_map[j]) for i, j in stock_pairs],
        [(la.sumvar_map[i], nAv + lb.sumvar_map[j]) for i, j in sumvar_pairs],
        [(la.sumlink_map[i], nAl + lb.sumlink_map[j]) for i, j in sumlink_pairs],
        strict,
    )
    legs = [
        _remap_leg(l, s_quot, 0, sv_quot, 0, sl_quot, 0)
        for k, l in enumerate(a.legs)
        if k != a_leg
    ] + [
        _remap_leg(l, s_quot, nA, sv_quot, nAv, sl_quot, nAl)
        for k, l in enumerate(b.legs)
        if k != b_leg
    ]
    return OpenDiagram(composite, tuple(legs))


def disjoint_union(a: OpenDiagram, b: OpenDiagram, strict: bool = False) -> OpenDiagram:
    """Coproduct on every sort; all legs kept, a's first."""
    if a.is_full != b.is_full:
        raise DiagramMismatch("cannot combine a simple with a full-fledged diagram")
    if not a.is_full:
        nA = len(a.inner.stocks)
        composite, quot = _glue_simple([a.inner, b.inner], ["a", "b"], [], strict)
        legs = [_remap_leg(l, quot, 0) for l in a.legs] + [
            _remap_leg(l, quot, nA) for l in b.legs
        ]
        return OpenDiagram(composite, tuple(legs))
    nA = len(a.inner.stocks)
    nAv = len(a.inner.sum_variables)
    nAl = len(a.inner.sum_links)
    composite, s_quot, sv_quot, sl_quot = _glue_full(
        [a.inner, b.inner], ["a", "b"], [], [], [], strict
    )
    legs = [_remap_leg(l, s_quot, 0, sv_quot, 0, sl_quot, 0) for l in a.legs] + [
        _remap_leg(l, s_quot, nA, sv_quot, nAv, sl_quot, nAl) for l in b.legs
    ]
    return OpenDiagram(composite, tuple(legs))


# --- wiring-diagram composition -------------------------------------------


def validate_uwd(pattern: UWD) -> list[ValidationError]:
    errs: list[ValidationError] = []
    seen = set()
    for box in pattern.boxes:
        if box.name in seen:
            errs.append(DuplicateName(f"duplicate box name '{box.name}'"))
        seen.add(box.name)
        for p, j in enumerate(box.ports):
            if not 0 <= j < pattern.n_junctions:
                errs.append(
                    UnknownReference(f"box '{box.name}' port {p} wired to missing junction {j}")
                )
    for k, j in enumerate(pattern.outer_ports):
        if not 0 <= j < pattern.n_junctions:
            errs.append(UnknownReference(f"outer port {k} wired to missing junction {j}"))
    return errs


def _foot_shape_matches(fa: Foot, fb: Foot) -> bool:
    try:
        _correspond(fa, fb, None)
    except FootMismatch:
        return False
    return True


def oapply(
    pattern: UWD,
    fillers: Mapping[str, OpenDiagram],
    strict: bool = False,
) -> OpenDiagram:
    """Compose several open diagrams as directed by a wiring diagram.

    Each box is filled by the open diagram of the same name; port k of a
    box is the filler's leg k.  All ports wired to a junction are glued
    there (their feet must correspond by name), and the junctions listed
    in `outer_ports` become the legs of the result, in order.
    """
    report = validate_uwd(pattern)
    if report:
        raise report[0]

    missing = [b.name for b in pattern.boxes if b.name not in fillers]
    if missing:
        raise UnknownReference(f"no filler for box '{missing[0]}'")
    extra = [n for n in fillers if all(b.name != n for b in pattern.boxes)]
    if extra:
        raise UnknownReference(f"filler '{extra[0]}' matches no box")

    parts = [fillers[b.name] for b in pattern.boxes]
    kinds = {p.is_full for p in parts}
    if len(kinds) > 1:
        raise DiagramMismatch("cannot mix simple and full-fledged fillers")
    full = parts[0].is_full if parts else False

    for box, part in zip(pattern.boxes, parts):
        if len(box.ports) != len(part.legs):
            raise PortCountMismatch(
                f"box '{box.name}' has {len(box.ports)} ports but its filler "
                f"has {len(part.legs)} legs"
            )

    # gather the ports on each junction as (box index, leg index)
    junction_ports: list[list[tuple[int, int]]] = [[] for _ in range(pattern.n_junctions)]
    for i, box in enumerate(pattern.boxes):
        for k, j in enumerate(box.ports):
            junction_ports[j].append((i, k))

    s_off = _offsets([len(p.inner.stocks) for p in parts])
    sv_off = _offsets(
        [len(p.inner.sum_variables) if full else 0 for p in parts]
    )
    sl_off = _offsets([len(p.inner.sum_links) if full else 0 for p in parts])

    stock_unions: list[tuple[int, int]] = []
    sumvar_unions: list[tuple[int, int]] = []
    sumlink_unions: list[tuple[int, int]] = []
    for j, ports in enumerate(junction_ports):
        if len(ports) < 2:
            continue
        i0, k0 = ports[0]
        leg0 = parts[i0].legs[k0]
        for i, k in ports[1:]:
            leg = parts[i].legs[k]
            try:
                sp, vp, lp = _correspond(leg0.foot, leg.foot, None)
            except FootMismatch as e:
                raise JunctionFootMismatch(
                    f"junction {j}: feet of box '{pattern.boxes[i0].name}' port {k0} "
                    f"and box '{pattern.boxes[i].name}' port {k} do not match: {e}"
                ) from None
            stock_unions += [
                (s_off[i0] + leg0.stock_map[x], s_off[i] + leg.stock_map[y])
                for x, y in sp
            ]
            sumvar_unions += [
                (sv_off[i0] + leg0.sumvar_map[x], sv_off[i] + leg.sumvar_map[y])
                for x, y in vp
            ]
            sumlink_unions += [
                (sl_off[i0] + leg0.sumlink_map[x], sl_off[i] + leg.sumlink_map[y])
                for x, y in lp
            ]

    part_names = [b.name for b in pattern.boxes]
    if not full:
        composite, quot = _glue_simple(
            [p.inner for p in parts], part_names, stock_unions, strict
        )
        sv_quot = sl_quot = None
    else:
        composite, quot, sv_quot, sl_quot = _glue_full(
            [p.inner for p in parts],
            part_names,
            stock_unions,
            sumvar_unions,
            sumlink_unions,
            strict,
        )

    legs = []
    for j in pattern.outer_ports:
        if not junction_ports[j]:
            raise JunctionFootMismatch(
                f"outer port wired to junction {j}, which touches no box port"
            )
        i, k = junction_ports[j][0]
        leg = parts[i].legs[k]
        if not full:
            legs.append(_remap_leg(leg, quot, s_off[i]))
        else:
            legs.append(
                _remap_leg(leg, quot, s_off[i], sv_quot, sv_off[i], sl_quot, sl_off[i])
            )
    return OpenDiagram(composite, tuple(legs))


# --- isomorphism search ---------------------------------------------------


def _substitute(expr: Expression, table: Sequence[int]) -> Expression:
    if isinstance(expr, LinkRef):
        return LinkRef(table[expr.slot])
    if isinstance(expr, Unary):
        return Unary(expr.op, _substitute(expr.child, table))
    if isinstance(expr, Binary):
        return Binary(expr.op, _substitute(expr.left, table), _substitute(expr.right, table))
    return expr


def iso_check(
    a: OpenDiagram, b: OpenDiagram, max_stocks: int = 12
) -> DiagramMorphism | None:
    """Search for a leg-compatible isomorphism from `a` to `b`.

    Names are ignored; structure, rate expressions (up to slot
    renumbering), and legs (same feet, commuting stock maps) must match.
    Returns the isomorphism as a morphism, or None.  Backtracking search;
    diagrams above `max_stocks` stocks are refused.
    """
    if a.is_full or b.is_full:
        raise TypeError("isomorphism search covers simple diagrams only")
    da, db = a.inner, b.inner
    if len(da.stocks) > max_stocks or len(db.stocks) > max_stocks:
        raise SizeLimitExceeded(
            f"{max(len(da.stocks), len(db.stocks))} stocks exceeds the "
            f"isomorphism-search bound of {max_stocks}"
        )
    if (
        len(da.stocks) != len(db.stocks)
        or len(da.flows) != len(db.flows)
        or len(da.links) != len(db.links)
        or len(a.legs) != len(b.legs)
    ):
        return None

    # legs pin part of the stock bijection
    pinned: dict[int, int] = {}
    for la, lb in zip(a.legs, b.legs):
        if la.foot != lb.foot:
            return None
        for x, y in zip(la.stock_map, lb.stock_map):
            if pinned.get(x, y) != y:
                return None
            pinned[x] = y
    if len(set(pinned.values())) != len(pinned):
        return None

    def signature(d: StockFlowDiagram, s: int) -> tuple:
        return (
            sum(1 for f in d.flows if f.up == s),
            sum(1 for f in d.flows if f.down == s),
            sum(1 for l in d.links if l.src == s),
        )

    sig_a = [signature(da, s) for s in range(len(da.stocks))]
    sig_b = [signature(db, s) for s in range(len(db.stocks))]
    candidates = []
    for s in range(len(da.stocks)):
        if s in pinned:
            opts = [pinned[s]] if sig_b[pinned[s]] == sig_a[s] else []
        else:
            opts = [t for t in range(len(db.stocks)) if sig_b[t] == sig_a[s] and t not in pinned.values()]
        if not opts:
            return None
        candidates.append(opts)

    order = sorted(range(len(da.stocks)), key=lambda s: len(candidates[s]))
    sigma: dict[int, int] = {}
    used: set[int] = set()

    def assign(idx: int) -> DiagramMorphism | None:
        if idx == len(order):
            return _match_flows(da, db, sigma)
        s = order[idx]
        for t in candidates[s]:
            if t in used:
                continue
            sigma[s] = t
            used.add(t)
            found = assign(idx + 1)
            if found is not None:
                return found
            del sigma[s]
            used.discard(t)
        return None

    return assign(0)


def _match_flows(
    da: StockFlowDiagram, db: StockFlowDiagram, sigma: Mapping[int, int]
) -> DiagramMorphism | None:
    """Extend a stock bijection to flows and links, or fail."""
    n_flows = len(da.flows)
    flow_map: dict[int, int] = {}
    link_map: dict[int, int] = {}
    used: set[int] = set()

    def try_flow(f: int) -> bool:
        if f == n_flows:
            return True
        fa = da.flows[f]
        for g in range(n_flows):
            if g in used:
                continue
            gb = db.flows[g]
            if sigma[fa.up] != gb.up or sigma[fa.down] != gb.down:
                continue
            slots = _match_slots(da, db, sigma, f, g)
            if slots is None:
                continue
            a_links = da.flow_links(f)
            b_links = db.flow_links(g)
            flow_map[f] = g
            for k, m in enumerate(slots):
                link_map[a_links[k]] = b_links[m]
            used.add(g)
            if try_flow(f + 1):
                return True
            used.discard(g)
            del flow_map[f]
            for k in a_links:
                link_map.pop(k, None)
        return False

    if not try_flow(0):
        return None
    return DiagramMorphism(
        stock_map=tuple(sigma[s] for s in range(len(da.stocks))),
        flow_map=tuple(flow_map[f] for f in range(n_flows)),
        link_map=tuple(link_map[l] for l in range(len(da.links))),
    )


def _match_slots(
    da: StockFlowDiagram,
    db: StockFlowDiagram,
    sigma: Mapping[int, int],
    f: int,
    g: int,
) -> tuple[int, ...] | None:
    """A slot permutation sending f's links to g's links, compatible with
    the stock bijection and making the rate expressions equal."""
    a_links = da.flow_links(f)
    b_links = db.flow_links(g)
    if len(a_links) != len(b_links):
        return None
    a_srcs = [sigma[da.links[l].src] for l in a_links]
    b_srcs = [db.links[l].src for l in b_links]

    positions: list[list[int]] = []
    for src in a_srcs:
        opts = [m for m, s in enumerate(b_srcs) if s == src]
        if not opts:
            return None
        positions.append(opts)

    for table in itertools.product(*positions):
        if len(set(table)) != len(table):
            continue
        if _substitute(da.flow_fn[f], table) == db.flow_fn[g]:
            return table
    return None
