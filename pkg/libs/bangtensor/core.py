"""
!-Tensor Core
Names, edgeterms, !-tensor expressions, contexts and well-formedness checking
"""
from __future__ import annotations

from collections import Counter
from enum import Enum
from typing import (
    Annotated,
    Callable,
    Dict,
    FrozenSet,
    Iterable,
    Iterator,
    List,
    Literal,
    Optional,
    Sequence,
    Tuple,
    Union,
)

from pydantic import BaseModel, ConfigDict, Field

from libs.bangtensor.errors import IllFormedError, NotFoundError

Context = Tuple[str, ...]


class Direction(str, Enum):
    """Direction of an edge end: output (hat) or input (check)"""

    OUTPUT = "+"
    INPUT = "-"

    @property
    def opposite(self) -> "Direction":
        return Direction.INPUT if self is Direction.OUTPUT else Direction.OUTPUT


class GroupDirection(str, Enum):
    """Expansion direction of an edge group"""

    CLOCKWISE = "clockwise"
    ANTICLOCKWISE = "anticlockwise"


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


# =============================================================================
# Edgeterms
# =============================================================================


class DirectedEdge(_Frozen):
    """A named edge end attached to a generator occurrence"""

    kind: Literal["edge"] = "edge"
    name: str
    direction: Direction

    @property
    def partner(self) -> "DirectedEdge":
        return DirectedEdge(name=self.name, direction=self.direction.opposite)

    def __str__(self) -> str:
        return f"{self.direction.value}{self.name}"


class Group(_Frozen):
    """An edge group `[e>A` (clockwise) or `<e]A` (anticlockwise)"""

    kind: Literal["group"] = "group"
    direction: GroupDirection
    box: str
    body: Tuple[EdgeItem, ...] = ()

    def __str__(self) -> str:
        inner = " ".join(str(item) for item in self.body)
        if self.direction is GroupDirection.CLOCKWISE:
            return f"[{inner}>{self.box}"
        return f"<{inner}]{self.box}"


EdgeItem = Annotated[Union[DirectedEdge, Group], Field(discriminator="kind")]
EdgeTerm = Tuple[EdgeItem, ...]


# =============================================================================
# Factors and expressions
# =============================================================================


class Unit(_Frozen):
    """The empty tensor `1` written as an explicit factor"""

    kind: Literal["unit"] = "unit"

    def __str__(self) -> str:
        return "1"


class IdentityWire(_Frozen):
    """Identity wire `id{+output -input}`"""

    kind: Literal["wire"] = "wire"
    output: str
    input: str

    @property
    def edges(self) -> EdgeTerm:
        return (
            DirectedEdge(name=self.output, direction=Direction.OUTPUT),
            DirectedEdge(name=self.input, direction=Direction.INPUT),
        )

    def __str__(self) -> str:
        return f"id{{+{self.output} -{self.input}}}"


class Generator(_Frozen):
    """Generator occurrence `name{edgeterm}`"""

    kind: Literal["generator"] = "generator"
    name: str
    edges: EdgeTerm = ()

    def __str__(self) -> str:
        inner = " ".join(str(item) for item in self.edges)
        return f"{self.name}{{{inner}}}"


class Box(_Frozen):
    """Named !-box `[body]A`"""

    kind: Literal["box"] = "box"
    name: str
    body: TensorExpr

    def __str__(self) -> str:
        return f"[{self.body}]{self.name}"


Factor = Annotated[Union[Unit, IdentityWire, Generator, Box], Field(discriminator="kind")]
Leaf = Union[IdentityWire, Generator]


class TensorExpr(_Frozen):
    """A product of factors; the empty product is the tensor `1`"""

    factors: Tuple[Factor, ...] = ()

    def __str__(self) -> str:
        if not self.factors:
            return "1"
        return " ".join(str(factor) for factor in self.factors)

    def __mul__(self, other: "TensorExpr") -> "TensorExpr":
        return TensorExpr(factors=self.factors + other.factors)


Group.model_rebuild()
Box.model_rebuild()
TensorExpr.model_rebuild()

EMPTY = TensorExpr()


def product(*exprs: TensorExpr) -> TensorExpr:
    """Concatenate the factors of several expressions"""
    factors: Tuple[Factor, ...] = ()
    for expr in exprs:
        factors += expr.factors
    return TensorExpr(factors=factors)


def output(name: str) -> DirectedEdge:
    return DirectedEdge(name=name, direction=Direction.OUTPUT)


def input_(name: str) -> DirectedEdge:
    return DirectedEdge(name=name, direction=Direction.INPUT)


# =============================================================================
# Traversal
# =============================================================================


class EdgeOccurrence(_Frozen):
    """A directed edge together with its edge and node contexts"""

    edge: DirectedEdge
    ectx: Context
    nctx: Context

    @property
    def ctx(self) -> Context:
        return self.ectx + self.nctx


def iter_edge_items(
    items: Sequence[EdgeItem], ectx: Context = ()
) -> Iterator[Tuple[DirectedEdge, Context]]:
    """Yield the directed edges of an edgeterm with their edge contexts"""
    for item in items:
        if isinstance(item, DirectedEdge):
            yield item, ectx
        else:
            yield from iter_edge_items(item.body, (item.box,) + ectx)


def iter_leaves(expr: TensorExpr, nctx: Context = ()) -> Iterator[Tuple[Leaf, Context]]:
    """Yield generator and wire occurrences with their node contexts"""
    for factor in expr.factors:
        if isinstance(factor, (Generator, IdentityWire)):
            yield factor, nctx
        elif isinstance(factor, Box):
            yield from iter_leaves(factor.body, (factor.name,) + nctx)


def iter_occurrences(expr: TensorExpr) -> Iterator[EdgeOccurrence]:
    """Yield every directed edge occurrence in traversal order"""
    for leaf, nctx in iter_leaves(expr):
        for edge, ectx in iter_edge_items(leaf.edges):
            yield EdgeOccurrence(edge=edge, ectx=ectx, nctx=nctx)


def iter_boxes(expr: TensorExpr, enclosing: Context = ()) -> Iterator[Tuple[Box, Context]]:
    """Yield every Box factor with the boxes enclosing it, innermost first"""
    for factor in expr.factors:
        if isinstance(factor, Box):
            yield factor, enclosing
            yield from iter_boxes(factor.body, (factor.name,) + enclosing)


def iter_groups(items: Sequence[EdgeItem]) -> Iterator[Group]:
    for item in items:
        if isinstance(item, Group):
            yield item
            yield from iter_groups(item.body)


# =============================================================================
# Names
# =============================================================================


def boxes(expr: TensorExpr) -> FrozenSet[str]:
    """Names of the Box factors of an expression"""
    return frozenset(box.name for box, _ in iter_boxes(expr))


def group_boxes(expr: TensorExpr) -> FrozenSet[str]:
    """Box names referenced by edge groups"""
    return frozenset(
        group.box for leaf, _ in iter_leaves(expr) for group in iter_groups(leaf.edges)
    )


def box_names(expr: TensorExpr) -> FrozenSet[str]:
    """Every box name occurring anywhere in the expression"""
    return boxes(expr) | group_boxes(expr)


def edge_names(expr: TensorExpr) -> FrozenSet[str]:
    return frozenset(occ.edge.name for occ in iter_occurrences(expr))


def free_edges(expr: TensorExpr) -> FrozenSet[DirectedEdge]:
    """Directed edges whose name occurs with exactly one direction"""
    seen: Dict[str, set] = {}
    for occ in iter_occurrences(expr):
        seen.setdefault(occ.edge.name, set()).add(occ.edge.direction)
    return frozenset(
        DirectedEdge(name=name, direction=next(iter(dirs)))
        for name, dirs in seen.items()
        if len(dirs) == 1
    )


def free_names(expr: TensorExpr) -> FrozenSet[str]:
    return frozenset(edge.name for edge in free_edges(expr))


def bound_names(expr: TensorExpr) -> FrozenSet[str]:
    """Edge names occurring with both directions"""
    return edge_names(expr) - free_names(expr)


def box_parents(expr: TensorExpr) -> Dict[str, Optional[str]]:
    """Map each Box name to the box it is immediately nested in (None at top level)"""
    parents: Dict[str, Optional[str]] = {}
    for box, enclosing in iter_boxes(expr):
        parents.setdefault(box.name, enclosing[0] if enclosing else None)
    return parents


def nesting(expr: TensorExpr) -> FrozenSet[Tuple[str, str]]:
    """Immediate nesting pairs (A, B) meaning A is nested directly inside B"""
    return frozenset(
        (child, parent) for child, parent in box_parents(expr).items() if parent is not None
    )


def find_box(expr: TensorExpr, name: str) -> Optional[Box]:
    for box, _ in iter_boxes(expr):
        if box.name == name:
            return box
    return None


def top_level_boxes(expr: TensorExpr) -> List[str]:
    return sorted(f.name for f in expr.factors if isinstance(f, Box))


# =============================================================================
# Contexts
# =============================================================================


def find_occurrence(expr: TensorExpr, edge: DirectedEdge) -> EdgeOccurrence:
    for occ in iter_occurrences(expr):
        if occ.edge == edge:
            return occ
    raise NotFoundError(f"{edge} does not occur in {expr}")


def edge_context(expr: TensorExpr, edge: DirectedEdge) -> Context:
    """Groups enclosing the edge inside its edgeterm, innermost first"""
    return find_occurrence(expr, edge).ectx


def node_context(expr: TensorExpr, edge: DirectedEdge) -> Context:
    """Boxes enclosing the edge's generator occurrence, innermost first"""
    return find_occurrence(expr, edge).nctx


def context(expr: TensorExpr, edge: DirectedEdge) -> Context:
    return find_occurrence(expr, edge).ctx


# =============================================================================
# Well-formedness
# =============================================================================


class ViolationCode(str, Enum):
    F1 = "F1"
    F2 = "F2"
    C1 = "C1"
    C2 = "C2"
    C3 = "C3"


class Violation(_Frozen):
    """A failed well-formedness condition"""

    code: ViolationCode
    names: Tuple[str, ...]
    description: str

    def __str__(self) -> str:
        return f"{self.code.value} violation on {', '.join(self.names)}: {self.description}"


def c3_witness(
    out_occ: EdgeOccurrence, in_occ: EdgeOccurrence
) -> Optional[Tuple[Context, Context]]:
    """
    Search lists es, bs with es.nctx(-a) = ectx(+a).bs and es.nctx(+a) = ectx(-a).bs

    Candidates for es are the prefixes of both edge contexts; bs is then forced
    by the first equation.

    Returns:
        The first witness pair found, or None
    """
    e_out, n_out = out_occ.ectx, out_occ.nctx
    e_in, n_in = in_occ.ectx, in_occ.nctx
    candidates: List[Context] = []
    for source in (e_out, e_in):
        for k in range(len(source) + 1):
            if source[:k] not in candidates:
                candidates.append(source[:k])
    for es in candidates:
        lhs = es + n_in
        if lhs[: len(e_out)] != e_out:
            continue
        bs = lhs[len(e_out) :]
        if es + n_out == e_in + bs:
            return es, bs
    return None


def check_wellformed(expr: TensorExpr) -> List[Violation]:
    """
    Check the conditions F1, F2, C1, C2 and C3

    Args:
        expr: A !-pretensor expression

    Returns:
        Every violated condition; an empty list means the expression is well-formed
    """
    violations: List[Violation] = []

    def report(violation: Violation) -> None:
        if violation not in violations:
            violations.append(violation)

    occurrences = list(iter_occurrences(expr))
    edge_counts = Counter(occ.edge for occ in occurrences)
    for edge, count in edge_counts.items():
        if count > 1:
            description = f"{edge} occurs {count} times"
            report(Violation(code=ViolationCode.F1, names=(edge.name,), description=description))

    box_counts = Counter(box.name for box, _ in iter_boxes(expr))
    for name, count in box_counts.items():
        if count > 1:
            description = f"box {name} occurs {count} times"
            report(Violation(code=ViolationCode.F2, names=(name,), description=description))

    parents = box_parents(expr)
    for occ in occurrences:
        name = occ.edge.name
        overlap = sorted(set(occ.ectx) & set(occ.nctx))
        if overlap:
            report(
                Violation(
                    code=ViolationCode.C1,
                    names=(name,),
                    description=(
                        f"{occ.edge} has {', '.join(overlap)} in both edge and node context"
                    ),
                )
            )
        missing = [b for b in occ.ectx if b not in parents]
        if missing:
            report(
                Violation(
                    code=ViolationCode.C2,
                    names=(name,),
                    description=f"{occ.edge} is grouped by missing box {', '.join(missing)}",
                )
            )
            continue
        for inner, outer in zip(occ.ectx, occ.ectx[1:]):
            if parents[inner] != outer:
                report(
                    Violation(
                        code=ViolationCode.C2,
                        names=(name,),
                        description=f"{occ.edge} requires {inner} to be nested in {outer}",
                    )
                )
                break

    by_edge = {occ.edge: occ for occ in occurrences}
    for name in sorted({occ.edge.name for occ in occurrences}):
        out_occ = by_edge.get(output(name))
        in_occ = by_edge.get(input_(name))
        if out_occ is None or in_occ is None:
            continue
        if c3_witness(out_occ, in_occ) is None:
            report(
                Violation(
                    code=ViolationCode.C3,
                    names=(name,),
                    description=(
                        f"contexts of +{name} ({_fmt(out_occ.ectx)}/{_fmt(out_occ.nctx)}) and "
                        f"-{name} ({_fmt(in_occ.ectx)}/{_fmt(in_occ.nctx)}) are incompatible"
                    ),
                )
            )
    return violations


def _fmt(ctx: Context) -> str:
    return "[" + ",".join(ctx) + "]"


def is_wellformed(expr: TensorExpr) -> bool:
    return not check_wellformed(expr)


def require_wellformed(expr: TensorExpr) -> TensorExpr:
    """Return the expression unchanged or raise IllFormedError"""
    violations = check_wellformed(expr)
    if violations:
        raise IllFormedError(violations)
    return expr


# =============================================================================
# Renaming
# =============================================================================


def map_edge_items(
    items: Sequence[EdgeItem],
    edge_fn: Callable[[DirectedEdge], DirectedEdge],
    box_fn: Callable[[str], str],
) -> EdgeTerm:
    mapped: List[EdgeItem] = []
    for item in items:
        if isinstance(item, DirectedEdge):
            mapped.append(edge_fn(item))
        else:
            mapped.append(
                Group(
                    direction=item.direction,
                    box=box_fn(item.box),
                    body=map_edge_items(item.body, edge_fn, box_fn),
                )
            )
    return tuple(mapped)


def map_names(
    expr: TensorExpr,
    edge_fn: Callable[[DirectedEdge], DirectedEdge] = lambda e: e,
    box_fn: Callable[[str], str] = lambda b: b,
) -> TensorExpr:
    """Apply name substitutions to every edge end and box name"""
    factors: List[Factor] = []
    for factor in expr.factors:
        if isinstance(factor, Generator):
            edges = map_edge_items(factor.edges, edge_fn, box_fn)
            factors.append(Generator(name=factor.name, edges=edges))
        elif isinstance(factor, IdentityWire):
            out_edge, in_edge = (edge_fn(e) for e in factor.edges)
            factors.append(IdentityWire(output=out_edge.name, input=in_edge.name))
        elif isinstance(factor, Box):
            body = map_names(factor.body, edge_fn, box_fn)
            factors.append(Box(name=box_fn(factor.name), body=body))
        else:
            factors.append(factor)
    return TensorExpr(factors=tuple(factors))


def rename_names(
    expr: TensorExpr, edges: Dict[str, str], boxes_map: Optional[Dict[str, str]] = None
) -> TensorExpr:
    """Substitute edge names (both directions) and box names by dictionary lookup"""
    box_lookup = boxes_map or {}
    return map_names(
        expr,
        lambda e: DirectedEdge(name=edges.get(e.name, e.name), direction=e.direction),
        lambda b: box_lookup.get(b, b),
    )


# =============================================================================
# Structural simplification
# =============================================================================


def _clean_items(items: Sequence[EdgeItem]) -> EdgeTerm:
    cleaned: List[EdgeItem] = []
    for item in items:
        if isinstance(item, Group):
            body = _clean_items(item.body)
            if body:
                cleaned.append(Group(direction=item.direction, box=item.box, body=body))
        else:
            cleaned.append(item)
    return tuple(cleaned)


def drop_units(expr: TensorExpr) -> TensorExpr:
    """Remove explicit unit factors and empty edge groups at every depth"""
    factors: List[Factor] = []
    for factor in expr.factors:
        if isinstance(factor, Unit):
            continue
        if isinstance(factor, Generator):
            factors.append(Generator(name=factor.name, edges=_clean_items(factor.edges)))
        elif isinstance(factor, Box):
            factors.append(Box(name=factor.name, body=drop_units(factor.body)))
        else:
            factors.append(factor)
    return TensorExpr(factors=tuple(factors))


def _remove_wire(expr: TensorExpr, wire: IdentityWire) -> TensorExpr:
    factors: List[Factor] = []
    for factor in expr.factors:
        if factor == wire:
            continue
        if isinstance(factor, Box):
            factors.append(Box(name=factor.name, body=_remove_wire(factor.body, wire)))
        else:
            factors.append(factor)
    return TensorExpr(factors=tuple(factors))


def _rename_end(expr: TensorExpr, old: DirectedEdge, new_name: str) -> TensorExpr:
    return map_names(
        expr, lambda e: DirectedEdge(name=new_name, direction=e.direction) if e == old else e
    )


def _is_suffix(short: Context, long: Context) -> bool:
    return len(short) <= len(long) and long[len(long) - len(short) :] == short


def contract_step(expr: TensorExpr) -> Optional[TensorExpr]:
    """
    Eliminate one identity wire, innermost first

    A wire `id{+b -a}` is removed by renaming its partner `-b` to `-a`; failing
    that, `id{+a -b}` is removed by renaming the partner `+b` to `+a`. The partner
    must sit in the wire's box nest or outside it.

    Returns:
        The contracted expression, or None when no wire is eliminable
    """
    occurrences = {occ.edge: occ for occ in iter_occurrences(expr)}
    wires = [(leaf, nctx) for leaf, nctx in iter_leaves(expr) if isinstance(leaf, IdentityWire)]
    wires.sort(key=lambda pair: -len(pair[1]))
    for wire, nctx in wires:
        if wire.output == wire.input:
            continue
        partner = occurrences.get(input_(wire.output))
        if partner is not None and _is_suffix(partner.nctx, nctx):
            return _rename_end(_remove_wire(expr, wire), input_(wire.output), wire.input)
        partner = occurrences.get(output(wire.input))
        if partner is not None and _is_suffix(partner.nctx, nctx):
            return _rename_end(_remove_wire(expr, wire), output(wire.input), wire.output)
    return None


def simplify(expr: TensorExpr) -> TensorExpr:
    """Drop units and empty groups, then contract eliminable identity wires"""
    current = drop_units(expr)
    while True:
        contracted = contract_step(current)
        if contracted is None:
            return current
        current = contracted


def is_concrete(expr: TensorExpr) -> bool:
    """True iff no Box factor and no edge group occurs"""
    for factor in expr.factors:
        if isinstance(factor, Box):
            return False
        if isinstance(factor, Generator) and any(isinstance(i, Group) for i in factor.edges):
            return False
    return True


# =============================================================================
# Equivalence
# =============================================================================


def normalize(expr: TensorExpr) -> TensorExpr:
    """
    Canonical representative of the expression's equivalence class

    Raises:
        IllFormedError: if the expression is not well-formed
    """
    from libs.bangtensor.canonical import canonicalize

    require_wellformed(expr)
    return canonicalize([simplify(expr)]).exprs[0]


def canonical_key(expr: TensorExpr, anonymous: Iterable[str] = ()) -> str:
    """Printed canonical form, optionally treating some free names as interchangeable"""
    from libs.bangtensor.canonical import canonicalize

    return canonicalize([simplify(expr)], anonymous=frozenset(anonymous)).key


def equiv(left: TensorExpr, right: TensorExpr) -> bool:
    """Decide left ≡ right by comparing canonical forms"""
    require_wellformed(left)
    require_wellformed(right)
    return canonical_key(left) == canonical_key(right)
