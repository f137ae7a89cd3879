"""
!-Box Operations
Freshness functions, Exp/Kill/Copy/Drop, weakening and free-name renaming
"""
from __future__ import annotations

import re
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from pydantic import BaseModel, ConfigDict

from libs.bangtensor.core import (
    Box,
    Context,
    DirectedEdge,
    EdgeItem,
    EdgeOccurrence,
    Factor,
    Generator,
    Group,
    GroupDirection,
    TensorExpr,
    box_names,
    boxes,
    bound_names,
    check_wellformed,
    edge_names,
    free_names,
    map_edge_items,
    map_names,
    rename_names,
)
from libs.bangtensor.errors import (
    IllFormedResultError,
    NameClashError,
    NotFoundError,
    NotFreeError,
    UnknownBoxError,
)

_SUFFIX = re.compile(r"^(.*?)(?:\.([0-9]+))?$")


def base_name(name: str) -> str:
    """Strip a trailing freshness suffix: `a.3` -> `a`"""
    match = _SUFFIX.match(name)
    return match.group(1) if match else name


class FreshnessFunction:
    """
    Deterministic freshness function for a pair of used name sets

    Each queried name maps to its base name with the smallest positive suffix
    `.k` not yet used; images are memoized and recorded as used, so the
    function stays injective on the names actually queried. Instances are
    mutable and single-owner; use `fork` for independent branches.
    """

    def __init__(self, used_edges: Iterable[str] = (), used_boxes: Iterable[str] = ()):
        self._used_edges: Set[str] = set(used_edges)
        self._used_boxes: Set[str] = set(used_boxes)
        self._edge_map: Dict[str, str] = {}
        self._box_map: Dict[str, str] = {}

    def edge(self, name: str) -> str:
        if name not in self._edge_map:
            self._edge_map[name] = self._next(name, self._used_edges)
        return self._edge_map[name]

    def box(self, name: str) -> str:
        if name not in self._box_map:
            self._box_map[name] = self._next(name, self._used_boxes)
        return self._box_map[name]

    @staticmethod
    def _next(name: str, used: Set[str]) -> str:
        base = base_name(name)
        k = 1
        while f"{base}.{k}" in used:
            k += 1
        fresh = f"{base}.{k}"
        used.add(fresh)
        return fresh

    def avoid(self, exprs: Iterable[TensorExpr]) -> "FreshnessFunction":
        """Add every name of the given expressions to the used sets"""
        for expr in exprs:
            self._used_edges |= edge_names(expr)
            self._used_boxes |= box_names(expr)
        return self

    def fork(self) -> "FreshnessFunction":
        clone = FreshnessFunction(self._used_edges, self._used_boxes)
        clone._edge_map = dict(self._edge_map)
        clone._box_map = dict(self._box_map)
        return clone

    @property
    def edge_map(self) -> Dict[str, str]:
        return dict(self._edge_map)

    @property
    def box_map(self) -> Dict[str, str]:
        return dict(self._box_map)

    def apply(self, expr: TensorExpr) -> TensorExpr:
        """fr(G): substitute fresh names for every edge and box name"""
        return map_names(
            expr,
            lambda e: DirectedEdge(name=self.edge(e.name), direction=e.direction),
            self.box,
        )

    def apply_items(self, items: Sequence[EdgeItem]) -> Tuple[EdgeItem, ...]:
        return map_edge_items(
            items,
            lambda e: DirectedEdge(name=self.edge(e.name), direction=e.direction),
            self.box,
        )

    def __repr__(self) -> str:
        return f"FreshnessFunction(edges={self._edge_map}, boxes={self._box_map})"


def fresh_for(exprs: Iterable[TensorExpr]) -> FreshnessFunction:
    """A freshness function avoiding every edge and box name of the expressions"""
    return FreshnessFunction().avoid(exprs)


class OpKind(str, Enum):
    EXP = "exp"
    KILL = "kill"
    COPY = "copy"
    DROP = "drop"

    @property
    def needs_fresh(self) -> bool:
        return self in (OpKind.EXP, OpKind.COPY)


class BoxOp(BaseModel):
    """A !-box operation with its target and (for Exp/Copy) freshness function"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: OpKind
    target: str
    fr: Optional[FreshnessFunction] = None

    def __str__(self) -> str:
        return f"{self.kind.value} {self.target}"


def _require_box(name: str, expr: TensorExpr) -> None:
    if name not in box_names(expr):
        raise UnknownBoxError(name)


# =============================================================================
# Operations
# =============================================================================


def _items(
    items: Sequence[EdgeItem], target: str, kind: OpKind, fr: Optional[FreshnessFunction]
) -> List[EdgeItem]:
    result: List[EdgeItem] = []
    for item in items:
        if isinstance(item, DirectedEdge):
            result.append(item)
            continue
        if item.box != target:
            body = tuple(_items(item.body, target, kind, fr))
            result.append(Group(direction=item.direction, box=item.box, body=body))
            continue

        clockwise = item.direction is GroupDirection.CLOCKWISE
        if kind is OpKind.KILL:
            continue
        if kind is OpKind.DROP:
            result.extend(item.body)
            continue
        assert fr is not None
        fresh = fr.apply_items(item.body)
        if kind is OpKind.EXP:
            if clockwise:
                result.append(item)
                result.extend(fresh)
            else:
                result.extend(fresh)
                result.append(item)
        else:
            copy = Group(direction=item.direction, box=fr.box(item.box), body=fresh)
            result.extend([item, copy] if clockwise else [copy, item])
    return result


def _factors(
    expr: TensorExpr, target: str, kind: OpKind, fr: Optional[FreshnessFunction]
) -> TensorExpr:
    result: List[Factor] = []
    for factor in expr.factors:
        if isinstance(factor, Generator):
            edges = tuple(_items(factor.edges, target, kind, fr))
            result.append(Generator(name=factor.name, edges=edges))
        elif isinstance(factor, Box) and factor.name == target:
            if kind is OpKind.KILL:
                continue
            if kind is OpKind.DROP:
                result.extend(factor.body.factors)
                continue
            assert fr is not None
            fresh = fr.apply(factor.body)
            result.append(factor)
            if kind is OpKind.EXP:
                result.extend(fresh.factors)
            else:
                result.append(Box(name=fr.box(factor.name), body=fresh))
        elif isinstance(factor, Box):
            result.append(Box(name=factor.name, body=_factors(factor.body, target, kind, fr)))
        else:
            result.append(factor)
    return TensorExpr(factors=tuple(result))


def kill_box(box: str, expr: TensorExpr) -> TensorExpr:
    """Kill_B: delete box B and every B-group with their contents"""
    _require_box(box, expr)
    return _factors(expr, box, OpKind.KILL, None)


def exp_box(box: str, fr: FreshnessFunction, expr: TensorExpr) -> TensorExpr:
    """
    Exp_B: add one fresh copy of the contents of B next to it

    `[G]B -> [G]B fr(G)`; clockwise groups `[e>B -> [e>B fr(e)`; anticlockwise
    groups `<e]B -> fr(e) <e]B`.
    """
    _require_box(box, expr)
    return _factors(expr, box, OpKind.EXP, fr)


def copy_box(box: str, fr: FreshnessFunction, expr: TensorExpr) -> TensorExpr:
    """Copy_B: duplicate box B as a fresh box fr(B)"""
    _require_box(box, expr)
    return _factors(expr, box, OpKind.COPY, fr)


def drop_box(box: str, expr: TensorExpr) -> TensorExpr:
    """Drop_B: remove the B wrappers, keeping their contents in place"""
    _require_box(box, expr)
    return _factors(expr, box, OpKind.DROP, None)


def apply_op(op: BoxOp, expr: TensorExpr) -> TensorExpr:
    """Apply a BoxOp; Exp and Copy without a freshness function use fresh_for([expr])"""
    if op.kind is OpKind.KILL:
        return kill_box(op.target, expr)
    if op.kind is OpKind.DROP:
        return drop_box(op.target, expr)
    fr = op.fr if op.fr is not None else fresh_for([expr])
    if op.kind is OpKind.EXP:
        return exp_box(op.target, fr, expr)
    return copy_box(op.target, fr, expr)


# =============================================================================
# Weakening and renaming
# =============================================================================


def _weaken(expr: TensorExpr, box: str, extra: TensorExpr) -> Tuple[TensorExpr, bool]:
    found = False
    result: List[Factor] = []
    for factor in expr.factors:
        if isinstance(factor, Box):
            if factor.name == box:
                result.append(Box(name=box, body=factor.body * extra))
                found = True
            else:
                body, inner = _weaken(factor.body, box, extra)
                found = found or inner
                result.append(Box(name=factor.name, body=body))
        else:
            result.append(factor)
    return TensorExpr(factors=tuple(result)), found


def weaken(box: str, extra: TensorExpr, expr: TensorExpr, check: bool = True) -> TensorExpr:
    """
    Wk_A^K: append K inside box A

    Raises:
        UnknownBoxError: if A is not a box of the expression
        IllFormedResultError: if the weakened expression is not well-formed
    """
    result, found = _weaken(expr, box, extra)
    if not found:
        raise UnknownBoxError(box)
    if check:
        violations = check_wellformed(result)
        if violations:
            raise IllFormedResultError(
                f"weakening {box} by {extra} is ill-formed: {violations[0]}", violations
            )
    return result


def _alpha_away(expr: TensorExpr, name: str, avoid: Iterable[TensorExpr]) -> TensorExpr:
    fr = fresh_for([expr, *avoid])
    return rename_names(expr, {name: fr.edge(name)})


def rename_edge(
    old: str, new: str, expr: TensorExpr, avoid: Sequence[TensorExpr] = ()
) -> TensorExpr:
    """
    Capture-free renaming of a free edge name

    A bound occurrence of the new name is first renamed away (alpha renaming);
    `avoid` lists further expressions whose names must not be reused for that.

    Raises:
        NotFoundError: if `old` does not occur
        NotFreeError: if `old` is bound
        NameClashError: if `new` is already a free name
    """
    if old not in edge_names(expr):
        raise NotFoundError(f"edge {old} does not occur in {expr}")
    if old in bound_names(expr):
        raise NotFreeError(f"edge {old} is bound; bound names are not addressable")
    if old == new:
        return expr
    if new in free_names(expr):
        raise NameClashError(f"edge {new} is already free in {expr}")
    if new in bound_names(expr):
        expr = _alpha_away(expr, new, avoid)
    return rename_names(expr, {old: new})


def rename_box(old: str, new: str, expr: TensorExpr) -> TensorExpr:
    """
    Rename a box and every group referring to it

    Raises:
        UnknownBoxError: if `old` does not occur
        NameClashError: if `new` is already used
    """
    _require_box(old, expr)
    if old == new:
        return expr
    if new in box_names(expr):
        raise NameClashError(f"box {new} is already used in {expr}")
    return rename_names(expr, {}, {old: new})


# =============================================================================
# Context table
# =============================================================================


class ContextPrediction(BaseModel):
    """Predicted contexts of an edge and of its fresh copy after an operation"""

    survives: bool
    ectx: Context = ()
    nctx: Context = ()
    fresh_name: Optional[str] = None
    fresh_ectx: Context = ()
    fresh_nctx: Context = ()


def contexts_after(op: BoxOp, occurrence: EdgeOccurrence) -> ContextPrediction:
    """
    Predict contexts after a !-box operation from the original contexts alone

    Kill keeps surviving edges unchanged; Drop deletes the box from whichever
    context holds it; Exp and Copy keep the original and give the fresh copy
    primed boxes up to (Copy: including) the expanded one. Primed names are read
    from the operation's freshness function, which must be the one used to
    perform it.
    """
    ectx, nctx = occurrence.ectx, occurrence.nctx
    target = op.target
    in_e = target in ectx
    in_n = target in nctx

    if op.kind is OpKind.KILL:
        if in_e or in_n:
            return ContextPrediction(survives=False)
        return ContextPrediction(survives=True, ectx=ectx, nctx=nctx)

    if op.kind is OpKind.DROP:
        return ContextPrediction(
            survives=True,
            ectx=tuple(b for b in ectx if b != target),
            nctx=tuple(b for b in nctx if b != target),
        )

    prediction = ContextPrediction(survives=True, ectx=ectx, nctx=nctx)
    if not (in_e or in_n):
        return prediction
    assert op.fr is not None
    fr = op.fr
    keep_target = op.kind is OpKind.COPY

    def primed(ctx: Context, index: int) -> Context:
        head = tuple(fr.box(b) for b in ctx[:index])
        middle = (fr.box(ctx[index]),) if keep_target else ()
        return head + middle + ctx[index + 1 :]

    if in_e:
        fresh_ectx = primed(ectx, ectx.index(target))
        fresh_nctx = nctx
    else:
        fresh_ectx = tuple(fr.box(b) for b in ectx)
        fresh_nctx = primed(nctx, nctx.index(target))
    return prediction.model_copy(
        update={
            "fresh_name": fr.edge(occurrence.edge.name),
            "fresh_ectx": fresh_ectx,
            "fresh_nctx": fresh_nctx,
        }
    )
