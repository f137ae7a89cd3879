"""
Instantiation
Instantiation sequences, the KE normal form and bounded enumeration of concrete instances
"""
from __future__ import annotations

from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, Field

from libs.bangtensor.boxops import (
    BoxOp,
    FreshnessFunction,
    OpKind,
    copy_box,
    exp_box,
    fresh_for,
    kill_box,
)
from libs.bangtensor.core import (
    TensorExpr,
    canonical_key,
    find_box,
    free_names,
    is_concrete,
    iter_boxes,
    top_level_boxes,
)
from libs.bangtensor.errors import BangTensorError, IncompleteInstantiation, UnknownBoxError
from libs.common.log_config import get_logger

logger = get_logger(__name__)

Instantiation = List[BoxOp]

__all__ = [
    "Instantiation",
    "InstanceBound",
    "is_concrete",
    "apply_instantiation",
    "apply_jointly",
    "normal_form",
    "eliminate_copies",
    "iter_instantiations",
    "enumerate_instances",
]


class InstanceBound(BaseModel):
    """Maximum number of expansions applied to any single box occurrence"""

    n: int = Field(default=2, ge=0)


def _bound_value(bound: Union[int, InstanceBound]) -> int:
    return bound.n if isinstance(bound, InstanceBound) else InstanceBound(n=bound).n


def _apply_one(
    op: BoxOp, exprs: Sequence[TensorExpr], fr: Optional[FreshnessFunction]
) -> List[TensorExpr]:
    if op.kind is OpKind.EXP:
        assert fr is not None
        return [exp_box(op.target, fr, e) for e in exprs]
    if op.kind is OpKind.KILL:
        return [kill_box(op.target, e) for e in exprs]
    if op.kind is OpKind.COPY:
        assert fr is not None
        return [copy_box(op.target, fr, e) for e in exprs]
    raise BangTensorError(f"{op} cannot appear in an instantiation")


def apply_jointly(ops: Sequence[BoxOp], exprs: Sequence[TensorExpr]) -> List[TensorExpr]:
    """
    Apply one operation sequence to several expressions at once

    Exp and Copy steps without an explicit freshness function share
    `fresh_for(exprs)` across all expressions.

    Raises:
        UnknownBoxError: with the index of the failing step
    """
    current = list(exprs)
    for index, op in enumerate(ops):
        fr = op.fr
        if op.kind.needs_fresh and fr is None:
            fr = fresh_for(current)
        try:
            current = _apply_one(op, current, fr)
        except UnknownBoxError as exc:
            raise UnknownBoxError(exc.box, step=index) from exc
    return current


def apply_instantiation(ops: Sequence[BoxOp], expr: TensorExpr) -> TensorExpr:
    """Apply an instantiation sequence to one expression"""
    return apply_jointly(ops, [expr])[0]


# =============================================================================
# Normal form
# =============================================================================

# Expansion keys sort in the order their copies sit next to the expanded group.
Key = Tuple[int, ...]
Identity = Tuple[str, FrozenSet[Tuple[str, Key]]]


class _Track(BaseModel):
    origin: str
    ids: FrozenSet[Tuple[str, Key]] = frozenset()
    prefix: Key = ()
    keys: Tuple[Key, ...] = ()

    @property
    def identity(self) -> Identity:
        return (self.origin, self.ids)


def _descendants(expr: TensorExpr, name: str) -> List[str]:
    box = find_box(expr, name)
    if box is None:
        return []
    return [inner.name for inner, _ in iter_boxes(box.body)]


def _simulate(ops: Sequence[BoxOp], expr: TensorExpr) -> Dict[Identity, List[Key]]:
    tracks: Dict[str, _Track] = {box.name: _Track(origin=box.name) for box, _ in iter_boxes(expr)}
    record: Dict[Identity, List[Key]] = {}
    current = expr
    for time, op in enumerate(ops):
        if op.target not in tracks:
            raise UnknownBoxError(op.target, step=time)
        track = tracks[op.target]
        fr = op.fr
        if op.kind.needs_fresh and fr is None:
            fr = fresh_for([current])
        nested = _descendants(current, op.target)
        top_level = op.target in top_level_boxes(current)
        try:
            current = _apply_one(op, [current], fr)[0]
        except UnknownBoxError as exc:
            raise UnknownBoxError(exc.box, step=time) from exc

        if op.kind is OpKind.EXP:
            assert fr is not None
            key = track.prefix + (time,)
            tracks[op.target] = track.model_copy(update={"keys": track.keys + (key,)})
            for inner in nested:
                source = tracks[inner]
                tracks[fr.box(inner)] = source.model_copy(
                    update={"ids": source.ids | {(track.origin, key)}}
                )
        elif op.kind is OpKind.COPY:
            assert fr is not None
            tracks[fr.box(op.target)] = track.model_copy(
                update={"prefix": track.prefix + (time,), "keys": ()}
            )
            for inner in nested:
                tracks[fr.box(inner)] = tracks[inner].model_copy()
        else:
            if top_level:
                record.setdefault(track.identity, []).extend(track.keys)
            for inner in nested:
                tracks.pop(inner, None)
            tracks.pop(op.target, None)

    if not is_concrete(current):
        raise IncompleteInstantiation(f"instantiation leaves {current} with boxes or groups")
    return record


def _replay(expr: TensorExpr, record: Dict[Identity, List[Key]]) -> Instantiation:
    identities: Dict[str, Identity] = {
        box.name: (box.name, frozenset()) for box, _ in iter_boxes(expr)
    }
    ops: Instantiation = []
    current = expr
    while True:
        tops = top_level_boxes(current)
        if not tops:
            return ops
        target = tops[0]
        origin, ids = identities[target]
        for key in sorted(record.get((origin, ids), [])):
            fr = fresh_for([current])
            nested = _descendants(current, target)
            current = exp_box(target, fr, current)
            ops.append(BoxOp(kind=OpKind.EXP, target=target))
            for inner in nested:
                inner_origin, inner_ids = identities[inner]
                identities[fr.box(inner)] = (inner_origin, inner_ids | {(origin, key)})
        current = kill_box(target, current)
        ops.append(BoxOp(kind=OpKind.KILL, target=target))


def normal_form(ops: Sequence[BoxOp], expr: TensorExpr) -> Instantiation:
    """
    Rewrite a complete instantiation into KE normal form

    The least top-level box A is handled first as Exp_A^n then Kill_A, and the
    procedure repeats on the result. Applying the returned sequence (whose Exp
    steps use `fresh_for` of the current expression) yields an instance equal to
    the original one up to the names of fresh edges.

    Args:
        ops: Complete instantiation; Copy steps are accepted and absorbed
        expr: The expression being instantiated

    Returns:
        Exp/Kill-only instantiation in normal form

    Raises:
        IncompleteInstantiation: if `ops` does not produce a concrete expression
    """
    record = _simulate(ops, expr)
    result = _replay(expr, record)
    logger.debug("normal_form", steps_in=len(ops), steps_out=len(result))
    return result


def eliminate_copies(ops: Sequence[BoxOp], expr: TensorExpr) -> Instantiation:
    """
    Rewrite a sequence mixing Exp, Kill and Copy into an Exp/Kill instantiation

    A copy fr(B) of a box B that is later expanded n times and killed stands
    for n further expansions of B taken at the moment of copying; nested copies
    are pushed through the expansions of their enclosing boxes.
    """
    return normal_form(ops, expr)


# =============================================================================
# Enumeration
# =============================================================================


def iter_instantiations(
    exprs: Sequence[TensorExpr], bound: Union[int, InstanceBound]
) -> Iterator[Tuple[Instantiation, List[TensorExpr]]]:
    """
    Enumerate KE normal-form instantiations shared by several expressions

    Boxes are read from the first expression; every box occurrence (including
    copies made by expansion) is expanded 0..n times before being killed.

    Yields:
        The instantiation and the resulting concrete expressions
    """
    limit = _bound_value(bound)

    def walk(
        current: List[TensorExpr], trail: Instantiation
    ) -> Iterator[Tuple[Instantiation, List[TensorExpr]]]:
        tops = top_level_boxes(current[0])
        if not tops:
            yield trail, current
            return
        target = tops[0]
        expanded = current
        steps = list(trail)
        for count in range(limit + 1):
            kill = BoxOp(kind=OpKind.KILL, target=target)
            yield from walk(_apply_one(kill, expanded, None), steps + [kill])
            if count < limit:
                fr = fresh_for(expanded)
                expanded = _apply_one(BoxOp(kind=OpKind.EXP, target=target), expanded, fr)
                steps = steps + [BoxOp(kind=OpKind.EXP, target=target)]

    yield from walk(list(exprs), [])


def enumerate_instances(expr: TensorExpr, bound: Union[int, InstanceBound]) -> List[TensorExpr]:
    """
    Concrete instances reachable within the bound

    Instances differing only in the names of fresh (expansion-generated) free
    edges are reported once, in discovery order.
    """
    original = free_names(expr)
    seen: Dict[str, TensorExpr] = {}
    for _, (instance,) in iter_instantiations([expr], bound):
        key = canonical_key(instance, anonymous=free_names(instance) - original)
        seen.setdefault(key, instance)
    logger.debug("enumerate_instances", bound=_bound_value(bound), instances=len(seen))
    return list(seen.values())
