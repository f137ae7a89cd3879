"""
Canonical Forms
Canonical naming and ordering of !-tensor expressions up to bound-name renaming

Leaves (generator and wire occurrences) are coloured by their box path and their
print with variable names blanked, then refined by the colours of the leaves
they share variables with. Remaining ties are broken by individualizing one
leaf at a time and keeping the smallest print.
"""
from __future__ import annotations

from typing import AbstractSet, Dict, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel

from libs.bangtensor.core import (
    Box,
    DirectedEdge,
    Factor,
    Generator,
    IdentityWire,
    Leaf,
    TensorExpr,
    bound_names,
    edge_names,
    free_names,
    iter_edge_items,
    map_edge_items,
)
from libs.common.config import get_settings
from libs.common.log_config import get_logger

logger = get_logger(__name__)

PLACEHOLDER = "?"
# (scope, name): scope is the root index for bound names, -1 for anonymous free names
Variable = Tuple[int, str]


class CanonicalForm(BaseModel):
    """Canonically renamed and ordered expressions with their comparison key"""

    exprs: Tuple[TensorExpr, ...]
    key: str
    complete: bool = True


class _LeafSlot(BaseModel):
    root: int
    path: Tuple[str, ...]
    leaf: Union[Generator, IdentityWire]
    variables: Tuple[Optional[Variable], ...]
    shape: str


def _rename_leaf(
    leaf: Leaf,
    names: Dict[Optional[Variable], str],
    scope: int,
    bound: AbstractSet[str],
    anonymous: AbstractSet[str],
) -> Leaf:
    def rename(edge: DirectedEdge) -> DirectedEdge:
        var = _variable(edge.name, scope, bound, anonymous)
        if var is None:
            return edge
        return DirectedEdge(name=names[var], direction=edge.direction)

    if isinstance(leaf, IdentityWire):
        out_edge, in_edge = (rename(e) for e in leaf.edges)
        return IdentityWire(output=out_edge.name, input=in_edge.name)
    return Generator(name=leaf.name, edges=map_edge_items(leaf.edges, rename, lambda b: b))


def _variable(
    name: str, scope: int, bound: AbstractSet[str], anonymous: AbstractSet[str]
) -> Optional[Variable]:
    if name in bound:
        return (scope, name)
    if name in anonymous:
        return (-1, name)
    return None


class _Canonicalizer:
    """Search state for one canonicalization request"""

    def __init__(self, roots: Sequence[TensorExpr], anonymous: AbstractSet[str], budget: int):
        self.roots = list(roots)
        self.anonymous = frozenset(anonymous)
        self.budget = budget
        self.bound = [bound_names(root) for root in self.roots]
        self.fixed = set()
        for index, root in enumerate(self.roots):
            self.fixed |= edge_names(root) - self.bound[index] - self.anonymous
        self.slots: List[_LeafSlot] = []
        for index, root in enumerate(self.roots):
            self._collect(index, root, ())
        self.links = self._links()
        self.evaluated = 0
        self.truncated = False
        self.best: Optional[Tuple[str, Tuple[TensorExpr, ...]]] = None

    def _collect(self, root: int, expr: TensorExpr, path: Tuple[str, ...]) -> None:
        for factor in expr.factors:
            if isinstance(factor, Box):
                self._collect(root, factor.body, path + (factor.name,))
            elif isinstance(factor, (Generator, IdentityWire)):
                variables = tuple(
                    _variable(edge.name, root, self.bound[root], self.anonymous)
                    for edge, _ in iter_edge_items(factor.edges)
                )
                blank = {var: PLACEHOLDER for var in variables if var is not None}
                shape = str(_rename_leaf(factor, blank, root, self.bound[root], self.anonymous))
                self.slots.append(
                    _LeafSlot(root=root, path=path, leaf=factor, variables=variables, shape=shape)
                )

    def _links(self) -> List[List[List[Tuple[int, int]]]]:
        occurrences: Dict[Variable, List[Tuple[int, int]]] = {}
        for index, slot in enumerate(self.slots):
            for position, var in enumerate(slot.variables):
                if var is not None:
                    occurrences.setdefault(var, []).append((index, position))
        links: List[List[List[Tuple[int, int]]]] = []
        for index, slot in enumerate(self.slots):
            per_slot = []
            for position, var in enumerate(slot.variables):
                if var is None:
                    per_slot.append([])
                else:
                    per_slot.append([o for o in occurrences[var] if o != (index, position)])
            links.append(per_slot)
        return links

    # -------------------------------------------------------------------------

    def initial_colours(self) -> List[int]:
        keys = [(slot.root, slot.path, slot.shape) for slot in self.slots]
        ranking = {key: rank for rank, key in enumerate(sorted(set(keys)))}
        return [ranking[key] for key in keys]

    def refine(self, colours: List[int]) -> List[int]:
        while True:
            signatures = [
                (
                    colours[index],
                    tuple(
                        tuple(sorted((colours[other], pos) for other, pos in slot_links))
                        for slot_links in self.links[index]
                    ),
                )
                for index in range(len(self.slots))
            ]
            ranking = {sig: rank for rank, sig in enumerate(sorted(set(signatures)))}
            refined = [ranking[sig] for sig in signatures]
            if len(set(refined)) == len(set(colours)):
                return refined
            colours = refined

    def _target_cell(self, colours: List[int]) -> Optional[List[int]]:
        cells: Dict[int, List[int]] = {}
        for index, colour in enumerate(colours):
            cells.setdefault(colour, []).append(index)
        for colour in sorted(cells):
            members = cells[colour]
            if len(members) > 1 and any(v is not None for v in self.slots[members[0]].variables):
                return members
        return None

    def search(self, colours: List[int]) -> None:
        colours = self.refine(colours)
        cell = self._target_cell(colours)
        if cell is None:
            self._evaluate(colours)
            return
        for member in cell:
            if self.best is not None and self.evaluated >= self.budget:
                self.truncated = True
                return
            individualized = [2 * c + 1 for c in colours]
            individualized[member] = 2 * colours[member]
            self.search(individualized)

    def _evaluate(self, colours: List[int]) -> None:
        self.evaluated += 1
        order = sorted(range(len(self.slots)), key=lambda i: (colours[i], i))
        names: Dict[Optional[Variable], str] = {}
        counter = 0
        for index in order:
            for var in self.slots[index].variables:
                if var is not None and var not in names:
                    counter += 1
                    while f"b{counter}" in self.fixed:
                        counter += 1
                    names[var] = f"b{counter}"

        placed: Dict[Tuple[int, Tuple[str, ...]], List[Factor]] = {}
        for index in order:
            slot = self.slots[index]
            renamed = _rename_leaf(
                slot.leaf, names, slot.root, self.bound[slot.root], self.anonymous
            )
            placed.setdefault((slot.root, slot.path), []).append(renamed)

        exprs = tuple(
            self._rebuild(root_index, root, (), placed)
            for root_index, root in enumerate(self.roots)
        )
        key = " = ".join(str(expr) for expr in exprs)
        if self.best is None or key < self.best[0]:
            self.best = (key, exprs)

    def _rebuild(
        self,
        root: int,
        expr: TensorExpr,
        path: Tuple[str, ...],
        placed: Dict[Tuple[int, Tuple[str, ...]], List[Factor]],
    ) -> TensorExpr:
        factors: List[Factor] = list(placed.get((root, path), []))
        nested = sorted((f for f in expr.factors if isinstance(f, Box)), key=lambda b: b.name)
        for box in nested:
            body = self._rebuild(root, box.body, path + (box.name,), placed)
            factors.append(Box(name=box.name, body=body))
        return TensorExpr(factors=tuple(factors))


def canonicalize(
    roots: Sequence[TensorExpr],
    anonymous: AbstractSet[str] = frozenset(),
    budget: Optional[int] = None,
) -> CanonicalForm:
    """
    Jointly canonicalize one or more simplified expressions

    Bound names are scoped per root. Names in `anonymous` are free names that
    may be renamed consistently across all roots (fresh names produced by
    instantiation).

    Args:
        roots: Expressions already passed through `simplify`
        anonymous: Free names to treat as interchangeable
        budget: Maximum number of labelings explored when breaking ties

    Returns:
        CanonicalForm with the renamed expressions and their printed key
    """
    limit = budget if budget is not None else get_settings().canonical_search_budget
    anonymous_free = frozenset(anonymous) & frozenset().union(*(free_names(r) for r in roots))
    state = _Canonicalizer(roots, anonymous_free, limit)
    state.search(state.initial_colours())
    assert state.best is not None
    complete = not state.truncated
    if not complete:
        logger.warning(
            "canonical_search_budget_exhausted", budget=limit, leaves=len(state.slots)
        )
    return CanonicalForm(exprs=state.best[1], key=state.best[0], complete=complete)
