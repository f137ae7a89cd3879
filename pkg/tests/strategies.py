"""
Hypothesis strategies
Random well-formed !-tensors and small concrete tensors for the model oracle
"""
from typing import List, Tuple

from hypothesis import strategies as st

from libs.bangtensor.core import (
    Box,
    DirectedEdge,
    Direction,
    Factor,
    Generator,
    Group,
    GroupDirection,
    IdentityWire,
    TensorExpr,
)

GENERATOR_NAMES = ("f", "g", "h", "phi")


def _edge(name: str, direction: Direction) -> DirectedEdge:
    return DirectedEdge(name=name, direction=direction)


@st.composite
def wellformed_terms(draw: st.DrawFn, max_boxes: int = 2) -> TensorExpr:
    """
    Well-formed by construction

    Boxes hold generators with free edges; top-level generators carry plain
    edges, bound pairs among themselves and groups whose members connect to
    edges inside the box.
    """
    names = iter(f"e{i}" for i in range(1000))
    directions = st.sampled_from([Direction.OUTPUT, Direction.INPUT])

    box_count = draw(st.integers(0, max_boxes))
    box_factors: List[Factor] = []
    inner: List[Tuple[str, DirectedEdge]] = []
    for index in range(box_count):
        box = f"B{index}"
        body: List[Factor] = []
        for _ in range(draw(st.integers(0, 2))):
            count = draw(st.integers(1, 2))
            edges = tuple(_edge(next(names), draw(directions)) for _ in range(count))
            body.append(Generator(name=draw(st.sampled_from(GENERATOR_NAMES)), edges=edges))
            inner.extend((box, edge) for edge in edges)
        if draw(st.booleans()):
            body.append(Box(name=f"N{index}", body=TensorExpr(factors=(
                Generator(name="g", edges=(_edge(next(names), draw(directions)),)),
            ))))
        box_factors.append(Box(name=box, body=TensorExpr(factors=tuple(body))))

    box_names = [f"B{i}" for i in range(box_count)]
    open_ends: List[DirectedEdge] = []
    factors: List[Factor] = []
    for _ in range(draw(st.integers(1, 3))):
        items: List[object] = []
        for _ in range(draw(st.integers(0, 3))):
            choice = draw(st.integers(0, 3))
            if choice == 0 and open_ends:
                partner = open_ends.pop(draw(st.integers(0, len(open_ends) - 1)))
                items.append(partner.partner)
            elif choice == 1 and box_names:
                box = draw(st.sampled_from(box_names))
                candidates = [edge for owner, edge in inner if owner == box]
                if candidates and draw(st.booleans()):
                    member = candidates[0]
                    inner.remove((box, member))
                    content = member.partner
                else:
                    content = _edge(next(names), draw(directions))
                direction = draw(st.sampled_from(list(GroupDirection)))
                items.append(Group(direction=direction, box=box, body=(content,)))
            else:
                edge = _edge(next(names), draw(directions))
                open_ends.append(edge)
                items.append(edge)
        factors.append(Generator(name=draw(st.sampled_from(GENERATOR_NAMES)), edges=tuple(items)))
    if draw(st.booleans()):
        factors.append(IdentityWire(output=next(names), input=next(names)))
    order = draw(st.permutations(factors + box_factors))
    return TensorExpr(factors=tuple(order))


ALGEBRA_LEAVES = (("m", "^vv"), ("u", "^"), ("a", "^v"), ("id", "^v"))


@st.composite
def concrete_algebra_terms(draw: st.DrawFn, max_axes: int = 6) -> TensorExpr:
    """Concrete products of m, u, a and wires with at most `max_axes` edge ends"""
    leaves: List[Tuple[str, str]] = []
    total = 0
    for _ in range(draw(st.integers(1, 3))):
        name, word = draw(st.sampled_from(ALGEBRA_LEAVES))
        if total + len(word) > max_axes:
            break
        leaves.append((name, word))
        total += len(word)

    names = iter(f"x{i}" for i in range(100))
    ends: List[List[DirectedEdge]] = []
    waiting_inputs: List[Tuple[int, int]] = []
    for leaf_index, (_, word) in enumerate(leaves):
        row: List[DirectedEdge] = []
        for letter in word:
            direction = Direction.OUTPUT if letter == "^" else Direction.INPUT
            row.append(_edge(next(names), direction))
            if direction is Direction.INPUT:
                waiting_inputs.append((leaf_index, len(row) - 1))
        ends.append(row)

    for row in ends:
        for position, edge in enumerate(row):
            if edge.direction is not Direction.OUTPUT or not waiting_inputs:
                continue
            if not draw(st.booleans()):
                continue
            leaf_index, slot = waiting_inputs.pop(draw(st.integers(0, len(waiting_inputs) - 1)))
            ends[leaf_index][slot] = _edge(edge.name, Direction.INPUT)

    factors: List[Factor] = []
    for (name, _), row in zip(leaves, ends):
        if name == "id":
            factors.append(IdentityWire(output=row[0].name, input=row[1].name))
        else:
            factors.append(Generator(name=name, edges=tuple(row)))
    return TensorExpr(factors=tuple(factors))
