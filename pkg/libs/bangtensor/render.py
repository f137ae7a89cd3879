"""
DOT Rendering
Graphviz export of !-graphs: generators as nodes, !-boxes as dashed clusters
"""
from __future__ import annotations

from typing import Dict, List, Tuple

from pydantic import BaseModel, Field

from libs.bangtensor.core import (
    Box,
    DirectedEdge,
    Direction,
    IdentityWire,
    TensorExpr,
    Unit,
    iter_edge_items,
    require_wellformed,
)

INDENT = "  "


class DotDocument(BaseModel):
    """DOT text kept as lines"""

    lines: List[str] = Field(default_factory=list)

    @property
    def text(self) -> str:
        return "\n".join(self.lines) + "\n"

    def __str__(self) -> str:
        return self.text


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


class _Emitter:
    def __init__(self) -> None:
        self.lines: List[str] = []
        self.ends: Dict[DirectedEdge, str] = {}
        self.counter = 0

    def emit(self, expr: TensorExpr, depth: int) -> None:
        pad = INDENT * depth
        for factor in expr.factors:
            if isinstance(factor, Box):
                self.lines.append(f"{pad}subgraph cluster_{_cluster_id(factor.name)} {{")
                self.lines.append(f"{pad}{INDENT}label={_quote(factor.name)};")
                self.lines.append(f"{pad}{INDENT}style=dashed;")
                self.emit(factor.body, depth + 1)
                self.lines.append(f"{pad}}}")
                continue
            if isinstance(factor, Unit):
                continue
            node = f"n{self.counter}"
            self.counter += 1
            if isinstance(factor, IdentityWire):
                self.lines.append(f"{pad}{node} [shape=point, xlabel={_quote(str(factor))}];")
            else:
                self.lines.append(f"{pad}{node} [label={_quote(str(factor))}];")
            for edge, _ in iter_edge_items(factor.edges):
                self.ends[edge] = node


def _cluster_id(name: str) -> str:
    return name.replace(".", "_")


def to_dot(expr: TensorExpr, name: str = "G") -> DotDocument:
    """
    Render a well-formed !-tensor as a DOT digraph

    Generator labels carry the printed edgeterm, so edge order and group arcs
    are read from the label. Each bound name becomes one edge from its output
    end to its input end; free edges connect to plaintext boundary nodes.

    Raises:
        IllFormedError: if the expression is not well-formed
    """
    require_wellformed(expr)
    emitter = _Emitter()
    emitter.emit(expr, 1)

    bound: List[Tuple[str, str, str]] = []
    boundary: List[str] = []
    for edge in sorted(emitter.ends, key=lambda e: (e.name, e.direction.value)):
        node = emitter.ends[edge]
        partner = emitter.ends.get(edge.partner)
        if partner is not None:
            if edge.direction is Direction.OUTPUT:
                bound.append((node, partner, edge.name))
            continue
        free = f"free_{_cluster_id(edge.name)}"
        boundary.append(f"{INDENT}{free} [label={_quote(edge.name)}, shape=plaintext];")
        if edge.direction is Direction.OUTPUT:
            boundary.append(f"{INDENT}{node} -> {free} [label={_quote(edge.name)}];")
        else:
            boundary.append(f"{INDENT}{free} -> {node} [label={_quote(edge.name)}];")

    lines = [f"digraph {name} {{", f"{INDENT}node [shape=box];"]
    lines += emitter.lines
    lines += [f"{INDENT}{src} -> {dst} [label={_quote(label)}];" for src, dst, label in bound]
    lines += boundary
    lines.append("}")
    return DotDocument(lines=lines)
