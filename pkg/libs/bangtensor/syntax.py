"""
Concrete Syntax
Parsers and printers for tensors, theories, proof scripts and model files, plus JSON interchange
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Set, Tuple, Union

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedInput, UnexpectedToken, VisitError
from pydantic import BaseModel, Field, ValidationError

from libs.bangtensor.boxops import OpKind
from libs.bangtensor.calculus import (
    AxiomOrLemma,
    BoxIntro,
    Equation,
    Equiv,
    GeneratorDecl,
    Hypothesis,
    InductionBlock,
    OpRule,
    OpSpec,
    Prod,
    ProofItem,
    ProofScript,
    ProofStep,
    RenameBox,
    RenameEdge,
    Symmetry,
    Theorem,
    Theory,
    Transitivity,
    WeakenRule,
    WeakenSpec,
)
from libs.bangtensor.core import (
    Box,
    DirectedEdge,
    Direction,
    EdgeItem,
    Factor,
    Generator,
    Group,
    GroupDirection,
    IdentityWire,
    TensorExpr,
    Unit,
    boxes,
    edge_names,
    iter_leaves,
)
from libs.bangtensor.errors import ParseError, SourceSpan
from libs.common.validators import (
    validate_arity_pattern,
    validate_box_name,
    validate_edge_name,
    validate_generator_name,
)

TENSOR_SUFFIX = ".bt"
THEORY_SUFFIX = ".bth"
PROOF_SUFFIX = ".btp"
MODEL_SUFFIX = ".btm"
JSON_FORMAT = 1

GRAMMAR = r"""
tensor_file: tensor
theory_file: (gen_decl | axiom_decl)*
proof_file: theorem*
model_file: model_line*

// tensors
tensor: factor*
factor: "1"                              -> unit
      | "id" "{" DEDGE DEDGE "}"         -> wire
      | GENNAME "{" eterm "}"            -> generator
      | "[" tensor "]" BOXNAME           -> box

eterm: eitem*
eitem: DEDGE                             -> dedge
     | "[" eterm ">" BOXNAME             -> cw_group
     | "<" eterm "]" BOXNAME             -> acw_group
     | "(" eterm ")"                     -> paren

// theories
gen_decl: "gen" GENNAME ":" [ARITY]
axiom_decl: "axiom" NAME ":" tensor "=" tensor

// proofs
theorem: "theorem" NAME ":" tensor "=" tensor "proof" item* "qed"
?item: step | induction
step: "step" NAME ":" tensor "=" tensor "by" justification
induction: "induction" BOXNAME "on" NAME "base" block "step" block
block: "{" item* "}"

?justification: "equiv" [NAME]                  -> j_equiv
              | "axiom" NAME spec*              -> j_axiom
              | "apply" NAME spec*              -> j_apply
              | "prod" NAME "with" operand      -> j_prod
              | "box" NAME "in" BOXNAME         -> j_box
              | "weaken" NAME BOXNAME operand   -> j_weaken
              | "op" NAME op_kind BOXNAME       -> j_op
              | "sym" NAME                      -> j_sym
              | "trans" NAME NAME+              -> j_trans
              | "hyp" NAME spec*                -> j_hyp

?spec: "rename" EDGENAME "->" EDGENAME          -> s_rename
     | "boxrename" BOXNAME "->" BOXNAME         -> s_boxrename
     | op_kind BOXNAME                          -> s_op
     | "weaken" BOXNAME operand                 -> s_weaken

!op_kind: "exp" | "kill" | "copy" | "drop"
operand: "(" tensor ")" | tensor

// models
?model_line: "dimension" VALUE                  -> m_dimension
           | "semiring" NAME                    -> m_semiring
           | "tolerance" VALUE                  -> m_tolerance
           | "array" GENNAME [ARITY] ":" VALUE* -> m_array
           | "builtin" NAME option*             -> m_builtin
option: NAME ["=" VALUE]

DEDGE: /[+-][a-z][A-Za-z0-9_]*(\.[0-9]+)?/
BOXNAME: /[A-Z][A-Za-z0-9_]*(\.[0-9]+)?/
GENNAME: /[a-z][A-Za-z0-9_]*/
EDGENAME: /[a-z][A-Za-z0-9_]*(\.[0-9]+)?/
NAME: /[A-Za-z_][A-Za-z0-9_]*/
ARITY: /[\^v()*]+/
VALUE: /[-+]?[0-9]+(\/[0-9]+|\.[0-9]*([eE][-+]?[0-9]+)?|[eE][-+]?[0-9]+)?/
COMMENT: /#[^\n]*/

%import common.WS
%ignore WS
%ignore COMMENT
"""

_STARTS = ["tensor_file", "theory_file", "proof_file", "model_file"]
_PARSER = Lark(
    GRAMMAR,
    start=_STARTS,
    parser="lalr",
    lexer="contextual",
    propagate_positions=True,
    maybe_placeholders=True,
)


# =============================================================================
# Error mapping
# =============================================================================


def _span_at(text: str, pos: int) -> SourceSpan:
    pos = max(0, min(pos, len(text)))
    line = text.count("\n", 0, pos) + 1
    column = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return SourceSpan(begin=pos, end=pos, line=line, column=column)


def _token_span(token: Token) -> SourceSpan:
    begin = token.start_pos or 0
    end = token.end_pos if token.end_pos is not None else begin
    return SourceSpan(begin=begin, end=end, line=token.line or 1, column=token.column or 1)


def _describe(token: Optional[Token]) -> str:
    if token is None or token.type == "$END":
        return "end of input"
    return repr(str(token))


def _from_lark(exc: UnexpectedInput, text: str, source: Optional[str]) -> ParseError:
    if isinstance(exc, UnexpectedToken):
        token = exc.token
        if token.type == "$END" or token.start_pos is None:
            span = _span_at(text, len(text))
        else:
            span = _token_span(token)
        expected = sorted(exc.accepts or exc.expected)
        found = _describe(token)
        return ParseError(f"unexpected {found}", span, expected, found, source)
    if isinstance(exc, UnexpectedCharacters):
        span = _span_at(text, exc.pos_in_stream)
        found = repr(exc.char)
        allowed = sorted(exc.allowed or ())
        return ParseError(f"unexpected character {found}", span, allowed, found, source)
    span = _span_at(text, len(text))
    return ParseError("unexpected end of input", span, [], "end of input", source)


def _parse(text: str, start: str, source: Optional[str]) -> Any:
    try:
        tree = _PARSER.parse(text, start=start)
    except UnexpectedInput as exc:
        raise _from_lark(exc, text, source) from None
    try:
        return _Builder(source).transform(tree)
    except VisitError as exc:
        if isinstance(exc.orig_exc, ParseError):
            raise exc.orig_exc from None
        raise


# =============================================================================
# Tree transformation
# =============================================================================


class ArrayDecl(BaseModel):
    """`array <gen> <word> : v1 v2 ...` with values kept as written"""

    generator: str
    word: str = ""
    values: List[str] = Field(default_factory=list)
    line: int = 0


class BuiltinDecl(BaseModel):
    name: str
    options: Dict[str, str] = Field(default_factory=dict)
    flags: List[str] = Field(default_factory=list)


class ModelDeclarations(BaseModel):
    """Raw contents of a model file"""

    dimension: Optional[int] = None
    semiring: Optional[str] = None
    tolerance: Optional[str] = None
    arrays: List[ArrayDecl] = Field(default_factory=list)
    builtin: Optional[BuiltinDecl] = None


def _tensor_of(factors: List[Factor]) -> TensorExpr:
    # a lone `1` is the empty product; `1` next to other factors stays a unit factor
    if len(factors) == 1 and isinstance(factors[0], Unit):
        return TensorExpr()
    return TensorExpr(factors=tuple(factors))


def _flatten(items: List[Union[EdgeItem, Tuple[EdgeItem, ...]]]) -> Tuple[EdgeItem, ...]:
    flat: List[EdgeItem] = []
    for item in items:
        if isinstance(item, tuple):
            flat.extend(item)
        else:
            flat.append(item)
    return tuple(flat)


class _Builder(Transformer):
    """Turns parse trees into engine objects"""

    def __init__(self, source: Optional[str]):
        super().__init__()
        self.source = source

    def _error(self, message: str, token: Token) -> ParseError:
        return ParseError(message, _token_span(token), [], str(token), self.source)

    # -- tensors -------------------------------------------------------------

    def tensor_file(self, children: List[Any]) -> TensorExpr:
        return children[0]

    def tensor(self, children: List[Factor]) -> TensorExpr:
        return _tensor_of(children)

    def unit(self, _: List[Any]) -> Unit:
        return Unit()

    def wire(self, children: List[Token]) -> IdentityWire:
        out_tok, in_tok = children
        if not out_tok.startswith("+") or not in_tok.startswith("-"):
            raise self._error("identity wire must be written id{+output -input}", out_tok)
        return IdentityWire(output=out_tok[1:], input=in_tok[1:])

    def generator(self, children: List[Any]) -> Generator:
        name, edges = children
        return Generator(name=str(name), edges=edges)

    def box(self, children: List[Any]) -> Box:
        body, name = children
        return Box(name=str(name), body=body)

    def eterm(self, children: List[Any]) -> Tuple[EdgeItem, ...]:
        return _flatten(children)

    def dedge(self, children: List[Token]) -> DirectedEdge:
        (token,) = children
        return DirectedEdge(name=token[1:], direction=Direction(token[0]))

    def cw_group(self, children: List[Any]) -> Group:
        body, name = children
        return Group(direction=GroupDirection.CLOCKWISE, box=str(name), body=body)

    def acw_group(self, children: List[Any]) -> Group:
        body, name = children
        return Group(direction=GroupDirection.ANTICLOCKWISE, box=str(name), body=body)

    def paren(self, children: List[Any]) -> Tuple[EdgeItem, ...]:
        return children[0]

    # -- theories ------------------------------------------------------------

    def gen_decl(self, children: List[Any]) -> Tuple[Token, GeneratorDecl]:
        name, arity = children
        pattern = str(arity) if arity is not None else ""
        if not validate_arity_pattern(pattern):
            raise self._error(f"malformed arity pattern {pattern}", arity)
        return name, GeneratorDecl(name=str(name), pattern=pattern)

    def axiom_decl(self, children: List[Any]) -> Tuple[Token, Equation]:
        name, lhs, rhs = children
        return name, Equation(lhs=lhs, rhs=rhs, name=str(name))

    def theory_file(self, children: List[Tuple[Token, Any]]) -> Theory:
        generators: Dict[str, GeneratorDecl] = {}
        axioms: Dict[str, Equation] = {}
        for token, decl in children:
            table: Dict[str, Any] = generators if isinstance(decl, GeneratorDecl) else axioms
            if str(token) in table:
                raise self._error(f"duplicate declaration of {token}", token)
            table[str(token)] = decl
        return Theory(generators=generators, axioms=axioms)

    # -- proofs --------------------------------------------------------------

    def operand(self, children: List[TensorExpr]) -> TensorExpr:
        return children[0]

    def op_kind(self, children: List[Token]) -> OpKind:
        return OpKind(str(children[0]))

    def s_rename(self, children: List[Token]) -> RenameEdge:
        return RenameEdge(old=str(children[0]), new=str(children[1]))

    def s_boxrename(self, children: List[Token]) -> RenameBox:
        return RenameBox(old=str(children[0]), new=str(children[1]))

    def s_op(self, children: List[Any]) -> OpSpec:
        return OpSpec(op=children[0], box=str(children[1]))

    def s_weaken(self, children: List[Any]) -> WeakenSpec:
        return WeakenSpec(box=str(children[0]), extra=children[1])

    def j_equiv(self, children: List[Optional[Token]]) -> Equiv:
        ref = children[0]
        return Equiv(ref=str(ref) if ref is not None else None)

    def j_axiom(self, children: List[Any]) -> AxiomOrLemma:
        return AxiomOrLemma(ref=str(children[0]), specs=tuple(children[1:]), lookup="axiom")

    def j_apply(self, children: List[Any]) -> AxiomOrLemma:
        return AxiomOrLemma(ref=str(children[0]), specs=tuple(children[1:]), lookup="apply")

    def j_prod(self, children: List[Any]) -> Prod:
        return Prod(premise=str(children[0]), extra=children[1])

    def j_box(self, children: List[Token]) -> BoxIntro:
        return BoxIntro(premise=str(children[0]), box=str(children[1]))

    def j_weaken(self, children: List[Any]) -> WeakenRule:
        return WeakenRule(premise=str(children[0]), box=str(children[1]), extra=children[2])

    def j_op(self, children: List[Any]) -> OpRule:
        return OpRule(premise=str(children[0]), op=children[1], box=str(children[2]))

    def j_sym(self, children: List[Token]) -> Symmetry:
        return Symmetry(premise=str(children[0]))

    def j_trans(self, children: List[Token]) -> Transitivity:
        return Transitivity(premises=tuple(str(c) for c in children))

    def j_hyp(self, children: List[Any]) -> Hypothesis:
        return Hypothesis(goal=str(children[0]), specs=tuple(children[1:]))

    @v_args(meta=True)
    def step(self, meta: Any, children: List[Any]) -> ProofStep:
        name, lhs, rhs, justification = children
        return ProofStep(
            name=str(name),
            claimed=Equation(lhs=lhs, rhs=rhs, name=str(name)),
            justification=justification,
            line=meta.line,
        )

    def block(self, children: List[ProofItem]) -> Tuple[ProofItem, ...]:
        return tuple(children)

    @v_args(meta=True)
    def induction(self, meta: Any, children: List[Any]) -> InductionBlock:
        box, goal, base, step = children
        return InductionBlock(box=str(box), goal=str(goal), base=base, step=step, line=meta.line)

    @v_args(meta=True)
    def theorem(self, meta: Any, children: List[Any]) -> Theorem:
        name, lhs, rhs, *items = children
        _check_unique_steps(items, self.source)
        return Theorem(
            name=str(name),
            statement=Equation(lhs=lhs, rhs=rhs, name=str(name)),
            body=tuple(items),
            line=meta.line,
        )

    def proof_file(self, children: List[Theorem]) -> ProofScript:
        seen: Dict[str, Theorem] = {}
        for theorem in children:
            if theorem.name in seen:
                span = SourceSpan(begin=0, end=0, line=theorem.line, column=1)
                raise ParseError(
                    f"duplicate theorem {theorem.name}", span, [], theorem.name, self.source
                )
            seen[theorem.name] = theorem
        return ProofScript(theorems=tuple(children), source=self.source)

    # -- models --------------------------------------------------------------

    def m_dimension(self, children: List[Token]) -> Tuple[str, Any]:
        token = children[0]
        if not token.lstrip("+").isdigit():
            raise self._error("dimension must be a nonnegative integer", token)
        return "dimension", int(token)

    def m_semiring(self, children: List[Token]) -> Tuple[str, Any]:
        token = children[0]
        if str(token) not in ("int", "rational", "float"):
            raise self._error(f"unknown semiring {token}", token)
        return "semiring", str(token)

    def m_tolerance(self, children: List[Token]) -> Tuple[str, Any]:
        return "tolerance", str(children[0])

    def m_array(self, children: List[Any]) -> Tuple[str, Any]:
        name, word, *values = children
        return "array", ArrayDecl(
            generator=str(name),
            word=str(word) if word is not None else "",
            values=[str(v) for v in values],
            line=name.line,
        )

    def option(self, children: List[Optional[Token]]) -> Tuple[str, Optional[str]]:
        key, value = children
        return str(key), (str(value) if value is not None else None)

    def m_builtin(self, children: List[Any]) -> Tuple[str, Any]:
        name, *options = children
        decl = BuiltinDecl(name=str(name))
        for key, value in options:
            if value is None:
                decl.flags.append(key)
            else:
                decl.options[key] = value
        return "builtin", decl

    def model_file(self, children: List[Tuple[str, Any]]) -> ModelDeclarations:
        decls = ModelDeclarations()
        for kind, value in children:
            if kind == "array":
                decls.arrays.append(value)
            else:
                setattr(decls, kind, value)
        return decls


def _check_unique_steps(items: List[Any], source: Optional[str]) -> None:
    seen: Set[str] = set()

    def visit(block: Tuple[Any, ...] | List[Any]) -> None:
        for item in block:
            if isinstance(item, ProofStep):
                if item.name in seen:
                    span = SourceSpan(begin=0, end=0, line=item.line, column=1)
                    raise ParseError(f"duplicate step {item.name}", span, [], item.name, source)
                seen.add(item.name)
            elif isinstance(item, InductionBlock):
                visit(item.base)
                visit(item.step)

    visit(items)


# =============================================================================
# Public parsing API
# =============================================================================


def parse_tensor(text: str, source: Optional[str] = None) -> TensorExpr:
    """
    Parse a !-tensor

    Args:
        text: Tensor in concrete syntax, e.g. `phi{+a [-b>A} [psi{+b}]A`
        source: Optional file name used in error messages

    Returns:
        The structurally faithful TensorExpr (no simplification applied)

    Raises:
        ParseError: with the location of the first offending token
    """
    return _parse(text, "tensor_file", source)


def print_tensor(expr: TensorExpr) -> str:
    return str(expr)


def parse_theory(text: str, source: Optional[str] = None) -> Theory:
    """Parse `gen` and `axiom` declarations"""
    return _parse(text, "theory_file", source)


def parse_proof(text: str, source: Optional[str] = None) -> ProofScript:
    """Parse theorems with their `proof ... qed` blocks"""
    return _parse(text, "proof_file", source)


def parse_model_declarations(text: str, source: Optional[str] = None) -> ModelDeclarations:
    return _parse(text, "model_file", source)


def print_theory(theory: Theory) -> str:
    lines = [f"gen {decl.name} : {decl.pattern}".rstrip() for decl in theory.generators.values()]
    lines += [f"axiom {name}: {axiom}" for name, axiom in theory.axioms.items()]
    return "\n".join(lines) + ("\n" if lines else "")


def _print_items(items: Tuple[ProofItem, ...], indent: str) -> List[str]:
    lines: List[str] = []
    for item in items:
        if isinstance(item, ProofStep):
            lines.append(f"{indent}step {item.name}: {item.claimed} by {print_justification(item)}")
        else:
            lines.append(f"{indent}induction {item.box} on {item.goal}")
            lines.append(f"{indent}base {{")
            lines += _print_items(item.base, indent + "  ")
            lines.append(f"{indent}}} step {{")
            lines += _print_items(item.step, indent + "  ")
            lines.append(f"{indent}}}")
    return lines


def print_justification(step: ProofStep) -> str:
    just = step.justification
    if isinstance(just, Equiv):
        return "equiv" if just.ref is None else f"equiv {just.ref}"
    if isinstance(just, AxiomOrLemma):
        return " ".join([just.lookup, just.ref, *(str(s) for s in just.specs)])
    if isinstance(just, Prod):
        return f"prod {just.premise} with ({just.extra})"
    if isinstance(just, BoxIntro):
        return f"box {just.premise} in {just.box}"
    if isinstance(just, WeakenRule):
        return f"weaken {just.premise} {just.box} ({just.extra})"
    if isinstance(just, OpRule):
        return f"op {just.premise} {just.op.value} {just.box}"
    if isinstance(just, Symmetry):
        return f"sym {just.premise}"
    if isinstance(just, Transitivity):
        return "trans " + " ".join(just.premises)
    return " ".join(["hyp", just.goal, *(str(s) for s in just.specs)])


def print_proof(script: ProofScript) -> str:
    lines: List[str] = []
    for theorem in script.theorems:
        lines.append(f"theorem {theorem.name}: {theorem.statement}")
        lines.append("proof")
        lines += _print_items(theorem.body, "  ")
        lines.append("qed")
    return "\n".join(lines) + ("\n" if lines else "")


# =============================================================================
# Files
# =============================================================================


def _read(path: Union[str, Path]) -> Tuple[str, str]:
    file_path = Path(path)
    return file_path.read_text(encoding="utf-8"), str(file_path)


def load_tensor(path: Union[str, Path]) -> TensorExpr:
    text, source = _read(path)
    return parse_tensor(text, source)


def load_theory(path: Union[str, Path]) -> Theory:
    text, source = _read(path)
    return parse_theory(text, source)


def load_proof(path: Union[str, Path]) -> ProofScript:
    text, source = _read(path)
    return parse_proof(text, source)


def load_model_declarations(path: Union[str, Path]) -> ModelDeclarations:
    text, source = _read(path)
    return parse_model_declarations(text, source)


# =============================================================================
# JSON interchange
# =============================================================================


def export_json(expr: TensorExpr) -> str:
    """Versioned structural encoding: factor list, edgeterm trees and direction tags"""
    payload = {"format": JSON_FORMAT, "tensor": expr.model_dump(mode="json")}
    return json.dumps(payload, sort_keys=True)


def import_json(text: str) -> TensorExpr:
    """
    Decode the output of `export_json`

    Raises:
        ParseError: on invalid JSON, an unknown format version or a malformed tensor
    """
    origin = SourceSpan(begin=0, end=0, line=1, column=1)
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        span = _span_at(text, exc.pos)
        raise ParseError(f"invalid JSON: {exc.msg}", span) from None
    if not isinstance(payload, dict) or payload.get("format") != JSON_FORMAT:
        found = payload.get("format") if isinstance(payload, dict) else None
        raise ParseError(f"unsupported format {found!r}", origin, [str(JSON_FORMAT)], repr(found))
    try:
        expr = TensorExpr.model_validate(payload.get("tensor"))
    except ValidationError as exc:
        raise ParseError(f"malformed tensor: {exc.errors()[0]['msg']}", origin) from None
    bad = _invalid_names(expr)
    if bad:
        raise ParseError(f"malformed tensor: invalid name {bad[0]!r}", origin, found=repr(bad[0]))
    return expr


def _invalid_names(expr: TensorExpr) -> List[str]:
    generators = {leaf.name for leaf, _ in iter_leaves(expr) if isinstance(leaf, Generator)}
    bad = [name for name in sorted(generators) if not validate_generator_name(name)]
    bad += [name for name in sorted(edge_names(expr)) if not validate_edge_name(name)]
    bad += [name for name in sorted(boxes(expr)) if not validate_box_name(name)]
    return bad

