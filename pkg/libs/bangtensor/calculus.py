"""
!-Tensor Calculus
Equations, theories, inference rules and a proof checker with !-box induction
"""
from __future__ import annotations

import itertools
import re
from typing import Annotated, Dict, FrozenSet, List, Literal, Optional, Sequence, Set, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from libs.bangtensor.boxops import (
    BoxOp,
    FreshnessFunction,
    OpKind,
    apply_op,
    copy_box,
    fresh_for,
    kill_box,
    rename_box,
    rename_edge,
    weaken,
)
from libs.bangtensor.canonical import canonicalize
from libs.bangtensor.core import (
    Box,
    DirectedEdge,
    Direction,
    EdgeItem,
    IdentityWire,
    TensorExpr,
    boxes,
    check_wellformed,
    context,
    equiv,
    free_edges,
    free_names,
    iter_leaves,
    nesting,
    product,
    simplify,
)
from libs.bangtensor.errors import (
    BangTensorError,
    ClaimMismatch,
    FixedBoxViolation,
    IllFormedError,
    IllFormedResultError,
    IncompatibleEquation,
    InductionError,
    RuleError,
    UnknownReference,
)
from libs.bangtensor.instantiate import Instantiation, InstanceBound, iter_instantiations
from libs.common.log_config import get_logger

logger = get_logger(__name__)


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


# =============================================================================
# Equations and theories
# =============================================================================


class Equation(_Frozen):
    """A pair of !-tensors with compatible boundaries"""

    lhs: TensorExpr
    rhs: TensorExpr
    name: Optional[str] = None

    def __str__(self) -> str:
        return f"{self.lhs} = {self.rhs}"

    @property
    def sides(self) -> Tuple[TensorExpr, TensorExpr]:
        return self.lhs, self.rhs

    def swapped(self) -> "Equation":
        return Equation(lhs=self.rhs, rhs=self.lhs, name=self.name)


def check_compatible(lhs: TensorExpr, rhs: TensorExpr) -> Tuple[bool, List[str]]:
    """
    Check that two !-tensors have compatible boundaries

    Args:
        lhs: Left-hand side
        rhs: Right-hand side

    Returns:
        Tuple of (is_compatible, mismatch messages), first mismatch first
    """
    errors: List[str] = []
    for label, side in (("lhs", lhs), ("rhs", rhs)):
        for violation in check_wellformed(side):
            errors.append(f"{label}: {violation}")
    if errors:
        return False, errors

    left_free, right_free = free_edges(lhs), free_edges(rhs)
    for edge in sorted(left_free ^ right_free, key=lambda e: (e.name, e.direction.value)):
        side = "lhs" if edge in left_free else "rhs"
        errors.append(f"free edge {edge} occurs only in the {side}")

    left_boxes, right_boxes = boxes(lhs), boxes(rhs)
    for name in sorted(left_boxes ^ right_boxes):
        side = "lhs" if name in left_boxes else "rhs"
        errors.append(f"box {name} occurs only in the {side}")

    left_nest, right_nest = nesting(lhs), nesting(rhs)
    for child, parent in sorted(left_nest ^ right_nest):
        side = "lhs" if (child, parent) in left_nest else "rhs"
        errors.append(f"nesting {child} in {parent} holds only in the {side}")

    for edge in sorted(left_free & right_free, key=lambda e: (e.name, e.direction.value)):
        left_ctx, right_ctx = context(lhs, edge), context(rhs, edge)
        if left_ctx != right_ctx:
            errors.append(
                f"context of {edge} differs: [{','.join(left_ctx)}] vs [{','.join(right_ctx)}]"
            )
    return not errors, errors


def _compatible_equation(lhs: TensorExpr, rhs: TensorExpr, name: Optional[str] = None) -> Equation:
    ok, errors = check_compatible(lhs, rhs)
    if not ok:
        raise IncompatibleEquation(f"{lhs} = {rhs} is not a valid equation: {errors[0]}")
    return Equation(lhs=lhs, rhs=rhs, name=name)


class GeneratorDecl(_Frozen):
    """Generator declaration with an arity pattern over ^, v, ( ), *"""

    name: str
    pattern: str


class Theory(_Frozen):
    """Generator declarations and named axioms"""

    generators: Dict[str, GeneratorDecl] = Field(default_factory=dict)
    axioms: Dict[str, Equation] = Field(default_factory=dict)

    def merged(self, other: "Theory") -> "Theory":
        return Theory(
            generators={**self.generators, **other.generators},
            axioms={**self.axioms, **other.axioms},
        )

    def validate_axioms(self) -> List[str]:
        """Return every problem with the axioms: ill-formed sides, boundaries, arities"""
        problems: List[str] = []
        for name, axiom in self.axioms.items():
            ok, errors = check_compatible(axiom.lhs, axiom.rhs)
            problems.extend(f"axiom {name}: {error}" for error in errors)
            for side in axiom.sides:
                problems.extend(f"axiom {name}: {p}" for p in self.arity_problems(side))
        return problems

    def arity_problems(self, expr: TensorExpr) -> List[str]:
        problems: List[str] = []
        for leaf, _ in iter_leaves(expr):
            if isinstance(leaf, IdentityWire):
                continue
            decl = self.generators.get(leaf.name)
            if decl is None:
                problems.append(f"generator {leaf.name} is not declared")
                continue
            regex = pattern_regex(decl.pattern)
            for word in sorted(unrolled_words(leaf.edges)):
                if not regex.fullmatch(word):
                    problems.append(
                        f"{leaf} unrolls to arity {word or 'ε'} "
                        f"outside pattern {decl.pattern or 'ε'}"
                    )
                    break
        return problems


def pattern_regex(pattern: str) -> "re.Pattern[str]":
    """Translate an arity pattern into a regular expression over ^ and v"""
    translated = pattern.replace("^", r"\^").replace("(", "(?:")
    return re.compile(translated)


def unrolled_words(items: Sequence[EdgeItem], max_repeat: int = 3) -> Set[str]:
    """Arity words of an edgeterm with every group repeated 0..max_repeat times"""
    words = {""}
    for item in items:
        if isinstance(item, DirectedEdge):
            letter = "^" if item.direction is Direction.OUTPUT else "v"
            options = {letter}
        else:
            body = unrolled_words(item.body, max_repeat)
            options = set()
            for count in range(max_repeat + 1):
                for combo in itertools.product(sorted(body), repeat=count):
                    options.add("".join(combo))
        words = {w + o for w in words for o in options}
    return words


def arity_word(items: Sequence[EdgeItem]) -> str:
    """Arity word of a concrete edgeterm"""
    words = unrolled_words(items, 1)
    if len(words) != 1:
        raise BangTensorError("arity words exist only for concrete edgeterms")
    return next(iter(words))


# =============================================================================
# Proof scripts
# =============================================================================


class RenameEdge(_Frozen):
    kind: Literal["rename"] = "rename"
    old: str
    new: str

    def __str__(self) -> str:
        return f"rename {self.old}->{self.new}"


class RenameBox(_Frozen):
    kind: Literal["boxrename"] = "boxrename"
    old: str
    new: str

    def __str__(self) -> str:
        return f"boxrename {self.old}->{self.new}"


class OpSpec(_Frozen):
    kind: Literal["op"] = "op"
    op: OpKind
    box: str

    def __str__(self) -> str:
        return f"{self.op.value} {self.box}"


class WeakenSpec(_Frozen):
    kind: Literal["weaken"] = "weaken"
    box: str
    extra: TensorExpr

    def __str__(self) -> str:
        return f"weaken {self.box} ({self.extra})"


Specialization = Annotated[
    Union[RenameEdge, RenameBox, OpSpec, WeakenSpec], Field(discriminator="kind")
]


class Equiv(_Frozen):
    """Both sides equivalent, or equivalent side-by-side to a referenced equation"""

    rule: Literal["equiv"] = "equiv"
    ref: Optional[str] = None


class AxiomOrLemma(_Frozen):
    """Instance of an axiom, lemma, theorem or earlier step after specialization"""

    rule: Literal["instance"] = "instance"
    ref: str
    specs: Tuple[Specialization, ...] = ()
    # "axiom" looks up axioms then lemmas; "apply" looks up steps, then lemmas, then axioms
    lookup: Literal["axiom", "apply"] = "axiom"


class Prod(_Frozen):
    rule: Literal["prod"] = "prod"
    premise: str
    extra: TensorExpr


class BoxIntro(_Frozen):
    rule: Literal["box"] = "box"
    premise: str
    box: str


class OpRule(_Frozen):
    rule: Literal["op"] = "op"
    premise: str
    op: OpKind
    box: str


class WeakenRule(_Frozen):
    rule: Literal["weaken"] = "weaken"
    premise: str
    box: str
    extra: TensorExpr


class Symmetry(_Frozen):
    rule: Literal["sym"] = "sym"
    premise: str


class Transitivity(_Frozen):
    rule: Literal["trans"] = "trans"
    premises: Tuple[str, ...]


class Hypothesis(_Frozen):
    rule: Literal["hyp"] = "hyp"
    goal: str
    specs: Tuple[Specialization, ...] = ()


Justification = Annotated[
    Union[
        Equiv, AxiomOrLemma, Prod, BoxIntro, OpRule, WeakenRule, Symmetry, Transitivity, Hypothesis
    ],
    Field(discriminator="rule"),
]


class ProofStep(_Frozen):
    kind: Literal["step"] = "step"
    name: str
    claimed: Equation
    justification: Justification
    line: int = 0


class InductionBlock(_Frozen):
    kind: Literal["induction"] = "induction"
    box: str
    goal: str
    base: Tuple[ProofItem, ...] = ()
    step: Tuple[ProofItem, ...] = ()
    line: int = 0


ProofItem = Annotated[Union[ProofStep, InductionBlock], Field(discriminator="kind")]


class Theorem(_Frozen):
    name: str
    statement: Equation
    body: Tuple[ProofItem, ...] = ()
    line: int = 0


class ProofScript(_Frozen):
    theorems: Tuple[Theorem, ...] = ()
    source: Optional[str] = None


InductionBlock.model_rebuild()
Theorem.model_rebuild()
ProofScript.model_rebuild()


class FixedBoxSet(_Frozen):
    """Boxes on which no !-box operation may act"""

    boxes: FrozenSet[str] = frozenset()

    def with_box(self, name: str) -> "FixedBoxSet":
        return FixedBoxSet(boxes=self.boxes | {name})

    def renamed(self, old: str, new: str) -> "FixedBoxSet":
        """A fixed box keeps its status under a new name; the old name stays fixed"""
        return self.with_box(new) if old in self.boxes else self

    def guard(self, op: OpKind, box: str) -> None:
        if box in self.boxes:
            raise FixedBoxViolation(f"{op.value} {box} acts on a box fixed by induction")


# =============================================================================
# Rule application
# =============================================================================


class ProofContext(BaseModel):
    """Everything a step may refer to"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    theory: Theory
    lemmas: Dict[str, Equation] = Field(default_factory=dict)
    steps: Dict[str, Equation] = Field(default_factory=dict)
    hypotheses: Dict[str, Equation] = Field(default_factory=dict)
    fixed: FixedBoxSet = FixedBoxSet()

    def scoped(self, **update: object) -> "ProofContext":
        clone = self.model_copy(update=update)
        clone.steps = dict(self.steps)
        return clone

    def resolve(self, ref: str, lookup: str = "apply") -> Equation:
        if lookup == "apply":
            tables = (self.steps, self.lemmas, self.theory.axioms)
        else:
            tables = (self.theory.axioms, self.lemmas)
        for table in tables:
            if ref in table:
                return table[ref]
        raise UnknownReference(f"unknown {lookup} reference {ref}")

    def premise(self, ref: str) -> Equation:
        if ref in self.steps:
            return self.steps[ref]
        raise UnknownReference(f"unknown step {ref}")


def apply_op_to_equation(
    eq: Equation, op: OpKind, box: str, fr: Optional[FreshnessFunction] = None
) -> Equation:
    """Op_B(G = H) with one freshness function shared by both sides"""
    shared = fr if fr is not None else (fresh_for(eq.sides) if op.needs_fresh else None)
    lhs = apply_op(BoxOp(kind=op, target=box, fr=shared), eq.lhs)
    rhs = apply_op(BoxOp(kind=op, target=box, fr=shared), eq.rhs)
    return Equation(lhs=lhs, rhs=rhs, name=eq.name)


def weaken_equation(eq: Equation, box: str, extra: TensorExpr) -> Equation:
    return _compatible_equation(weaken(box, extra, eq.lhs), weaken(box, extra, eq.rhs), eq.name)


def derive_rename(eq: Equation, old: str, new: str, *, box: bool = False) -> Equation:
    """Apply an edge rename (or a box rename) to both sides of an equation"""
    if box:
        return Equation(
            lhs=rename_box(old, new, eq.lhs), rhs=rename_box(old, new, eq.rhs), name=eq.name
        )
    return Equation(
        lhs=rename_edge(old, new, eq.lhs, avoid=[eq.rhs]),
        rhs=rename_edge(old, new, eq.rhs, avoid=[eq.lhs]),
        name=eq.name,
    )


def specialize(
    eq: Equation,
    specs: Sequence[Specialization],
    fixed: FixedBoxSet,
    track_renames: bool = False,
) -> Tuple[Equation, FixedBoxSet]:
    """
    Apply a specialization sequence left to right

    With `track_renames` the premise may mention fixed boxes (a hypothesis or an
    earlier step), so a box renamed away from a fixed name stays fixed under its
    new name. Axioms and lemmas are schematic in their box names.

    Returns:
        The specialized equation and the fixed set after its renamings
    """
    current = eq
    for spec in specs:
        if isinstance(spec, RenameEdge):
            current = derive_rename(current, spec.old, spec.new)
        elif isinstance(spec, RenameBox):
            current = derive_rename(current, spec.old, spec.new, box=True)
            if track_renames:
                fixed = fixed.renamed(spec.old, spec.new)
        elif isinstance(spec, OpSpec):
            fixed.guard(spec.op, spec.box)
            current = apply_op_to_equation(current, spec.op, spec.box)
        else:
            current = weaken_equation(current, spec.box, spec.extra)
    return current, fixed


def same_equation(left: Equation, right: Equation) -> bool:
    """Side-by-side equivalence of two equations"""
    return equiv(left.lhs, right.lhs) and equiv(left.rhs, right.rhs)


def apply_rule(step: ProofStep, ctx: ProofContext) -> Equation:
    """
    Compute the conclusion of a step's justification and compare it to the claim

    Returns:
        The claimed equation, once verified

    Raises:
        FixedBoxViolation: an operation targets a fixed box
        IllFormedResultError: a rule produced an ill-formed side
        ClaimMismatch: the computed conclusion differs from the claim
        RuleError: any other failure to justify the step
    """
    claimed = step.claimed
    just = step.justification
    try:
        for side in claimed.sides:
            violations = check_wellformed(side)
            if violations:
                raise RuleError(f"claimed side {side} is ill-formed: {violations[0]}")

        if isinstance(just, Equiv) and just.ref is None:
            if not equiv(claimed.lhs, claimed.rhs):
                raise ClaimMismatch(f"{claimed.lhs} is not equivalent to {claimed.rhs}")
            ok, errors = check_compatible(claimed.lhs, claimed.rhs)
            if not ok:
                raise IncompatibleEquation(errors[0])
            return claimed

        derived = _derive(just, ctx)
        if not same_equation(derived, claimed):
            raise ClaimMismatch(f"derived {derived} but claimed {claimed}")
        return claimed
    except RuleError as exc:
        exc.step = step.name
        raise
    except (IllFormedError, IllFormedResultError) as exc:
        raise RuleError(f"ill-formed result: {exc}", step=step.name) from exc
    except BangTensorError as exc:
        raise RuleError(f"{type(exc).__name__}: {exc}", step=step.name) from exc


def _derive(just: Justification, ctx: ProofContext) -> Equation:
    if isinstance(just, Equiv):
        assert just.ref is not None
        return ctx.resolve(just.ref)
    if isinstance(just, AxiomOrLemma):
        from_step = just.lookup == "apply" and just.ref in ctx.steps
        derived, ctx.fixed = specialize(
            ctx.resolve(just.ref, just.lookup), just.specs, ctx.fixed, track_renames=from_step
        )
        return derived
    if isinstance(just, Prod):
        premise = ctx.premise(just.premise)
        return _compatible_equation(
            product(premise.lhs, just.extra), product(premise.rhs, just.extra)
        )
    if isinstance(just, BoxIntro):
        premise = ctx.premise(just.premise)
        return _compatible_equation(
            TensorExpr(factors=(Box(name=just.box, body=premise.lhs),)),
            TensorExpr(factors=(Box(name=just.box, body=premise.rhs),)),
        )
    if isinstance(just, OpRule):
        ctx.fixed.guard(just.op, just.box)
        return apply_op_to_equation(ctx.premise(just.premise), just.op, just.box)
    if isinstance(just, WeakenRule):
        return weaken_equation(ctx.premise(just.premise), just.box, just.extra)
    if isinstance(just, Symmetry):
        return ctx.premise(just.premise).swapped()
    if isinstance(just, Transitivity):
        chain = [ctx.premise(ref) for ref in just.premises]
        for index, (left, right) in enumerate(zip(chain, chain[1:])):
            if not equiv(left.rhs, right.lhs):
                raise ClaimMismatch(
                    f"trans link {just.premises[index]} -> {just.premises[index + 1]} "
                    "does not meet: "
                    f"{left.rhs} vs {right.lhs}"
                )
        return Equation(lhs=chain[0].lhs, rhs=chain[-1].rhs)
    if just.goal not in ctx.hypotheses:
        raise UnknownReference(f"no induction hypothesis for {just.goal} in scope")
    for spec in just.specs:
        if not isinstance(spec, RenameEdge):
            raise RuleError(f"hypothesis {just.goal} admits free edge renaming only, not {spec}")
    derived, ctx.fixed = specialize(
        ctx.hypotheses[just.goal], just.specs, ctx.fixed, track_renames=True
    )
    return derived


# =============================================================================
# Proof checking
# =============================================================================


class StepVerdict(BaseModel):
    """Outcome of one step or induction block"""

    theorem: str
    step: str
    ok: bool
    error: Optional[str] = None
    line: int = 0

    def __str__(self) -> str:
        status = "ok" if self.ok else self.error
        return f"{self.theorem}/{self.step}: {status}"


class TheoremVerdict(BaseModel):
    name: str
    accepted: bool
    errors: List[str] = Field(default_factory=list)

    def __str__(self) -> str:
        return f"{self.name}: {'accepted' if self.accepted else 'rejected'}"


class ProofReport(BaseModel):
    """Per-step diagnostics and per-theorem verdicts for one script"""

    steps: List[StepVerdict] = Field(default_factory=list)
    theorems: List[TheoremVerdict] = Field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return bool(self.theorems) and all(t.accepted for t in self.theorems)

    def lines(self) -> List[str]:
        out: List[str] = []
        for theorem in self.theorems:
            out.extend(str(v) for v in self.steps if v.theorem == theorem.name)
            out.append(str(theorem))
        return out


class ProofChecker:
    """
    Checks proof scripts against a theory

    Accepted theorems are kept as lemmas, so scripts checked later by the same
    checker may refer to them.
    """

    def __init__(self, theory: Theory):
        self.theory = theory
        self.lemmas: Dict[str, Equation] = {}

    def check(self, script: ProofScript) -> ProofReport:
        report = ProofReport()
        for theorem in script.theorems:
            verdict = self._check_theorem(theorem, report)
            report.theorems.append(verdict)
            if verdict.accepted:
                self.lemmas[theorem.name] = theorem.statement
            logger.info("theorem_checked", theorem=theorem.name, accepted=verdict.accepted)
        return report

    def _check_theorem(self, theorem: Theorem, report: ProofReport) -> TheoremVerdict:
        errors: List[str] = []
        ok, problems = check_compatible(theorem.statement.lhs, theorem.statement.rhs)
        if not ok:
            errors.append(f"statement is not a valid equation: {problems[0]}")
            return TheoremVerdict(name=theorem.name, accepted=False, errors=errors)

        ctx = ProofContext(theory=self.theory, lemmas=dict(self.lemmas))
        conclusion = self._check_items(theorem, theorem.body, ctx, report, errors)
        if not errors:
            if conclusion is None:
                errors.append("proof is empty")
            elif not _safe_same(conclusion, theorem.statement):
                errors.append(
                    f"proof concludes {conclusion}, not the statement {theorem.statement}"
                )
        if errors and not any(v.theorem == theorem.name and not v.ok for v in report.steps):
            report.steps.append(
                StepVerdict(
                    theorem=theorem.name, step="qed", ok=False, error=errors[-1], line=theorem.line
                )
            )
        return TheoremVerdict(name=theorem.name, accepted=not errors, errors=errors)

    def _check_items(
        self,
        theorem: Theorem,
        items: Sequence[ProofItem],
        ctx: ProofContext,
        report: ProofReport,
        errors: List[str],
    ) -> Optional[Equation]:
        last: Optional[Equation] = None
        for item in items:
            if isinstance(item, ProofStep):
                last = self._check_step(theorem, item, ctx, report, errors)
            else:
                last = self._check_induction(theorem, item, ctx, report, errors)
        return last

    def _check_step(
        self,
        theorem: Theorem,
        step: ProofStep,
        ctx: ProofContext,
        report: ProofReport,
        errors: List[str],
    ) -> Equation:
        try:
            apply_rule(step, ctx)
            report.steps.append(
                StepVerdict(theorem=theorem.name, step=step.name, ok=True, line=step.line)
            )
            logger.debug("step_ok", theorem=theorem.name, step=step.name)
        except RuleError as exc:
            message = f"{type(exc).__name__}: {exc}"
            errors.append(f"{step.name}: {message}")
            report.steps.append(
                StepVerdict(
                    theorem=theorem.name, step=step.name, ok=False, error=message, line=step.line
                )
            )
        # failed claims stay available to later steps
        ctx.steps[step.name] = step.claimed
        return step.claimed

    def _check_induction(
        self,
        theorem: Theorem,
        block: InductionBlock,
        ctx: ProofContext,
        report: ProofReport,
        errors: List[str],
    ) -> Equation:
        label = f"induction {block.box}"
        goal = theorem.statement
        try:
            if block.goal != theorem.name:
                raise InductionError(
                    f"induction goal {block.goal} is not the theorem {theorem.name}"
                )
            top = {f.name for f in goal.lhs.factors if isinstance(f, Box)}
            if block.box not in top:
                raise InductionError(
                    f"induction box {block.box} is not a top-level box of the goal"
                )
            ctx.fixed.guard(OpKind.KILL, block.box)
        except RuleError as exc:
            message = f"{type(exc).__name__}: {exc}"
            errors.append(f"{label}: {message}")
            report.steps.append(
                StepVerdict(
                    theorem=theorem.name, step=label, ok=False, error=message, line=block.line
                )
            )
            return goal

        base_goal = apply_op_to_equation(goal, OpKind.KILL, block.box)
        step_goal = apply_op_to_equation(goal, OpKind.EXP, block.box, fresh_for(goal.sides))

        before = len(errors)
        base_ctx = ctx.scoped()
        base_last = self._check_items(theorem, block.base, base_ctx, report, errors)
        if base_last is None or not _safe_same(base_last, base_goal):
            errors.append(f"{label}: base case must prove {base_goal}")

        step_ctx = ctx.scoped(
            hypotheses={**ctx.hypotheses, block.goal: goal}, fixed=ctx.fixed.with_box(block.box)
        )
        step_last = self._check_items(theorem, block.step, step_ctx, report, errors)
        if step_last is None or not _safe_same(step_last, step_goal):
            errors.append(f"{label}: step case must prove {step_goal}")

        block_errors = errors[before:]
        own = [e for e in block_errors if e.startswith(label)]
        report.steps.append(
            StepVerdict(
                theorem=theorem.name,
                step=label,
                ok=not own,
                error=own[0].split(": ", 1)[1] if own else None,
                line=block.line,
            )
        )
        return goal


def _safe_same(left: Equation, right: Equation) -> bool:
    try:
        return same_equation(left, right)
    except BangTensorError:
        return False


def check_proof(
    script: ProofScript, theory: Theory, lemmas: Optional[Dict[str, Equation]] = None
) -> ProofReport:
    """Check one script; `lemmas` supplies theorems accepted earlier"""
    checker = ProofChecker(theory)
    checker.lemmas.update(lemmas or {})
    return checker.check(script)


# =============================================================================
# Instances of equations
# =============================================================================


def joint_key(lhs: TensorExpr, rhs: TensorExpr, anonymous: FrozenSet[str] = frozenset()) -> str:
    """Canonical key of an equation instance, fresh names anonymized"""
    return canonicalize([simplify(lhs), simplify(rhs)], anonymous=anonymous).key


def iter_equation_instances(
    eq: Equation, bound: Union[int, InstanceBound]
) -> List[Tuple[Instantiation, Equation]]:
    """Shared instantiations of both sides, deduplicated up to fresh names"""
    original = free_names(eq.lhs) | free_names(eq.rhs)
    seen: Dict[str, Tuple[Instantiation, Equation]] = {}
    for ops, (lhs, rhs) in iter_instantiations([eq.lhs, eq.rhs], bound):
        fresh = (free_names(lhs) | free_names(rhs)) - original
        key = joint_key(lhs, rhs, frozenset(fresh))
        seen.setdefault(key, (ops, Equation(lhs=lhs, rhs=rhs, name=eq.name)))
    return list(seen.values())


def instantiate_equation(eq: Equation, bound: Union[int, InstanceBound]) -> List[Equation]:
    """Concrete equations i(G) = i(H) for shared instantiations within the bound"""
    return [instance for _, instance in iter_equation_instances(eq, bound)]


def instance_keys(
    eq: Equation, bound: Union[int, InstanceBound], original: FrozenSet[str]
) -> Set[str]:
    """Keys of the bounded instances, anonymizing every free name outside `original`"""
    keys: Set[str] = set()
    for instance in instantiate_equation(eq, bound):
        fresh = (free_names(instance.lhs) | free_names(instance.rhs)) - original
        keys.add(joint_key(instance.lhs, instance.rhs, frozenset(fresh)))
    return keys


# =============================================================================
# Derived rules
# =============================================================================


def _wire_for(edge: DirectedEdge, new: str) -> TensorExpr:
    if edge.direction is Direction.OUTPUT:
        return TensorExpr(factors=(IdentityWire(output=new, input=edge.name),))
    return TensorExpr(factors=(IdentityWire(output=edge.name, input=new),))


def derive_edge_rename_by_wire(eq: Equation, old: str, new: str) -> Equation:
    """
    Rename a free edge by plugging an identity wire onto it

    With an empty context the wire is multiplied on (Prod); otherwise it is
    weakened into the innermost box of the edge's context.
    """
    edge = next(e for e in free_edges(eq.lhs) if e.name == old)
    wire = _wire_for(edge, new)
    ctx = context(eq.lhs, edge)
    if not ctx:
        return Equation(lhs=product(eq.lhs, wire), rhs=product(eq.rhs, wire))
    return Equation(
        lhs=weaken(ctx[0], wire, eq.lhs, check=False), rhs=weaken(ctx[0], wire, eq.rhs, check=False)
    )


def _rename_fresh_back(eq: Equation, fr: FreshnessFunction, keep: Set[str]) -> Equation:
    current = eq
    for old, fresh in fr.box_map.items():
        if old in keep and fresh in boxes(current.lhs):
            current = derive_rename(current, fresh, old, box=True)
    for old, fresh in fr.edge_map.items():
        names = free_names(current.lhs)
        if fresh in names and old not in names:
            current = derive_rename(current, fresh, old)
    return current


def derive_drop(eq: Equation, box: str) -> Equation:
    """Drop_B through Exp_B, Kill_B and renaming of the fresh names back"""
    fr = fresh_for(eq.sides)
    expanded = apply_op_to_equation(eq, OpKind.EXP, box, fr)
    killed = apply_op_to_equation(expanded, OpKind.KILL, box)
    original_boxes = set(boxes(eq.lhs))
    return _rename_fresh_back(killed, fr, original_boxes)


def derive_box_rename(eq: Equation, old: str, new: str) -> Equation:
    """Rename a box through Copy_A then Kill_A, renaming the copied contents back"""
    fr = fresh_for(eq.sides)
    fr.avoid([TensorExpr(factors=(Box(name=new, body=TensorExpr()),))])
    lhs = kill_box(old, copy_box(old, fr, eq.lhs))
    rhs = kill_box(old, copy_box(old, fr, eq.rhs))
    copied = Equation(lhs=lhs, rhs=rhs, name=eq.name)
    renamed = _rename_fresh_back(copied, fr, set(boxes(eq.lhs)) - {old})
    return derive_rename(renamed, fr.box(old), new, box=True)
