"""
Tests for equations, theories, rule application and proof checking
"""
import pytest

from libs.bangtensor.boxops import BoxOp, OpKind
from libs.bangtensor.calculus import (
    AxiomOrLemma,
    Equation,
    FixedBoxSet,
    GeneratorDecl,
    Hypothesis,
    OpSpec,
    ProofChecker,
    ProofContext,
    ProofStep,
    RenameBox,
    Theory,
    apply_op_to_equation,
    apply_rule,
    check_compatible,
    check_proof,
    derive_box_rename,
    derive_drop,
    derive_edge_rename_by_wire,
    derive_rename,
    instance_keys,
    instantiate_equation,
    joint_key,
    same_equation,
    unrolled_words,
)
from libs.bangtensor.core import boxes, free_names
from libs.bangtensor.errors import FixedBoxViolation, RuleError
from libs.bangtensor.instantiate import apply_jointly, eliminate_copies, iter_instantiations
from libs.bangtensor.syntax import load_proof, parse_proof, parse_tensor


def equation(lhs, rhs):
    return Equation(lhs=parse_tensor(lhs), rhs=parse_tensor(rhs))


def failures(report):
    return {v.step: v.error for v in report.steps if not v.ok}


class TestEquations:
    def test_compatible(self):
        lhs, rhs = parse_tensor("s{+o [-x>B} []B"), parse_tensor("t{+o [-x>B} []B")
        assert check_compatible(lhs, rhs) == (True, [])

    @pytest.mark.parametrize(
        "lhs,rhs,fragment",
        [
            ("s{+o}", "u{+p}", "free edge +o occurs only in the lhs"),
            ("s{+o [-x>B} [f{+x}]B", "s{+o}", "box B occurs only in the lhs"),
            ("s{+o [-x>B} []B", "s{+o -x} []B", "context of -x differs"),
            ("[[f{+o}]A]B", "[f{+o}]A []B", "nesting A in B"),
            ("f{+a} g{-a -a}", "f{+a}", "lhs:"),
        ],
    )
    def test_incompatible(self, lhs, rhs, fragment):
        ok, errors = check_compatible(parse_tensor(lhs), parse_tensor(rhs))
        assert not ok
        assert fragment in errors[0]

    def test_corpus_axioms_are_valid(self, monoid, antihom_theory):
        assert monoid.validate_axioms() == []
        assert antihom_theory.validate_axioms() == []

    def test_arity_problems_are_reported(self):
        theory = Theory(
            generators={"m": GeneratorDecl(name="m", pattern="^vv")},
            axioms={"bad": equation("m{+o -x} n{+x}", "m{+o -x} n{+x}")},
        )
        problems = theory.validate_axioms()
        assert any("outside pattern ^vv" in p for p in problems)
        assert any("generator n is not declared" in p for p in problems)

    def test_unrolled_words(self):
        items = parse_tensor("s{+o [-x>B} []B").factors[0].edges
        assert unrolled_words(items, max_repeat=2) == {"^", "^v", "^vv"}

    def test_instances_of_an_axiom(self, monoid):
        instances = instantiate_equation(monoid.axioms["sp_step"], 2)
        assert len(instances) == 3
        assert all(len(i.lhs.factors) == 1 for i in instances)


class TestDerivedRules:
    def test_rename(self, monoid):
        renamed = derive_rename(monoid.axioms["sp_step"], "y", "r")
        assert same_equation(renamed, equation("s{+o [-x>B -r} []B", "m{+o -p -r} s{+p [-x>B} []B"))

    def test_drop(self, monoid):
        dropped = derive_drop(monoid.axioms["sp_step"], "B")
        assert same_equation(dropped, equation("s{+o -x -y}", "m{+o -p -y} s{+p -x}"))

    def test_box_rename(self, monoid):
        renamed = derive_box_rename(monoid.axioms["sp_step"], "B", "C")
        assert same_equation(renamed, equation("s{+o [-x>C -y} []C", "m{+o -p -y} s{+p [-x>C} []C"))

    @pytest.mark.parametrize(
        "axiom,old,new", [("sp_base", "o", "r"), ("sp_step", "x", "z"), ("sp_step", "y", "w")]
    )
    def test_rename_by_wire_agrees_with_rename(self, monoid, axiom, old, new):
        eq = monoid.axioms[axiom]
        assert same_equation(derive_edge_rename_by_wire(eq, old, new), derive_rename(eq, old, new))


class TestRules:
    def test_hypothesis_admits_renaming_only(self, monoid):
        goal = monoid.axioms["sp_step"]
        ctx = ProofContext(theory=monoid, hypotheses={"goal": goal})
        step = ProofStep(
            name="h1",
            claimed=goal,
            justification=Hypothesis(goal="goal", specs=(OpSpec(op=OpKind.EXP, box="B"),)),
        )
        with pytest.raises(RuleError) as info:
            apply_rule(step, ctx)
        assert info.value.step == "h1"

    def test_fixed_box_rejects_operations(self, monoid):
        ctx = ProofContext(theory=monoid, fixed=FixedBoxSet(boxes=frozenset({"B"})))
        step = ProofStep(
            name="k1",
            claimed=equation("s{+o -y}", "m{+o -p -y} s{+p}"),
            justification=AxiomOrLemma(ref="sp_step", specs=(OpSpec(op=OpKind.KILL, box="B"),)),
        )
        with pytest.raises(FixedBoxViolation):
            apply_rule(step, ctx)

    def test_fixed_box_may_be_renamed(self, monoid):
        ctx = ProofContext(theory=monoid, fixed=FixedBoxSet(boxes=frozenset({"B"})))
        claimed = equation("s{+o [-x>C -y} []C", "m{+o -p -y} s{+p [-x>C} []C")
        step = ProofStep(
            name="r1",
            claimed=claimed,
            justification=AxiomOrLemma(ref="sp_step", specs=(RenameBox(old="B", new="C"),)),
        )
        assert apply_rule(step, ctx) == claimed


SMALL_PROOFS = """
theorem boxed_unit: [m{+o -p -x} u{+p}]B = [id{+o -x}]B
proof
  step e1: m{+o -p -x} u{+p} = id{+o -x} by axiom unitL
  step e2: [m{+o -p -x} u{+p}]B = [id{+o -x}]B by box e1 in B
qed

theorem unit_swap: m{+o -p -x} u{+p} = u{+p} m{+o -p -x}
proof
  step q1: m{+o -p -x} u{+p} = u{+p} m{+o -p -x} by equiv
qed

theorem unit_flip: id{+o -x} = m{+o -p -x} u{+p}
proof
  step f1: m{+o -p -x} u{+p} = id{+o -x} by axiom unitR
  step f2: id{+o -x} = m{+o -p -x} u{+p} by sym f1
qed

theorem dangling: s{+o} = u{+o}
proof
  step d1: s{+o} = u{+o} by axiom nope
qed

theorem wrong_box: s{+o [-x>B} []B = s{+o [-x>B} []B
proof
  induction Z on wrong_box
  base { }
  step { }
qed
"""


class TestProofChecker:
    @pytest.fixture
    def report(self, monoid):
        return check_proof(parse_proof(SMALL_PROOFS), monoid)

    def test_verdicts(self, report):
        verdicts = {t.name: t.accepted for t in report.theorems}
        assert verdicts == {
            "boxed_unit": True,
            "unit_swap": True,
            "unit_flip": False,
            "dangling": False,
            "wrong_box": False,
        }
        assert not report.accepted

    def test_failed_claim_stays_available(self, report):
        errors = failures(report)
        assert errors["f1"].startswith("ClaimMismatch")
        assert "f2" not in errors

    def test_step_local_errors(self, report):
        errors = failures(report)
        assert errors["d1"].startswith("UnknownReference")
        assert errors["induction Z"].startswith("InductionError")

    def test_report_lines(self, report):
        lines = report.lines()
        assert "boxed_unit/e1: ok" in lines
        assert "boxed_unit: accepted" in lines
        assert "unit_flip: rejected" in lines

    def test_accepted_theorems_become_lemmas(self, monoid):
        checker = ProofChecker(monoid)
        checker.check(parse_proof(SMALL_PROOFS))
        assert set(checker.lemmas) == {"boxed_unit", "unit_swap"}


RENAMED_FIXED_BOX = """
theorem flip: s{+o [-x>B} []B = s{+o <-x]B} []B
proof
  induction B on flip
  base {
    step b1: s{+o} = s{+o} by equiv
  }
  step {
    step h1: s{+o [-x>B} []B = s{+o <-x]B} []B by hyp flip
    step h2: s{+o [-x>B -x.1} []B = s{+o -x.1 <-x]B} []B
      by apply h1 boxrename B->Z exp Z boxrename Z->B
  }
qed

theorem flop: s{+o [-x>B} []B = s{+o <-x]B} []B
proof
  induction B on flop
  base {
    step b1: s{+o} = s{+o} by equiv
  }
  step {
    step h1: s{+o [-x>B} []B = s{+o <-x]B} []B by hyp flop
    step h2: s{+o [-x>Z} []Z = s{+o <-x]Z} []Z by apply h1 boxrename B->Z
    step h3: s{+o [-x>Z -x.1} []Z = s{+o -x.1 <-x]Z} []Z by op h2 exp Z
    step h4: s{+o [-x>B -x.1} []B = s{+o -x.1 <-x]B} []B by apply h3 boxrename Z->B
  }
qed
"""


class TestFixedBoxRenaming:
    @pytest.fixture
    def report(self, monoid):
        return check_proof(parse_proof(RENAMED_FIXED_BOX), monoid)

    def test_false_equation_is_rejected(self, report):
        assert {t.name: t.accepted for t in report.theorems} == {"flip": False, "flop": False}

    def test_exp_on_renamed_fixed_box_in_one_step(self, report):
        errors = {v.step: v.error for v in report.steps if v.theorem == "flip" and not v.ok}
        assert errors["h2"].startswith("FixedBoxViolation")
        assert "exp Z" in errors["h2"]

    def test_exp_on_renamed_fixed_box_in_a_later_step(self, report):
        errors = {v.step: v.error for v in report.steps if v.theorem == "flop" and not v.ok}
        assert "h2" not in errors
        assert errors["h3"].startswith("FixedBoxViolation")

    def test_hypothesis_renamed_without_operations_is_fine(self, monoid):
        ctx = ProofContext(
            theory=monoid,
            fixed=FixedBoxSet(boxes=frozenset({"B"})),
            steps={"h1": equation("s{+o [-x>B} []B", "s{+o <-x]B} []B")},
        )
        step = ProofStep(
            name="h2",
            claimed=equation("s{+o [-x>Z} []Z", "s{+o <-x]Z} []Z"),
            justification=AxiomOrLemma(
                ref="h1", lookup="apply", specs=(RenameBox(old="B", new="Z"),)
            ),
        )
        assert apply_rule(step, ctx) == step.claimed
        assert ctx.fixed.boxes == {"B", "Z"}

    def test_axiom_boxes_stay_schematic(self, monoid):
        ctx = ProofContext(theory=monoid, fixed=FixedBoxSet(boxes=frozenset({"B"})))
        step = ProofStep(
            name="c1",
            claimed=equation(
                "s{+o [-x>D [-x.1>D.1 -y} []D []D.1",
                "m{+o -p -y} s{+p [-x>D [-x.1>D.1} []D []D.1",
            ),
            justification=AxiomOrLemma(
                ref="sp_step",
                specs=(RenameBox(old="B", new="D"), OpSpec(op=OpKind.COPY, box="D")),
            ),
        )
        assert apply_rule(step, ctx) == step.claimed
        assert ctx.fixed.boxes == {"B"}


class TestCorpusProofs:
    def test_merge_lemma_then_theorem(self, monoid, corpus):
        checker = ProofChecker(monoid)
        lemma = checker.check(load_proof(corpus / "merge_lemma.btp"))
        assert lemma.accepted, lemma.lines()
        theorem = checker.check(load_proof(corpus / "merge_theorem.btp"))
        assert theorem.accepted, theorem.lines()

    def test_merge_theorem_needs_the_lemma(self, monoid, corpus):
        report = ProofChecker(monoid).check(load_proof(corpus / "merge_theorem.btp"))
        assert not report.accepted
        assert failures(report)["m0"].startswith("UnknownReference")

    def test_antihom(self, lemma_checker, corpus):
        report = lemma_checker.check(load_proof(corpus / "antihom.btp"))
        assert report.accepted, report.lines()

    def test_spider_lemmas_are_kept(self, lemma_checker):
        assert {"spider_unary", "lemma_q"} <= set(lemma_checker.lemmas)


class TestMutations:
    def test_flipped_arc_is_rejected(self, lemma_checker, corpus):
        report = lemma_checker.check(load_proof(corpus / "mutations" / "antihom_flipped.btp"))
        assert not report.accepted
        assert failures(report)

    def test_operation_on_fixed_box(self, monoid, corpus):
        script = load_proof(corpus / "mutations" / "merge_lemma_fixed_op.btp")
        report = ProofChecker(monoid).check(script)
        assert not report.accepted
        assert failures(report)["s13"].startswith("FixedBoxViolation")

    def test_wrong_base_case(self, monoid, corpus):
        script = load_proof(corpus / "mutations" / "merge_lemma_wrong_base.btp")
        report = ProofChecker(monoid).check(script)
        assert not report.accepted
        errors = failures(report)
        assert errors["b6"].startswith("ClaimMismatch")
        assert "s15" not in errors


class TestOpRuleSoundness:
    @pytest.fixture
    def equations(self, monoid):
        merge = equation("s{+o [-x>A -p} s{+p [-y>B} []A []B", "s{+o [-x>A [-y>B} []A []B")
        return [monoid.axioms["sp_step"], merge]

    @staticmethod
    def original(eq):
        return free_names(eq.lhs) | free_names(eq.rhs)

    @pytest.mark.parametrize("kind", [OpKind.EXP, OpKind.KILL])
    def test_instances_of_derived_equations_are_instances(self, equations, kind):
        for eq in equations:
            for box in sorted(boxes(eq.lhs)):
                derived = apply_op_to_equation(eq, kind, box)
                original = self.original(eq)
                assert instance_keys(derived, 2, original) <= instance_keys(eq, 3, original)

    def test_copy_instances_are_reproduced_without_copies(self, equations):
        for eq in equations:
            original = self.original(eq)
            for box in sorted(boxes(eq.lhs)):
                copied = apply_op_to_equation(eq, OpKind.COPY, box)
                prefix = BoxOp(kind=OpKind.COPY, target=box)
                for ops, (lhs, rhs) in iter_instantiations(copied.sides, 1):
                    reduced = eliminate_copies([prefix, *ops], eq.lhs)
                    assert all(op.kind is not OpKind.COPY for op in reduced)
                    left, right = apply_jointly(reduced, eq.sides)
                    fresh = (free_names(lhs) | free_names(rhs)) - original
                    again = (free_names(left) | free_names(right)) - original
                    assert joint_key(left, right, frozenset(again)) == joint_key(
                        lhs, rhs, frozenset(fresh)
                    )
