"""
Tests for instantiation sequences, the KE normal form and instance enumeration
"""
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from libs.bangtensor.boxops import BoxOp, OpKind
from libs.bangtensor.core import canonical_key, free_names, is_concrete, top_level_boxes
from libs.bangtensor.errors import BangTensorError, IncompleteInstantiation, UnknownBoxError
from libs.bangtensor.instantiate import (
    InstanceBound,
    apply_instantiation,
    apply_jointly,
    eliminate_copies,
    enumerate_instances,
    iter_instantiations,
    normal_form,
)
from libs.bangtensor.syntax import parse_tensor
from tests.strategies import wellformed_terms

SPIDER = parse_tensor("s{+o [-x>A} []A")
TWO_BOXES = parse_tensor("s{+o [-x>A [-y>B} []A []B")


def same_instance(left, right, original):
    return canonical_key(left, anonymous=free_names(left) - original) == canonical_key(
        right, anonymous=free_names(right) - original
    )


def exp(box):
    return BoxOp(kind=OpKind.EXP, target=box)


def kill(box):
    return BoxOp(kind=OpKind.KILL, target=box)


def copy(box):
    return BoxOp(kind=OpKind.COPY, target=box)


class TestEnumeration:
    @pytest.mark.parametrize("bound", range(5))
    def test_spider_instances_by_arity(self, bound):
        instances = enumerate_instances(SPIDER, bound)
        assert len(instances) == bound + 1
        assert sorted(len(i.factors[0].edges) for i in instances) == list(range(1, bound + 2))
        assert all(is_concrete(i) for i in instances)

    def test_two_boxes_at_bound_one(self):
        assert len(enumerate_instances(TWO_BOXES, 1)) == 4

    def test_bound_zero_kills_everything(self):
        assert enumerate_instances(SPIDER, InstanceBound(n=0)) == [parse_tensor("s{+o}")]

    def test_nested_boxes_expand_per_copy(self):
        expr = parse_tensor("f{[-x>A} [g{+x [-y>B} []B]A")
        # A expanded 0, 1 or 2 times; every copy of B independently 0 or 1 times
        assert len(enumerate_instances(expr, InstanceBound(n=1))) == 1 + 2
        assert len(enumerate_instances(expr, InstanceBound(n=2))) == 1 + 2 + 4

    def test_joint_instantiation_shares_steps(self):
        lhs = parse_tensor("s{+o [-x>A} []A")
        rhs = parse_tensor("t{+o [-x>A} []A")
        for ops, (left, right) in iter_instantiations([lhs, rhs], 2):
            assert len(left.factors[0].edges) == len(right.factors[0].edges)
            assert [op.kind for op in ops][-1] is OpKind.KILL

    def test_bound_must_be_nonnegative(self):
        with pytest.raises(ValidationError):
            InstanceBound(n=-1)


class TestApplication:
    def test_apply_instantiation(self):
        result = apply_instantiation([exp("A"), exp("A"), kill("A")], SPIDER)
        assert result == parse_tensor("s{+o -x.2 -x.1}")

    def test_unknown_box_reports_step(self):
        with pytest.raises(UnknownBoxError) as info:
            apply_jointly([exp("A"), kill("A"), kill("A")], [SPIDER])
        assert info.value.step == 2

    def test_drop_is_not_an_instantiation_step(self):
        with pytest.raises(BangTensorError):
            apply_instantiation([BoxOp(kind=OpKind.DROP, target="A")], SPIDER)


class TestNormalForm:
    @pytest.mark.parametrize(
        "ops",
        [
            [kill("B"), exp("A"), kill("A")],
            [exp("B"), exp("A"), exp("B"), kill("B"), kill("A")],
            [exp("A"), kill("B"), exp("A"), kill("A")],
        ],
    )
    def test_normal_form_reorders_to_least_box_first(self, ops):
        nf = normal_form(ops, TWO_BOXES)
        assert [op.target for op in nf] == sorted(op.target for op in nf)
        assert normal_form(nf, TWO_BOXES) == nf
        assert same_instance(
            apply_instantiation(nf, TWO_BOXES), apply_instantiation(ops, TWO_BOXES), {"o"}
        )

    def test_copies_become_expansions(self):
        ops = [copy("A"), exp("A.1"), kill("A.1"), exp("A"), kill("A")]
        reduced = eliminate_copies(ops, SPIDER)
        assert all(op.kind is not OpKind.COPY for op in reduced)
        assert [op.kind for op in reduced].count(OpKind.EXP) == 2
        assert same_instance(
            apply_instantiation(reduced, SPIDER), apply_instantiation(ops, SPIDER), {"o"}
        )

    def test_killed_copy_adds_nothing(self):
        ops = [copy("A"), kill("A.1"), exp("A"), kill("A")]
        assert eliminate_copies(ops, SPIDER) == [exp("A"), kill("A")]

    def test_incomplete_instantiation(self):
        with pytest.raises(IncompleteInstantiation):
            normal_form([exp("A")], SPIDER)

    @settings(max_examples=120, deadline=None)
    @given(wellformed_terms(), st.data())
    def test_random_instantiations(self, expr, data):
        ops = []
        current = expr
        while top_level_boxes(current):
            box = data.draw(st.sampled_from(top_level_boxes(current)))
            kinds = [OpKind.EXP, OpKind.KILL, OpKind.COPY] if len(ops) < 8 else [OpKind.KILL]
            op = BoxOp(kind=data.draw(st.sampled_from(kinds)), target=box)
            current = apply_instantiation([op], current)
            ops.append(op)

        nf = normal_form(ops, expr)
        assert all(op.kind is not OpKind.COPY for op in nf)
        assert normal_form(nf, expr) == nf
        assert same_instance(apply_instantiation(nf, expr), current, free_names(expr))
