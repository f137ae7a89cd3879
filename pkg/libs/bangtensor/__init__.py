"""
Bangtensor
Symbolic engine and proof checker for non-commutative !-tensors
"""
from libs.bangtensor.boxops import (
    BoxOp,
    OpKind,
    apply_op,
    fresh_for,
    rename_box,
    rename_edge,
    weaken,
)
from libs.bangtensor.calculus import Equation, ProofChecker, Theory, check_compatible, check_proof
from libs.bangtensor.core import (
    TensorExpr,
    check_wellformed,
    equiv,
    free_edges,
    is_wellformed,
    normalize,
    simplify,
)
from libs.bangtensor.errors import BangTensorError, ParseError, RuleError
from libs.bangtensor.instantiate import enumerate_instances, normal_form
from libs.bangtensor.model import builtin_matrix_algebra_model, check_equation_instances, evaluate
from libs.bangtensor.render import to_dot
from libs.bangtensor.syntax import parse_proof, parse_tensor, parse_theory, print_tensor

__version__ = "1.0.0"

__all__ = [
    "BangTensorError",
    "BoxOp",
    "Equation",
    "OpKind",
    "ParseError",
    "ProofChecker",
    "RuleError",
    "TensorExpr",
    "Theory",
    "apply_op",
    "builtin_matrix_algebra_model",
    "check_compatible",
    "check_equation_instances",
    "check_proof",
    "check_wellformed",
    "enumerate_instances",
    "equiv",
    "evaluate",
    "free_edges",
    "fresh_for",
    "is_wellformed",
    "normal_form",
    "normalize",
    "parse_proof",
    "parse_tensor",
    "parse_theory",
    "print_tensor",
    "rename_box",
    "rename_edge",
    "simplify",
    "to_dot",
    "weaken",
]
