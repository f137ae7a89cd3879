"""
Array Models
Contracts concrete !-tensors as multidimensional arrays and checks equation instances
"""
from __future__ import annotations

from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from libs.bangtensor.calculus import Equation, arity_word, iter_equation_instances
from libs.bangtensor.core import (
    DirectedEdge,
    IdentityWire,
    TensorExpr,
    is_concrete,
    iter_leaves,
)
from libs.bangtensor.errors import (
    ArityMismatch,
    BangTensorError,
    MissingAssignment,
    ModelFileError,
)
from libs.bangtensor.instantiate import InstanceBound
from libs.bangtensor.syntax import ModelDeclarations, load_model_declarations
from libs.common.config import get_settings
from libs.common.log_config import get_logger
from libs.common.validators import validate_arity_word

logger = get_logger(__name__)

# A family computes arrays for arity words on demand, or returns None
ArrayFamily = Callable[[str], Optional[np.ndarray]]


class Semiring(str, Enum):
    INT = "int"
    RATIONAL = "rational"
    FLOAT = "float"

    @property
    def dtype(self) -> Any:
        if self is Semiring.INT:
            return np.int64
        if self is Semiring.FLOAT:
            return np.float64
        return object

    def scalar(self, text: str) -> Any:
        if self is Semiring.INT:
            return int(text)
        if self is Semiring.FLOAT:
            return float(Fraction(text)) if "/" in text else float(text)
        return Fraction(text)


class Model(BaseModel):
    """
    Interpretation of generators as arrays

    `arrays` maps (generator, arity word) to an array of rank len(word) with
    every axis of size `dimension`; `families` supply arrays for words that
    are not listed explicitly (spiders of any arity, for instance).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    dimension: int = Field(ge=1)
    semiring: Semiring = Semiring.INT
    tolerance: float = Field(default_factory=lambda: get_settings().float_tolerance, gt=0)
    arrays: Dict[Tuple[str, str], np.ndarray] = Field(default_factory=dict)
    families: Dict[str, ArrayFamily] = Field(default_factory=dict)
    name: str = "model"

    def assign(self, generator: str, word: str, array: np.ndarray) -> None:
        expected = (self.dimension,) * len(word)
        if array.shape != expected:
            raise ModelFileError(
                f"array for {generator} at {word or 'ε'} has shape {array.shape}, "
                f"expected {expected}"
            )
        self.arrays[(generator, word)] = array.astype(self.semiring.dtype)

    def array(self, generator: str, word: str) -> np.ndarray:
        """
        Array assigned to a generator at an arity word

        Raises:
            MissingAssignment: the generator has no assignment at all
            ArityMismatch: the generator is assigned, but not at this word
        """
        key = (generator, word)
        if key in self.arrays:
            return self.arrays[key]
        family = self.families.get(generator)
        if family is not None:
            computed = family(word)
            if computed is not None:
                self.arrays[key] = computed.astype(self.semiring.dtype)
                return self.arrays[key]
        known = sorted(w for g, w in self.arrays if g == generator)
        if not known and family is None:
            raise MissingAssignment(f"{self.name} assigns no array to generator {generator}")
        raise ArityMismatch(
            f"{self.name} has no array for {generator} at arity {word or 'ε'} "
            f"(known: {', '.join(known)})"
        )

    def delta(self) -> np.ndarray:
        return np.eye(self.dimension, dtype=np.int64).astype(self.semiring.dtype)


class TensorValue(BaseModel):
    """An array whose axes are labelled by free directed edges, sorted by name"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    axes: Tuple[str, ...]
    array: np.ndarray

    def matches(self, other: "TensorValue", semiring: Semiring, tolerance: float) -> bool:
        if self.axes != other.axes or self.array.shape != other.array.shape:
            return False
        if semiring is Semiring.FLOAT:
            return bool(np.allclose(self.array, other.array, rtol=0.0, atol=tolerance))
        return bool(np.array_equal(self.array, other.array))


# =============================================================================
# Evaluation
# =============================================================================


def _trace_self_loops(
    array: np.ndarray, labels: List[DirectedEdge]
) -> Tuple[np.ndarray, List[DirectedEdge]]:
    while True:
        pair = next(
            (
                (i, j)
                for i, left in enumerate(labels)
                for j, right in enumerate(labels)
                if i < j and left.partner == right
            ),
            None,
        )
        if pair is None:
            return array, labels
        i, j = pair
        array = np.diagonal(array, axis1=i, axis2=j).sum(axis=-1)
        labels = [label for index, label in enumerate(labels) if index not in pair]


def _leaf_array(leaf: Any, model: Model) -> Tuple[np.ndarray, List[DirectedEdge]]:
    if isinstance(leaf, IdentityWire):
        return model.delta(), list(leaf.edges)
    labels = [item for item in leaf.edges if isinstance(item, DirectedEdge)]
    return model.array(leaf.name, arity_word(leaf.edges)), labels


def evaluate(expr: TensorExpr, model: Model) -> TensorValue:
    """
    Contract a concrete !-tensor in a model

    Identity wires are Kronecker deltas, products are outer products and each
    bound pair (+a, -a) is summed over. Result axes are the free edges sorted
    by name.

    Raises:
        BangTensorError: if the expression still has boxes or groups
        MissingAssignment: for an unassigned generator
        ArityMismatch: for an occurrence at an unassigned arity
    """
    if not is_concrete(expr):
        raise BangTensorError(f"only concrete tensors can be evaluated, got {expr}")
    result = np.ones((), dtype=model.semiring.dtype)
    labels: List[DirectedEdge] = []
    for leaf, _ in iter_leaves(expr):
        array, leaf_labels = _trace_self_loops(*_leaf_array(leaf, model))
        left_axes, right_axes = [], []
        for i, label in enumerate(labels):
            for j, other in enumerate(leaf_labels):
                if label.partner == other:
                    left_axes.append(i)
                    right_axes.append(j)
        result = np.tensordot(result, array, axes=(left_axes, right_axes))
        labels = [l for i, l in enumerate(labels) if i not in left_axes] + [
            l for j, l in enumerate(leaf_labels) if j not in right_axes
        ]
    order = sorted(range(len(labels)), key=lambda i: (labels[i].name, labels[i].direction.value))
    result = np.transpose(result, order) if order else result
    return TensorValue(axes=tuple(str(labels[i]) for i in order), array=np.asarray(result))


# =============================================================================
# Equation instances
# =============================================================================


class InstanceFailure(BaseModel):
    instantiation: List[str]
    lhs: str
    rhs: str
    reason: str = "values differ"

    def __str__(self) -> str:
        ops = ", ".join(self.instantiation) or "no ops"
        return f"FAIL [{ops}]: {self.lhs} = {self.rhs} ({self.reason})"


class InstanceReport(BaseModel):
    """Outcome of checking the bounded instances of one equation"""

    equation: str
    model: str
    bound: int
    checked: int = 0
    failures: List[InstanceFailure] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def lines(self) -> List[str]:
        verdict = "pass" if self.passed else "FAIL"
        head = (
            f"{self.equation}: {self.checked} instances, {len(self.failures)} failures "
            f"(model {self.model}, bound {self.bound}): {verdict}"
        )
        return [head] + [str(failure) for failure in self.failures]


def check_equation_instances(
    eq: Equation, model: Model, bound: Union[int, InstanceBound]
) -> InstanceReport:
    """
    Evaluate both sides of every shared bounded instance and compare

    Args:
        eq: Equation to check
        model: Model assigning arrays to every generator used
        bound: Expansions allowed per box occurrence

    Returns:
        InstanceReport listing failures with their witnessing instantiation
    """
    limit = bound.n if isinstance(bound, InstanceBound) else InstanceBound(n=bound).n
    report = InstanceReport(equation=eq.name or str(eq), model=model.name, bound=limit)
    for ops, instance in iter_equation_instances(eq, limit):
        report.checked += 1
        left = evaluate(instance.lhs, model)
        right = evaluate(instance.rhs, model)
        if not left.matches(right, model.semiring, model.tolerance):
            reason = "values differ" if left.axes == right.axes else "free edges differ"
            report.failures.append(
                InstanceFailure(
                    instantiation=[str(op) for op in ops],
                    lhs=str(instance.lhs),
                    rhs=str(instance.rhs),
                    reason=reason,
                )
            )
    logger.info(
        "equation_instances_checked",
        equation=report.equation,
        checked=report.checked,
        failures=len(report.failures),
    )
    return report


# =============================================================================
# Matrix algebra models
# =============================================================================


def _matrix_unit_index(k: int, i: int, j: int) -> int:
    return i * k + j


def _matrix_algebra_arrays(k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = k * k
    mult = np.zeros((d, d, d), dtype=np.int64)
    for i in range(k):
        for j in range(k):
            for l in range(k):
                out = _matrix_unit_index(k, i, l)
                mult[out, _matrix_unit_index(k, i, j), _matrix_unit_index(k, j, l)] = 1
    unit = np.zeros(d, dtype=np.int64)
    for i in range(k):
        unit[_matrix_unit_index(k, i, i)] = 1
    transpose = np.zeros((d, d), dtype=np.int64)
    for i in range(k):
        for j in range(k):
            transpose[_matrix_unit_index(k, j, i), _matrix_unit_index(k, i, j)] = 1
    return mult, unit, transpose


def _spider_family(mult: np.ndarray, unit: np.ndarray) -> ArrayFamily:
    cache: Dict[int, np.ndarray] = {0: unit}

    def spider(word: str) -> Optional[np.ndarray]:
        if not word.startswith("^") or set(word[1:]) - {"v"}:
            return None
        n = len(word) - 1
        for arity in range(1, n + 1):
            if arity not in cache:
                # s(x1..xn)[o] = sum_p m[o, p, xn] s(x1..xn-1)[p]
                step = np.tensordot(mult, cache[arity - 1], axes=([1], [0]))
                cache[arity] = np.moveaxis(step, 1, -1)
        return cache[n]

    return spider


def _algebra_model(
    mult: np.ndarray, unit: np.ndarray, transpose: np.ndarray, name: str, symmetrized: bool
) -> Model:
    if symmetrized:
        mult = mult + np.transpose(mult, (0, 2, 1))
    model = Model(dimension=unit.shape[0], semiring=Semiring.INT, name=name)
    model.assign("m", "^vv", mult)
    model.assign("u", "^", unit)
    model.assign("a", "^v", transpose)
    model.families["s"] = _spider_family(mult, unit)
    return model


def builtin_matrix_algebra_model(k: int = 2, symmetrized: bool = False) -> Model:
    """
    The algebra of k x k integer matrices in the basis of matrix units

    Generators: `m` (multiplication, ^vv), `u` (unit, ^), `a` (transpose, ^v)
    and the spider `s` at every arity ^v...v, built as left-associated
    products starting from the unit. With `symmetrized`, m(x, y) = xy + yx.
    """
    if k < 1:
        raise ModelFileError("matrix algebra needs k >= 1")
    mult, unit, transpose = _matrix_algebra_arrays(k)
    label = f"matrix_algebra(k={k}{', symmetrized' if symmetrized else ''})"
    return _algebra_model(mult, unit, transpose, label, symmetrized)


def random_matrix_algebra_model(k: int, rng: np.random.Generator, steps: int = 6) -> Model:
    """
    The matrix algebra in a random unimodular integer basis

    The change of basis is a product of elementary matrices, so it and its
    inverse stay integral and every algebra law still holds exactly.
    """
    mult, unit, transpose = _matrix_algebra_arrays(k)
    d = k * k
    basis = np.eye(d, dtype=np.int64)
    inverse = np.eye(d, dtype=np.int64)
    for _ in range(steps):
        i, j = rng.choice(d, size=2, replace=False)
        c = int(rng.choice([-1, 1]))
        elementary = np.eye(d, dtype=np.int64)
        elementary[i, j] = c
        undo = np.eye(d, dtype=np.int64)
        undo[i, j] = -c
        basis = basis @ elementary
        inverse = undo @ inverse
    new_mult = np.einsum("ao,obc,bx,cy->axy", inverse, mult, basis, basis)
    new_unit = inverse @ unit
    new_transpose = inverse @ transpose @ basis
    return _algebra_model(new_mult, new_unit, new_transpose, f"random_matrix_algebra(k={k})", False)


# =============================================================================
# Model files
# =============================================================================


def model_from_declarations(decls: ModelDeclarations, name: str = "model") -> Model:
    """
    Build a model from parsed `.btm` declarations

    Raises:
        ModelFileError: unknown builtin, missing dimension or wrong value counts
    """
    if decls.builtin is not None:
        builtin = decls.builtin
        if builtin.name != "matrix_algebra":
            raise ModelFileError(f"unknown builtin model {builtin.name}")
        unknown = set(builtin.flags) - {"symmetrized"} | set(builtin.options) - {"k"}
        if unknown:
            raise ModelFileError(f"unknown builtin options: {', '.join(sorted(unknown))}")
        k = int(builtin.options.get("k", "2"))
        model = builtin_matrix_algebra_model(k, symmetrized="symmetrized" in builtin.flags)
        if decls.dimension is not None and decls.dimension != model.dimension:
            raise ModelFileError(
                f"dimension {decls.dimension} contradicts builtin dimension {model.dimension}"
            )
    else:
        if decls.dimension is None:
            raise ModelFileError("model file declares no dimension")
        model = Model(
            dimension=decls.dimension,
            semiring=Semiring(decls.semiring or Semiring.INT.value),
            name=name,
        )
    if decls.tolerance is not None:
        model.tolerance = float(decls.tolerance)

    for array in decls.arrays:
        if not validate_arity_word(array.word):
            raise ModelFileError(f"line {array.line}: {array.word} is not an arity word")
        expected = model.dimension ** len(array.word)
        if len(array.values) != expected:
            raise ModelFileError(
                f"line {array.line}: {array.generator} {array.word or 'ε'} "
                f"needs {expected} values, "
                f"got {len(array.values)}"
            )
        values = [model.semiring.scalar(v) for v in array.values]
        shape = (model.dimension,) * len(array.word)
        data = np.array(values, dtype=model.semiring.dtype).reshape(shape)
        model.assign(array.generator, array.word, data)
    return model


def load_model(path: Union[str, Path]) -> Model:
    return model_from_declarations(load_model_declarations(path), name=Path(path).stem)


def brute_force_contraction(expr: TensorExpr, model: Model) -> Dict[Tuple[int, ...], Any]:
    """
    Reference evaluation by explicit summation over every index assignment

    Returns a mapping from free-axis indices (axes sorted as in `evaluate`)
    to values. Exponential in the number of edge names; for small terms only.
    """
    leaves = [_leaf_array(leaf, model) for leaf, _ in iter_leaves(expr)]
    names = sorted({label.name for _, labels in leaves for label in labels})
    free = sorted(
        {
            (label.name, label.direction.value)
            for _, labels in leaves
            for label in labels
            if sum(1 for _, ls in leaves for other in ls if other == label.partner) == 0
        }
    )
    free_names = [name for name, _ in free]
    values: Dict[Tuple[int, ...], Any] = {}
    for assignment in np.ndindex(*((model.dimension,) * len(names))):
        index = dict(zip(names, assignment))
        term: Any = 1
        for array, labels in leaves:
            term = term * array[tuple(index[label.name] for label in labels)]
        key = tuple(index[name] for name in free_names)
        values[key] = values.get(key, 0) + term
    return values
