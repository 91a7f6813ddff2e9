import numpy as np
import pytest

from linflow.errors import DimensionError
from linflow.expr import parse
from linflow.geometry import (
    BoxDomain,
    DerivationSpec,
    SectionSpec,
    VectorFieldSpec,
    apply_derivation,
    commutator,
    core_flow,
    core_lift,
    dual_derivation,
    lift_derivation,
    pairing_leibniz_residual,
    tensor_derivation,
)


def _deriv(box, symbol_texts, matrix_texts):
    m = box.dim
    k = len(matrix_texts)
    sym = VectorFieldSpec(box, tuple(parse(s, m) for s in symbol_texts))
    mat = tuple(tuple(parse(e, m) for e in row) for row in matrix_texts)
    return DerivationSpec(box, k, sym, mat)


def _section(texts, dim):
    return SectionSpec(len(texts), tuple(parse(s, dim) for s in texts))


@pytest.fixture
def box1():
    return BoxDomain((-4.0,), (4.0,))


@pytest.fixture
def box2():
    return BoxDomain((-2.0, -2.0), (2.0, 2.0))


def test_box_contains_and_shrink(box1):
    assert box1.contains([0.0])
    assert not box1.contains([4.0])  # open box
    assert not box1.contains([3.9], margin=0.2)
    inner = box1.shrink(0.25)
    assert inner.lower == (-3.0,) and inner.upper == (3.0,)


def test_apply_derivation_flat_example(box1):
    D = _deriv(box1, ["1"], [["0", "1"], ["0", "0"]])
    flat = _section(["1 - x1", "1"], 1)
    bent = _section(["x1", "x1"], 1)
    assert apply_derivation(D, flat, [0.7]) == pytest.approx([0.0, 0.0])
    # De = e' X + A e = (1, 1) + (x, 0)
    assert apply_derivation(D, bent, [0.7]) == pytest.approx([1.7, 1.0])


def test_dual_matrix_is_negative_transpose(box2):
    D = _deriv(box2, ["x2", "-x1"], [["x1", "x2"], ["1", "0"]])
    Dstar = dual_derivation(D)
    x = np.array([0.3, -0.8])
    assert Dstar.matrix_at(x) == pytest.approx(-D.matrix_at(x).T)
    assert Dstar.symbol_at(x) == pytest.approx(D.symbol_at(x))


def test_dual_satisfies_leibniz_pairing(box2):
    D = _deriv(box2, ["x2", "-x1"], [["x1", "x2"], ["1", "0"]])
    eps = _section(["x1*x2", "1"], 2)
    e = _section(["cos(x1)", "x2"], 2)
    for x in ([0.3, -0.8], [1.1, 0.2], [-0.5, 0.6]):
        assert pairing_leibniz_residual(D, eps, e, x) < 1e-9


def test_tensor_matrix_is_kronecker_sum(box2):
    DE = _deriv(box2, ["x2", "-x1"], [["x1", "0"], ["1", "x2"]])
    DF = _deriv(box2, ["x2", "-x1"], [["0", "1"], ["-1", "0"]])
    DT = tensor_derivation(DE, DF)
    x = np.array([0.4, 0.9])
    AE, AF = DE.matrix_at(x), DF.matrix_at(x)
    expected = np.kron(AE, np.eye(2)) + np.kron(np.eye(2), AF)
    assert DT.matrix_at(x) == pytest.approx(expected)


def test_tensor_requires_shared_symbol(box2):
    DE = _deriv(box2, ["x2", "-x1"], [["x1", "0"], ["1", "x2"]])
    DF = _deriv(box2, ["x1", "x2"], [["0", "1"], ["-1", "0"]])
    with pytest.raises(DimensionError):
        tensor_derivation(DE, DF)


def test_commutator_against_nested_application(box2):
    D1 = _deriv(box2, ["x2", "-x1"], [["x1", "0.5"], ["0", "x2"]])
    D2 = _deriv(box2, ["0.3*x1", "x2"], [["0", "x1*x2"], ["1", "0"]])
    e = _section(["sin(x1)", "x1 + x2"], 2)
    x = np.array([0.5, -0.4])

    def nested(Da, Db, x, h=1e-5):
        # Da(Db e) via finite-difference Jacobian of the numeric section Db e
        inner = lambda y: apply_derivation(Db, e, y)
        J = np.column_stack(
            [
                (inner(x + h * dx) - inner(x - h * dx)) / (2 * h)
                for dx in np.eye(2)
            ]
        )
        return J @ Da.symbol_at(x) + Da.matrix_at(x) @ inner(x)

    lhs = nested(D1, D2, x) - nested(D2, D1, x)
    rhs = apply_derivation(commutator(D1, D2), e, x)
    assert lhs == pytest.approx(rhs, abs=1e-8)


def test_lifted_field_jacobian_matches_finite_differences(box2):
    D = _deriv(box2, ["x2", "-x1"], [["x1", "x2"], ["1", "0"]])
    Y = lift_derivation(D)
    p = np.array([0.4, -0.3, 0.7, -1.1])
    h = 1e-6
    J_fd = np.column_stack(
        [(Y.value(p + h * dp) - Y.value(p - h * dp)) / (2 * h) for dp in np.eye(4)]
    )
    assert Y.jacobian(p) == pytest.approx(J_fd, abs=1e-8)


def test_core_lift_and_flow(box2):
    e = _section(["x1*x2", "cos(x2)"], 2)
    up = core_lift(e, box2)
    p = np.array([0.5, 0.25, 1.0, 2.0])
    val = up.value(p)
    assert val[:2] == pytest.approx([0.0, 0.0])
    assert val[2:] == pytest.approx(e.at(p[:2]))
    moved = core_flow(e, box2, 0.75, p)
    assert moved[:2] == pytest.approx(p[:2])
    assert moved[2:] == pytest.approx(p[2:] + 0.75 * e.at(p[:2]))


def test_dimension_validation(box2):
    with pytest.raises(DimensionError):
        _deriv(box2, ["x1"], [["0"]])  # symbol shorter than base dim
