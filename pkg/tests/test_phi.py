import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from minkdeform import jets
from minkdeform.errors import (InvalidParam, PhiSyntaxError, UnknownBuiltin,
                               UnknownFunction, UnknownVariable)
from minkdeform.phi import (BUILTINS, Add, BinOp, Call, Const, Neg, PhiExpr, Pow,
                            Var, builtin, derivatives, eval_phi, from_text, parse,
                            seed_jets, serialize)


def test_sum_parses_to_binop():
    assert parse("1+s1").ast == Add(Const(1.0), Var(1))


def test_square_of_sum():
    assert parse("(1+s1)^2").ast == Pow(Add(Const(1.0), Var(1)), Const(2.0))


def test_shifted_sphere_text_parses():
    e = parse("1/(s1+sqrt(s1^2+0.75))")
    assert e(0.0) == pytest.approx(1 / np.sqrt(0.75))


def test_precedence_and_associativity():
    assert parse("2^3^2")(0) == 2.0 ** 9
    assert parse("-2^2")(0) == -4.0
    assert parse("8/4/2")(0) == 1.0
    assert parse("1-2-3")(0) == -4.0
    assert parse(" 2 *  3 + 4 ")(0) == 10.0


def test_syntax_error_offsets():
    with pytest.raises(PhiSyntaxError) as err:
        parse("1+*s1")
    assert err.value.offset == 2
    with pytest.raises(PhiSyntaxError) as err:
        parse("(1+s1")
    assert err.value.offset == 5
    with pytest.raises(PhiSyntaxError):
        parse("")
    with pytest.raises(PhiSyntaxError):
        parse("1 $ 2")


def test_unknown_names():
    with pytest.raises(UnknownVariable):
        parse("s3", 2)
    with pytest.raises(UnknownVariable):
        parse("s", 2)
    with pytest.raises(UnknownFunction):
        parse("cos(s1)")


def test_randers_jet():
    J = eval_phi(parse("1+s1"), seed_jets(np.array([0.2])))
    np.testing.assert_allclose(J.coeffs, [1.2, 1, 0, 0])


def test_kropina_jet_derivatives():
    f, d1, d2, d3 = derivatives(builtin("kropina", [1]), [1.0])
    assert (f, d1[0], d2[0, 0], d3[0, 0, 0]) == pytest.approx((1, -1, 2, -6))


def test_constant_phi_jet():
    J = parse("3").jet(np.array([0.4]))
    assert J.const == 3.0
    assert not np.any(J.coeffs[1:])


def test_builtin_texts():
    assert str(builtin("slope")) == "1/(1-s1)"
    assert str(builtin("kropina", [1])) == "1/s1"
    assert str(builtin("multi_ellipsoid", [0.5, 0.8, 0.9])) == "sqrt(1-s1^2-s2^2-s3^2)"
    assert str(builtin("kropina", [2])) == "1/s1^2"


def test_builtin_errors():
    with pytest.raises(UnknownBuiltin):
        builtin("nope")
    with pytest.raises(InvalidParam):
        builtin("shifted_sphere", [1.5])
    with pytest.raises(InvalidParam):
        builtin("ellipsoid_step", [0.0])


def test_from_text_resolves_builtins():
    assert str(from_text("kropina:2")) == "1/s1^2"
    assert from_text("shifted_slope", 2).arity == 2
    assert str(from_text("1+s1")) == "1+s1"
    with pytest.raises(InvalidParam):
        from_text("randers", 2)


def test_strict_and_lenient_evaluation():
    e = parse("sqrt(1-s1^2)")
    with pytest.raises(ValueError):
        e(2.0)
    out = e(np.array([0.0, 2.0]), strict=False)
    assert out[0] == 1.0 and np.isnan(out[1])


def test_shared_subtrees_evaluate_quickly():
    node = Var(1)
    for _ in range(200):
        node = BinOp("*", node, node)  # 2^200 leaves as a tree, 201 nodes as a DAG
    e = PhiExpr(node, 1)
    assert e(1.0) == 1.0


# interior points where every builtin is smooth
INTERIOR = {
    "randers": ([], [0.3]), "kropina": ([1], [0.7]), "slope": ([], [0.3]),
    "quadratic": ([], [0.2]), "circle": ([], [0.4]), "shifted_sphere": ([0.5], [0.2]),
    "ellipsoid_step": ([0.6], [0.3]), "multi_ellipsoid": ([0.5, 0.8], [0.2, 0.3]),
    "shifted_kropina": ([], [0.8, 0.2]), "shifted_slope": ([], [0.3, 0.1]),
    "shifted_quadratic": ([], [0.2, 0.4]), "constant": ([2.0], [0.5]),
}


def test_every_builtin_has_an_interior_point():
    assert set(INTERIOR) == set(BUILTINS)


@pytest.mark.parametrize("name", sorted(INTERIOR))
def test_builtin_partials_match_finite_differences(name):
    params, s = INTERIOR[name]
    e = builtin(name, params)
    s = np.array(s)
    _, d1, d2, _ = derivatives(e, s)
    h = 1e-4
    I = np.eye(len(s)) * h
    fd1 = np.array([(e(*(s + I[i])) - e(*(s - I[i]))) / (2 * h) for i in range(len(s))])
    fd2 = np.array([[(e(*(s + I[i] + I[j])) - e(*(s + I[i] - I[j])) - e(*(s - I[i] + I[j]))
                      + e(*(s - I[i] - I[j]))) / (4 * h * h) for j in range(len(s))]
                    for i in range(len(s))])
    np.testing.assert_allclose(d1, fd1, atol=1e-5)
    np.testing.assert_allclose(d2, fd2, atol=1e-5)


# random ASTs for the round-trip property
leaves = st.one_of(
    st.builds(Var, st.integers(1, 3)),
    st.builds(Const, st.floats(0, 1e6, allow_nan=False, allow_infinity=False)),
)


def _extend(children):
    return st.one_of(
        st.builds(BinOp, st.sampled_from("+-*/^"), children, children),
        st.builds(Neg, children),
        st.builds(Call, st.sampled_from(["sqrt", "exp", "log"]), children),
    )


trees = st.recursive(leaves, _extend, max_leaves=24)


def _depth(n):
    if isinstance(n, BinOp):
        return 1 + max(_depth(n.left), _depth(n.right))
    if isinstance(n, (Neg,)):
        return 1 + _depth(n.operand)
    if isinstance(n, Call):
        return 1 + _depth(n.arg)
    return 0


@given(trees)
def test_serialize_round_trip(tree):
    assume(_depth(tree) <= 6)
    assert parse(serialize(tree), 3).ast == tree


@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_float_and_jet_evaluation_agree(a, b):
    e = parse("sqrt(2+s1*s2)/(3-s1)+exp(s2)^2", 2)
    J = e.jet(np.array([a, b]))
    assert J.const == pytest.approx(e(a, b), rel=1e-14)
