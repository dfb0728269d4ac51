import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from minkdeform import analysis as A
from minkdeform.deform import apply
from minkdeform.errors import InsufficientSamples, SingularBase, VanishingMeanCartan
from minkdeform.norms import DeformationSpec, Euclidean, MRoot
from minkdeform.phi import builtin, parse

E3 = Euclidean.identity(3)


def deformed(base, betas, name, *params):
    return apply(base, DeformationSpec(np.atleast_2d(betas), builtin(name, list(params))))


def test_det_update_special_cases(rng):
    a = np.diag([2.0, 3.0, 5.0])
    b1, b2 = rng.normal(size=(2, 3))
    assert A.det_update(a, 0, b1, 0, b2) == pytest.approx(30.0)
    assert A.det_update(np.eye(3), 0.7, b1, 0, b2) == pytest.approx(1 + 0.7 * b1 @ b1)
    with pytest.raises(SingularBase):
        A.det_update(np.zeros((3, 3)), 1, b1, 1, b2)


def test_det_update_matches_dense(rng):
    for _ in range(200):
        n = rng.integers(1, 9)
        m = rng.normal(size=(n, n))
        a = m @ m.T + 0.5 * np.eye(n)
        b1, b2 = rng.normal(size=(2, n))
        c1, c2 = rng.normal(size=2)
        dense = np.linalg.det(a + c1 * np.outer(b1, b1) + c2 * np.outer(b2, b2))
        assert A.det_update(a, c1, b1, c2, b2) == pytest.approx(dense, rel=1e-10, abs=1e-10 * np.linalg.det(a))


def test_volume_ratio_examples():
    s = np.linspace(-0.5, 0.5, 11)
    r = A.volume_ratio_p1(builtin("randers"), s, 0.6, 2)
    np.testing.assert_allclose(r.factored, (1 + s) ** 3, rtol=1e-14)
    np.testing.assert_allclose(r.rho_form, (1 + s) ** 3, rtol=1e-13)
    one = A.volume_ratio_p1(parse("1"), 0.3, 0.5, 4)
    assert one.factored == pytest.approx(1.0) and one.rho_form == pytest.approx(1.0)


@pytest.mark.parametrize("name", ["randers", "slope", "quadratic", "circle"])
def test_volume_ratio_against_determinants(name, rng):
    for n in (2, 3, 4):
        b = np.zeros(n)
        b[:2] = [0.25, 0.1]
        sp = DeformationSpec(b[None], builtin(name))
        y = rng.normal(size=(30, n))
        F = np.linalg.norm(y, axis=1)
        s = y @ b / F
        r = A.volume_ratio_p1(sp.phi, s, np.linalg.norm(b), n)
        ratio = A.det_ratio(Euclidean.identity(n), sp, y)
        np.testing.assert_allclose(r.factored, ratio, rtol=1e-9)
        np.testing.assert_allclose(r.rho_form, r.factored, rtol=1e-11)


def test_p2_report_is_informational():
    sp = DeformationSpec([[0.3, 0, 0], [0, 0.2, 0.1]], builtin("shifted_quadratic"))
    rep = A.volume_ratio_p2_report(E3, sp, np.array([0.2, 0.5, 0.7]))
    # the determinant ratio is authoritative; the low-rank evaluation reproduces it
    assert rep.low_rank == pytest.approx(rep.det_ratio, rel=1e-10)
    assert rep.discrepancy == pytest.approx(abs(rep.closed_form - rep.det_ratio) / abs(rep.det_ratio))


def test_semi_c_fit_on_alpha_beta_norms(rng):
    for n in (3, 4):
        b = np.zeros(n)
        b[0], b[1] = 0.3, 0.1
        for y in rng.normal(size=(5, n)):
            fit = A.semi_c_reducible_fit(deformed(Euclidean.identity(n), b, "randers"), y)
            assert fit.residual_rel < 1e-8
            assert fit.p_fit == pytest.approx(1.0, abs=1e-6)
            slope = A.semi_c_reducible_fit(deformed(Euclidean.identity(n), b, "slope"), y)
            assert slope.residual_rel < 1e-8
            assert abs(slope.p_fit - 1.0) > 1e-3


def test_semi_c_fit_errors_and_mroot():
    with pytest.raises(VanishingMeanCartan):
        A.semi_c_reducible_fit(E3, [1.0, 2.0, 3.0])
    fit = A.semi_c_reducible_fit(MRoot(4, 3), [0.3, 0.5, 0.7])
    assert fit.residual_rel > 1e-3


def test_semi_c_residual_scale_invariant(rng):
    F = deformed(MRoot(4, 3), [0.2, 0.1, 0.0], "quadratic")
    y = np.array([0.3, 0.6, 0.5])
    r = A.semi_c_reducible_fit(F, y).residual_rel
    for lam in (0.3, 4.0):
        assert A.semi_c_reducible_fit(F, lam * y).residual_rel == pytest.approx(r, abs=1e-9)


def test_c_reducible_residual_cases(rng):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res, flat = A.c_reducible_residual(E3, [1.0, 2.0, 3.0], return_flag=True)
    assert res == 0.0 and flat and caught
    y = rng.normal(size=(20, 3))
    assert np.max(A.c_reducible_residual(deformed(E3, [0.3, 0.1, 0], "randers"), y)) < 1e-8
    quad = A.c_reducible_residual(deformed(E3, [0.3, 0.1, 0], "quadratic"), y)
    assert np.max(quad) > 1e-3


def test_classification():
    assert A.classify_norm(Euclidean(np.diag([1.0, 2.0, 3.0]))).kind == "euclidean"

    r = A.classify_norm(deformed(E3, [0.3, 0.1, 0], "randers"))
    assert r.kind == "c_reducible" and r.metric_type == "randers"
    F = deformed(E3, [0.3, 0.1, 0], "randers")
    y = np.random.default_rng(3).normal(size=(50, 3))
    np.testing.assert_allclose(r.randers_fit.evaluate(y), F.values(y), rtol=1e-7)

    k = A.classify_norm(deformed(E3, [1.0, 0, 0], "kropina", 1))
    assert k.metric_type == "kropina"

    s = A.classify_norm(deformed(E3, [0.3, 0.1, 0], "slope"))
    assert s.kind == "semi_c_reducible" and abs(s.p_fit - 1) > 1e-3
    assert A.classify_norm(MRoot(4, 3)).kind == "general"

    with pytest.raises(InsufficientSamples):
        A.classify_norm(E3, samples=5)


def test_classification_invariance(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    b = np.array([0.3, 0.1, 0.0])
    for name in ("randers", "slope"):
        base = A.classify_norm(deformed(E3, b, name)).kind
        # orthogonal change of basis and homothety
        rotated = deformed(E3, b @ Q, name)
        scaled = apply(Euclidean(4.0 * np.eye(3)), DeformationSpec((2.0 * b)[None], builtin(name)))
        assert A.classify_norm(rotated).kind == base
        assert A.classify_norm(scaled).kind == base


def test_symmetry_checks():
    assert A.symmetry_check(deformed(E3, [0.3, 0, 0], "slope"), [1, 0, 0])
    assert A.symmetry_check(E3, [0, 1, 1])
    m = A.symmetry_check(MRoot(4, 3), [1, 0, 0])
    assert not m and m.max_violation > 1e-3
    # with respect to a non-standard inner product
    M = np.diag([1.0, 2.0, 2.0])
    F = apply(Euclidean(M), DeformationSpec([[0.3, 0, 0]], builtin("quadratic")))
    assert A.symmetry_check(F, [1, 0, 0], inner=M)


@given(st.floats(0.2, 5.0))
def test_classify_homothety_property(lam):
    F = apply(Euclidean(lam**2 * np.eye(3)), DeformationSpec([[0.3 * lam, 0.1 * lam, 0]], builtin("randers")))
    assert A.classify_norm(F, samples=64).kind == "c_reducible"
