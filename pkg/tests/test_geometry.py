import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minkdeform import geometry as G
from minkdeform.deform import apply
from minkdeform.errors import EmptySample, InvalidParam
from minkdeform.norms import DeformationSpec, Euclidean, MRoot
from minkdeform.phi import builtin


def circle(r, n=360):
    t = 2 * np.pi * np.arange(n) / n
    return r * np.stack([np.cos(t), np.sin(t)], axis=1)


def test_euclidean_indicatrix_is_unit_circle():
    s = G.indicatrix_sample(Euclidean.identity(2), 256)
    np.testing.assert_allclose(np.linalg.norm(s.points, axis=1), 1.0, rtol=1e-15)
    assert s.skipped == 0 and len(s) == 256 and s.dim == 2


def test_landmark_points():
    s = G.indicatrix_sample(G.shifted_sphere_norm(0.5), 8)
    np.testing.assert_allclose(s.points[0], [1.5, 0.0], atol=1e-14)
    np.testing.assert_allclose(s.points[4], [-0.5, 0.0], atol=1e-14)
    m = G.indicatrix_sample(MRoot(4, 2), 8).points[1]
    assert m[0] == pytest.approx(m[1])
    assert 2 * m[0] ** 4 == pytest.approx(1.0, rel=1e-14)


def test_conic_directions_are_skipped():
    F = apply(Euclidean.identity(2), DeformationSpec([[1.0, 0.0]], builtin("kropina", [1.0])))
    s = G.indicatrix_sample(F, 400)
    assert 0 < s.skipped < 400 and len(s) + s.skipped == 400
    assert G.level_residual(F, s) < 1e-12


def test_hausdorff_reference_values():
    assert G.hausdorff(circle(1.0), circle(1.1)) == pytest.approx(0.1, abs=2e-3)
    assert G.hausdorff(circle(1.0), circle(1.0) + [0.5, 0]) == pytest.approx(0.5, abs=2e-3)
    with pytest.raises(EmptySample):
        G.hausdorff(np.zeros((0, 2)), circle(1.0))


def test_kdtree_and_brute_force_agree(rng):
    A = rng.normal(size=(G.BRUTE_FORCE_LIMIT + 10, 2))
    B = rng.normal(size=(400, 2))
    fast = G.directed_hausdorff(A, B)
    slow = G._directed_brute(A, B)
    assert fast == pytest.approx(slow, rel=1e-12)


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_hausdorff_metric_properties(seed):
    r = np.random.default_rng(seed)
    A, B, C = (r.normal(size=(r.integers(1, 40), 3)) for _ in range(3))
    ab = G.hausdorff(A, B)
    assert ab == pytest.approx(G.hausdorff(B, A))
    assert G.hausdorff(A, A) == 0.0
    assert ab <= G.hausdorff(A, C) + G.hausdorff(C, B) + 1e-12


@pytest.mark.parametrize("mode", ["stepwise", "oneshot"])
def test_ellipsoid_pipeline(mode):
    d = [0.5, 0.8, 0.9]
    F = G.ellipsoid_pipeline(d, mode)
    y = G.ellipsoid_points(d, G.directions(3, 500))
    np.testing.assert_allclose(F.values(y), 1.0, atol=1e-12)
    back = G.ellipsoid_inverse_pipeline(d, G.ellipsoid_pipeline(d, "stepwise"))
    u = G.directions(3, 200)
    np.testing.assert_allclose(back.values(u), 1.0, atol=1e-9)


def test_ellipsoid_pipeline_edge_cases():
    E = G.ellipsoid_pipeline([1.0, 1.0])
    assert isinstance(E, Euclidean)
    with pytest.raises(InvalidParam):
        G.ellipsoid_pipeline([0.0, 0.5])
    with pytest.raises(InvalidParam):
        G.ellipsoid_pipeline([0.5, 1.5])
    with pytest.raises(InvalidParam):
        G.ellipsoid_pipeline([0.5, 0.5], mode="sideways")


@pytest.mark.parametrize("d", [0.0, 0.3, 0.9])
def test_shifted_sphere_matches_reference(d):
    F = G.shifted_sphere_norm(d)
    s = G.indicatrix_sample(F, 2048)
    ref = G.reference_sample(lambda u: G.shifted_sphere_points([d, 0], u), 2, 2048)
    assert G.hausdorff(s, ref) < 1e-12


def test_convexity():
    assert G.is_convex(circle(1.0))
    star = circle(1.0) * (1 + 0.3 * np.cos(5 * 2 * np.pi * np.arange(360) / 360))[:, None]
    assert not G.is_convex(star)
    # traversed twice: locally convex but not a simple loop
    assert not G.is_convex(np.vstack([circle(1.0, 90), circle(1.0, 90)]))
    square = np.array([[1, 0], [1, 1], [0.5, 1], [0, 1], [0, 0]], dtype=float)
    assert G.is_convex(square)
    with pytest.raises(InvalidParam):
        G.is_convex(np.zeros((4, 3)))


def test_exports(tmp_path):
    s = G.indicatrix_sample(G.shifted_sphere_norm(0.3), 360, label="d=0.3")
    svg = G.export(s, "svg", tmp_path / "c.svg")
    text = open(svg).read()
    pts = text.split('points="')[1].split('"')[0].split()
    assert text.startswith("<svg") and len(pts) == 360

    G.export(s, "csv", tmp_path / "c.csv")
    back = np.loadtxt(tmp_path / "c.csv", delimiter=",")
    np.testing.assert_array_equal(back, s.points)

    s3 = G.indicatrix_sample(MRoot(4, 3), 300)
    G.export(s3, "obj", tmp_path / "m.obj")
    lines = open(tmp_path / "m.obj").read().splitlines()
    verts = np.array([list(map(float, l.split()[1:])) for l in lines if l.startswith("v ")])
    faces = np.array([list(map(int, l.split()[1:])) for l in lines if l.startswith("f ")]) - 1
    assert len(verts) == 300 and faces.min() >= 0 and faces.max() < 300
    a, b, c = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    outward = np.einsum("ij,ij->i", np.cross(b - a, c - a), a)
    assert np.all(outward > 0)

    with pytest.raises(InvalidParam):
        G.export(s, "png", tmp_path / "x.png")
    with pytest.raises(InvalidParam):
        G.export(s, "obj", tmp_path / "x.obj")


def test_build_figures(tmp_path):
    sets = G.build_figures(tmp_path, resolution=360)
    assert [fs.name for fs in sets][0] == "fig1a_mroot_quadratic_dy2"
    assert all(fs.ok for fs in sets)
    assert len(sets[0].curves) == 7 and len(sets[3].curves) == 10
    for fs in sets:
        for path in fs.files:
            assert (tmp_path / path.split("/")[-1]).exists()
