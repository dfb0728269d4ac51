"""Indicatrix sampling, export and the equivalence experiments.

The indicatrix of F is sampled radially: a unit direction ``u`` gives the
point ``u / F(u)``.  Two samples are compared with the Hausdorff distance of
the point sets, an upper-bound estimate of the distance between the smooth
hypersurfaces that tightens as the resolution grows.
"""

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from . import phi as phis
from .deform import InversePhi, apply
from .errors import EmptySample, InvalidParam
from .norms import DeformationSpec, Euclidean, MRoot
from .sampling import directions

BRUTE_FORCE_LIMIT = 8192
SVG_SCALE = 200.0


@dataclass
class IndicatrixSample:
    points: np.ndarray
    directions: np.ndarray
    resolution: int
    skipped: int = 0
    label: str = ""

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)


def indicatrix_sample(F, resolution=1024, seed=0, label=""):
    """Radial sample ``u / F(u)``; directions outside the domain are skipped and counted."""
    u = directions(F.dim, resolution, seed)
    with np.errstate(all="ignore"):
        Fu = F.values(u)
    ok = np.isfinite(Fu) & (Fu > 0)
    return IndicatrixSample(u[ok] / Fu[ok][:, None], u[ok], resolution,
                            int((~ok).sum()), label)


def level_residual(F, sample):
    """max |F(point) - 1| over a sample."""
    with np.errstate(all="ignore"):
        v = F.values(sample.points)
    return float(np.max(np.abs(v - 1.0))) if len(v) else 0.0


# --- Hausdorff distance ------------------------------------------------------

def _points(x):
    pts = x.points if isinstance(x, IndicatrixSample) else np.asarray(x, dtype=float)
    if len(pts) == 0:
        raise EmptySample("Hausdorff distance of an empty sample")
    return pts


def _directed_brute(A, B, chunk=1024):
    worst = 0.0
    bb = np.einsum("ij,ij->i", B, B)
    for start in range(0, len(A), chunk):
        a = A[start:start + chunk]
        d2 = np.einsum("ij,ij->i", a, a)[:, None] + bb[None, :] - 2.0 * a @ B.T
        # refine the nearest candidate exactly to avoid cancellation
        j = np.argmin(d2, axis=1)
        exact = np.linalg.norm(a - B[j], axis=1)
        worst = max(worst, float(exact.max()))
    return worst


def directed_hausdorff(A, B):
    A, B = _points(A), _points(B)
    if max(len(A), len(B)) <= BRUTE_FORCE_LIMIT:
        return _directed_brute(A, B)
    return float(cKDTree(B).query(A)[0].max())


def hausdorff(A, B):
    """Symmetric Hausdorff distance between two point samples (ambient Euclidean metric)."""
    return max(directed_hausdorff(A, B), directed_hausdorff(B, A))


# --- analytic reference shapes ---------------------------------------------------

def ellipsoid_points(d, u):
    """Points of ``sum d_i^2 y_i^2 = 1`` along unit directions ``u``."""
    d = np.asarray(d, dtype=float)
    return u / np.sqrt(np.sum((d * u) ** 2, axis=1))[:, None]


def shifted_sphere_points(center, u):
    """Points of the unit sphere centred at ``center`` (|center| < 1) along ``u``."""
    c = np.asarray(center, dtype=float)
    uc = u @ c
    r = uc + np.sqrt(uc**2 - c @ c + 1.0)
    return u * r[:, None]


def reference_sample(points_fn, n, resolution, seed=0, label=""):
    u = directions(n, resolution, seed)
    return IndicatrixSample(points_fn(u), u, resolution, 0, label)


# --- equivalence pipelines ---------------------------------------------------------

def _ellipsoid_factors(d):
    d = np.asarray(d, dtype=float)
    if d.ndim != 1 or len(d) < 2:
        raise InvalidParam("need one axis factor per coordinate, n >= 2")
    if np.any(~(d > 0)) or np.any(d > 1):
        raise InvalidParam("axis factors must lie in (0, 1]")
    return d


def _ellipsoid_forms(d):
    n = len(d)
    rows = [(i, np.sqrt(1.0 - d[i] ** 2)) for i in range(n) if d[i] < 1.0]
    return [(i, np.eye(n)[i] * c) for i, c in rows]


def ellipsoid_pipeline(d, mode="stepwise", base=None):
    """Deform the unit sphere into the ellipsoid ``sum d_i^2 y_i^2 = 1``.

    ``stepwise`` chains one circle deformation per axis; ``oneshot`` uses a
    single p = n deformation with phi = sqrt(1 - sum s_i^2).  Axes with
    ``d_i = 1`` need no deformation and are skipped.
    """
    d = _ellipsoid_factors(d)
    F = Euclidean.identity(len(d)) if base is None else base
    forms = _ellipsoid_forms(d)
    if not forms:
        return F
    if mode == "stepwise":
        circle = phis.builtin("circle")
        for _, row in forms:
            F = apply(F, DeformationSpec(row[None], circle))
        return F
    if mode == "oneshot":
        betas = np.stack([row for _, row in forms])
        phi = phis.builtin("multi_ellipsoid", [d[i] for i, _ in forms])
        return apply(F, DeformationSpec(betas, phi))
    raise InvalidParam(f"unknown pipeline mode {mode!r}")


def ellipsoid_inverse_pipeline(d, F):
    """Undo the stepwise pipeline from ``F`` (an ellipsoid norm) with numerically inverted phis."""
    d = _ellipsoid_factors(d)
    psi = InversePhi(phis.builtin("circle"))
    for _, row in reversed(_ellipsoid_forms(d)):
        F = apply(F, DeformationSpec(row[None], psi))
    return F


def shifted_sphere_norm(d, n=2):
    """Norm whose indicatrix is the unit sphere translated by ``d e_1``."""
    beta = np.zeros((1, n))
    beta[0, 0] = 1.0
    if d == 0:
        return apply(Euclidean.identity(n), DeformationSpec(beta, phis.builtin("constant", [1.0])))
    beta[0, 0] = d
    return apply(Euclidean.identity(n), DeformationSpec(beta, phis.builtin("shifted_sphere", [d])))


# --- convexity --------------------------------------------------------------------

def is_convex(points, rtol=1e-12):
    """Signed turning test on a closed planar polyline (vertices in angular order).

    Turns may vanish up to rounding (collinear samples along nearly flat arcs)
    but must never change sign, and the total turning must be one full loop.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2:
        raise InvalidParam("convexity test is for planar curves")
    e = np.roll(P, -1, axis=0) - P
    en = np.roll(e, -1, axis=0)
    cross = e[:, 0] * en[:, 1] - e[:, 1] * en[:, 0]
    tol = rtol * float(np.max(np.abs(cross)))
    same_sign = bool(np.all(cross >= -tol) or np.all(cross <= tol))
    turning = np.sum(np.arctan2(cross, np.einsum("ij,ij->i", e, en)))
    return bool(same_sign and abs(abs(turning) - 2.0 * np.pi) < 1e-6)


# --- export -----------------------------------------------------------------------

def _curves(sample):
    if isinstance(sample, IndicatrixSample):
        return [sample]
    return list(sample)


def write_csv(sample, path):
    np.savetxt(path, sample.points, fmt="%.17g", delimiter=",")


def write_svg(samples, path, scale=SVG_SCALE, margin=20):
    curves = _curves(samples)
    for c in curves:
        if c.dim != 2:
            raise InvalidParam("SVG export needs planar samples")
    extent = max(float(np.max(np.abs(c.points))) for c in curves if len(c))
    half = int(np.ceil(extent * scale)) + margin
    size = 2 * half
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<line x1="0" y1="{half}" x2="{size}" y2="{half}" stroke="#bbb" stroke-width="1"/>',
             f'<line x1="{half}" y1="0" x2="{half}" y2="{size}" stroke="#bbb" stroke-width="1"/>']
    for c in curves:
        xs = half + scale * c.points[:, 0]
        ys = half - scale * c.points[:, 1]
        pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))
        title = f"<title>{c.label}</title>" if c.label else ""
        lines.append(f'<polygon fill="none" stroke="black" stroke-width="1" points="{pts}">'
                     f"{title}</polygon>")
    lines.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_obj(sample, path):
    if sample.dim != 3:
        raise InvalidParam("OBJ export needs samples in R^3")
    P = sample.points
    hull = ConvexHull(P)
    center = P.mean(axis=0)
    faces = []
    for tri in hull.simplices:
        a, b, c = P[tri]
        normal = np.cross(b - a, c - a)
        faces.append(tri if normal @ (a - center) > 0 else tri[::-1])
    with open(path, "w") as fh:
        if sample.label:
            fh.write(f"# {sample.label}\n")
        for x, y, z in P:
            fh.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for tri in faces:
            fh.write("f {} {} {}\n".format(*(int(i) + 1 for i in tri)))


def export(sample, fmt, path):
    """Write a sample (or a list of planar curves for SVG) as csv, svg or obj."""
    fmt = fmt.lower()
    if fmt == "csv":
        write_csv(sample, path)
    elif fmt == "svg":
        write_svg(sample, path)
    elif fmt == "obj":
        write_obj(sample, path)
    else:
        raise InvalidParam(f"unknown export format {fmt!r}")
    return path


# --- figure families --------------------------------------------------------------

@dataclass
class Curve:
    norm: object
    sample: IndicatrixSample
    level_error: float
    convex: bool = True


@dataclass
class FigureSet:
    name: str
    fmt: str
    curves: list = field(default_factory=list)
    files: list = field(default_factory=list)

    @property
    def ok(self):
        return all(c.level_error < 1e-10 and c.convex for c in self.curves)


def _curve(F, resolution, label):
    s = indicatrix_sample(F, resolution, label=label)
    convex = is_convex(s.points) if s.dim == 2 else True
    return Curve(F, s, level_residual(F, s), convex)


def mroot_quadratic_family(beta, resolution=720, ms=range(2, 9)):
    q = phis.builtin("quadratic")
    spec = DeformationSpec(np.atleast_2d(beta), q)
    return [_curve(apply(MRoot(m, 2), spec), resolution, f"m={m}") for m in ms]


def mroot_3d_family(resolution=2000):
    base = MRoot(4, 3)
    quad = apply(base, DeformationSpec([[0, 0, 0.3]], phis.builtin("quadratic")))
    shifted = apply(base, DeformationSpec([[0, 0.3, 0], [0, 0, 0.3]],
                                         phis.builtin("shifted_quadratic")))
    return [_curve(quad, resolution, "quadratic, beta=0.3 dy3"),
            _curve(shifted, resolution, "shifted quadratic, beta1=0.3 dy2, beta2=0.3 dy3")]


def shifted_sphere_family(resolution=720):
    return [_curve(shifted_sphere_norm(k / 10.0), resolution, f"d={k / 10:.1f}") for k in range(10)]


def build_figures(out_dir, resolution=720):
    """Write the three figure families; returns the :class:`FigureSet` records."""
    os.makedirs(out_dir, exist_ok=True)
    sets = [
        FigureSet("fig1a_mroot_quadratic_dy2", "svg",
                  mroot_quadratic_family([0.0, 0.3], resolution)),
        FigureSet("fig1b_mroot_quadratic_dy1_dy2", "svg",
                  mroot_quadratic_family([0.3, 0.3], resolution)),
        FigureSet("fig2_mroot4_r3", "obj", mroot_3d_family(max(resolution, 2000))),
        FigureSet("fig3_shifted_sphere", "svg", shifted_sphere_family(resolution)),
    ]
    for fs in sets:
        if fs.fmt == "svg":
            path = os.path.join(out_dir, fs.name + ".svg")
            write_svg([c.sample for c in fs.curves], path)
            fs.files.append(path)
        else:
            for i, c in enumerate(fs.curves):
                path = os.path.join(out_dir, f"{fs.name}_{'ab'[i]}.obj")
                write_obj(c.sample, path)
                fs.files.append(path)
    return sets
