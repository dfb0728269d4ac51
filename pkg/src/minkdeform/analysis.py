"""Determinant identities, (semi-)C-reducibility and symmetry tests."""

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .deform import EPS_THRESHOLD, _local, indicatrix_points, phi_data, _rho_from
from .errors import (EpsilonNearZero, IllConditionedEigen, InsufficientSamples,
                     SingularBase, VanishingMeanCartan)
from .norms import COND_LIMIT, Deformed, _inverse_metric, tensors
from .sampling import gaussian_directions

THRESHOLDS = {
    "euclidean": 1e-9,
    "c_reducible": 1e-7,
    "semi_c_reducible": 1e-7,
    "fit_rank": 1e-10,
    "kropina": 1e-8,
    "mean_cartan": 1e-8,
}


# --- determinants ----------------------------------------------------------

def det_update(a, c1, b1, c2, b2):
    """det(a + c1 b1 b1^T + c2 b2 b2^T) from det a and a^{-1}-contractions of b1, b2."""
    a = np.asarray(a, dtype=float)
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    sign, logdet = np.linalg.slogdet(a)
    if sign == 0 or np.linalg.cond(a) > 1e14:
        raise SingularBase("base matrix is singular")
    w1 = np.linalg.solve(a, b1)
    w2 = np.linalg.solve(a, b2)
    n11, n22, n12 = b1 @ w1, b2 @ w2, b1 @ w2
    return sign * np.exp(logdet) * ((1 + c1 * n11) * (1 + c2 * n22) - c1 * c2 * n12**2)


@dataclass
class VolumeRatio:
    rho_form: float
    factored: float

    @property
    def agreement(self):
        return abs(self.rho_form - self.factored) / max(abs(self.factored), 1e-300)


def volume_ratio_p1(phi, s, b, n):
    """det gbar / det g for a p=1 deformation with constant ``b = |beta|`` (both closed forms)."""
    d = phi_data(phi, np.atleast_1d(np.asarray(s, dtype=float))[..., None])
    r = _rho_from(d)
    s = d.s[..., 0]
    rho, r0, r1 = r.rho, r.rho0[..., 0, 0], r.rho1[..., 0]
    b2 = np.asarray(b, dtype=float) ** 2
    line1 = rho ** (n - 2) * (r0 * r1 * s**3 + r1**2 * s**2 + (rho - r0 * b2) * r1 * s
                              + (rho * r0 - r1**2) * b2 + rho**2)
    f, f1, f2 = d.f, d.d1[..., 0], d.d2[..., 0, 0]
    line2 = f ** (n + 1) * (f - s * f1) ** (n - 2) * (f - s * f1 + (b2 - s**2) * f2)
    if line1.shape == (1,):
        return VolumeRatio(float(line1[0]), float(line2[0]))
    return VolumeRatio(line1, line2)


def det_ratio(F, spec, y):
    """det gbar_y / det g_y from the jet tensors of F and of its deformation."""
    g = tensors(F, y)[1]
    gb = tensors(Deformed(F, spec), y, check=False)[1]
    return np.linalg.det(gb) / np.linalg.det(g)


@dataclass
class VolumeRatioReport:
    closed_form: float
    det_ratio: float
    low_rank: float
    discrepancy: float
    eigenvalues: np.ndarray


def volume_ratio_p2_report(F, spec, y, cond_limit=1e10):
    """The eigen-form sigma for p=2 next to the determinant ratio; nothing is asserted.

    ``low_rank`` evaluates the same decomposition through a 3x3 determinant
    (matrix determinant lemma), which is exact and isolates errors in the
    long closed form.
    """
    if spec.p != 2:
        raise ValueError("the p=2 report needs exactly two 1-forms")
    y = np.asarray(y, dtype=float)
    L = _local(F, spec, y)
    r = L.r
    eps = float(L.eps)
    if abs(eps) <= EPS_THRESHOLD:
        raise EpsilonNearZero("eps vanishes at this point")
    M = r.rho0 + np.outer(r.rho1, r.rho1) / eps
    lam, Q = np.linalg.eigh(M)
    if abs(lam[1] - lam[0]) < 1e-12 * max(1.0, abs(lam).max()) and not np.allclose(M, M[0, 0] * np.eye(2)):
        raise IllConditionedEigen("eigenvalues nearly coincide")
    ginv = _inverse_metric(L.g)
    bt = Q.T @ spec.betas  # rows: beta~_k = q_k^i beta_i
    Fv = float(L.F)
    Yg = r.rho1 @ spec.betas / eps - L.gy / Fv  # covector g(Y~, .)
    Yv = ginv @ Yg
    B = bt @ ginv @ bt.T
    gbY = bt @ Yv
    gYY = Yg @ Yv
    rho = float(r.rho)
    l1, l2 = lam
    b11, b22, b12 = B[0, 0], B[1, 1], B[0, 1]
    n = F.dim
    closed = rho ** (n - 1) * (
        rho**2 + rho * (l1 * b11 + l2 * b22) - rho * eps * gYY
        + l1 * l2 * (b11 * b22 - b12**2)
        - eps * gYY * (l1 * b11 + l2 * b22)
        + l1 * eps * gbY[0] + l2 * eps * gbY[1]
        + l1 * l2 * eps / rho * (b11 * gbY[1] ** 2 + b22 * gbY[0] ** 2 + b12 * gYY**2
                                 - b11 * b22 * gYY - 2 * b12 * gbY[0] * gbY[1]))
    # det(rho g + W D W^T) / det g = rho^n det(I + D W^T g^-1 W / rho)
    W = np.stack([bt[0], bt[1], Yg], axis=1)
    D = np.diag([l1, l2, -eps])
    small = np.eye(3) + D @ (W.T @ ginv @ W) / rho
    low_rank = rho**n * np.linalg.det(small)
    ratio = float(det_ratio(F, spec, y))
    return VolumeRatioReport(float(closed), ratio, float(low_rank),
                             abs(closed - ratio) / abs(ratio), lam)


# --- C-reducibility --------------------------------------------------------

def _sym_KI(K, I):
    return (K[..., :, :, None] * I[..., None, None, :]
            + K[..., None, :, :] * I[..., :, None, None]
            + np.swapaxes(K, -1, -2)[..., :, None, :] * I[..., None, :, None])


def _cartan_data(F, y):
    y = np.asarray(y, dtype=float)
    Fv, g, C = tensors(F, y)
    ginv = _inverse_metric(g)
    I = np.einsum("...ijk,...ij->...k", C, ginv)
    gy = np.einsum("...ij,...j->...i", g, y)
    K = g - gy[..., :, None] * gy[..., None, :] / (Fv**2)[..., None, None]
    Inorm = np.sqrt(np.einsum("...i,...ij,...j->...", I, ginv, I))
    return C, K, I, Inorm


@dataclass
class SemiCFit:
    p_fit: float
    B: float
    residual_rel: float
    implied_eps: float


def semi_c_reducible_fit(F, y, tol=THRESHOLDS["mean_cartan"]):
    """Least-squares fit of C = A sym(K (x) I) + B I (x) I (x) I at one point."""
    C, K, I, Inorm = _cartan_data(F, y)
    if Inorm <= tol:
        raise VanishingMeanCartan(f"|I| = {Inorm:.3g} at this point")
    S1 = _sym_KI(K, I).ravel()
    S2 = np.einsum("i,j,k->ijk", I, I, I).ravel()
    X = np.stack([S1, S2], axis=1)
    coef, *_ = np.linalg.lstsq(X, C.ravel(), rcond=None)
    A, B = coef
    n = F.dim
    res = np.linalg.norm(X @ coef - C.ravel()) / np.linalg.norm(C.ravel())
    p = (n + 1) * A
    # B = eps (1 - p) / |I|^2 read as a definition of eps
    implied = B * Inorm**2 / (1 - p) if abs(1 - p) > 1e-12 else float("nan")
    return SemiCFit(float(p), float(B), float(res), float(implied))


def c_reducible_residual(F, y, return_flag=False):
    """``|C - sym(K (x) I)/(n+1)| / |C|``; zero (with a warning) where C vanishes."""
    C, K, I, _ = _cartan_data(F, y)
    n = F.dim
    diff = C - _sym_KI(K, I) / (n + 1)
    axes = (-3, -2, -1)
    cn = np.sqrt(np.sum(C**2, axis=axes))
    dn = np.sqrt(np.sum(diff**2, axis=axes))
    flat = cn < 1e-12
    if np.any(flat):
        warnings.warn("Cartan torsion vanishes; residual set to 0", RuntimeWarning, stacklevel=2)
    res = np.where(flat, 0.0, dn / np.where(flat, 1.0, cn))
    res = res[()] if np.ndim(res) == 0 else res
    return (res, flat) if return_flag else res


# --- classification ----------------------------------------------------------

@dataclass
class RandersFit:
    """Coefficients of ``a F^2 + 2 beta(y) F + y^T A y = 0`` (unit vector, a >= 0)."""

    a: float
    beta: np.ndarray
    A: np.ndarray
    residual: float

    def alpha_matrix(self):
        return np.outer(self.beta, self.beta) - self.a * self.A

    def evaluate(self, y):
        """Norm implied by the fit (Randers form; needs a > 0)."""
        y = np.asarray(y, dtype=float)
        q = np.einsum("...i,ij,...j->...", y, self.alpha_matrix(), y)
        return (np.sqrt(q) - y @ self.beta) / self.a


@dataclass
class ClassificationResult:
    kind: str
    p_fit: float
    residual_rel: float
    metric_type: Optional[str] = None
    randers_fit: Optional[RandersFit] = None
    max_mean_cartan: float = 0.0
    thresholds: dict = field(default_factory=dict)


def _quadric_rows(y, Fv):
    n = y.shape[1]
    iu = np.triu_indices(n)
    quad = y[:, iu[0]] * y[:, iu[1]] * np.where(iu[0] == iu[1], 1.0, 2.0)
    return np.concatenate([Fv[:, None] ** 2, 2.0 * y * Fv[:, None], quad], axis=1), iu


def randers_fit(F, y):
    y = np.asarray(y, dtype=float)
    Fv = F.values(y)
    X, iu = _quadric_rows(y, Fv)
    scale = np.linalg.norm(X, axis=1, keepdims=True)
    Xs = X / scale
    _, sv, Vt = np.linalg.svd(Xs, full_matrices=False)
    v = Vt[-1]
    if v[0] < 0 or (abs(v[0]) < 1e-15 and v[1:][np.argmax(np.abs(v[1:]))] < 0):
        v = -v
    n = y.shape[1]
    A = np.zeros((n, n))
    A[iu] = v[1 + n:]
    A = A + np.triu(A, 1).T
    return RandersFit(float(v[0]), v[1:1 + n].copy(), A, float(sv[-1] / sv[0]))


def classify_norm(F, samples=512, seed=0, thresholds=None):
    th = dict(THRESHOLDS)
    th.update(thresholds or {})
    n = F.dim
    need = n * (n + 3) // 2 + 1
    if samples < need:
        raise InsufficientSamples(f"need at least {need} samples in dimension {n}")
    y, _ = indicatrix_points(F, samples, seed)
    # m-root norms degenerate on coordinate planes; such directions carry no tensor data
    cond = np.linalg.cond(tensors(F, y, check=False)[1])
    y = y[np.isfinite(cond) & (cond < COND_LIMIT)]
    if len(y) < need:
        raise InsufficientSamples(f"only {len(y)} directions lie in the domain")
    C, K, I, Inorm = _cartan_data(F, y)
    maxI = float(np.max(Inorm))
    if maxI < th["euclidean"]:
        return ClassificationResult("euclidean", 0.0, 0.0, "euclidean", None, maxI, th)

    fit = randers_fit(F, y)
    metric = None
    if fit.residual < th["fit_rank"]:
        if abs(fit.a) < th["kropina"]:
            metric = "kropina"
        elif np.all(np.linalg.eigvalsh(fit.alpha_matrix()) > 0):
            metric = "randers"
    if n >= 3:
        res = float(np.max(c_reducible_residual(F, y)))
        if res < th["c_reducible"]:
            return ClassificationResult("c_reducible", 1.0, res, metric, fit, maxI, th)
    elif metric is not None:
        return ClassificationResult("c_reducible", 1.0, fit.residual, metric, fit, maxI, th)

    good = Inorm > th["mean_cartan"]
    fits = [semi_c_reducible_fit(F, yi) for yi in y[good]]
    worst = max(f.residual_rel for f in fits) if fits else float("inf")
    pf = float(np.median([f.p_fit for f in fits])) if fits else float("nan")
    kind = "semi_c_reducible" if worst < th["semi_c_reducible"] else "general"
    return ClassificationResult(kind, pf, worst, metric, fit, maxI, th)


# --- symmetry ------------------------------------------------------------------

def _orthogonal_fixing(axis, rng, n):
    """Random orthogonal map of R^n that is the identity on span(axis)."""
    axis = np.atleast_2d(np.asarray(axis, dtype=float))
    Q, _ = np.linalg.qr(np.concatenate([axis.T, rng.standard_normal((n, n))], axis=1))
    p = axis.shape[0]
    Qa, Qc = Q[:, :p], Q[:, p:n]
    R, _ = np.linalg.qr(rng.standard_normal((n - p, n - p)))
    return Qa @ Qa.T + Qc @ R @ Qc.T


@dataclass
class SymmetryResult:
    symmetric: bool
    max_violation: float

    def __bool__(self):
        return self.symmetric


def symmetry_check(F, axis_basis, trials=32, seed=0, inner=None, points=64, tol=1e-10):
    """Is F invariant under orthogonal maps (for ``inner``) fixing the axis pointwise?"""
    n = F.dim
    axis = np.atleast_2d(np.asarray(axis_basis, dtype=float))
    if np.linalg.matrix_rank(axis) < axis.shape[0]:
        raise ValueError("axis vectors must be independent")
    Lt = np.eye(n) if inner is None else np.linalg.cholesky(np.asarray(inner, float)).T
    Lt_inv = np.linalg.inv(Lt)
    rng = np.random.default_rng(seed)
    y = gaussian_directions(n, points, seed + 1)
    ok = F.contains(y)
    y = y[ok]
    Fy = F.values(y)
    worst = 0.0
    for _ in range(trials):
        A = Lt_inv @ _orthogonal_fixing(axis @ Lt.T, rng, n) @ Lt
        with np.errstate(all="ignore"):
            FA = F.values(y @ A.T)
        v = np.abs(FA - Fy) / Fy
        v = np.where(np.isfinite(v), v, np.inf)
        worst = max(worst, float(np.max(v)) if len(v) else 0.0)
    return SymmetryResult(worst < tol, worst)
