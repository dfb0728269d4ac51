"""The T_{beta,phi} deformation engine.

``apply`` builds ``Fbar = F * phi(beta/F)``.  Everything else here either
predicts quantities of ``Fbar`` from data of ``F`` (rho-functions and the
transformed tensors), checks that ``Fbar`` is still a Minkowski norm, or
manipulates deformations (composition, inversion, iteration, the difference
norm ``|Fbar^2 - F^2|^(1/2)``).
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import jets
from .errors import (DivisionByNearZero, DomainError, EpsilonNearZero,
                     DegenerateDifference, InvalidParam, MonotonicityViolation,
                     NoBracket, SignChange, StepDomainError)
from .jets import Jet
from .norms import (Deformed, DeformationSpec, Norm, dual_norm_sq, tensors,
                    value)
from .phi import (Const, Div, Mul, PhiExpr, Pow, Sqrt, Sub, Var, seed_jets,
                  substitute)
from .sampling import DEFAULT_SAMPLES, directions

EPS_THRESHOLD = 1e-10


def apply(F, spec, phi=None):
    """``T_{beta,phi}(F)``; pass a :class:`DeformationSpec` or ``(betas, phi)``."""
    if phi is not None:
        spec = DeformationSpec(spec, phi)
    return Deformed(F, spec)


# --- phi derivative data and rho functions -------------------------------

@dataclass
class PhiData:
    """phi and its partials at a batch of arguments (batch axes first)."""

    s: np.ndarray
    f: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray


def phi_data(phi, s):
    s = np.asarray(s, dtype=float)
    if s.ndim == 0:
        s = s[None]
    if s.shape[-1] != phi.arity:
        raise InvalidParam(f"phi of arity {phi.arity} evaluated at shape {s.shape}")
    S = np.moveaxis(s, -1, 0)
    J = phi(*seed_jets(S))
    if not isinstance(J, Jet):  # constant phi
        J = Jet.constant(np.broadcast_to(np.asarray(J, dtype=float), s.shape[:-1]), phi.arity)
    f, d1, d2, d3 = jets.derivative_tensors(J)
    return PhiData(s, f, d1, d2, d3)


@dataclass
class RhoValues:
    rho: np.ndarray
    rho1: np.ndarray
    rho0: np.ndarray


def _rho_from(d):
    lin = np.einsum("...i,...i->...", d.s, d.d1)
    rho = d.f * (d.f - lin)
    rho0 = d.f[..., None, None] * d.d2 + d.d1[..., :, None] * d.d1[..., None, :]
    rho1 = d.f[..., None] * d.d1 - np.einsum("...j,...ij->...i", d.s, rho0)
    return RhoValues(rho, rho1, rho0)


def rho_functions(phi, s):
    """rho = phi (phi - s.dphi), rho0 = phi ddphi + dphi dphi^T, rho1 = phi dphi - rho0 s."""
    return _rho_from(phi_data(phi, s))


# --- local data at a point ----------------------------------------------

@dataclass
class _Local:
    F: np.ndarray
    g: np.ndarray
    C: np.ndarray
    gy: np.ndarray
    b: np.ndarray
    s: np.ndarray
    d: PhiData
    r: RhoValues

    @property
    def eps(self):
        return np.einsum("...i,...i->...", self.s, self.r.rho1)


def _local(F, spec, y, check=True):
    y = np.asarray(y, dtype=float)
    Fv, g, C = tensors(F, y, check)
    gy = np.einsum("...ij,...j->...i", g, y)
    B = np.einsum("pi,...i->...p", spec.betas, y)
    s = B / Fv[..., None]
    d = phi_data(spec.phi, s)
    return _Local(Fv, g, C, gy, spec.betas, s, d, _rho_from(d))


def _pair(x, u, v):
    return np.einsum("...i,...ij,...j->...", np.asarray(u, float), x, np.asarray(v, float))


def gbar_tensor(F, spec, y, check=True):
    """Fundamental tensor of ``T_{beta,phi}(F)`` assembled from g_y of ``F``."""
    L = _local(F, spec, y, check)
    r = L.r
    rb = np.einsum("...i,in->...n", r.rho1, L.b)
    Fv = L.F[..., None, None]
    return (r.rho[..., None, None] * L.g
            + np.einsum("im,...ij,jn->...mn", L.b, r.rho0, L.b)
            + (rb[..., :, None] * L.gy[..., None, :] + L.gy[..., :, None] * rb[..., None, :]) / Fv
            - L.eps[..., None, None] * L.gy[..., :, None] * L.gy[..., None, :] / Fv**2)


def gbar_formula(F, spec, y, u, v):
    return _pair(gbar_tensor(F, spec, y), u, v)


def gbar_rank_tensor(F, spec, y, check=True):
    """The same tensor written as rho g + M beta beta - eps Y~ Y~ with Y~ = rho1.beta#/eps - y/F."""
    L = _local(F, spec, y, check)
    r = L.r
    eps = L.eps
    if np.any(np.abs(eps) <= EPS_THRESHOLD):
        raise EpsilonNearZero(f"|eps| <= {EPS_THRESHOLD}; use gbar_formula")
    M = r.rho0 + r.rho1[..., :, None] * r.rho1[..., None, :] / eps[..., None, None]
    # covector g(Y~, .)
    gY = np.einsum("...i,in->...n", r.rho1, L.b) / eps[..., None] - L.gy / L.F[..., None]
    return (r.rho[..., None, None] * L.g
            + np.einsum("im,...ij,jn->...mn", L.b, M, L.b)
            - eps[..., None, None] * gY[..., :, None] * gY[..., None, :])


def gbar_rank_form(F, spec, y, u, v):
    return _pair(gbar_rank_tensor(F, spec, y), u, v)


def epsilon(F, spec, y):
    return _local(F, spec, y).eps


def cartan_bar_tensor(F, spec, y, check=True):
    """Cartan torsion of ``T_{beta,phi}(F)`` assembled from data of ``F``."""
    L = _local(F, spec, y, check)
    d, r = L.d, L.r
    Fv = L.F
    K = L.g - L.gy[..., :, None] * L.gy[..., None, :] / (Fv**2)[..., None, None]
    # covectors g(p_i, .) with p_i = beta_i# - s_i y / F
    P = L.b - L.s[..., :, None] * L.gy[..., None, :] / Fv[..., None, None]
    Pt = np.einsum("...i,...in->...n", r.rho1, P)
    sym = (K[..., :, :, None] * Pt[..., None, None, :]
           + K[..., None, :, :] * Pt[..., :, None, None]
           + np.swapaxes(K, -1, -2)[..., :, None, :] * Pt[..., None, :, None])
    d1, d2 = d.d1, d.d2
    T = (d1[..., :, None, None] * d2[..., None, :, :]
         + d1[..., None, :, None] * d2[..., :, None, :]
         + d1[..., None, None, :] * d2[..., :, :, None]
         + d.f[..., None, None, None] * d.d3)
    cubic = np.einsum("...ijk,...ia,...jb,...kc->...abc", T, P, P, P)
    F3 = Fv[..., None, None, None]
    return r.rho[..., None, None, None] * L.C + (sym + cubic) / (2.0 * F3)


def cartan_bar_formula(F, spec, y, u, v, w):
    Cb = cartan_bar_tensor(F, spec, y)
    return np.einsum("...abc,...a,...b,...c->...", Cb, np.asarray(u, float),
                     np.asarray(v, float), np.asarray(w, float))


# --- partials of Fbar^2 / 2 as a function of (F, beta) -------------------

@dataclass
class HalfF2Partials:
    """Closed forms for H(F, beta) = F^2 phi(beta/F)^2 / 2 and their jet cross-check."""

    H_F: np.ndarray
    H_beta: np.ndarray
    H_FF: np.ndarray
    H_Fbeta: np.ndarray
    H_betabeta: np.ndarray
    jet_hessian: np.ndarray
    jet_gradient: np.ndarray
    euler_residual: float


def half_F2_partials(F, spec, y):
    y = np.asarray(y, dtype=float)
    Fv = value(F, y)
    B = np.einsum("pi,...i->...p", spec.betas, y)
    s = B / np.asarray(Fv)[..., None]
    d = phi_data(spec.phi, s)
    r = _rho_from(d)
    Fv = np.asarray(Fv)
    lin = np.einsum("...i,...i->...", s, d.d1)
    H_F = Fv * r.rho
    H_beta = (Fv * d.f)[..., None] * d.d1
    H_FF = (d.f - lin) ** 2 + d.f * np.einsum("...i,...ij,...j->...", s, d.d2, s)

    # jets of H in the p+1 variables (F, beta_1..beta_p)
    z = np.concatenate([Fv[..., None], B], axis=-1)
    Z = seed_jets(np.moveaxis(z, -1, 0))
    phi = spec.phi(*[Zi / Z[0] for Zi in Z[1:]])
    H = Z[0] * Z[0] * phi * phi * 0.5
    _, grad, hess, third = jets.derivative_tensors(H)
    euler = np.einsum("...amn,...a->...mn", third, z)
    scale = max(1.0, float(np.max(np.abs(third))) * float(np.max(np.abs(z))))
    return HalfF2Partials(H_F, H_beta, H_FF, r.rho1, r.rho0, hess, grad,
                          float(np.max(np.abs(euler))) / scale)


# --- validity --------------------------------------------------------------

@dataclass
class ValidityReport:
    cond_p1: bool
    yava1: Optional[bool]
    yava2: Optional[bool]
    hess_psi_pd: Optional[bool]
    gbar_pd: bool
    min_eigen: float
    worst_sample: np.ndarray
    samples_used: int
    domain_failures: int = 0
    phi_positive: bool = True

    @property
    def passed(self):
        checks = [self.cond_p1, self.gbar_pd, self.phi_positive, self.domain_failures == 0]
        checks += [c for c in (self.yava1, self.yava2) if c is not None]
        return all(checks)

    def lines(self):
        fmt = lambda v: "n/a" if v is None else ("yes" if v else "NO")
        return [
            f"samples used        {self.samples_used}",
            f"domain failures     {self.domain_failures}",
            f"phi positive        {fmt(self.phi_positive)}",
            f"phi - s.dphi > 0    {fmt(self.cond_p1)}",
            f"p=1 condition 1     {fmt(self.yava1)}",
            f"p=1 condition 2     {fmt(self.yava2)}",
            f"Psi criterion       {fmt(self.hess_psi_pd)}  (sufficient only)",
            f"gbar pos. definite  {fmt(self.gbar_pd)}",
            f"min eigenvalue      {self.min_eigen:.6g}",
            f"worst sample        {np.array2string(self.worst_sample, precision=6)}",
        ]


def _batched_phi_data(phi, s):
    """phi_data on rows that evaluate; returns (mask, data restricted to mask)."""
    try:
        return np.ones(len(s), bool), phi_data(phi, s)
    except (DomainError, DivisionByNearZero):
        ok = np.zeros(len(s), bool)
        for i in range(len(s)):
            try:
                phi_data(phi, s[i])
                ok[i] = True
            except (DomainError, DivisionByNearZero):
                pass
        return ok, (phi_data(phi, s[ok]) if ok.any() else None)


def indicatrix_points(F, n_samples=DEFAULT_SAMPLES, seed=0):
    """Points ``u / F(u)`` over the default direction set, dropping failed directions."""
    u = directions(F.dim, n_samples, seed)
    with np.errstate(all="ignore"):
        Fu = F.values(u)
    ok = np.isfinite(Fu) & (Fu > 0)
    return u[ok] / Fu[ok][:, None], int((~ok).sum())


def validity_check(F, spec, n_samples=DEFAULT_SAMPLES, seed=0):
    """Sample the F-indicatrix and evaluate every positivity criterion for ``T_{beta,phi}(F)``."""
    if n_samples < 1:
        raise InvalidParam("n_samples must be >= 1")
    y, base_fail = indicatrix_points(F, n_samples, seed)
    Fbar = Deformed(F, spec)
    s = np.einsum("pi,ki->kp", spec.betas, y)  # F(y) = 1 on the indicatrix
    with np.errstate(all="ignore"):
        fvals = spec.phi(*s.T, strict=False)
    finite = np.isfinite(fvals)
    ok, d = _batched_phi_data(spec.phi, s[finite])
    idx = np.flatnonzero(finite)[ok]
    # a non-positive Fbar also lies outside the norm's domain
    nonpositive = int(np.sum(fvals[finite] <= 0))
    domain_failures = base_fail + int(len(y) - len(idx)) + nonpositive
    phi_positive = nonpositive == 0

    if d is None:
        nan = float("nan")
        bad = y[0] if len(y) else np.full(F.dim, nan)
        return ValidityReport(False, None, None, None, False, nan, bad, 0,
                              domain_failures, False)
    ys, ss = y[idx], s[idx]
    cond = d.f - np.einsum("...i,...i->...", ss, d.d1)
    cond_p1 = bool(np.all(cond > 0))

    yava1 = yava2 = hess_psi = None
    if spec.p == 1:
        yava1 = cond_p1
        b2 = dual_norm_sq(F, ys, spec.betas[0])
        yava2 = bool(np.all(cond + (b2 - ss[:, 0]**2) * d.d2[:, 0, 0] > 0))
    else:
        psi = d.f**2
        dpsi = 2.0 * d.f[:, None] * d.d1
        ddpsi = 2.0 * (d.d1[:, :, None] * d.d1[:, None, :] + d.f[:, None, None] * d.d2)
        Psi = np.empty((len(ss), spec.p + 1, spec.p + 1))
        Psi[:, 0, 0] = 2.0 * psi
        Psi[:, 0, 1:] = dpsi
        Psi[:, 1:, 0] = dpsi
        Psi[:, 1:, 1:] = ddpsi
        hess_psi = bool(np.all(np.linalg.det(Psi) > 0)
                        and np.all(np.linalg.eigvalsh(ddpsi) >= -1e-12))

    gbar = tensors(Fbar, ys, check=False)[1]
    eig = np.linalg.eigvalsh(gbar)[:, 0]
    worst = int(np.argmin(eig))
    return ValidityReport(cond_p1, yava1, yava2, hess_psi, bool(np.all(eig > 0)),
                          float(eig[worst]), ys[worst], len(ys), domain_failures,
                          phi_positive)


@dataclass
class NormReport:
    """Sampled check that a norm is positive with positive-definite g_y."""

    positive: bool
    gbar_pd: bool
    min_eigen: float
    domain_failures: int
    samples_used: int

    @property
    def passed(self):
        return self.positive and self.gbar_pd and self.domain_failures == 0


def norm_validity(F, n_samples=DEFAULT_SAMPLES, seed=0):
    u = directions(F.dim, n_samples, seed)
    with np.errstate(all="ignore"):
        Fu = F.values(u)
    finite = np.isfinite(Fu)
    positive = bool(np.all(Fu[finite] > 0))
    good = finite & (Fu > 0)
    fails = int((~finite).sum())
    if not good.any():
        return NormReport(False, False, float("nan"), fails, 0)
    try:
        g = tensors(F, u[finite], check=False)[1]
    except (DomainError, DivisionByNearZero):
        return NormReport(positive, False, float("nan"), fails, 0)
    eig = np.linalg.eigvalsh(g)[:, 0]
    return NormReport(positive, bool(np.all(eig > 0)), float(eig.min()), fails,
                      int(finite.sum()))


# --- composition -----------------------------------------------------------

def compose(phi1, phi2):
    """phi with ``T_{beta,phi2} o T_{beta,phi1} = T_{beta,phi}``: phi1(s) phi2(s/phi1(s))."""
    if phi1.arity != phi2.arity:
        raise InvalidParam("composed phis need equal arity")
    inner = [Div(Var(i + 1), phi1.ast) for i in range(phi1.arity)]
    return PhiExpr(Mul(phi1.ast, substitute(phi2.ast, inner)), phi1.arity)


# --- inversion ---------------------------------------------------------------

MAX_BISECT = 200
MAX_NEWTON = 8
RESIDUAL_TOL = 1e-12


class InversePhi:
    """psi with ``T_{beta,psi}(T_{beta,phi}(F)) = F``.

    Along each ray the map ``s -> s/phi(s)`` is increasing while
    ``phi - s.dphi > 0``; psi(t) = 1/phi(s*) where s* is the preimage of t,
    found by bracketing, bisection and a Newton polish.  On jets the
    preimage is refined by chord-Newton iterations, which recovers the
    Taylor coefficients of psi exactly to degree 3.
    """

    def __init__(self, phi):
        self.phi = phi
        self.arity = phi.arity

    def __repr__(self):
        return f"InversePhi({self.phi})"

    __str__ = __repr__

    def _ray_terms(self, lam, dirn):
        """phi and phi - s.dphi at ``s = lam * dirn`` for 1-d batches."""
        s = lam[:, None] * dirn
        with np.errstate(all="ignore"):
            f = np.broadcast_to(np.asarray(self.phi(*s.T, strict=False), dtype=float), lam.shape)
        cond = np.full(len(lam), np.nan)
        ok = np.isfinite(f) & (f > 0)
        if ok.any():
            try:
                d = phi_data(self.phi, s[ok])
                cond[ok] = d.f - np.einsum("...i,...i->...", s[ok], d.d1)
            except (DomainError, DivisionByNearZero):
                for i in np.flatnonzero(ok):
                    try:
                        d = phi_data(self.phi, s[i])
                        cond[i] = d.f - s[i] @ d.d1
                    except (DomainError, DivisionByNearZero):
                        pass
        return f, cond

    def preimage(self, t, strict=True):
        """s with ``s / phi(s) = t``; ``t`` has shape (m, p). Failures give NaN when not strict."""
        t = np.atleast_2d(np.asarray(t, dtype=float))
        r = np.linalg.norm(t, axis=1)
        out = np.zeros_like(t)
        live = r > 0
        if not live.any():
            return out
        rl = r[live]
        dirn = t[live] / rl[:, None]
        lo = np.zeros_like(rl)
        hi = rl.copy()
        found = np.zeros(len(rl), bool)
        failed = np.zeros(len(rl), bool)
        shrinks = np.zeros(len(rl), int)
        for _ in range(4 * MAX_BISECT):
            act = ~(found | failed)
            if not act.any():
                break
            f, cond = self._ray_terms(hi[act], dirn[act])
            valid = np.isfinite(cond) & (cond > 0)
            h = np.where(valid, hi[act] / np.where(valid, f, 1.0), -np.inf)
            ia = np.flatnonzero(act)
            reached = valid & (h >= rl[act])
            grow = valid & ~reached
            shrink = ~valid
            found[ia[reached]] = True
            lo[ia[grow]] = hi[ia[grow]]
            hi[ia[grow]] *= 2.0
            hi[ia[shrink]] = 0.5 * (lo[ia[shrink]] + hi[ia[shrink]])
            shrinks[ia[shrink]] += 1
            failed[ia[shrink][shrinks[ia[shrink]] > 60]] = True
        failed |= ~found
        if failed.any() and strict:
            raise NoBracket("target outside the range of s -> s/phi(s) along its ray")

        good = ~failed
        a, b = lo[good], hi[good]
        dg, rg = dirn[good], rl[good]
        for _ in range(MAX_BISECT):
            mid = 0.5 * (a + b)
            f, _ = self._ray_terms(mid, dg)
            up = mid / f >= rg
            b = np.where(up, mid, b)
            a = np.where(up, a, mid)
            if np.all(b - a <= 4e-16 * np.maximum(b, 1e-300)):
                break
        lam = 0.5 * (a + b)
        for _ in range(MAX_NEWTON):
            f, cond = self._ray_terms(lam, dg)
            res = lam / f - rg
            if np.all(np.abs(res) < RESIDUAL_TOL * np.maximum(1.0, rg)):
                break
            step = res / (cond / f**2)
            lam = np.clip(lam - step, a, b)

        # the segment [0, lam] must stay monotone
        for frac in np.linspace(0.05, 1.0, 20):
            _, cond = self._ray_terms(frac * lam, dg)
            bad = ~(cond > 0)
            if bad.any():
                if strict:
                    raise MonotonicityViolation("phi - s.dphi fails on the searched segment")
                failed[np.flatnonzero(good)[bad]] = True

        sl = np.full_like(dirn, np.nan)
        sl[good] = lam[:, None] * dg
        sl[failed] = np.nan
        out[live] = sl
        return out

    def __call__(self, *t, strict=True):
        if t and isinstance(t[0], Jet):
            return self._jet(t)
        T = np.stack([np.asarray(ti, dtype=float) for ti in t], axis=-1)
        shape = T.shape[:-1]
        s = self.preimage(T.reshape(-1, self.arity), strict=strict)
        with np.errstate(all="ignore"):
            f = np.broadcast_to(np.asarray(self.phi(*s.T, strict=False), dtype=float), s.shape[:1])
        return (1.0 / f).reshape(shape)

    def _jet(self, T):
        k = T[0].nvars
        batch = T[0].batch_shape
        t0 = np.stack([np.broadcast_to(ti.const, batch) for ti in T], axis=-1)
        s0 = self.preimage(t0.reshape(-1, self.arity)).reshape(batch + (self.arity,))
        d = phi_data(self.phi, s0)
        p = self.arity
        J = (np.eye(p) / d.f[..., None, None]
             - s0[..., :, None] * d.d1[..., None, :] / (d.f**2)[..., None, None])
        Jinv = np.linalg.inv(J)
        S = [Jet.constant(s0[..., i], k) for i in range(p)]
        for _ in range(jets.DEGREE + 1):
            f = self.phi(*S)
            R = [S[i] / f - T[i] for i in range(p)]
            S = [S[i] - sum((R[j] * Jinv[..., i, j] for j in range(p)),
                            start=Jet.constant(np.zeros(batch), k))
                 for i in range(p)]
        return 1.0 / self.phi(*S)


def invert_spec(spec):
    """The inverse phi (callable psi) of a deformation or of a bare phi."""
    phi = spec.phi if isinstance(spec, DeformationSpec) else spec
    return InversePhi(phi)


def invert(spec, t):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return float(invert_spec(spec)(*t))


def inverse_deformation(spec):
    return DeformationSpec(spec.betas, InversePhi(spec.phi))


# --- iteration -------------------------------------------------------------

def psi_sequence(phi, k, s):
    """psi_1..psi_k with psi_0 = phi and psi_{j+1}(s) = psi_j(s) phi(s / psi_j(s))."""
    s = np.asarray(s, dtype=float)
    args = s if s.ndim and phi.arity > 1 else (s,)
    if phi.arity > 1:
        args = tuple(np.moveaxis(s, -1, 0))
    psi = np.asarray(phi(*args), dtype=float)
    out = []
    for _ in range(k):
        psi = psi * np.asarray(phi(*[a / psi for a in args]), dtype=float)
        out.append(psi)
    return out


@dataclass
class IterationResult:
    norms: List[Norm]
    reports: List[NormReport]

    @property
    def first_invalid(self):
        """1-based index of the first iterate that is not a Minkowski norm, or None."""
        for j, rep in enumerate(self.reports, start=1):
            if not rep.passed:
                return j
        return None


def iterate(F, beta, phi, k, n_samples=512, seed=0, points=None):
    """F_1 = T(F), F_{j+1} = T(F_j) with the same beta and phi, each checked for validity.

    With ``points`` given, every iterate is also evaluated there and the first
    step that leaves the domain raises :class:`StepDomainError`.
    """
    spec = DeformationSpec(beta, phi)
    norms, reports = [], []
    current = F
    for step in range(1, k + 1):
        current = Deformed(current, spec)
        if points is not None:
            try:
                value(current, points)
            except Exception as exc:
                raise StepDomainError(step, exc) from exc
        norms.append(current)
        reports.append(norm_validity(current, n_samples, seed))
    return IterationResult(norms, reports)


# --- the difference norm -----------------------------------------------------

@dataclass
class DifferenceNorm:
    """``|Fbar^2 - F^2|^(1/2)`` as the deformation of F by sqrt(sign*(phi^2 - 1))."""

    norm: Deformed
    sign: int
    cond2: bool
    psi_tilde_pd: bool
    min_gap: float

    def __call__(self, y):
        return self.norm(y)


def difference_phi(phi, sign):
    sq = Pow(phi.ast, Const(2.0))
    inner = Sub(sq, Const(1.0)) if sign > 0 else Sub(Const(1.0), sq)
    return PhiExpr(Sqrt(inner), phi.arity)


def difference_norm(F, spec, points=None, n_samples=DEFAULT_SAMPLES, seed=0,
                    gap_tol=1e-12):
    if points is None:
        points, _ = indicatrix_points(F, n_samples, seed)
    y = np.atleast_2d(np.asarray(points, dtype=float))
    Fv = value(F, y)
    s = np.einsum("pi,ki->kp", spec.betas, y) / Fv[:, None]
    d = phi_data(spec.phi, s)
    gap = d.f - 1.0
    diff = np.abs(d.f**2 - 1.0)
    if np.any(gap > gap_tol) and np.any(gap < -gap_tol):
        raise SignChange("phi - 1 changes sign over the samples")
    if np.any(diff < gap_tol):
        raise DegenerateDifference("|Fbar^2 - F^2| vanishes at a sample")
    sign = 1 if np.all(gap > 0) else -1
    rho = d.f * (d.f - np.einsum("ki,ki->k", s, d.d1))
    cond2 = bool(np.all(gap * (rho - 1.0) > 0))

    psi = d.f**2
    dpsi = 2.0 * d.f[:, None] * d.d1
    ddpsi = 2.0 * (d.d1[:, :, None] * d.d1[:, None, :] + d.f[:, None, None] * d.d2)
    p = spec.p
    Psi = np.empty((len(s), p + 1, p + 1))
    Psi[:, 0, 0] = 2.0 * (psi - 1.0)
    Psi[:, 0, 1:] = dpsi
    Psi[:, 1:, 0] = dpsi
    Psi[:, 1:, 1:] = ddpsi
    Psi *= sign
    psi_ok = bool(np.all(np.linalg.det(Psi) > 0)
                  and np.all(np.linalg.eigvalsh(sign * ddpsi) >= -1e-12))
    norm = Deformed(F, DeformationSpec(spec.betas, difference_phi(spec.phi, sign)))
    return DifferenceNorm(norm, sign, cond2, psi_ok, float(diff.min()))
