"""Minkowski norms and their tensors.

Three closed variants:

* :class:`Euclidean` -- ``sqrt(y^T A y)`` for a symmetric positive-definite ``A``;
* :class:`MRoot` -- ``(sum_i y_i^m)^(1/m)``;
* :class:`Deformed` -- ``base(y) * phi(beta_1(y)/base(y), ..., beta_p(y)/base(y))``.

Points are passed as arrays whose last axis has length ``n``; any leading
axes are batch axes and come back on the results.  The fundamental tensor
``g``, the Cartan torsion ``C`` and everything derived from them are read off
the degree-3 jet of ``F^2`` in the ``n`` coordinate directions.
"""

from dataclasses import dataclass, field

import numpy as np

from . import jets
from .errors import (DivisionByNearZero, DomainError, InputError, InvalidParam,
                     OutsideDomain, RankDeficientBetas, SingularMetric,
                     ZeroVector)
from .jets import Jet

COND_LIMIT = 1e12


def _coords(y):
    """(n, *batch) view of points given as (*batch, n)."""
    y = np.asarray(y, dtype=float)
    return np.moveaxis(y, -1, 0)


class Norm:
    """Common evaluation surface; subclasses provide ``_values`` and ``_jet``."""

    dim: int

    def _values(self, Y, strict):
        raise NotImplementedError

    def _jet(self, Y):
        raise NotImplementedError

    def values(self, y, strict=False):
        """F at points ``y`` (*batch, n); NaN marks points outside the domain."""
        return self._values(_coords(y), strict)

    def __call__(self, y):
        return value(self, y)

    def contains(self, y):
        with np.errstate(all="ignore"):
            v = self.values(y)
        return np.isfinite(v) & (v > 0)


@dataclass(frozen=True, eq=False)
class Euclidean(Norm):
    A: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 2:
            raise InvalidParam("Euclidean norm needs a square matrix of size >= 2")
        if not np.allclose(A, A.T, rtol=1e-12, atol=1e-12):
            raise InvalidParam("Euclidean matrix must be symmetric")
        try:
            np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            raise InvalidParam("Euclidean matrix must be positive definite") from None
        A = 0.5 * (A + A.T)
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @property
    def dim(self):
        return self.A.shape[0]

    def _values(self, Y, strict):
        q = np.einsum("i...,ij,j...->...", Y, self.A, Y)
        return np.sqrt(np.maximum(q, 0.0))

    def _jet(self, Y):
        n = self.dim
        q = None
        for i in range(n):
            Ay = sum((Y[j] * self.A[i, j] for j in range(n) if self.A[i, j] != 0.0),
                     start=Jet.constant(np.zeros(Y[0].batch_shape), Y[0].nvars))
            term = Y[i] * Ay
            q = term if q is None else q + term
        return jets.sqrt(q)

    def __repr__(self):
        return f"Euclidean(A={self.A.tolist()})"


@dataclass(frozen=True, eq=False)
class MRoot(Norm):
    """``(sum y_i^m)^(1/m)``; odd ``m`` uses ``|y_i|`` (the l^m norm).

    Odd ``m`` is only smooth off the coordinate hyperplanes, so jets there
    raise :class:`DomainError`.
    """

    m: int
    n: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise InvalidParam("m-root norm needs an integer m >= 2")
        if self.n < 2:
            raise InvalidParam("dimension must be at least 2")

    @property
    def dim(self):
        return self.n

    @property
    def even(self):
        return self.m % 2 == 0

    def _values(self, Y, strict):
        Z = Y if self.even else np.abs(Y)
        return np.sum(Z**self.m, axis=0) ** (1.0 / self.m)

    def _jet(self, Y):
        total = None
        for Yi in Y:
            if not self.even:
                sign = np.sign(Yi.const)
                if np.any(sign == 0):
                    raise DomainError("odd m-root norm is not smooth on a coordinate hyperplane")
                Yi = Yi * sign
            term = jets.integer_power(Yi, self.m)
            total = term if total is None else total + term
        return jets.power(total, 1.0 / self.m)

    def __repr__(self):
        return f"MRoot(m={self.m}, n={self.n})"


@dataclass(frozen=True, eq=False)
class DeformationSpec:
    """Linearly independent 1-forms (rows of ``betas``) and a phi of matching arity.

    ``phi`` is anything callable as ``phi(*s, strict=...)`` on floats/arrays and
    ``phi(*jets)`` on jets, with an ``arity`` attribute (parsed expressions and
    numerically inverted phis both qualify).
    """

    betas: np.ndarray
    phi: object
    rank_tol: float = field(default=1e-12)

    def __post_init__(self):
        b = np.atleast_2d(np.array(self.betas, dtype=float))
        if not np.all(np.isfinite(b)):
            raise InputError("1-form components must be finite")
        p, n = b.shape
        if p > n:
            raise RankDeficientBetas(f"{p} forms in dimension {n}")
        sv = np.linalg.svd(b, compute_uv=False)
        if sv[-1] <= self.rank_tol * max(1.0, sv[0]):
            raise RankDeficientBetas(
                f"1-forms are linearly dependent (smallest singular value {sv[-1]:.3g})")
        if self.phi.arity != p:
            raise InvalidParam(f"phi has arity {self.phi.arity} but {p} forms are given")
        b.setflags(write=False)
        object.__setattr__(self, "betas", b)

    @property
    def p(self):
        return self.betas.shape[0]

    @property
    def dim(self):
        return self.betas.shape[1]


@dataclass(frozen=True, eq=False)
class Deformed(Norm):
    base: Norm
    spec: DeformationSpec

    def __post_init__(self):
        if self.spec.dim != self.base.dim:
            raise InvalidParam(
                f"1-forms live in dimension {self.spec.dim}, base norm in {self.base.dim}")

    @property
    def dim(self):
        return self.base.dim

    def _values(self, Y, strict):
        Fb = self.base._values(Y, strict)
        bad = ~(Fb > 0)
        if np.any(bad):
            if strict:
                raise OutsideDomain("base norm is not positive here")
            Fb = np.where(bad, np.nan, Fb)
        B = np.tensordot(self.spec.betas, Y, axes=(1, 0))
        with np.errstate(invalid="ignore"):
            S = B / Fb
        phi = self.spec.phi(*S, strict=strict)
        return Fb * phi

    def _jet(self, Y):
        Fb = self.base._jet(Y)
        args = []
        for row in self.spec.betas:
            beta = None
            for j, c in enumerate(row):
                if c != 0.0:
                    term = Y[j] * c
                    beta = term if beta is None else beta + term
            if beta is None:
                beta = Y[0] * 0.0
            args.append(beta / Fb)
        return Fb * self.spec.phi(*args)

    def __repr__(self):
        return f"Deformed({self.base!r}, phi={self.spec.phi}, betas={self.spec.betas.tolist()})"


# --- evaluation ----------------------------------------------------------

def _check_point(F, y):
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != F.dim:
        raise InputError(f"expected points of dimension {F.dim}, got shape {y.shape}")
    if np.any(np.all(y == 0.0, axis=-1)):
        raise ZeroVector("norms are evaluated away from the origin")
    return y


def value(F, y):
    """F(y), raising :class:`OutsideDomain` off the (conic) domain."""
    y = _check_point(F, y)
    try:
        with np.errstate(all="ignore"):
            v = F._values(_coords(y), strict=True)
    except (DomainError, DivisionByNearZero) as exc:
        raise OutsideDomain(str(exc)) from exc
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise OutsideDomain("norm value is not positive here")
    return v[()] if np.ndim(v) == 0 else v


def eval_jet(F, y, dirs):
    """Jet of ``t -> F(y + sum_k t_k dirs[k])`` at ``t = 0`` in ``len(dirs)`` variables."""
    y = _check_point(F, y)
    dirs = np.asarray(dirs, dtype=float)
    if dirs.ndim == 1:
        dirs = dirs[None]
    Y = _coords(y)
    k = dirs.shape[-2]
    Yj = []
    for i in range(F.dim):
        slopes = np.moveaxis(dirs[..., i], -1, 0)  # (k, *dir_batch)
        slopes = slopes.reshape(slopes.shape + (1,) * (Y.ndim - slopes.ndim))
        Yj.append(Jet.linear(Y[i], np.broadcast_to(slopes, (k,) + Y.shape[1:])))
    return F._jet(Yj)


def square_jet(F, y):
    """Jet of ``F^2`` in the ``n`` coordinate directions (no domain checks)."""
    Y = _coords(y)
    n = F.dim
    Yj = [Jet.variable(Y[i], i, n) for i in range(n)]
    Fj = F._jet(Yj)
    return Fj * Fj


def tensors(F, y, check=True):
    """``(F, g, C)`` at ``y``: value, fundamental tensor and Cartan torsion."""
    if check:
        value(F, y)
    F2 = square_jet(F, y)
    f2, _, hess, third = jets.derivative_tensors(F2)
    with np.errstate(invalid="ignore"):
        return np.sqrt(f2), 0.5 * hess, 0.25 * third


def fundamental_tensor(F, y, check=True):
    return tensors(F, y, check)[1]


def cartan_torsion(F, y, check=True):
    return tensors(F, y, check)[2]


def _inverse_metric(g):
    cond = np.linalg.cond(g)
    if np.any(~np.isfinite(cond)) or np.any(cond > COND_LIMIT):
        raise SingularMetric(f"fundamental tensor is singular (condition {np.max(cond):.3g})")
    return np.linalg.inv(g)


def mean_cartan(F, y, check=True):
    """Mean Cartan torsion ``I_k = C_ijk g^ij``."""
    _, g, C = tensors(F, y, check)
    return np.einsum("...ijk,...ij->...k", C, _inverse_metric(g))


def angular_metric(F, y, check=True):
    y = np.asarray(y, dtype=float)
    Fv, g, _ = tensors(F, y, check)
    gy = np.einsum("...ij,...j->...i", g, y)
    return g - gy[..., :, None] * gy[..., None, :] / (Fv**2)[..., None, None]


def mean_cartan_norm(F, y, check=True):
    """``sqrt(g^ij I_i I_j)`` -- invariant under homotheties of F."""
    _, g, C = tensors(F, y, check)
    ginv = _inverse_metric(g)
    I = np.einsum("...ijk,...ij->...k", C, ginv)
    return np.sqrt(np.einsum("...i,...ij,...j->...", I, ginv, I))


def dual_norm_sq(F, y, beta):
    """``g_y(beta^#, beta^#)``, the squared g_y-length of a 1-form."""
    g = fundamental_tensor(F, y)
    beta = np.asarray(beta, dtype=float)
    rhs = np.broadcast_to(beta, g.shape[:-1])[..., None]
    try:
        return np.einsum("...i,...i->...", beta, np.linalg.solve(g, rhs)[..., 0])
    except np.linalg.LinAlgError:
        pass
    # some g_y are singular (m-root norms on coordinate planes): infinite there
    flat_g = g.reshape(-1, g.shape[-1], g.shape[-1])
    flat_b = np.broadcast_to(beta, g.shape[:-1]).reshape(len(flat_g), -1)
    out = np.empty(len(flat_g))
    for k, (gk, bk) in enumerate(zip(flat_g, flat_b)):
        if np.linalg.cond(gk) * np.finfo(float).eps >= 1.0:
            out[k] = np.inf
        else:
            out[k] = bk @ np.linalg.solve(gk, bk)
    return out.reshape(g.shape[:-2])
