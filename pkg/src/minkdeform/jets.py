"""Truncated multivariate Taylor polynomials (jets) of total degree 3.

A :class:`Jet` stores the coefficients of a polynomial in ``k`` infinitesimal
variables ``e1..ek``, dropping every monomial of total degree above 3.  The
coefficient array may carry leading batch axes, so one jet can represent the
expansions at many base points at once; the coefficient axis is always last.

Coefficients are ordered graded-lexicographically::

    1, e1, e2, ..., e1^2, e1 e2, ..., ek^3

Evaluating a smooth function on jets seeded with ``x + t`` yields its Taylor
coefficients, so mixed partials up to third order come out exactly (up to
rounding) without finite differences.
"""

from functools import lru_cache
from itertools import combinations_with_replacement
from math import factorial

import numpy as np

from .errors import DivisionByNearZero, DomainError

DEGREE = 3
NEAR_ZERO = 1e-14


class _Layout:
    """Index tables for one variable count."""

    def __init__(self, k):
        monos = []
        for d in range(DEGREE + 1):
            for combo in combinations_with_replacement(range(k), d):
                m = [0] * k
                for v in combo:
                    m[v] += 1
                monos.append(tuple(m))
        self.k = k
        self.monomials = monos
        self.size = len(monos)
        self.index = {m: i for i, m in enumerate(monos)}
        self.degrees = np.array([sum(m) for m in monos])
        self.factorials = np.array(
            [np.prod([factorial(e) for e in m]) for m in monos], dtype=float)

        rows_i, rows_j, targets = [], [], []
        for i, a in enumerate(monos):
            for j, b in enumerate(monos):
                if sum(a) + sum(b) <= DEGREE:
                    rows_i.append(i)
                    rows_j.append(j)
                    targets.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self.mul_i = np.array(rows_i)
        self.mul_j = np.array(rows_j)
        scatter = np.zeros((len(targets), self.size))
        scatter[np.arange(len(targets)), targets] = 1.0
        self.scatter = scatter

        def pos(*vs):
            m = [0] * k
            for v in vs:
                m[v] += 1
            return self.index[tuple(m)]

        r = range(k)
        self.grad_idx = np.array([pos(i) for i in r])
        self.hess_idx = np.array([[pos(i, j) for j in r] for i in r])
        self.third_idx = np.array([[[pos(i, j, m) for m in r] for j in r] for i in r])


@lru_cache(maxsize=None)
def layout(k):
    if k < 1:
        raise ValueError("a jet needs at least one variable")
    return _Layout(k)


def _as_scalar(x):
    return np.asarray(x, dtype=float)


class Jet:
    """Truncated Taylor polynomial with optional batch axes."""

    __slots__ = ("coeffs", "nvars")
    __array_priority__ = 100

    def __init__(self, coeffs, nvars):
        coeffs = np.asarray(coeffs, dtype=float)
        lay = layout(nvars)
        if coeffs.shape[-1:] != (lay.size,):
            raise ValueError(
                f"expected {lay.size} coefficients for {nvars} variables, "
                f"got shape {coeffs.shape}")
        self.coeffs = coeffs
        self.nvars = nvars

    # construction ---------------------------------------------------------

    @classmethod
    def constant(cls, value, nvars):
        value = _as_scalar(value)
        c = np.zeros(value.shape + (layout(nvars).size,))
        c[..., 0] = value
        return cls(c, nvars)

    @classmethod
    def variable(cls, value, index, nvars, scale=1.0):
        """Jet of ``value + scale * e_index`` (index is 0-based)."""
        jet = cls.constant(value, nvars)
        jet.coeffs[..., 1 + index] = scale
        return jet

    @classmethod
    def linear(cls, value, slopes):
        """Jet of ``value + sum_k slopes[k] e_k``; ``slopes`` has shape (k, *batch)."""
        slopes = _as_scalar(slopes)
        k = slopes.shape[0]
        value = _as_scalar(value)
        shape = np.broadcast_shapes(value.shape, slopes.shape[1:])
        c = np.zeros(shape + (layout(k).size,))
        c[..., 0] = value
        for v in range(k):
            c[..., 1 + v] = slopes[v]
        return cls(c, k)

    # inspection -----------------------------------------------------------

    @property
    def const(self):
        return self.coeffs[..., 0]

    @property
    def batch_shape(self):
        return self.coeffs.shape[:-1]

    def coeff(self, idx):
        return self.coeffs[..., layout(self.nvars).index[tuple(idx)]]

    def __repr__(self):
        return f"Jet(nvars={self.nvars}, coeffs={self.coeffs!r})"

    # ring operations ------------------------------------------------------

    def _lift(self, other):
        if isinstance(other, Jet):
            if other.nvars != self.nvars:
                raise ValueError("jets with different variable counts")
            return other
        return Jet.constant(other, self.nvars)

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.coeffs + self._lift(other).coeffs, self.nvars)
        other = _as_scalar(other)
        shape = np.broadcast_shapes(self.batch_shape, other.shape)
        c = np.broadcast_to(self.coeffs, shape + self.coeffs.shape[-1:]).copy()
        c[..., 0] += other
        return Jet(c, self.nvars)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs, self.nvars)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.coeffs * _as_scalar(other)[..., None], self.nvars)
        other = self._lift(other)
        lay = layout(self.nvars)
        prod = self.coeffs[..., lay.mul_i] * other.coeffs[..., lay.mul_j]
        return Jet(prod @ lay.scatter, self.nvars)

    __rmul__ = __mul__

    def reciprocal(self):
        return _compose(self, _recip_derivs(self.const))

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        other = _as_scalar(other)
        if np.any(np.abs(other) < NEAR_ZERO):
            raise DivisionByNearZero("division by a scalar below 1e-14")
        return Jet(self.coeffs / other[..., None], self.nvars)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, r):
        return power(self, r)


def _compose(a, derivs):
    """f(a) from f and its first three derivatives at const(a)."""
    f0, f1, f2, f3 = derivs
    h = Jet(a.coeffs.copy(), a.nvars)
    h.coeffs[..., 0] = 0.0
    h2 = h * h
    h3 = h2 * h
    out = h * f1 + h2 * (f2 / 2.0) + h3 * (f3 / 6.0)
    out.coeffs[..., 0] = f0
    return out


def _recip_derivs(c):
    if np.any(np.abs(c) < NEAR_ZERO):
        raise DivisionByNearZero("jet constant term below 1e-14 in division")
    inv = 1.0 / c
    return inv, -inv**2, 2.0 * inv**3, -6.0 * inv**4


def _require_positive(c, name):
    if np.any(c <= 0.0) or np.any(~np.isfinite(c)):
        raise DomainError(f"{name} needs a positive constant term")


def sqrt(a):
    c = a.const
    _require_positive(c, "sqrt")
    r = np.sqrt(c)
    return _compose(a, (r, 0.5 / r, -0.25 / (r * c), 0.375 / (r * c * c)))


def exp(a):
    e = np.exp(a.const)
    return _compose(a, (e, e, e, e))


def log(a):
    c = a.const
    _require_positive(c, "log")
    inv = 1.0 / c
    return _compose(a, (np.log(c), inv, -inv**2, 2.0 * inv**3))


def integer_power(a, k):
    """a**k by repeated squaring; negative k goes through one reciprocal."""
    k = int(k)
    if k < 0:
        return integer_power(a, -k).reciprocal()
    result = None
    base = a
    while k:
        if k & 1:
            result = base if result is None else result * base
        k >>= 1
        if k:
            base = base * base
    if result is None:
        return Jet.constant(np.ones(a.batch_shape), a.nvars)
    return result


def power(a, r):
    """a**r; integral r is exact, otherwise the base must be positive."""
    r = float(r)
    if r.is_integer():
        return integer_power(a, int(r))
    c = a.const
    _require_positive(c, "non-integer power")
    p0 = c**r
    return _compose(a, (p0, r * p0 / c, r * (r - 1) * p0 / c**2,
                        r * (r - 1) * (r - 2) * p0 / c**3))


_ELEMENTARY = {"sqrt": sqrt, "exp": exp, "log": log,
               "recip": lambda a: a.reciprocal()}

_RING = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "neg": lambda a, b: -a,
    "scale": lambda a, b: a * b,
}


def jet_ring(a, b, op):
    """Functional form of the ring operations; ``b`` is a scalar for scale, ignored for neg."""
    try:
        fn = _RING[op]
    except KeyError:
        raise ValueError(f"unknown ring op {op!r}") from None
    if op == "scale" and isinstance(b, Jet):
        raise TypeError("scale takes a scalar factor")
    return fn(a, b)


def jet_elem(f, a, r=None):
    if f == "pow":
        return power(a, r)
    try:
        return _ELEMENTARY[f](a)
    except KeyError:
        raise ValueError(f"unknown elementary function {f!r}") from None


def extract_partial(a, idx):
    """Mixed partial derivative ``d^|idx| / de^idx`` at the expansion point."""
    idx = tuple(int(i) for i in idx)
    if sum(idx) > DEGREE:
        raise ValueError("jets carry derivatives up to order 3 only")
    lay = layout(a.nvars)
    pos = lay.index[idx]
    return a.coeffs[..., pos] * lay.factorials[pos]


def derivative_tensors(a):
    """Value, gradient, Hessian and third-derivative tensor of a jet.

    Batch axes lead; the derivative axes trail, e.g. the Hessian has shape
    ``batch + (k, k)``.
    """
    lay = layout(a.nvars)
    full = a.coeffs * lay.factorials
    return (full[..., 0], full[..., lay.grad_idx], full[..., lay.hess_idx],
            full[..., lay.third_idx])
