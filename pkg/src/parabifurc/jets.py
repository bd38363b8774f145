"""Truncated Taylor arithmetic.

Two flavours live here:

* :class:`Jet2` -- bivariate jets ``F(u, v) = sum c[i, j] u**i v**j`` where ``u``
  perturbs the dynamical variable and ``v`` the parameter.  Composition in the
  dynamical variable is what drives every derivative of an iterate.
* plain 1-d coefficient arrays (``series_*`` helpers) for single-variable maps of
  arbitrary order, used by the Koenigs and cohomology solvers.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import OrderError

MAX_KZ = 8
MAX_KW = 2


class Jet2:
    """Bivariate truncated Taylor expansion with coefficients ``c[i, j]``.

    ``c[i, j] = d_z^i d_w^j F / (i! j!)`` at the expansion point.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=complex)
        if c.ndim != 2:
            raise ValueError("Jet2 coefficients must be a 2-d array")
        self.coeffs = c

    @property
    def kz(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def kw(self) -> int:
        return self.coeffs.shape[1] - 1

    @classmethod
    def zeros(cls, kz: int, kw: int) -> "Jet2":
        return cls(np.zeros((kz + 1, kw + 1), dtype=complex))

    @classmethod
    def constant(cls, value, kz: int, kw: int) -> "Jet2":
        j = cls.zeros(kz, kw)
        j.coeffs[0, 0] = value
        return j

    @classmethod
    def identity_z(cls, z0, kz: int, kw: int) -> "Jet2":
        """Jet of ``(u, v) -> z0 + u``."""
        j = cls.constant(z0, kz, kw)
        if kz >= 1:
            j.coeffs[1, 0] = 1.0
        return j

    @classmethod
    def identity_w(cls, w0, kz: int, kw: int) -> "Jet2":
        """Jet of ``(u, v) -> w0 + v``."""
        j = cls.constant(w0, kz, kw)
        if kw >= 1:
            j.coeffs[0, 1] = 1.0
        return j

    @property
    def value(self) -> complex:
        return complex(self.coeffs[0, 0])

    def derivative(self, i: int, j: int = 0) -> complex:
        """Return the actual partial derivative d_z^i d_w^j (not the Taylor coefficient)."""
        return complex(self.coeffs[i, j]) * math.factorial(i) * math.factorial(j)

    def truncate(self, kz: int, kw: int) -> "Jet2":
        return Jet2(self.coeffs[: kz + 1, : kw + 1].copy())

    def copy(self) -> "Jet2":
        return Jet2(self.coeffs.copy())

    def _coerce(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            if other.coeffs.shape != self.coeffs.shape:
                raise ValueError("jet orders differ")
            return other
        return Jet2.constant(other, self.kz, self.kw)

    def __add__(self, other):
        return Jet2(self.coeffs + self._coerce(other).coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        return Jet2(self.coeffs - self._coerce(other).coeffs)

    def __rsub__(self, other):
        return Jet2(self._coerce(other).coeffs - self.coeffs)

    def __neg__(self):
        return Jet2(-self.coeffs)

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.coeffs * other)
        return Jet2(mul2(self.coeffs, self._coerce(other).coeffs))

    __rmul__ = __mul__

    def compose_z(self, inner: "Jet2") -> "Jet2":
        """Return ``self(inner(u, v) - inner(0, 0), v)`` truncated like ``inner``.

        ``self`` must be the jet of the outer map expanded at ``inner.value``,
        with ``inner.kz + inner.kw`` rows for exact mixed coefficients.
        """
        return Jet2(compose2(self.coeffs, inner.coeffs))

    def __repr__(self) -> str:
        return f"Jet2(kz={self.kz}, kw={self.kw}, value={self.value:.6g})"


def mul2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Truncated product of two bivariate coefficient arrays of equal shape."""
    kz, kw = a.shape
    out = np.zeros_like(a, dtype=complex)
    for i in range(kz):
        for j in range(kw):
            aij = a[i, j]
            if aij == 0:
                continue
            out[i:, j:] += aij * b[: kz - i, : kw - j]
    return out


def compose2(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Compose outer(du, v) with du = inner - inner(0,0), truncated to the shape of ``inner``.

    ``du`` may contain pure ``v`` terms, so a power ``du**i`` still reaches
    ``u**a v**b`` with ``a + b >= i``.  Exact rectangular truncation at
    ``(kz, kw)`` therefore needs ``outer`` up to degree ``kz + kw`` in ``du``;
    rows of ``outer`` beyond what is supplied are taken as zero.
    """
    delta = np.array(inner, dtype=complex)
    delta[0, 0] = 0.0
    kz, kw = delta.shape
    n_outer = min(outer.shape[0], kz + kw - 1)
    out = np.zeros((kz, kw), dtype=complex)
    # outer[i, j] * delta**i * v**j
    power = np.zeros((kz, kw), dtype=complex)
    power[0, 0] = 1.0
    for i in range(n_outer):
        if i > 0:
            power = mul2(power, delta)
        for j in range(kw):
            if outer[i, j] != 0:
                out[:, j:] += outer[i, j] * power[:, : kw - j]
    return out


def check_orders(kz: int, kw: int) -> None:
    if kz < 0 or kw < 0 or kz > MAX_KZ or kw > MAX_KW:
        raise OrderError(f"requested jet order (k_z={kz}, k_w={kw}) exceeds cap ({MAX_KZ}, {MAX_KW})")


# ---------------------------------------------------------------------------
# univariate series helpers
# ---------------------------------------------------------------------------

def series_mul(a, b, order: int | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    n = order + 1 if order is not None else min(len(a), len(b))
    return np.convolve(a[:n], b[:n])[:n]


def series_compose(outer, inner) -> np.ndarray:
    """outer(inner(x) - inner(0)) truncated to len(outer)."""
    outer = np.asarray(outer, dtype=complex)
    n = len(outer)
    d = np.zeros(n, dtype=complex)
    m = min(n, len(inner))
    d[:m] = np.asarray(inner, dtype=complex)[:m]
    d[0] = 0.0
    out = np.zeros(n, dtype=complex)
    power = np.zeros(n, dtype=complex)
    power[0] = 1.0
    for i in range(n):
        if i > 0:
            power = np.convolve(power, d)[:n]
        out += outer[i] * power
    return out


def series_reverse(a) -> np.ndarray:
    """Compositional inverse of x -> a1 x + a2 x^2 + ... (constant term ignored)."""
    a = np.asarray(a, dtype=complex)
    n = len(a)
    if a[1] == 0:
        raise ZeroDivisionError("series is not invertible (zero linear term)")
    b = np.zeros(n, dtype=complex)
    b[1] = 1.0 / a[1]
    # solve a(b(x)) = x order by order
    for k in range(2, n):
        comp = series_compose(a[: k + 1] * np.r_[0, np.ones(k)], b[: k + 1])
        b[k] = -comp[k] / a[1]
    return b


def series_eval(a, x):
    """Horner evaluation; ``x`` may be an array."""
    a = np.asarray(a, dtype=complex)
    acc = np.zeros_like(np.asarray(x, dtype=complex)) + a[-1]
    for c in a[-2::-1]:
        acc = acc * x + c
    return acc


def series_deriv(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    return a[1:] * np.arange(1, len(a))


def series_exp(a) -> np.ndarray:
    """exp of a series, via b' = a' b."""
    a = np.asarray(a, dtype=complex)
    n = len(a)
    b = np.zeros(n, dtype=complex)
    b[0] = np.exp(a[0])
    for k in range(1, n):
        s = 0.0 + 0.0j
        for j in range(1, k + 1):
            s += j * a[j] * b[k - j]
        b[k] = s / k
    return b


def series_div(a, b) -> np.ndarray:
    """Quotient ``a / b`` of two series of equal length with ``b[0] != 0``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    n = len(a)
    out = np.zeros(n, dtype=complex)
    for k in range(n):
        # out[j] * b[k - j] summed over j < k
        out[k] = (a[k] - np.dot(out[:k], b[k:0:-1])) / b[0]
    return out
