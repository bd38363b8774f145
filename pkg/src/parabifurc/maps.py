"""Single-variable holomorphic maps that can report Taylor series at any point.

The Koenigs and cohomology solvers work with these rather than with whole
families, so that they can be fed hand-written test maps and family-derived
return maps alike.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .family import AnalyticFamily, iterate_to_jet
from .jets import series_compose


@dataclass
class ComplexMap:
    """A map ``z -> f(z)`` plus ``series(z0, K)``: its Taylor coefficients at ``z0`` to order ``K``."""

    func: Callable
    series: Callable
    dfunc: Optional[Callable] = None
    name: str = "map"

    def __call__(self, z):
        return self.func(z)

    def deriv(self, z):
        if self.dfunc is not None:
            return self.dfunc(z)
        return complex(self.series(complex(z), 1)[1])

    @classmethod
    def polynomial(cls, coeffs, name: str = "poly") -> "ComplexMap":
        """Polynomial with ascending coefficients ``coeffs[k] z**k``."""
        p = np.polynomial.Polynomial(np.asarray(coeffs, dtype=complex))
        dp = p.deriv()

        def series(z0, K):
            out = np.zeros(K + 1, dtype=complex)
            q = p
            fact = 1.0
            for k in range(K + 1):
                out[k] = q(z0) / fact
                q = q.deriv()
                fact *= k + 1
            return out

        return cls(lambda z: p(z), series, lambda z: dp(z), name)

    @classmethod
    def from_family(cls, fam: AnalyticFamily, w, q: int = 1) -> "ComplexMap":
        """The ``q``-th iterate of ``G_w``."""
        w = complex(w)

        def func(z):
            for _ in range(q):
                z = fam.G(w, z)
            return z

        def series(z0, K):
            cur = np.zeros(K + 1, dtype=complex)
            cur[0] = z0
            if K >= 1:
                cur[1] = 1.0
            for _ in range(q):
                outer = fam.raw_jet(w, cur[0], K, 0)[:, 0]
                cur = series_compose(outer, cur)
            return cur

        def dfunc(z):
            d = 1.0 + 0j
            for _ in range(q):
                d *= fam.dG(w, z)
                z = fam.G(w, z)
            return d

        return cls(func, series, dfunc, f"{fam.id}^{q}")

    @classmethod
    def parameter_derivative(cls, fam: AnalyticFamily, w, q: int = 1) -> "ComplexMap":
        """``z -> d/dw G_w^q(z)``, i.e. the transversality quantity Q as a map."""
        w = complex(w)

        def series(z0, K):
            J = iterate_to_jet(fam, w, z0, q, K, 1, capped=False)
            return J.coeffs[:, 1].copy()

        def func(z):
            z = np.asarray(z, dtype=complex)
            flat = [complex(iterate_to_jet(fam, w, zz, q, 0, 1).coeffs[0, 1]) for zz in z.ravel()]
            out = np.array(flat).reshape(z.shape)
            return out if out.ndim else complex(out)

        return cls(func, series, None, f"dw {fam.id}^{q}")

    @classmethod
    def constant(cls, value) -> "ComplexMap":
        return cls.polynomial([value], name="const")

