"""Parameter derivative of the return map, the transversality test, and the
linearization tools (Koenigs coordinates and the cohomological equation)
for attracting fixed points."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cycles import (Cycle, Kind, find_cycle, find_symmetric_cycle, return_map_jet)
from .errors import (DomainError, HypcohViolated, NotHyperbolic, NumericalError,
                     SuperattractingUnsupported)
from .family import AnalyticFamily
from .jets import (series_compose, series_deriv, series_div, series_eval,
                   series_mul, series_reverse)
from .maps import ComplexMap

DEFAULT_TOL = 1e-8


def _pair(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def L_field(fam: AnalyticFamily, z, w=None) -> complex:
    """``d/dw G_w(z)`` at ``w`` (default: the family's base parameter)."""
    z = complex(z)
    if not fam.in_domain(z):
        raise DomainError(f"{fam.id}: z={z} outside the dynamical domain")
    return complex(fam.L(z, fam.c1 if w is None else w))


def Q_terms(fam: AnalyticFamily, w, z, q: int) -> np.ndarray:
    """Summands ``Dg^i(g^{q-i} z) * L(g^{q-i-1} z)`` for ``i = 0..q-1``."""
    w = complex(w)
    orb = [complex(z)]
    for _ in range(q):
        if not fam.in_domain(orb[-1]):
            raise DomainError(f"{fam.id}: orbit of {z} leaves the domain")
        orb.append(complex(fam.G(w, orb[-1])))
    d = [complex(fam.dG(w, x)) for x in orb[:q]]
    terms = np.empty(q, dtype=complex)
    for i in range(q):
        # Dg^i evaluated at g^{q-i}(z) is the product of G' along orb[q-i .. q-1]
        Dgi = np.prod(d[q - i:]) if i else 1.0
        terms[i] = Dgi * fam.L(orb[q - i - 1], w)
    return terms


def Q_of(fam: AnalyticFamily, cyc: Cycle, z=None) -> complex:
    """``Q(z) = d/dw G_w^q(z)`` by the orbit sum (default ``z = a_0``)."""
    return complex(np.sum(Q_terms(fam, cyc.w, cyc.a0 if z is None else z, cyc.q)))


def Qprime(fam: AnalyticFamily, cyc: Cycle) -> complex:
    """``Q'(a_0)`` read off a mixed ``(k_z, k_w) = (2, 1)`` jet of the return map."""
    return complex(return_map_jet(fam, cyc, 2, 1).coeffs[1, 1])


def _d2_scale(fam: AnalyticFamily, cyc: Cycle) -> float:
    """Sum of absolute chain-rule terms of ``D^2 g^q(a_0)``."""
    d = np.abs([fam.dG(cyc.w, x) for x in cyc.points])
    dd = np.abs([2 * fam.raw_jet(cyc.w, x, 2, 0)[2, 0] for x in cyc.points])
    s = 0.0
    for j in range(cyc.q):
        s += dd[j] * np.prod(d[:j]) ** 2 * np.prod(d[j + 1:])
    return float(s)


class Verdict(enum.Enum):
    TRANSVERSAL = "Transversal"
    DEGENERATE = "DegenerateWithinTol"
    INDETERMINATE = "Indeterminate"


@dataclass
class PersistenceProbe:
    radius: float
    n_points: int
    n_failed: int
    max_multiplier_variation: float
    max_point_shift: float
    symmetric: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class TransversalityReport:
    cycle: Cycle
    Q_at_points: list
    Qprime_a0: complex
    D2gq_a0: complex
    T: complex
    kappa_prime: Optional[complex]
    verdict: Verdict
    tol_used: float
    scale: float
    probe: Optional[PersistenceProbe] = None

    def to_dict(self) -> dict:
        return {
            "cycle": self.cycle.to_dict(),
            "Q_at_points": [_pair(v) for v in self.Q_at_points],
            "Qprime_a0": _pair(self.Qprime_a0),
            "D2gq_a0": _pair(self.D2gq_a0),
            "T": _pair(self.T),
            "kappa_prime": None if self.kappa_prime is None else _pair(self.kappa_prime),
            "verdict": self.verdict.value,
            "tol_used": self.tol_used,
            "scale": self.scale,
            "persistence_probe": None if self.probe is None else self.probe.to_dict(),
        }


def _is_symmetric(cyc: Cycle) -> bool:
    if cyc.q % 2:
        return False
    h = cyc.q // 2
    return bool(np.max(np.abs(cyc.points[h:] + cyc.points[:h])) < 1e-8 * max(1.0, np.max(np.abs(cyc.points))))


def persistence_probe(fam: AnalyticFamily, cyc: Cycle, radius: Optional[float] = None,
                      n_points: int = 16) -> PersistenceProbe:
    """Follow the cycle around a small parameter circle and measure how much its multiplier moves."""
    if radius is None:
        radius = 1e-3 * abs(cyc.w) + 1e-6
    sym = fam.odd and _is_symmetric(cyc)
    var, shift, failed = 0.0, 0.0, 0
    for k in range(n_points):
        w = cyc.w + radius * np.exp(2j * math.pi * k / n_points)
        try:
            if sym:
                other = find_symmetric_cycle(fam, w, cyc.q // 2, cyc.points)
            else:
                other = find_cycle(fam, w, cyc.q, cyc.points)
        except NumericalError:
            failed += 1
            continue
        var = max(var, abs(other.multiplier - cyc.multiplier))
        shift = max(shift, float(np.max(np.abs(other.points - cyc.points))))
    return PersistenceProbe(float(radius), n_points, failed, var, shift, bool(sym))


def transversality_report(fam: AnalyticFamily, cyc: Cycle, tol: float = DEFAULT_TOL,
                          probe: bool = True, probe_radius: Optional[float] = None) -> TransversalityReport:
    """Evaluate ``T = D^2g^q(a_0) Q(a_0) - Q'(a_0)(kappa - 1)`` and the derived verdict.

    The degeneracy floor is built from absolute values of the chain-rule and
    orbit-sum terms, so that exact cancellation forced by symmetry is seen as
    degenerate rather than as relative noise.
    """
    if cyc.classification.kind is Kind.SUPERATTRACTING:
        raise SuperattractingUnsupported(f"multiplier {cyc.multiplier} is (numerically) zero")
    kappa = cyc.multiplier
    J = return_map_jet(fam, cyc, 2, 1)
    D2 = complex(2 * J.coeffs[2, 0])
    Qp = complex(J.coeffs[1, 1])
    Qs = [complex(np.sum(Q_terms(fam, cyc.w, a, cyc.q))) for a in cyc.points]
    Q0 = Qs[0]
    T = D2 * Q0 - Qp * (kappa - 1)
    q_scale = float(np.sum(np.abs(Q_terms(fam, cyc.w, cyc.a0, cyc.q))))
    floor = _d2_scale(fam, cyc) * q_scale
    scale = max(abs(D2 * Q0), abs(Qp * (kappa - 1)), floor)
    kp = None if abs(kappa - 1) < tol else T / (1 - kappa)
    if not (np.isfinite(abs(T)) and cyc.residual <= 1e-6 * max(1.0, np.max(np.abs(cyc.points)))):
        verdict = Verdict.INDETERMINATE
    elif abs(T) > tol * scale:
        verdict = Verdict.TRANSVERSAL
    else:
        verdict = Verdict.DEGENERATE
    rep = TransversalityReport(cyc, Qs, Qp, D2, T, kp, verdict, tol, scale)
    if probe and verdict is Verdict.DEGENERATE:
        rep.probe = persistence_probe(fam, cyc, probe_radius)
    return rep


# --- Koenigs linearization -------------------------------------------------

def _as_map(f) -> ComplexMap:
    if isinstance(f, ComplexMap):
        return f
    if callable(f):
        raise DomainError("plain callables carry no Taylor data; wrap them in ComplexMap")
    return ComplexMap.constant(complex(f))


def _series_radius(coeffs, target: float = 1e-17, cap: float = np.inf) -> float:
    """Largest radius where the top quarter of the series stays below ``target``."""
    K = len(coeffs) - 1
    r = cap
    for k in range(max(2, 3 * K // 4), K + 1):
        a = abs(coeffs[k])
        if a > 0:
            r = min(r, (target / a) ** (1.0 / k))
    return float(r)


@dataclass
class KoenigsLinearizer:
    """``phi`` with ``phi(fixed) = 0``, ``phi'(fixed) = 1`` and ``phi o f = kappa phi``."""

    f: ComplexMap
    fixed: complex
    kappa: complex
    coeffs: np.ndarray
    series_radius: float
    iterations: int
    max_pullback: int = 10000

    def _pull(self, z):
        """Forward iterates until inside the series disk; returns (point, n, product of f')."""
        z = complex(z)
        d = 1.0 + 0j
        for n in range(self.max_pullback):
            if abs(z - self.fixed) <= self.series_radius:
                return z, n, d
            d *= self.f.deriv(z)
            z = complex(self.f(z))
            if not np.isfinite(abs(z)):
                break
        raise NotHyperbolic(f"point did not enter the linearization disk (started near {z})")

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.shape, dtype=complex)
        for i, zz in np.ndenumerate(z):
            y, n, _ = self._pull(zz)
            out[i] = series_eval(self.coeffs, y - self.fixed) / self.kappa ** n
        return out if out.ndim else complex(out)

    def deriv(self, z):
        dc = series_deriv(self.coeffs)
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.shape, dtype=complex)
        for i, zz in np.ndenumerate(z):
            y, n, d = self._pull(zz)
            out[i] = series_eval(dc, y - self.fixed) * d / self.kappa ** n
        return out if out.ndim else complex(out)

    def second_derivative_at_fixed(self) -> complex:
        return complex(2 * self.coeffs[2])

    def residual(self, radius: float, n: int = 64) -> float:
        z = _disk_samples(self.fixed, radius, n)
        return float(np.max(np.abs(self(self.f(z)) - self.kappa * self(z))))


def _disk_samples(center, radius: float, n: int) -> np.ndarray:
    """Boundary circle plus a few interior rings."""
    t = 2 * np.pi * np.arange(n) / n
    rings = [radius, 0.75 * radius, 0.5 * radius, 0.25 * radius]
    return np.concatenate([center + r * np.exp(1j * (t + 0.1 * k)) for k, r in enumerate(rings)])


def koenigs(f, fixed=0.0, radius: float = 0.1, order: int = 40, max_iter: int = 5000,
            rtol: float = 1e-17) -> KoenigsLinearizer:
    """Koenigs coordinate of an attracting, non-superattracting fixed point.

    Taylor coefficients come from the normalized iterates ``kappa^-n (f^n - fixed)``,
    advanced as ``phi_{n+1} = phi_n + sum_m a_m kappa^(n(m-1)-1) phi_n^m`` and
    stopped once a step no longer changes any coefficient.
    """
    f = _as_map(f)
    fixed = complex(fixed)
    a = np.asarray(f.series(fixed, order), dtype=complex)
    if abs(a[0] - fixed) > 1e-10 * max(1.0, abs(fixed)):
        raise DomainError(f"f({fixed}) = {a[0]} is not the fixed point")
    kappa = complex(a[1])
    if not (0 < abs(kappa) < 1):
        raise NotHyperbolic(f"multiplier {kappa} is not in the punctured unit disk")
    phi = np.zeros(order + 1, dtype=complex)
    phi[1] = 1.0
    n_used = max_iter
    for n in range(max_iter):
        delta = np.zeros(order + 1, dtype=complex)
        power = phi.copy()
        for m in range(2, order + 1):
            power = series_mul(power, phi)
            if a[m] == 0:
                continue
            scale = a[m] * kappa ** (n * (m - 1) - 1)
            if scale == 0:
                break
            delta += scale * power
        phi = phi + delta
        if np.all(np.abs(delta) <= rtol * np.maximum(np.abs(phi), 1e-300)):
            n_used = n + 1
            break
    r_s = _series_radius(phi, cap=radius)
    return KoenigsLinearizer(f, fixed, kappa, phi, r_s, n_used)


def koenigs_coefficients_direct(a, order: Optional[int] = None) -> np.ndarray:
    """Koenigs coefficients by solving ``phi(f) = kappa phi`` degree by degree.

    ``a`` is the Taylor series of ``f`` at its fixed point (constant term ignored).
    Kept as an independent cross-check of :func:`koenigs`.
    """
    a = np.asarray(a, dtype=complex).copy()
    a[0] = 0
    K = len(a) - 1 if order is None else order
    kappa = a[1]
    phi = np.zeros(K + 1, dtype=complex)
    phi[1] = 1.0
    for m in range(2, K + 1):
        comp = series_compose(phi[: m + 1] * (np.arange(m + 1) < m), a[: m + 1])
        phi[m] = comp[m] / (kappa - kappa ** m)
    return phi


# --- cohomological equation ------------------------------------------------

@dataclass
class CohomologySolution:
    """Solution ``w`` of ``w(f(z)) = Gamma(z) + f'(z) w(z)`` near an attracting fixed point."""

    f: ComplexMap
    gamma: ComplexMap
    lin: KoenigsLinearizer
    coeffs: np.ndarray
    series_radius: float
    k: complex
    hypcoh_residual: float

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.shape, dtype=complex)
        for i, zz in np.ndenumerate(z):
            out[i] = _pullback_eval(self.f, self.gamma, self.coeffs, self.lin.fixed,
                                    self.series_radius, complex(zz))
        return out if out.ndim else complex(out)

    def residual(self, radius: float, n: int = 64) -> float:
        z = _disk_samples(self.lin.fixed, radius, n)
        fz = self.f(z)
        dfz = np.array([self.f.deriv(x) for x in z])
        return float(np.max(np.abs(self(fz) - self.gamma(z) - dfz * self(z))))


def _pullback_eval(f, gamma, coeffs, fixed, r_s, z, max_steps: int = 10000) -> complex:
    """Evaluate by the series near ``fixed`` and ``w(z) = (w(f z) - Gamma(z)) / f'(z)`` elsewhere."""
    path = []
    for _ in range(max_steps):
        if abs(z - fixed) <= r_s:
            break
        path.append(z)
        z = complex(f(z))
    else:
        raise NotHyperbolic("orbit did not approach the fixed point")
    val = complex(series_eval(coeffs, z - fixed))
    for x in reversed(path):
        val = (val - complex(gamma(x))) / complex(f.deriv(x))
    return val


def hypcoh_residual(f, gamma, fixed=0.0) -> tuple:
    """``(|Gamma(0) f''(0) - Gamma'(0)(f'(0) - 1)|, scale)`` at the fixed point."""
    a = f.series(complex(fixed), 2)
    g = gamma.series(complex(fixed), 1)
    t1 = g[0] * 2 * a[2]
    t2 = g[1] * (a[1] - 1)
    return abs(t1 - t2), max(1.0, abs(t1), abs(t2))


def solve_cohomology(f, gamma, anchor=None, value=None, radius: float = 0.1, fixed=0.0,
                     order: int = 40, hyp_tol: float = 1e-10) -> CohomologySolution:
    """Holomorphic solution of ``w(f(z)) = Gamma(z) + f'(z) w(z)`` with ``w(anchor) = value``.

    In the Koenigs coordinate ``zeta`` the equation becomes
    ``W(kappa zeta) = Gamma~(zeta) + kappa W(zeta)``, solved coefficientwise by
    ``W_m = gamma_m / (kappa^m - kappa)``.  The linear coefficient is free
    (it spans the homogeneous solutions ``phi / phi'``) and is fixed by the anchor;
    without an anchor it is set to zero.
    """
    f = _as_map(f)
    gamma = _as_map(gamma)
    fixed = complex(fixed)
    res, sc = hypcoh_residual(f, gamma, fixed)
    if res > hyp_tol * sc:
        raise HypcohViolated(f"Gamma(0) f''(0) - Gamma'(0)(kappa - 1) = {res:.3g} is not zero")
    lin = koenigs(f, fixed, radius, order)
    kappa = lin.kappa
    phi = lin.coeffs
    psi = series_reverse(phi)
    g_ser = np.asarray(gamma.series(fixed, order), dtype=complex)
    gamma_psi = series_compose(g_ser, psi)
    psi_kappa = psi * kappa ** np.arange(order + 1)  # f(psi(zeta)) - fixed = psi(kappa zeta)
    dphi = np.r_[series_deriv(phi), 0]
    g_tilde = series_mul(gamma_psi, series_compose(dphi, psi_kappa))
    W = np.zeros(order + 1, dtype=complex)
    W[0] = g_tilde[0] / (1 - kappa)
    for m in range(2, order + 1):
        W[m] = g_tilde[m] / (kappa ** m - kappa)
    # back to z: w = W(phi) / phi', and the homogeneous part h = phi / phi'
    w0 = series_div(series_compose(W, phi), dphi)
    h = series_div(phi, dphi)
    r_s = min(_series_radius(w0, 1e-17 * max(1.0, np.max(np.abs(w0))), radius),
              _series_radius(h, 1e-17, radius), lin.series_radius)
    k = 0j
    if anchor is not None:
        anchor = complex(anchor)
        zero = ComplexMap.constant(0.0)
        h_a = _pullback_eval(f, zero, h, fixed, r_s, anchor)
        w_a = _pullback_eval(f, gamma, w0, fixed, r_s, anchor)
        if abs(h_a) < 1e-14:
            if abs(complex(value) - w_a) > 1e-10 * max(1.0, abs(w_a)):
                raise DomainError("anchor at the fixed point must carry Gamma(0)/(1-kappa)")
        else:
            k = (complex(value) - w_a) / h_a
    coeffs = w0 + k * h
    return CohomologySolution(f, gamma, lin, coeffs, r_s, k, res)
