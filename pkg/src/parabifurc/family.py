"""Analytic one-parameter families ``(w, z) -> G_w(z)`` and the builtin registry.

Every builtin supplies closed-form Taylor coefficients of its base map ``f``;
the parameter enters either additively (``f(z) + w``) or multiplicatively
(``w * f(z)``).  Derivatives of iterates are obtained by composing these jets,
never by finite differences.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import jets
from .errors import DomainError, EscapeError
from .jets import Jet2

DEFAULT_ESCAPE_RADIUS = 1e8


class Form(enum.Enum):
    ADDITIVE = "Additive"
    MULTIPLICATIVE = "Multiplicative"
    CUSTOM = "Custom"


@dataclass(frozen=True)
class Region:
    """Open region of the complex plane.

    kinds: ``disk``, ``punctured_disk``, ``rectangle``, ``half_plane``, ``plane``
    and ``real_interval`` (an open interval of the real axis, for maps that are
    only defined on the line).
    """

    kind: str
    center: complex = 0j
    radius: float = math.inf
    bounds: tuple = ()
    angle: float = 0.0
    offset: float = 0.0

    @classmethod
    def disk(cls, center, radius):
        return cls("disk", center=complex(center), radius=float(radius))

    @classmethod
    def punctured_disk(cls, center, radius):
        return cls("punctured_disk", center=complex(center), radius=float(radius))

    @classmethod
    def rectangle(cls, xmin, xmax, ymin, ymax):
        return cls("rectangle", bounds=(float(xmin), float(xmax), float(ymin), float(ymax)))

    @classmethod
    def half_plane(cls, angle=0.0, offset=0.0):
        """``{z : Re(z * exp(-i angle)) > offset}``."""
        return cls("half_plane", angle=float(angle), offset=float(offset))

    @classmethod
    def plane(cls):
        return cls("plane")

    @classmethod
    def real_interval(cls, lo=-math.inf, hi=math.inf):
        return cls("real_interval", bounds=(float(lo), float(hi)))

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        k = self.kind
        if k == "plane":
            out = np.isfinite(z)
        elif k == "disk":
            out = np.abs(z - self.center) < self.radius
        elif k == "punctured_disk":
            d = np.abs(z - self.center)
            out = (d < self.radius) & (d > 0)
        elif k == "rectangle":
            x0, x1, y0, y1 = self.bounds
            out = (z.real > x0) & (z.real < x1) & (z.imag > y0) & (z.imag < y1)
        elif k == "half_plane":
            out = (z * cmath.exp(-1j * self.angle)).real > self.offset
        elif k == "real_interval":
            lo, hi = self.bounds
            out = (z.imag == 0) & (z.real > lo) & (z.real < hi)
        else:
            raise ValueError(f"unknown region kind {k!r}")
        return bool(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("disk", "punctured_disk"):
            d.update(center=[self.center.real, self.center.imag], radius=self.radius)
        elif self.kind in ("rectangle", "real_interval"):
            d["bounds"] = list(self.bounds)
        elif self.kind == "half_plane":
            d.update(angle=self.angle, offset=self.offset)
        return d


# --- closed-form Taylor coefficients of base maps, any order ----------------

def _power_coeffs(d: int) -> Callable:
    def coeffs(z, k):
        out = np.zeros(k + 1, dtype=complex)
        for i in range(min(k, d) + 1):
            out[i] = math.comb(d, i) * z ** (d - i)
        return out
    return coeffs


def _logistic_coeffs(z, k):
    out = np.zeros(k + 1, dtype=complex)
    out[0] = z - z * z
    if k >= 1:
        out[1] = 1 - 2 * z
    if k >= 2:
        out[2] = -1
    return out


def _sin_coeffs(z, k):
    s, c = cmath.sin(z), cmath.cos(z)
    cyc = (s, c, -s, -c)
    return np.array([cyc[i % 4] / math.factorial(i) for i in range(k + 1)], dtype=complex)


def _sin2_coeffs(z, k):
    s2, c2 = cmath.sin(2 * z), cmath.cos(2 * z)
    dcos = (c2, -s2, -c2, s2)  # i-th derivative of cos(x) at 2z
    out = np.empty(k + 1, dtype=complex)
    out[0] = cmath.sin(z) ** 2
    for i in range(1, k + 1):
        out[i] = -(2.0 ** (i - 1)) * dcos[i % 4] / math.factorial(i)
    return out


def _expexp_coeffs(z, k):
    e1, e2 = cmath.exp(z), cmath.exp(2 * z)
    return np.array([(e1 - 2.0 ** i * e2) / math.factorial(i) for i in range(k + 1)], dtype=complex)


def _flat_coeffs(b: float, ell: float) -> Callable:
    # b * exp(-|x|^-ell) on the real line; every derivative vanishes at 0
    def coeffs(z, k):
        x = complex(z).real
        out = np.zeros(k + 1, dtype=complex)
        if x == 0.0:
            return out
        sgn = 1.0 if x > 0 else -1.0
        ax = abs(x)
        # series of -(ax + sgn*u)^(-ell) in u
        inner = np.array([-_gbinom(-ell, i) * ax ** (-ell - i) * sgn ** i for i in range(k + 1)],
                         dtype=complex)
        return b * jets.series_exp(inner)
    return coeffs


def _gbinom(a: float, i: int) -> float:
    out = 1.0
    for j in range(i):
        out *= (a - j) / (j + 1)
    return out


# --- the family object ------------------------------------------------------

@dataclass(frozen=True)
class AnalyticFamily:
    """A holomorphic deformation ``(w, z) -> G_w(z)``.

    ``c1`` is the base parameter.  The marked point of ``G_w`` is ``G_w`` of the
    critical point when one is declared (so it equals ``w`` for ``f + w`` with
    ``f(0) = 0`` and for ``w * f`` normalised by ``f(c) = 1``), otherwise ``w``.
    """

    id: str
    form: Form
    base_coeffs: Optional[Callable] = None
    custom_jet: Optional[Callable] = None
    func: Optional[Callable] = None
    dfunc: Optional[Callable] = None
    c1: complex = 0j
    critical_point: Optional[complex] = None
    dyn_domain: Region = field(default_factory=Region.plane)
    param_domain: Region = field(default_factory=Region.plane)
    real_symmetric: bool = False
    odd: bool = False
    escape_radius: float = DEFAULT_ESCAPE_RADIUS
    params: dict = field(default_factory=dict)
    class_domains: Optional[tuple] = None

    # -- evaluation --------------------------------------------------------

    def G(self, w, z):
        """Vectorised map value."""
        if self.func is not None:
            return self.func(w, z)
        return _vectorize(lambda ww, zz: self.raw_jet(ww, zz, 0, 0)[0, 0], w, z)

    def dG(self, w, z):
        """Vectorised dz G_w(z)."""
        if self.dfunc is not None:
            return self.dfunc(w, z)
        return _vectorize(lambda ww, zz: self.raw_jet(ww, zz, 1, 0)[1, 0], w, z)

    def raw_jet(self, w, z, kz: int, kw: int) -> np.ndarray:
        """Taylor coefficients without order cap or domain checks."""
        w = complex(w)
        z = complex(z)
        if self.form is Form.CUSTOM:
            c = np.asarray(self.custom_jet(w, z, kz, kw), dtype=complex)
            return c[: kz + 1, : kw + 1]
        f = self.base_coeffs(z, kz)
        out = np.zeros((kz + 1, kw + 1), dtype=complex)
        if self.form is Form.ADDITIVE:
            out[:, 0] = f
            out[0, 0] += w
            if kw >= 1:
                out[0, 1] = 1.0
        else:
            out[:, 0] = w * f
            if kw >= 1:
                out[:, 1] = f
        return out

    def jet(self, w, z, kz: int, kw: int = 0) -> Jet2:
        return eval_jet(self, w, z, kz, kw)

    def L(self, z, w=None):
        """Parameter derivative dw G_w(z) at ``w`` (default ``c1``)."""
        w = self.c1 if w is None else w
        if self.form is Form.ADDITIVE:
            return np.ones_like(np.asarray(z, dtype=complex)) if np.ndim(z) else 1.0 + 0j
        if self.form is Form.MULTIPLICATIVE and self.func is not None and w != 0:
            return self.func(w, z) / w
        return _vectorize(lambda ww, zz: self.raw_jet(ww, zz, 0, 1)[0, 1], w, z)

    def marked_point(self, w=None) -> complex:
        w = self.c1 if w is None else w
        if self.critical_point is None:
            return complex(w)
        return complex(self.G(w, self.critical_point))

    def in_domain(self, z) -> bool:
        z = complex(z)
        return bool(self.dyn_domain.contains(z)) and abs(z) <= self.escape_radius

    def with_c1(self, c1) -> "AnalyticFamily":
        from dataclasses import replace
        return replace(self, c1=complex(c1))

    def describe(self) -> dict:
        return {
            "id": self.id,
            "form": self.form.value,
            "c1": [self.c1.real, self.c1.imag],
            "params": {k: v for k, v in sorted(self.params.items())},
            "dyn_domain": self.dyn_domain.to_dict(),
            "param_domain": self.param_domain.to_dict(),
            "real_symmetric": self.real_symmetric,
            "odd": self.odd,
        }


def _vectorize(fn, w, z):
    if np.ndim(z) == 0 and np.ndim(w) == 0:
        return complex(fn(w, z))
    ww, zz = np.broadcast_arrays(np.asarray(w, dtype=complex), np.asarray(z, dtype=complex))
    out = np.empty(zz.shape, dtype=complex)
    for idx in np.ndindex(zz.shape):
        out[idx] = fn(ww[idx], zz[idx])
    return out


def eval_jet(fam: AnalyticFamily, w, z, kz: int, kw: int = 0) -> Jet2:
    """Taylor coefficients of ``(u, v) -> G_{w+v}(z+u)`` at the origin."""
    jets.check_orders(kz, kw)
    if not fam.dyn_domain.contains(complex(z)):
        raise DomainError(f"{fam.id}: z={z} outside dynamical domain")
    if not fam.param_domain.contains(complex(w)):
        raise DomainError(f"{fam.id}: w={w} outside parameter domain")
    return Jet2(fam.raw_jet(w, z, kz, kw))


def orbit(fam: AnalyticFamily, w, z0, n: int) -> np.ndarray:
    """``[z0, G_w(z0), ..., G_w^(n-1)(z0)]``; raises EscapeError on leaving U."""
    if n < 1:
        raise DomainError("orbit length must be >= 1")
    out = np.empty(n, dtype=complex)
    z = complex(z0)
    for i in range(n):
        if not fam.in_domain(z) or not cmath.isfinite(z):
            raise EscapeError(f"{fam.id}: iterate {i} = {z} left the domain", out[:i])
        out[i] = z
        if i + 1 < n:
            z = complex(fam.G(w, z))
    return out


def iterate_to_jet(fam: AnalyticFamily, w, z0, n: int, kz: int, kw: int = 0,
                   start: Optional[Jet2] = None, capped: bool = True) -> Jet2:
    """Jet of ``(u, v) -> G_{w+v}^n(start(u, v))`` (default start: ``z0 + u``)."""
    if capped:
        jets.check_orders(kz, kw)
    cur = Jet2.identity_z(z0, kz, kw) if start is None else start
    for _ in range(n):
        outer = Jet2(fam.raw_jet(w, cur.value, kz + kw, kw))
        cur = outer.compose_z(cur)
    return cur


# --- builtin registry -------------------------------------------------------

def quadratic_like(d: int = 2, c: complex = 0.0, bailout: float = DEFAULT_ESCAPE_RADIUS) -> AnalyticFamily:
    d = int(d)
    if d < 2:
        raise DomainError("degree must be >= 2")
    R = 8.0
    return AnalyticFamily(
        id="quad" if d == 2 else f"power{d}",
        form=Form.ADDITIVE,
        base_coeffs=_power_coeffs(d),
        func=lambda w, z: z ** d + w,
        dfunc=lambda w, z: d * z ** (d - 1),
        c1=complex(c),
        critical_point=0j,
        real_symmetric=True,
        escape_radius=bailout,
        params={"d": d, "c": complex(c)},
        class_domains=("F", Region.disk(0, R ** (1.0 / d)), Region.disk(0, R)),
    )


def logistic(w: complex = 2.5) -> AnalyticFamily:
    return AnalyticFamily(
        id="logistic",
        form=Form.MULTIPLICATIVE,
        base_coeffs=_logistic_coeffs,
        func=lambda w, z: w * z * (1 - z),
        dfunc=lambda w, z: w * (1 - 2 * z),
        c1=complex(w),
        critical_point=0.5 + 0j,
        param_domain=Region.punctured_disk(0, math.inf),
        real_symmetric=True,
        params={"w": complex(w)},
        class_domains=("E", Region.plane(), Region.plane()),
    )


def _csin(z):
    return np.sin(z) if np.ndim(z) else cmath.sin(z)


def _ccos(z):
    return np.cos(z) if np.ndim(z) else cmath.cos(z)


def _cexp(z):
    return np.exp(z) if np.ndim(z) else cmath.exp(z)


def sine_mult(w: complex = 2.0) -> AnalyticFamily:
    return AnalyticFamily(
        id="sine-mult",
        form=Form.MULTIPLICATIVE,
        base_coeffs=_sin_coeffs,
        func=lambda w, z: w * _csin(z),
        dfunc=lambda w, z: w * _ccos(z),
        c1=complex(w),
        critical_point=complex(math.pi / 2),
        param_domain=Region.punctured_disk(0, math.inf),
        real_symmetric=True,
        odd=True,
        escape_radius=1e3,
        params={"w": complex(w)},
        class_domains=("E_o", Region.plane(), Region.plane()),
    )


def sine2_mult(w: complex = 2.0) -> AnalyticFamily:
    return AnalyticFamily(
        id="sine2-mult",
        form=Form.MULTIPLICATIVE,
        base_coeffs=_sin2_coeffs,
        func=lambda w, z: w * _csin(z) ** 2,
        dfunc=lambda w, z: w * _csin(2 * z),
        c1=complex(w),
        critical_point=complex(math.pi / 2),
        param_domain=Region.punctured_disk(0, math.inf),
        real_symmetric=True,
        escape_radius=1e3,
        params={"w": complex(w)},
        class_domains=("E", Region.plane(), Region.plane()),
    )


def expexp_mult(w: complex = 2.0) -> AnalyticFamily:
    return AnalyticFamily(
        id="expexp-mult",
        form=Form.MULTIPLICATIVE,
        base_coeffs=_expexp_coeffs,
        func=lambda w, z: w * _cexp(z) * (1 - _cexp(z)),
        dfunc=lambda w, z: w * (_cexp(z) - 2 * _cexp(2 * z)),
        c1=complex(w),
        critical_point=complex(-math.log(2.0)),
        param_domain=Region.punctured_disk(0, math.inf),
        real_symmetric=True,
        escape_radius=50.0,
        params={"w": complex(w)},
        class_domains=("E", Region.plane(), Region.plane()),
    )


def flat_additive(b: float = 4.0, ell: float = 1.0, c: float = -1.0) -> AnalyticFamily:
    b = float(b)
    ell = float(ell)
    if ell < 1:
        raise DomainError("ell must be >= 1")

    def func(w, z):
        x = np.real(z)
        ax = np.abs(x)
        with np.errstate(divide="ignore", over="ignore"):
            val = np.where(ax > 0, b * np.exp(-np.power(np.where(ax > 0, ax, 1.0), -ell)), 0.0)
        out = val + np.real(w)
        return complex(out) if np.ndim(out) == 0 else out.astype(complex)

    coeffs = _flat_coeffs(b, ell)

    def dfunc(w, z):
        return _vectorize(lambda ww, zz: coeffs(zz, 1)[1], w, z)

    return AnalyticFamily(
        id="flat-add",
        form=Form.ADDITIVE,
        base_coeffs=coeffs,
        func=func,
        dfunc=dfunc,
        c1=complex(c),
        critical_point=0j,
        dyn_domain=Region.real_interval(),
        param_domain=Region.real_interval(),
        real_symmetric=True,
        params={"b": b, "ell": ell, "c": complex(c)},
    )


def polynomial_family(coeffs, c1: complex = 0.0, param: str = "none", id: str = "poly") -> AnalyticFamily:
    """Custom family from the coefficients ``p[0] + p[1] z + ...`` of a base polynomial.

    ``param`` selects how ``w`` enters: ``none`` (``G_w = p``), ``additive`` or
    ``multiplicative``.
    """
    p = np.asarray(coeffs, dtype=complex)
    deg = len(p) - 1
    real = bool(np.all(p.imag == 0))

    def base(z, k):
        out = np.zeros(k + 1, dtype=complex)
        # Taylor shift of p to z
        q = p.copy()
        for i in range(min(k, deg) + 1):
            out[i] = np.polyval(q[::-1], z)
            q = q[1:] * np.arange(1, len(q))
            q = q / (i + 1)
        return out

    pv = p[::-1]
    dpv = np.polyder(pv) if deg >= 1 else np.array([0.0])
    if param == "none":
        def jet_fn(w, z, kz, kw):
            out = np.zeros((kz + 1, kw + 1), dtype=complex)
            out[:, 0] = base(z, kz)
            return out
        return AnalyticFamily(
            id=id, form=Form.CUSTOM, custom_jet=jet_fn,
            func=lambda w, z: np.polyval(pv, z) + 0 * w,
            dfunc=lambda w, z: np.polyval(dpv, z) + 0 * w,
            c1=complex(c1), real_symmetric=real,
            params={"coeffs": [complex(x) for x in p]},
        )
    form = {"additive": Form.ADDITIVE, "multiplicative": Form.MULTIPLICATIVE}[param]
    if form is Form.ADDITIVE:
        func = lambda w, z: np.polyval(pv, z) + w  # noqa: E731
        dfunc = lambda w, z: np.polyval(dpv, z) + 0 * w  # noqa: E731
    else:
        func = lambda w, z: w * np.polyval(pv, z)  # noqa: E731
        dfunc = lambda w, z: w * np.polyval(dpv, z)  # noqa: E731
    return AnalyticFamily(id=id, form=form, base_coeffs=base, func=func, dfunc=dfunc,
                          c1=complex(c1), real_symmetric=real,
                          params={"coeffs": [complex(x) for x in p]})


def custom_family(id: str, jet_fn: Callable, c1: complex = 0.0, func=None, dfunc=None, **kw) -> AnalyticFamily:
    """Wrap a user jet evaluator ``jet_fn(w, z, kz, kw) -> (kz+1, kw+1) array``."""
    return AnalyticFamily(id=id, form=Form.CUSTOM, custom_jet=jet_fn, func=func, dfunc=dfunc,
                          c1=complex(c1), **kw)


REGISTRY = {
    "quad": quadratic_like,
    "logistic": logistic,
    "sine-mult": sine_mult,
    "sine2-mult": sine2_mult,
    "expexp-mult": expexp_mult,
    "flat-add": flat_additive,
}

# the parameter name that carries the base value c1, per builtin
PARAM_NAME = {"quad": "c", "logistic": "w", "sine-mult": "w", "sine2-mult": "w",
              "expexp-mult": "w", "flat-add": "c"}


def make_family(name: str, **params) -> AnalyticFamily:
    try:
        ctor = REGISTRY[name]
    except KeyError:
        raise DomainError(f"unknown family {name!r}; known: {', '.join(sorted(REGISTRY))}") from None
    return ctor(**params)


# --- validation -------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""
    sampled: bool = False

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "detail": self.detail, "sampled": self.sampled}


@dataclass
class ValidationReport:
    family: str
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def to_dict(self):
        return {"family": self.family, "ok": self.ok, "checks": [c.to_dict() for c in self.checks]}


def _sample_points(fam: AnalyticFamily, rng, n: int, radius: float = 2.0):
    zs = []
    real_only = fam.dyn_domain.kind == "real_interval"
    while len(zs) < n:
        z = complex(rng.uniform(-radius, radius), 0.0 if real_only else rng.uniform(-radius, radius))
        if fam.dyn_domain.contains(z) and z != 0:
            zs.append(z)
    return np.array(zs)


def validate_family(fam: AnalyticFamily, n_samples: int = 32, seed: int = 0) -> ValidationReport:
    """Spot-check declared flags and class conditions; failures are reported, not raised."""
    rng = np.random.default_rng(seed)
    checks = []
    zs = _sample_points(fam, rng, n_samples)
    w = fam.c1
    wr = complex(w.real, 0.0)

    if fam.real_symmetric:
        wc = complex(w.real, 0.1 * abs(w) + 0.1) if fam.param_domain.kind != "real_interval" else wr
        a = np.array([fam.G(wc.conjugate(), z.conjugate()) for z in zs])
        b = np.conj(np.array([fam.G(wc, z) for z in zs]))
        err = float(np.max(np.abs(a - b) / (1 + np.abs(b))))
        checks.append(Check("real_symmetry", err <= 1e-12, f"max rel err {err:.3g}", sampled=True))
    if fam.odd:
        a = np.array([fam.G(w, -z) for z in zs])
        b = np.array([fam.G(w, z) for z in zs])
        err = float(np.max(np.abs(a + b) / (1 + np.abs(b))))
        checks.append(Check("oddness", err <= 1e-12, f"max rel err {err:.3g}", sampled=True))

    if fam.form is not Form.CUSTOM:
        dw = np.array([fam.raw_jet(w, z, 0, 1)[0, 1] for z in zs])
        if fam.form is Form.ADDITIVE:
            err = float(np.max(np.abs(dw - 1)))
            checks.append(Check("dw_G_is_one", err == 0.0, f"max err {err:.3g}"))
        else:
            f = np.array([fam.base_coeffs(z, 0)[0] for z in zs])
            err = float(np.max(np.abs(dw - f) / (1 + np.abs(f))))
            checks.append(Check("dw_G_is_f", err <= 1e-14, f"max rel err {err:.3g}"))

    if fam.critical_point is not None:
        d = abs(complex(fam.dG(w, fam.critical_point)))
        checks.append(Check("critical_point", d <= 1e-12 * (1 + abs(w)), f"|Dg(c)| = {d:.3g}"))

    if fam.class_domains is not None:
        cls, D, V = fam.class_domains
        if cls == "F" and D.kind == "disk" and V.kind == "disk":
            t = np.linspace(0, 2 * np.pi, 256, endpoint=False)
            bd = D.center + D.radius * np.exp(1j * t)
            diam = float(np.max(np.abs(bd[:, None] - bd[None, :])))
            sup_d = float(np.max(np.abs(bd)))
            ok = V.radius + 1e-12 >= diam and diam + 1e-12 >= sup_d
            checks.append(Check("F_separation", ok,
                                f"V radius {V.radius:.6g} >= diam D {diam:.6g} >= sup|D| {sup_d:.6g}",
                                sampled=True))
            img = np.abs(np.array([fam.base_coeffs(z, 0)[0] for z in bd]))
            err = float(np.max(np.abs(img - V.radius)) / V.radius)
            checks.append(Check("F_boundary_to_boundary", err <= 1e-9, f"max rel err {err:.3g}", sampled=True))
        elif cls in ("E", "E_o"):
            # condition (c): u/v in V for u in D minus 0, v in D_+ minus 0 -- sampled only
            us = _sample_points(fam, rng, 16)
            vs = _sample_points(fam, rng, 16)
            ok = all(V.contains(u / v) for u in us for v in vs if u != v)
            checks.append(Check(f"{cls}_quotient_condition", ok, "u/v in V on sampled pairs", sampled=True))
    return ValidationReport(fam.id, checks)
