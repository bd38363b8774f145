"""Holomorphic motions restricted to finite supports: the speed field of the
marked orbit, lifting through the family, Cesaro averaging of lifts, and the
measured order of asymptotic invariance.  Also the weighted series D(rho) and
the eigen-fields v_rho of the lift-speed operator."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .cycles import Cycle, Kind, find_cycle, polish_cycle, return_map_jet
from .errors import (BranchJump, DerivativeVanished, DomainError, NotParabolic,
                     ParameterOutsideW, ResidualUnderflow, ShapeMismatch)
from .family import AnalyticFamily, iterate_to_jet, orbit
from .jets import Jet2

EPSILON = 1e-2
NOISE_FLOOR = 1e-13
UNDERFLOW = 1e-14


def radial_lambdas(epsilon: float = EPSILON, n: int = 10, smallest: float = 1e-5,
                   direction: complex = 1.0, include_zero: bool = True) -> np.ndarray:
    """``[0] + n`` log-spaced radii from ``epsilon`` down to ``smallest`` along ``direction``."""
    u = complex(direction) / abs(direction)
    radii = np.logspace(math.log10(epsilon), math.log10(smallest), n)
    lam = radii * u
    return np.r_[0.0, lam] if include_zero else lam


# --- speed fields -----------------------------------------------------------

@dataclass
class SpeedField:
    points: np.ndarray
    v: np.ndarray
    w: complex
    recursion_residual: float
    jet_check: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "w": [self.w.real, self.w.imag],
            "points": [[complex(z).real, complex(z).imag] for z in self.points],
            "v": [[complex(z).real, complex(z).imag] for z in self.v],
            "recursion_residual": self.recursion_residual,
            "jet_check": self.jet_check,
        }


def marked_orbit(fam: AnalyticFamily, N: int, w=None) -> np.ndarray:
    w = fam.c1 if w is None else complex(w)
    return orbit(fam, w, fam.marked_point(w), N)


def speed_field_jet(fam: AnalyticFamily, n: int, w=None) -> complex:
    """Oracle: ``d/dlambda G_{w+lambda}^{n-1}(c_1 + lambda)`` by a ``k_w = 1`` jet."""
    w = fam.c1 if w is None else complex(w)
    start = Jet2.identity_w(fam.marked_point(w), 1, 1)
    return complex(iterate_to_jet(fam, w, 0, n - 1, 1, 1, start=start).coeffs[0, 1])


def speed_field(fam: AnalyticFamily, N: int, w=None, jet_check_upto: int = 20) -> SpeedField:
    """``v(c_1) = 1`` and ``v(c_{n+1}) = L(c_n) + Dg(c_n) v(c_n)`` along the marked orbit."""
    w = fam.c1 if w is None else complex(w)
    pts = marked_orbit(fam, N, w)
    v = np.empty(N, dtype=complex)
    v[0] = 1.0
    L = np.array([fam.L(z, w) for z in pts], dtype=complex)
    D = np.asarray(fam.dG(w, pts), dtype=complex)
    for n in range(N - 1):
        v[n + 1] = L[n] + D[n] * v[n]
    scale = np.maximum(1.0, np.abs(v[1:]))
    res = float(np.max(np.abs(v[1:] - L[:-1] - D[:-1] * v[:-1]) / scale)) if N > 1 else 0.0
    check = None
    if jet_check_upto:
        m = min(N, jet_check_upto)
        oracle = np.array([speed_field_jet(fam, n, w) for n in range(1, m + 1)])
        check = float(np.max(np.abs(oracle - v[:m]) / np.maximum(1.0, np.abs(v[:m]))))
    return SpeedField(pts, v, w, res, check)


def v_rho_field(fam: AnalyticFamily, rho: float, N: int, w=None) -> SpeedField:
    """Eigen-field of the lift-speed operator: ``v_{n+1} = L(c_n) + Dg(c_n) v_n / rho``.

    ``recursion_residual`` holds the relative residual of ``rho * (A v) = v`` with
    ``(A v)_n = (v_{n+1} - L(c_n) v_1) / Dg(c_n)``.
    """
    if not 0 < rho < 1:
        raise DomainError("rho must lie in (0, 1)")
    w = fam.c1 if w is None else complex(w)
    pts = marked_orbit(fam, N, w)
    L = np.array([fam.L(z, w) for z in pts], dtype=complex)
    D = np.asarray(fam.dG(w, pts), dtype=complex)
    zero = np.nonzero(D[:-1] == 0)[0]
    if zero.size:
        raise DerivativeVanished(f"Dg(c_{zero[0] + 1}) = 0")
    v = np.empty(N, dtype=complex)
    v[0] = 1.0
    for n in range(N - 1):
        v[n + 1] = L[n] + D[n] * v[n] / rho
    Av = (v[1:] - L[:-1] * v[0]) / D[:-1]
    res = float(np.max(np.abs(rho * Av - v[:-1]) / np.abs(v[:-1]))) if N > 1 else 0.0
    return SpeedField(pts, v, w, res, None)


@dataclass
class DRhoReport:
    rho: float
    N: int
    partial_sum: complex
    last_term: float
    ratio: float
    tail_bound: float
    positive: bool

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "N": self.N,
            "partial_sum": [self.partial_sum.real, self.partial_sum.imag],
            "last_term": self.last_term,
            "ratio": self.ratio,
            "tail_bound": self.tail_bound,
            "positive": self.positive,
            "flag": "Positive" if self.positive else "NonPositive",
        }


def d_rho(fam: AnalyticFamily, rho: float, N: int, w=None) -> DRhoReport:
    """Partial sum of ``1 + sum_n rho^n L(c_n) / Dg^n(c_1)`` with a geometric tail bound.

    The tail ratio is the geometric mean of the last ten term ratios.
    """
    if not 0 < rho < 1:
        raise DomainError("rho must lie in (0, 1)")
    w = fam.c1 if w is None else complex(w)
    pts = marked_orbit(fam, N, w)
    D = np.asarray(fam.dG(w, pts), dtype=complex)
    zero = np.nonzero(D == 0)[0]
    if zero.size:
        raise DerivativeVanished(f"Dg(c_{zero[0] + 1}) = 0: the series is undefined")
    L = np.array([fam.L(z, w) for z in pts], dtype=complex)
    # magnitudes in log space: rho^n / |Dg^n| underflows long before N = 2000
    log_mag = np.cumsum(math.log(rho) - np.log(np.abs(D))) + np.log(np.abs(L) + 1e-300)
    phase = np.exp(1j * (np.angle(L) - np.cumsum(np.angle(D))))
    terms = np.exp(log_mag) * phase
    S = 1.0 + np.sum(terms)
    last = float(abs(terms[-1]))
    k = min(10, N - 1)
    ratio = float(math.exp((log_mag[-1] - log_mag[-1 - k]) / k)) if k > 0 else math.nan
    tail = last * ratio / (1 - ratio) if ratio < 1 else math.inf
    positive = bool(S.real - tail > 0 and abs(S.imag) <= tail + 1e-12 * abs(S))
    return DRhoReport(rho, N, complex(S), last, ratio, float(tail), positive)


# --- motions on finite supports ---------------------------------------------

@dataclass
class MotionTruncation:
    """Values ``h(z, lambda)`` on a finite support closed under ``g`` up to a tail.

    ``succ[i]`` indexes ``g(support[i])`` inside ``support`` (or -1 when it is
    not stored).  Points with index ``>= n_core`` form an orbit extension used
    only to feed lifts, so that repeated lifting keeps the core support intact.
    The parameter of the family at ``lambda`` is ``w0 + h(marked) - marked``
    when the marked point is in the support, else ``param_path``.
    """

    support: np.ndarray
    lambdas: np.ndarray
    values: np.ndarray
    succ: np.ndarray
    n_core: int
    w0: complex
    marked_index: Optional[int] = 0
    param_path: Optional[np.ndarray] = None
    epsilon: float = EPSILON
    order_m: Optional[float] = None
    speed_at_marked: complex = 1.0
    extrapolated_tail: bool = False

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=complex)
        self.lambdas = np.asarray(self.lambdas, dtype=complex)
        self.values = np.asarray(self.values, dtype=complex)
        self.succ = np.asarray(self.succ, dtype=int)
        if self.values.shape != (len(self.support), len(self.lambdas)):
            raise ShapeMismatch("values must have shape (support, lambdas)")

    @property
    def core(self) -> np.ndarray:
        return self.values[: self.n_core]

    def params(self) -> np.ndarray:
        if self.marked_index is not None:
            i = self.marked_index
            return self.w0 + self.values[i] - self.support[i]
        return np.asarray(self.param_path, dtype=complex)

    def basepoint_error(self) -> float:
        """``max |h(z, 0) - z|`` when ``lambda = 0`` is sampled, else 0."""
        zero = np.nonzero(self.lambdas == 0)[0]
        if not zero.size:
            return 0.0
        return float(np.max(np.abs(self.values[:, zero[0]] - self.support)))

    def injectivity_margin(self) -> float:
        """Smallest pairwise distance of core values over all sampled ``lambda``."""
        vals = self.core
        if len(vals) < 2:
            return math.inf
        best = math.inf
        for k in range(vals.shape[1]):
            col = np.sort_complex(vals[:, k])
            d = np.abs(col[:, None] - col[None, :])
            np.fill_diagonal(d, np.inf)
            best = min(best, float(d.min()))
        return best

    def csv_rows(self):
        rows = [["index", "lambda_re", "lambda_im", "value_re", "value_im"]]
        for i in range(self.n_core):
            for k, lam in enumerate(self.lambdas):
                rows.append([i, lam.real, lam.imag, self.values[i, k].real, self.values[i, k].imag])
        return rows


def motion_from_field(fld: SpeedField, n_core: int, lambdas=None, epsilon: float = EPSILON,
                      fam_w0=None) -> MotionTruncation:
    """``h(c_n, lambda) = c_n + lambda v(c_n)``; points past ``n_core`` become the tail."""
    lam = radial_lambdas(epsilon) if lambdas is None else np.asarray(lambdas, dtype=complex)
    pts = fld.points
    n = len(pts)
    values = pts[:, None] + fld.v[:, None] * lam[None, :]
    succ = np.r_[np.arange(1, n), -1]
    w0 = fld.w if fam_w0 is None else fam_w0
    return MotionTruncation(pts, lam, values, succ, min(n_core, n), w0, 0, None, epsilon,
                            speed_at_marked=complex(fld.v[0]))


def speed_field_motion(fam: AnalyticFamily, N: int, lambdas=None, tail: int = 16,
                       w=None, epsilon: float = EPSILON) -> MotionTruncation:
    """The order-one motion ``z + lambda v(z)`` on ``c_1..c_N`` plus ``tail`` extension points."""
    fld = speed_field(fam, N + tail, w, jet_check_upto=0)
    return motion_from_field(fld, N, lambdas, epsilon)


def cycle_branch_motion(fam: AnalyticFamily, cyc: Cycle, lambdas=None, epsilon: float = EPSILON) -> MotionTruncation:
    """Exact motion of a hyperbolic cycle along ``w = w0 + lambda``."""
    lam = radial_lambdas(epsilon) if lambdas is None else np.asarray(lambdas, dtype=complex)
    values = np.empty((cyc.q, len(lam)), dtype=complex)
    for k, l in enumerate(lam):
        values[:, k] = cyc.points if l == 0 else polish_cycle(fam, cyc.w + l, find_cycle(fam, cyc.w + l, cyc.q, cyc.points).points)
    succ = (np.arange(cyc.q) + 1) % cyc.q
    return MotionTruncation(cyc.points, lam, values, succ, cyc.q, cyc.w, None, cyc.w + lam, epsilon)


def branch_radius(fam: AnalyticFamily, h: MotionTruncation) -> np.ndarray:
    """Per-point radius inside which a lifted value is accepted as the same branch.

    The larger of half the minimum spacing of the support and half the local
    injectivity scale ``|g'/g''|`` at the point.
    """
    pts = h.support
    if len(pts) > 1:
        d = np.abs(pts[:, None] - pts[None, :])
        np.fill_diagonal(d, np.inf)
        spacing = 0.5 * float(d.min())
    else:
        spacing = 0.0
    c = np.array([fam.raw_jet(h.w0, z, 2, 0)[:, 0] for z in pts])
    with np.errstate(divide="ignore", invalid="ignore"):
        local = 0.5 * np.abs(c[:, 1] / (2 * c[:, 2]))
    local = np.where(np.isfinite(local), local, np.inf)
    return np.maximum(spacing, local)


def _newton_preimage(fam, params, targets, seeds, tol=1e-15, max_iter=50):
    y = seeds.copy()
    for _ in range(max_iter):
        F = fam.G(params, y) - targets
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(F == 0, 0, F / fam.dG(params, y))
        y = y - step
        if np.all(np.abs(step) <= tol * np.maximum(1.0, np.abs(y))):
            break
    return y


def lift(fam: AnalyticFamily, h: MotionTruncation) -> MotionTruncation:
    """Solve ``G_{w(lambda)}(y) = h(g(x), lambda)`` for each support point ``x``.

    Newton is seeded at ``x``.  The last tail point has no stored image and is
    dropped, so the core support survives as long as there is a tail; once the
    tail is used up the image value is extrapolated from the support point
    nearest to ``g(x)`` and ``extrapolated_tail`` is set.
    """
    params = h.params()
    for p in params:
        if not fam.param_domain.contains(complex(p)):
            raise ParameterOutsideW(f"parameter {p} outside the family's parameter domain")
    keep = np.nonzero((h.succ >= 0) | (np.arange(len(h.support)) < h.n_core))[0]
    pts = h.support[keep]
    targets = np.empty((len(keep), len(h.lambdas)), dtype=complex)
    extrapolated = h.extrapolated_tail
    for r, i in enumerate(keep):
        j = h.succ[i]
        if j >= 0:
            targets[r] = h.values[j]
        else:
            gx = complex(fam.G(h.w0, h.support[i]))
            near = int(np.argmin(np.abs(h.support - gx)))
            targets[r] = gx + (h.values[near] - h.support[near])
            extrapolated = True
    P = np.broadcast_to(params[None, :], targets.shape)
    seeds = np.broadcast_to(pts[:, None], targets.shape).astype(complex)
    y = _newton_preimage(fam, P, targets, seeds)
    radius = branch_radius(fam, h)[keep]
    with np.errstate(all="ignore"):
        resid = np.abs(fam.G(P, y) - targets)
    unsettled = ~(resid <= 1e-10 * np.maximum(1.0, np.abs(targets)))
    jump = (np.abs(y - seeds) > radius[:, None]) | unsettled
    if np.any(jump):
        r, k = np.argwhere(jump)[0]
        raise BranchJump(f"lift of support point {pts[r]} at lambda={h.lambdas[k]} moved "
                         f"{abs(y[r, k] - pts[r]):.3g} (> branch radius {radius[r]:.3g})")
    remap = -np.ones(len(h.support), dtype=int)
    remap[keep] = np.arange(len(keep))
    succ = np.array([remap[h.succ[i]] if h.succ[i] >= 0 else -1 for i in keep])
    marked = None if h.marked_index is None else int(remap[h.marked_index])
    return replace(h, support=pts, values=y, succ=succ, marked_index=marked,
                   order_m=None, extrapolated_tail=extrapolated)


def lift_sequence(fam: AnalyticFamily, h: MotionTruncation, k: int) -> list:
    """``[h, lift(h), lift(lift(h)), ...]`` with ``k`` entries."""
    out = [h]
    for _ in range(k - 1):
        out.append(lift(fam, out[-1]))
    return out


GROWTH_FACTOR = 10.0


def spread_growth(motions, factor: float = GROWTH_FACTOR) -> dict:
    """Empirical bound on a lift sequence: ``sup_n max |h^(n)(z, lambda) - z|`` over the core.

    No uniform bound is asserted; the sequence is flagged when the sup exceeds
    ``factor`` times the spread of the first motion.
    """
    spreads = [float(np.max(np.abs(m.core - m.support[: m.n_core, None]))) for m in motions]
    initial, sup = spreads[0], max(spreads)
    return {"initial_spread": initial, "sup_spread": sup, "spreads": spreads,
            "flagged": bool(sup > factor * initial)}


def average(motions) -> MotionTruncation:
    """Pointwise mean of motions on a common support and ``lambda`` grid."""
    motions = list(motions)
    if not motions:
        raise ShapeMismatch("nothing to average")
    base = motions[0]
    n = min(len(m.support) for m in motions)
    for m in motions:
        if m.n_core != base.n_core or not np.array_equal(m.lambdas, base.lambdas) \
                or not np.allclose(m.support[:n], base.support[:n], rtol=0, atol=0):
            raise ShapeMismatch("motions differ in support or lambda grid")
    # mean of offsets from the first motion, so averaging copies is exact
    first = base.values[:n]
    vals = first + np.mean([m.values[:n] - first for m in motions], axis=0)
    succ = np.where(base.succ[:n] < n, base.succ[:n], -1)
    path = None
    if base.marked_index is None:
        path = np.mean([m.params() for m in motions], axis=0)
    return replace(base, support=base.support[:n], values=vals, succ=succ, param_path=path,
                   order_m=None, extrapolated_tail=any(m.extrapolated_tail for m in motions))


# --- asymptotic invariance --------------------------------------------------

@dataclass
class OrderReport:
    order: float
    slope: float
    intercept: float
    used: int
    residuals: list
    lambdas: list
    status: str = "ok"

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "slope": self.slope,
            "intercept": self.intercept,
            "used": self.used,
            "status": self.status,
            "lambda_abs": self.lambdas,
            "residuals": self.residuals,
        }


def invariance_residuals(fam: AnalyticFamily, h: MotionTruncation) -> np.ndarray:
    """``R(lambda) = max_x |G_{w(lambda)}(h(x)) - h(g(x))|`` over core points whose image is in the core."""
    params = h.params()
    rows = [i for i in range(h.n_core) if 0 <= h.succ[i] < h.n_core]
    if not rows:
        raise ShapeMismatch("no core point has its image in the core")
    vals = h.values[rows]
    imgs = h.values[h.succ[rows]]
    R = np.abs(fam.G(params[None, :], vals) - imgs)
    return np.max(R, axis=0)


def invariance_order(fam: AnalyticFamily, h: MotionTruncation, noise_floor: float = NOISE_FLOOR,
                     raise_on_underflow: bool = False) -> OrderReport:
    """Least-squares slope of ``log R`` against ``log |lambda|``, minus one."""
    R = invariance_residuals(fam, h)
    lam = np.abs(h.lambdas)
    sel = lam > 0
    lam, R = lam[sel], R[sel]
    if np.all(R < UNDERFLOW):
        if raise_on_underflow:
            raise ResidualUnderflow("lift residual below 1e-14 at every lambda")
        return OrderReport(math.inf, math.inf, math.nan, 0, R.tolist(), lam.tolist(), "ResidualUnderflow")
    use = R >= noise_floor
    if use.sum() < 2:
        return OrderReport(math.inf, math.inf, math.nan, int(use.sum()), R.tolist(), lam.tolist(),
                           "ResidualUnderflow")
    slope, icpt = np.polyfit(np.log(lam[use]), np.log(R[use]), 1)
    return OrderReport(float(slope - 1), float(slope), float(icpt), int(use.sum()), R.tolist(), lam.tolist())


# --- Hoelder-type ratio at a parabolic cycle ---------------------------------

@dataclass
class HolderReport:
    p: int
    exponent: float
    n: list
    ratios: list
    trend: float
    hypothesis_holds: bool
    bounded: Optional[bool]

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def holder_check(fam: AnalyticFamily, cyc: Cycle, N: int, n_min: int = 10, samples: int = 200,
                 hyp_tol: float = 1e-10) -> HolderReport:
    """Ratios ``|v(z_n) - v(z_{n+p})| / |z_n - z_{n+p}|^((p+2)/(p+1))`` along the marked orbit.

    ``trend`` is the log-log slope of the ratios against ``n``.  ``hypothesis_holds``
    records whether ``Q(a) f''(a) = Q'(a)(kappa - 1)`` at the cycle (for ``p = 1``,
    where the polynomial correction is a constant and cancels in differences);
    ``bounded`` is only decided in that situation.
    """
    if cyc.classification.kind is not Kind.PARABOLIC:
        raise NotParabolic(f"cycle is {cyc.classification}")
    p = cyc.classification.p * cyc.q
    expo = (p + 2) / (p + 1)
    fld = speed_field(fam, N, cyc.w, jet_check_upto=0)
    if N < 3 * p:
        return HolderReport(p, expo, [], [], math.nan, False, None)
    idx = np.unique(np.linspace(min(n_min, N - p - 1), N - p - 1, samples).astype(int))
    z, v = fld.points, fld.v
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.abs(v[idx] - v[idx + p]) / np.abs(z[idx] - z[idx + p]) ** expo
    good = np.isfinite(r) & (r > 0)
    trend = float(np.polyfit(np.log(idx[good] + 1), np.log(r[good]), 1)[0]) if good.sum() >= 2 else math.nan
    hyp = False
    if cyc.classification.p == 1:
        J = return_map_jet(fam, cyc, 2, 1)
        Q0, Qp, D2 = J.coeffs[0, 1], J.coeffs[1, 1], 2 * J.coeffs[2, 0]
        lhs, rhs = Q0 * D2, Qp * (cyc.multiplier - 1)
        hyp = bool(abs(lhs - rhs) <= hyp_tol * max(1.0, abs(lhs), abs(rhs)))
    bounded = (trend <= 0.1) if hyp else None
    return HolderReport(p, expo, (idx + 1).tolist(), r.tolist(), trend, hyp, bounded)
