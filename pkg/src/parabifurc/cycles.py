"""Periodic cycles: Newton refinement, classification, return-map jets,
convergence of the marked orbit, and pseudo-arclength continuation."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (DegenerateJacobian, DomainError, EscapeError, NoConvergence,
                     NotAttracted, SingularJacobian)
from .family import AnalyticFamily
from .jets import Jet2, check_orders

CLASS_TOL = 1e-8
P_MAX = 64
NEWTON_TOL = 1e-12
NEWTON_MAXIT = 50


class Kind(enum.Enum):
    ATTRACTING = "AttractingHyperbolic"
    SUPERATTRACTING = "Superattracting"
    PARABOLIC = "Parabolic"
    REPELLING = "Repelling"
    NEUTRAL_IRRATIONAL = "NeutralIrrational"


@dataclass(frozen=True)
class Classification:
    kind: Kind
    l: Optional[int] = None
    p: Optional[int] = None

    def __str__(self) -> str:
        if self.kind is Kind.PARABOLIC:
            return f"Parabolic{{{self.l},{self.p}}}"
        return self.kind.value

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value}
        if self.kind is Kind.PARABOLIC:
            d.update(l=self.l, p=self.p)
        return d


def classify(kappa, tol: float = CLASS_TOL, p_max: int = P_MAX) -> Classification:
    kappa = complex(kappa)
    r = abs(kappa)
    if r < tol:
        return Classification(Kind.SUPERATTRACTING)
    if r < 1 - tol:
        return Classification(Kind.ATTRACTING)
    if r > 1 + tol:
        return Classification(Kind.REPELLING)
    turn = (math.atan2(kappa.imag, kappa.real) / (2 * math.pi)) % 1.0
    for p in range(1, p_max + 1):
        if abs(kappa ** p - 1) <= p * tol:
            l = round(p * turn) % p
            g = math.gcd(l, p)
            # a smaller p would have matched first, so g == 1 unless l == 0
            return Classification(Kind.PARABOLIC, l // g, p // g)
    return Classification(Kind.NEUTRAL_IRRATIONAL)


def _scale(points) -> float:
    return max(1.0, float(np.max(np.abs(points))))


@dataclass
class Cycle:
    w: complex
    q: int
    points: np.ndarray
    multiplier: complex
    classification: Classification
    residual: float

    @property
    def a0(self) -> complex:
        return complex(self.points[0])

    def to_dict(self) -> dict:
        return {
            "w": [self.w.real, self.w.imag],
            "q": self.q,
            "points": [[complex(z).real, complex(z).imag] for z in self.points],
            "multiplier": [self.multiplier.real, self.multiplier.imag],
            "classification": self.classification.to_dict(),
            "residual": self.residual,
        }


def cycle_residual(fam: AnalyticFamily, w, points) -> float:
    x = np.asarray(points, dtype=complex)
    img = np.asarray(fam.G(w, x), dtype=complex)
    return float(np.max(np.abs(img - np.roll(x, -1))))


def multiplier(fam: AnalyticFamily, w, points) -> complex:
    return complex(np.prod(np.asarray(fam.dG(w, np.asarray(points, dtype=complex)))))


def make_cycle(fam: AnalyticFamily, w, points, class_tol: float = CLASS_TOL) -> Cycle:
    x = np.asarray(points, dtype=complex)
    k = multiplier(fam, w, x)
    return Cycle(complex(w), len(x), x, k, classify(k, class_tol), cycle_residual(fam, w, x))


# --- Newton engines ---------------------------------------------------------

def _system(fam, w, x, twist):
    """Residual and Jacobian blocks of x_{j+1} = G_w(x_j), closing with twist * x_0."""
    q = len(x)
    J = np.zeros((q, q), dtype=complex)
    F = np.empty(q, dtype=complex)
    Gw = np.empty(q, dtype=complex)
    d = np.empty(q, dtype=complex)
    d2 = np.empty(q, dtype=complex)
    dw = np.empty(q, dtype=complex)
    for j in range(q):
        c = fam.raw_jet(w, x[j], 2, 1)
        nxt = x[j + 1] if j + 1 < q else twist * x[0]
        F[j] = c[0, 0] - nxt
        d[j] = c[1, 0]
        d2[j] = 2 * c[2, 0]
        dw[j] = c[1, 1]
        Gw[j] = c[0, 1]
        J[j, j] += c[1, 0]
        if j + 1 < q:
            J[j, j + 1] -= 1.0
        else:
            J[j, 0] -= twist
    return F, J, Gw, d, d2, dw


def _newton_cycle(fam, w, seed, twist=1, tol=NEWTON_TOL, max_iter=NEWTON_MAXIT):
    x = np.array(seed, dtype=complex)
    for it in range(max_iter + 1):
        F, J, *_ = _system(fam, w, x, twist)
        res = float(np.max(np.abs(F)))
        if not np.all(np.isfinite(x)) or not all(fam.in_domain(z) for z in x):
            raise NoConvergence(f"{fam.id}: Newton iterate left the domain at w={w}")
        if res < tol * _scale(x):
            return x, res
        if it == max_iter:
            break
        if np.linalg.cond(J) > 1e15:
            raise SingularJacobian(f"{fam.id}: cycle Jacobian singular at w={w} (multiplier 1?)")
        x = x - np.linalg.solve(J, F)
    raise NoConvergence(f"{fam.id}: Newton did not converge at w={w} (residual {res:.3g})")


def polish_cycle(fam: AnalyticFamily, w, points, steps: int = 2) -> np.ndarray:
    """Plain Newton steps on an already converged cycle, to squeeze out the last digits."""
    x = np.array(points, dtype=complex)
    for _ in range(steps):
        F, J, *_ = _system(fam, complex(w), x, 1)
        x = x - np.linalg.solve(J, F)
    return x


def find_cycle(fam: AnalyticFamily, w, q: int, seed, tol: float = NEWTON_TOL,
               max_iter: int = NEWTON_MAXIT, class_tol: float = CLASS_TOL) -> Cycle:
    """Refine a period-``q`` cycle of ``G_w`` by Newton on the full-cycle system."""
    seed = np.atleast_1d(np.asarray(seed, dtype=complex))
    if len(seed) != q:
        raise DomainError(f"seed has length {len(seed)}, expected period {q}")
    x, _ = _newton_cycle(fam, complex(w), seed, 1, tol, max_iter)
    return make_cycle(fam, w, x, class_tol)


def find_symmetric_cycle(fam: AnalyticFamily, w, h: int, seed, tol: float = NEWTON_TOL,
                         class_tol: float = CLASS_TOL) -> Cycle:
    """Cycle of period ``2h`` invariant under ``z -> -z`` for an odd family.

    Solves the half system ``G(x_j) = x_{j+1}``, ``G(x_{h-1}) = -x_0``.
    """
    if not fam.odd:
        raise DomainError(f"{fam.id} is not flagged odd")
    seed = np.atleast_1d(np.asarray(seed, dtype=complex))
    x, _ = _newton_cycle(fam, complex(w), seed[:h], -1, tol)
    return make_cycle(fam, w, np.concatenate([x, -x]), class_tol)


def _augmented_newton(fam, seed_w, seed_pts, target, twist, tol, max_iter):
    x = np.array(seed_pts, dtype=complex)
    w = complex(seed_w)
    q = len(x)
    cond = np.inf
    res = np.inf
    for it in range(max_iter + 1):
        F, J, Gw, d, d2, dw = _system(fam, w, x, twist)
        prods = np.array([np.prod(np.delete(d, j)) for j in range(q)])
        mu = np.prod(d)
        A = np.zeros((q + 1, q + 1), dtype=complex)
        A[:q, :q] = J
        A[:q, q] = Gw
        A[q, :q] = prods * d2
        A[q, q] = np.sum(prods * dw)
        R = np.concatenate([F, [mu - target]])
        res = float(np.max(np.abs(R)))
        cond = np.linalg.cond(A)
        if res < tol * _scale(np.r_[x, w]):
            return w, x, res, cond
        if it == max_iter or not np.isfinite(cond) or cond > 1e15:
            break
        step = np.linalg.solve(A, R)
        x = x - step[:q]
        w = w - step[q]
    partial = (w, x)
    if cond > 1e12:
        err = DegenerateJacobian(f"{fam.id}: augmented parabolic system singular near w={w} "
                                 f"(cond {cond:.3g}, residual {res:.3g})")
        err.partial = partial
        raise err
    err = NoConvergence(f"{fam.id}: parabolic solve did not converge (residual {res:.3g})")
    err.partial = partial
    raise err


def find_parabolic_pair(fam: AnalyticFamily, q: int, seed_w, seed_pts, target_kappa=1.0,
                        tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAXIT,
                        class_tol: float = 1e-7):
    """Solve ``{cycle equations, Dg^q(a_0) = target}`` for ``(w*, cycle)``.

    Raises DegenerateJacobian when the bordered system is singular at the
    solution, which happens exactly when transversality fails there.
    """
    target = complex(target_kappa)
    if abs(abs(target) - 1) > 1e-12:
        raise DomainError("target multiplier must lie on the unit circle")
    seed_pts = np.atleast_1d(np.asarray(seed_pts, dtype=complex))
    if len(seed_pts) != q:
        raise DomainError(f"seed has length {len(seed_pts)}, expected {q}")
    w, x, res, cond = _augmented_newton(fam, seed_w, seed_pts, target, 1, tol, max_iter)
    if cond > 1e12:
        err = DegenerateJacobian(f"{fam.id}: converged but bordered Jacobian is singular (cond {cond:.3g})")
        err.partial = (w, x)
        raise err
    return w, make_cycle(fam, w, x, class_tol)


def find_symmetric_parabolic(fam: AnalyticFamily, h: int, seed_w, seed_pts, target_half=1.0,
                             tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAXIT,
                             class_tol: float = 1e-7):
    """Parameter where the symmetric ``2h``-cycle of an odd family has half-multiplier ``target_half``.

    The half-multiplier is ``prod_{j<h} G'(x_j)``; the full multiplier is its square.
    """
    if not fam.odd:
        raise DomainError(f"{fam.id} is not flagged odd")
    seed_pts = np.atleast_1d(np.asarray(seed_pts, dtype=complex))[:h]
    w, x, res, cond = _augmented_newton(fam, seed_w, seed_pts, complex(target_half), -1, tol, max_iter)
    return w, make_cycle(fam, w, np.concatenate([x, -x]), class_tol)


# --- jets of the return map -------------------------------------------------

def return_map_jet(fam: AnalyticFamily, cyc: Cycle, kz: int, kw: int = 0, repeat: int = 1,
                   start_index: int = 0) -> Jet2:
    """Jet of ``(u, v) -> G_{w+v}^{q*repeat}(a_j + u)`` with ``j = start_index``."""
    check_orders(kz, kw)
    pts = np.roll(cyc.points, -start_index)
    cur = Jet2.identity_z(pts[0], kz, kw)
    for _ in range(repeat):
        for j in range(cyc.q):
            # expand at the exact cycle point so the constant term never drifts
            outer = Jet2(fam.raw_jet(cyc.w, pts[j], kz + kw, kw))
            cur = outer.compose_z(cur)
            cur.coeffs[0, :] = np.r_[pts[(j + 1) % cyc.q], cur.coeffs[0, 1:]]
    return cur


# --- convergence of the marked orbit ---------------------------------------

@dataclass
class ConvergenceReport:
    converged: bool
    steps: int
    attracting_index: int
    final_distance: float
    geometric_ratio: float
    power_exponent: float
    marked_point: complex

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "steps": self.steps,
            "attracting_index": self.attracting_index,
            "final_distance": self.final_distance,
            "geometric_ratio": self.geometric_ratio,
            "power_exponent": self.power_exponent,
            "marked_point": [self.marked_point.real, self.marked_point.imag],
        }


def basin_check(fam: AnalyticFamily, w, cyc: Cycle, eps: float = 1e-6, n_max: int = 10**6) -> ConvergenceReport:
    """Iterate the marked point and report convergence to ``cyc`` and its rate.

    ``geometric_ratio`` is the last ratio of successive distances along the
    ``c_{kq+1}`` subsequence (about ``|kappa|`` in the hyperbolic case);
    ``power_exponent`` is the log-log slope of that distance against ``n`` over
    the second half of the run (about ``-1/p`` per period block when parabolic).
    """
    c = fam.marked_point(w)
    pts = [complex(p) for p in cyc.points]
    q = cyc.q
    G = fam.func if fam.func is not None else fam.G
    z = c
    hist = []  # distances at n = 1, 1+q, 1+2q, ...
    R = fam.escape_radius
    for n in range(n_max):
        if n % q == 0:
            hist.append(min(abs(z - p) for p in pts))
            if hist[-1] < eps:
                break
        z = G(w, z)
        if not (abs(z) <= R):
            raise NotAttracted(f"{fam.id}: marked orbit escaped after {n + 1} steps")
    else:
        raise NotAttracted(f"{fam.id}: no convergence to the cycle within {n_max} steps")
    idx = int(np.argmin([abs(z - p) for p in pts]))
    d = np.asarray(hist)
    ratio = float(d[-1] / d[-2]) if len(d) >= 2 and d[-2] > 0 else float("nan")
    expo = float("nan")
    if len(d) >= 8:
        k = np.arange(1, len(d) + 1)
        sl = slice(len(d) // 2, len(d))
        good = d[sl] > 0
        if good.sum() >= 2:
            expo = float(np.polyfit(np.log(k[sl][good]), np.log(d[sl][good]), 1)[0])
    return ConvergenceReport(True, n, idx, float(d[-1]), ratio, expo, c)


# --- continuation -----------------------------------------------------------

class BranchStatus(enum.Enum):
    REACHED_ENDPOINT = "ReachedEndpoint"
    NEWTON_FAILURE = "NewtonFailure"
    LEFT_DOMAIN = "LeftDomain"
    STEP_LIMIT = "StepLimit"


@dataclass
class CycleBranch:
    samples: list
    q: int
    status: BranchStatus
    turning_points: list = field(default_factory=list)

    @property
    def t(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    @property
    def multipliers(self) -> np.ndarray:
        return np.array([s[1].multiplier for s in self.samples])

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "status": self.status.value,
            "turning_points": list(self.turning_points),
            "samples": [{"t": t, "cycle": c.to_dict()} for t, c in self.samples],
        }

    def csv_rows(self):
        head = ["t"]
        for j in range(self.q):
            head += [f"re_a{j}", f"im_a{j}"]
        head += ["kappa_re", "kappa_im"]
        rows = [head]
        for t, c in self.samples:
            row = [t]
            for z in c.points:
                row += [complex(z).real, complex(z).imag]
            row += [c.multiplier.real, c.multiplier.imag]
            rows.append(row)
        return rows


def _real_system(fam, y, q):
    x = y[:q] + 1j * y[q:2 * q]
    t = y[2 * q]
    F, J, Gw, *_ = _system(fam, complex(t), x, 1)
    Fr = np.r_[F.real, F.imag]
    Jr = np.zeros((2 * q, 2 * q + 1))
    Jr[:q, :q] = J.real
    Jr[:q, q:2 * q] = -J.imag
    Jr[q:, :q] = J.imag
    Jr[q:, q:2 * q] = J.real
    Jr[:q, 2 * q] = Gw.real
    Jr[q:, 2 * q] = Gw.imag
    return Fr, Jr


def _tangent(Jr, prev=None, direction=1.0):
    _, _, vt = np.linalg.svd(Jr)
    tan = vt[-1]
    if prev is not None:
        if np.dot(tan, prev) < 0:
            tan = -tan
    elif tan[-1] * direction < 0:
        tan = -tan
    return tan


def continue_branch(fam: AnalyticFamily, start: Cycle, t_range, ds: float = 1e-2,
                    ds_max: float = 5e-2, ds_min: float = 1e-10, max_steps: int = 20000,
                    tol: float = 1e-12) -> CycleBranch:
    """Pseudo-arclength continuation of a cycle along real parameter values ``w = t``.

    The branch starts at ``start.w`` and heads for ``t_range[1]``; folds are
    passed through in arclength and logged in ``turning_points``.
    """
    t0 = float(complex(start.w).real)
    t_lo, t_hi = float(min(t_range)), float(max(t_range))
    t_end = float(t_range[1])
    direction = 1.0 if t_end >= t0 else -1.0
    q = start.q
    y = np.r_[start.points.real, start.points.imag, t0]
    samples = [(t0, start)]
    _, Jr = _real_system(fam, y, q)
    tan = _tangent(Jr, direction=direction)
    turning = []
    status = BranchStatus.STEP_LIMIT
    h = ds
    for _ in range(max_steps):
        pred = y + h * tan
        ok = False
        if abs(pred[-1] - t_end) < 1e-14 or (pred[-1] - t_end) * direction > 0:
            # land exactly on the endpoint with the parameter frozen
            frac = (t_end - y[-1]) / (pred[-1] - y[-1]) if pred[-1] != y[-1] else 1.0
            guess = y + frac * (pred - y)
            try:
                x, _ = _newton_cycle(fam, complex(t_end), guess[:q] + 1j * guess[q:2 * q], 1, tol)
                samples.append((t_end, make_cycle(fam, t_end, x)))
                status = BranchStatus.REACHED_ENDPOINT
                break
            except (NoConvergence, SingularJacobian):
                h *= 0.5
                if h < ds_min:
                    status = BranchStatus.NEWTON_FAILURE
                    break
                continue
        z = pred.copy()
        for it in range(12):
            F, Jr = _real_system(fam, z, q)
            R = np.r_[F, np.dot(tan, z - pred)]
            if np.max(np.abs(R)) < tol * _scale(z[:2 * q]):
                ok = True
                break
            A = np.vstack([Jr, tan])
            try:
                z = z - np.linalg.solve(A, R)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(z)):
                break
        if ok:
            x = z[:q] + 1j * z[q:2 * q]
            if not all(fam.in_domain(p) for p in x):
                status = BranchStatus.LEFT_DOMAIN
                break
        if not ok:
            h *= 0.5
            if h < ds_min:
                status = BranchStatus.NEWTON_FAILURE
                break
            continue
        _, Jr = _real_system(fam, z, q)
        new_tan = _tangent(Jr, prev=tan)
        if new_tan[-1] * tan[-1] < 0:
            turning.append(float(z[-1]))
        tan = new_tan
        y = z
        t = float(z[-1])
        samples.append((t, make_cycle(fam, t, x)))
        if t < t_lo or t > t_hi:
            status = BranchStatus.REACHED_ENDPOINT
            break
        if it <= 3:
            h = min(h * 1.5, ds_max)
    return CycleBranch(samples, q, status, turning)
