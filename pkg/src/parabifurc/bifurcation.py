"""Bifurcations of real one-parameter families: attractor scans, attracting
windows, saddle-node / period-doubling / pitchfork location with fixed-point
census certificates, branch continuation, and bifurcation diagrams."""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cycles import (Cycle, continue_branch, find_cycle, find_parabolic_pair,
                     find_symmetric_cycle, find_symmetric_parabolic, return_map_jet)
from .errors import (CensusMismatch, CountMismatch, DegenerateFold, DegenerateJacobian,
                     DomainError, NotOdd, NumericalError)
from .family import AnalyticFamily
from .io import fmt_float
from .transversality import Q_terms, _d2_scale, transversality_report

RETURN_TOL = 1e-6
MERGE_TOL = 1e-9
N_SEEDS = 64


def orientation(fam: AnalyticFamily, t) -> int:
    """+1 when ``G_t`` has a local maximum at its critical point, -1 for a minimum.

    Monotonicity and sign statements about multipliers are phrased for the
    maximum case; the flag maps them onto families such as ``z^2 + c``.
    """
    crit = fam.critical_point if fam.critical_point is not None else 0.0
    d2 = fam.raw_jet(t, crit, 2, 0)[2, 0].real
    return -1 if d2 > 0 else 1


# --- scanning ----------------------------------------------------------------

@dataclass
class ScanPoint:
    t: float
    status: str  # "periodic", "unresolved", "escaped"
    q: int = 0
    cycle: Optional[Cycle] = None

    @property
    def kappa(self) -> float:
        return float(self.cycle.multiplier.real) if self.cycle is not None else math.nan

    def to_row(self) -> list:
        pts = "" if self.cycle is None else " ".join(fmt_float(z.real) for z in self.cycle.points)
        return [self.t, self.status, self.q, self.kappa, pts]


def _iterate_grid(fam, t, x0, n):
    """All ``n + 1`` iterates for each parameter in ``t`` (rows: iterate index)."""
    x = np.empty((n + 1, len(t)), dtype=complex)
    x[0] = x0
    with np.errstate(all="ignore"):
        for k in range(n):
            x[k + 1] = fam.G(t, x[k])
            bad = ~(np.abs(x[k + 1]) <= fam.escape_radius)
            x[k + 1][bad] = np.nan
    return x


def _closest_return(tail: np.ndarray, q_max: int, tol: float) -> int:
    """Least ``q`` with ``|x_k - x_{k+q}| < tol * scale`` over the last ``q`` of ``tail``."""
    n = len(tail)
    scale = max(1.0, float(np.nanmax(np.abs(tail[-min(n, 8):]))))
    for q in range(1, min(q_max, n // 2) + 1):
        a = tail[n - q:]
        b = tail[n - 2 * q: n - q]
        if np.all(np.abs(a - b) < tol * scale):
            return q
    return 0


def _classify_orbit(fam, t, orb, transient, q_max, return_tol) -> ScanPoint:
    if not np.all(np.isfinite(orb)):
        return ScanPoint(float(t), "escaped")
    q = _closest_return(orb[transient:], q_max, return_tol)
    if q == 0:
        # slow convergence: allow a second look over the whole run
        q = _closest_return(orb, q_max, return_tol)
    if q == 0:
        return ScanPoint(float(t), "unresolved")
    try:
        cyc = find_cycle(fam, t, q, orb[-q:])
        d = minimal_period(cyc.points)
        if d < q:
            q = d
            cyc = find_cycle(fam, t, q, cyc.points[:q])
    except NumericalError:
        return ScanPoint(float(t), "unresolved", q)
    return ScanPoint(float(t), "periodic", q, cyc)


def scan(fam: AnalyticFamily, t_range, grid_n: int = 200, n_iter: int = 1000, transient: int = 900,
         q_max: int = 256, seed=None, return_tol: float = RETURN_TOL, threads: int = 1) -> list:
    """Sample the attractor of the marked orbit at ``grid_n`` parameters.

    Iterates from ``G_t(seed)`` (default seed: critical point), keeps the orbit
    after ``transient`` steps, detects the period by closest return and polishes
    the cycle by Newton.  Chaotic or unresolved parameters are reported, never
    raised.  With ``threads > 1`` the polishing runs in a thread pool; the result
    order is the grid order either way.
    """
    if grid_n < 2:
        raise DomainError("grid_n must be >= 2")
    t = np.linspace(float(t_range[0]), float(t_range[1]), grid_n)
    crit = fam.critical_point if seed is None else seed
    x0 = fam.G(t, np.full(t.shape, complex(crit if crit is not None else 0.0)))
    traj = _iterate_grid(fam, t, x0, n_iter - 1)

    def one(i):
        return _classify_orbit(fam, t[i], traj[:, i], transient, q_max, return_tol)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(grid_n)))
    return [one(i) for i in range(grid_n)]


# --- attracting windows ---------------------------------------------------------

@dataclass
class AttractingWindow:
    t_lo: float
    t_hi: float
    q: int
    kappa_samples: list
    orientation: int
    superattracting_t: Optional[float] = None
    defects: list = field(default_factory=list)
    edges: tuple = (None, None)

    @property
    def contains_superattracting(self) -> bool:
        return self.superattracting_t is not None

    def to_dict(self) -> dict:
        return {
            "t_lo": self.t_lo,
            "t_hi": self.t_hi,
            "q": self.q,
            "orientation": self.orientation,
            "contains_superattracting": self.contains_superattracting,
            "superattracting_t": self.superattracting_t,
            "defects": list(self.defects),
            "edges": [None if e is None else e.to_dict() for e in self.edges],
            "kappa_samples": [[t, k] for t, k in self.kappa_samples],
        }


def minimal_period(points, tol: float = 1e-7) -> int:
    """Least ``d`` dividing ``len(points)`` with the cycle repeating after ``d`` steps."""
    pts = np.asarray(points)
    q = len(pts)
    scale = max(1.0, float(np.max(np.abs(pts))))
    for d in range(1, q):
        if q % d == 0 and np.max(np.abs(pts - np.roll(pts, -d))) < tol * scale:
            return d
    return q


def _attracting_at(fam, t, q, seed):
    try:
        c = find_cycle(fam, t, q, seed)
    except NumericalError:
        return None
    if np.max(np.abs(c.points.imag)) > 1e-9 or not abs(c.multiplier) < 1:
        return None
    if minimal_period(c.points) < q:
        return None
    return c


def _bisect_edge(fam, q, t_in, c_in, t_out, tol):
    """Shrink ``[t_in, t_out]`` to ``tol`` keeping an attracting cycle at ``t_in``."""
    while abs(t_out - t_in) > tol:
        tm = 0.5 * (t_in + t_out)
        c = _attracting_at(fam, tm, q, c_in.points)
        if c is None:
            t_out = tm
        else:
            t_in, c_in = tm, c
    return t_in, c_in


@dataclass
class WindowEdge:
    """Where a window ends: the event period, the multiplier target, and seed points."""
    t: float
    q: int
    target: float
    points: np.ndarray
    refined: bool

    def to_dict(self) -> dict:
        return {"t": self.t, "q": self.q, "target": self.target, "refined": self.refined}


def _refine_edge(fam, q, t_edge, c_edge, tol, bounds) -> WindowEdge:
    """Polish the boundary as the parameter where a multiplier reaches +1 or -1.

    An even-period window can open where a cycle of half the period flips; that
    case is tried first for +1 edges.  A polished parameter is accepted when it
    falls inside ``bounds``, the gap between this run and the next resolved
    attracting sample.
    """
    b_lo, b_hi = min(bounds), max(bounds)
    target = 1.0 if c_edge.multiplier.real > 0 else -1.0
    attempts = []
    if q % 2 == 0 and target > 0:
        attempts.append((q // 2, -1.0, c_edge.points[: q // 2]))
    attempts.append((q, target, c_edge.points))
    for qq, tg, seed in attempts:
        try:
            w, cyc = find_parabolic_pair(fam, qq, t_edge, seed, tg)
        except DegenerateJacobian as e:
            w, cyc = complex(e.partial[0]) if getattr(e, "partial", None) is not None else None, None
            if w is None:
                continue
        except NumericalError:
            continue
        if abs(w.imag) < 1e-12 and b_lo - tol <= w.real <= b_hi + tol:
            pts = cyc.points if cyc is not None else seed
            return WindowEdge(float(w.real), qq, tg, np.asarray(pts), True)
    return WindowEdge(float(t_edge), q, target, np.asarray(c_edge.points), False)


def detect_windows(fam: AnalyticFamily, points: list, n_samples: int = 100, tol: float = 1e-9) -> list:
    """Group the scan into maximal runs of one period with ``kappa`` in (-1, 1) and locate edges."""
    runs = []
    cur = []
    for sp in points:
        ok = sp.status == "periodic" and abs(sp.cycle.multiplier) < 1
        if ok and cur and sp.q == cur[-1].q:
            cur.append(sp)
            continue
        if cur:
            runs.append(cur)
        cur = [sp] if ok else []
    if cur:
        runs.append(cur)
    idx = {id(sp): i for i, sp in enumerate(points)}
    good_set = {i for i, sp in enumerate(points) if sp.status == "periodic" and abs(sp.cycle.multiplier) < 1}

    def gap_end(i, step):
        """Parameter of the next attracting sample beyond index ``i`` (or the grid end)."""
        j = i + step
        while 0 < j < len(points) - 1 and j not in good_set:
            j += step
        return points[j].t

    windows = []
    for run in runs:
        q = run[0].q
        i0, i1 = idx[id(run[0])], idx[id(run[-1])]
        lo, c_lo = run[0].t, run[0].cycle
        hi, c_hi = run[-1].t, run[-1].cycle
        e_lo = e_hi = None
        if i0 > 0:
            lo, c_lo = _bisect_edge(fam, q, lo, c_lo, points[i0 - 1].t, tol)
            e_lo = _refine_edge(fam, q, lo, c_lo, tol, (gap_end(i0, -1), run[0].t))
            lo = e_lo.t
        if i1 < len(points) - 1:
            hi, c_hi = _bisect_edge(fam, q, hi, c_hi, points[i1 + 1].t, tol)
            e_hi = _refine_edge(fam, q, hi, c_hi, tol, (run[-1].t, gap_end(i1, 1)))
            hi = e_hi.t
        windows.append(_sample_window(fam, q, lo, hi, run, n_samples, (e_lo, e_hi)))
    return windows


def _sample_window(fam, q, lo, hi, run, n_samples, edges) -> AttractingWindow:
    orient = orientation(fam, 0.5 * (lo + hi))
    ts = np.linspace(lo, hi, n_samples + 2)[1:-1]
    samples, cycles = [], []
    seed = min(run, key=lambda sp: abs(sp.t - ts[0])).cycle.points
    defects = []
    for t in ts:
        try:
            c = find_cycle(fam, t, q, seed)
        except NumericalError:
            defects.append(f"no cycle at t={t!r}")
            continue
        seed = c.points
        samples.append((float(t), float(c.multiplier.real)))
        cycles.append(c)
    ks = np.array([k for _, k in samples])
    if np.any(np.abs(ks) >= 1):
        defects.append("multiplier left (-1, 1) inside the window")
    if q >= 2 and len(ks) > 1:
        diffs = np.diff(ks) * orient
        if np.any(diffs >= 0):
            defects.append(f"multiplier not strictly decreasing (max step {float(diffs.max())!r})")
    t0 = None
    sign = np.sign(ks)
    change = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    if change.size:
        i = int(change[0])
        a, b = samples[i][0], samples[i + 1][0]
        ca = cycles[i]
        fa = ca.multiplier.real
        for _ in range(60):
            m = 0.5 * (a + b)
            cm = find_cycle(fam, m, q, ca.points)
            if np.sign(cm.multiplier.real) == np.sign(fa):
                a, ca, fa = m, cm, cm.multiplier.real
            else:
                b = m
        t0 = 0.5 * (a + b)
    return AttractingWindow(float(lo), float(hi), q, samples, orient, t0, defects, edges)


# --- fixed-point census ---------------------------------------------------------

def fixed_points_of_iterate(fam: AnalyticFamily, t, n: int, center: float, delta: float,
                            n_seeds: int = N_SEEDS, merge: float = MERGE_TOL) -> list:
    """Real fixed points of ``G_t^n`` in ``[center - delta, center + delta]`` as ``(x, multiplier)``.

    Newton runs from ``n_seeds`` evenly spaced seeds plus the centre; roots
    closer than ``merge`` (relative) are merged.
    """
    x = np.append(np.linspace(center - delta, center + delta, n_seeds), center)
    t = float(t)
    with np.errstate(all="ignore"):
        for _ in range(100):
            y = x.copy()
            d = np.ones_like(x)
            for _ in range(n):
                d *= np.real(fam.dG(t, y))
                y = np.real(fam.G(t, y))
            step = (y - x) / (d - 1)
            x = x - step
            if np.all(~np.isfinite(step) | (np.abs(step) < 1e-15)):
                break
        y = x.copy()
        d = np.ones_like(x)
        for _ in range(n):
            d *= np.real(fam.dG(t, y))
            y = np.real(fam.G(t, y))
    ok = np.isfinite(x) & (np.abs(y - x) < 1e-11 * max(1.0, abs(center))) & (np.abs(x - center) <= delta)
    roots = sorted(zip(x[ok].tolist(), d[ok].tolist()))
    merged = []
    for r, m in roots:
        if merged and abs(r - merged[-1][0]) < merge * max(1.0, abs(r)):
            continue
        merged.append((r, m))
    return merged


# --- events ---------------------------------------------------------------------

class EventKind(enum.Enum):
    SADDLE_NODE = "SaddleNode"
    PERIOD_DOUBLING = "PeriodDoubling"
    PITCHFORK = "Pitchfork"
    DEGENERATE_OTHER = "DegenerateOther"


@dataclass
class BifurcationEvent:
    t_star: float
    kind: EventKind
    q: int
    a0: float
    certificate: dict
    cycle: Optional[Cycle] = None

    def to_dict(self) -> dict:
        return {
            "t_star": self.t_star,
            "kind": self.kind.value,
            "q": self.q,
            "a0": self.a0,
            "certificate": self.certificate,
        }


def _census_delta(dt: float, a0: float) -> float:
    return 10.0 * math.sqrt(abs(dt)) * max(1.0, abs(a0))


def _census_dt(cyc: Cycle, rate: float) -> float:
    """Default census offset: ``1e-4 / max(1, rate)``, reduced until the census
    ball around ``a0`` excludes the other points of the cycle."""
    dt = 1e-4 / max(1.0, abs(rate))
    others = np.abs(cyc.points[1:] - cyc.a0)
    if others.size:
        scale = max(1.0, abs(cyc.a0))
        dt = min(dt, (float(others.min()) / (20.0 * scale)) ** 2)
    return dt


BRANCH_MULT_TOL = 0.5


def _split_census(roots):
    """Separate roots on the bifurcating branch (multiplier near 1) from unrelated ones."""
    near = [r for r in roots if abs(r[1] - 1.0) < BRANCH_MULT_TOL]
    return near, len(roots) - len(near)


def locate_saddle_node(fam: AnalyticFamily, q: int, t_seed, pts_seed, dt: Optional[float] = None,
                       tol: float = 1e-8) -> BifurcationEvent:
    """Fold of a period-``q`` cycle: multiplier +1, with a 2/0 census of ``G_t^q`` fixed points.

    ``Q(a0)`` and ``D^2 g^q(a0)`` change sign together along the cycle, so the
    certificate records the sign of ``Q`` taken at a cycle point where the
    return map, in the maximum-type orientation, bends below the diagonal
    (``orientation * D^2 g^q < 0``): ``Q_sign_oriented = -sign(Q * D^2 * orientation)``.
    """
    try:
        w, cyc = find_parabolic_pair(fam, q, t_seed, pts_seed, 1.0)
    except DegenerateJacobian as e:
        raise DegenerateFold(f"fold system singular near t={t_seed}: {e}") from e
    t_star = float(w.real)
    a0 = float(cyc.a0.real)
    J = return_map_jet(fam, cyc, 2, 0)
    D2 = float(2 * J.coeffs[2, 0].real)
    terms = Q_terms(fam, w, cyc.a0, q)
    Q = float(np.sum(terms).real)
    if abs(Q) < tol * float(np.sum(np.abs(terms))) or abs(D2) < tol * _d2_scale(fam, cyc):
        raise DegenerateFold(f"Q(a0)={Q!r}, D2g^q(a0)={D2!r} at t={t_star!r}")
    if dt is None:
        dt = _census_dt(cyc, 1.0)
    delta = _census_delta(dt, a0)
    minus, u_minus = _split_census(fixed_points_of_iterate(fam, t_star - dt, q, a0, delta))
    plus, u_plus = _split_census(fixed_points_of_iterate(fam, t_star + dt, q, a0, delta))
    counts = sorted([len(minus), len(plus)])
    if counts != [0, 2]:
        raise CountMismatch(f"fold census {len(minus)}/{len(plus)} at t*={t_star!r}")
    pair = minus or plus
    orient = orientation(fam, t_star)
    cert = {
        "Q_a0": Q,
        "D2gq_a0": D2,
        "D2gq_sign": int(np.sign(D2)),
        "orientation": orient,
        "Q_sign_oriented": int(-np.sign(Q * D2 * orient)),
        "dt": dt,
        "delta": delta,
        "census_minus": len(minus),
        "census_plus": len(plus),
        "unrelated_roots": u_minus + u_plus,
        "pair_multipliers": [m for _, m in pair],
    }
    return BifurcationEvent(t_star, EventKind.SADDLE_NODE, q, a0, cert, cyc)


def locate_period_doubling(fam: AnalyticFamily, q: int, t_seed, pts_seed,
                           dt: Optional[float] = None) -> BifurcationEvent:
    """Flip of a period-``q`` cycle: multiplier -1, with a 1/3 census of ``G_t^{2q}`` fixed points.

    The census offset ``dt`` defaults to ``1e-4 / max(1, |kappa'|)`` (smaller if
    needed to keep other cycle points out of the census ball).
    """
    w, cyc = find_parabolic_pair(fam, q, t_seed, pts_seed, -1.0)
    t_star = float(w.real)
    a0 = float(cyc.a0.real)
    rep = transversality_report(fam, cyc, probe=False)
    kp = float(rep.kappa_prime.real)
    if dt is None:
        dt = _census_dt(cyc, kp)
    delta = _census_delta(dt, a0)
    minus, u_minus = _split_census(fixed_points_of_iterate(fam, t_star - dt, 2 * q, a0, delta))
    plus, u_plus = _split_census(fixed_points_of_iterate(fam, t_star + dt, 2 * q, a0, delta))
    # after the flip the original multiplier is below -1: kappa(t* + s) ~ -1 + kp s
    pre, post = (minus, plus) if kp < 0 else (plus, minus)
    cert = {
        "kappa_prime": kp,
        "dt": dt,
        "delta": delta,
        "post_side": "plus" if kp < 0 else "minus",
        "census_pre": len(pre),
        "census_post": len(post),
        "unrelated_roots": u_minus + u_plus,
        "post_multipliers": [m for _, m in post],
    }
    if (len(pre), len(post)) != (1, 3):
        err = CountMismatch(f"flip census pre={len(pre)} post={len(post)} at t*={t_star!r}")
        err.certificate = cert
        raise err
    return BifurcationEvent(t_star, EventKind.PERIOD_DOUBLING, q, a0, cert, cyc)


def _distinct_cycles(cycles: list, tol: float = 1e-7) -> list:
    out = []
    for c in cycles:
        key = np.sort(c.points.real)
        if any(len(key) == len(k) and np.max(np.abs(key - k)) < tol for k, _ in out):
            continue
        out.append((key, c))
    return [c for _, c in out]


def attracting_cycles_near(fam: AnalyticFamily, t, q: int, centers, delta: float,
                           n_seeds: int = N_SEEDS) -> list:
    """Distinct real attracting period-``q`` cycles reached by Newton from seeds near ``centers``."""
    found = []
    for c0 in centers:
        for x in np.linspace(c0 - delta, c0 + delta, n_seeds):
            orb = [complex(x)]
            for _ in range(q - 1):
                orb.append(complex(fam.G(t, orb[-1])))
            try:
                c = find_cycle(fam, t, q, orb)
            except NumericalError:
                continue
            if np.max(np.abs(c.points.imag)) < 1e-9 and abs(c.multiplier) < 1 and \
                    np.max(np.abs(c.points - np.asarray(centers[0]))) < 10 * delta + 10:
                found.append(c)
    return _distinct_cycles(found)


def is_symmetric(points, tol: float = 1e-6) -> bool:
    p = np.sort(np.asarray(points).real)
    return bool(np.max(np.abs(p + p[::-1])) <= tol * max(1.0, np.max(np.abs(p))))


def locate_pitchfork(fam: AnalyticFamily, q: int, t_seed, pts_seed, dt: float = 1e-3) -> BifurcationEvent:
    """Symmetric period-``q`` cycle of an odd family reaching multiplier 1.

    Solved on the half cycle (``G(x_{h-1}) = -x_0``); certified by symmetry,
    the vanishing of Q(a0), and an attracting-cycle census on both sides.
    """
    if not fam.odd:
        raise NotOdd(f"{fam.id} is not an odd family")
    if q % 2:
        raise DomainError("a symmetric cycle of an odd family has even period")
    h = q // 2
    seed_cyc = find_symmetric_cycle(fam, t_seed, h, pts_seed)
    mu = np.prod(fam.dG(t_seed, seed_cyc.points[:h]))
    target = 1.0 if mu.real > 0 else -1.0
    w, cyc = find_symmetric_parabolic(fam, h, t_seed, seed_cyc.points[:h], target)
    t_star = float(w.real)
    a0 = float(cyc.a0.real)
    sym_err = float(np.max(np.abs(cyc.points[h:] + cyc.points[:h])))
    Q = float(np.sum(Q_terms(fam, w, cyc.a0, q)).real)
    delta = _census_delta(dt, a0)
    sides = {}
    for name, t in (("minus", t_star - dt), ("plus", t_star + dt)):
        sym = find_symmetric_cycle(fam, t, h, cyc.points[:h])
        att = attracting_cycles_near(fam, t, q, [a0, -a0], delta)
        n_sym = sum(1 for c in att if is_symmetric(c.points))
        asym = [c for c in att if not is_symmetric(c.points)]
        paired = all(any(np.max(np.abs(np.sort(-c.points.real) - np.sort(d.points.real))) < 1e-7
                         for d in asym) for c in asym)
        sides[name] = {
            "t": t,
            "symmetric_multiplier": float(sym.multiplier.real),
            "symmetric_attracting": bool(abs(sym.multiplier) < 1),
            "attracting_symmetric": n_sym,
            "attracting_asymmetric": len(asym),
            "asymmetric_exchanged_by_negation": bool(paired),
        }
    pattern = sorted((s["attracting_symmetric"], s["attracting_asymmetric"]) for s in sides.values())
    cert = {
        "symmetry_error": sym_err,
        "Q_a0": Q,
        "half_multiplier_target": target,
        "dt": dt,
        "delta": delta,
        "sides": sides,
    }
    ok = pattern == [(0, 2), (1, 0)] and all(s["asymmetric_exchanged_by_negation"] for s in sides.values())
    if sym_err > 1e-10 or not ok:
        err = CensusMismatch(f"pitchfork census {pattern} at t*={t_star!r}")
        err.certificate = cert
        raise err
    return BifurcationEvent(t_star, EventKind.PITCHFORK, q, a0, cert, cyc)


def locate_event(fam: AnalyticFamily, q: int, t_seed, pts_seed, target: float) -> BifurcationEvent:
    """Dispatch a window edge to the matching locator; unmatched edges become DegenerateOther."""
    pts_seed = np.asarray(pts_seed, dtype=complex)
    try:
        if target < 0:
            try:
                return locate_period_doubling(fam, q, t_seed, pts_seed)
            except CountMismatch:
                if fam.odd and q % 2 == 0 and is_symmetric(pts_seed):
                    return locate_pitchfork(fam, q, t_seed, pts_seed)
                raise
        if fam.odd and q % 2 == 0 and is_symmetric(pts_seed, 1e-8):
            return locate_pitchfork(fam, q, t_seed, pts_seed)
        return locate_saddle_node(fam, q, t_seed, pts_seed)
    except (NumericalError, DomainError) as e:
        cert = {"reason": f"{type(e).__name__}: {e}"}
        cert.update(getattr(e, "certificate", {}) or {})
        return BifurcationEvent(float(np.real(t_seed)), EventKind.DEGENERATE_OTHER, q,
                                float(pts_seed[0].real), cert)


def window_events(fam: AnalyticFamily, windows: list) -> list:
    """Locate the bifurcation at each located edge of each window."""
    events = []
    for win in windows:
        for edge in win.edges:
            if edge is None:
                continue
            ev = locate_event(fam, edge.q, edge.t, edge.points, edge.target)
            # adjacent windows share an edge
            if any(e.kind is ev.kind and e.q == ev.q and abs(e.t_star - ev.t_star) < 1e-8 for e in events):
                continue
            events.append(ev)
    return events


def continue_right(fam: AnalyticFamily, cyc: Cycle, t_end: float, **kw):
    """Continue a real cycle from its parameter toward ``t_end`` (either side)."""
    return continue_branch(fam, cyc, (float(cyc.w.real), float(t_end)), **kw)


# --- diagrams -------------------------------------------------------------------

@dataclass
class Diagram:
    t: np.ndarray
    x: np.ndarray  # shape (grid_n, keep)
    seed: complex
    burn: int
    keep: int

    def csv_rows(self):
        rows = [["t", "x"]]
        for i, t in enumerate(self.t):
            for v in self.x[i]:
                if np.isfinite(v):
                    rows.append([t, v])
        return rows

    def raster(self, height: int = 400, x_range=None) -> np.ndarray:
        """Greyscale image (255 background, 0 where points fall); columns follow ``t``."""
        finite = self.x[np.isfinite(self.x)]
        lo, hi = (float(finite.min()), float(finite.max())) if x_range is None else x_range
        if hi <= lo:
            hi = lo + 1.0
        img = np.full((height, len(self.t)), 255, dtype=np.uint8)
        for i in range(len(self.t)):
            col = self.x[i][np.isfinite(self.x[i])]
            rows = ((hi - col) / (hi - lo) * (height - 1)).round().astype(int)
            rows = rows[(rows >= 0) & (rows < height)]
            img[rows, i] = 0
        return img

    def column(self, t) -> tuple:
        i = int(np.argmin(np.abs(self.t - t)))
        return float(self.t[i]), self.x[i]


def default_seed(fam: AnalyticFamily) -> complex:
    return complex(fam.critical_point) if fam.critical_point is not None else 0j


def _diagram_block(fam, t, s, burn, keep):
    real = fam.real_symmetric and s.imag == 0
    x = np.full(t.shape, s.real) if real else np.full(t.shape, s, dtype=complex)
    out = np.empty((keep, len(t)), dtype=x.dtype)
    with np.errstate(all="ignore"):
        for k in range(burn + keep):
            x = fam.G(t, x)
            if np.iscomplexobj(x) and fam.real_symmetric and s.imag == 0:
                x = x.real
            x = np.where(np.abs(x) <= fam.escape_radius, x, np.nan)
            if k >= burn:
                out[k - burn] = x
    return np.asarray(out.T.real, dtype=float)


def diagram(fam: AnalyticFamily, t_range, grid_n: int = 2000, seed=None, burn: int = 900,
            keep: int = 100, threads: int = 1) -> Diagram:
    """Iterates ``burn + 1 .. burn + keep`` of ``seed`` for each parameter on the grid.

    Iterates that leave the escape radius become NaN and are skipped in CSV
    output.  ``threads > 1`` splits the grid into contiguous blocks.
    """
    if grid_n < 2:
        raise DomainError("grid_n must be >= 2")
    t = np.linspace(float(t_range[0]), float(t_range[1]), grid_n)
    s = default_seed(fam) if seed is None else complex(seed)
    if threads > 1:
        blocks = np.array_split(t, threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            x = np.vstack(list(pool.map(lambda b: _diagram_block(fam, b, s, burn, keep), blocks)))
    else:
        x = _diagram_block(fam, t, s, burn, keep)
    return Diagram(t, x, s, burn, keep)


def cluster_cycle(fam: AnalyticFamily, t, values, q: int) -> Cycle:
    """Newton-polish the period-``q`` cycle traced by the last iterates in ``values``."""
    vals = np.asarray(values, dtype=float)
    vals = vals[np.isfinite(vals)]
    return find_cycle(fam, t, q, vals[-q:])
