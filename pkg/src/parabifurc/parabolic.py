"""Geometry near a parabolic cycle: petal directions, cusp sectors, and the set
of points whose orbits stay close to the cycle and converge to it."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cycles import Cycle, Kind, return_map_jet
from .errors import DegenerateParabolic, NotParabolic
from .family import AnalyticFamily
from .jets import MAX_KZ

DEFAULT_ALPHA = 0.5
CONV_EPS = 1e-9


class Sector(enum.Enum):
    REPELLING = "RepellingCusp"
    ATTRACTING = "AttractingCusp"
    NEITHER = "Neither"


class Membership(enum.IntEnum):
    OUTSIDE = 0
    UNDECIDED = 128
    INSIDE = 255


@dataclass
class PetalGeometry:
    cycle: Cycle
    p: int
    l: int
    A: list
    alpha: float
    theta_att: list
    theta_rep: list
    r: float

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "l": self.l,
            "A": [[complex(a).real, complex(a).imag] for a in self.A],
            "alpha": self.alpha,
            "theta_att": [list(t) for t in self.theta_att],
            "theta_rep": [list(t) for t in self.theta_rep],
            "r": self.r,
        }


def _directions(A: complex, p: int, target: float) -> list:
    """Turns ``theta`` in [0, 1) with ``arg(A) + 2 pi p theta = target (mod 2 pi)``."""
    base = (target - np.angle(A)) / (2 * math.pi * p)
    return sorted(float((base + k / p) % 1.0) for k in range(p))


def petal_geometry(fam: AnalyticFamily, cyc: Cycle, alpha: float = DEFAULT_ALPHA, r: float = 0.05,
                   degeneracy_tol: float = 1e-10) -> PetalGeometry:
    """Leading coefficients ``A_j = D^{p+1} g^{pq}(a_j)/(p+1)!`` and the petal axes.

    Attracting axes make ``A_j e^{2 pi i p theta}`` negative, repelling axes positive.
    """
    if cyc.classification.kind is not Kind.PARABOLIC:
        raise NotParabolic(f"cycle is {cyc.classification}, not parabolic")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    p, l = cyc.classification.p, cyc.classification.l
    if p + 1 > MAX_KZ:
        raise NotParabolic(f"p={p} needs jet order {p + 1} above the cap {MAX_KZ}")
    A, att, rep = [], [], []
    for j in range(cyc.q):
        c = return_map_jet(fam, cyc, p + 1, 0, repeat=p, start_index=j).coeffs[:, 0]
        a = complex(c[p + 1])
        scale = max(1.0, float(np.max(np.abs(c[1:]))))
        if abs(a) < degeneracy_tol * scale:
            raise DegenerateParabolic(
                f"leading coefficient at a_{j} is {abs(a):.3g}: degenerate parabolic point")
        A.append(a)
        att.append(_directions(a, p, math.pi))
        rep.append(_directions(a, p, 0.0))
    return PetalGeometry(cyc, p, l, A, float(alpha), att, rep, float(r))


def _turn_distance(t, thetas):
    """Distance mod 1 from turns ``t`` (array) to the nearest of ``thetas``."""
    t = np.asarray(t, dtype=float)
    best = np.full(t.shape, np.inf)
    for th in thetas:
        d = np.abs((t - th + 0.5) % 1.0 - 0.5)
        best = np.minimum(best, d)
    return best


def sector_codes(geom: PetalGeometry, j: int, z) -> np.ndarray:
    """Vectorized sector test: 1 repelling cusp, -1 attracting cusp, 0 neither."""
    dz = np.asarray(z, dtype=complex) - geom.cycle.points[j]
    s = np.abs(dz)
    t = (np.angle(dz) / (2 * math.pi)) % 1.0
    inside = (s > 0) & (s < geom.r)
    width = np.where(s > 0, s, 1.0) ** geom.alpha
    rep = inside & (_turn_distance(t, geom.theta_rep[j]) < width)
    att = inside & ~rep & (_turn_distance(t, geom.theta_att[j]) < width)
    return rep.astype(int) - att.astype(int)


def sector_membership(geom: PetalGeometry, j: int, z) -> Sector:
    code = int(sector_codes(geom, j, np.array([complex(z)]))[0])
    return {1: Sector.REPELLING, -1: Sector.ATTRACTING, 0: Sector.NEITHER}[code]


def _orbit_distance(points: np.ndarray, z: np.ndarray) -> np.ndarray:
    return np.min(np.abs(z[..., None] - points), axis=-1)


def omega_grid(fam: AnalyticFamily, cyc: Cycle, r: float, z, budget: int = 2000,
               conv_eps: float = CONV_EPS) -> np.ndarray:
    """Vectorized three-valued test of ``sup_n d(g^n z, O) <= r`` with convergence to ``O``.

    Returns ``Membership`` codes.  A point is Inside when it gets within
    ``conv_eps`` of the cycle, or when over the last tenth of the budget its
    distance (sampled every ``q`` steps) stays below ``r/10`` and never grows.
    """
    z = np.array(z, dtype=complex)
    shape = z.shape
    z = z.ravel()
    pts = np.asarray(cyc.points)
    q = cyc.q
    out = np.full(z.shape, int(Membership.UNDECIDED))
    active = np.ones(z.shape, dtype=bool)
    d = _orbit_distance(pts, z)
    out[d > r] = Membership.OUTSIDE
    active &= d <= r
    out[active & (d < conv_eps)] = Membership.INSIDE
    active &= ~(d < conv_eps)
    tail_start = budget - max(budget // 10, q)
    monotone = np.ones(z.shape, dtype=bool)
    history = [None] * q
    for n in range(1, budget + 1):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        with np.errstate(all="ignore"):
            z[idx] = fam.G(cyc.w, z[idx])
        dn = _orbit_distance(pts, z[idx])
        bad = ~(dn <= r)
        out[idx[bad]] = Membership.OUTSIDE
        good = dn < conv_eps
        out[idx[good & ~bad]] = Membership.INSIDE
        active[idx[bad | good]] = False
        if n >= tail_start:
            full = np.full(z.shape, np.inf)
            full[idx] = dn
            prev = history[n % q]
            ok = full < r / 10
            if prev is not None:
                ok &= full <= prev
            monotone &= ok | ~active
            history[n % q] = full
    decided = active & monotone
    out[decided] = Membership.INSIDE
    return out.reshape(shape)


def omega_membership(fam: AnalyticFamily, cyc: Cycle, r: float, z, budget: int = 2000,
                     conv_eps: float = CONV_EPS) -> Membership:
    return Membership(int(omega_grid(fam, cyc, r, np.array([complex(z)]), budget, conv_eps)[0]))


@dataclass
class FlowerReport:
    tau: float
    r_omega: float
    alpha: float
    grid_n: int
    counts: dict
    violations: list
    max_entry_time: int
    never_entered: int
    images: list = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "r_omega": self.r_omega,
            "alpha": self.alpha,
            "grid_n": self.grid_n,
            "counts": dict(self.counts),
            "violations": [[complex(z).real, complex(z).imag] for z in self.violations],
            "max_entry_time": self.max_entry_time,
            "never_entered": self.never_entered,
        }


def flower_escape_check(fam: AnalyticFamily, cyc: Cycle, geom: PetalGeometry, r: Optional[float] = None,
                        grid_n: int = 101, budget: int = 2000,
                        entry_budget: int = 100000) -> FlowerReport:
    """Sample ``B(a_j, tau)`` with ``tau = geom.r`` and test the flower picture.

    Points that leave the ``r``-neighbourhood must start in a repelling cusp;
    points that stay must eventually enter an attracting cusp.  ``r`` defaults
    to ``2 tau`` (equivalently ``tau = r/2``).  Entry into the attracting cusps
    is slow for orbits that swing wide around the cycle, hence the separate
    ``entry_budget``.
    """
    tau = geom.r
    r = 2 * tau if r is None else float(r)
    counts = {m.name.capitalize(): 0 for m in Membership}
    violations = []
    max_entry, never = 0, 0
    images = []
    ax = np.linspace(-tau, tau, grid_n)
    X, Y = np.meshgrid(ax, ax[::-1])
    for j in range(cyc.q):
        Z = cyc.points[j] + X + 1j * Y
        dist = np.abs(Z - cyc.points[j])
        in_ball = (dist > 0) & (dist < tau)
        codes = omega_grid(fam, cyc, r, Z, budget)
        img = codes.astype(np.uint8)
        img[~in_ball] = Membership.UNDECIDED
        images.append(img)
        for m in Membership:
            counts[m.name.capitalize()] += int(np.sum((codes == m) & in_ball))
        out_pts = Z[(codes == Membership.OUTSIDE) & in_ball]
        if out_pts.size:
            sec = sector_codes(geom, j, out_pts)
            violations.extend(out_pts[sec != 1].tolist())
        ins = Z[(codes == Membership.INSIDE) & in_ball]
        entry = np.full(ins.shape, -1)
        pending = np.arange(ins.size)
        cur = ins.copy()
        for n in range(entry_budget + 1):
            hit = np.zeros(cur.shape, dtype=bool)
            for k in range(cyc.q):
                hit |= sector_codes(geom, k, cur) == -1
            entry[pending[hit]] = n
            pending, cur = pending[~hit], cur[~hit]
            if not pending.size:
                break
            with np.errstate(all="ignore"):
                cur = fam.G(cyc.w, cur)
        never += int(np.sum(entry < 0))
        if entry.size and np.any(entry >= 0):
            max_entry = max(max_entry, int(entry[entry >= 0].max()))
    return FlowerReport(tau, r, geom.alpha, grid_n, counts, violations, max_entry, never, images)
