import math

import numpy as np
import pytest

from parabifurc.bifurcation import (Diagram, EventKind, continue_right, detect_windows, diagram,
                                    fixed_points_of_iterate, locate_event, locate_period_doubling,
                                    locate_pitchfork, locate_saddle_node, minimal_period, orientation,
                                    scan, window_events)
from parabifurc.cycles import BranchStatus, find_cycle
from parabifurc.errors import DegenerateFold, NotOdd
from parabifurc.family import make_family, polynomial_family
from parabifurc.io import csv_text

SQRT6 = math.sqrt(6)
W_PITCHFORK = -2.2618263341146596


@pytest.fixture(scope="module")
def logistic_windows():
    fam = make_family("logistic", w=3.0)
    pts = scan(fam, (2.8, 3.6), grid_n=81)
    return fam, pts, detect_windows(fam, pts)


# --- scanning ------------------------------------------------------------------

def test_scan_closed_forms():
    fam = make_family("logistic", w=2.5)
    a, b = scan(fam, (2.5, 3.2), grid_n=2)
    assert a.status == "periodic" and a.q == 1
    assert abs(a.cycle.points[0] - 0.6) < 1e-12 and abs(a.kappa + 0.5) < 1e-12
    assert b.q == 2 and abs(b.kappa - (4 + 2 * 3.2 - 3.2 ** 2)) < 1e-12


def test_scan_marks_chaos_unresolved_and_escape():
    fam = make_family("logistic", w=3.9)
    pts = scan(fam, (3.9, 4.5), grid_n=2)
    assert pts[0].status == "unresolved"
    assert pts[1].status == "escaped"


def test_scan_threads_give_identical_rows():
    fam = make_family("logistic", w=3.0)
    one = [p.to_row() for p in scan(fam, (2.9, 3.9), grid_n=40)]
    four = [p.to_row() for p in scan(fam, (2.9, 3.9), grid_n=40, threads=4)]
    assert csv_text(one) == csv_text(four)


def test_sine_scan_near_pitchfork_has_period_two_on_both_sides():
    fam = make_family("sine-mult", w=-2.2)
    left, right = scan(fam, (W_PITCHFORK - 0.05, W_PITCHFORK + 0.05), grid_n=2,
                       seed=math.pi / 2, n_iter=5000, transient=4900)
    assert left.q == 2 and right.q == 2
    # beyond the pitchfork the attractor is one of two asymmetric cycles
    assert abs(sum(left.cycle.points)) > 1e-3
    assert abs(sum(right.cycle.points)) < 1e-9


def test_minimal_period():
    assert minimal_period([0.1, 0.2, 0.1, 0.2]) == 2
    assert minimal_period([0.5, 0.5, 0.5]) == 1
    assert minimal_period([0.1, 0.2, 0.3]) == 3


# --- windows -------------------------------------------------------------------

def test_logistic_windows_and_edges(logistic_windows):
    fam, _, wins = logistic_windows
    by_q = {w.q: w for w in wins}
    assert by_q[1].t_hi == pytest.approx(3.0, abs=1e-9)
    assert by_q[2].t_lo == pytest.approx(3.0, abs=1e-9)
    assert by_q[2].t_hi == pytest.approx(1 + SQRT6, abs=1e-9)
    for win in wins:
        assert all(-1 < k < 1 for _, k in win.kappa_samples)
        assert win.orientation == 1
        if win.q >= 2:
            ks = [k for _, k in win.kappa_samples]
            assert max(np.diff(ks)) < 0  # strictly decreasing
            assert not win.defects
    for t, k in by_q[2].kappa_samples:
        assert abs(k - (4 + 2 * t - t * t)) < 1e-10
    for t, k in by_q[1].kappa_samples:
        assert abs(k - (2 - t)) < 1e-10


def test_multiplier_changes_sign_at_superattracting_two_cycle(logistic_windows):
    fam, _, wins = logistic_windows
    win = next(w for w in wins if w.q == 2)
    t0 = win.superattracting_t
    assert abs(t0 - (1 + math.sqrt(5))) < 1e-9
    before = [k for t, k in win.kappa_samples if t < t0]
    after = [k for t, k in win.kappa_samples if t > t0]
    assert all(k > 0 for k in before) and all(k < 0 for k in after)
    # and from the solver directly
    for dt, sign in ((-1e-3, 1), (1e-3, -1)):
        cyc = find_cycle(fam, t0 + dt, 2, [0.5, 0.8])
        assert np.sign(cyc.multiplier.real) == sign


def test_quadratic_window_orientation():
    fam = make_family("quad", c=0.0)
    assert orientation(fam, 0.0) == -1
    assert orientation(make_family("logistic", w=3.0), 3.0) == 1
    wins = detect_windows(fam, scan(fam, (-0.74, 0.24), grid_n=50))
    win = next(w for w in wins if w.q == 1)
    ks = [k for _, k in win.kappa_samples]
    # kappa increases in c; decreasing once mapped through the orientation flag
    assert win.orientation == -1 and min(np.diff(ks)) > 0
    assert max(win.orientation * np.diff(ks)) < 0 and not win.defects
    for t, k in win.kappa_samples:
        assert abs(k - (1 - math.sqrt(1 - 4 * t))) < 1e-10


# --- events --------------------------------------------------------------------

def test_quadratic_saddle_node():
    fam = make_family("quad", c=0.2)
    ev = locate_saddle_node(fam, 1, 0.2, [0.3])
    assert ev.kind is EventKind.SADDLE_NODE
    assert abs(ev.t_star - 0.25) < 1e-12 and abs(ev.a0 - 0.5) < 1e-7
    c = ev.certificate
    assert c["Q_a0"] == pytest.approx(1.0) and c["D2gq_a0"] == pytest.approx(2.0)
    assert (c["census_minus"], c["census_plus"]) == (2, 0)
    assert c["Q_sign_oriented"] == 1


def test_logistic_flip_census():
    fam = make_family("logistic", w=3.0)
    ev = locate_period_doubling(fam, 1, 2.95, [1 - 1 / 2.95])
    assert ev.kind is EventKind.PERIOD_DOUBLING and abs(ev.t_star - 3) < 1e-12
    c = ev.certificate
    assert (c["census_pre"], c["census_post"]) == (1, 3) and c["post_side"] == "plus"
    assert c["kappa_prime"] == pytest.approx(-1.0, rel=1e-12)


def test_quadratic_flip_runs_in_decreasing_c():
    fam = make_family("quad", c=-0.7)
    ev = locate_period_doubling(fam, 1, -0.7, [(1 - math.sqrt(3.8)) / 2])
    assert abs(ev.t_star + 0.75) < 1e-12
    assert ev.certificate["post_side"] == "minus"


def brute_force_period3_tangency(lo=3.82, hi=3.84, tol=1e-9):
    """Smallest logistic parameter where ``f^3(x) - x`` gains sign changes beyond the two fixed points."""
    x = np.linspace(0.0, 1.0, 400001)

    def count(w):
        y = x
        for _ in range(3):
            y = w * y * (1 - y)
        s = np.sign(y - x)
        return int(np.sum(s[1:] * s[:-1] < 0))

    assert count(lo) <= 2 and count(hi) >= 6
    while hi - lo > tol:
        mid = (lo + hi) / 2
        lo, hi = (lo, mid) if count(mid) >= 6 else (mid, hi)
    return hi


def test_period_three_fold_matches_brute_force():
    oracle = brute_force_period3_tangency()
    assert abs(oracle - (1 + math.sqrt(8))) < 1e-6
    fam = make_family("logistic", w=3.83)
    seed = find_cycle(fam, 3.83, 3, [0.16, 0.51, 0.96])
    ev = locate_saddle_node(fam, 3, 3.83, seed.points)
    assert abs(ev.t_star - (1 + math.sqrt(8))) < 1e-12
    assert abs(ev.t_star - oracle) < 1e-6
    c = ev.certificate
    assert sorted([c["census_minus"], c["census_plus"]]) == [0, 2]
    assert c["Q_sign_oriented"] == 1


def test_pitchfork_certificate_and_degenerate_fold():
    fam = make_family("sine-mult", w=-2.2)
    ev = locate_pitchfork(fam, 2, -2.2, [2.0])
    assert ev.kind is EventKind.PITCHFORK
    assert abs(ev.t_star - W_PITCHFORK) < 1e-12
    a0 = ev.a0
    assert abs(math.tan(a0) + a0) < 1e-12  # tan a = -a at the symmetric parabolic cycle
    c = ev.certificate
    assert c["symmetry_error"] <= 1e-10 and abs(c["Q_a0"]) < 1e-10
    with pytest.raises(DegenerateFold):
        locate_saddle_node(fam, 2, ev.t_star, ev.cycle.points)
    with pytest.raises(NotOdd):
        locate_pitchfork(make_family("logistic", w=3.0), 2, 3.2, [0.5])


def brute_force_first_flip(fam, lo, hi):
    """Scan oracle: bisect on the period of the attractor found by plain iteration."""
    def period(w):
        return scan(fam, (w, w), grid_n=2, seed=math.pi / 2, n_iter=20000, transient=19000)[0].q
    assert period(lo) == 1 and period(hi) == 2
    while hi - lo > 1e-6:
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if period(mid) == 1 else (lo, mid)
    return (lo + hi) / 2


def test_sine_positive_flip_dispatched_as_period_doubling():
    fam = make_family("sine-mult", w=2.0)
    oracle = brute_force_first_flip(fam, 2.0, 2.5)
    seed = find_cycle(fam, 2.2, 1, [2.0])
    ev = locate_event(fam, 1, 2.2, seed.points, -1.0)
    assert ev.kind is EventKind.PERIOD_DOUBLING
    assert abs(ev.t_star - oracle) < 1e-4
    assert abs(ev.t_star + W_PITCHFORK) < 1e-12  # same equation tan a = -a on the positive side


def test_symmetric_edge_dispatched_to_pitchfork():
    fam = make_family("sine-mult", w=-2.2)
    ev = locate_event(fam, 2, -2.2, [2.0, -2.0], 1.0)
    assert ev.kind is EventKind.PITCHFORK


def test_unmatched_edge_becomes_degenerate_other():
    # the logistic transcritical point at w = 1 has Q(a0) = 0
    fam = make_family("logistic", w=0.9)
    ev = locate_event(fam, 1, 0.9, [0.0], 1.0)
    assert ev.kind is EventKind.DEGENERATE_OTHER and "reason" in ev.certificate


@pytest.mark.parametrize("case", ["fold", "flip", "period3", "pitchfork"])
def test_events_relocate_from_perturbed_seeds(case):
    if case == "fold":
        fam = make_family("quad", c=0.2)
        runs = [locate_saddle_node(fam, 1, c, [0.3 + d]) for c, d in ((0.2, 0), (0.22, 0.05), (0.24, -0.02))]
    elif case == "flip":
        fam = make_family("logistic", w=3.0)
        runs = [locate_period_doubling(fam, 1, w, [1 - 1 / w]) for w in (2.9, 2.95, 3.1)]
    elif case == "period3":
        fam = make_family("logistic", w=3.83)
        seeds = [find_cycle(fam, w, 3, [0.16, 0.51, 0.96]).points for w in (3.83, 3.84, 3.86)]
        runs = [locate_saddle_node(fam, 3, w, s) for w, s in zip((3.83, 3.84, 3.86), seeds)]
    else:
        fam = make_family("sine-mult", w=-2.2)
        runs = [locate_pitchfork(fam, 2, w, [x]) for w, x in ((-2.2, 2.0), (-2.3, 2.1), (-2.1, 1.9))]
    ts = [r.t_star for r in runs]
    assert max(ts) - min(ts) <= 1e-8


@pytest.mark.parametrize("name,w,q,seed,t_star", [
    ("logistic", 2.95, 1, [1 - 1 / 2.95], 3.0),
    ("logistic", 3.4, 2, [0.45, 0.84], 1 + SQRT6),
    ("quad", -0.7, 1, [(1 - math.sqrt(3.8)) / 2], -0.75),
])
def test_kappa_prime_matches_branch_slope(name, w, q, seed, t_star):
    fam = make_family(name, **({"c": w} if name == "quad" else {"w": w}))
    ev = locate_period_doubling(fam, q, w, seed)
    kp = ev.certificate["kappa_prime"]
    br = continue_right(fam, ev.cycle, ev.t_star + 1e-3 * np.sign(w - t_star) * -1)
    assert br.status is BranchStatus.REACHED_ENDPOINT
    h = 1e-5
    plus = find_cycle(fam, ev.t_star + h, q, ev.cycle.points).multiplier.real
    minus = find_cycle(fam, ev.t_star - h, q, ev.cycle.points).multiplier.real
    fd = (plus - minus) / (2 * h)
    assert abs(fd - kp) <= 1e-6 * abs(kp)


def test_window_events_deduplicate_shared_edges(logistic_windows):
    fam, _, wins = logistic_windows
    evs = window_events(fam, wins[:3])
    flips = [e for e in evs if e.kind is EventKind.PERIOD_DOUBLING]
    assert [e.q for e in flips] == [1, 2, 4]
    assert abs(flips[1].t_star - (1 + SQRT6)) < 1e-12


def test_fixed_point_census_of_iterate():
    fam = make_family("logistic", w=3.1)
    roots = fixed_points_of_iterate(fam, 3.1, 2, 1 - 1 / 3.1, 0.3)
    assert len(roots) == 3


# --- continuation to the right ---------------------------------------------------

def test_continue_right_survives():
    fam = make_family("logistic", w=3.2)
    br = continue_right(fam, find_cycle(fam, 3.2, 2, [0.5, 0.8]), 4.0)
    assert br.status is BranchStatus.REACHED_ENDPOINT and br.t[-1] == 4.0
    quad = make_family("quad", c=0.0)
    br = continue_right(quad, find_cycle(quad, 0.0, 1, [0.0]), -2.0)
    assert br.status is BranchStatus.REACHED_ENDPOINT and br.t[-1] == -2.0


# --- diagrams ---------------------------------------------------------------------

def test_constant_family_diagram_is_a_line():
    fam = polynomial_family([0.3], id="constant")
    d = diagram(fam, (0.0, 1.0), grid_n=5, seed=0.0, burn=3, keep=4)
    assert d.x.shape == (5, 4) and np.all(d.x == 0.3)


def test_logistic_diagram_columns_and_outputs():
    fam = make_family("logistic", w=3.0)
    d = diagram(fam, (2.8, 4.0), grid_n=121)
    t, col = d.column(2.9)
    assert abs(t - 2.9) < 1e-12 and np.ptp(col) < 1e-8
    _, col = d.column(3.2)
    assert len(np.unique(np.round(col, 6))) == 2
    _, col = d.column(3.9)
    assert len(np.unique(np.round(col, 6))) > 50
    rows = d.csv_rows()
    assert rows[0] == ["t", "x"] and len(rows) == 1 + 121 * 100
    img = d.raster(height=64)
    assert img.shape == (64, 121) and img.dtype == np.uint8
    assert set(np.unique(img)) <= {0, 255} and (img == 0).any()
    assert np.array_equal(d.x, diagram(fam, (2.8, 4.0), grid_n=121, threads=3).x)


def test_sine_diagram_default_seed_and_escape():
    fam = make_family("sine-mult", w=1.0)
    d = diagram(fam, (-10, 10), grid_n=201, seed=math.pi / 2)
    assert np.all(np.isfinite(d.x))
    assert np.all(np.abs(d.x) <= 10 + 1e-12)
    fam = make_family("logistic", w=3.0)
    d = diagram(fam, (4.5, 5.0), grid_n=3)
    assert np.all(np.isnan(d.x)) and d.csv_rows() == [["t", "x"]]
    assert isinstance(d, Diagram)
