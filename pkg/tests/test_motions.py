import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parabifurc.cycles import make_cycle
from parabifurc.errors import (BranchJump, DerivativeVanished, DomainError, NotParabolic,
                               ParameterOutsideW, ResidualUnderflow, ShapeMismatch)
from parabifurc.family import custom_family, make_family, orbit
from parabifurc.motions import (MotionTruncation, average, cycle_branch_motion, d_rho, holder_check,
                                invariance_order, lift, lift_sequence, marked_orbit, radial_lambdas, spread_growth,
                                speed_field, speed_field_jet, speed_field_motion, v_rho_field)


def quad(c):
    return make_family("quad", c=c)


def cubic_parabolic(w=-0.3):
    """``z + z^2 + w z^3``: parabolic fixed point at 0 for every ``w``."""
    def jet(w, z, kz, kw):
        out = np.zeros((kz + 1, kw + 1), dtype=complex)
        base = [z + z * z + w * z ** 3, 1 + 2 * z + 3 * w * z * z, 1 + 3 * w * z, w]
        dw = [z ** 3, 3 * z * z, 3 * z, 1]
        for i in range(min(kz, 3) + 1):
            out[i, 0] = base[i]
            if kw >= 1:
                out[i, 1] = dw[i]
        return out
    return custom_family("cubic-parabolic", jet, c1=w,
                         func=lambda w, z: z + z * z + w * z ** 3,
                         dfunc=lambda w, z: 1 + 2 * z + 3 * w * z * z)


# --- speed fields -------------------------------------------------------------

def test_speed_field_quadratic_hand_recursion():
    fld = speed_field(quad(-0.5), 4)
    assert fld.points[1] == -0.25
    assert np.allclose(fld.v[:3], [1, 0, 1], atol=0)
    assert fld.recursion_residual <= 1e-12
    assert fld.jet_check <= 1e-10


@pytest.mark.parametrize("name,kw", [("quad", {"c": -1.3}), ("logistic", {"w": 2.5}),
                                     ("sine-mult", {"w": 2.0}), ("flat-add", {})])
def test_speed_field_matches_jet_oracle(name, kw):
    fam = make_family(name, **kw)
    fld = speed_field(fam, 30, jet_check_upto=20)
    assert fld.v[0] == 1
    assert fld.jet_check <= 1e-10
    assert fld.recursion_residual <= 1e-12


def test_additive_second_value_is_one_plus_derivative():
    fam = quad(0.1 + 0.2j)
    fld = speed_field(fam, 3)
    c1 = fld.points[0]
    assert abs(fld.v[1] - (1 + 2 * c1)) < 1e-15


def test_logistic_second_value_against_jet():
    fam = make_family("logistic", w=2.5)
    fld = speed_field(fam, 2, jet_check_upto=0)
    assert abs(fld.v[1] - speed_field_jet(fam, 2)) <= 1e-12 * max(1, abs(fld.v[1]))


# --- eigen-fields and the weighted series -------------------------------------

def test_v_rho_eigen_relation():
    fld = v_rho_field(quad(-0.5 + 0.01j), 0.5, 50)
    assert fld.recursion_residual <= 1e-9


def test_v_rho_two_term_formula_and_rho_range():
    fam = quad(0.2)
    fld = v_rho_field(fam, 0.25, 2)
    assert abs(fld.v[1] - (1 + 2 * 0.2 / 0.25)) < 1e-15
    with pytest.raises(DomainError):
        v_rho_field(fam, 1.0, 5)
    with pytest.raises(DerivativeVanished):
        v_rho_field(quad(0.0), 0.5, 5)


def test_d_rho_positive_on_parabolic_quadratic():
    fam = quad(0.25)
    for rho in np.linspace(0.1, 0.9, 9):
        rep = d_rho(fam, float(rho), 2000)
        assert rep.positive and rep.partial_sum.real > 1
        assert rep.tail_bound >= 0


def test_d_rho_small_rho_tends_to_one():
    rep = d_rho(quad(0.25), 1e-9, 50)
    assert abs(rep.partial_sum - 1) < 1e-8


def test_d_rho_superattracting_has_vanishing_derivative():
    with pytest.raises(DerivativeVanished):
        d_rho(quad(0.0), 0.5, 10)
    with pytest.raises(DomainError):
        d_rho(quad(0.25), 0.0, 10)


# --- motions and lifting --------------------------------------------------------

def attracting_fixed_point(c=-0.5):
    fam = quad(c)
    a = (1 - math.sqrt(1 - 4 * c)) / 2
    return fam, make_cycle(fam, c, [a])


def test_exact_cycle_motion_is_fixed_by_lifting():
    fam, cyc = attracting_fixed_point()
    h = cycle_branch_motion(fam, cyc)
    assert h.basepoint_error() == 0
    g = lift(fam, h)
    assert np.max(np.abs(g.values - h.values)) <= 1e-12
    rep = invariance_order(fam, h)
    assert rep.status == "ResidualUnderflow" and rep.order == math.inf
    with pytest.raises(ResidualUnderflow):
        invariance_order(fam, h, raise_on_underflow=True)


def test_identity_motion_lifts_to_nearest_square_root_branch():
    fam = quad(-0.5)
    pts = marked_orbit(fam, 12)
    lam = radial_lambdas()
    h = MotionTruncation(pts, lam, np.repeat(pts[:, None], len(lam), axis=1),
                         np.r_[np.arange(1, 12), -1], 10, -0.5, 0)
    g = lift(fam, h)
    gx = pts[1:11]
    y = g.values[:10]
    assert np.max(np.abs(y ** 2 - 0.5 - gx[:, None])) <= 1e-14
    # the other root -y is farther from the seed
    assert np.all(np.abs(y - pts[:10, None]) <= np.abs(-y - pts[:10, None]))


def test_speed_field_motion_has_order_one():
    fam = quad(-0.5)
    h = speed_field_motion(fam, 20)
    assert h.basepoint_error() == 0
    assert h.injectivity_margin() > 0
    rep = invariance_order(fam, h)
    assert abs(rep.slope - 2) <= 0.2


def test_lifting_keeps_core_support_and_shrinks_tail():
    fam = quad(-0.5)
    h = speed_field_motion(fam, 20, tail=4)
    seq = lift_sequence(fam, h, 6)
    assert [len(m.support) for m in seq] == [24, 23, 22, 21, 20, 20]
    assert not seq[4].extrapolated_tail and seq[5].extrapolated_tail
    for m in seq:
        assert np.array_equal(m.support[:20], h.support[:20])


def test_branch_jump_detected():
    # the only preimages of -0.5 + 0.1i under z^2 are near +-0.7i, far from the seed 0.5
    h = MotionTruncation([0.5 + 0j], [0.1], [[-0.5 + 0.1j]], [0], 1, 0.0, None, np.array([0.0]))
    with pytest.raises(BranchJump):
        lift(quad(0.0), h)
    # a real seed cannot reach a non-real root: Newton never settles
    h = MotionTruncation([0.5 + 0j], [0.1], [[-0.5 + 0j]], [0], 1, 0.0, None, np.array([0.0]))
    with pytest.raises(BranchJump):
        lift(quad(0.0), h)


def test_parameter_outside_domain():
    fam = make_family("flat-add")
    h = speed_field_motion(fam, 5, lambdas=radial_lambdas(direction=1j))
    with pytest.raises(ParameterOutsideW):
        lift(fam, h)


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        MotionTruncation([0j, 1j], [0.0, 0.1], np.zeros((2, 3)), [1, -1], 2, 0.0)
    fam = quad(-0.5)
    a = speed_field_motion(fam, 5)
    b = speed_field_motion(fam, 5, lambdas=radial_lambdas(n=4))
    with pytest.raises(ShapeMismatch):
        average([a, b])
    with pytest.raises(ShapeMismatch):
        average([])


def test_average_of_copies_and_midpoint():
    fam = quad(-0.5)
    h = speed_field_motion(fam, 10)
    assert np.array_equal(average([h, h, h]).values, h.values)
    g = lift(fam, h)
    mid = average([h, g])
    n = len(mid.support)
    assert np.allclose(mid.values, (h.values[:n] + g.values[:n]) / 2, rtol=0, atol=1e-15)
    assert mid.basepoint_error() <= 1e-15
    # one lift moves an order-one motion by O(lambda^2) on the core
    diff = np.max(np.abs(g.values[:10] - h.values[:10]), axis=0)[1:]
    lam = np.abs(h.lambdas[1:])
    slope = np.polyfit(np.log(lam[diff > 1e-13]), np.log(diff[diff > 1e-13]), 1)[0]
    assert abs(slope - 2) < 0.2


@settings(max_examples=25, deadline=None)
@given(st.floats(-1.2, 0.2), st.floats(0.0, 1.0))
def test_average_is_affine(c, t):
    fam = quad(c)
    h = speed_field_motion(fam, 8)
    g = speed_field_motion(fam, 8, epsilon=1e-2)
    g.values = g.values * 0 + h.support[:, None] + 2 * (h.values - h.support[:, None])
    m = average([h, g])
    expected = h.support[:, None] + 1.5 * (h.values - h.support[:, None])
    assert np.allclose(m.values, expected, rtol=0, atol=1e-14)
    assert m.basepoint_error() <= 1e-15


def test_csv_rows_layout():
    h = speed_field_motion(quad(-0.5), 3)
    rows = h.csv_rows()
    assert rows[0] == ["index", "lambda_re", "lambda_im", "value_re", "value_im"]
    assert len(rows) == 1 + 3 * len(h.lambdas)


# --- Hoelder-type ratios ---------------------------------------------------------

def test_holder_bounded_when_hypothesis_holds():
    fam = cubic_parabolic()
    cyc = make_cycle(fam, fam.c1, [0j], 1e-7)
    rep = holder_check(fam, cyc, 2000)
    assert rep.hypothesis_holds and rep.bounded
    assert rep.trend < 0.1 and max(rep.ratios) < 20


def test_holder_quadratic_violates_hypothesis():
    fam = quad(0.25)
    cyc = make_cycle(fam, 0.25, [0.5], 1e-7)
    rep = holder_check(fam, cyc, 2000)
    assert not rep.hypothesis_holds and rep.bounded is None
    assert rep.trend > 1  # the raw ratios grow without the polynomial correction
    empty = holder_check(fam, cyc, 2)
    assert empty.ratios == [] and empty.bounded is None


def test_holder_rejects_hyperbolic_cycle():
    fam, cyc = attracting_fixed_point()
    with pytest.raises(NotParabolic):
        holder_check(fam, cyc, 100)


def test_spread_growth_flags_runaway_sequences():
    fam = quad(-0.5)
    h = speed_field_motion(fam, 20)
    rep = spread_growth(lift_sequence(fam, h, 5))
    assert not rep["flagged"] and len(rep["spreads"]) == 5
    big = MotionTruncation(h.support, h.lambdas, h.support[:, None] + 20 * (h.values - h.support[:, None]),
                           h.succ, h.n_core, h.w0)
    assert spread_growth([h, big])["flagged"]
