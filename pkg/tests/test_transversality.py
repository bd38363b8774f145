import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parabifurc.cycles import find_cycle, find_parabolic_pair, find_symmetric_parabolic
from parabifurc.errors import DomainError, HypcohViolated, NotHyperbolic, SuperattractingUnsupported
from parabifurc.family import make_family
from parabifurc.maps import ComplexMap
from parabifurc.transversality import (L_field, Q_of, Qprime, Verdict, hypcoh_residual, koenigs,
                                       koenigs_coefficients_direct, solve_cohomology,
                                       transversality_report)


def fd_kappa_prime(fam, w, q, seed, h=1e-6):
    """Independent route: central difference of the continued multiplier."""
    kp = find_cycle(fam, w + h, q, seed).multiplier
    km = find_cycle(fam, w - h, q, seed).multiplier
    return (kp - km) / (2 * h)


def test_kappa_prime_quadratic_closed_form():
    fam = make_family("quad", c=-0.5)
    cyc = find_cycle(fam, -0.5, 1, [-0.3])
    rep = transversality_report(fam, cyc)
    assert abs(rep.kappa_prime - 2 / math.sqrt(3)) < 1e-12
    assert rep.verdict is Verdict.TRANSVERSAL


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.7, 0.2))
def test_kappa_prime_quadratic_property(c):
    fam = make_family("quad", c=c)
    a = (1 - math.sqrt(1 - 4 * c)) / 2
    cyc = find_cycle(fam, c, 1, [a])
    if abs(cyc.multiplier) < 1e-6:
        return
    rep = transversality_report(fam, cyc, probe=False)
    assert abs(rep.kappa_prime - 2 / math.sqrt(1 - 4 * c)) < 1e-9


def test_kappa_prime_logistic():
    fam = make_family("logistic", w=2.5)
    cyc = find_cycle(fam, 2.5, 1, [0.55])
    rep = transversality_report(fam, cyc)
    assert abs(rep.kappa_prime + 1) < 1e-12
    assert abs(rep.Q_at_points[0] - 0.24) < 1e-15
    assert abs(Qprime(fam, cyc) + 0.2) < 1e-15
    assert L_field(fam, 0.6, 2.5) == pytest.approx(0.24)


@pytest.mark.parametrize("name,w,q,seed", [
    ("logistic", 3.3, 2, [0.82, 0.48]),
    ("sine-mult", 2.0, 1, [1.9]),
    ("sine2-mult", 1.4, 1, [1.0]),
    ("quad", -1.1, 2, [0.1, -1.1]),
])
def test_kappa_prime_two_routes_agree(name, w, q, seed):
    fam = make_family(name, w=w) if name != "quad" else make_family("quad", c=w)
    cyc = find_cycle(fam, w, q, seed)
    rep = transversality_report(fam, cyc, probe=False)
    fd = fd_kappa_prime(fam, w, q, cyc.points)
    assert abs(rep.kappa_prime - fd) < 1e-6 * max(1.0, abs(fd))


def test_saddle_node_is_transversal_with_undefined_kappa_prime():
    fam = make_family("quad", c=0.25)
    w, cyc = find_parabolic_pair(fam, 1, 0.2, [0.45], 1.0)
    rep = transversality_report(fam, cyc)
    assert rep.kappa_prime is None
    assert rep.verdict is Verdict.TRANSVERSAL
    assert abs(rep.D2gq_a0 - 2) < 1e-6 and abs(rep.Q_at_points[0] - 1) < 1e-12


def test_pitchfork_is_degenerate_and_probe_reports_motion():
    fam = make_family("sine-mult", w=-2.2)
    _, cyc = find_symmetric_parabolic(fam, 1, -2.2, [2.0])
    rep = transversality_report(fam, cyc)
    assert rep.verdict is Verdict.DEGENERATE
    assert abs(Q_of(fam, cyc)) < 1e-9
    assert rep.probe is not None and rep.probe.symmetric and rep.probe.n_failed == 0
    # along the symmetric branch the multiplier moves at about |d kappa / d w| ~ 2.7
    slope = rep.probe.max_multiplier_variation / rep.probe.radius
    assert 2 < slope < 3.5


def test_superattracting_is_rejected():
    fam = make_family("quad", c=0.0)
    cyc = find_cycle(fam, 0.0, 1, [0.0])
    with pytest.raises(SuperattractingUnsupported):
        transversality_report(fam, cyc)


# --- Koenigs ---------------------------------------------------------------------

@pytest.mark.parametrize("kappa", [0.3, 0.5, 0.8j])
def test_koenigs_second_derivative(kappa):
    f = ComplexMap.polynomial([0, kappa, 1])
    lin = koenigs(f)
    assert abs(lin.second_derivative_at_fixed() - 2 / (kappa - kappa ** 2)) < 1e-10
    assert lin.residual(0.05) < 1e-12


@pytest.mark.parametrize("coeffs", [[0, 0.4, 1, 0.3], [0, 0.7j, -0.5, 0, 0.2], [0, -0.6, 0.1, 1]])
def test_koenigs_matches_direct_recursion(coeffs):
    f = ComplexMap.polynomial(coeffs)
    lin = koenigs(f, order=20)
    direct = koenigs_coefficients_direct(np.r_[coeffs, np.zeros(21 - len(coeffs))], 20)
    assert np.allclose(lin.coeffs[:21], direct, atol=1e-12, rtol=1e-10)


def test_koenigs_odd_map_has_no_even_terms():
    lin = koenigs(ComplexMap.polynomial([0, 0.6, 0, 1]))
    assert abs(lin.second_derivative_at_fixed()) < 1e-15


def test_koenigs_rejects_non_hyperbolic():
    with pytest.raises(NotHyperbolic):
        koenigs(ComplexMap.polynomial([0, 1, 1]))
    with pytest.raises(NotHyperbolic):
        koenigs(ComplexMap.polynomial([0, 1.5, 1]))
    with pytest.raises(DomainError):
        koenigs(ComplexMap.polynomial([0.1, 0.5, 1]))


def test_koenigs_pullback_far_from_the_fixed_point():
    f = ComplexMap.polynomial([0, 0.5, 1])
    lin = koenigs(f)
    z = 0.3 + 0.1j  # inside the basin, outside the series disk
    assert abs(lin(f(z)) - 0.5 * lin(z)) < 1e-12


# --- cohomological equation -----------------------------------------------------

def test_cohomology_constant_gamma_closed_form():
    f = ComplexMap.polynomial([0, 0.5])
    sol = solve_cohomology(f, ComplexMap.constant(3.0))
    assert abs(sol(0.01) - 6.0) < 1e-12
    assert sol.residual(0.05) < 1e-12


def test_cohomology_quadratic_gamma():
    kappa = 0.4
    f = ComplexMap.polynomial([0, kappa])
    sol = solve_cohomology(f, ComplexMap.polynomial([0, 0, 1]))
    z = 0.2
    assert abs(sol(z) - z * z / (kappa ** 2 - kappa)) < 1e-12


def test_cohomology_nonlinear_pair_and_anchor():
    kappa = 0.5
    f = ComplexMap.polynomial([0, kappa, 1])
    gamma = ComplexMap.polynomial([kappa - 1, 2, 0, 1])
    sol = solve_cohomology(f, gamma)
    assert sol.residual(0.05) < 1e-12
    anchored = solve_cohomology(f, gamma, anchor=0.05, value=1.5)
    assert abs(anchored(0.05) - 1.5) < 1e-10
    assert anchored.residual(0.05) < 1e-10
    with pytest.raises(DomainError):
        solve_cohomology(f, gamma, anchor=0.0, value=123.0)


def test_cohomology_rejects_incompatible_gamma():
    f = ComplexMap.polynomial([0, 0.5, 1])
    with pytest.raises(HypcohViolated):
        solve_cohomology(f, ComplexMap.constant(1.0))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 0.7), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_cohomology_residual_property(kappa, g0, g2, a2):
    f = ComplexMap.polynomial([0, kappa, a2])
    g1 = g0 * 2 * a2 / (kappa - 1)  # makes Gamma compatible at the fixed point
    gamma = ComplexMap.polynomial([g0, g1, g2])
    res, sc = hypcoh_residual(f, gamma)
    assert res <= 1e-12 * sc
    sol = solve_cohomology(f, gamma)
    assert sol.residual(0.04) < 1e-9 * max(1.0, abs(g0) + abs(g1) + abs(g2))
