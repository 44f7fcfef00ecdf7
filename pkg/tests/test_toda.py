"""Toda flows: deformation paths, Lax structure, finite-difference residuals."""

import pytest
from mpmath import mp, mpf

from sobpoly.core import MeasureMatrix, assemble_moment_matrix
from sobpoly.linalg import BandProfile, Matrix, matrix_close
from sobpoly.measures import Measure, hermite, uniform
from sobpoly.poly import Polynomial
from sobpoly.precision import tolerance
from sobpoly.toda import (
    TimePoint,
    deformed_moment_matrix,
    evolve,
    exp_series,
    lax_residual,
    wave_two_time_residual,
    zakharov_shabat_residual,
)

TOL100 = mpf(2) ** -100


def hermite_w():
    return MeasureMatrix.standard(Measure.continuous(hermite()))


def sobolev_herm_w():
    w = MeasureMatrix(1)
    w.set_entry(0, 0, Measure.continuous(hermite(), Polynomial((2,))))
    w.set_entry(1, 1, Measure.continuous(hermite()))
    w.set_entry(0, 1, Measure.continuous(hermite(), Polynomial((mpf(1) / 4,))))
    return w


def test_exp_series_single_flow():
    theta = Polynomial((0, mpf(1) / 2))
    c = exp_series(theta, mpf(2) ** -80)
    for m in range(5):
        want = (mpf(1) / 2) ** m / mp.factorial(m)
        assert abs(c[m] - want) <= mpf(2) ** -200


def test_zero_time_is_identity():
    w = sobolev_herm_w()
    g0 = assemble_moment_matrix(w, 6)
    gt = deformed_moment_matrix(w, TimePoint.of(), 6)
    assert matrix_close(gt, g0, tolerance(), scale=g0.max_abs())


def test_first_flow_measure_vs_moment_side():
    w = hermite_w()
    t = TimePoint.of(t1=(((1, mpf(3) / 10)),))
    g_m = deformed_moment_matrix(w, t, 6, method="moment")
    g_w = deformed_moment_matrix(w, t, 6, method="measure")
    assert matrix_close(g_m, g_w, TOL100, scale=g_m.max_abs())
    # drift oracle: moments of e^{tx} e^{-x^2} via the shifted Gaussian
    tt = mpf(3) / 10
    pref = mp.exp(tt * tt / 4)
    m0 = pref * mp.sqrt(mp.pi)
    m1 = pref * mp.sqrt(mp.pi) * tt / 2
    assert abs(g_m[0, 0] - m0) <= TOL100 * m0
    assert abs(g_m[0, 1] - m1) <= TOL100 * max(1, m1)


def test_first_flow_measure_vs_moment_side_sobolev():
    w = sobolev_herm_w()
    t = TimePoint.of(t1=((1, mpf(1) / 4),), t2=((1, mpf(-1) / 8),))
    g_m = deformed_moment_matrix(w, t, 5, method="moment")
    g_w = deformed_moment_matrix(w, t, 5, method="measure")
    assert matrix_close(g_m, g_w, TOL100, scale=g_m.max_abs())


def test_evolve_hermite_lax_diagonal():
    w = hermite_w()
    tt = mpf(2) / 5
    state = evolve(w, TimePoint.of(t1=((1, tt),)), 8, check_wave=True)
    for i in range(7):
        assert abs(state.lax1[i, i] - tt / 2) <= TOL100
    # standard case: both Lax operators are the tridiagonal Jacobi matrix
    assert matrix_close(
        state.lax1.truncate(7), state.lax2.truncate(7), TOL100, scale=state.lax1.max_abs()
    )
    assert state.lax1.truncate(7).satisfies(BandProfile(1, 1), scale=state.lax1.max_abs())


def test_evolve_sobolev_hessenberg_profiles():
    w = sobolev_herm_w()
    state = evolve(w, TimePoint.of(), 8)
    sub = state.lax1.truncate(7)
    assert sub.band_profile(scale=sub.max_abs()).upper == 1
    sup = state.lax2.truncate(7)
    assert sup.band_profile(scale=sup.max_abs()).lower == 1
    # Sobolev case: L1 != L2
    diff = state.lax1.truncate(6) - state.lax2.truncate(6)
    assert diff.max_abs() > mpf(1) / 100


def test_lax_residual_hermite_flow11_at_floor():
    # the flow-(1,1) Hermite Lax matrix is linear in t, so central
    # differences are exact: the residual sits at the arithmetic floor,
    # strictly better than any finite difference order
    w = hermite_w()
    t = TimePoint.of(t1=((1, mpf(3) / 10),))
    assert lax_residual(w, t, (1, 1), mpf(1) / 1000, 8) <= TOL100


def test_lax_residual_second_order():
    # flow (1,2) bends the Gaussian variance: the h^2 term dominates
    w = hermite_w()
    t = TimePoint.of(t1=((1, mpf(3) / 10),))
    r1 = lax_residual(w, t, (1, 2), mpf(1) / 1000, 9)
    r2 = lax_residual(w, t, (1, 2), mpf(1) / 2000, 9)
    ratio = r1 / r2
    assert mpf("3.5") <= ratio <= mpf("4.5")


def test_lax_residual_sobolev_flow2():
    w = sobolev_herm_w()
    t = TimePoint.of(t1=((1, mpf(1) / 5),))
    r1 = lax_residual(w, t, (2, 1), mpf(1) / 1000, 8)
    r2 = lax_residual(w, t, (2, 1), mpf(1) / 2000, 8)
    assert mpf("3.5") <= r1 / r2 <= mpf("4.5")


def test_zs_residual_identical_flows_vanishes():
    w = hermite_w()
    t = TimePoint.of(t1=((1, mpf(1) / 4),))
    r = zakharov_shabat_residual(w, t, ((1, 1), (1, 1)), mpf(1) / 500, 8)
    assert r <= TOL100


def test_zs_residual_second_order():
    w = hermite_w()
    t = TimePoint.of(t1=((1, mpf(1) / 4),))
    r1 = zakharov_shabat_residual(w, t, ((1, 1), (1, 2)), mpf(1) / 1000, 10)
    r2 = zakharov_shabat_residual(w, t, ((1, 1), (1, 2)), mpf(1) / 2000, 10)
    assert mpf("3.4") <= r1 / r2 <= mpf("4.6")


def test_zs_residual_cross_hierarchy_sobolev():
    w = sobolev_herm_w()
    t = TimePoint.of(t1=((1, mpf(1) / 8),), t2=((1, mpf(1) / 16),))
    r1 = zakharov_shabat_residual(w, t, ((1, 1), (2, 1)), mpf(1) / 1000, 8)
    r2 = zakharov_shabat_residual(w, t, ((1, 1), (2, 1)), mpf(1) / 2000, 8)
    assert mpf("3.4") <= r1 / r2 <= mpf("4.6")


def test_wave_two_time_relation():
    w = hermite_w()
    ta = TimePoint.of(t1=((1, mpf(1) / 4),))
    tb = TimePoint.of(t1=((1, mpf(1) / 8),))
    assert wave_two_time_residual(w, ta, tb, 5, pad=30) <= TOL100


def test_factorization_continuity_on_grid():
    w = hermite_w()
    prev = None
    for s in range(6):
        tt = mpf(s) / 5
        state = evolve(w, TimePoint.of(t1=((1, tt),)), 6)
        assert all(v > 0 for v in state.fact.h)
        if prev is not None:
            # smooth variation: no jumps by more than a factor of 3 per step
            for a, b in zip(prev, state.fact.h):
                assert b / a < 3 and a / b < 3
        prev = state.fact.h
