"""Operator faces, rank-one measure matrices, pointwise LDU, operator links."""

import pytest
from mpmath import mp, mpf

from conftest import monic_recurrence
from sobpoly.core import (
    MeasureMatrix,
    SobolevSystem,
    assemble_moment_matrix,
    bilinear,
    factorize,
)
from sobpoly.errors import NonPolynomialFactor, NotInvertible, SobPolyError
from sobpoly.linalg import BandProfile, Matrix, derivation_matrix, matrix_close, shift_matrix
from sobpoly.measures import Measure, hermite, jacobi, laguerre, uniform
from sobpoly.opdeform import (
    DiffOperator,
    binomial_face,
    generalized_diagonal,
    invertible_lower_link,
    operator_matrices,
    opdo_measure_matrix,
    three_face_residual,
)
from sobpoly.poly import Polynomial, poly_close
from sobpoly.precision import tolerance

TOL150 = mpf(2) ** -150


def test_derivative_face_is_d():
    faces = operator_matrices(DiffOperator.derivative(), 5)
    assert matrix_close(faces.moment_side, derivation_matrix(5), tolerance())
    # measure side is Lambda^T
    assert faces.measure_side[1, 0] == Polynomial.one()
    assert faces.measure_side[0, 0].is_zero()


def test_multiplication_face_is_x_operator():
    op = DiffOperator.of((Polynomial.x(), 0))
    faces = operator_matrices(op, 4)
    assert matrix_close(faces.moment_side, shift_matrix(4), tolerance())
    assert faces.measure_side[0, 0] == Polynomial.x()
    assert faces.measure_side[0, 1] == Polynomial.one()


def test_one_minus_d_face():
    op = DiffOperator.of((Polynomial.one(), 0), (Polynomial((-1,)), 1))
    faces = operator_matrices(op, 4)
    want = Matrix.identity(4) - derivation_matrix(4)
    assert matrix_close(faces.moment_side, want, tolerance())


def test_derivative_shifts_measure_row():
    # (f', h; W) = (f, h; Lambda^T W) on monomials
    w = MeasureMatrix(1)
    w.set_entry(0, 0, Measure.continuous(uniform(0, 1), Polynomial((1, 2))))
    w.set_entry(1, 1, Measure.continuous(uniform(0, 1)))
    lam_t_w = MeasureMatrix(2)
    for i in range(2):
        for j in range(2):
            lam_t_w.set_entry(i + 1, j, w.entry(i, j))
    for a in range(5):
        for b in range(5):
            fa, hb = Polynomial.monomial(a), Polynomial.monomial(b)
            lhs = bilinear(fa.derivative(), hb, w)
            rhs = bilinear(fa, hb, lam_t_w)
            assert abs(lhs - rhs) <= TOL150 * max(1, abs(lhs))


@pytest.mark.parametrize(
    "op1,op2",
    [
        (DiffOperator.derivative(), DiffOperator.identity()),
        (
            DiffOperator.of((Polynomial.one(), 0), (Polynomial((-1,)), 1)),
            DiffOperator.of((Polynomial.one(), 0), (Polynomial((-1,)), 1)),
        ),
        (
            DiffOperator.of((Polynomial((0, 1)), 1), (Polynomial((2,)), 0)),
            DiffOperator.of((Polynomial((1, 1)), 0), (Polynomial.one(), 2)),
        ),
    ],
)
def test_three_face_consistency(op1, op2):
    w = MeasureMatrix(1)
    w.set_entry(0, 0, Measure.continuous(uniform(0, 1), Polynomial((2, 1))))
    w.set_entry(1, 1, Measure.continuous(uniform(0, 1)))
    w.set_entry(1, 0, Measure.continuous(uniform(0, 1), Polynomial((mpf(1) / 3,))))
    assert three_face_residual(op1, op2, w, degree=6) <= TOL150


def test_opdo_identity_pair():
    mu = Measure.continuous(uniform(0, 1))
    w = opdo_measure_matrix(DiffOperator.identity(), DiffOperator.identity(), mu)
    assert w.order == 0
    assert not w.entry(0, 0).is_zero()


def test_opdo_one_minus_d_grid():
    mu = Measure.continuous(uniform(0, 1))
    op = DiffOperator.of((Polynomial.one(), 0), (Polynomial((-1,)), 1))
    w = opdo_measure_matrix(op, op, mu)
    signs = [[1, -1], [-1, 1]]
    for i in range(2):
        for j in range(2):
            comp = w.entry(i, j).components[0]
            assert poly_close(comp.num, Polynomial((signs[i][j],)), TOL150)


def test_opdo_mixed_orders():
    mu = Measure.continuous(laguerre(0))
    w = opdo_measure_matrix(DiffOperator.derivative(), DiffOperator.identity(), mu)
    assert w.entry(1, 0).components and w.entry(0, 0).is_zero()


def test_generalized_diagonal_identity_case():
    w = MeasureMatrix.diagonal(
        [Measure.continuous(uniform(0, 1)), Measure.continuous(uniform(0, 1))]
    )
    res = generalized_diagonal(w)
    assert not res.non_polynomial
    assert res.lower[1][0].is_zero()


def test_generalized_diagonal_example():
    w = MeasureMatrix(1)
    mu = Measure.continuous(uniform(0, 1))
    w.set_entry(0, 0, mu)
    w.set_entry(0, 1, mu.times_poly(Polynomial.x()))
    w.set_entry(1, 0, mu.times_poly(Polynomial.x()))
    w.set_entry(1, 1, mu.times_poly(Polynomial((1, 0, 1))))
    res = generalized_diagonal(w)
    assert poly_close(res.lower[1][0], Polynomial.x(), TOL150)
    assert poly_close(res.upper[0][1], Polynomial.x(), TOL150)
    assert not res.non_polynomial
    d1 = res.diagonal_measures[1].components[0].num
    assert poly_close(d1, Polynomial.one(), TOL150)


def test_generalized_diagonal_rank_one_ratio():
    mu = Measure.continuous(uniform(0, 1))
    op = DiffOperator.of((Polynomial((2,)), 0), (Polynomial((0, 1)), 1))  # 2 + x d/dx
    w = opdo_measure_matrix(op, op, mu)
    res = generalized_diagonal(w)
    # elimination of a rank-one density reproduces the coefficient ratio x/2
    got = res.lower[1][0]
    if isinstance(got, Polynomial):
        assert poly_close(got, Polynomial((0, mpf(1) / 2)), TOL150)
    else:
        q, r = (got.num * 2).divmod(got.den)
        assert r.max_abs_coeff() <= TOL150 and poly_close(q, Polynomial((0, 1)), TOL150)
    # the Schur complement of a rank-one matrix vanishes
    d1 = res.diagonal_measures[1]
    if isinstance(d1, Measure):
        assert d1.is_zero() or d1.components[0].num.max_abs_coeff() <= TOL150


def test_generalized_diagonal_strict_raises():
    mu = Measure.continuous(uniform(2, 3))
    w = MeasureMatrix(1)
    w.set_entry(0, 0, mu.times_poly(Polynomial.x()))
    w.set_entry(0, 1, mu)
    w.set_entry(1, 0, mu)
    w.set_entry(1, 1, mu.times_poly(Polynomial((1, 1))))
    with pytest.raises(NonPolynomialFactor):
        generalized_diagonal(w, strict=True)


def test_invertible_link_exp_shift():
    a = mpf(1) / 2
    k = 7
    terms = [(Polynomial((a ** r / mp.factorial(r),)), r) for r in range(k)]
    op = DiffOperator.of(*terms)  # moment face exp(a D)
    fam = invertible_lower_link(op, Measure.continuous(hermite()), k)
    polys, _ = monic_recurrence(hermite(), k)
    for n in range(k):
        want = polys[n].shifted(-a)  # P(x - a)
        assert poly_close(fam[n], want, TOL150, want.max_abs_coeff())


def test_invertible_link_one_minus_d_hermite():
    op = DiffOperator.of((Polynomial.one(), 0), (Polynomial((-1,)), 1))
    fam = invertible_lower_link(op, Measure.continuous(hermite()), 6)
    # chi image of (I - D)^{-1}: (1, x+1, x^2+2x+2, ...)
    inv = (Matrix.identity(6) - derivation_matrix(6)).inverse_lower()
    img1 = Polynomial(inv.data[1])
    assert poly_close(img1, Polynomial((1, 1)), TOL150)
    img2 = Polynomial(inv.data[2])
    assert poly_close(img2, Polynomial((2, 2, 1)), TOL150)
    assert all(fam[n][n] == 1 for n in range(6))


def test_all_ones_measure_matrix_link():
    # N-truncated all-ones W equals (sum D^k) g (sum D^k)^T on low degrees
    order = 5
    mu = Measure.continuous(uniform(0, 1))
    w = MeasureMatrix(order)
    for i in range(order + 1):
        for j in range(order + 1):
            w.set_entry(i, j, mu)
    g_w = assemble_moment_matrix(w, 5)
    fact = factorize(g_w)
    base = SobolevSystem(MeasureMatrix.standard(mu), 5)
    s_new = base.fact.s1 * (Matrix.identity(5) - derivation_matrix(5))
    # chi image of I - D: (1, x-1, x^2-2x, ...)
    one_minus_d = Matrix.identity(5) - derivation_matrix(5)
    assert poly_close(Polynomial(one_minus_d.data[1]), Polynomial((-1, 1)), TOL150)
    for n in range(5):
        want = Polynomial(s_new.data[n][: n + 1])
        assert poly_close(fact.p1(n), want, TOL150, want.max_abs_coeff())


def test_binomial_transform_entries():
    face = binomial_face(6)
    expd = Matrix.zeros(6)
    power = Matrix.identity(6)
    fact = mpf(1)
    for r in range(6):
        if r:
            power = power * derivation_matrix(6)
            fact *= r
        expd = expd + power.scale(1 / fact)
    for l in range(6):
        for j in range(6):
            assert expd[l, j] == face[l, j]
            assert face[l, j] == mp.binomial(l, j)


def test_not_invertible_rejected():
    op = DiffOperator.of((Polynomial.x(), 0))  # multiplication by x: singular face
    with pytest.raises(NotInvertible):
        invertible_lower_link(op, Measure.continuous(hermite()), 5)


def wx_measure_matrix(measures):
    """Binomial-weighted measure matrix: entry (i,j) = C(i+j, i) d mu_{i+j}."""
    order = len(measures) - 1
    w = MeasureMatrix(order)
    for i in range(order + 1):
        for j in range(order + 1):
            if i + j <= order:
                w.set_entry(i, j, measures[i + j].scaled(mp.binomial(i + j, i)))
    return w


def test_wx_membership_hankel_and_three_term():
    mu = Measure.continuous(uniform(-1, 1))
    a = mpf(1) / 3
    measures = [mu.scaled(a ** k / mp.factorial(k)) for k in range(4)]
    w = wx_measure_matrix(measures)
    k = 10
    g = assemble_moment_matrix(w, k)
    # Hankel: Lambda G = G Lambda^T on the interior block
    lam = shift_matrix(k)
    lhs = lam * g
    rhs = g * lam.transpose()
    for i in range(k - 1):
        for j in range(k - 1):
            assert abs(lhs[i, j] - rhs[i, j]) <= TOL150 * max(1, g.max_abs())
    fact = factorize(g)
    jmat = fact.s1 * shift_matrix(k) * fact.s1_inv
    assert jmat.truncate(k - 1).satisfies(BandProfile(1, 1), scale=jmat.max_abs())
    for n in range(1, k - 1):
        want = fact.h[n] / fact.h[n - 1]
        assert abs(jmat[n, n - 1] - want) <= TOL150 * max(1, abs(want))
