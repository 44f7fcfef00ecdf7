"""Structural operator matrices and the Schur complement."""

import pytest
from mpmath import mpf

from sobpoly.errors import SingularBlock
from sobpoly.linalg import (
    BandProfile,
    Matrix,
    derivation_matrix,
    matrix_close,
    schur_complement,
    shift_matrix,
    x_operator,
)
from sobpoly.poly import Polynomial, poly_close
from sobpoly.precision import tolerance


def laplace_det(m):
    """Independent determinant oracle: cofactor expansion."""
    n = m.rows
    if n == 1:
        return m[0, 0]
    total = mpf(0)
    for j in range(n):
        minor = m.submatrix(range(1, n), [c for c in range(n) if c != j])
        total += (-1) ** j * m[0, j] * laplace_det(minor)
    return total


def test_shift_matrix_definition():
    m = shift_matrix(2)
    assert m.data == [[0, 1], [0, 0]]


def test_shift_matrix_multiplies_by_x():
    # p(x) = 1 + 2x + 3x^2; x*p has coefficients (0, 1, 2, 3) -> truncated at 3
    p = [mpf(1), mpf(2), mpf(3)]
    lam = shift_matrix(3)
    shifted = [sum(lam[j, i] * p[j] for j in range(3)) for i in range(3)]
    assert shifted == [0, 1, 2]


def test_commutator_with_derivation():
    lam = shift_matrix(4)
    dm = derivation_matrix(4)
    comm = lam * dm - dm * lam
    for i in range(3):
        for j in range(3):
            assert comm[i, j] == (1 if i == j else 0)


def test_derivation_matrix_entries():
    d = derivation_matrix(3)
    assert d.data == [[0, 0, 0], [1, 0, 0], [0, 2, 0]]
    d2 = derivation_matrix(4, 2)
    assert d2[3, 1] == 6


def test_derivation_acts_as_derivative():
    # x^3 -> 3 x^2
    c = [mpf(0), mpf(0), mpf(0), mpf(1)]
    d = derivation_matrix(4)
    out = [sum(d[j, i] * c[j] for j in range(4)) for i in range(4)]
    assert out == [0, 0, 3, 0]


def test_x_operator_linear():
    m = x_operator(3, Polynomial.x())
    x = Polynomial.x()
    assert m[0, 0] == x and m[0, 1] == Polynomial.one() and m[0, 2].is_zero()
    assert m[1, 1] == x and m[1, 2] == Polynomial((2,))
    assert m[2, 2] == x


def test_x_operator_quadratic_superdiagonal():
    m = x_operator(4, Polynomial((0, 0, 1)))
    assert m[0, 2] == Polynomial((2,))


def test_x_operator_constant_is_identity():
    m = x_operator(3, Polynomial.one())
    for i in range(3):
        for j in range(3):
            assert m[i, j] == (Polynomial.one() if i == j else Polynomial())


@pytest.mark.parametrize("n", range(1, 7))
def test_commutator_identity_powers(n):
    k = n + 4
    lam = shift_matrix(k)
    dn = derivation_matrix(k, n)
    comm = lam * dn - dn * lam
    target = derivation_matrix(k, n - 1).scale(n)
    for i in range(k - n):
        for j in range(k - n):
            assert comm[i, j] == target[i, j]


def test_x_operator_multiplicative():
    p = Polynomial((1, 2))
    q = Polynomial((0, -1, 1))
    k = 8
    prod = x_operator(k, p) * x_operator(k, q)
    direct = x_operator(k, p * q)
    tol = tolerance()
    cut = k - p.degree - q.degree
    for i in range(cut):
        for j in range(cut):
            assert poly_close(prod[i, j], direct[i, j], tol)


def test_schur_complement_2x2():
    m = Matrix([[2, 1], [4, 3]])
    s = schur_complement(m, 1)
    assert s[0, 0] == 1


def test_schur_complement_identity():
    s = schur_complement(Matrix.identity(3), 2)
    assert s.shape == (1, 1) and s[0, 0] == 1


def test_schur_complement_determinant_ratio():
    import random

    rng = random.Random(7)
    m = Matrix([[mpf(rng.randint(-9, 9)) / 4 for _ in range(4)] for _ in range(4)])
    m[0, 0] += 20  # keep the leading block well conditioned
    m[1, 1] += 20
    s = schur_complement(m, 2)
    lhs = laplace_det(s)
    rhs = laplace_det(m) / laplace_det(m.truncate(2))
    assert abs(lhs - rhs) <= tolerance() * max(1, abs(rhs))


def test_schur_complement_singular_block():
    m = Matrix([[0, 1], [1, 0]])
    with pytest.raises(SingularBlock):
        schur_complement(m, 1)


def test_schur_block_factorization_reassembles():
    import random

    rng = random.Random(3)
    n, split = 5, 2
    m = Matrix([[mpf(rng.randint(-9, 9)) / 8 for _ in range(n)] for _ in range(n)])
    for i in range(n):
        m[i, i] += 10
    a = m.truncate(split)
    b = m.submatrix(range(split), range(split, n))
    c = m.submatrix(range(split, n), range(split))
    sc = schur_complement(m, split)
    ainv = a.inverse()
    # [[I,0],[CA^-1,I]] [[A,0],[0,S]] [[I,A^-1 B],[0,I]]
    top = Matrix([[a[i, j] for j in range(split)] + [b[i, j] for j in range(n - split)] for i in range(split)])
    ca = c * ainv
    bottom_left = ca * a
    bottom_right = ca * b + sc
    rebuilt = Matrix(
        [list(top.data[i]) for i in range(split)]
        + [list(bottom_left.data[i]) + list(bottom_right.data[i]) for i in range(n - split)]
    )
    assert matrix_close(rebuilt, m, tolerance(60), scale=m.max_abs())


def test_band_profile():
    m = Matrix([[1, 1, 0], [0, 1, 1], [0, 0, 1]])
    prof = m.band_profile()
    assert prof.lower == 0 and prof.upper == 1
    assert m.satisfies(BandProfile(0, 1))
    assert not m.satisfies(BandProfile(0, 0))
