"""Deformations by linear differential operators with polynomial coefficients.

A differential operator has three faces: the operator itself acting inside
the bilinear form, a matrix multiplying the moment matrix (D and shift
powers), and a matrix of polynomials multiplying the measure matrix
(shift-transposes and multiplication-operator powers).  The three agree on
monomials, and that agreement is a self-test here, not an assumption.
"""

from dataclasses import dataclass

from mpmath import mp, mpf

from .core import MeasureMatrix, SobolevSystem, assemble_moment_matrix, bilinear, factorize
from .errors import NonPolynomialFactor, NotInvertible, SobPolyError
from .linalg import Matrix, derivation_matrix, x_operator
from .measures import Measure
from .poly import Polynomial, poly_close
from .precision import tolerance
from .transforms import poly_in_shift


@dataclass(frozen=True)
class DiffOperator:
    """sum_r p_r(x) d^r/dx^r with polynomial coefficients."""

    terms: tuple  # of (Polynomial coefficient, derivative order)

    @classmethod
    def of(cls, *terms):
        return cls(tuple((p if isinstance(p, Polynomial) else Polynomial(p), int(r)) for p, r in terms))

    @classmethod
    def identity(cls):
        return cls.of((Polynomial.one(), 0))

    @classmethod
    def derivative(cls, order=1):
        return cls.of((Polynomial.one(), order))

    def coefficient(self, r):
        total = Polynomial()
        for p, rr in self.terms:
            if rr == r:
                total = total + p
        return total

    @property
    def max_order(self):
        return max((r for _p, r in self.terms), default=0)

    def apply(self, f):
        out = Polynomial()
        for p, r in self.terms:
            out = out + p * f.derivative(r)
        return out


@dataclass
class OperatorMatrices:
    moment_side: Matrix  # sum_r D^r p_r(Lambda)
    measure_side: Matrix  # sum_r (Lambda^T)^r p_r(X), entries are Polynomial


def _poly_measure_matrix(pmat_rows, w):
    """(L W) for a matrix of polynomials L acting on the row index of W."""
    n = pmat_rows.rows
    out = MeasureMatrix(n - 1)
    for i in range(n):
        for j in range(min(w.order + 1, n)):
            acc = Measure.zero()
            for l in range(min(w.order + 1, pmat_rows.cols)):
                p = pmat_rows[i, l]
                if not p.is_zero() and not w.entry(l, j).is_zero():
                    acc = acc + w.entry(l, j).times_poly(p)
            out.set_entry(i, j, acc)
    return out


def measure_face(op, size):
    """sum_r (Lambda^T)^r p_r(X) as a size x size matrix of polynomials."""
    total = Matrix([[Polynomial() for _ in range(size)] for _ in range(size)])
    for r in range(op.max_order + 1):
        p = op.coefficient(r)
        if p.is_zero():
            continue
        face = x_operator(size, p)
        # (Lambda^T)^r shifts rows down by r
        for i in range(size):
            for j in range(size):
                if i - r >= 0:
                    total[i, j] = total[i, j] + face[i - r, j]
    return total


def operator_matrices(op, k, self_test_measure=None):
    """Both matrix faces of the operator at truncation k.

    When ``self_test_measure`` is given, the identity
    L G_W L^T = G_{measure-face applied to W} is checked on that fixture.
    """
    moment = Matrix.zeros(k)
    for r in range(op.max_order + 1):
        p = op.coefficient(r)
        if p.is_zero():
            continue
        moment = moment + derivation_matrix(k, r) * poly_in_shift(p, k)
    measure = measure_face(op, k)
    if self_test_measure is not None:
        _three_face_check(op, op, self_test_measure, degree=min(6, k - op.max_order - 1))
    return OperatorMatrices(moment_side=moment, measure_side=measure)


def _three_face_check(op1, op2, w, degree=6, tol=None):
    if tol is None:
        tol = mpf(2) ** -150
    size = w.order + 1 + max(op1.max_order, op2.max_order)
    w2 = _poly_measure_matrix(measure_face(op1, size), w)
    w2 = w2.transpose()
    w2 = _poly_measure_matrix(measure_face(op2, size), w2)
    w2 = w2.transpose()  # L1 W L2^T
    for a in range(degree + 1):
        for b in range(degree + 1):
            fa, hb = Polynomial.monomial(a), Polynomial.monomial(b)
            lhs = bilinear(op1.apply(fa), op2.apply(hb), w)
            rhs = bilinear(fa, hb, w2)
            if abs(lhs - rhs) > tol * max(1, abs(lhs), abs(rhs)):
                raise SobPolyError("operator faces disagree on monomials")
    return w2


def three_face_residual(op1, op2, w, degree=6):
    """Max residual of the operator/moment/measure face agreement."""
    size = degree + 2 + max(op1.max_order, op2.max_order) + w.order
    g = assemble_moment_matrix(w, size)
    l1 = operator_matrices(op1, size).moment_side
    l2 = operator_matrices(op2, size).moment_side
    lhs_m = l1 * g * l2.transpose()
    w2 = _three_face_check(op1, op2, w, degree=degree)
    g2 = assemble_moment_matrix(w2, degree + 1)
    worst = mpf(0)
    for a in range(degree + 1):
        for b in range(degree + 1):
            scale = max(1, abs(g2[a, b]))
            worst = max(worst, abs(lhs_m[a, b] - g2[a, b]) / scale)
    return worst


def opdo_measure_matrix(op1, op2, base_measure, check_degree=8):
    """The rank-one-density measure matrix W with <L1 f, L2 h>_mu = (f,h;W).

    Entry (i, j) is p_{1,i} p_{2,j} d mu; the defining identity is asserted
    on monomials up to ``check_degree``.
    """
    n = max(op1.max_order, op2.max_order)
    w = MeasureMatrix(n)
    for i in range(n + 1):
        p1 = op1.coefficient(i)
        if p1.is_zero():
            continue
        for j in range(n + 1):
            p2 = op2.coefficient(j)
            if p2.is_zero():
                continue
            w.set_entry(i, j, base_measure.times_poly(p1 * p2))
    tol = mpf(2) ** -150
    for a in range(check_degree + 1):
        for b in range(check_degree + 1):
            fa, hb = Polynomial.monomial(a), Polynomial.monomial(b)
            lhs = base_measure.integrate(op1.apply(fa) * op2.apply(hb))
            rhs = bilinear(fa, hb, w)
            if abs(lhs - rhs) > tol * max(1, abs(lhs), abs(rhs)):
                raise SobPolyError("rank-one operator measure matrix identity fails")
    return w


@dataclass
class RationalEntry:
    """num/den over the polynomial ring; used by the pointwise elimination."""

    num: Polynomial
    den: Polynomial

    def is_polynomial(self, tol):
        quot, rem = self.num.divmod(self.den)
        scale = max(self.num.max_abs_coeff(), mpf(1))
        return rem.max_abs_coeff() <= tol * scale, quot

    def __mul__(self, other):
        return RationalEntry(self.num * other.num, self.den * other.den)

    def __sub__(self, other):
        return RationalEntry(
            self.num * other.den - other.num * self.den, self.den * other.den
        )

    def divide(self, other):
        return RationalEntry(self.num * other.den, self.den * other.num)

    def evaluate(self, x):
        return self.num(x) / self.den(x)


@dataclass
class GeneralizedDiagonal:
    lower: list  # lists of entries l_{j,k}; RationalEntry or Polynomial
    upper: list
    diagonal_measures: list
    non_polynomial: list  # (position, side) pairs that left the polynomial ring


def generalized_diagonal(w, samples=None, strict=False):
    """Pointwise LDU of the density matrix of W over rational functions.

    All entries must share a single continuous base; the leading minors of
    the density matrix must be nonzero on the support (checked at sample
    points).  Non-polynomial factors are reported in the result (raised
    only under ``strict``), since the factorizability claim silently
    assumes polynomial closure.
    """
    n = w.order + 1
    fam = None
    dens = [[Polynomial() for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            m = w.entry(i, j)
            if m.atoms:
                raise SobPolyError("pointwise elimination needs purely continuous entries")
            for comp in m.components:
                if comp.poles:
                    raise SobPolyError("pointwise elimination needs polynomial densities")
                if fam is None:
                    fam = comp.family
                elif comp.family != fam:
                    raise SobPolyError("entries must share one base weight")
                dens[i][j] = dens[i][j] + comp.num
    if fam is None:
        raise SobPolyError("empty measure matrix")

    lo, hi = fam.support
    if samples is None:
        width = (hi - lo) if hi - lo < mp.inf else mpf(4)
        left = lo if lo > -mp.inf else mpf(-2)
        samples = [left + width * mpf(2 * t + 1) / 16 for t in range(8)]

    work = [[RationalEntry(dens[i][j], Polynomial.one()) for j in range(n)] for i in range(n)]
    lower = [[None] * n for _ in range(n)]
    upper = [[None] * n for _ in range(n)]
    tol = tolerance(60)
    non_poly = []
    for kpiv in range(n):
        piv = work[kpiv][kpiv]
        if kpiv < n - 1:
            # only the minors actually divided by must be nonzero on the
            # support; a vanishing final Schur complement (rank-deficient
            # density, e.g. rank-one operator matrices) is legitimate
            for x in samples:
                if abs(piv.evaluate(x)) <= tol:
                    raise SobPolyError(
                        f"leading minor {kpiv + 1} of the density matrix vanishes on the support"
                    )
        for i in range(kpiv + 1, n):
            lij = work[i][kpiv].divide(piv)
            ok, quot = lij.is_polynomial(tol)
            lower[i][kpiv] = quot if ok else lij
            if not ok:
                non_poly.append(((i, kpiv), "lower"))
            for j in range(kpiv, n):
                work[i][j] = work[i][j] - lij * work[kpiv][j]
        for j in range(kpiv + 1, n):
            uij = work[kpiv][j].divide(piv)
            ok, quot = uij.is_polynomial(tol)
            upper[kpiv][j] = quot if ok else uij
            if not ok:
                non_poly.append(((kpiv, j), "upper"))
            work[kpiv][j] = RationalEntry(work[kpiv][j].num, work[kpiv][j].den)

    diag = []
    for kpiv in range(n):
        ok, quot = work[kpiv][kpiv].is_polynomial(tol)
        if ok:
            diag.append(Measure.continuous(fam, quot))
        else:
            non_poly.append(((kpiv, kpiv), "diagonal"))
            diag.append(work[kpiv][kpiv])
    if strict and non_poly:
        raise NonPolynomialFactor(f"elimination left the polynomial ring at {non_poly}")
    return GeneralizedDiagonal(
        lower=lower, upper=upper, diagonal_measures=diag, non_polynomial=non_poly
    )


def invertible_lower_link(op, base_measure, k, verify=True):
    """SBPS through the classical factorization and the operator's inverse.

    Needs deg p_r <= r (lower-triangular moment face) and an invertible
    diagonal; then L g L^T factorizes trivially and P = S L^{-1} chi.
    """
    faces = operator_matrices(op, k)
    l_mat = faces.moment_side
    scale = max(l_mat.max_abs(), mpf(1))
    tol = tolerance() * scale
    for i in range(k):
        for j in range(i + 1, k):
            if abs(l_mat[i, j]) > tol:
                raise NotInvertible("moment face is not lower triangular")
        if abs(l_mat[i, i]) <= tol:
            raise NotInvertible(f"moment face diagonal vanishes at {i}")

    base = SobolevSystem(MeasureMatrix.standard(base_measure), k)
    l_inv = l_mat.inverse_lower()
    s_new = base.fact.s1 * l_inv
    # rows of S L^{-1} have leading entry 1/L_nn; rescale to the monic family
    fam = [Polynomial(s_new.data[n][: n + 1]) * l_mat[n, n] for n in range(k)]
    if verify:
        g_def = l_mat * base.g * l_mat.transpose()
        fact = factorize(g_def)
        tol2 = mpf(2) ** -150
        for n in range(k):
            ref = fact.p1(n)
            if not poly_close(fam[n], ref, tol2, max(ref.max_abs_coeff(), mpf(1))):
                raise SobPolyError(f"operator link disagrees with factorization at degree {n}")
    return fam


def binomial_face(size):
    """exp(D) truncation; entries are the binomial coefficients C(l, j)."""
    out = Matrix.zeros(size)
    for l in range(size):
        for j in range(l + 1):
            out[l, j] = mp.binomial(l, j)
    return out
