"""Dense truncated matrices and the structural operator matrices.

Semi-infinite matrices are realized by truncations; everything is dense on
purpose (desk-scale truncations, correctness over speed).  Entries are
mpmath reals or, for the multiplication-operator faces, Polynomial values.
Banded structure is asserted after the fact through BandProfile checks,
never exploited.
"""

from dataclasses import dataclass

from mpmath import mpf

from .errors import SingularBlock
from .poly import Polynomial
from .precision import tolerance


def _is_poly(v):
    return isinstance(v, Polynomial)


def _zero_like(v):
    return Polynomial() if _is_poly(v) else mpf(0)


def _abs_size(v):
    return v.max_abs_coeff() if _is_poly(v) else abs(v)


@dataclass(frozen=True)
class BandProfile:
    """Number of nonzero sub/super-diagonals a matrix is allowed to carry."""

    lower: int
    upper: int


class Matrix:
    __slots__ = ("data", "rows", "cols")

    def __init__(self, data):
        self.data = [list(row) for row in data]
        self.rows = len(self.data)
        self.cols = len(self.data[0]) if self.data else 0
        for row in self.data:
            if len(row) != self.cols:
                raise ValueError("ragged matrix rows")

    @classmethod
    def zeros(cls, rows, cols=None):
        cols = rows if cols is None else cols
        return cls([[mpf(0)] * cols for _ in range(rows)])

    @classmethod
    def identity(cls, n):
        m = cls.zeros(n)
        for i in range(n):
            m.data[i][i] = mpf(1)
        return m

    @classmethod
    def diagonal(cls, values):
        n = len(values)
        m = cls.zeros(n)
        for i, v in enumerate(values):
            m.data[i][i] = mpf(v)
        return m

    @classmethod
    def from_fn(cls, rows, cols, fn):
        return cls([[fn(i, j) for j in range(cols)] for i in range(rows)])

    def __getitem__(self, ij):
        i, j = ij
        return self.data[i][j]

    def __setitem__(self, ij, v):
        i, j = ij
        self.data[i][j] = v

    def copy(self):
        return Matrix(self.data)

    def truncate(self, k, c=None):
        """Leading k x c block (c defaults to k)."""
        c = k if c is None else c
        return Matrix([row[:c] for row in self.data[:k]])

    def submatrix(self, rows, cols):
        return Matrix([[self.data[i][j] for j in cols] for i in rows])

    def transpose(self):
        return Matrix([[self.data[i][j] for i in range(self.rows)] for j in range(self.cols)])

    def __add__(self, other):
        assert self.rows == other.rows and self.cols == other.cols
        return Matrix(
            [
                [self.data[i][j] + other.data[i][j] for j in range(self.cols)]
                for i in range(self.rows)
            ]
        )

    def __sub__(self, other):
        assert self.rows == other.rows and self.cols == other.cols
        return Matrix(
            [
                [self.data[i][j] - other.data[i][j] for j in range(self.cols)]
                for i in range(self.rows)
            ]
        )

    def __neg__(self):
        return Matrix([[-v for v in row] for row in self.data])

    def scale(self, s):
        return Matrix([[v * s for v in row] for row in self.data])

    def __mul__(self, other):
        if isinstance(other, Matrix):
            if self.cols != other.rows:
                raise ValueError(f"shape mismatch {self.shape} x {other.shape}")
            ot = other.transpose()
            out = []
            for row in self.data:
                out_row = []
                for col in ot.data:
                    acc = None
                    for a, b in zip(row, col):
                        term = a * b
                        acc = term if acc is None else acc + term
                    out_row.append(acc if acc is not None else mpf(0))
                out.append(out_row)
            return Matrix(out)
        return self.scale(other)

    @property
    def shape(self):
        return (self.rows, self.cols)

    def matvec(self, v):
        return [sum((row[j] * v[j] for j in range(self.cols)), _zero_like(row[0] * v[0])) for row in self.data]

    def max_abs(self):
        return max((_abs_size(v) for row in self.data for v in row), default=mpf(0))

    def solve_lower(self, rhs):
        """Solve L x = rhs for lower-triangular self (diagonal nonzero)."""
        n = self.rows
        x = [mpf(0)] * n
        for i in range(n):
            s = rhs[i]
            for j in range(i):
                s -= self.data[i][j] * x[j]
            x[i] = s / self.data[i][i]
        return x

    def solve_upper(self, rhs):
        n = self.rows
        x = [mpf(0)] * n
        for i in range(n - 1, -1, -1):
            s = rhs[i]
            for j in range(i + 1, n):
                s -= self.data[i][j] * x[j]
            x[i] = s / self.data[i][i]
        return x

    def inverse_lower(self):
        """Inverse of a lower-triangular matrix by forward substitution."""
        n = self.rows
        inv = Matrix.zeros(n)
        for col in range(n):
            rhs = [mpf(1) if i == col else mpf(0) for i in range(n)]
            x = self.solve_lower(rhs)
            for i in range(n):
                inv.data[i][col] = x[i]
        return inv

    def inverse_upper(self):
        return self.transpose().inverse_lower().transpose()

    def inverse(self, tol=None):
        """Unpivoted LU inverse; raises SingularBlock on a tiny pivot."""
        lo, up = lu_nopivot(self, tol=tol)
        return up.inverse_upper() * lo.inverse_lower()

    def band_profile(self, tol=None, scale=None):
        """Measured (lower, upper) bandwidth at tolerance."""
        if tol is None:
            tol = tolerance()
        if scale is None:
            scale = max(self.max_abs(), mpf(1))
        lo = up = 0
        for i in range(self.rows):
            for j in range(self.cols):
                if _abs_size(self.data[i][j]) > tol * scale:
                    if i > j:
                        lo = max(lo, i - j)
                    elif j > i:
                        up = max(up, j - i)
        return BandProfile(lo, up)

    def satisfies(self, profile, tol=None, scale=None):
        """True iff all entries outside the band are zero at tolerance."""
        measured = self.band_profile(tol=tol, scale=scale)
        return measured.lower <= profile.lower and measured.upper <= profile.upper

    def __repr__(self):
        return f"Matrix({self.rows}x{self.cols})"


def lu_nopivot(m, tol=None):
    """Doolittle LU without pivoting: m = L U, L unitriangular."""
    if tol is None:
        tol = tolerance() * max(m.max_abs(), mpf(1))
    n = m.rows
    lo = Matrix.identity(n)
    up = Matrix([list(row) for row in m.data])
    for k in range(n):
        piv = up.data[k][k]
        if abs(piv) <= tol:
            raise SingularBlock(f"pivot {k} below tolerance")
        for i in range(k + 1, n):
            f = up.data[i][k] / piv
            lo.data[i][k] = f
            for j in range(k, n):
                up.data[i][j] -= f * up.data[k][j]
    return lo, up


def schur_complement(m, split, tol=None):
    """Last quasi-determinant D - C A^{-1} B of m partitioned at ``split``.

    The leading split x split block must have nonzero unpivoted LU pivots.
    """
    n = split
    a = m.truncate(n)
    b = m.submatrix(range(n), range(n, m.cols))
    c = m.submatrix(range(n, m.rows), range(n))
    d = m.submatrix(range(n, m.rows), range(n, m.cols))
    if n == 0:
        return d
    lo, up = lu_nopivot(a, tol=tol)
    # A^{-1} B column by column through the factorization
    cols = []
    for j in range(b.cols):
        rhs = [b.data[i][j] for i in range(n)]
        y = lo.solve_lower(rhs)
        cols.append(up.solve_upper(y))
    cab = Matrix(
        [
            [
                sum((c.data[i][t] * cols[j][t] for t in range(n)), mpf(0))
                for j in range(b.cols)
            ]
            for i in range(c.rows)
        ]
    )
    return d - cab


def theta_star(a, b_col, c_row, d):
    """Scalar-corner quasi-determinant: d - c_row . a^{-1} . b_col.

    ``b_col`` entries may be Polynomial; ``a`` and ``c_row`` are numeric, so
    the triangular solves happen in the scalar field (z = a^{-T} c_row) and
    only the final dot product touches the column.
    """
    n = a.rows
    if n == 0:
        return d
    lo2, up2 = lu_nopivot(a.transpose())
    z = up2.solve_upper(lo2.solve_lower(list(c_row)))
    acc = d
    for i in range(n):
        acc = acc - z[i] * b_col[i]
    return acc


def shift_matrix(k):
    """Truncation of the shift operator: ones on the first superdiagonal."""
    m = Matrix.zeros(k)
    for i in range(k - 1):
        m.data[i][i + 1] = mpf(1)
    return m


def derivation_matrix(k, power=1):
    """Truncation of D^power; entry (i, i-power) is the falling factorial (i)_power."""
    m = Matrix.zeros(k)
    for i in range(power, k):
        v = mpf(1)
        for t in range(power):
            v *= i - t
        m.data[i][i - power] = v
    return m


def _rising(m, n):
    v = mpf(1)
    for t in range(n):
        v *= m + t
    return v


def x_operator(k, poly):
    """Truncation of P(X), the multiplication-by-``poly`` operator on derivative stacks.

    Entry (r, r+i) = (r+1)^{(i)} / i! * P^(i)(x), returned as a matrix over
    Polynomial so deformed measure entries stay symbolic in x.
    """
    m = Matrix([[Polynomial() for _ in range(k)] for _ in range(k)])
    deriv = poly
    fact = mpf(1)
    for i in range(k):
        if i > 0:
            deriv = deriv.derivative()
            fact *= i
        if deriv.is_zero():
            break
        for r in range(k - i):
            m.data[r][r + i] = deriv * (_rising(r + 1, i) / fact)
    return m


def x_operator_at(k, poly, x0):
    """Numeric truncation of P(X) evaluated at x = x0."""
    sym = x_operator(k, poly)
    return Matrix([[sym.data[i][j](x0) for j in range(k)] for i in range(k)])


def matrix_close(a, b, tol, scale=None):
    if a.shape != b.shape:
        return False
    if scale is None:
        scale = max(a.max_abs(), b.max_abs(), mpf(1))
    return all(
        _abs_size(a.data[i][j] - b.data[i][j]) <= tol * scale
        for i in range(a.rows)
        for j in range(a.cols)
    )
