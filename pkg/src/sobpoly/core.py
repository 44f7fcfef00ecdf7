"""Measure matrices, the Sobolev bilinear form, moment assembly, LU
factorization, bi-orthogonal sequences, second-kind functions, kernels.

The factorization is unpivoted by necessity: pivoting would destroy the
triangular-similarity correspondence between the factors and the polynomial
families.  A vanishing leading minor is a first-class outcome
(NotFactorizable), not a crash - it signals that no bi-orthogonal sequence
exists at that size.
"""

from dataclasses import dataclass

from mpmath import mp, mpf

from .errors import DomainError, NotFactorizable, SobPolyError
from .linalg import Matrix, derivation_matrix, theta_star
from .measures import Measure, standard_moment_matrix
from .poly import Polynomial, poly_close
from .precision import tolerance

_INF = mpf("inf")

CD = "CD"
CAUCHY = "Cauchy"
MIXED1 = "Mixed1"
MIXED2 = "Mixed2"


class MeasureMatrix:
    """(order+1) x (order+1) grid of measure entries; zero beyond the order."""

    __slots__ = ("order", "entries")

    def __init__(self, order, entries=None):
        self.order = order
        n = order + 1
        if entries is None:
            self.entries = [[Measure.zero() for _ in range(n)] for _ in range(n)]
        else:
            if len(entries) != n or any(len(r) != n for r in entries):
                raise ValueError("entry grid shape must be (order+1) x (order+1)")
            self.entries = [list(r) for r in entries]

    @classmethod
    def standard(cls, measure):
        """Order-0 matrix: a plain (non-Sobolev) inner product."""
        w = cls(0)
        w.entries[0][0] = measure
        return w

    @classmethod
    def diagonal(cls, measures):
        w = cls(len(measures) - 1)
        for i, m in enumerate(measures):
            w.entries[i][i] = m
        return w

    def entry(self, i, j):
        if i <= self.order and j <= self.order:
            return self.entries[i][j]
        return Measure.zero()

    def set_entry(self, i, j, m):
        self.entries[i][j] = m

    def transpose(self):
        w = MeasureMatrix(self.order)
        for i in range(self.order + 1):
            for j in range(self.order + 1):
                w.entries[i][j] = self.entries[j][i]
        return w

    def copy(self):
        return MeasureMatrix(self.order, self.entries)

    def __add__(self, other):
        n = max(self.order, other.order)
        w = MeasureMatrix(n)
        for i in range(n + 1):
            for j in range(n + 1):
                w.entries[i][j] = self.entry(i, j) + other.entry(i, j)
        return w

    def hull(self):
        """Convex hull of all continuous supports and atoms; None when empty."""
        lo = hi = None
        for row in self.entries:
            for m in row:
                h = m.support_hull()
                if h is None:
                    continue
                lo = h[0] if lo is None else min(lo, h[0])
                hi = h[1] if hi is None else max(hi, h[1])
        return None if lo is None else (lo, hi)

    def sup_abs(self):
        h = self.hull()
        if h is None:
            return mpf(0)
        return max(abs(h[0]), abs(h[1]))

    def left_poly_product(self, pmat):
        """(pmat . W) for a matrix of polynomials acting on the row index."""
        n = self.order + 1
        out = MeasureMatrix(self.order)
        for i in range(n):
            for j in range(n):
                acc = Measure.zero()
                for l in range(n):
                    p = pmat[i, l] if i < pmat.rows and l < pmat.cols else Polynomial()
                    if not p.is_zero() and not self.entries[l][j].is_zero():
                        acc = acc + self.entries[l][j].times_poly(p)
                out.entries[i][j] = acc
        return out

    def right_poly_product(self, pmat):
        """(W . pmat^T) for a matrix of polynomials acting on the column index."""
        n = self.order + 1
        out = MeasureMatrix(self.order)
        for i in range(n):
            for j in range(n):
                acc = Measure.zero()
                for l in range(n):
                    p = pmat[j, l] if j < pmat.rows and l < pmat.cols else Polynomial()
                    if not p.is_zero() and not self.entries[i][l].is_zero():
                        acc = acc + self.entries[i][l].times_poly(p)
                out.entries[i][j] = acc
        return out


def bilinear(f, h, w):
    """(f, h; W) = sum over (n, r) of integral of f^(n) h^(r) d mu_{n,r}."""
    total = mpf(0)
    fderivs = [f]
    hderivs = [h]
    for _ in range(w.order):
        fderivs.append(fderivs[-1].derivative())
        hderivs.append(hderivs[-1].derivative())
    for n in range(w.order + 1):
        if fderivs[n].is_zero():
            continue
        for r in range(w.order + 1):
            m = w.entries[n][r]
            if m.is_zero() or hderivs[r].is_zero():
                continue
            total += m.integrate(fderivs[n] * hderivs[r])
    return total


def assemble_moment_matrix(w, k):
    """G^[k] = sum_{l,r} D^l g_{l,r} (D^r)^T from the entries' Hankel matrices."""
    g = Matrix.zeros(k)
    for l in range(min(w.order, k - 1) + 1):
        dl = derivation_matrix(k, l) if l else None
        for r in range(min(w.order, k - 1) + 1):
            m = w.entries[l][r]
            if m.is_zero():
                continue
            glr = standard_moment_matrix(m, k)
            piece = glr
            if l:
                piece = dl * piece
            if r:
                piece = piece * derivation_matrix(k, r).transpose()
            g = g + piece
    return g


@dataclass
class Factorization:
    """G = S1^{-1} H (S2^{-1})^T with S1, S2 lower unitriangular."""

    s1: Matrix
    s2: Matrix
    h: list
    s1_inv: Matrix
    s2_inv: Matrix

    @property
    def size(self):
        return len(self.h)

    @property
    def signature(self):
        """Signs of the h sequence; all +1 iff the form is positive definite."""
        return [1 if v > 0 else -1 for v in self.h]

    def h_matrix(self):
        return Matrix.diagonal(self.h)

    def p1(self, k):
        return Polynomial(self.s1.data[k][: k + 1])

    def p2(self, k):
        return Polynomial(self.s2.data[k][: k + 1])

    def family1(self):
        return [self.p1(k) for k in range(self.size)]

    def family2(self):
        return [self.p2(k) for k in range(self.size)]

    def reconstruct(self):
        return self.s1_inv * self.h_matrix() * self.s2_inv.transpose()


def factorize(g):
    """Unpivoted Gauss factorization of the leading blocks of g.

    Raises NotFactorizable(k) with the 1-based size of the first leading
    minor whose pivot underflows the working tolerance.
    """
    n = g.rows
    scale = max(g.max_abs(), mpf(1))
    tol = tolerance() * scale
    lo = Matrix.identity(n)
    up = Matrix([list(row) for row in g.data])
    h = []
    for k in range(n):
        piv = up.data[k][k]
        if abs(piv) <= tol:
            raise NotFactorizable(k + 1)
        h.append(piv)
        for i in range(k + 1, n):
            f = up.data[i][k] / piv
            lo.data[i][k] = f
            for j in range(k, n):
                up.data[i][j] -= f * up.data[k][j]
    s1 = lo.inverse_lower()
    v = Matrix.from_fn(n, n, lambda i, j: up.data[i][j] / h[i])  # H^{-1} U, upper unitriangular
    s2_inv = v.transpose()
    s2 = s2_inv.inverse_lower()
    return Factorization(s1=s1, s2=s2, h=h, s1_inv=lo, s2_inv=s2_inv)


@dataclass
class SBPS:
    """Two monic families with (P_{1,r}, P_{2,k}; W) = h_r delta_{r,k}."""

    family1: list
    family2: list
    norms: list

    @property
    def size(self):
        return len(self.norms)


def _theta_star_polynomial(g, k):
    """Quasi-determinant formula for the k-th monic polynomial of G."""
    a = g.truncate(k)
    b = [Polynomial.monomial(j) for j in range(k)]
    c = [g[k, j] for j in range(k)]
    return theta_star(a, b, c, Polynomial.monomial(k))


def sbps(w, count, cross_check=True):
    """Monic SBPS of a measure matrix, at size ``count``.

    Both families are always computed and, when ``cross_check`` is set, each
    polynomial is verified against the Schur-complement formula on the
    bordered moment matrix; the two elimination paths must agree.
    """
    g = assemble_moment_matrix(w, count)
    fact = factorize(g)
    fam1, fam2 = fact.family1(), fact.family2()
    if cross_check:
        gt = g.transpose()
        tol = mpf(2) ** -150
        for k in range(count):
            q1 = _theta_star_polynomial(g, k)
            q2 = _theta_star_polynomial(gt, k)
            scale = max(q1.max_abs_coeff(), fam1[k].max_abs_coeff(), mpf(1))
            if not poly_close(fam1[k], q1, tol, scale):
                raise SobPolyError(f"family-1 elimination paths disagree at degree {k}")
            scale = max(q2.max_abs_coeff(), fam2[k].max_abs_coeff(), mpf(1))
            if not poly_close(fam2[k], q2, tol, scale):
                raise SobPolyError(f"family-2 elimination paths disagree at degree {k}")
    return SBPS(family1=fam1, family2=fam2, norms=list(fact.h))


class SobolevSystem:
    """A measure matrix together with its factorized moment matrix."""

    def __init__(self, w, size):
        self.w = w
        self.size = size
        self.g = assemble_moment_matrix(w, size)
        self.fact = factorize(self.g)
        self.h = self.fact.h
        self.p1 = self.fact.family1()
        self.p2 = self.fact.family2()

    def hull_sup(self):
        return self.w.sup_abs()

    def bilinear(self, f, h):
        return bilinear(f, h, self.w)

    # -- second kind functions ------------------------------------------

    def second_kind_series(self, l, y):
        """(C_{1,l}(y), C_{2,l}(y), tail bound) by truncated series.

        Valid for |y| strictly larger than the support hull radius; the
        reported bound is the geometric tail estimate from the last kept
        term and ratio rho = sup|x| / |y|.
        """
        y = mpf(y)
        sup = self.hull_sup()
        if not abs(y) > sup:
            raise DomainError(f"|y| = {y} not outside the hull radius {sup}")
        rho = sup / abs(y)
        k = self.size
        c1 = mpf(0)
        c2 = mpf(0)
        last1 = last2 = mpf(0)
        for j in range(l, k):
            ypow = y ** (-(j + 1))
            last1 = self.h[l] * self.fact.s2_inv[j, l] * ypow
            last2 = self.h[l] * self.fact.s1_inv[j, l] * ypow
            c1 += last1
            c2 += last2
        if rho == 0:
            bound = mpf(0)
        else:
            bound = max(abs(last1), abs(last2)) * rho / (1 - rho)
        return c1, c2, bound

    def second_kind_value(self, l, y, t=0, family=1):
        """Exact-path t-th derivative of C_{family,l} at y (y off the hull).

        Evaluates the defining integrals through the pole-reduction
        machinery, so it works anywhere off the support hull, including
        points inside the series' divergence disk.
        """
        y = mpf(y)
        h = self.w.hull()
        if h is not None and h[0] <= y <= h[1]:
            raise DomainError(f"{y} lies in the support hull")
        poly = self.p1[l] if family == 1 else self.p2[l]
        derivs = [poly]
        for _ in range(self.w.order):
            derivs.append(derivs[-1].derivative())
        total = mpf(0)
        for n in range(self.w.order + 1):
            for r in range(self.w.order + 1):
                m = self.w.entries[n][r] if family == 1 else self.w.entries[r][n]
                if m.is_zero():
                    continue
                # d^t/dy^t d^r/dx^r 1/(y-x) = (-1)^t (r+t)! (y-x)^{-(r+t+1)}
                mm = r + t + 1
                val = m.integrate(derivs[n], extra_poles=((y, mm),))
                total += (-1) ** t * mp.factorial(r + t) * (-1) ** mm * val
        return total

    def second_kind_germ(self, l, point, count, family=1):
        """Taylor coefficients C^{(t)}(point)/t! for t < count."""
        return [
            self.second_kind_value(l, point, t=t, family=family) / mp.factorial(t)
            for t in range(count)
        ]

    # -- kernels ---------------------------------------------------------

    def kernel(self, which, l, x, y):
        if l > self.size:
            raise ValueError("kernel order exceeds factorization size")
        x, y = mpf(x), mpf(y)
        total = mpf(0)
        for k in range(l):
            if which == CD:
                a, b = self.p2[k](x), self.p1[k](y)
            elif which == CAUCHY:
                a = self.second_kind_value(k, x, family=2)
                b = self.second_kind_value(k, y, family=1)
            elif which == MIXED1:
                a = self.second_kind_value(k, x, family=2)
                b = self.p1[k](y)
            elif which == MIXED2:
                a = self.p2[k](x)
                b = self.second_kind_value(k, y, family=1)
            else:
                raise ValueError(f"unknown kernel {which!r}")
            total += a * b / self.h[k]
        return total

    def kernel_deriv(self, l, x, y, t=0, d=0):
        """Mixed partial of the CD kernel, differentiated exactly."""
        x, y = mpf(x), mpf(y)
        total = mpf(0)
        for k in range(l):
            total += self.p2[k].derivative(t)(x) * self.p1[k].derivative(d)(y) / self.h[k]
        return total

    def kernel_section_germ(self, l, x, germ_points, variable="y"):
        """Germ of K^[l](x, .) (or K^[l](., x)) at a list of (point, count)."""
        out = []
        for point, count in germ_points:
            for t in range(count):
                if variable == "y":
                    out.append(self.kernel_deriv(l, x, point, 0, t) / mp.factorial(t))
                else:
                    out.append(self.kernel_deriv(l, point, x, t, 0) / mp.factorial(t))
        return out

    def projection(self, f, l, y, side=1):
        """Best approximation of f in the first (or second) family basis."""
        total = mpf(0)
        for k in range(l):
            if side == 1:
                coeff = self.bilinear(f, self.p2[k]) / self.h[k]
                total += coeff * self.p1[k](y)
            else:
                coeff = self.bilinear(self.p1[k], f) / self.h[k]
                total += self.p2[k](y) * coeff
        return total


def second_kind(w, system_or_size, l, y):
    """Series evaluation of the second-kind pair, with its tail bound."""
    system = (
        system_or_size
        if isinstance(system_or_size, SobolevSystem)
        else SobolevSystem(w, system_or_size)
    )
    return system.second_kind_series(l, y)


def kernel(system, which, l, x, y):
    return system.kernel(which, l, x, y)


def kernel_derivatives(system, l, x, y, t, d):
    return system.kernel_deriv(l, x, y, t, d)
