"""Dense polynomials over mpmath reals.

Coefficients are stored lowest degree first; index k holds the coefficient
of x^k.  The zero polynomial is the empty tuple.  Trailing coefficients are
stripped only when they are exactly zero, so degrees stay structural: monic
polynomials built by construction keep their leading 1 exactly.
"""

from mpmath import mp, mpf

from .errors import SobPolyError


def _num(x):
    if isinstance(x, str):
        return mpf(x)
    return mpf(x)


class Polynomial:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        c = [_num(v) for v in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.coeffs = tuple(c)

    @classmethod
    def zero(cls):
        return cls(())

    @classmethod
    def one(cls):
        return cls((1,))

    @classmethod
    def x(cls):
        return cls((0, 1))

    @classmethod
    def monomial(cls, k, coeff=1):
        return cls((0,) * k + (coeff,))

    @classmethod
    def from_roots(cls, roots):
        p = cls.one()
        for r in roots:
            p = p * cls((-_num(r), 1))
        return p

    @property
    def degree(self):
        """Degree; -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self):
        return not self.coeffs

    def __getitem__(self, k):
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        return mpf(0)

    def __call__(self, x):
        acc = mpf(0)
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def __add__(self, other):
        other = _coerce(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return Polynomial([self[k] + other[k] for k in range(n)])

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return Polynomial([self[k] - other[k] for k in range(n)])

    def __rsub__(self, other):
        return _coerce(other) - self

    def __neg__(self):
        return Polynomial([-c for c in self.coeffs])

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            if self.is_zero() or other.is_zero():
                return Polynomial()
            out = [mpf(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
            for i, a in enumerate(self.coeffs):
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
            return Polynomial(out)
        s = _num(other)
        return Polynomial([c * s for c in self.coeffs])

    __rmul__ = __mul__

    def __pow__(self, n):
        if n < 0:
            raise ValueError("negative polynomial power")
        out = Polynomial.one()
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def derivative(self, order=1):
        c = self.coeffs
        for _ in range(order):
            c = tuple(c[k] * k for k in range(1, len(c)))
        return Polynomial(c)

    def antiderivative(self):
        """Primitive with zero constant term."""
        if self.is_zero():
            return Polynomial()
        return Polynomial([mpf(0)] + [c / (k + 1) for k, c in enumerate(self.coeffs)])

    def divmod(self, divisor):
        """(quotient, remainder) by long division; divisor leading coeff must be nonzero."""
        if divisor.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dn = divisor.degree
        lead = divisor.coeffs[-1]
        q = [mpf(0)] * max(len(rem) - dn, 0)
        for k in range(len(rem) - dn - 1, -1, -1):
            f = rem[k + dn] / lead
            q[k] = f
            for j in range(dn + 1):
                rem[k + j] -= f * divisor.coeffs[j]
        return Polynomial(q), Polynomial(rem[:dn])

    def shifted(self, a):
        """Taylor shift: returns p(x + a)."""
        a = _num(a)
        out = list(self.coeffs)
        # synthetic Horner shift, exact in the working arithmetic
        n = len(out)
        for i in range(n - 1):
            for k in range(n - 2, i - 1, -1):
                out[k] += a * out[k + 1]
        return Polynomial(out)

    def compose(self, inner):
        acc = Polynomial()
        for c in reversed(self.coeffs):
            acc = acc * inner + Polynomial((c,))
        return acc

    def taylor_at(self, a, count):
        """First ``count`` Taylor coefficients p^(t)(a)/t!."""
        sh = self.shifted(a)
        return [sh[t] for t in range(count)]

    def is_monic(self):
        return bool(self.coeffs) and self.coeffs[-1] == 1

    def max_abs_coeff(self):
        return max((abs(c) for c in self.coeffs), default=mpf(0))

    def __repr__(self):
        if self.is_zero():
            return "Polynomial(0)"
        terms = []
        for k, c in enumerate(self.coeffs):
            if c == 0:
                continue
            terms.append(f"{mp.nstr(c, 8)}*x^{k}" if k else mp.nstr(c, 8))
        return "Polynomial(" + " + ".join(terms) + ")"


def _coerce(v):
    if isinstance(v, Polynomial):
        return v
    return Polynomial((_num(v),))


def poly_close(p, q, tol, scale=None):
    """Coefficientwise comparison at tolerance, scaled by the larger coefficient size."""
    if scale is None:
        scale = max(p.max_abs_coeff(), q.max_abs_coeff(), mpf(1))
    n = max(len(p.coeffs), len(q.coeffs))
    return all(abs(p[k] - q[k]) <= tol * scale for k in range(n))


def rational_derivative(num, poles):
    """d/dx of num(x) / prod_i (x - q_i)^{t_i}.

    ``poles`` is a tuple of (q, t); returns (num', poles') over the common
    denominator with every multiplicity raised by one.
    """
    if not poles:
        return num.derivative(), ()
    full = Polynomial.one()
    for q, t in poles:
        full = full * Polynomial((-_num(q), 1)) ** 1
    # num' * prod(x - q_i) - num * sum_i t_i * prod_{j != i}(x - q_j)
    out = num.derivative() * full
    for i, (qi, ti) in enumerate(poles):
        part = Polynomial((_num(ti),))
        for j, (qj, _tj) in enumerate(poles):
            if j != i:
                part = part * Polynomial((-_num(qj), 1))
        out = out - num * part
    new_poles = tuple((q, t + 1) for q, t in poles)
    return out, new_poles


def reciprocal_series(p, a, count):
    """Taylor coefficients of 1/p(x) at x=a up to order count-1; p(a) != 0."""
    c = p.taylor_at(a, count)
    if c[0] == 0:
        raise SobPolyError("reciprocal series at a root")
    inv = [1 / c[0]]
    for n in range(1, count):
        s = mpf(0)
        for k in range(1, min(n, len(c) - 1) + 1):
            s += c[k] * inv[n - k]
        inv.append(-s / c[0])
    return inv
