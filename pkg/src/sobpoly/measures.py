"""Classical Pearson measures, general measure entries, and raw moments.

A measure entry is a finite sum of continuous components plus point masses.
Each continuous component is ``num(x) / prod_i (x - q_i)^{t_i} * u(x) dx``
with ``u`` a classical Pearson base (or the constant weight on an interval)
and all poles off the support.  Moments of pole-free components come from
exact recurrences; poles are reduced by synthetic division and partial
fractions to a handful of cached base Cauchy integrals, which is where the
only quadrature in the library lives.

Weight conventions are pinned to the standard ones:

* Hermite        e^{-x^2}            on (-inf, inf)
* Laguerre(a)    x^a e^{-x}          on (0, inf),  a > -1
* Jacobi(a,b)    (1-x)^a (1+x)^b     on (-1, 1),   a, b > -1
* Uniform(a,b)   1                   on (a, b)

The shifted family u_{gamma+k} is always represented as (base u_gamma,
factor p2^k); the relative normalization of the two matters in the
classical-pair norm identities.
"""

from dataclasses import dataclass

from mpmath import mp, mpf

from .errors import NotClassical, NotClosedUnderMove, ParameterOutOfRange
from .linalg import Matrix
from .poly import Polynomial, rational_derivative, reciprocal_series
from .precision import GUARD_BITS, precision

HERMITE = "hermite"
LAGUERRE = "laguerre"
JACOBI = "jacobi"
UNIFORM = "uniform"

_INF = mpf("inf")


@dataclass(frozen=True)
class PearsonFamily:
    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind == LAGUERRE:
            if self.params[0] <= -1:
                raise ParameterOutOfRange(f"Laguerre needs alpha > -1, got {self.params[0]}")
        elif self.kind == JACOBI:
            if self.params[0] <= -1 or self.params[1] <= -1:
                raise ParameterOutOfRange("Jacobi needs alpha, beta > -1")
        elif self.kind == UNIFORM:
            if not self.params[0] < self.params[1]:
                raise ParameterOutOfRange("UniformInterval needs a < b")
        elif self.kind != HERMITE:
            raise ParameterOutOfRange(f"unknown family kind {self.kind!r}")

    @property
    def is_classical(self):
        return self.kind in (HERMITE, LAGUERRE, JACOBI)

    @property
    def support(self):
        if self.kind == HERMITE:
            return (-_INF, _INF)
        if self.kind == LAGUERRE:
            return (mpf(0), _INF)
        if self.kind == JACOBI:
            return (mpf(-1), mpf(1))
        return (self.params[0], self.params[1])

    def pearson_p2(self):
        """p2 in p2 u' = p1 u; the uniform weight gets the trivial pair."""
        if self.kind == HERMITE or self.kind == UNIFORM:
            return Polynomial.one()
        if self.kind == LAGUERRE:
            return Polynomial.x()
        return Polynomial((1, 0, -1))  # 1 - x^2

    def pearson_p1(self):
        if self.kind == HERMITE:
            return Polynomial((0, -2))
        if self.kind == UNIFORM:
            return Polynomial()
        if self.kind == LAGUERRE:
            return Polynomial((self.params[0], -1))
        a, b = self.params
        return Polynomial((-(a - b), -(a + b)))

    def density(self, x):
        if self.kind == HERMITE:
            return mp.exp(-x * x)
        if self.kind == LAGUERRE:
            return x ** self.params[0] * mp.exp(-x)
        if self.kind == JACOBI:
            a, b = self.params
            return (1 - x) ** a * (1 + x) ** b
        return mpf(1)

    def boundary_value(self, which):
        """Density value at the lower/upper end of the support.

        Infinite endpoints contribute 0 against polynomial factors; an
        unbounded endpoint density (negative exponent) is not representable.
        """
        if self.kind == HERMITE:
            return mpf(0)
        if self.kind == LAGUERRE:
            if which == "upper":
                return mpf(0)
            a = self.params[0]
            if a > 0:
                return mpf(0)
            if a == 0:
                return mpf(1)
            raise NotClosedUnderMove("Laguerre density unbounded at 0 for alpha < 0")
        if self.kind == JACOBI:
            a, b = self.params
            expo, other = (a, b) if which == "upper" else (b, a)
            if expo > 0:
                return mpf(0)
            if expo == 0:
                return mpf(2) ** other
            raise NotClosedUnderMove("Jacobi density unbounded at an endpoint")
        return mpf(1)

    def key(self):
        return (self.kind, tuple(mp.nstr(p, 40) for p in self.params), mp.prec)


def hermite():
    return PearsonFamily(HERMITE, ())


def laguerre(alpha):
    return PearsonFamily(LAGUERRE, (mpf(alpha),))


def jacobi(alpha, beta):
    return PearsonFamily(JACOBI, (mpf(alpha), mpf(beta)))


def uniform(a, b):
    return PearsonFamily(UNIFORM, (mpf(a), mpf(b)))


_moment_cache = {}
_cauchy_cache = {}


def _base_moments(family, count):
    """Monomial moments of the bare weight, by exact recurrence."""
    key = family.key()
    vals = _moment_cache.setdefault(key, [])
    if len(vals) >= count:
        return vals[:count]
    if family.kind == HERMITE:
        if not vals:
            vals.append(mp.sqrt(mp.pi))
        while len(vals) < count:
            n = len(vals)
            vals.append(mpf(0) if n % 2 else (n - 1) * vals[n - 2] / 2)
    elif family.kind == LAGUERRE:
        a = family.params[0]
        if not vals:
            vals.append(mp.gamma(a + 1))
        while len(vals) < count:
            n = len(vals)
            vals.append((n + a) * vals[n - 1])
    elif family.kind == UNIFORM:
        a, b = family.params
        while len(vals) < count:
            n = len(vals)
            vals.append((b ** (n + 1) - a ** (n + 1)) / (n + 1))
    else:
        # Jacobi: moments of (1+x)^n via Beta values, then binomial
        # conversion to the monomial basis (stable for the admissible a, b).
        a, b = family.params
        shifted = [mpf(2) ** (a + b + n + 1) * mp.beta(b + n + 1, a + 1) for n in range(count)]
        vals.clear()
        for n in range(count):
            acc = mpf(0)
            for k in range(n + 1):
                acc += mp.binomial(n, k) * (-1) ** (n - k) * shifted[k]
            vals.append(acc)
    return vals[:count]


def _base_cauchy(family, q, s):
    """integral of u(x) / (x - q)^s over the support, q off the support."""
    key = (family.key(), mp.nstr(mpf(q), 40), s)
    if key in _cauchy_cache:
        return _cauchy_cache[key]
    q = mpf(q)
    lo, hi = family.support
    if lo < q < hi:
        raise ParameterOutOfRange(f"Cauchy pole {q} inside the support")
    if family.kind == UNIFORM:
        a, b = family.params
        if s == 1:
            val = mp.log((b - q) / (a - q))
        else:
            val = ((b - q) ** (1 - s) - (a - q) ** (1 - s)) / (1 - s)
    else:
        with precision(mp.prec + GUARD_BITS):
            if family.kind == HERMITE:
                pts = [-_INF, _INF]
            elif family.kind == LAGUERRE:
                pts = [0, _INF]
            else:
                pts = [-1, 1]
            val = mp.quad(lambda x: family.density(x) / (x - q) ** s, pts)
        val = mpf(val)
    _cauchy_cache[key] = val
    return val


def _merge_poles(p1, p2):
    out = {}
    for q, t in tuple(p1) + tuple(p2):
        q = mpf(q)
        hit = None
        for known in out:
            if known == q:
                hit = known
                break
        if hit is None:
            out[q] = t
        else:
            out[hit] += t
    return tuple(sorted(out.items(), key=lambda it: (mp.nstr(it[0], 40))))


@dataclass(frozen=True)
class MeasureComponent:
    family: PearsonFamily
    num: Polynomial
    poles: tuple = ()

    def scaled(self, s):
        return MeasureComponent(self.family, self.num * s, self.poles)

    def times_poly(self, p):
        return MeasureComponent(self.family, self.num * p, self.poles)

    def times_rational(self, num, poles):
        return MeasureComponent(self.family, self.num * num, _merge_poles(self.poles, poles))


def _pf_pole_integral(family, poles):
    """integral of u / prod (x - q_i)^{t_i} via partial fractions."""
    if len(poles) == 1:
        q, t = poles[0]
        return _base_cauchy(family, q, t)
    total = mpf(0)
    for i, (qi, ti) in enumerate(poles):
        rest = Polynomial.one()
        for j, (qj, tj) in enumerate(poles):
            if j != i:
                rest = rest * Polynomial((-qj, 1)) ** tj
        coeffs = reciprocal_series(rest, qi, ti)
        for m in range(ti):
            total += coeffs[m] * _base_cauchy(family, qi, ti - m)
    return total


def _component_integral(comp, extra_poly=None, extra_poles=()):
    """integral of extra_poly * num / poles against the base weight."""
    p = comp.num if extra_poly is None else comp.num * extra_poly
    poles = _merge_poles(comp.poles, extra_poles)
    return _reduce_integral(comp.family, p, list(poles))


def _reduce_integral(family, p, poles):
    if p.is_zero():
        return mpf(0)
    if not poles:
        moms = _base_moments(family, p.degree + 1)
        return sum((c * moms[k] for k, c in enumerate(p.coeffs)), mpf(0))
    q, t = poles[0]
    quot, rem = p.divmod(Polynomial((-q, 1)))
    c = rem[0]
    reduced = poles[1:] if t == 1 else [(q, t - 1)] + poles[1:]
    total = _reduce_integral(family, quot, reduced)
    if c != 0:
        total += c * _pf_pole_integral(family, poles)
    return total


class Measure:
    """One entry of a measure matrix: continuous components plus atoms."""

    __slots__ = ("components", "atoms")

    def __init__(self, components=(), atoms=()):
        # consolidate like components (same base, same poles) and like atoms,
        # so exact cancellations produce structural zeros
        merged = {}
        order = []
        for c in components:
            key = (c.family, c.poles)
            if key in merged:
                merged[key] = merged[key] + c.num
            else:
                merged[key] = c.num
                order.append(key)
        self.components = tuple(
            MeasureComponent(fam, merged[(fam, poles)], poles)
            for fam, poles in order
            if not merged[(fam, poles)].is_zero()
        )
        pts = {}
        pt_order = []
        for p, m in atoms:
            p, m = mpf(p), mpf(m)
            if p in pts:
                pts[p] += m
            else:
                pts[p] = m
                pt_order.append(p)
        self.atoms = tuple((p, pts[p]) for p in pt_order if pts[p] != 0)

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def continuous(cls, family, factor=None, poles=()):
        factor = Polynomial.one() if factor is None else factor
        return cls((MeasureComponent(family, factor, tuple(poles)),))

    @classmethod
    def point_masses(cls, atoms):
        return cls((), atoms)

    def is_zero(self):
        return not self.components and not self.atoms

    def is_purely_atomic(self):
        return not self.components

    def is_purely_continuous(self):
        return not self.atoms

    def __add__(self, other):
        return Measure(self.components + other.components, self.atoms + other.atoms)

    def __neg__(self):
        return Measure(
            tuple(c.scaled(-1) for c in self.components),
            tuple((p, -m) for p, m in self.atoms),
        )

    def __sub__(self, other):
        return self + (-other)

    def scaled(self, s):
        s = mpf(s)
        return Measure(
            tuple(c.scaled(s) for c in self.components),
            tuple((p, m * s) for p, m in self.atoms),
        )

    def times_poly(self, p):
        if not isinstance(p, Polynomial):
            return self.scaled(p)
        return Measure(
            tuple(c.times_poly(p) for c in self.components),
            tuple((pt, m * p(pt)) for pt, m in self.atoms),
        )

    def times_rational(self, num, poles):
        atoms = []
        for pt, m in self.atoms:
            den = mpf(1)
            for q, t in poles:
                den *= (pt - q) ** t
            atoms.append((pt, m * num(pt) / den))
        return Measure(
            tuple(c.times_rational(num, poles) for c in self.components),
            atoms,
        )

    def integrate(self, p, extra_poles=()):
        """integral of p d(mu), optionally against extra simple/multiple poles."""
        total = mpf(0)
        for comp in self.components:
            total += _component_integral(comp, p, extra_poles)
        for pt, m in self.atoms:
            v = p(pt) if isinstance(p, Polynomial) else mpf(p)
            for q, t in extra_poles:
                v /= (pt - q) ** t
            total += m * v
        return total

    def moment(self, n):
        return self.integrate(Polynomial.monomial(n))

    def support_hull(self):
        """Convex hull (lo, hi) of continuous supports and atoms; None if empty."""
        lo = hi = None
        for comp in self.components:
            a, b = comp.family.support
            lo = a if lo is None else min(lo, a)
            hi = b if hi is None else max(hi, b)
        for pt, _m in self.atoms:
            lo = pt if lo is None else min(lo, pt)
            hi = pt if hi is None else max(hi, pt)
        return None if lo is None else (lo, hi)

    def differentiate(self):
        """d/dx of the density, staying in the symbolic class.

        (q p2^k u)' = O_k[q] p2^{k-1} u needs one factor of p2 available:
        the derivative is (num' p2 + num p1)/p2 * u and the division must be
        exact.  Atoms and poles have no representable derivative.
        """
        if self.atoms:
            raise NotClosedUnderMove("cannot differentiate point masses")
        out = []
        for comp in self.components:
            if comp.poles:
                raise NotClosedUnderMove("cannot differentiate a rational density symbolically")
            p2 = comp.family.pearson_p2()
            p1 = comp.family.pearson_p1()
            numerator = comp.num.derivative() * p2 + comp.num * p1
            quot, rem = numerator.divmod(p2)
            if not rem.is_zero():
                tol = mpf(2) ** (-mp.prec + GUARD_BITS)
                scale = max(numerator.max_abs_coeff(), mpf(1))
                if rem.max_abs_coeff() > tol * scale:
                    raise NotClosedUnderMove(
                        "density derivative leaves the polynomial-times-weight class"
                    )
            out.append(MeasureComponent(comp.family, quot))
        return Measure(out)

    def antiderivative(self):
        """Primitive of the density; only for polynomial densities on bounded intervals."""
        if self.atoms:
            raise NotClosedUnderMove("cannot antidifferentiate point masses")
        out = []
        for comp in self.components:
            if comp.poles or comp.family.kind != UNIFORM:
                raise NotClosedUnderMove(
                    "antiderivative supported only for polynomial densities on an interval"
                )
            out.append(MeasureComponent(comp.family, comp.num.antiderivative()))
        return Measure(out)

    def boundary_delta(self):
        """The atomic measure f -> (density * f)|_boundary."""
        if self.atoms:
            raise NotClosedUnderMove("boundary evaluation of point masses")
        atoms = {}
        for comp in self.components:
            lo, hi = comp.family.support
            if hi != _INF:
                v = comp.num(hi) * comp.family.boundary_value("upper")
                atoms[hi] = atoms.get(hi, mpf(0)) + v
            if lo != -_INF:
                v = comp.num(lo) * comp.family.boundary_value("lower")
                atoms[lo] = atoms.get(lo, mpf(0)) - v
        return Measure.point_masses(list(atoms.items()))

    def tilted_moment(self, n, theta):
        """integral of x^n e^{theta(x)} d(mu); exact for Hermite + linear flows."""
        total = mpf(0)
        for pt, m in self.atoms:
            total += m * pt ** n * mp.exp(theta(pt))
        for comp in self.components:
            if comp.poles:
                raise NotClosedUnderMove("tilted moments of rational densities unsupported")
            p = comp.num * Polynomial.monomial(n)
            fam = comp.family
            if fam.kind == HERMITE and theta.degree <= 1:
                # e^{c0 + c1 x} e^{-x^2} = e^{c0 + c1^2/4} e^{-(x - c1/2)^2}
                c0, c1 = theta[0], theta[1]
                shifted = p.shifted(c1 / 2)
                moms = _base_moments(fam, shifted.degree + 1)
                val = sum((c * moms[k] for k, c in enumerate(shifted.coeffs)), mpf(0))
                total += mp.exp(c0 + c1 * c1 / 4) * val
            else:
                with precision(mp.prec + GUARD_BITS):
                    lo, hi = fam.support
                    val = mp.quad(lambda x: p(x) * mp.exp(theta(x)) * fam.density(x), [lo, hi])
                total += mpf(val)
        return total

    def __repr__(self):
        return f"Measure({len(self.components)} comps, {len(self.atoms)} atoms)"


def raw_moments(measure, count):
    """First ``count`` raw moments of a measure entry."""
    return [measure.moment(n) for n in range(count)]


def standard_moment_matrix(measure, k):
    """Hankel matrix g with g_{i,j} = mu_{i+j}."""
    moms = raw_moments(measure, 2 * k - 1)
    return Matrix.from_fn(k, k, lambda i, j: moms[i + j])


class FirstOrderChain:
    """Composition O_j o O_{j+1} o ... o O_k of the Pearson step operators.

    O_m = p2 d/dx + (m p2' + p1); applying the chain to a polynomial applies
    O_k first.  depth j = k+1 is the identity.
    """

    def __init__(self, family, k, j):
        if not family.is_classical:
            raise NotClassical(f"{family.kind} has no Pearson step operators")
        if not 0 <= j <= k + 1:
            raise ParameterOutOfRange(f"depth {j} outside 0..{k + 1}")
        self.family = family
        self.k = k
        self.j = j
        self.stages = list(range(k, j - 1, -1))  # applied in this order

    def apply(self, q):
        p2 = self.family.pearson_p2()
        p1 = self.family.pearson_p1()
        dp2 = p2.derivative()
        for m in self.stages:
            q = p2 * q.derivative() + (dp2 * m + p1) * q
        return q


def pearson_step_operator(family, k, j):
    return FirstOrderChain(family, k, j)


def phi_polynomial(family, k, r):
    """phi_{k,r} with d^r/dx^r (p2^k u) = phi_{k,r} u; phi_{k,0} = p2^k."""
    if not family.is_classical:
        raise NotClassical(f"{family.kind} is not classical")
    if not 0 <= r <= k:
        raise ParameterOutOfRange(f"need 0 <= r <= k, got r={r}, k={k}")
    chain = FirstOrderChain(family, k, k - r + 1)
    return chain.apply(Polynomial.one()) * family.pearson_p2() ** (k - r)


def shifted_family_measure(family, k, factor=None):
    """u_{gamma+k} as (base u_gamma, factor p2^k), times an optional factor."""
    p = family.pearson_p2() ** k
    if factor is not None:
        p = p * factor
    return Measure.continuous(family, p)
