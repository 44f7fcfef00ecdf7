"""Additive perturbations G + g of a factorized moment matrix.

One engine drives everything here: with A = S1 g S2^T, the perturbed
polynomials and norms come out of quasi-determinants of H + A bordered by
the old families.  Classical pairs, coherent pairs (scalar and block), and
discrete point-mass perturbations are all instances with a structured A.
Every closed-form path is checked against re-factorization of G + g.
"""

from dataclasses import dataclass

from mpmath import mp, mpf

from .core import MeasureMatrix, SobolevSystem, assemble_moment_matrix, factorize
from .errors import (
    CoherenceViolation,
    NotClassical,
    ParameterOutOfRange,
    SeriesDivergence,
    SingularBlock,
    SobPolyError,
)
from .linalg import BandProfile, Matrix, derivation_matrix, lu_nopivot, shift_matrix
from .measures import Measure, shifted_family_measure
from .poly import Polynomial, poly_close
from .precision import tolerance


@dataclass
class AdditiveData:
    """Connection data for a perturbed factorization: M_a P_a = new P_a."""

    a: Matrix
    m1: Matrix
    m2: Matrix
    new_norms: list


def _solve_sym(mat, rhs):
    lo, up = lu_nopivot(mat)
    return up.solve_upper(lo.solve_lower(rhs))


def additive_perturb(base, g_pert, k, verify=True):
    """Perturbed SBPS for G + g via the connection quasi-determinants.

    ``base`` is a SobolevSystem (or anything with .fact, .g, .p1, .p2, .h)
    of size >= k; ``g_pert`` is the additive matrix perturbation truncated
    to at least k.  Returns (AdditiveData, new family1, new family2).
    """
    fact = base.fact
    s1 = fact.s1.truncate(k)
    s2 = fact.s2.truncate(k)
    a = s1 * g_pert.truncate(k) * s2.transpose()
    h_plus_a = a.copy()
    for i in range(k):
        h_plus_a[i, i] += fact.h[i]

    m1 = Matrix.identity(k)
    m2 = Matrix.identity(k)
    new_norms = []
    for n in range(k):
        block = h_plus_a.truncate(n)
        arow = [a[n, j] for j in range(n)]
        acol = [a[j, n] for j in range(n)]
        if n == 0:
            new_norms.append(h_plus_a[0, 0])
            continue
        try:
            z1 = _solve_sym(block.transpose(), arow)  # (H+A)^{-T} applied to the row
            z2 = _solve_sym(block, acol)
        except SingularBlock as exc:
            raise SobPolyError(f"perturbed leading block of size {n} singular") from exc
        for j in range(n):
            m1[n, j] = -z1[j]
            m2[n, j] = -z2[j]
        new_norms.append(h_plus_a[n, n] - sum(z1[j] * acol[j] for j in range(n)))

    fam1 = [_combine(m1, base.p1, n) for n in range(k)]
    fam2 = [_combine(m2, base.p2, n) for n in range(k)]
    data = AdditiveData(a=a, m1=m1, m2=m2, new_norms=new_norms)

    if verify:
        direct = factorize(base.g.truncate(k) + g_pert.truncate(k))
        tol = mpf(2) ** -150
        for n in range(k):
            scale = max(fam1[n].max_abs_coeff(), mpf(1))
            if not poly_close(fam1[n], direct.p1(n), tol, scale):
                raise SobPolyError(f"additive connection path disagrees at degree {n}")
            if not poly_close(fam2[n], direct.p2(n), tol, scale):
                raise SobPolyError(f"additive connection path (family 2) disagrees at degree {n}")
            if abs(new_norms[n] - direct.h[n]) > tol * max(1, abs(direct.h[n])):
                raise SobPolyError(f"additive norm path disagrees at degree {n}")
    return data, fam1, fam2


def _combine(m, family, n):
    out = Polynomial()
    for j in range(n + 1):
        c = m[n, j]
        if c != 0:
            out = out + family[j] * c
    return out


# -- classical pair ------------------------------------------------------


def classical_pair(family, lam, k, check=True):
    """SBPS and norms of  <f,h>_gamma + lam <f',h'>_{gamma+1}.

    Builds W = diag(u_gamma, lam * p2 u_gamma) and factorizes; asserts the
    perturbed polynomials coincide with the classical monic family and the
    norms obey  new_h_k = h_{gamma,k} + lam k^2 h_{gamma+1,k-1}.
    """
    if not family.is_classical:
        raise NotClassical(f"{family.kind} is not classical")
    lam = mpf(lam)
    if lam < 0:
        raise ParameterOutOfRange("lambda must be nonnegative")
    w = MeasureMatrix.diagonal(
        [Measure.continuous(family), shifted_family_measure(family, 1).scaled(lam)]
    )
    system = SobolevSystem(w, k)
    if check:
        base = SobolevSystem(MeasureMatrix.standard(Measure.continuous(family)), k)
        up = SobolevSystem(
            MeasureMatrix.standard(shifted_family_measure(family, 1)), max(k - 1, 1)
        )
        tol = mpf(2) ** -150
        for n in range(k):
            scale = max(base.p1[n].max_abs_coeff(), mpf(1))
            if not poly_close(system.p1[n], base.p1[n], tol, scale):
                raise SobPolyError(f"classical-pair polynomial identity fails at degree {n}")
            want = base.h[n] + (lam * n * n * up.h[n - 1] if n >= 1 else mpf(0))
            if abs(system.h[n] - want) > tol * max(1, abs(want)):
                raise SobPolyError(f"classical-pair norm identity fails at degree {n}")
    return system


# -- coherent pairs ------------------------------------------------------


@dataclass
class CoherencePair:
    """Two measures whose monic OPS satisfy the coherence connection.

    For block size m > 1 the scalar parameters are replaced by the m x m
    blocks of the lower bi-block-diagonal connection matrix; ``diag_blocks``
    holds (R_m)_{[k][k]} (lower triangular, diagonal 1/(km+1)..1/((k+1)m))
    and ``sub_blocks`` holds (R_m)_{[k][k-1]}.
    """

    measure1: Measure
    measure2: Measure = None
    r_params: tuple = ()
    block_size: int = 1
    diag_blocks: tuple = ()
    sub_blocks: tuple = ()
    q_norms: tuple = ()  # used when measure2 is synthetic (block algebra)

    def __post_init__(self):
        if self.block_size == 1:
            if any(mpf(r) == 0 for r in self.r_params):
                raise ParameterOutOfRange("coherence parameters r_k must be nonzero")
        else:
            m = self.block_size
            for kb, blk in enumerate(self.diag_blocks):
                for i in range(m):
                    want = mpf(1) / (kb * m + i + 1)
                    if blk[i, i] != want:
                        raise ParameterOutOfRange(
                            f"diagonal of (R_m)[{kb}][{kb}] must be 1/({kb * m + i + 1})"
                        )
                    for j in range(i + 1, m):
                        if blk[i, j] != 0:
                            raise ParameterOutOfRange("diagonal blocks must be lower triangular")


def _r_inverse(cp, size):
    """(R^{[size]})^{-1} = N (I + r + r^2 + ...) from the block data."""
    m = cp.block_size
    if m == 1:
        n_mat = Matrix.diagonal([mpf(j + 1) for j in range(size)])
        r_mat = Matrix.zeros(size)
        for j in range(1, size):
            r_mat[j, j - 1] = mpf(cp.r_params[j - 1])
    else:
        nblocks = (size + m - 1) // m
        n_mat = Matrix.zeros(size)
        r_mat = Matrix.zeros(size)
        for kb in range(nblocks):
            dinv = cp.diag_blocks[kb].inverse_lower()
            for i in range(m):
                for j in range(m):
                    if kb * m + i < size and kb * m + j < size:
                        n_mat[kb * m + i, kb * m + j] = dinv[i, j]
        for kb in range(1, nblocks):
            # (r_m)_{[k][k-1]} = -(R_m)_{[k][k-1]} (R_m)_{[k-1][k-1]}^{-1}
            blk = cp.sub_blocks[kb - 1] * cp.diag_blocks[kb - 1].inverse_lower()
            for i in range(m):
                for j in range(m):
                    if kb * m + i < size and (kb - 1) * m + j < size:
                        r_mat[kb * m + i, (kb - 1) * m + j] = -blk[i, j]
    total = Matrix.identity(size)
    power = Matrix.identity(size)
    for _ in range(size):
        power = power * r_mat
        if power.max_abs() == 0:
            break
        total = total + power
    return n_mat * total


def validate_coherence(cp, order, tol=None):
    """Check Q_k = P'_{k+1}/(k+1) - (r_k/k) P'_k for k = 1..order."""
    if tol is None:
        tol = mpf(2) ** -120
    base1 = factorize(
        assemble_moment_matrix(MeasureMatrix.standard(cp.measure1), order + 2)
    )
    base2 = factorize(
        assemble_moment_matrix(MeasureMatrix.standard(cp.measure2), order + 1)
    )
    for k in range(1, order + 1):
        want = base1.p1(k + 1).derivative() * (mpf(1) / (k + 1)) - base1.p1(
            k
        ).derivative() * (mpf(cp.r_params[k - 1]) / k)
        got = base2.p1(k)
        scale = max(got.max_abs_coeff(), mpf(1))
        if not poly_close(got, want, tol, scale):
            raise CoherenceViolation(f"coherence relation fails at index {k}")


def coherent_pair_sbps(cp, lam, k, validate=True, verify=True):
    """Sobolev polynomials of  <f,h>_1 + lam <f',h'>_2  for a coherent pair.

    Formula path uses only r_1..r_{k-1}, the K-norms of the second measure
    and the H-norms of the first; it is cross-checked against direct
    factorization of g1 + lam D g2 D^T.
    """
    lam = mpf(lam)
    if cp.block_size == 1 and validate:
        validate_coherence(cp, min(k, len(cp.r_params)))

    base1 = SobolevSystem(MeasureMatrix.standard(cp.measure1), k + 1)
    if cp.measure2 is not None:
        base2 = factorize(assemble_moment_matrix(MeasureMatrix.standard(cp.measure2), k + 1))
        k_norms = base2.h
    else:
        k_norms = [mpf(v) for v in cp.q_norms]

    rinv = _r_inverse(cp, k)
    b = rinv * Matrix.diagonal(k_norms[:k]) * rinv.transpose()

    fam = [base1.p1[0]]
    for n in range(1, k):
        row = [lam * b[n - 1, j] for j in range(n - 1)]
        block = Matrix.from_fn(
            n - 1,
            n - 1,
            lambda i, j: lam * b[i, j] + (base1.h[i + 1] if i == j else mpf(0)),
        )
        if n == 1:
            fam.append(base1.p1[1])
            continue
        z = _solve_sym(block.transpose(), row)
        p = base1.p1[n]
        for j in range(n - 1):
            p = p - base1.p1[j + 1] * z[j]
        fam.append(p)

    if verify:
        g2 = (
            assemble_moment_matrix(MeasureMatrix.standard(cp.measure2), k + 1)
            if cp.measure2 is not None
            else z_from_polys(cp, k + 1, k_norms)
        )
        d = derivation_matrix(k + 1)
        g_pert = (d * g2 * d.transpose()).scale(lam)
        _data, f1, _f2 = additive_perturb(base1, g_pert, k, verify=True)
        tol = mpf(2) ** -150
        for n in range(k):
            scale = max(fam[n].max_abs_coeff(), mpf(1))
            if not poly_close(fam[n], f1[n], tol, scale):
                raise SobPolyError(f"coherent formula path disagrees at degree {n}")
    return fam


def coherence_q_polys(cp, size):
    """The Q stack defined by the coherence data and the first measure's OPS."""
    base1 = factorize(assemble_moment_matrix(MeasureMatrix.standard(cp.measure1), size + 1))
    qs = [Polynomial.one()]
    m = cp.block_size
    for n in range(1, size):
        if m == 1:
            q = base1.p1(n + 1).derivative() * (mpf(1) / (n + 1)) - base1.p1(
                n
            ).derivative() * (mpf(cp.r_params[n - 1]) / n)
        else:
            kb, i = divmod(n, m)
            q = Polynomial()
            for j in range(m):
                c = cp.diag_blocks[kb][i, j]
                if c != 0:
                    q = q + base1.p1(kb * m + j + 1).derivative() * c
                if kb >= 1:
                    c2 = cp.sub_blocks[kb - 1][i, j]
                    if c2 != 0:
                        q = q + base1.p1((kb - 1) * m + j + 1).derivative() * c2
        qs.append(q)
    return qs


def z_from_polys(cp, size, k_norms):
    """Synthetic g2 = Z^{-1} K Z^{-T} built from the coherence-defined Q stack."""
    qs = coherence_q_polys(cp, size)
    zmat = Matrix.zeros(size)
    for n in range(size):
        for j in range(n + 1):
            zmat[n, j] = qs[n][j]
    zinv = zmat.inverse_lower()
    return zinv * Matrix.diagonal(k_norms[:size]) * zinv.transpose()


def block_coherent_sbps(cp, lam, k, verify=True):
    """SBPS for an m x m block coherent pair, via the banded block inversion."""
    return coherent_pair_sbps(cp, lam, k, validate=False, verify=verify)


# -- discrete Sobolev ----------------------------------------------------


@dataclass
class DiscreteSpec:
    """Nodes (x_i, n_i, m_i) and the block-diagonal mass matrix Xi.

    ``masses`` holds one n_i x m_i block per node; the bilinear addition is
    sum_i sum_{k<n_i} sum_{j<m_i} xi^{(i)}_{k,j} f^{(k)}(x_i) h^{(j)}(x_i)
    (first argument paired with the N/n_i side, matching the matrix
    realization g = N[chi] Xi M[chi]^T).
    """

    nodes: tuple  # of (point, n_i, m_i)
    masses: tuple  # of Matrix blocks, shapes n_i x m_i

    def __post_init__(self):
        for (pt, n_i, m_i), blk in zip(self.nodes, self.masses):
            if blk.shape != (n_i, m_i):
                raise ParameterOutOfRange(
                    f"mass block at node {pt} must be {n_i}x{m_i}, got {blk.shape}"
                )

    @property
    def n_total(self):
        return sum(n for _, n, _ in self.nodes)

    @property
    def m_total(self):
        return sum(m for _, _, m in self.nodes)

    def xi_matrix(self):
        xi = Matrix.zeros(self.n_total, self.m_total)
        r = c = 0
        for (_pt, n_i, m_i), blk in zip(self.nodes, self.masses):
            for i in range(n_i):
                for j in range(m_i):
                    xi[r + i, c + j] = blk[i, j]
            r += n_i
            c += m_i
        return xi

    def w_polynomial(self):
        p = Polynomial.one()
        for pt, n_i, m_i in self.nodes:
            p = p * Polynomial((-mpf(pt), 1)) ** max(n_i, m_i)
        return p


def _stack_eval(polys, nodes, counts_index):
    """Rows = polynomials, columns = (node, derivative) in node-major order."""
    cols = []
    for pt, n_i, m_i in nodes:
        count = n_i if counts_index == "n" else m_i
        pt = mpf(pt)
        for t in range(count):
            cols.append((pt, t))
    out = Matrix.zeros(len(polys), len(cols))
    for r, p in enumerate(polys):
        derivs = [p]
        for c, (pt, t) in enumerate(cols):
            while len(derivs) <= t:
                derivs.append(derivs[-1].derivative())
            out[r, c] = derivs[t](pt)
    return out


def cd_matrix(system, spec, k):
    """CD matrix: block (i,j) of shape m_i x n_j holds K^[k] derivatives."""
    if not spec.nodes or not spec.n_total or not spec.m_total:
        return Matrix.zeros(0)
    m_stack = _stack_eval(system.p2[:k], spec.nodes, "m")  # k x m_total
    n_stack = _stack_eval(system.p1[:k], spec.nodes, "n")  # k x n_total
    hinv = Matrix.diagonal([1 / system.h[j] for j in range(k)])
    return m_stack.transpose() * hinv * n_stack


def discrete_perturbation_matrix(spec, size):
    """g = N[chi] Xi M[chi]^T at the given truncation."""
    if not spec.nodes or not spec.n_total or not spec.m_total:
        return Matrix.zeros(size)
    chi = [Polynomial.monomial(j) for j in range(size)]
    n_chi = _stack_eval(chi, spec.nodes, "n")
    m_chi = _stack_eval(chi, spec.nodes, "m")
    return n_chi * spec.xi_matrix() * m_chi.transpose()


def discrete_sobolev(base, spec, k, verify=True):
    """Perturbed families via the CD-matrix connection formulas.

    ``base`` is a SobolevSystem for the continuous part (size >= k).  The
    connection inverts (I + K Xi); its singularity means the perturbed
    moment matrix is not factorizable (SeriesDivergence).
    """
    xi = spec.xi_matrix()
    eye_m = Matrix.identity(spec.m_total)
    eye_n = Matrix.identity(spec.n_total)
    hinv = Matrix.diagonal([1 / base.h[j] for j in range(k)])
    m_stack = _stack_eval(base.p2[:k], spec.nodes, "m")
    n_stack = _stack_eval(base.p1[:k], spec.nodes, "n")

    fam1, fam2 = [], []
    m1 = Matrix.identity(k)
    m2 = Matrix.identity(k)
    for n in range(k):
        p = base.p1[n]
        q = base.p2[n]
        if n and spec.n_total and spec.m_total:
            # all pieces at the degree-n truncation: K^[n], M[P2^[n]], H^[n]
            m_n = m_stack.truncate(n, spec.m_total)
            n_n = n_stack.truncate(n, spec.n_total)
            h_n = hinv.truncate(n)
            kk_n = m_n.transpose() * h_n * n_n  # m_total x n_total
            try:
                inv_kxi = (eye_m + kk_n * xi).inverse()
                inv_xik = (eye_n + xi * kk_n).inverse()
            except SingularBlock as exc:
                raise SeriesDivergence(
                    f"(I + K Xi) singular at degree {n}: no perturbed sequence"
                ) from exc

            n_row = _stack_eval([base.p1[n]], spec.nodes, "n")  # 1 x n_total
            coeff_row = (n_row * xi * inv_kxi * m_n.transpose()) * h_n
            for j in range(n):
                m1[n, j] = -coeff_row[0, j]
                p = p - base.p1[j] * coeff_row[0, j]

            m_col = _stack_eval([base.p2[n]], spec.nodes, "m")  # 1 x m_total
            coeff_col = h_n * n_n * inv_xik * xi * m_col.transpose()
            for j in range(n):
                m2[n, j] = -coeff_col[j, 0]
                q = q - base.p2[j] * coeff_col[j, 0]
        fam1.append(p)
        fam2.append(q)

    g_pert = discrete_perturbation_matrix(spec, k)
    data, f1, f2 = additive_perturb(base, g_pert, k, verify=verify)
    tol = mpf(2) ** -150
    for n in range(k):
        scale = max(fam1[n].max_abs_coeff(), mpf(1))
        if not poly_close(fam1[n], f1[n], tol, scale):
            raise SobPolyError(f"discrete kernel path (family 1) disagrees at degree {n}")
        if not poly_close(fam2[n], f2[n], tol, scale):
            raise SobPolyError(f"discrete kernel path (family 2) disagrees at degree {n}")
    return fam1, fam2, data.new_norms, AdditiveData(a=data.a, m1=m1, m2=m2, new_norms=data.new_norms)


def w_recurrence(base_measure, spec, k, samples=None):
    """Banded recurrence R_alpha = M_alpha W(J) M_alpha^{-1} for the
    discrete perturbation of a standard inner product.

    Returns (R1, R2, W, new_norms) cropped to size k; asserts the band
    profile (deg W on both sides), the conjugation R1 = H R2^T H^{-1}, and
    the evaluation identity R_alpha P_alpha(x) = W(x) P_alpha(x) on
    truncation-interior rows at sample points.
    """
    wpoly = spec.w_polynomial()
    degw = wpoly.degree
    pad = k + degw + 2
    base = SobolevSystem(MeasureMatrix.standard(base_measure), pad)
    fam1, fam2, norms, data = discrete_sobolev(base, spec, pad, verify=False)

    jmat = base.fact.s1 * shift_matrix(pad) * base.fact.s1_inv
    wj = _poly_of_matrix(wpoly, jmat)
    r1 = data.m1 * wj * data.m1.inverse_lower()
    r2 = data.m2 * wj * data.m2.inverse_lower()
    r1 = r1.truncate(k)
    r2 = r2.truncate(k)

    prof = BandProfile(degw, degw)
    scale = max(r1.max_abs(), mpf(1))
    if not r1.truncate(k - degw).satisfies(prof, scale=scale):
        raise SobPolyError("R1 band profile violated")
    if not r2.truncate(k - degw).satisfies(prof, scale=scale):
        raise SobPolyError("R2 band profile violated")

    hbreve = Matrix.diagonal(norms[:k])
    link = hbreve * r2.transpose() * Matrix.diagonal([1 / v for v in norms[:k]])
    tol = tolerance(60) * scale
    for i in range(k - degw):
        for j in range(k):
            if abs(r1[i, j] - link[i, j]) > tol:
                raise SobPolyError("R1 != H R2^T H^{-1}")

    if samples is None:
        samples = [mpf(1) / 7 + mpf(s) / 9 for s in range(5)]
    for x in samples:
        v1 = [fam1[j](x) for j in range(k)]
        v2 = [fam2[j](x) for j in range(k)]
        wx = wpoly(x)
        lhs1 = r1.matvec(v1)
        lhs2 = r2.matvec(v2)
        vscale = max(max(abs(t) for t in v1), mpf(1))
        for i in range(k - degw):
            if abs(lhs1[i] - wx * v1[i]) > tolerance(60) * scale * vscale:
                raise SobPolyError("R1 evaluation identity fails")
            if abs(lhs2[i] - wx * v2[i]) > tolerance(60) * scale * vscale:
                raise SobPolyError("R2 evaluation identity fails")
    return r1, r2, wpoly, norms[:k]


def _poly_of_matrix(p, m):
    out = Matrix.zeros(m.rows)
    power = Matrix.identity(m.rows)
    for c in p.coeffs:
        if c != 0:
            out = out + power.scale(c)
        power = power * m
    return out
