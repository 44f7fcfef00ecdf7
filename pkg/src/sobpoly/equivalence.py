"""Equivalence classes of measure matrices.

Two measure matrices are equivalent when they share the moment matrix.  The
elementary integration-by-parts moves below walk inside one class: each move
zeroes one absolutely continuous entry, pushes derivative/antiderivative
data into its neighbours, and emits the boundary atoms.  Every move
self-verifies moment-matrix equality before returning; a failed check is an
error, not a warning, since the moves encode the central equivalence claim.
"""

from dataclasses import dataclass, field

from mpmath import mp, mpf

from .core import MeasureMatrix, assemble_moment_matrix, factorize
from .errors import NotClosedUnderMove, SobPolyError, TildeOmegaViolation
from .linalg import BandProfile, Matrix, derivation_matrix, matrix_close, shift_matrix
from .measures import Measure, pearson_step_operator, shifted_family_measure
from .poly import Polynomial
from .precision import tolerance

SHIFT_UP_ROW = "shiftUpRow"
SHIFT_LEFT_COLUMN = "shiftLeftColumn"
ANTIDERIVATIVE_SPREAD = "antiderivativeSpread"

_CHECK_SIZE = 8
_CHECK_TOL = mpf(2) ** -150


@dataclass
class ElementaryMove:
    """One integration-by-parts move on entry ``target``.

    After application, ``produced_boundary`` holds the atomic measure that
    the move emitted on the boundary of the entry's support.
    """

    target: tuple
    direction: str
    produced_boundary: Measure = field(default_factory=Measure.zero)


def _verify_moments(before, after, size=_CHECK_SIZE):
    ga = assemble_moment_matrix(before, size)
    gb = assemble_moment_matrix(after, size)
    scale = max(ga.max_abs(), mpf(1))
    if not matrix_close(ga, gb, _CHECK_TOL, scale=scale):
        raise SobPolyError("elementary move failed to preserve the moment matrix")


def _grown(w, order):
    """Copy of w with at least the requested order (zero padding is free)."""
    if order <= w.order:
        return w.copy()
    out = MeasureMatrix(order)
    for i in range(w.order + 1):
        for j in range(w.order + 1):
            out.set_entry(i, j, w.entry(i, j))
    return out


def apply_move(w, move, verify=True):
    """Apply one elementary move; returns the transformed measure matrix.

    The moved entry must be purely continuous with a density that stays in
    the symbolic class under the move's derivative or antiderivative.  The
    matrix grows by one order when a move pushes mass past its edge.
    """
    i, j = move.target
    entry = w.entry(i, j)
    if entry.is_zero():
        move.produced_boundary = Measure.zero()
        return w.copy()
    if not entry.is_purely_continuous():
        raise NotClosedUnderMove("elementary moves act on absolutely continuous entries")

    if move.direction == SHIFT_UP_ROW:
        if i == 0:
            raise NotClosedUnderMove("cannot shift row 0 up")
        derivative = entry.differentiate()
        delta = entry.boundary_delta()
        out = _grown(w, max(w.order, j + 1))
        out.set_entry(i, j, Measure.zero())
        out.set_entry(i - 1, j, out.entry(i - 1, j) - derivative + delta)
        out.set_entry(i - 1, j + 1, out.entry(i - 1, j + 1) - entry)
        move.produced_boundary = delta
    elif move.direction == SHIFT_LEFT_COLUMN:
        if j == 0:
            raise NotClosedUnderMove("cannot shift column 0 left")
        derivative = entry.differentiate()
        delta = entry.boundary_delta()
        out = _grown(w, max(w.order, i + 1))
        out.set_entry(i, j, Measure.zero())
        out.set_entry(i, j - 1, out.entry(i, j - 1) - derivative + delta)
        out.set_entry(i + 1, j - 1, out.entry(i + 1, j - 1) - entry)
        move.produced_boundary = delta
    elif move.direction == ANTIDERIVATIVE_SPREAD:
        primitive = entry.antiderivative()
        delta = primitive.boundary_delta()
        out = _grown(w, max(w.order, i + 1, j + 1))
        out.set_entry(i, j, delta)
        out.set_entry(i + 1, j, out.entry(i + 1, j) - primitive)
        out.set_entry(i, j + 1, out.entry(i, j + 1) - primitive)
        move.produced_boundary = delta
    else:
        raise ValueError(f"unknown move direction {move.direction!r}")

    if verify:
        _verify_moments(w, out)
    return out


@dataclass
class DiagonalReduction:
    diagonal: MeasureMatrix
    discrete: MeasureMatrix
    trace: list


def reduce_to_diagonal(w, verify=True):
    """Sweep a symmetric measure matrix to diagonal + discrete.

    Works row/column pair by pair from the bottom-right: the first move on
    each last-row entry, the second on each last-column entry.  Boundary
    atoms collect into the discrete part; when every entry has the
    boundary-vanishing property of its offset, the discrete part is empty.
    """
    work = w.copy()
    discrete = MeasureMatrix(w.order)
    trace = []

    def strip_atoms(pos):
        # boundary atoms cannot be moved again; set them aside as they appear
        entry = work.entry(*pos)
        if entry.atoms:
            discrete.set_entry(pos[0], pos[1], discrete.entry(*pos) + Measure.point_masses(entry.atoms))
            work.set_entry(pos[0], pos[1], Measure(entry.components))

    for active in range(w.order, 0, -1):
        for j in range(active):
            mv = ElementaryMove(target=(active, j), direction=SHIFT_UP_ROW)
            work = apply_move(work, mv, verify=False)
            strip_atoms((active - 1, j))
            trace.append(mv)
        for i in range(active):
            mv = ElementaryMove(target=(i, active), direction=SHIFT_LEFT_COLUMN)
            work = apply_move(work, mv, verify=False)
            strip_atoms((i, active - 1))
            trace.append(mv)
    if verify:
        _verify_moments(w, work + discrete)
    return DiagonalReduction(diagonal=work, discrete=discrete, trace=trace)


def tilde_omega_check(measure, k):
    """True iff density derivatives of order 0..k-1 all vanish on the boundary."""
    current = measure
    for _t in range(k):
        try:
            if not current.boundary_delta().is_zero():
                return False
            current = current.differentiate()
        except NotClosedUnderMove:
            return False
    return True


def build_operator_F(family, v_polys, size=10, band_tol=None):
    """Differential operator F with (f,h;W) = <F[f] h>_gamma for the
    diagonal form W = diag(v_0 u_gamma, ..., v_n u_{gamma+n}).

    Returns (F matrix truncation, U, J_F, W) where U = S_W F S_gamma^{-1}
    is upper triangular banded and J_F = S_W F S_W^{-1} carries the
    symmetric band; both are asserted.  Each v_r u_{gamma+r} must have the
    boundary-vanishing property of order r.
    """
    n = len(v_polys) - 1
    p2 = family.pearson_p2()
    for r, v in enumerate(v_polys):
        if not tilde_omega_check(shifted_family_measure(family, r, v), r):
            raise TildeOmegaViolation(
                f"v_{r} u_(gamma+{r}) lacks boundary vanishing of order {r}"
            )

    max_band = 2 * n
    pad = size + max_band + 2
    f_mat = Matrix.zeros(pad)
    for r in range(n + 1):
        for j in range(r + 1):
            # O_r^{j+1}[v_r] applies the chain O_{j+1} o ... o O_r
            coeff = pearson_step_operator(family, r, j + 1).apply(v_polys[r]) * p2 ** j
            if coeff.is_zero():
                continue
            term = derivation_matrix(pad, r + j) * _poly_in_shift(coeff, pad)
            term = term.scale(mp.binomial(r, j) * (-1) ** r)
            f_mat = f_mat + term

    w = MeasureMatrix.diagonal(
        [shifted_family_measure(family, r, v_polys[r]) for r in range(n + 1)]
    )
    g_w = assemble_moment_matrix(w, pad)
    g_base = assemble_moment_matrix(MeasureMatrix.standard(Measure.continuous(family)), pad)
    scale = max(g_w.max_abs(), mpf(1))
    tol = band_tol if band_tol is not None else mpf(2) ** -150
    lhs = (f_mat * g_base).truncate(size)
    rhs = (g_base * f_mat.transpose()).truncate(size)
    if not matrix_close(lhs, g_w.truncate(size), tol, scale=scale):
        raise SobPolyError("F g_gamma does not reproduce the Sobolev moment matrix")
    if not matrix_close(rhs, g_w.truncate(size), tol, scale=scale):
        raise SobPolyError("g_gamma F^T does not reproduce the Sobolev moment matrix")

    fact_w = factorize(g_w.truncate(pad))
    fact_base = factorize(g_base)
    u = (fact_w.s1 * f_mat * fact_base.s1_inv).truncate(size)
    j_f = (fact_w.s1 * f_mat * fact_w.s1_inv).truncate(size)
    uscale = max(u.max_abs(), mpf(1))
    if not u.satisfies(BandProfile(0, max_band), tol, scale=uscale):
        raise SobPolyError("U = S_W F S_gamma^{-1} is not upper triangular banded")
    jscale = max(j_f.max_abs(), mpf(1))
    if not j_f.satisfies(BandProfile(max_band, max_band), tol, scale=jscale):
        raise SobPolyError("J_F band profile violated")
    return f_mat.truncate(size), u, j_f, w


def _poly_in_shift(p, k):
    """p(Lambda) at truncation k."""
    out = Matrix.zeros(k)
    power = Matrix.identity(k)
    for c in p.coeffs:
        if c != 0:
            out = out + power.scale(c)
        power = power * shift_matrix(k)
    return out
