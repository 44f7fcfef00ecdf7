"""Additive perturbations: classical pairs, coherent pairs, discrete masses."""

import random

import pytest
from mpmath import mpf

from conftest import monic_recurrence
from sobpoly.core import MeasureMatrix, SobolevSystem, assemble_moment_matrix, factorize
from sobpoly.errors import CoherenceViolation, ParameterOutOfRange, SeriesDivergence
from sobpoly.linalg import BandProfile, Matrix, matrix_close
from sobpoly.measures import Measure, hermite, jacobi, laguerre, uniform
from sobpoly.perturb import (
    CoherencePair,
    DiscreteSpec,
    additive_perturb,
    block_coherent_sbps,
    classical_pair,
    coherent_pair_sbps,
    discrete_sobolev,
    validate_coherence,
    w_recurrence,
)
from sobpoly.poly import Polynomial, poly_close
from sobpoly.precision import tolerance

TOL150 = mpf(2) ** -150


def infer_r_params(mu1, mu2, count):
    """Fixture helper: read the coherence parameters off the two OPS."""
    f1 = factorize(assemble_moment_matrix(MeasureMatrix.standard(mu1), count + 2))
    f2 = factorize(assemble_moment_matrix(MeasureMatrix.standard(mu2), count + 1))
    rs = []
    for k in range(1, count + 1):
        resid = f1.p1(k + 1).derivative() * (mpf(1) / (k + 1)) - f2.p1(k)
        rs.append(resid[k - 1] / f1.p1(k).derivative()[k - 1] * k)
    return rs


def laguerre_coherent_pair(count=8):
    mu1 = Measure.continuous(laguerre(0), Polynomial((1, 1)))  # (x+1) e^{-x}
    mu2 = Measure.continuous(laguerre(1))  # x e^{-x}
    return CoherencePair(measure1=mu1, measure2=mu2, r_params=tuple(infer_r_params(mu1, mu2, count)))


def test_additive_zero_perturbation():
    base = SobolevSystem(MeasureMatrix.standard(Measure.continuous(jacobi(0, 0))), 6)
    data, f1, f2 = additive_perturb(base, Matrix.zeros(6), 6)
    for n in range(6):
        assert f1[n] == base.p1[n]
        assert abs(data.new_norms[n] - base.h[n]) <= TOL150 * base.h[n]


def test_additive_rank_one_direction():
    base = SobolevSystem(MeasureMatrix.standard(Measure.continuous(uniform(0, 1))), 1)
    eps = mpf(1) / 16
    g = Matrix([[eps]])
    data, _f1, _f2 = additive_perturb(base, g, 1)
    assert abs(data.new_norms[0] - (base.h[0] + eps)) <= TOL150


def test_additive_random_matches_refactorization():
    rng = random.Random(19)
    base = SobolevSystem(MeasureMatrix.standard(Measure.continuous(uniform(0, 1))), 6)
    g = Matrix([[mpf(rng.randint(-3, 3)) / 64 for _ in range(6)] for _ in range(6)])
    # verify=True raises if the quasi-determinant path disagrees with factorize(G+g)
    data, f1, _f2 = additive_perturb(base, g, 6, verify=True)
    assert len(f1) == 6 and all(f1[n].is_monic() for n in range(6))
    # connection matrices factor H + A
    hpa = data.m1.inverse_lower() * Matrix.diagonal(data.new_norms) * data.m2.inverse_lower().transpose()
    target = data.a.copy()
    for i in range(6):
        target[i, i] += base.h[i]
    assert matrix_close(hpa, target, tolerance(60), scale=target.max_abs())


def test_classical_pair_laguerre_norm():
    sys_ = classical_pair(laguerre(0), 1, 6)
    # h1 = h_{0,1} + 1 * 1 * h_{1,0} = 1 + 1
    assert abs(sys_.h[1] - 2) <= TOL150 * 2


def test_classical_pair_zero_lambda_degenerates():
    sys_ = classical_pair(jacobi(0, 0), 0, 6)
    polys, norms = monic_recurrence(jacobi(0, 0), 6)
    for n in range(6):
        assert poly_close(sys_.p1[n], polys[n], TOL150)
        assert abs(sys_.h[n] - norms[n]) <= TOL150 * norms[n]


@pytest.mark.parametrize("lam", [mpf(1) / 4, mpf(1), mpf(4)])
def test_classical_pair_invariance(lam):
    for fam in (hermite(), laguerre(mpf(1) / 2), jacobi(0, 0)):
        sys_ = classical_pair(fam, lam, 8)  # internal identity checks raise on failure
        if fam.kind == "hermite":
            polys, _ = monic_recurrence(fam, 8)
            for n in range(8):
                assert poly_close(sys_.p1[n], polys[n], TOL150)


def test_coherence_validation_rejects_wrong_params():
    cp = laguerre_coherent_pair(6)
    bad = CoherencePair(
        measure1=cp.measure1,
        measure2=cp.measure2,
        r_params=tuple(r + 1 for r in cp.r_params),
    )
    with pytest.raises(CoherenceViolation):
        validate_coherence(bad, 4)


def test_coherence_requires_nonzero_r():
    with pytest.raises(ParameterOutOfRange):
        CoherencePair(
            measure1=Measure.continuous(laguerre(0)),
            measure2=Measure.continuous(laguerre(1)),
            r_params=(mpf(0),),
        )


def test_coherent_pair_formula_matches_oracle():
    cp = laguerre_coherent_pair(8)
    fam = coherent_pair_sbps(cp, mpf(1) / 2, 8)  # verify=True is the oracle check
    assert all(fam[n].is_monic() for n in range(1, 8))


def test_coherent_pair_degree_two_display():
    cp = laguerre_coherent_pair(4)
    lam = mpf(2) / 3
    fam = coherent_pair_sbps(cp, lam, 4)
    base1 = factorize(assemble_moment_matrix(MeasureMatrix.standard(cp.measure1), 5))
    base2 = factorize(assemble_moment_matrix(MeasureMatrix.standard(cp.measure2), 4))
    h1 = base1.h[1]
    k0 = base2.h[0]
    r1 = mpf(cp.r_params[0])
    want = base1.p1(2) - base1.p1(1) * (lam * 2 * r1 * k0 / (lam * k0 + h1))
    assert poly_close(fam[2], want, TOL150, want.max_abs_coeff())


def test_coherent_pair_lambda_zero_limit():
    cp = laguerre_coherent_pair(5)
    fam = coherent_pair_sbps(cp, mpf(1) / 2 ** 120, 5, verify=False)
    base1 = factorize(assemble_moment_matrix(MeasureMatrix.standard(cp.measure1), 6))
    for n in range(5):
        assert poly_close(fam[n], base1.p1(n), mpf(2) ** -100, fam[n].max_abs_coeff())


def block_pair_m2(count=8):
    """Synthetic m=2 block data over a Hermite base with diagonal sub-blocks."""
    mu1 = Measure.continuous(hermite())
    nblocks = (count + 2) // 2 + 1
    diag = []
    sub = []
    for kb in range(nblocks):
        diag.append(Matrix([[mpf(1) / (2 * kb + 1), 0], [0, mpf(1) / (2 * kb + 2)]]))
        sub.append(Matrix([[mpf(1) / (kb + 2), 0], [0, mpf(1) / (kb + 3)]]))
    q_norms = tuple(mpf(1) + mpf(j) / 3 for j in range(count + 2))
    return CoherencePair(
        measure1=mu1,
        block_size=2,
        diag_blocks=tuple(diag),
        sub_blocks=tuple(sub),
        q_norms=q_norms,
    )


def test_block_m1_reduces_to_coherent():
    cp = laguerre_coherent_pair(6)
    a = coherent_pair_sbps(cp, mpf(1), 6, verify=False)
    b = block_coherent_sbps(cp, mpf(1), 6, verify=False)
    for n in range(6):
        assert poly_close(a[n], b[n], TOL150, a[n].max_abs_coeff())


def test_block_m2_symmetric_decoupling():
    cp = block_pair_m2(8)
    lam = mpf(3) / 4
    fam = block_coherent_sbps(cp, lam, 6)
    base = factorize(assemble_moment_matrix(MeasureMatrix.standard(cp.measure1), 7))
    polys = [base.p1(n) for n in range(7)]
    # breve P3 - P3 proportional to P1 only, breve P4 - P4 to P2 only
    d3 = fam[3] - polys[3]
    assert d3.degree <= 1
    scale = max(d3.max_abs_coeff(), mpf(1))
    assert abs(d3[0]) <= TOL150 * scale  # P1 = x has no constant term
    d4 = fam[4] - polys[4]
    assert d4.degree <= 2
    ratio = d4[2]
    want = polys[2] * ratio
    assert poly_close(d4, want, TOL150, max(scale, want.max_abs_coeff()))


def test_discrete_laguerre_mass_at_zero():
    base = SobolevSystem(MeasureMatrix.standard(Measure.continuous(laguerre(0))), 6)
    spec = DiscreteSpec(nodes=((mpf(0), 1, 1),), masses=(Matrix([[1]]),))
    fam1, fam2, norms, _data = discrete_sobolev(base, spec, 6)
    assert poly_close(fam1[1], Polynomial((mpf(-1) / 2, 1)), TOL150)
    assert poly_close(fam2[1], Polynomial((mpf(-1) / 2, 1)), TOL150)


def test_discrete_zero_mass_identity():
    base = SobolevSystem(MeasureMatrix.standard(Measure.continuous(jacobi(0, 0))), 5)
    spec = DiscreteSpec(nodes=((mpf(0), 1, 1),), masses=(Matrix([[0]]),))
    fam1, _fam2, norms, _ = discrete_sobolev(base, spec, 5)
    for n in range(5):
        assert poly_close(fam1[n], base.p1[n], TOL150)
        assert abs(norms[n] - base.h[n]) <= TOL150 * base.h[n]


def test_discrete_hermite_two_nodes_oracle():
    base = SobolevSystem(MeasureMatrix.standard(Measure.continuous(hermite())), 6)
    spec = DiscreteSpec(
        nodes=((mpf(-1), 2, 2), (mpf(1), 1, 1)),
        masses=(Matrix([[mpf(1) / 2, 0], [0, mpf(1) / 4]]), Matrix([[mpf(1) / 3]])),
    )
    fam1, fam2, _norms, _ = discrete_sobolev(base, spec, 6)  # verify=True inside
    assert all(fam1[n].is_monic() for n in range(1, 6))
    assert all(fam2[n].is_monic() for n in range(1, 6))


def test_discrete_symmetric_families_match():
    base = SobolevSystem(MeasureMatrix.standard(Measure.continuous(hermite())), 6)
    spec = DiscreteSpec(
        nodes=((mpf(-1), 2, 2), (mpf(1), 2, 2)),
        masses=(
            Matrix([[mpf(1) / 2, mpf(1) / 8], [mpf(1) / 8, mpf(1) / 4]]),
            Matrix([[mpf(1) / 3, mpf(1) / 16], [mpf(1) / 16, mpf(1) / 5]]),
        ),
    )
    fam1, fam2, _n, _ = discrete_sobolev(base, spec, 6)
    for n in range(6):
        assert poly_close(fam1[n], fam2[n], TOL150, fam1[n].max_abs_coeff())


def test_discrete_divergent_series():
    base = SobolevSystem(MeasureMatrix.standard(Measure.continuous(uniform(0, 1))), 3)
    # K^[1](0,0) = 1/h0 = 1, so mass -1 makes (I + K^[1] Xi) singular
    spec = DiscreteSpec(nodes=((mpf(0), 1, 1),), masses=(Matrix([[-1]]),))
    with pytest.raises(SeriesDivergence):
        discrete_sobolev(base, spec, 2, verify=False)


def test_w_recurrence_empty_spec():
    spec = DiscreteSpec(nodes=(), masses=())
    r1, r2, wpoly, _norms = w_recurrence(Measure.continuous(uniform(0, 1)), spec, 5)
    assert wpoly == Polynomial.one()
    assert matrix_close(r1, Matrix.identity(5), tolerance(60))
    assert matrix_close(r2, Matrix.identity(5), tolerance(60))


def test_w_recurrence_single_node_band():
    spec = DiscreteSpec(nodes=((mpf(0), 1, 1),), masses=(Matrix([[1]]),))
    r1, _r2, wpoly, _ = w_recurrence(Measure.continuous(laguerre(0)), spec, 8)
    assert wpoly.degree == 1
    assert r1.truncate(6).satisfies(BandProfile(1, 1), scale=r1.max_abs())


def test_w_recurrence_double_node():
    spec = DiscreteSpec(nodes=((mpf(0), 2, 2),), masses=(Matrix([[1, 0], [0, mpf(1) / 2]]),))
    _r1, r2, wpoly, _ = w_recurrence(Measure.continuous(laguerre(0)), spec, 9)
    assert wpoly.degree == 2
    assert r2.truncate(6).satisfies(BandProfile(2, 2), scale=r2.max_abs())
