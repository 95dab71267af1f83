import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from haarsh.eigenstates import (
    _Sturm, _exact_potential, center_bijection, certify_simple_spectrum, decay_exponent_fit,
    dynamical_kernel, is_uniformly_localized, kernel_constant, kernel_decay_check, kernel_matrix,
    localization_centers, resolve_spectrum, simplicity_report, uniform_exponent,
)
from haarsh.hull import HullParams
from haarsh.lattice import LatticeCube, LocalOperator, SpectrumReport, assemble, eigensystem
from haarsh.theta import ThetaField
from haarsh.torus import golden_mean, shift

ALPHA = golden_mean()


def _delta(n, i):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def test_centers_examples():
    assert localization_centers(_delta(5, 2)).tolist() == [2]
    tie = (_delta(5, 1) + _delta(5, 3)) / math.sqrt(2)
    assert localization_centers(tie).tolist() == [1, 3]
    with pytest.raises(ValueError):
        localization_centers(np.zeros(3))
    with pytest.raises(ValueError):
        localization_centers(np.ones(3))


def test_uniform_localization_examples():
    cube = LatticeCube.at(2)
    assert is_uniformly_localized(_delta(5, 2), 50.0, cube).localized
    tie = (_delta(5, 1) + _delta(5, 3)) / math.sqrt(2)
    chk = is_uniformly_localized(tie, 1.0, cube)
    assert not chk.localized and chk.peak_mass == pytest.approx(0.5)
    psi = np.exp(-2.0 * np.abs(np.arange(-2, 3)))
    psi /= np.linalg.norm(psi)
    assert is_uniformly_localized(psi, 1.9, cube).localized
    bad = is_uniformly_localized(psi, 2.1, cube)
    assert not bad.localized and bad.witness is not None


def test_decay_fit_examples():
    cube = LatticeCube.at(10)
    psi = np.exp(-2.0 * np.abs(np.arange(-10, 11)))
    psi /= np.linalg.norm(psi)
    fit = decay_exponent_fit(psi, cube, 10)
    assert fit.ok and fit.m_fit == pytest.approx(2.0, abs=1e-9) and fit.residual < 1e-9
    assert not decay_exponent_fit(_delta(21, 10), cube, 10).ok
    # -ln|psi(y)| / r = 2 + ln(norm) / r is smallest at the largest radius
    norm = np.linalg.norm(np.exp(-2.0 * np.abs(np.arange(-10, 11))))
    assert uniform_exponent(psi, cube, 10) == pytest.approx(2.0 + math.log(norm) / 10, rel=1e-12)


def test_strong_coupling_bijection():
    cube = LatticeCube.at(50)
    op = assemble(cube, 0.41, ThetaField(3), ALPHA, HullParams(c_a=1), 1e6)
    br = center_bijection(eigensystem(op), 3.0)
    assert br.interior_bijection and br.interior_localized
    assert br.interior_m_fit >= 3.0
    # no two localized states share a center
    assert br.injective and len(br.center_map) == len(set(br.center_map.values()))
    for p in br.profiles:
        if p.localized:
            assert len(p.centers) == 1 and p.peak_mass > 0.5


def test_free_laplacian_fails_bijection():
    cube = LatticeCube.at(50)
    rep = eigensystem(LocalOperator.from_potential(cube, np.zeros(cube.size), 0.0))
    br = center_bijection(rep, 1.0)
    assert not br.interior_bijection and len(br.nonlocalized) == cube.size


def test_bijection_equivariant_under_reflection():
    cube = LatticeCube.at(20)
    op = assemble(cube, 0.17, ThetaField(8), ALPHA, HullParams(c_a=1), 1e6)
    flipped = LocalOperator(cube, op.diagonal[::-1], op.g)
    a, b = center_bijection(eigensystem(op), 2.0), center_bijection(eigensystem(flipped), 2.0)
    n = cube.size
    assert {n - 1 - c: i for c, i in a.center_map.items()}.keys() == b.center_map.keys()
    for c, i in a.center_map.items():
        assert b.profiles[b.center_map[n - 1 - c]].eigenvalue == pytest.approx(a.profiles[i].eigenvalue)


def test_parseval_and_mass_outside():
    op = assemble(LatticeCube.at(15), 0.6, ThetaField(1), ALPHA, HullParams(c_a=1), 50.0)
    rep = eigensystem(op)
    np.testing.assert_allclose(np.sum(rep.eigenvectors**2, axis=1), 1.0, atol=1e-9)
    for i in range(op.size):
        chk = is_uniformly_localized(rep.eigenvectors[:, i], 1.0, op.cube)
        if chk.localized:
            assert 1.0 - chk.peak_mass < 0.5


def test_simplicity_examples():
    op = assemble(LatticeCube.at(10), 0.3, ThetaField(2), ALPHA, HullParams(c_a=1), 1e6, truncation=6)
    rep = eigensystem(op)
    sr = simplicity_report(rep, width=1e-6, decay=(1.0, 3.0), L=10)
    gv = np.sort(op.diagonal)
    assert sr.simple and sr.min_gap >= np.min(np.diff(gv)) - 4
    assert sr.above_width and sr.above_km and sr.km_threshold == pytest.approx(math.exp(-30) * 10**0.5)
    V = np.linspace(0, 1, 11)
    V[7] = V[3]
    deg = simplicity_report(eigensystem(LocalOperator.from_potential(LatticeCube.at(5), V, 1e6)),
                            width=1e-3)
    assert deg.min_gap < 1e-4 and not deg.above_width


def test_kernel_examples():
    lam, vec = np.linalg.eigh(np.array([[0.0, 1.0], [1.0, 0.0]]))
    rep = SpectrumReport(lam, vec, None)
    t = np.linspace(0, 10, 41)
    np.testing.assert_allclose(dynamical_kernel(rep, 0, 1, t=t), np.abs(np.sin(t)), atol=1e-12)
    assert dynamical_kernel(rep, 0, 0, t=0.0) == pytest.approx(1.0)
    assert dynamical_kernel(rep, 0, 1, phi=np.ones(2)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        dynamical_kernel(rep, 0, 1, phi=np.array([2.0, 0.0]))


def test_kernel_unitarity_and_completeness():
    op = assemble(LatticeCube.at(12), 0.52, ThetaField(6), ALPHA, HullParams(), 3.0)
    rep = eigensystem(op)
    np.testing.assert_allclose(kernel_matrix(rep, 0.0), np.eye(op.size), atol=1e-10)
    for t in (0.5, 7.0, 40.0):
        K = kernel_matrix(rep, t)
        np.testing.assert_allclose(np.sum(K**2, axis=1), 1.0, atol=1e-9)


def test_kernel_bound_strong_coupling():
    cube = LatticeCube.at(40)
    op = assemble(cube, 0.29, ThetaField(4), ALPHA, HullParams(c_a=1), 1e6)
    rep = eigensystem(op)
    br = center_bijection(rep, 3.0)
    kc = kernel_decay_check(rep, br.interior_sites, br.interior_m_fit, np.linspace(0, 100, 50))
    assert kc.passed and kc.worst_ratio < 1.0


@given(st.floats(0.1, 5.0), st.integers(1, 40))
def test_kernel_constant_dominates_convolution(m, r):
    z = np.arange(-200, 201)
    total = np.sum(np.exp(-m * np.abs(z) - m * np.abs(z - r)))
    assert total <= kernel_constant(m) * r * math.exp(-m * r) * (1 + 1e-12)


def test_kernel_constant_only_one_dimensional():
    with pytest.raises(NotImplementedError):
        kernel_constant(1.0, d=2)


def _box(seed):
    return LatticeCube.at(30), 0.1 + 0.3 * seed, ThetaField(seed), HullParams()


@pytest.mark.parametrize("seed", [0, 1])
def test_resolved_spectrum_against_sturm_oracle(seed):
    import gmpy2

    cube, om, th, p = _box(seed)
    g = 1e6
    res = resolve_spectrum(cube, om, th, ALPHA, p, g)
    sturm = certify_simple_spectrum(cube, om, th, ALPHA, p, g, generation=10)
    assert res.certificate.simple and sturm.simple
    # bisection enclosures are at most a factor 2 looser than residual intervals
    assert sturm.log2_gap_lower <= res.certificate.log2_gap_lower + 1e-9
    assert sturm.log2_gap_lower >= res.certificate.log2_gap_lower - 2.0
    # every polished eigenvalue sits at its own position in the Sturm count
    ctx = gmpy2.context(precision=res.certificate.precision)
    v = _exact_potential(shift(om, cube.sites(), ALPHA), th, 10, p, ctx)
    with gmpy2.context(ctx):
        diag = [gmpy2.mpfr(g) * x for x in v]
    st_ = _Sturm(diag, ctx)
    lam = res.report.eigenvalues
    mids = [(lam[k] + lam[k + 1]) / 2 for k in range(len(lam) - 1) if lam[k + 1] > lam[k]]
    for E in mids[::7]:
        assert st_.count(gmpy2.mpfr(E)) == int(np.sum(lam < E))
    assert res.log2_vector_error < -500
    np.testing.assert_allclose(res.report.eigenvectors.T @ res.report.eigenvectors,
                               np.eye(cube.size), atol=1e-12)


def test_resolved_vectors_are_localized_where_lapack_mixes():
    cube, om, th, p = _box(0)
    rep = eigensystem(assemble(cube, om, th, ALPHA, p, 1e6))
    res = resolve_spectrum(cube, om, th, ALPHA, p, 1e6, report=rep)
    assert len(res.refined_states) > 0
    br = center_bijection(res.report, 3.0)
    assert br.interior_bijection and br.interior_m_fit >= 3.0


def test_certification_only_one_dimensional():
    with pytest.raises(NotImplementedError):
        resolve_spectrum(LatticeCube.at(1, d=2), 0.1, ThetaField(0), np.array([[ALPHA], [0.3]]),
                         HullParams(), 1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.floats(0, 1, exclude_max=True))
def test_localized_states_have_distinct_centers(seed, omega):
    op = assemble(LatticeCube.at(12), omega, ThetaField(seed), ALPHA, HullParams(c_a=1), 1e4)
    br = center_bijection(eigensystem(op), 1.0)
    centers = [p.centers[0] for p in br.profiles if p.localized]
    assert len(centers) == len(set(centers))
