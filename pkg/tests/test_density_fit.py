import numpy as np
import pytest
from scipy.special import eval_chebyu

from oppert import _quad
from oppert.density_fit import (FitConfig, cheb_cauchy, cholesky_bidiagonal,
                                fit_density, fit_points,
                                jacobi_from_quadrature, monic_eval,
                                quadrature_measure, spike_weight)
from oppert.errors import (Breakdown, CircleIntersectsSupport,
                           NonpositiveDensity, NotPositiveDefinite,
                           RankDeficient)
from oppert.measures import DiscreteMeasure, Interval, Measure, Spike
from oppert.mp_limits import CovarianceSpec, limit_vesd, support_edges

MP = CovarianceSpec(((1.0, 1.0),), (), 0.3)
SINGLE_GAP = CovarianceSpec(((8.0, 1.0), (1.0, 1.0)), (3.0, 1.25), 0.3)


def test_cheb_cauchy_against_quadrature():
    for z in [0.7 + 0.3j, -1.4 + 0.05j, 2.0 + 1.0j]:
        num = [_quad.cut_integral_near(
            lambda lam, da, db: eval_chebyu(k, lam) * (2 / np.pi)
            * np.sqrt(da * db) / (lam - z), -1.0, 1.0, z) for k in range(6)]
        assert np.abs(np.array(num) - cheb_cauchy(6, np.array([z]))[0]).max() \
            < 1e-12


def test_fit_recovers_mp_density():
    vl = limit_vesd(MP)
    edges, _ = support_edges(MP)
    cfg = FitConfig(ell=24)
    z = fit_points(edges, cfg)
    r = np.array([vl.stieltjes(zz) for zz in z])
    mu = fit_density(z, r, edges, cfg=cfg)
    xs = np.linspace(edges[0][0] + 1e-3, edges[0][1] - 1e-3, 40)
    for x in xs:
        assert abs(float(mu.density(np.array([x]))[0])
                   - vl.density(x)) < 1e-5
    # resolvent residual at fresh points
    z2 = np.linspace(0.3, 2.3, 17) + 0.25j
    r2 = np.array([vl.stieltjes(zz) for zz in z2])
    fit2 = 2j * np.pi * mu.cauchy(z2)
    assert np.abs(fit2 - r2).max() < 1e-6


def test_fit_low_order_is_qualitative():
    vl = limit_vesd(MP)
    edges, _ = support_edges(MP)
    cfg = FitConfig(ell=4)
    z = fit_points(edges, cfg)
    r = np.array([vl.stieltjes(zz) for zz in z])
    mu = fit_density(z, r, edges, cfg=cfg)
    assert abs(mu.mass() - 1.0) < 0.05


def test_fit_single_gap_with_spikes():
    vl = limit_vesd(SINGLE_GAP, w2_blocks=[0.25, 0.25],
                    omega2_spikes=[0.25, 0.25])
    edges, _ = support_edges(SINGLE_GAP)
    spikes = vl.spike_list()
    cfg = FitConfig(ell=20)
    z = fit_points(edges, cfg)
    r = np.array([vl.stieltjes(zz) for zz in z])
    mu = fit_density(z, r, edges, spikes=spikes, cfg=cfg)
    assert abs(mu.mass() - 1.0) < 1e-4
    for x in [0.5, 1.2, 4.0, 11.0]:
        assert abs(float(mu.density(np.array([x]))[0])
                   - vl.density(x)) < 1e-4


def test_fit_noisy_samples_keep_density_nonnegative():
    vl = limit_vesd(MP)
    edges, _ = support_edges(MP)
    cfg = FitConfig(ell=8)
    z = fit_points(edges, cfg)
    rng = np.random.default_rng(11)
    r = np.array([vl.stieltjes(zz) for zz in z])
    r = r + 0.02 * (rng.standard_normal(len(z))
                    + 1j * rng.standard_normal(len(z)))
    mu = fit_density(z, r, edges, cfg=cfg)
    a, b = edges[0]
    xs = np.linspace(a, b, 200)
    dens = mu.density(xs)
    assert dens.min() > -1e-7


def test_fit_rank_deficient_raises():
    vl = limit_vesd(MP)
    edges, _ = support_edges(MP)
    twice = [edges[0], edges[0]]
    cfg = FitConfig(ell=4)
    z = fit_points(edges, cfg)
    r = np.array([vl.stieltjes(zz) for zz in z])
    with pytest.raises(RankDeficient):
        fit_density(z, r, twice, cfg=cfg)


def semicircle_measure(a=-1.0, b=1.0):
    c = 8.0 / (np.pi * (b - a) ** 2)
    return Measure((Interval(a, b, np.array([c])),), ())


def test_quadrature_measure_moment_exactness():
    mu = Measure((Interval(0.5, 2.0, np.array([0.3, -0.1, 0.02])),), ())
    dm = quadrature_measure(mu, K=12)
    for p in range(0, 12):
        direct = _quad.cut_integral(
            lambda lam, da, db: lam ** p * mu.intervals[0].h(lam)
            * np.sqrt(da * db), 0.5, 2.0)
        assert abs(np.sum(dm.w * dm.lam ** p) - direct) < 1e-10 * max(
            1, abs(direct))


def test_quadrature_measure_appends_spikes():
    mu = Measure((Interval(0.0, 1.0, np.array([8 / np.pi])),),
                 (Spike(3.0, 0.25),))
    dm = quadrature_measure(mu, K=10)
    assert dm.lam[-1] == 3.0 and dm.w[-1] == 0.25


def test_quadrature_measure_rejects_negative_density():
    bad = Measure((Interval(0.0, 1.0, np.array([-0.5])),), ())
    with pytest.raises(NonpositiveDensity):
        quadrature_measure(bad, K=8)


def test_jacobi_semicircle_exact():
    dm = quadrature_measure(semicircle_measure(), K=60)
    a, b, m0 = jacobi_from_quadrature(dm, 30)
    assert abs(m0 - 1.0) < 1e-12
    assert np.abs(a).max() < 1e-12
    assert np.abs(b - 0.5).max() < 1e-12


def test_jacobi_shifted_interval_and_cholesky_limits():
    dm = quadrature_measure(semicircle_measure(1.0, 4.0), K=60)
    a, b, _ = jacobi_from_quadrature(dm, 25)
    assert np.abs(a - 2.5).max() < 1e-12
    assert np.abs(b - 0.75).max() < 1e-12
    alpha, beta = cholesky_bidiagonal(a, b)
    # limits (sqrt(a)+sqrt(b))/2 and (sqrt(b)-sqrt(a))/2 for [1, 4]
    assert abs(alpha[-1] - 1.5) < 1e-6
    assert abs(beta[-1] - 0.5) < 1e-6


def test_cholesky_requires_positive_support():
    dm = quadrature_measure(semicircle_measure(), K=40)
    a, b, _ = jacobi_from_quadrature(dm, 10)
    with pytest.raises(NotPositiveDefinite):
        cholesky_bidiagonal(a, b)


def test_jacobi_breakdown_on_exhausted_atoms():
    dm = DiscreteMeasure(np.array([1.0, 2.0, 3.0]),
                         np.array([0.3, 0.3, 0.4]))
    a, b, _ = jacobi_from_quadrature(dm, 3)
    assert len(a) == 3 and len(b) == 2
    with pytest.raises(Breakdown):
        jacobi_from_quadrature(dm, 4)


def test_monic_eval_chebyshev_u_identity():
    a = np.zeros(12)
    b = 0.5 * np.ones(11)
    for n in [1, 4, 7]:
        for z in [2.0, -3.0, 0.3 + 0.4j]:
            assert abs(monic_eval(a, b, z, n)
                       - eval_chebyu(n, z) / 2 ** n) < 1e-12


def test_spike_weight_residue_and_guard():
    vl = limit_vesd(MP)
    edges, _ = support_edges(MP)

    def r(z):
        z = np.atleast_1d(z)
        return 0.37 / (5.0 - z) + np.array([vl.stieltjes(zz) for zz in z])

    w = spike_weight(r, 5.0, 0.3, support=edges)
    assert abs(w - 0.37) < 1e-10
    with pytest.raises(CircleIntersectsSupport):
        spike_weight(r, 5.0, 4.0, support=edges)
