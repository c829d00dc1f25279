import numpy as np
import pytest
from scipy.special import eval_chebyu

from oppert.errors import LengthMismatch, PointOnSupport, SupportEscapes
from oppert.measures import (ContourField, DiscreteMeasure, Interval, Measure,
                             Spike, build_contour, node_budget, spike_clearance,
                             u_series, vesd)


def semicircle() -> Measure:
    return Measure((Interval(-1.0, 1.0, np.array([2 / np.pi])),), ())


def test_u_series_matches_scipy():
    rng = np.random.default_rng(7)
    coef = rng.standard_normal(9)
    s = np.linspace(-0.99, 0.99, 41)
    ref = sum(c * eval_chebyu(k, s) for k, c in enumerate(coef))
    assert np.allclose(u_series(coef, s), ref, atol=1e-12)
    # complex argument
    zc = 0.3 + 0.8j
    refc = sum(c * eval_chebyu(k, zc) for k, c in enumerate(coef))
    assert abs(u_series(coef, np.array([zc]))[0] - refc) < 1e-12


def test_interval_validation_and_mass():
    with pytest.raises(LengthMismatch):
        Interval(2.0, 1.0, np.array([1.0]))
    assert abs(semicircle().mass() - 1.0) < 1e-12


def test_measure_orders_intervals_and_rejects_overlap():
    m = Measure((Interval(3.0, 4.0, np.array([0.1])),
                 Interval(0.0, 1.0, np.array([0.1]))), ())
    assert m.intervals[0].a == 0.0
    with pytest.raises(LengthMismatch):
        Measure((Interval(0.0, 2.0, np.array([0.1])),
                 Interval(1.0, 3.0, np.array([0.1]))), ())
    with pytest.raises(LengthMismatch):
        Measure((Interval(0.0, 2.0, np.array([0.1])),), (Spike(1.0, 0.2),))


def _m_semicircle(z):
    return 2 * (-z + np.sqrt(z - 1 + 0j) * np.sqrt(z + 1 + 0j))


def test_cauchy_transform_against_closed_form():
    mu = semicircle()
    for z in [1.5 + 0j, -2.0 + 0.3j, 0.2 + 1e-5j, 0.7 - 1e-5j]:
        c0 = complex(mu.cauchy(np.array([z]))[0])
        assert abs(2j * np.pi * c0 - _m_semicircle(z)) < 1e-9


def test_cauchy_plemelj_jump_recovers_density():
    mu = semicircle()
    eps = 1e-6
    for x in [-0.6, 0.0, 0.45, 0.9]:
        up = mu.cauchy(np.array([x + 1j * eps]))[0]
        dn = mu.cauchy(np.array([x - 1j * eps]))[0]
        dens = float(mu.density(np.array([x]))[0])
        assert abs((up - dn) - dens) < 1e-4


def test_cauchy_far_field_decay():
    mu = Measure((Interval(0.5, 2.0, np.array([0.2, 0.05])),),
                 (Spike(4.0, 0.25),))
    z = 1e6 + 0j
    c0 = complex(mu.cauchy(np.array([z]))[0])
    assert abs(z * 2j * np.pi * c0 + mu.mass()) < 1e-5 * mu.mass()


def test_cauchy_rejects_point_on_support():
    mu = semicircle()
    with pytest.raises(PointOnSupport):
        mu.cauchy(np.array([0.3 + 0j]))


def test_spike_terms_in_cauchy():
    mu = Measure((), (Spike(2.0, 0.5), Spike(5.0, 0.5)))
    z = 1.0 + 1.0j
    expect = (0.5 / (2.0 - z) + 0.5 / (5.0 - z)) / (2j * np.pi)
    assert abs(complex(mu.cauchy(np.array([z]))[0]) - expect) < 1e-14


def test_measure_json_roundtrip():
    mu = Measure((Interval(0.5, 2.0, np.array([0.2, 0.05, -0.01])),),
                 (Spike(4.0, 0.25),), label="demo")
    again = Measure.from_json(mu.to_json())
    assert again.intervals[0].a == mu.intervals[0].a
    assert np.allclose(again.intervals[0].cheb, mu.intervals[0].cheb)
    assert again.spikes[0].c == 4.0
    assert again.label == "demo"


def test_discrete_measure_sorted_cauchy_csv():
    lam = np.array([3.0, 1.0, 2.0])
    w = np.array([0.2, 0.5, 0.3])
    nu = DiscreteMeasure(lam, w)
    assert np.all(np.diff(nu.lam) > 0)
    z = 0.5 + 0.5j
    expect = np.sum(nu.w / (nu.lam - z)) / (2j * np.pi)
    assert abs(complex(nu.cauchy(np.array([z]))[0]) - expect) < 1e-15
    text = nu.to_csv()
    assert text.splitlines()[0] == "lambda,mass"
    again = DiscreteMeasure.from_csv(text)
    assert again.to_csv() == text
    assert np.array_equal(again.lam, nu.lam)


def test_vesd_requires_matching_lengths():
    with pytest.raises(LengthMismatch):
        vesd(np.array([1.0, 2.0]), np.array([1.0]))


def test_build_contour_basic_enclosure():
    mu = Measure((Interval(0.0, 1.0, np.array([0.1])),
                  Interval(5.0, 6.0, np.array([0.1]))), ())
    nu = DiscreteMeasure(np.array([0.5, 5.5]), np.array([0.5, 0.5]))
    field = build_contour(mu, nu, eta=0.25)
    assert len(field.spans) == 2
    assert abs(field.closure_defect()) < 1e-10
    assert field.encloses(0.5) and field.encloses(5.5)
    assert not field.encloses(3.0)
    # winding number around an enclosed point is 1
    w = np.sum(field.dz / (field.z - (0.5 + 0j))) / (2j * np.pi)
    assert abs(w - 1.0) < 1e-4


def test_build_contour_merges_close_intervals():
    mu = Measure((Interval(0.0, 1.0, np.array([0.1])),
                  Interval(1.3, 2.0, np.array([0.1]))), ())
    nu = DiscreteMeasure(np.array([0.5]), np.array([1.0]))
    field = build_contour(mu, nu, eta=0.25)
    assert len(field.spans) == 1


def test_build_contour_stray_atom_escapes():
    mu = Measure((Interval(0.0, 1.0, np.array([0.1])),), ())
    nu = DiscreteMeasure(np.array([0.5, 3.0]), np.array([0.5, 0.5]))
    with pytest.raises(SupportEscapes):
        build_contour(mu, nu, eta=0.1)


def test_build_contour_spike_matched_atom_is_outlier():
    mu = Measure((Interval(0.0, 1.0, np.array([0.1])),), (Spike(3.0, 0.2),))
    nu = DiscreteMeasure(np.array([0.5, 3.02]), np.array([0.8, 0.2]))
    field = build_contour(mu, nu, eta=0.1)
    assert list(field.outlier_idx) == [1]


def test_node_budget_floor_and_scaling():
    assert node_budget(1.0) == 256
    assert node_budget(0.01) == 6400


def test_spike_clearance():
    mu = Measure((Interval(0.0, 1.0, np.array([0.1])),),
                 (Spike(2.0, 0.1), Spike(5.0, 0.1)))
    assert abs(spike_clearance(mu, mu.spikes[0]) - 1.0) < 1e-12
    assert abs(spike_clearance(mu, mu.spikes[1]) - 3.0) < 1e-12


def test_contour_field_integrate():
    field = build_contour(semicircle(), None, eta=0.5)
    vals = 1.0 / (field.z - 0.2)
    res = field.integrate(vals) / (2j * np.pi)
    assert abs(res - 1.0) < 1e-4
