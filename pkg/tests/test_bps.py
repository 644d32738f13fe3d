import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from pdmpbound import axis, hardsphere
from pdmpbound.bps import (BouncyParticle, BpsConfig, bps_boundary_bounce, bps_bounce, bps_rate,
                           bps_teleport_velocity)
from pdmpbound.core import ContractError, PhasePoint, ipp_sample_linear, ipp_sample_thinned, run_sampler
from pdmpbound.estimators import ks_distance

vec = arrays(float, 3, elements=st.floats(-10, 10))


def _nonzero(a):
    return float(np.linalg.norm(a)) > 1e-3


def test_rate_example():
    # Quadratic confinement of the sphere model, second sphere at rest far away.
    cfg = hardsphere.SphereConfig(2, 2, np.array([1.0, 1.0]), "none")
    model = hardsphere.HardSphereModel(cfg)
    z = model.state(np.array([2.0, 0.0, 50.0, 50.0]), np.array([1.0, 0.0, 0.0, 0.0]))
    assert bps_rate(z, model) == pytest.approx(1.0)
    z = model.state(np.array([2.0, 0.0, 50.0, 50.0]), np.array([0.0, 1.0, 0.0, 0.0]))
    assert bps_rate(z, model) == 0.0


def test_bounce_examples():
    assert np.allclose(bps_bounce([1.0, 1.0], [1.0, 0.0]), [-1.0, 1.0])
    assert np.allclose(bps_boundary_bounce([1.0, 1.0], [1.0, 0.0]), [-1.0, 1.0])
    with pytest.raises(ContractError):
        bps_bounce([1.0, 1.0], [0.0, 0.0])


@given(v=vec, g=vec)
def test_bounce_isometric_involution(v, g):
    if not _nonzero(g):
        return
    w = bps_bounce(v, g)
    assert np.linalg.norm(w) == pytest.approx(np.linalg.norm(v), rel=1e-12, abs=1e-12)
    assert np.allclose(bps_bounce(w, g), v, rtol=0, atol=1e-11)
    assert float(w @ g) == pytest.approx(-float(v @ g), abs=1e-9)


def test_teleport_velocity_example():
    # Departure normal e1, arrival normal -e1: -v reflected in the arrival facet is v again.
    w = bps_teleport_velocity(np.array([1.0, 0.0]), np.array([1.0, 0.0]), np.array([-1.0, 0.0]))
    assert np.allclose(w, [1.0, 0.0])


@given(v=vec, n=vec)
def test_teleport_velocity_antipodal(v, n):
    if not (_nonzero(n) and abs(float(v @ n)) > 1e-6):
        return
    n_x = n / np.linalg.norm(n)
    if float(v @ n_x) < 0:
        v = -v
    n_y = -n_x
    w = bps_teleport_velocity(v, n_x, n_y)
    assert np.linalg.norm(w) == pytest.approx(np.linalg.norm(v), rel=1e-12)
    assert float(w @ n_y) < 0
    assert float(v @ n_x) == pytest.approx(float(w @ -n_y), rel=1e-9, abs=1e-12)


def test_teleport_velocity_rejects_entering():
    # With arrival normal e1 the reflected -v = (1, 0) points into the facet, not out of it.
    with pytest.raises(ContractError):
        bps_teleport_velocity(np.array([1.0, 0.0]), np.array([1.0, 0.0]), np.array([1.0, 0.0]))


def test_refresh_moments():
    model = axis.gaussian(3)
    sk = run_sampler(model, None, BouncyParticle(BpsConfig(refresh_rate=20.0)), model.state(np.zeros(3), np.ones(3)),
                     500.0, 0)
    v = sk.v[np.array(sk.tags) == "refresh"]
    n = len(v)
    assert n > 5000
    assert np.all(np.abs(v.mean(axis=0)) < 3 / np.sqrt(n))
    cov = np.cov(v.T)
    assert np.all(np.abs(cov - np.eye(3)) < 3 * np.sqrt(2.0 / n))


def test_exact_linear_clock_matches_thinning():
    # Rate along the flow is a + bt for a quadratic potential.
    x = np.array([0.3, -1.0])
    v = np.array([0.5, 1.2])
    a, b = float(v @ x), float(v @ v)
    rng = np.random.default_rng(3)
    exact = np.array([ipp_sample_linear(a, b, 1 - rng.random()) for _ in range(50000)])
    thin = np.array([ipp_sample_thinned(lambda t: max(a + b * t, 0.0), (max(a, 0.0), b), rng) for _ in range(50000)])
    assert stats.ks_2samp(exact, thin).statistic < 0.01


@pytest.mark.slow
def test_stationarity_2d():
    # At refresh 1 the KS spread over seeds at clock 1e4 reaches 0.02, so run four times longer.
    model = axis.gaussian(2)
    sk = run_sampler(model, None, BouncyParticle(BpsConfig(refresh_rate=1.0)),
                     model.state(np.zeros(2), np.array([1.0, 0.0])), 4e4, 9)
    for k in range(2):
        assert ks_distance(sk, k, stats.norm.cdf) < 0.02


def test_refresh_rate_must_be_positive():
    with pytest.raises(ContractError):
        BpsConfig(refresh_rate=0.0)


def test_bps_start_state_not_mutated():
    model = axis.gaussian(2)
    z0 = model.state(np.zeros(2), np.array([1.0, 0.0]))
    run_sampler(model, None, BouncyParticle(), z0, 10.0, 0)
    assert np.array_equal(z0.x, [0.0, 0.0])
