import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from pdmpbound import sir
from pdmpbound.core import ContractError, run_sampler
from pdmpbound.estimators import time_average
from pdmpbound.model import Facet
from pdmpbound.zigzag import ZigZag, ZigZagConfig


def pair_data(C=((0.0, 0.8), (0.0, 0.0)), tau_star=(3.0, 0.8), tau_circ=(4.0, 0.9), T=5.0):
    return sir.SirData(T, np.array(tau_star), np.array(tau_circ), np.array(C), 0.5, 0.3)


def five_data():
    rng = np.random.default_rng(42)
    C = rng.uniform(0.2, 1.0, (5, 5))
    np.fill_diagonal(C, 0.0)
    return sir.SirData(4.0, np.array([1.5, 2.5, 3.0, np.inf, np.inf]), np.array([3.0, np.inf, 3.7, np.inf, np.inf]),
                       C, 0.4, 0.3)


def _discontinuities(data, x, k):
    others = np.delete(np.arange(data.d), k)
    pts = np.concatenate([x[others], data.tau_star[others], data.tau_circ[others]])
    return pts[np.isfinite(pts)]


def random_interior_points(data, clamped, n, rng, margin=1e-3):
    """Positive-density points with every free coordinate away from its discontinuities."""
    free = [i for i in range(data.d) if i not in clamped]
    out = []
    while len(out) < n:
        x = np.zeros(data.d)
        for i, val in clamped.items():
            x[i] = val
        for i in free:
            hi = data.tau_star[i] if data.notified[i] else data.T
            x[i] = rng.uniform(0.0, hi)
        ok = all(np.min(np.abs(_discontinuities(data, x, k) - x[k])) > margin for k in free)
        ok = ok and all(x[k] > margin for k in free)
        if ok and math.isfinite(sir.target_logdensity_oracle(x, data, clamped)):
            out.append(x)
    return out


# ------------------------------------------------------------- pressure


def test_beta_ij_branches():
    data = pair_data()
    assert sir.beta_ij([1.0, 2.0], data, 0, 1) == 0.8
    assert sir.beta_ij([2.0, 1.0], data, 0, 1) == 0.0
    assert sir.beta_ij([1.0, 3.5], data, 0, 1) == pytest.approx(0.4)
    assert sir.beta_ij([1.0, 4.5], data, 0, 1) == 0.0


def test_pressure_examples():
    data = pair_data()
    assert sir.pressure([5.0, 5.0], data, 1) == 0.0
    assert sir.pressure([1.0, 2.0], data, 1) == 0.8


def test_pressure_vector_matches_direct_sum():
    data = five_data()
    rng = np.random.default_rng(0)
    for x in random_interior_points(data, {0: 0.0}, 30, rng):
        vec = sir._pressure_vector(x, np.zeros(5), data)
        direct = [sum(sir.beta_ij(x, data, i, j) for i in range(5) if i != j) for j in range(5)]
        assert np.allclose(vec, direct, rtol=0, atol=1e-14)


def test_B_integral_example():
    data = sir.SirData(10.0, np.array([2.0, np.inf]), np.array([4.0, np.inf]), np.array([[0.0, 1.0], [0.0, 0.0]]),
                       0.5, 0.3)
    x = np.array([0.0, 3.0])
    assert sir.B_integral(x, data, 1) == pytest.approx(2.5, abs=1e-14)
    quad = integrate.quad(lambda s: sir.beta_ij([0.0, s], data, 0, 1), 0.0, 3.0, points=[2.0])[0]
    assert quad == pytest.approx(2.5, abs=1e-10)
    assert sir.B_integral(np.array([1.0, 0.5]), data, 1) == 0.0


def test_B_integral_matches_quadrature():
    data = five_data()
    rng = np.random.default_rng(1)
    for x in random_interior_points(data, {0: 0.0}, 20, rng):
        for j in range(1, 5):
            cuts = sorted(v for v in _discontinuities(data, x, j) if 0 < v < x[j])
            f = lambda s: sir.pressure(np.where(np.arange(5) == j, s, x), data, j)
            q = sum(integrate.quad(f, a, b)[0] for a, b in zip([0.0] + cuts, cuts + [x[j]]))
            assert sir.B_integral(x, data, j) == pytest.approx(q, abs=1e-10)


# ------------------------------------------------------------- gradient


def test_gradient_examples():
    data = pair_data()
    # Nothing infects 1 before 0.5 and 1 is no longer infectious when 0 is infected.
    assert sir.grad_neglogL(np.array([1.0, 0.5]), data, 1) == pytest.approx(-0.3)
    data = pair_data(tau_star=(3.0, 2.0), tau_circ=(4.0, 2.5))
    assert sir.grad_neglogL(np.array([1.0, 1.1]), data, 1) == pytest.approx(0.8 - 0.3)


def test_gradient_at_discontinuity_rejected():
    data = pair_data()
    with pytest.raises(ContractError):
        sir.grad_neglogL(np.array([1.0, 1.0]), data, 1)


@pytest.mark.parametrize("case", ["five", "three"])
def test_gradient_matches_finite_differences(case):
    if case == "five":
        data, clamped = five_data(), {0: 0.0}
    else:
        data, clamped = sir.small_instance()
    rng = np.random.default_rng(7)
    h = 1e-6
    worst = 0.0
    for x in random_interior_points(data, clamped, 100, rng):
        for k in range(data.d):
            if k in clamped:
                continue
            up, dn = x.copy(), x.copy()
            up[k] += h
            dn[k] -= h
            fd = -(sir.target_logdensity_oracle(up, data, clamped)
                   - sir.target_logdensity_oracle(dn, data, clamped)) / (2 * h)
            worst = max(worst, abs(sir.grad_neglogL(x, data, k) - fd))
    assert worst <= 1e-6


def test_model_gradient_matches_closed_form():
    data = five_data()
    model = sir.SirModel(data, {0: 0.0})
    rng = np.random.default_rng(3)
    for x in random_interior_points(data, {0: 0.0}, 20, rng):
        z = model.state(x[1:], np.ones(4))
        g0, g1 = model.gradient_line(z, np.ones(4))
        assert np.array_equal(g1, np.zeros(4))
        assert np.allclose(g0, [sir.grad_neglogL(x, data, k) for k in range(1, 5)], rtol=0, atol=1e-13)


# -------------------------------------------------------------- density


def test_psi_matches_oracle():
    data = five_data()
    model = sir.SirModel(data, {0: 0.0})
    rng = np.random.default_rng(4)
    for x in random_interior_points(data, {0: 0.0}, 30, rng):
        z = model.state(x[1:], np.ones(4))
        assert -model.psi(z) == pytest.approx(sir.target_logdensity_oracle(x, data, (0,)), abs=1e-10)


def test_psi_matches_oracle_on_atom():
    data = five_data()
    model = sir.SirModel(data, {0: 0.0})
    rng = np.random.default_rng(5)
    for x in random_interior_points(data, {0: 0.0}, 10, rng):
        x[4] = data.T
        frozen = np.array([False, False, False, True])
        z = model.state(x[1:], np.ones(4), frozen)
        assert -model.psi(z) == pytest.approx(sir.target_logdensity_oracle(x, data, (0,)), abs=1e-10)


def test_atom_mass_one_dimensional():
    # Seed never notified exerts constant pressure b0 on a single occult individual.
    b0, beta, T = 0.7, 0.3, 2.0
    data = sir.SirData(T, np.array([np.inf, np.inf]), np.array([np.inf, np.inf]),
                       np.array([[0.0, b0], [0.0, 0.0]]), 0.5, beta)
    dens = lambda s: math.exp(sir.target_logdensity_oracle([0.0, s], data, (0,)))
    cont = integrate.quad(dens, 0.0, T)[0]
    atom = math.exp(sir.target_logdensity_oracle([0.0, T], data, (0,)))
    closed_cont = b0 * math.exp(-beta * T) * (math.exp((beta - b0) * T) - 1) / (beta - b0)
    assert cont == pytest.approx(closed_cont, rel=1e-10)
    assert atom == pytest.approx(math.exp(-b0 * T), rel=1e-12)
    mass = atom / (cont + atom)
    model = sir.SirModel(data, {0: 0.0})
    z0 = model.initial_state(np.array([1.0]), np.random.default_rng(0))
    sk = run_sampler(model, None, ZigZag(), z0, 2e4, 1)
    stuck = float(np.diff(sk.t) @ sk.frozen[:-1, 0]) / sk.clock
    assert abs(stuck - mass) < 0.02


# ------------------------------------------------------------- geometry


def test_collision_time_example():
    data = sir.SirData(5.0, np.array([np.inf] * 3), np.array([np.inf] * 3),
                       np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]), 0.5, 0.3)
    model = sir.SirModel(data, {0: 0.0})
    ev = sir.next_structural_event(model, model.state(np.array([1.0, 2.0]), np.array([1.0, -1.0])))
    assert ev.tau == pytest.approx(0.5)
    assert ev.facet.data == ("col", 0, 1)
    ev = sir.next_structural_event(model, model.state(np.array([1.0, 2.0]), np.array([1.0, 1.0])))
    assert ev.facet is None or ev.facet.data[0] != "col"


def _scan_first_change(model, z, horizon, step):
    """First grid time at which the ordering, thresholds or walls change."""
    data = model.data
    w = z.v.copy()
    w[z.frozen] = 0.0
    thr = np.concatenate([data.tau_star, data.tau_circ])
    thr = thr[np.isfinite(thr)]

    def signature(t):
        x = z.x + w * t
        xf = model.full(x)
        order = tuple(np.argsort(xf, kind="stable"))
        side = tuple((x[:, None] > thr[None, :]).ravel())
        walls = tuple(x <= 0) + tuple(x >= np.where(model._free_notified, model._ts_free, np.inf))
        return order, side, walls

    base = signature(step)
    for t in np.arange(step, horizon, step):
        if signature(t) != base:
            return t
    return math.inf


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_structural_events_match_grid_scan(seed):
    data = five_data()
    model = sir.SirModel(data, {0: 0.0})
    rng = np.random.default_rng(seed)
    x = random_interior_points(data, {0: 0.0}, 1, rng, margin=1e-2)[0]
    z = model.state(x[1:], rng.choice([-1.0, 1.0], 4))
    ev = sir.next_structural_event(model, z)
    step = 1e-4
    scan = _scan_first_change(model, z, 5.0, step)
    # Collisions between coordinates without infectious links are not events.
    if ev.tau < scan - step:
        pytest.fail(f"event at {ev.tau} before any change at {scan}")
    if ev.facet is not None and ev.facet.data[0] == "col":
        assert abs(ev.tau - scan) <= 2 * step


def test_crossing_probability_limits():
    data, clamped = sir.small_instance()
    model = sir.SirModel(data, clamped)
    facet = Facet("soft", "collision", ("col", 0, 1))
    s = 0.8
    eps = 1e-9
    for v in ([1.0, -1.0], [-1.0, 1.0]):
        z = model.state(np.array([s, s]), np.array(v))
        near = np.array([0.0, s - v[0] * eps, s - v[1] * eps])
        far = np.array([0.0, s + v[0] * eps, s + v[1] * eps])
        log_r = sir.target_logdensity_oracle(far, data, clamped) - sir.target_logdensity_oracle(near, data, clamped)
        assert sir.crossing_probability(model, z, facet) == pytest.approx(min(1.0, math.exp(log_r)), abs=1e-8)


def test_crossing_probability_hard_and_threshold():
    data, clamped = sir.small_instance()
    model = sir.SirModel(data, clamped)
    z = model.state(np.array([2.5, 1.0]), np.array([1.0, 1.0]))
    assert sir.crossing_probability(model, z, Facet("hard", "hard", ("hi", 0))) == 0.0
    # Individual 2 crosses the removal time of the seed infector at 2.
    x = 2.0
    z = model.state(np.array([0.5, x]), np.array([1.0, 1.0]))
    facet = Facet("soft", "threshold", ("thr", 1, 2.0))
    near = sir.target_logdensity_oracle([0.0, 0.5, x - 1e-9], data, clamped)
    far = sir.target_logdensity_oracle([0.0, 0.5, x + 1e-9], data, clamped)
    assert sir.crossing_probability(model, z, facet) == pytest.approx(min(1.0, math.exp(far - near)), abs=1e-8)


# ------------------------------------------------------------ simulation


def test_zero_infectivity_infects_only_seed():
    params = sir.SirParams(gamma=0.5, seed=0, d=10, seed_individual=3)
    data, x = sir.forward_simulate(params, np.zeros((10, 10)), np.random.default_rng(0))
    assert sir.epidemic_counts(data, x)["infected"] == 1
    assert x[params.seed_individual] == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_counts_monotone(seed):
    params = sir.SirParams(gamma=0.5, seed=seed)
    data, x = sir.forward_simulate(params, sir.infectivity_matrix(params), np.random.default_rng(seed))
    c = sir.epidemic_counts(data, x)
    assert c["infected"] >= c["notified"] >= c["removed"]
    assert np.all(x[np.isfinite(data.tau_star)] < data.tau_star[np.isfinite(data.tau_star)])


def test_infectivity_matrix_shape():
    params = sir.SirParams(gamma=0.5, seed=3)
    C = sir.infectivity_matrix(params)
    assert np.all(np.diag(C) == 0)
    assert C[0, 6] == 0 and C[0, 5] > 0
    assert np.all(C[C > 0] >= 0.4 * 0.7 * 0.7) and np.all(C <= 0.4 * 1.6 * 1.6)


def test_sir_data_validation():
    with pytest.raises(ContractError):
        sir.SirData(5.0, np.array([2.0]), np.array([1.0]), np.zeros((1, 1)), 0.5, 0.3)
    with pytest.raises(ContractError):
        sir.SirData(5.0, np.array([2.0]), np.array([3.0]), np.zeros((1, 1)), 1.5, 0.3)


# ---------------------------------------------------------------- runs


def _five_start(rng):
    data = five_data()
    model = sir.SirModel(data, {0: 0.0})
    return model, model.initial_state(sir.feasible_start(model), rng)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_local_and_full_recompute_bit_identical(seed):
    model, z0 = _five_start(np.random.default_rng(seed))
    a = run_sampler(model, None, ZigZag(ZigZagConfig(local=True)), z0, 200.0, seed)
    b = run_sampler(model, None, ZigZag(ZigZagConfig(local=False)), z0, 200.0, seed)
    assert a.tags == b.tags
    assert np.array_equal(a.t, b.t) and np.array_equal(a.x, b.x) and np.array_equal(a.v, b.v)


def test_support_invariants_hold_on_run():
    model, z0 = _five_start(np.random.default_rng(9))
    sk = run_sampler(model, None, ZigZag(ZigZagConfig(refresh_rate=0.2)), z0, 500.0, 9)
    x = sk.x
    assert np.all(x >= 0)
    nb = model._free_notified
    assert np.all(x[:, nb] <= model._ts_free[nb])
    assert np.all(x[:, ~nb] <= model.data.T)
    assert np.all(x[sk.frozen] == model.data.T)
    assert not sk.frozen[:, nb].any()
    counts = sk.event_counts()
    assert counts.get("boundary-cross", 0) > 0 and counts.get("stick", 0) > 0


def test_feasible_start_has_positive_density():
    params = sir.SirParams(gamma=0.5, seed=1)
    data, _ = sir.forward_simulate(params, sir.infectivity_matrix(params), np.random.default_rng(1))
    model = sir.SirModel(data, {params.seed_individual: params.seed_time})
    z = model.initial_state(sir.feasible_start(model), np.random.default_rng(0))
    model.check_state(z)
    assert math.isfinite(model.psi(z))


def test_short_run_mean_is_finite():
    model, z0 = _five_start(np.random.default_rng(0))
    sk = run_sampler(model, None, ZigZag(), z0, 50.0, 0)
    assert np.all(np.isfinite(time_average(sk)))
