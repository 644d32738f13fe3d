import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pdmpbound import axis
from pdmpbound.boundary import (BoundaryHit, BoundaryPolicy, acceptance_ratio, log_acceptance_ratio,
                                resolve_boundary)
from pdmpbound.core import ContractError, PhasePoint, SpeedFunction
from pdmpbound.model import Facet
from pdmpbound.zigzag import zz_policy

finite = st.floats(-20, 20)
speeds = st.floats(0.1, 10)


def test_acceptance_examples():
    # High to low density across a jump of 1.
    assert acceptance_ratio(0.0, 1.0, 1.0, 1.0) == pytest.approx(math.exp(-1.0))
    assert acceptance_ratio(1.0, 0.0, 1.0, 1.0) == 1.0
    # A log 2 penalty is offset by doubling the speed on the far side.
    assert acceptance_ratio(0.0, math.log(2.0), 1.0, 2.0) == pytest.approx(1.0)
    assert acceptance_ratio(0.0, math.inf, 1.0, 1.0) == 0.0


def test_acceptance_contract():
    with pytest.raises(ContractError):
        acceptance_ratio(math.inf, 0.0, 1.0, 1.0)
    with pytest.raises(ContractError):
        acceptance_ratio(0.0, 0.0, 0.0, 1.0)


@given(px=finite, py=finite, sx=speeds, sy=speeds)
def test_reciprocity(px, py, sx, sy):
    assert log_acceptance_ratio(px, py, sx, sy) == pytest.approx(-log_acceptance_ratio(py, px, sy, sx), abs=1e-12)
    a, b = acceptance_ratio(px, py, sx, sy), acceptance_ratio(py, px, sy, sx)
    assert max(a, b) == 1.0
    # Detailed balance of the Metropolis step: pi(x) s(x) a(x,y) = pi(y) s(y) a(y,x).
    lhs = -px + math.log(sx) + math.log(a)
    rhs = -py + math.log(sy) + math.log(b)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def _wall_hit(model, x, v, facet):
    z = model.on_facet(model.state(np.array([x]), np.array([v])), facet)
    return BoundaryHit(z, facet, model.normal(z, facet))


def test_corner_reverses_velocity():
    model = axis.AxisModel(2, lower=[0, 0], upper=[1, 1])
    z = model.state([1.0, 1.0], [1.0, 1.0])
    out = resolve_boundary(BoundaryHit(z, Facet("hard", "hard", (1, 0)), np.array([1.0, 0.0]), True),
                           zz_policy(), model, np.random.default_rng(0))
    assert out.tag == "corner-flip"
    assert np.array_equal(out.z.v, [-1.0, -1.0])


def test_corner_keeps_arrival_direction_of_stuck_coordinates():
    model = axis.AxisModel(3, lower=[0, 0, 0], upper=[1, 1, 1])
    z = PhasePoint([1.0, 1.0, 0.25], [1.0, 1.0, 1.0], region=(False, False, False), frozen=[False, False, True])
    out = resolve_boundary(BoundaryHit(z, Facet("hard", "hard", (1, 0)), np.array([1.0, 0.0, 0.0]), True),
                           zz_policy(), model, np.random.default_rng(0))
    assert np.array_equal(out.z.v, [-1.0, -1.0, 1.0])


def test_soft_wall_certain_crossing_keeps_velocity():
    model = axis.soft_wall(1.0)
    facet = Facet("soft", "soft-up", (0, 0))
    hit = _wall_hit(model, 0.5, 1.0, facet)
    for seed in range(20):
        out = resolve_boundary(hit, zz_policy(), model, np.random.default_rng(seed))
        assert out.tag == "boundary-cross" and out.alpha == 1.0
        assert out.z.v[0] == 1.0 and out.z.x[0] == 0.5
        assert out.z.region == (True,)


def test_soft_wall_downhill_rate():
    model = axis.soft_wall(1.0)
    z = model.state([0.5], [-1.0])
    z = PhasePoint(z.x, z.v, (True,), z.frozen)
    facet = Facet("soft", "soft-down", (0, 0))
    hit = BoundaryHit(z, facet, model.normal(z, facet))
    rng = np.random.default_rng(1)
    n = 20000
    crossed = sum(resolve_boundary(hit, zz_policy(), model, rng).tag == "boundary-cross" for _ in range(n))
    p = math.exp(-1.0)
    assert abs(crossed / n - p) < 4 * math.sqrt(p * (1 - p) / n)


def test_hard_wall_reflects():
    model = axis.uniform_hardwall()
    facet = Facet("hard", "hard", (1, 0))
    out = resolve_boundary(_wall_hit(model, 1.0, 1.0, facet), zz_policy(), model, np.random.default_rng(0))
    assert out.tag == "boundary-reflect" and out.alpha == 0.0 and not out.valid
    assert out.z.v[0] == -1.0


def test_hit_must_be_entering():
    model = axis.uniform_hardwall()
    facet = Facet("hard", "hard", (1, 0))
    z = model.state([1.0], [-1.0])
    with pytest.raises(ContractError):
        resolve_boundary(BoundaryHit(z, facet, np.array([1.0])), zz_policy(), model, np.random.default_rng(0))


def test_rejection_without_r2_is_an_error():
    model = axis.uniform_hardwall()
    facet = Facet("hard", "hard", (1, 0))
    policy = BoundaryPolicy(r1=lambda v, a, b: v, r2=None)
    with pytest.raises(ContractError):
        resolve_boundary(_wall_hit(model, 1.0, 1.0, facet), policy, model, np.random.default_rng(0))


def test_speed_offsets_jump():
    # s = (1, 2) cancels a log 2 penalty for going up.
    model = axis.AxisModel(1, lower=[0.0], upper=[1.0], thresholds=[0.5], upper_shift=[math.log(2.0)],
                           speed=SpeedFunction({(False,): 1.0, (True,): 2.0}))
    facet = Facet("soft", "soft-up", (0, 0))
    out = resolve_boundary(_wall_hit(model, 0.5, 1.0, facet), zz_policy(), model, np.random.default_rng(0))
    assert out.alpha == pytest.approx(1.0)
    assert out.tag == "boundary-cross"


def test_soft_wall_flux_balance():
    # Skew balance: crossings per unit time are equal in both directions at stationarity.
    from pdmpbound.core import run_sampler
    from pdmpbound.zigzag import ZigZag
    model = axis.soft_wall(1.0)
    sk = run_sampler(model, None, ZigZag(), model.state([0.6], [1.0]), 2e4, 4)
    up = sk.stats["soft-up"]["accepted"]
    down = sk.stats["soft-down"]["accepted"]
    assert abs(up - down) <= 1
