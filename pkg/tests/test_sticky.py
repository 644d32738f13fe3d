import numpy as np
import pytest

from pdmpbound import axis
from pdmpbound.core import ContractError, PhasePoint, run_sampler
from pdmpbound.estimators import occupation_histogram
from pdmpbound.sticky import StickySpec, stick, unstick, unstick_clock, unstick_rate
from pdmpbound.zigzag import ZigZag


def test_stick_freezes_at_atom():
    spec = StickySpec(0, 0.25)
    z = stick(PhasePoint([0.25], [1.0]), spec)
    assert z.frozen[0] and z.x[0] == 0.25 and z.v[0] == 1.0


def test_double_stick_rejected():
    spec = StickySpec(0, 0.25)
    z = stick(PhasePoint([0.25], [1.0]), spec)
    with pytest.raises(ContractError):
        stick(z, spec)


def test_stick_off_atom_rejected():
    with pytest.raises(ContractError):
        stick(PhasePoint([0.3], [1.0]), StickySpec(0, 0.25))


def test_unstick_requires_stuck():
    with pytest.raises(ContractError):
        unstick(PhasePoint([0.25], [1.0]), StickySpec(0, 0.25))


def test_release_directions():
    spec = StickySpec(0, 0.25)
    z = unstick(stick(PhasePoint([0.25], [1.0]), spec), spec)
    assert z.v[0] == 1.0 and not z.frozen[0]
    edge = StickySpec(0, 1.0, one_sided=True)
    z = unstick(stick(PhasePoint([1.0], [1.0]), edge), edge)
    assert z.v[0] == -1.0 and z.x[0] == 1.0


def test_stick_unstick_preserves_other_coordinates():
    spec = StickySpec(1, 0.25)
    z0 = PhasePoint([0.7, 0.25, -3.0], [-1.0, 1.0, 1.0])
    z = unstick(stick(z0, spec), spec)
    assert np.array_equal(z.x, z0.x) and np.array_equal(z.v, z0.v)
    assert np.array_equal(z.frozen, z0.frozen)


@pytest.mark.parametrize("one_sided, mean", [(False, 2.0), (True, 4.0)])
def test_unstick_clock_mean(one_sided, mean):
    c = 1.0 if one_sided else 0.25
    spec = StickySpec(0, c, 2.0, one_sided=one_sided)
    z = stick(PhasePoint([c], [1.0]), spec)
    assert unstick_rate(z, spec) == pytest.approx(1.0 / mean)
    rng = np.random.default_rng(0)
    draws = np.array([unstick_clock(z, spec, rng) for _ in range(40000)])
    assert abs(draws.mean() - mean) < 4 * mean / np.sqrt(draws.size)


def test_nonpositive_weight_rejected():
    spec = StickySpec(0, 0.25, lambda x: 0.0)
    with pytest.raises(ContractError):
        spec.weight(np.zeros(1))


def _stuck_fraction(model, clock, seed):
    sk = run_sampler(model, None, ZigZag(), model.state([0.6], [1.0]), clock, seed)
    _, atoms, _ = occupation_histogram(sk, 0, np.linspace(0, 1, 11), atoms=[model.sticky[0].c])
    return float(atoms.sum())


def test_atom_mass_weight_two():
    # Reference measure dx + 2 delta on a unit interval puts 2/3 of the mass on the atom.
    frac = _stuck_fraction(axis.sticky_interior(2.0), 2e4, 5)
    assert abs(frac - 2.0 / 3.0) < 0.03


def test_one_sided_atom_mass_weight_half():
    frac = _stuck_fraction(axis.sticky_one_sided(0.5), 2e4, 6)
    assert abs(frac - 1.0 / 3.0) < 0.03
