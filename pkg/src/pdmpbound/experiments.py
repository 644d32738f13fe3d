"""Runners for the shipped experiments, shared by the CLI, scripts and tests.

Every runner takes a seed and returns the skeleton together with a summary
dictionary of plain numbers. One seed feeds two independent children: one
for the initial state and one for the sampler's clock streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import axis, hardsphere, sir
from .bps import BouncyParticle, BpsConfig
from .core import ContractError, run_sampler
from .estimators import crossing_acceptance, occupation_histogram, time_average
from .zigzag import ZigZag, ZigZagConfig


def split_seed(seed) -> tuple[np.random.SeedSequence, np.random.Generator]:
    """Clock seed material and an initial-state generator from one seed."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    clocks, init = ss.spawn(2)
    return clocks, np.random.Generator(np.random.Philox(init))


def chain_seeds(seed, chains: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(chains)


# ------------------------------------------------------------------ 1D


DEMO_SCENARIOS = ("uniform-hardwall", "soft-wall", "sticky", "sticky-one-sided", "repelling-wall",
                  "two-region", "gaussian")


@dataclass(frozen=True)
class Demo1dConfig:
    """One-dimensional scenario and its parameters."""

    scenario: str
    clock: float = 1e4
    jump: float = 1.0
    kappa: float = 1.0
    weight: float = 1.0
    speeds: tuple = (1.0, 2.0)
    sampler: str = "zz"
    refresh_rate: float = 0.0
    bins: int = 20

    def __post_init__(self):
        if self.scenario not in DEMO_SCENARIOS:
            raise ContractError(f"unknown scenario {self.scenario!r}")
        if self.sampler not in ("zz", "bps"):
            raise ContractError("sampler must be 'zz' or 'bps'")


def demo1d_model(cfg: Demo1dConfig):
    s = cfg.scenario
    if s == "uniform-hardwall":
        return axis.uniform_hardwall()
    if s == "soft-wall":
        return axis.soft_wall(cfg.jump)
    if s == "sticky":
        return axis.sticky_interior(cfg.kappa)
    if s == "sticky-one-sided":
        return axis.sticky_one_sided(cfg.kappa)
    if s == "repelling-wall":
        return axis.repelling_wall(cfg.weight)
    if s == "two-region":
        return axis.two_region(cfg.speeds, cfg.jump)
    return axis.gaussian(1)


def make_sampler(name: str, refresh_rate: float):
    if name == "zz":
        return ZigZag(ZigZagConfig(refresh_rate=refresh_rate))
    return BouncyParticle(BpsConfig(refresh_rate=refresh_rate if refresh_rate > 0 else 1.0))


def run_demo1d(cfg: Demo1dConfig, seed):
    clocks, init = split_seed(seed)
    model = demo1d_model(cfg)
    # 0.6 is off every wall, threshold and atom of the shipped scenarios.
    x0 = np.array([0.6])
    v0 = np.array([1.0 if init.random() < 0.5 else -1.0])
    z0 = model.state(x0, v0)
    sk = run_sampler(model, None, make_sampler(cfg.sampler, cfg.refresh_rate), z0, cfg.clock, clocks)
    lo, hi = (-4.0, 4.0) if cfg.scenario == "gaussian" else (0.0, 1.0)
    edges = np.linspace(lo, hi, cfg.bins + 1)
    atoms = [spec.c for spec in model.sticky]
    bins, atom_mass, outside = occupation_histogram(sk, 0, edges, atoms=atoms)
    summary = {
        "scenario": cfg.scenario,
        "clock": cfg.clock,
        "event_counts": sk.event_counts(),
        "boundary_stats": sk.stats,
        "mean": float(time_average(sk)[0]),
        "min_position": float(sk.x[:, 0].min()),
        "stuck_fraction": float(atom_mass.sum()),
        "outside_fraction": float(outside),
    }
    if cfg.scenario in ("soft-wall", "two-region"):
        above = float(time_average(sk, lambda x: (x[:, 0] > 0.5).astype(float)))
        summary["right_left_ratio"] = float(above / (1.0 - above))
        summary["acceptance_high_to_low"] = crossing_acceptance(sk, "soft-down")
        summary["acceptance_low_to_high"] = crossing_acceptance(sk, "soft-up")
    histogram = {"left": edges[:-1], "right": edges[1:], "mass": bins}
    return sk, summary, histogram


# ------------------------------------------------------------- showcase


def run_showcase(cfg: axis.ShowcaseConfig, seed, clock: float = 1e3, refresh_rate: float = 0.0):
    clocks, init = split_seed(seed)
    model = axis.showcase_model(cfg)
    z0 = axis.showcase_start(model, init)
    sk = run_sampler(model, None, ZigZag(ZigZagConfig(refresh_rate=refresh_rate)), z0, clock, clocks)
    x = sk.x
    barrier = np.array([b.coordinate for b in model.barriers], dtype=int)
    summary = {
        "dim": cfg.dim,
        "jump": cfg.jump,
        "gamma_seed": cfg.gamma_seed,
        "clock": clock,
        "event_counts": sk.event_counts(),
        "boundary_stats": sk.stats,
        "min_position": float(x.min()),
        "max_position": float(x.max()),
        "min_barrier_position": float(x[:, barrier].min()) if barrier.size else math.nan,
        "stuck_fraction": float(np.mean(sk.frozen[:-1].T @ np.diff(sk.t)) / clock),
    }
    return sk, summary


def showcase_support_ok(sk, model) -> bool:
    """Box constraints, strict positivity of barrier coordinates, atoms exact."""
    x = sk.x
    if np.any(x < model.lower) or np.any(x > model.upper):
        return False
    barrier = [b.coordinate for b in model.barriers]
    if barrier and not np.all(x[:, barrier] > 0):
        return False
    for spec in model.sticky:
        stuck = sk.frozen[:, spec.coordinate]
        if np.any(x[stuck, spec.coordinate] != spec.c):
            return False
    return True


# ------------------------------------------------------------------ SIR


def sir_model(data: sir.SirData, params: sir.SirParams) -> sir.SirModel:
    return sir.SirModel(data, {params.seed_individual: params.seed_time})


def run_sir_sample(data: sir.SirData, params: sir.SirParams, seed, clock: float = 500.0,
                   refresh_rate: float = 0.0, individuals=(), bins: int = 50):
    """Sticky Zig-Zag over the latent infection times, seed coordinate clamped."""
    clocks, init = split_seed(seed)
    model = sir_model(data, params)
    z0 = model.initial_state(sir.feasible_start(model), init)
    sk = run_sampler(model, None, ZigZag(ZigZagConfig(refresh_rate=refresh_rate)), z0, clock, clocks)
    mean = time_average(sk)
    free = model.free.tolist()
    at_atom = time_average(sk, lambda x: (x >= data.T).astype(float))
    summary = {
        "clock": clock,
        "event_counts": sk.event_counts(),
        "boundary_stats": sk.stats,
        "posterior_mean": {str(i + 1): float(mean[k]) for k, i in enumerate(free)},
        "prob_not_infected": {str(i + 1): float(at_atom[k]) for k, i in enumerate(free)
                              if not data.notified[i]},
    }
    edges = np.linspace(0.0, data.T, bins + 1)
    marginals = {}
    for ind in individuals:
        if ind - 1 not in free:
            raise ContractError(f"individual {ind} is clamped or out of range")
        k = free.index(ind - 1)
        atoms = [data.T] if not data.notified[ind - 1] else []
        mass, atom_mass, _ = occupation_histogram(sk, k, edges, atoms=atoms)
        marginals[ind] = {"left": edges[:-1], "right": edges[1:], "mass": mass,
                          "atom": float(atom_mass.sum()) if atoms else 0.0}
    return sk, summary, marginals


# ------------------------------------------------------------ spheres


@dataclass(frozen=True)
class SphereRunConfig:
    N: int = 6
    dim: int = 2
    radii: tuple | None = None
    radii_seed: int = 0
    rule: str = "weighted"
    refresh_rate: float = 0.01
    clock: float = 2000.0


def sphere_config(cfg: SphereRunConfig) -> hardsphere.SphereConfig:
    radii = np.array(cfg.radii, dtype=float) if cfg.radii is not None \
        else hardsphere.random_radii(cfg.N, cfg.radii_seed)
    return hardsphere.SphereConfig(cfg.N, cfg.dim, radii, cfg.rule)


def run_hardsphere(cfg: SphereRunConfig, seed):
    clocks, init = split_seed(seed)
    scfg = sphere_config(cfg)
    model = hardsphere.HardSphereModel(scfg)
    x0 = hardsphere.lattice_start(scfg)
    z0 = model.state(x0, init.standard_normal(model.dim))
    sampler = BouncyParticle(BpsConfig(refresh_rate=cfg.refresh_rate))
    sk = run_sampler(model, hardsphere.sphere_policy(model), sampler, z0, cfg.clock, clocks)
    i, j = hardsphere.largest_pair(scfg.radii)
    trace = hardsphere.inner_product_trace(sk, i, j, cfg.dim)
    row = sk.stats.get("contact", {"hits": 0, "valid": 0, "accepted": 0, "alpha_sum": 0.0})
    summary = {
        "rule": cfg.rule,
        "radii": scfg.radii,
        "clock": cfg.clock,
        "event_counts": sk.event_counts(),
        "boundary_stats": sk.stats,
        "overlap": hardsphere.overlap_violations(sk, scfg.radii, cfg.dim),
        "largest_pair": [i + 1, j + 1],
        "trace_min": float(trace.min()),
        "trace_max": float(trace.max()),
        "teleports_accepted": int(row["accepted"]),
        "teleports_valid": int(row["valid"]),
    }
    return sk, summary, trace
