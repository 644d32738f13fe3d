"""Bouncy particle sampler: gradient bounces, Gaussian refreshment, boundary and teleport rules."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boundary import BoundaryPolicy
from .core import ContractError, PhasePoint, Sampler, effective_velocity, ipp_sample_linear


@dataclass(frozen=True)
class BpsConfig:
    refresh_rate: float = 1.0

    def __post_init__(self):
        if not self.refresh_rate > 0:
            raise ContractError("the bouncy particle sampler needs a positive refresh rate")


def bps_rate(z: PhasePoint, model) -> float:
    """Bounce rate ``max(<v, grad psi> s, 0)`` at ``z``."""
    s = model.speed(z.region)
    g0, _ = model.gradient_line(z, effective_velocity(z, s))
    if not np.all(np.isfinite(g0)):
        raise ContractError("gradient is not finite")
    return max(float(z.v @ g0) * s, 0.0)


def _specular(v: np.ndarray, g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    gg = float(g @ g)
    if not gg > 0:
        raise ContractError("cannot reflect against a zero vector")
    v = np.asarray(v, dtype=float)
    return v - (2.0 * float(v @ g) / gg) * g


def bps_bounce(v: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Reflect ``v`` in the hyperplane orthogonal to the gradient ``g``."""
    return _specular(v, g)


def bps_boundary_bounce(v: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Reflect ``v`` in the facet with normal ``n``."""
    return _specular(v, n)


def bps_teleport_velocity(v: np.ndarray, n_x: np.ndarray, n_y: np.ndarray) -> np.ndarray:
    """Velocity after a teleport: ``-v`` reflected in the target facet."""
    w = _specular(-np.asarray(v, dtype=float), n_y)
    if not float(np.asarray(n_y) @ w) < 0:
        raise ContractError("teleport velocity does not exit the target facet")
    return w


def bps_policy(teleport=None, corner_tol: float = 1e-9) -> BoundaryPolicy:
    if teleport is None:
        return BoundaryPolicy(r1=lambda v, n_x, n_y: np.array(v, dtype=float),
                              r2=bps_boundary_bounce, corner_tol=corner_tol)
    return BoundaryPolicy(r1=bps_teleport_velocity, r2=bps_boundary_bounce,
                          teleport=teleport, corner_tol=corner_tol)


class BouncyParticle(Sampler):
    """One global reflection clock plus a homogeneous refreshment clock."""

    velocity_dtype = float

    def __init__(self, config: BpsConfig = BpsConfig()):
        self.config = config

    def default_policy(self, model=None) -> BoundaryPolicy:
        return bps_policy()

    def start(self, z, t, model, streams):
        if model.sticky:
            raise ContractError("sticky atoms are only supported with the Zig-Zag sampler")
        if model.barriers:
            raise ContractError("log barriers are only supported with the Zig-Zag sampler")
        self._refresh_t = t - math.log(1.0 - streams.refresh.random()) / self.config.refresh_rate
        self._redraw(z, t, model, streams)

    def _redraw(self, z, t, model, streams):
        s = model.speed(z.region)
        g0, g1 = model.gradient_line(z, effective_velocity(z, s))
        a = s * float(z.v @ g0)
        b = s * float(z.v @ g1)
        self._fire = t + ipp_sample_linear(a, b, 1.0 - streams.reflect.random())

    def next_event(self):
        if self._fire <= self._refresh_t:
            return self._fire, "reflection", -1
        return self._refresh_t, "refreshment", -1

    def fire(self, z, t, kind, idx, model, streams):
        if kind == "refreshment":
            v = streams.refresh.standard_normal(z.dim)
            self._refresh_t = t - math.log(1.0 - streams.refresh.random()) / self.config.refresh_rate
            return PhasePoint(z.x, v, z.region, z.frozen), "refresh", None
        g0, _ = model.gradient_line(z, effective_velocity(z, model.speed(z.region)))
        return PhasePoint(z.x, bps_bounce(z.v, g0), z.region, z.frozen), "reflect", None

    def update(self, z, t, touched, speed_changed, model, streams):
        self._redraw(z, t, model, streams)
