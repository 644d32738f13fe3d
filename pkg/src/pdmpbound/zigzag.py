"""Zig-Zag sampler with per-coordinate clocks and its boundary velocity rules."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boundary import NORMAL_TOL, BoundaryPolicy
from .core import (DOMINATION_SLACK, ContractError, DominationError, PhasePoint, Sampler, _linear_time,
                   effective_velocity, linear_times)

# Relative tolerance for deciding that a rate function has not changed.
RATE_RTOL = 1e-9


@dataclass(frozen=True)
class ZigZagConfig:
    """Refreshment rate and whether rates are recomputed locally after events."""

    refresh_rate: float = 0.0
    local: bool = True

    def __post_init__(self):
        if not self.refresh_rate >= 0:
            raise ContractError("refresh_rate must be non-negative")


def zz_rates(z: PhasePoint, model) -> np.ndarray:
    """Per-coordinate reflection rates ``max(v_i s d_i psi, 0)`` at ``z``."""
    s = model.speed(z.region)
    w = effective_velocity(z, s)
    g0, _ = model.gradient_line(z, w)
    g = np.array(g0, dtype=float)
    for bar in model.barriers:
        g[bar.coordinate] -= bar.weight / (z.x[bar.coordinate] - bar.at)
    if not np.all(np.isfinite(g)):
        raise ContractError("gradient is not finite")
    rate = np.maximum(z.v * s * g, 0.0)
    rate[z.frozen] = 0.0
    return rate


def zz_flip(z: PhasePoint, k: int) -> PhasePoint:
    v = z.v.copy()
    v[k] = -v[k]
    return PhasePoint(z.x, v, z.region, z.frozen)


def zz_boundary_r1(v: np.ndarray) -> np.ndarray:
    return np.array(v, dtype=float)


def zz_boundary_r2(v: np.ndarray, n: np.ndarray, tol: float = NORMAL_TOL) -> np.ndarray:
    """Negate the velocity components on which the normal is supported."""
    v = np.array(v, dtype=float)
    return np.where(np.abs(n) > tol, -v, v)


def zz_policy(corner_tol: float = 1e-9) -> BoundaryPolicy:
    return BoundaryPolicy(r1=lambda v, n_x, n_y: zz_boundary_r1(v), r2=zz_boundary_r2,
                          corner_tol=corner_tol)


class ZigZag(Sampler):
    """Zig-Zag kernels raced as one Poisson clock per coordinate.

    Each coordinate keeps an absolute fire time drawn from its rate along the
    current segment. After an event only the coordinates whose rate function
    changed are redrawn; with ``local=True`` the candidates are limited to
    the model's dependents of the coordinates that changed.
    """

    velocity_dtype = np.int8

    def __init__(self, config: ZigZagConfig = ZigZagConfig()):
        self.config = config

    def default_policy(self, model=None) -> BoundaryPolicy:
        return zz_policy()

    # -- clock bookkeeping
    def start(self, z, t, model, streams):
        if not np.all(np.abs(z.v) == 1):
            raise ContractError("Zig-Zag velocities must lie in {-1, +1}^d")
        d = model.dim
        self._a = np.zeros(d)
        self._b = np.zeros(d)
        self._w = np.full(d, np.nan)
        self._tref = np.zeros(d)
        self._fire = np.full(d, np.inf)
        self._bar_w = np.zeros(d)
        self._bar_at = np.zeros(d)
        for bar in model.barriers:
            self._bar_w[bar.coordinate] = bar.weight
            self._bar_at[bar.coordinate] = bar.at
        self._has_bar = self._bar_w > 0
        rr = self.config.refresh_rate
        self._refresh_t = t + (-math.log(1.0 - streams.refresh.random()) / rr if rr > 0 else math.inf)
        self._recompute(z, t, model, streams, np.arange(d), force=True)

    def _recompute(self, z, t, model, streams, idx, force):
        if idx.size == 0:
            return
        s = model.speed(z.region)
        w = effective_velocity(z, s)
        g0, g1 = model.gradient_line(z, w, idx)
        frozen = z.frozen[idx]
        vs = z.v[idx] * s
        a = np.where(frozen, 0.0, vs * g0)
        b = np.where(frozen, 0.0, vs * g1)
        wi = w[idx]
        if force:
            sel = idx
        else:
            old_b = self._b[idx]
            old_a = self._a[idx] + old_b * (t - self._tref[idx])
            # Rebuilt and extrapolated rates differ by rounding only when nothing changed.
            same = (np.abs(b - old_b) <= RATE_RTOL * (1.0 + np.abs(b))) \
                & (np.abs(a - old_a) <= RATE_RTOL * (1.0 + np.abs(a))) & (wi == self._w[idx])
            if same.all():
                return
            keep = ~same
            sel, a, b, wi = idx[keep], a[keep], b[keep], wi[keep]
        self._draw(z, t, sel, a, b, wi, streams.reflect)

    def _draw(self, z, t, sel, a, b, wi, rng):
        n = sel.size
        e = -np.log1p(-rng.random(n))
        if n <= 16 and not self._has_bar[sel].any():
            for k, ai, bi, ei, fr in zip(sel.tolist(), a.tolist(), b.tolist(), e.tolist(),
                                         z.frozen[sel].tolist()):
                self._a[k] = ai
                self._b[k] = bi
                self._tref[k] = t
                self._fire[k] = math.inf if fr else t + _linear_time(ai, bi, ei)
            self._w[sel] = wi
            return
        tau = linear_times(a, b, e)
        moving_down = wi < 0
        bar = self._has_bar[sel] & moving_down
        if bar.any():
            j = sel[bar]
            e2 = -np.log1p(-rng.random(j.size))
            d0 = z.x[j] - self._bar_at[j]
            tb = d0 * -np.expm1(-e2 / self._bar_w[j]) / np.abs(wi[bar])
            tau[bar] = np.minimum(tau[bar], tb)
        frozen = z.frozen[sel]
        tau[frozen] = np.inf
        self._a[sel] = a
        self._b[sel] = b
        self._w[sel] = wi
        self._tref[sel] = t
        self._fire[sel] = t + tau

    def next_event(self):
        i = int(np.argmin(self._fire))
        if self._fire[i] <= self._refresh_t:
            return float(self._fire[i]), "reflection", i
        return self._refresh_t, "refreshment", -1

    def fire(self, z, t, kind, idx, model, streams):
        if kind == "refreshment":
            v = z.v.copy()
            draw = streams.refresh.integers(0, 2, size=z.dim) * 2 - 1
            v[~z.frozen] = draw[~z.frozen]
            rr = self.config.refresh_rate
            self._refresh_t = t - math.log(1.0 - streams.refresh.random()) / rr
            return PhasePoint(z.x, v, z.region, z.frozen), "refresh", None
        i = idx
        if self._has_bar[i]:
            # Thinning of the superposed linear and barrier rates.
            lin = self._a[i] + self._b[i] * (t - self._tref[i])
            s = model.speed(z.region)
            bar = -z.v[i] * s * self._bar_w[i] / (z.x[i] - self._bar_at[i])
            true = max(lin + bar, 0.0)
            bound = max(lin, 0.0) + max(bar, 0.0)
            if true > bound * (1.0 + DOMINATION_SLACK):
                raise DominationError(f"coordinate {i}: rate {true} above bound {bound}")
            if not streams.reflect.random() * bound < true:
                self._draw(z, t, np.array([i]), np.array([lin]), np.array([self._b[i]]),
                           np.array([self._w[i]]), streams.reflect)
                return z, None, ()
        return zz_flip(z, i), "reflect", (i,)

    def update(self, z, t, touched, speed_changed, model, streams):
        d = model.dim
        if touched is None or speed_changed or not self.config.local:
            idx = np.arange(d)
        else:
            if len(touched) == 0:
                return
            idx = model.dependents(touched)
        self._recompute(z, t, model, streams, idx, force=False)

    def rates_now(self, t: float) -> np.ndarray:
        """Linear part of the current rates, for diagnostics."""
        return np.maximum(self._a + self._b * (t - self._tref), 0.0)
