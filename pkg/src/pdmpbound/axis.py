"""Targets whose boundaries are axis-aligned: quadratic potentials with box walls,
per-coordinate soft walls, log barriers and sticky atoms.

Covers the one-dimensional demonstration targets, the Gaussian sanity target
and the 80-dimensional showcase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ContractError, PhasePoint, SpeedFunction, UNIT_SPEED
from .model import BoundaryCandidate, Crossing, Facet, LogBarrier, ModelSpec, NO_BOUNDARY
from .sticky import StickySpec

_ROW_KIND = ("soft", "hard", "hard")


class AxisModel(ModelSpec):
    """Potential ``0.5 x'Mx + h'x - sum w log(x_i - a) + sum_i shift_i 1(x_i > thr_i)``.

    The support is the box ``[lower, upper]``. Soft walls sit at the finite
    entries of ``thresholds``; the region label is the tuple of booleans
    ``x_i > thr_i``. A lower wall coinciding with a log barrier is a
    vanishing-density facet.

    Parameters
    ----------
    dim : int
    precision : (d, d) array or None
        Symmetric matrix M of the quadratic part.
    linear : (d,) array or None
    lower, upper : (d,) arrays
        Hard walls; infinite entries mean no wall.
    thresholds, upper_shift : (d,) arrays
        Soft wall locations (NaN for none) and the potential jump above them.
    barriers : sequence of LogBarrier
    sticky : sequence of StickySpec
    speed : SpeedFunction
        Looked up by the region tuple.
    """

    def __init__(self, dim, precision=None, linear=None, lower=None, upper=None,
                 thresholds=None, upper_shift=None, barriers=(), sticky=(),
                 speed: SpeedFunction = UNIT_SPEED):
        self.dim = int(dim)
        d = self.dim
        self.M = None if precision is None else np.array(precision, dtype=float).reshape(d, d)
        if self.M is not None and not np.allclose(self.M, self.M.T, rtol=0, atol=1e-12):
            raise ContractError("precision matrix must be symmetric")
        self.h = np.zeros(d) if linear is None else np.array(linear, dtype=float)
        self.lower = np.full(d, -np.inf) if lower is None else np.array(lower, dtype=float)
        self.upper = np.full(d, np.inf) if upper is None else np.array(upper, dtype=float)
        self.thr = np.full(d, np.nan) if thresholds is None else np.array(thresholds, dtype=float)
        self.shift = np.zeros(d) if upper_shift is None else np.array(upper_shift, dtype=float)
        self.has_thr = np.isfinite(self.thr)
        self._fin_hi = np.isfinite(self.upper)
        self._fin_lo = np.isfinite(self.lower)
        self.barriers = tuple(barriers)
        self.sticky = tuple(sticky)
        self.speed = speed
        self._lo_kind = np.array(["hard"] * d, dtype=object)
        for bar in self.barriers:
            if bar.at == self.lower[bar.coordinate]:
                self._lo_kind[bar.coordinate] = "vanishing"
            elif bar.at > self.lower[bar.coordinate]:
                raise ContractError("a barrier must sit at or below the lower wall")
        self._bar_index = np.array([b.coordinate for b in self.barriers], dtype=int)
        self._bar_at = np.array([b.at for b in self.barriers], dtype=float)
        self._bar_w = np.array([b.weight for b in self.barriers], dtype=float)
        self._region_cache: dict = {}
        self._const_logw = None
        if all(not callable(sp.kappa) for sp in self.sticky):
            self._const_logw = np.zeros(d)
            for sp in self.sticky:
                self._const_logw[sp.coordinate] = math.log(sp.weight(None))
        if self.M is None:
            self._nbrs = [np.array([k]) for k in range(d)]
        else:
            self._nbrs = [np.union1d(np.flatnonzero(self.M[:, k]), [k]) for k in range(d)]

    # -- states
    def region_of(self, x) -> tuple:
        x = np.asarray(x, dtype=float)
        return tuple(bool(b) for b in (self.has_thr & (x > np.where(self.has_thr, self.thr, 0.0))))

    def state(self, x, v, frozen=None) -> PhasePoint:
        return PhasePoint(x, v, self.region_of(x), frozen)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def check_state(self, z):
        super().check_state(z)
        if not self.contains(z.x):
            raise ContractError("initial position outside the support")
        if z.region != self.region_of(z.x):
            raise ContractError("region label inconsistent with the position")
        for spec in self.sticky:
            if z.frozen[spec.coordinate] and z.x[spec.coordinate] != spec.c:
                raise ContractError("a frozen coordinate must sit on its atom")

    # -- potential
    def psi(self, z) -> float:
        x = z.x
        val = float(self.h @ x)
        if self.M is not None:
            val += 0.5 * float(x @ self.M @ x)
        if self._bar_index.size:
            gap = x[self._bar_index] - self._bar_at
            if np.any(gap <= 0):
                return math.inf
            val -= float(self._bar_w @ np.log(gap))
        if z.region is not None:
            val += float(self.shift[self._up(z.region)].sum())
        if self._const_logw is not None:
            val -= float(self._const_logw[z.frozen].sum())
        else:
            for spec in self.sticky:
                if z.frozen[spec.coordinate]:
                    val -= math.log(spec.weight(x))
        return val

    def _up(self, region) -> np.ndarray:
        arr = self._region_cache.get(region)
        if arr is None:
            if len(self._region_cache) > 4096:
                self._region_cache.clear()
            arr = np.fromiter(region, dtype=bool, count=self.dim)
            self._region_cache[region] = arr
        return arr

    def gradient_line(self, z, w, idx=None):
        if self.M is None:
            g0 = self.h.copy()
            g1 = np.zeros(self.dim)
            if idx is not None:
                return g0[idx], g1[idx]
            return g0, g1
        if idx is None:
            return self.M @ z.x + self.h, self.M @ w
        rows = self.M[idx]
        return rows @ z.x + self.h[idx], rows @ w

    def dependents(self, touched) -> np.ndarray:
        if len(touched) == 1:
            return self._nbrs[touched[0]]
        return np.unique(np.concatenate([self._nbrs[k] for k in touched]))

    # -- geometry
    def next_boundary(self, z, w) -> BoundaryCandidate:
        x = z.x
        up = self._up(z.region) if z.region is not None else np.zeros(self.dim, dtype=bool)
        pos = w > 0
        neg = w < 0
        soft_ok = self.has_thr & ((pos & ~up) | (neg & up))
        t_soft = np.where(soft_ok, (self.thr - x) / w, np.inf)
        t_hi = np.where(pos & self._fin_hi, (self.upper - x) / w, np.inf)
        t_lo = np.where(neg & self._fin_lo, (self.lower - x) / w, np.inf)
        times = np.maximum(np.concatenate([t_soft, t_hi, t_lo]), 0.0)
        k = int(np.argmin(times))
        tau = float(times[k])
        if not math.isfinite(tau):
            return NO_BOUNDARY
        times[k] = np.inf
        tau_next = float(times.min())
        row, i = divmod(k, self.dim)
        if row == 0:
            facet = Facet("soft", "soft-up" if pos[i] else "soft-down", (0, i))
        elif row == 1:
            facet = Facet("hard", "hard", (1, i))
        else:
            kind = self._lo_kind[i]
            facet = Facet(kind, kind, (2, i))
        return BoundaryCandidate(tau, facet, tau_next)

    def _target(self, facet) -> float:
        row, i = facet.data
        return (self.thr, self.upper, self.lower)[row][i]

    def on_facet(self, z, facet):
        _, i = facet.data
        x = z.x.copy()
        x[i] = self._target(facet)
        return PhasePoint(x, z.v, z.region, z.frozen)

    def normal(self, z, facet) -> np.ndarray:
        row, i = facet.data
        n = np.zeros(self.dim)
        if row == 0:
            n[i] = 1.0 if facet.cls == "soft-up" else -1.0
        else:
            n[i] = 1.0 if row == 1 else -1.0
        return n

    def crossing(self, z, facet) -> Crossing:
        """One-sided potentials across a wall, up to the constant common to both sides."""
        row, i = facet.data
        s_near = self.speed(z.region)
        if row != 0:
            return Crossing(0.0, math.inf, s_near, s_near, None)
        above = z.region[i]
        far = z.region[:i] + (not above,) + z.region[i + 1:]
        z_far = PhasePoint(z.x, z.v, far, z.frozen)
        near_psi = self.shift[i] if above else 0.0
        far_psi = 0.0 if above else self.shift[i]
        return Crossing(float(near_psi), float(far_psi), s_near, self.speed(far), z_far)

    def relabel(self, z, y):
        return PhasePoint(y, z.v, self.region_of(y), z.frozen)

    def facet_coords(self, facet, crossed) -> tuple:
        # The smooth part of the gradient is continuous across a soft wall.
        return () if crossed else (facet.data[1],)


# ------------------------------------------------------------ scenarios


def _box(lo=0.0, hi=1.0, **kw) -> AxisModel:
    return AxisModel(1, lower=[lo], upper=[hi], **kw)


def uniform_hardwall() -> AxisModel:
    """Flat potential on [0, 1]."""
    return _box()


def soft_wall(jump: float) -> AxisModel:
    """Density proportional to ``exp(jump * 1(x > 1/2))`` on [0, 1]."""
    return _box(thresholds=[0.5], upper_shift=[-jump])


def sticky_interior(kappa: float = 1.0, c: float = 0.25) -> AxisModel:
    """Flat potential on [0, 1] with an atom of weight ``kappa`` at ``c``."""
    return _box(sticky=(StickySpec(0, c, kappa),))


def sticky_one_sided(kappa: float = 1.0) -> AxisModel:
    """Flat potential on [0, 1] with an atom of weight ``kappa`` on the upper wall."""
    return _box(sticky=(StickySpec(0, 1.0, kappa, one_sided=True),))


def repelling_wall(weight: float = 1.0) -> AxisModel:
    """Density proportional to ``x**weight`` on (0, 1]."""
    return _box(barriers=(LogBarrier(0, 0.0, weight),))


def two_region(speeds=(1.0, 2.0), jump: float = 0.5, tilt_by_speed: bool = False) -> AxisModel:
    """Quadratic potential on [0, 1] with a soft wall at 1/2 and region speeds.

    ``tilt_by_speed`` folds ``-log s`` into the potential and runs at unit
    speed instead. That is the ordinary process whose time change is the
    sped-up one.
    """
    lo, hi = (False,), (True,)
    shift = -jump
    if tilt_by_speed:
        shift -= math.log(speeds[1]) - math.log(speeds[0])
        speed = UNIT_SPEED
    else:
        speed = SpeedFunction({lo: float(speeds[0]), hi: float(speeds[1])})
    return _box(precision=[[4.0]], linear=[-1.2], thresholds=[0.5], upper_shift=[shift], speed=speed)


def two_region_speed(speeds=(1.0, 2.0)) -> SpeedFunction:
    return SpeedFunction({(False,): float(speeds[0]), (True,): float(speeds[1])})


def gaussian(dim: int = 2) -> AxisModel:
    """Standard normal target without boundaries."""
    return AxisModel(dim, precision=np.eye(dim))


SCENARIOS = {
    "uniform-hardwall": uniform_hardwall,
    "soft-wall": soft_wall,
    "sticky": sticky_interior,
    "sticky-one-sided": sticky_one_sided,
    "repelling-wall": repelling_wall,
    "two-region": two_region,
    "gaussian": lambda: gaussian(1),
}


# ------------------------------------------------------------- showcase


@dataclass(frozen=True)
class ShowcaseConfig:
    """Parameters of the 80-dimensional showcase target.

    ``jump`` and ``gamma_seed`` have no defaults on purpose.
    """

    jump: float
    gamma_seed: int
    dim: int = 80
    diag: float = 1.3
    offdiag_scale: float = 0.5
    density: float = 0.1
    atom: float = 0.25
    atom_weight: float = 1.0
    wall: float = 0.5


def showcase_gamma(cfg: ShowcaseConfig) -> np.ndarray:
    """``diag * I + offdiag_scale * C`` with C sparse Gaussian."""
    rng = np.random.default_rng(cfg.gamma_seed)
    d = cfg.dim
    mask = rng.random((d, d)) < cfg.density
    c = np.where(mask, rng.standard_normal((d, d)), 0.0)
    return cfg.diag * np.eye(d) + cfg.offdiag_scale * c


def showcase_model(cfg: ShowcaseConfig) -> AxisModel:
    """``psi = x' G x - jump sum 1(x_i > 1/2) - sum_{odd i} log x_i`` with atoms at 1/4.

    Odd coordinates (1-based) carry the log barrier at 0; even ones have a
    hard wall there. Every coordinate has a hard wall at 1.
    """
    d = cfg.dim
    g = showcase_gamma(cfg)
    m = g + g.T
    barriers = tuple(LogBarrier(i, 0.0, 1.0) for i in range(0, d, 2))
    sticky = tuple(StickySpec(i, cfg.atom, cfg.atom_weight) for i in range(d))
    return AxisModel(d, precision=m, lower=np.zeros(d), upper=np.ones(d),
                     thresholds=np.full(d, cfg.wall), upper_shift=np.full(d, -cfg.jump),
                     barriers=barriers, sticky=sticky)


def showcase_start(model: AxisModel, rng: np.random.Generator) -> PhasePoint:
    """Random interior start away from atoms and walls, with random signs."""
    x = rng.uniform(0.05, 0.95, size=model.dim)
    v = rng.choice([-1.0, 1.0], size=model.dim)
    return model.state(x, v)
