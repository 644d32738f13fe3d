"""Sticky atoms: freezing on hit, exponential holding times, release."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ContractError, PhasePoint

HIT_TOL = 1e-9


@dataclass(frozen=True)
class StickySpec:
    """Atom of weight ``kappa`` at ``c`` in the reference measure of coordinate ``coordinate``.

    The reference measure is ``dx_i + kappa(x) delta_c(dx_i)``. For an
    interior atom the holding time is exponential with rate
    ``|v_i| / kappa``; a one-sided atom sits on the end of the support and
    is released at half that rate with its velocity reversed.
    """

    coordinate: int
    c: float
    kappa: float | Callable[[np.ndarray], float] = 1.0
    one_sided: bool = False

    def weight(self, x: np.ndarray) -> float:
        k = self.kappa(x) if callable(self.kappa) else self.kappa
        if not k > 0:
            raise ContractError(f"atom weight must be positive, got {k}")
        return float(k)


def stick(z: PhasePoint, spec: StickySpec) -> PhasePoint:
    """Freeze coordinate ``spec.coordinate`` exactly at the atom."""
    i = spec.coordinate
    if z.frozen[i]:
        raise ContractError(f"coordinate {i} is already stuck")
    if abs(z.x[i] - spec.c) > HIT_TOL * max(1.0, abs(spec.c)):
        raise ContractError(f"coordinate {i} at {z.x[i]} is not at the atom {spec.c}")
    x = z.x.copy()
    x[i] = spec.c
    frozen = z.frozen.copy()
    frozen[i] = True
    return PhasePoint(x, z.v, z.region, frozen)


def unstick_rate(z: PhasePoint, spec: StickySpec) -> float:
    k = spec.weight(z.x)
    rate = abs(z.v[spec.coordinate]) / k
    return 0.5 * rate if spec.one_sided else rate


def unstick_clock(z: PhasePoint, spec: StickySpec, rng: np.random.Generator) -> float:
    """Holding time left at the current state, assuming the weight stays constant."""
    if not z.frozen[spec.coordinate]:
        raise ContractError(f"coordinate {spec.coordinate} is not stuck")
    rate = unstick_rate(z, spec)
    e = -math.log(1.0 - rng.random())
    return e / rate if rate > 0 else math.inf


def unstick(z: PhasePoint, spec: StickySpec) -> PhasePoint:
    """Release a stuck coordinate.

    An interior atom lets the coordinate continue in its arrival direction.
    A one-sided atom sends it back into the support.
    """
    i = spec.coordinate
    if not z.frozen[i]:
        raise ContractError(f"coordinate {i} is not stuck")
    frozen = z.frozen.copy()
    frozen[i] = False
    v = z.v
    if spec.one_sided:
        v = v.copy()
        v[i] = -v[i]
    return PhasePoint(z.x, v, z.region, frozen)


class StickyLayer:
    """Hit detection and release clocks for all atoms of a model.

    Clocks are indexed by atom. A clock is redrawn when its coordinate
    becomes stuck or, for state-dependent weights, when the rate changes.
    """

    def __init__(self, specs, dim: int):
        self.specs = tuple(specs)
        self.by_coord = {}
        for k, s in enumerate(self.specs):
            if not 0 <= s.coordinate < dim:
                raise ContractError(f"atom coordinate {s.coordinate} out of range")
            if s.coordinate in self.by_coord:
                raise ContractError("only one atom per coordinate is supported")
            self.by_coord[s.coordinate] = k
        self.coords = np.array([s.coordinate for s in self.specs], dtype=int)
        self.c = np.array([s.c for s in self.specs], dtype=float)
        self.variable = np.array([callable(s.kappa) for s in self.specs], dtype=bool)
        n = len(self.specs)
        self.fire = np.full(n, np.inf)
        self.rate = np.full(n, np.nan)

    def next_hit(self, z: PhasePoint, w: np.ndarray) -> tuple[float, int]:
        if not self.specs:
            return math.inf, -1
        wi = w[self.coords]
        tau = (self.c - z.x[self.coords]) / wi
        ok = (wi != 0) & ~z.frozen[self.coords] & (tau > 0)
        if not ok.any():
            return math.inf, -1
        tau = np.where(ok, tau, np.inf)
        k = int(np.argmin(tau))
        return float(tau[k]), k

    def stick(self, z: PhasePoint, k: int) -> PhasePoint:
        return stick(z, self.specs[k])

    def unstick(self, z: PhasePoint, coordinate: int) -> PhasePoint:
        k = self.by_coord[coordinate]
        self.fire[k] = np.inf
        self.rate[k] = np.nan
        return unstick(z, self.specs[k])

    def next_release(self) -> tuple[float, int]:
        if not self.specs:
            return math.inf, -1
        k = int(np.argmin(self.fire))
        return float(self.fire[k]), int(self.coords[k])

    def refresh(self, z: PhasePoint, t: float, rng: np.random.Generator) -> None:
        """Draw or redraw release clocks of stuck coordinates whose rate changed."""
        if not self.specs:
            return
        stuck = z.frozen[self.coords]
        self.fire[~stuck] = np.inf
        self.rate[~stuck] = np.nan
        todo = np.flatnonzero(stuck & (np.isnan(self.rate) | self.variable))
        for k in todo.tolist():
            rate = unstick_rate(z, self.specs[k])
            if rate == self.rate[k]:
                continue
            e = -math.log(1.0 - rng.random())
            self.rate[k] = rate
            self.fire[k] = t + (e / rate if rate > 0 else math.inf)
