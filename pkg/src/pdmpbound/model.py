"""Interface every target model implements for the event loop."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .core import UNIT_SPEED, ContractError, PhasePoint, SpeedFunction


@dataclass(frozen=True)
class Facet:
    """A boundary piece.

    ``kind`` is ``"soft"`` (density jump, crossable), ``"hard"`` (nothing on
    the far side) or ``"vanishing"`` (density tends to zero continuously).
    ``cls`` groups facets for acceptance statistics and ``data`` is
    model-specific.
    """

    kind: str
    cls: str
    data: Any = None


@dataclass(frozen=True)
class BoundaryCandidate:
    """Earliest facet along the flow and the time to the next one after it."""

    tau: float
    facet: Facet | None
    tau_next: float = math.inf


NO_BOUNDARY = BoundaryCandidate(math.inf, None)


@dataclass(frozen=True)
class Crossing:
    """One-sided potentials and speeds on both sides of a soft facet."""

    psi_near: float
    psi_far: float
    s_near: float
    s_far: float
    z_far: PhasePoint | None


@dataclass(frozen=True)
class LogBarrier:
    """Potential term ``-weight * log(x_i - at)`` repelling coordinate ``i`` from ``at``."""

    coordinate: int
    at: float = 0.0
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise ContractError("barrier weight must be positive")


class ModelSpec:
    """Base class for targets.

    Subclasses provide the potential ``psi`` (including the log atom weights
    of frozen coordinates), its gradient along straight lines, and the
    boundary geometry. Gradients exclude any :class:`LogBarrier` terms, which
    the Zig-Zag handles by superposition.
    """

    dim: int
    speed: SpeedFunction = UNIT_SPEED
    sticky: tuple = ()
    barriers: tuple = ()

    def check_state(self, z: PhasePoint) -> None:
        if not np.all(np.isfinite(z.x)):
            raise ContractError("initial position is not finite")
        if not math.isfinite(self.psi(z)):
            raise ContractError("initial state has zero density")

    def psi(self, z: PhasePoint) -> float:
        raise NotImplementedError

    def gradient_line(self, z: PhasePoint, w: np.ndarray, idx=None):
        """Return ``(g0, g1)`` with ``grad psi(x + w t) = g0 + g1 t`` until the next facet."""
        raise NotImplementedError

    def next_boundary(self, z: PhasePoint, w: np.ndarray) -> BoundaryCandidate:
        return NO_BOUNDARY

    def on_facet(self, z: PhasePoint, facet: Facet) -> PhasePoint:
        """Snap a state that the flow brought to ``facet`` exactly onto it."""
        return z

    def normal(self, z: PhasePoint, facet: Facet) -> np.ndarray:
        raise NotImplementedError

    def crossing(self, z: PhasePoint, facet: Facet) -> Crossing:
        raise NotImplementedError

    def contains(self, x: np.ndarray) -> bool:
        return True

    def relabel(self, z: PhasePoint, y: np.ndarray) -> PhasePoint:
        """State at position ``y`` for a teleport target."""
        return PhasePoint(y, z.v, z.region, z.frozen)

    def facet_coords(self, facet: Facet, crossed: bool) -> tuple | None:
        """Coordinates whose rates may change after resolving a hit on ``facet``.

        ``None`` means all coordinates.
        """
        return None

    def dependents(self, touched) -> np.ndarray:
        """Coordinates whose Zig-Zag rate may change when ``touched`` change."""
        return np.arange(self.dim)
