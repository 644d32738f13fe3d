"""Boundary kernel: corner reversal, teleport or crossing proposal, Metropolis test, reflection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .core import ContractError, PhasePoint
from .model import Facet

NORMAL_TOL = 1e-12


def log_acceptance_ratio(psi_x: float, psi_y: float, s_x: float, s_y: float) -> float:
    """``log R(x, y)`` for the density ``exp(-psi) s`` before clamping."""
    if not math.isfinite(psi_x):
        raise ContractError(f"near-side potential must be finite, got {psi_x}")
    if not (s_x > 0 and s_y > 0):
        raise ContractError("speeds must be positive")
    if psi_y == math.inf:
        return -math.inf
    return (psi_x - psi_y) + (math.log(s_y) - math.log(s_x))


def acceptance_ratio(psi_x: float, psi_y: float, s_x: float, s_y: float) -> float:
    """``min(1, exp(psi_x - psi_y) s_y / s_x)``; zero when ``psi_y`` is infinite."""
    log_r = log_acceptance_ratio(psi_x, psi_y, s_x, s_y)
    return 1.0 if log_r >= 0 else math.exp(log_r)


@dataclass(frozen=True)
class BoundaryPolicy:
    """How a boundary hit is resolved.

    Attributes
    ----------
    r1 : callable
        ``(v, n_x, n_y) -> w`` velocity after an accepted move.
    r2 : callable or None
        ``(v, n) -> w`` velocity after a rejection.
    teleport : callable or None
        ``(x, facet) -> y`` deterministic involution. ``None`` means soft
        facets are crossed in place.
    accept : callable
        Acceptance probability from the one-sided potentials and speeds.
    corner_tol : float
        Distance below which a second facet makes the hit a corner.
    """

    r1: Callable
    r2: Callable | None
    teleport: Callable | None = None
    accept: Callable = acceptance_ratio
    corner_tol: float = 1e-9


@dataclass(frozen=True, eq=False)
class BoundaryHit:
    z: PhasePoint
    facet: Facet
    n: np.ndarray
    is_corner: bool = False


class BoundaryOutcome(NamedTuple):
    z: PhasePoint
    tag: str
    alpha: float
    valid: bool


def _check_hit(hit: BoundaryHit, model) -> None:
    norm = float(np.linalg.norm(hit.n))
    if abs(norm - 1.0) > 1e-9:
        raise ContractError(f"facet normal has norm {norm}")
    w = hit.z.v * model.speed(hit.z.region)
    w[hit.z.frozen] = 0.0
    if not float(hit.n @ w) > 0:
        raise ContractError("hit is not on the entrance boundary: <n, v s> <= 0")


def _reflect(hit: BoundaryHit, policy: BoundaryPolicy) -> PhasePoint:
    if policy.r2 is None:
        raise ContractError("proposal rejected and no reflection rule is configured")
    return hit.z.with_(v=policy.r2(hit.z.v, hit.n))


def resolve_boundary(hit: BoundaryHit, policy: BoundaryPolicy, model, rng) -> BoundaryOutcome:
    """Apply the boundary kernel to a hit.

    Returns the new state, its tag, the acceptance probability and whether a
    valid target state was proposed.
    """
    z = hit.z
    if hit.is_corner:
        # Stuck coordinates keep their arrival direction for the release rule.
        v = z.v.copy()
        v[~z.frozen] = -v[~z.frozen]
        return BoundaryOutcome(z.with_(v=v), "corner-flip", math.nan, False)
    _check_hit(hit, model)
    s_x = model.speed(z.region)
    u = rng.random()
    if policy.teleport is not None:
        y = policy.teleport(z.x, hit.facet)
        valid = y is not None and model.contains(y)
        alpha = 0.0
        if valid:
            zy = model.relabel(z, y)
            alpha = policy.accept(model.psi(z), model.psi(zy), s_x, model.speed(zy.region))
        if alpha > u:
            n_y = model.normal(zy, hit.facet)
            w = policy.r1(z.v, hit.n, n_y)
            wy = w * model.speed(zy.region)
            wy[zy.frozen] = 0.0
            if not float(n_y @ wy) < 0:
                raise ContractError("teleport velocity does not exit the target facet")
            return BoundaryOutcome(zy.with_(v=w), "teleport", alpha, True)
        return BoundaryOutcome(_reflect(hit, policy), "boundary-reflect", alpha, valid)
    if hit.facet.kind == "hard":
        alpha, valid = 0.0, False
    else:
        cr = model.crossing(z, hit.facet)
        alpha = policy.accept(cr.psi_near, cr.psi_far, cr.s_near, cr.s_far)
        valid = cr.z_far is not None
        if alpha > u:
            w = policy.r1(z.v, hit.n, -hit.n)
            return BoundaryOutcome(cr.z_far.with_(v=w), "boundary-cross", alpha, True)
    return BoundaryOutcome(_reflect(hit, policy), "boundary-reflect", alpha, valid)
