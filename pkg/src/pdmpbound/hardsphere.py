"""Non-overlapping spheres under a confining potential, with swap teleports.

The state stacks ``N`` centres in ``R^d`` into one vector of length ``N d``.
Each pair ``(i, j)`` contributes a hard facet where the spheres touch. With
a teleport rule, a collision proposes to exchange the two spheres and the
sampler crosses to the image facet instead of bouncing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boundary import BoundaryPolicy, acceptance_ratio, log_acceptance_ratio
from .bps import bps_boundary_bounce, bps_teleport_velocity
from .core import ContractError, PhasePoint
from .model import BoundaryCandidate, Facet, ModelSpec, NO_BOUNDARY

OVERLAP_TOL = 1e-12
RULES = ("none", "swap", "move-small", "weighted")


@dataclass(frozen=True)
class QuadraticPotential:
    """``Psi_0(y) = scale * ||y||^2`` for each centre ``y``.

    Gradients are linear along straight lines, which the exact BPS clock
    needs. ``scale = 1/4`` is the shipped choice.
    """

    scale: float = 0.25

    def __post_init__(self):
        if not self.scale > 0:
            raise ContractError("potential scale must be positive")

    def psi(self, x: np.ndarray) -> float:
        # fsum makes the value independent of the order of the centres.
        return self.scale * math.fsum((np.asarray(x, dtype=float) ** 2).tolist())

    def grad(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * self.scale * np.asarray(x, dtype=float)


@dataclass(frozen=True, eq=False)
class SphereConfig:
    """Sphere count, dimension, radii, potential and teleport rule."""

    N: int
    dim: int
    radii: np.ndarray
    rule: str = "weighted"
    potential: QuadraticPotential = field(default_factory=QuadraticPotential)

    def __post_init__(self):
        r = np.array(self.radii, dtype=float)
        if self.N < 2 or self.dim < 1:
            raise ContractError("need at least two spheres in dimension >= 1")
        if r.shape != (self.N,) or np.any(r <= 0):
            raise ContractError("radii must be N strictly positive numbers")
        if self.rule not in RULES:
            raise ContractError(f"unknown teleport rule {self.rule!r}; choose from {RULES}")
        object.__setattr__(self, "radii", r)


def random_radii(N: int, seed, low: float = 2.0, width: float = 1.5) -> np.ndarray:
    """``low + width * U(0, 1)`` radii."""
    return low + width * np.random.default_rng(seed).random(N)


def _block(x, i, dim):
    return x[i * dim:(i + 1) * dim]


def collision_time(x, v, i: int, j: int, radii, dim: int = 2) -> float:
    """Smallest positive ``t`` with ``||dx + dv t|| = r_i + r_j``; ``inf`` if none."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    dx = _block(x, i, dim) - _block(x, j, dim)
    dv = _block(v, i, dim) - _block(v, j, dim)
    r = radii[i] + radii[j]
    a = float(dv @ dv)
    b = float(dx @ dv)
    c = float(dx @ dx) - r * r
    if c < -OVERLAP_TOL * r * r * 1e3:
        raise ContractError(f"spheres {i} and {j} overlap")
    if not b < 0 or a == 0:
        return math.inf
    disc = b * b - a * c
    if disc < 0:
        return math.inf
    return max(c / (-b + math.sqrt(disc)), 0.0)


def facet_normal(x, i: int, j: int, dim: int = 2) -> np.ndarray:
    """Unit normal of the contact facet of ``(i, j)``, pointing toward overlap."""
    x = np.asarray(x, dtype=float)
    delta = _block(x, i, dim) - _block(x, j, dim)
    u = delta / (math.sqrt(2.0) * np.linalg.norm(delta))
    n = np.zeros_like(x)
    n[i * dim:(i + 1) * dim] = -u
    n[j * dim:(j + 1) * dim] = u
    return n


def kappa_swap(x, i: int, j: int, dim: int = 2) -> np.ndarray:
    y = np.array(x, dtype=float)
    y[i * dim:(i + 1) * dim] = _block(x, j, dim)
    y[j * dim:(j + 1) * dim] = _block(x, i, dim)
    return y


def kappa_move_small(x, i: int, j: int, radii=None, dim: int = 2) -> np.ndarray:
    """Point-reflect the smaller of the two centres through the larger one.

    With ``radii`` the smaller sphere is picked automatically; without, ``i``
    is taken to be the smaller one.
    """
    if radii is not None and radii[i] > radii[j]:
        i, j = j, i
    y = np.array(x, dtype=float)
    y[i * dim:(i + 1) * dim] = 2.0 * _block(x, j, dim) - _block(x, i, dim)
    return y


def kappa_weighted(x, i: int, j: int, radii, dim: int = 2) -> np.ndarray:
    """Swap the two spheres while keeping their outer extremities in place."""
    x = np.asarray(x, dtype=float)
    xi, xj = _block(x, i, dim), _block(x, j, dim)
    ri, rj = radii[i], radii[j]
    y = x.copy()
    y[i * dim:(i + 1) * dim] = xj + (xi - xj) * (ri - rj) / (ri + rj)
    y[j * dim:(j + 1) * dim] = xi + (xj - xi) * (rj - ri) / (ri + rj)
    return y


def pair_gaps(x, radii, dim: int = 2) -> np.ndarray:
    """``||x_i - x_j|| - r_i - r_j`` for all pairs ``i < j``."""
    c = np.asarray(x, dtype=float).reshape(-1, dim)
    iu, ju = np.triu_indices(c.shape[0], k=1)
    return np.linalg.norm(c[iu] - c[ju], axis=1) - (radii[iu] + radii[ju])


def overlap_check(x, radii, dim: int = 2) -> bool:
    """True when no two spheres overlap (touching allowed)."""
    return bool(np.all(pair_gaps(x, radii, dim) >= -OVERLAP_TOL))


def segment_min_gaps(x0, w, dt, radii, dim: int = 2) -> np.ndarray:
    """Smallest gap of every pair over each straight segment, in closed form.

    ``x0`` and ``w`` are ``(m, N d)`` segment starts and velocities and
    ``dt`` their durations. Returns an ``(m, pairs)`` array.
    """
    m = x0.shape[0]
    c = x0.reshape(m, -1, dim)
    u = w.reshape(m, -1, dim)
    iu, ju = np.triu_indices(c.shape[1], k=1)
    dx = c[:, iu] - c[:, ju]
    dv = u[:, iu] - u[:, ju]
    a = np.einsum("mpk,mpk->mp", dv, dv)
    b = np.einsum("mpk,mpk->mp", dx, dv)
    with np.errstate(divide="ignore", invalid="ignore"):
        ts = np.where(a > 0, -b / a, 0.0)
    ts = np.clip(ts, 0.0, dt[:, None])
    closest = dx + dv * ts[..., None]
    return np.linalg.norm(closest, axis=2) - (radii[iu] + radii[ju])[None, :]


class HardSphereModel(ModelSpec):
    """Target ``exp(-sum Psi_0(x_i))`` restricted to non-overlapping configurations."""

    def __init__(self, config: SphereConfig):
        self.config = config
        self.N = config.N
        self.d = config.dim
        self.dim = config.N * config.dim
        self.radii = config.radii
        self.potential = config.potential
        self._iu, self._ju = np.triu_indices(self.N, k=1)
        self._r = self.radii[self._iu] + self.radii[self._ju]

    def check_state(self, z):
        super().check_state(z)
        if not overlap_check(z.x, self.radii, self.d):
            raise ContractError("initial configuration has overlapping spheres")

    def state(self, x, v) -> PhasePoint:
        return PhasePoint(x, v)

    def psi(self, z) -> float:
        return self.potential.psi(z.x)

    def gradient_line(self, z, w, idx=None):
        k = 2.0 * self.potential.scale
        g0, g1 = k * z.x, k * w
        if idx is not None:
            return g0[idx], g1[idx]
        return g0, g1

    def contains(self, x) -> bool:
        return overlap_check(x, self.radii, self.d)

    def next_boundary(self, z, w) -> BoundaryCandidate:
        c = z.x.reshape(self.N, self.d)
        u = w.reshape(self.N, self.d)
        dx = c[self._iu] - c[self._ju]
        dv = u[self._iu] - u[self._ju]
        a = np.einsum("pk,pk->p", dv, dv)
        b = np.einsum("pk,pk->p", dx, dv)
        cc = np.einsum("pk,pk->p", dx, dx) - self._r ** 2
        disc = b * b - a * cc
        ok = (b < 0) & (a > 0) & (disc >= 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(ok, cc / (-b + np.sqrt(np.where(ok, disc, 0.0))), np.inf)
        t = np.where(ok, np.maximum(t, 0.0), np.inf)
        order = np.argsort(t, kind="stable")
        k = int(order[0])
        tau = float(t[k])
        if not math.isfinite(tau):
            return NO_BOUNDARY
        second = float(t[order[1]]) if t.size > 1 else math.inf
        return BoundaryCandidate(tau, Facet("hard", "contact", (int(self._iu[k]), int(self._ju[k]))), second)

    def on_facet(self, z, facet) -> PhasePoint:
        """Place the colliding pair at exactly contact distance, symmetrically."""
        i, j = facet.data
        d = self.d
        x = z.x.copy()
        xi, xj = x[i * d:(i + 1) * d], x[j * d:(j + 1) * d]
        delta = xi - xj
        dist = float(np.linalg.norm(delta))
        r = self.radii[i] + self.radii[j]
        shift = 0.5 * (r - dist) * delta / dist
        x[i * d:(i + 1) * d] = xi + shift
        x[j * d:(j + 1) * d] = xj - shift
        return PhasePoint(x, z.v, z.region, z.frozen)

    def normal(self, z, facet) -> np.ndarray:
        i, j = facet.data
        return facet_normal(z.x, i, j, self.d)

    def kappa(self, x, facet, rule: str | None = None) -> np.ndarray:
        i, j = facet.data
        rule = self.config.rule if rule is None else rule
        if rule == "swap":
            return kappa_swap(x, i, j, self.d)
        if rule == "move-small":
            return kappa_move_small(x, i, j, self.radii, self.d)
        if rule == "weighted":
            return kappa_weighted(x, i, j, self.radii, self.d)
        raise ContractError(f"rule {rule!r} has no teleport map")

    def log_ratio(self, x, y) -> float:
        """Unclamped log acceptance ratio of a teleport from ``x`` to ``y``."""
        return log_acceptance_ratio(self.potential.psi(x), self.potential.psi(y), 1.0, 1.0)

    def teleport_alpha(self, x, facet) -> float:
        y = self.kappa(x, facet)
        if not self.contains(y):
            return 0.0
        return acceptance_ratio(self.potential.psi(x), self.potential.psi(y), 1.0, 1.0)


def sphere_policy(model: HardSphereModel, corner_tol: float = 1e-9) -> BoundaryPolicy:
    """BPS boundary kernel: bounce, or teleport with ``w = R_{n(y)}(-v)``."""
    if model.config.rule == "none":
        return BoundaryPolicy(r1=lambda v, n_x, n_y: np.array(v, dtype=float),
                              r2=bps_boundary_bounce, corner_tol=corner_tol)
    return BoundaryPolicy(r1=bps_teleport_velocity, r2=bps_boundary_bounce,
                          teleport=lambda x, facet: model.kappa(x, facet), corner_tol=corner_tol)


def lattice_start(config: SphereConfig, margin: float = 0.5) -> np.ndarray:
    """Centres on a square grid around the origin, spaced so nothing touches."""
    side = math.ceil(config.N ** (1.0 / config.dim))
    spacing = 2.0 * float(config.radii.max()) + margin
    grid = np.array(list(np.ndindex(*([side] * config.dim)))[:config.N], dtype=float)
    grid -= grid.mean(axis=0)
    return (grid * spacing).ravel()


def largest_pair(radii) -> tuple[int, int]:
    """Indices of the largest and second-largest spheres."""
    order = np.argsort(-np.asarray(radii), kind="stable")
    return int(order[0]), int(order[1])


def inner_product_trace(sk, i: int, j: int, dim: int = 2) -> np.ndarray:
    """``<x_i, x_j>`` at every skeleton record."""
    c = sk.x.reshape(len(sk), -1, dim)
    return np.einsum("mk,mk->m", c[:, i], c[:, j])


def overlap_violations(sk, radii, dim: int = 2, tol: float = OVERLAP_TOL) -> dict:
    """Count overlaps at records and at the closest approach inside each segment."""
    at_events = pair_gaps_rows(sk.x, radii, dim)
    dt = np.diff(sk.t)
    minima = segment_min_gaps(sk.x[:-1], sk.flow_velocity()[:-1], dt, radii, dim)
    return {
        "events": int(np.sum(np.any(at_events < -tol, axis=1))),
        "segments": int(np.sum(np.any(minima < -tol, axis=1))),
        "min_gap": float(min(at_events.min(), minima.min())),
    }


def pair_gaps_rows(X, radii, dim: int = 2) -> np.ndarray:
    c = X.reshape(X.shape[0], -1, dim)
    iu, ju = np.triu_indices(c.shape[1], k=1)
    return np.linalg.norm(c[:, iu] - c[:, ju], axis=2) - (radii[iu] + radii[ju])[None, :]
