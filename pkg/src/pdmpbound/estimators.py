"""Continuous-time averages over a skeleton.

Between consecutive records the position moves on a straight line with the
record's flow velocity, so integrals along the path reduce to sums over
segments. Occupation integrals of intervals are computed exactly; smooth
test functions use Gauss-Legendre nodes on every segment.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .core import ContractError, Skeleton, SpeedFunction


def _segments(sk: Skeleton):
    if len(sk) < 2:
        raise ContractError("skeleton has fewer than two records")
    dt = np.diff(sk.t)
    return sk.x[:-1], sk.flow_velocity()[:-1], dt


def _segment_weights(sk: Skeleton, speed) -> np.ndarray:
    """Per-segment factor ``1 / s`` used by the reweighted estimators."""
    n = len(sk) - 1
    if speed is None:
        return np.ones(n)
    if isinstance(speed, str) and speed == "skeleton":
        s = sk.speed[:-1]
    elif isinstance(speed, SpeedFunction):
        s = np.array([speed(r) for r in sk.regions[:-1]], dtype=float)
    else:
        raise ContractError("speed must be None, 'skeleton' or a SpeedFunction")
    if np.any(s <= 0):
        raise ContractError("speeds must be positive")
    return 1.0 / s


def _weighted_integral(sk: Skeleton, f: Callable, weights: np.ndarray, nodes: int):
    x0, w, dt = _segments(sk)
    u, q = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * (u + 1.0)
    q = 0.5 * q
    total = None
    for uk, qk in zip(u, q):
        vals = np.asarray(f(x0 + w * (uk * dt)[:, None]), dtype=float)
        scale = qk * dt * weights
        part = np.tensordot(scale, vals, axes=(0, 0))
        total = part if total is None else total + part
    return total, float(np.sum(dt * weights))


def time_average(sk: Skeleton, f: Callable | None = None, nodes: int = 2):
    """``(1 / T) int_0^T f(x_t) dt`` along the piecewise linear path.

    ``f`` maps an ``(m, d)`` array of positions to ``(m,)`` or ``(m, k)``
    values; the default is the identity, giving the path mean. With
    ``nodes`` Gauss-Legendre points the result is exact for ``f``
    polynomial of degree ``2 * nodes - 1`` along each segment.
    """
    f = (lambda x: x) if f is None else f
    num, den = _weighted_integral(sk, f, np.ones(len(sk) - 1), nodes)
    return num / den


def reweighted_average(sk: Skeleton, f: Callable | None = None, speed=None, nodes: int = 2):
    """Self-normalised ``int f / s dt / int 1 / s dt``.

    Undoes a speed tilt: a unit-speed path targeting ``pi * s`` gives
    averages under ``pi``. ``speed`` is a :class:`SpeedFunction` applied to
    the recorded regions, ``"skeleton"`` for the recorded speeds, or
    ``None`` (no reweighting, identical to :func:`time_average`).
    """
    f = (lambda x: x) if f is None else f
    num, den = _weighted_integral(sk, f, _segment_weights(sk, speed), nodes)
    return num / den


def to_unit_speed(sk: Skeleton) -> Skeleton:
    """Re-time a sped-up skeleton by ``d tau = s dt``.

    Positions and velocities stay; the recorded speed becomes 1, so the
    result is the path of the unit-speed process on the tilted target.
    """
    out = Skeleton(sk.dim, v_dtype=sk.v.dtype, capacity=max(len(sk), 1))
    n = len(sk)
    tau = np.concatenate([[0.0], np.cumsum(np.diff(sk.t) * sk.speed[:-1])])
    out._t[:n] = tau
    out._tag[:n] = sk.tag_codes
    out._hit[:n] = sk.is_hit
    out._x[:n] = sk.x
    out._v[:n] = sk.v
    out._frozen[:n] = sk.frozen
    out._speed[:n] = 1.0
    out._region = list(sk.regions)
    out._n = n
    out.clock = float(tau[-1])
    out.stats = sk.stats
    return out


def _time_below(x0, w, dt, level):
    """Time each segment spends strictly below ``level`` (coordinate-wise)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t_cross = (level - x0) / w
    moving = w != 0
    below_start = x0 < level
    # Segment is below on [0, t_cross) if w > 0, on (t_cross, dt] if w < 0.
    tc = np.clip(np.where(moving, t_cross, 0.0), 0.0, dt)
    up = np.where(below_start, tc, 0.0)
    down = np.where(x0 <= level, dt, dt - tc)
    return np.where(~moving, np.where(below_start, dt, 0.0), np.where(w > 0, up, down))


def occupation_histogram(sk: Skeleton, coordinate: int, edges, atoms=(), normalize: bool = True,
                         speed=None):
    """Exact time spent by one coordinate in each bin.

    Time spent frozen exactly at an atom in ``atoms`` is reported in a
    separate array rather than in the bin containing it.

    Returns
    -------
    bins : ndarray
        Occupation of ``[edges[k], edges[k+1])``, excluding atom holding.
    atom_mass : ndarray
        Holding time at each atom.
    outside : float
        Time outside ``[edges[0], edges[-1])``.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ContractError("edges must be strictly increasing with at least two entries")
    x0, w, dt = _segments(sk)
    x0 = x0[:, coordinate]
    w = w[:, coordinate]
    wt = _segment_weights(sk, speed)
    frozen = sk.frozen[:-1, coordinate]
    atoms = np.asarray(atoms, dtype=float)
    atom_mass = np.zeros(atoms.size)
    held = np.zeros(dt.shape, dtype=bool)
    for k, c in enumerate(atoms):
        at = frozen & (x0 == c)
        atom_mass[k] = float(np.sum(dt[at] * wt[at]))
        held |= at
    # A frozen coordinate not at a listed atom still occupies its bin.
    mdt = np.where(held, 0.0, dt) * wt
    below = np.array([np.sum(_time_below(x0, w, dt, e) / np.where(dt > 0, dt, 1.0) * mdt)
                      for e in edges])
    bins = np.diff(below)
    total = float(np.sum(dt * wt))
    outside = total - float(bins.sum()) - float(atom_mass.sum())
    if normalize:
        return bins / total, atom_mass / total, outside / total
    return bins, atom_mass, outside


def occupation_cdf(sk: Skeleton, coordinate: int, points, speed=None) -> np.ndarray:
    """Fraction of time with ``x_coordinate <= p`` for each ``p`` in ``points``."""
    x0, w, dt = _segments(sk)
    x0 = x0[:, coordinate]
    w = w[:, coordinate]
    wt = _segment_weights(sk, speed) * dt
    total = float(wt.sum())
    scale = np.where(dt > 0, dt, 1.0)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    # Lines have zero occupation at a single level, so "<=" and "<" agree
    # except where a coordinate is frozen exactly on p.
    out = np.empty(points.size)
    for k, p in enumerate(points):
        tb = _time_below(x0, w, dt, p)
        at = (w == 0) & (x0 == p)
        out[k] = float(np.sum((tb + np.where(at, dt, 0.0)) / scale * wt)) / total
    return out


def ks_distance(sk: Skeleton, coordinate: int, cdf: Callable, grid=None, speed=None) -> float:
    """Sup distance between the path occupation CDF and ``cdf``.

    The path CDF is continuous except at frozen levels, so evaluating on a
    fine grid plus the recorded positions approximates the supremum closely.
    """
    if grid is None:
        xs = sk.x[:, coordinate]
        grid = np.unique(np.concatenate([np.linspace(xs.min(), xs.max(), 2001), xs[::max(1, xs.size // 2000)]]))
    emp = occupation_cdf(sk, coordinate, grid, speed=speed)
    return float(np.max(np.abs(emp - cdf(grid))))


def crossing_acceptance(sk: Skeleton, cls: str) -> float:
    """Accepted fraction of non-corner hits on facets of class ``cls``."""
    row = sk.stats.get(cls)
    if not row or row["hits"] == row["corner"]:
        return float("nan")
    return row["accepted"] / (row["hits"] - row["corner"])
