"""Phase points, Poisson clocks, skeleton storage and the generic event loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Callable, Iterator, Mapping, NamedTuple

import numpy as np

TAGS = (
    "init",
    "reflect",
    "refresh",
    "boundary-cross",
    "boundary-reflect",
    "teleport",
    "corner-flip",
    "stick",
    "unstick",
    "final",
)
TAG_CODE = {tag: code for code, tag in enumerate(TAGS)}
BOUNDARY_TAGS = frozenset({"boundary-cross", "boundary-reflect", "teleport", "corner-flip"})

# Deterministic tie order between competing clocks.
CLOCK_ORDER = ("boundary-hit", "unstick", "reflection", "refreshment")

DOMINATION_SLACK = 1e-9


class ContractError(ValueError):
    """A documented precondition of an operation was violated."""


class DominationError(RuntimeError):
    """A thinning bound failed to dominate the true rate."""


class EventCascadeError(RuntimeError):
    """Too many events fired within one unit of process time."""


class VanishingBoundaryError(RuntimeError):
    """The flow reached a facet on which the density vanishes continuously."""


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """Position, velocity, region label and frozen mask of a PDMP state.

    Arrays are copied on construction so that snapshots never alias.
    """

    x: np.ndarray
    v: np.ndarray
    region: Any = None
    frozen: np.ndarray | None = None

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        v = np.array(self.v, dtype=float).reshape(-1)
        if x.shape != v.shape:
            raise ContractError(f"x has shape {x.shape} but v has shape {v.shape}")
        if self.frozen is None:
            frozen = np.zeros(x.shape, dtype=bool)
        else:
            frozen = np.array(self.frozen, dtype=bool).reshape(-1)
            if frozen.shape != x.shape:
                raise ContractError("frozen mask must match the dimension of x")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "frozen", frozen)

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    def with_(self, **changes) -> "PhasePoint":
        return replace(self, **changes)


@dataclass(frozen=True)
class SpeedFunction:
    """Piecewise-constant speed-up s, looked up by region label.

    ``values=None`` is the unit speed.
    """

    values: Mapping[Any, float] | None = None

    def __post_init__(self):
        if self.values is not None:
            for key, val in self.values.items():
                if not (val > 0 and math.isfinite(val)):
                    raise ContractError(f"speed for region {key!r} must be positive, got {val}")

    @property
    def kind(self) -> str:
        return "unit" if self.values is None else "piecewise-constant"

    @classmethod
    def unit(cls) -> "SpeedFunction":
        return cls(None)

    def __call__(self, region) -> float:
        if self.values is None:
            return 1.0
        return float(self.values[region])


UNIT_SPEED = SpeedFunction.unit()


def effective_velocity(z: PhasePoint, speed: float) -> np.ndarray:
    """Velocity of the position flow: v*s with frozen coordinates zeroed."""
    w = z.v * speed
    w[z.frozen] = 0.0
    return w


def flow_advance(z: PhasePoint, dt: float, s: SpeedFunction = UNIT_SPEED) -> PhasePoint:
    """Move along the straight-line flow for time ``dt``."""
    if not dt >= 0:
        raise ContractError(f"dt must be non-negative, got {dt}")
    if dt == 0:
        return z
    w = effective_velocity(z, s(z.region))
    return PhasePoint(z.x + w * dt, z.v, z.region, z.frozen)


# ---------------------------------------------------------------- clocks


def ipp_sample_constant(rate: float, u: float) -> float:
    """First arrival of a homogeneous Poisson process by inversion."""
    if rate < 0:
        raise ContractError(f"rate must be non-negative, got {rate}")
    if rate == 0:
        return math.inf
    return -math.log(u) / rate


def _linear_time(a: float, b: float, e: float) -> float:
    # Solve int_0^tau (a + b s)^+ ds = e for tau.
    if b == 0.0:
        return e / a if a > 0 else math.inf
    if b > 0:
        if a >= 0:
            return 2.0 * e / (a + math.sqrt(a * a + 2.0 * b * e))
        return -a / b + math.sqrt(2.0 * e / b)
    if a <= 0:
        return math.inf
    if e >= a * a / (-2.0 * b):
        return math.inf
    return 2.0 * e / (a + math.sqrt(a * a + 2.0 * b * e))


def ipp_sample_linear(a: float, b: float, u: float) -> float:
    """First arrival of a Poisson process with rate ``t -> (a + b t)^+``."""
    return _linear_time(float(a), float(b), -math.log(u))


def linear_times(a: np.ndarray, b: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Vectorised :func:`ipp_sample_linear` taking exponential variates ``e``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    e = np.asarray(e, dtype=float)
    if a.ndim == 1 and a.shape == b.shape == e.shape and a.size <= 16:
        return np.array([_linear_time(ai, bi, ei) for ai, bi, ei in zip(a.tolist(), b.tolist(), e.tolist())])
    out = np.full(np.broadcast(a, b, e).shape, np.inf)
    a, b, e = np.broadcast_arrays(a, b, e)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        root = np.sqrt(np.maximum(a * a + 2.0 * b * e, 0.0))
        quad = 2.0 * e / (a + root)
        const = b == 0
        m = const & (a > 0)
        out[m] = e[m] / a[m]
        m = (b > 0) & (a >= 0)
        out[m] = quad[m]
        m = (b > 0) & (a < 0)
        out[m] = -a[m] / b[m] + np.sqrt(2.0 * e[m] / b[m])
        m = (b < 0) & (a > 0) & (e < a * a / (-2.0 * np.where(b < 0, b, -1.0)))
        out[m] = quad[m]
    return out


def _bound_fn(bound) -> tuple[float, float]:
    if isinstance(bound, tuple):
        a, b = bound
        return float(a), float(b)
    return float(bound), 0.0


def ipp_sample_thinned(rate_fn: Callable[[float], float], bound, rng: np.random.Generator,
                       max_proposals: int = 10**7) -> float:
    """First arrival of ``IPP(rate_fn)`` by thinning a dominating rate.

    Parameters
    ----------
    rate_fn : callable
        Non-negative rate as a function of elapsed time.
    bound : float or (a, b)
        Constant bound or the linear hinge ``(a + b t)^+``.
    rng : numpy.random.Generator
        Source of the proposal and acceptance uniforms.

    Raises
    ------
    DominationError
        If the rate exceeds the bound at a proposed time.
    """
    a, b = _bound_fn(bound)
    t = 0.0
    for _ in range(max_proposals):
        u = 1.0 - rng.random()
        step = _linear_time(a + b * t, b, -math.log(u))
        if math.isinf(step):
            return math.inf
        t += step
        top = max(a + b * t, 0.0)
        r = rate_fn(t)
        if r > top * (1.0 + DOMINATION_SLACK):
            raise DominationError(f"rate {r} exceeds bound {top} at t={t}")
        if rng.random() * top < r:
            return t
    raise RuntimeError("thinning did not accept within the proposal budget")


class ClockOutcome(NamedTuple):
    """Winner of a clock race: kind, elapsed time and an optional index."""

    winner: str
    tau: float
    index: int = -1


def race_clocks(candidates: Mapping[str, tuple[float, int]]) -> ClockOutcome:
    """Pick the earliest clock, breaking exact ties by ``CLOCK_ORDER``."""
    best = ClockOutcome("none", math.inf)
    for kind in CLOCK_ORDER:
        if kind in candidates:
            tau, idx = candidates[kind]
            if tau < best.tau:
                best = ClockOutcome(kind, tau, idx)
    return best


@dataclass
class Streams:
    """Independent generators, one per clock type."""

    reflect: np.random.Generator
    refresh: np.random.Generator
    boundary: np.random.Generator
    unstick: np.random.Generator


def make_streams(seed) -> Streams:
    """Spawn per-clock Philox streams from one seed or ``SeedSequence``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    kids = ss.spawn(4)
    return Streams(*(np.random.Generator(np.random.Philox(k)) for k in kids))


# -------------------------------------------------------------- skeleton


@dataclass(frozen=True)
class EventRecord:
    t: float
    z: PhasePoint
    tag: str


class Skeleton:
    """Columnar event list. Records are materialised lazily on indexing."""

    def __init__(self, dim: int, v_dtype=float, capacity: int = 1024):
        self.dim = dim
        self._n = 0
        self._t = np.empty(capacity)
        self._tag = np.empty(capacity, dtype=np.int8)
        self._hit = np.empty(capacity, dtype=bool)
        self._x = np.empty((capacity, dim))
        self._v = np.empty((capacity, dim), dtype=v_dtype)
        self._frozen = np.empty((capacity, dim), dtype=bool)
        self._speed = np.empty(capacity)
        self._region: list = []
        self.clock = 0.0
        self.stats: dict[str, dict[str, float]] = {}

    def _grow(self):
        cap = 2 * self._t.shape[0]
        for name in ("_t", "_tag", "_hit", "_speed"):
            old = getattr(self, name)
            new = np.empty(cap, dtype=old.dtype)
            new[: self._n] = old[: self._n]
            setattr(self, name, new)
        for name in ("_x", "_v", "_frozen"):
            old = getattr(self, name)
            new = np.empty((cap, self.dim), dtype=old.dtype)
            new[: self._n] = old[: self._n]
            setattr(self, name, new)

    def append(self, t: float, tag: str, z: PhasePoint, speed: float, hit: bool = False):
        if self._n == self._t.shape[0]:
            self._grow()
        n = self._n
        self._t[n] = t
        self._tag[n] = TAG_CODE[tag]
        self._hit[n] = hit
        self._x[n] = z.x
        self._v[n] = z.v
        self._frozen[n] = z.frozen
        self._speed[n] = speed
        self._region.append(z.region)
        self._n += 1

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, k: int) -> EventRecord:
        if k < 0:
            k += self._n
        if not 0 <= k < self._n:
            raise IndexError(k)
        z = PhasePoint(self._x[k], self._v[k], self._region[k], self._frozen[k])
        return EventRecord(float(self._t[k]), z, TAGS[self._tag[k]])

    def __iter__(self) -> Iterator[EventRecord]:
        for k in range(self._n):
            yield self[k]

    @property
    def records(self) -> list[EventRecord]:
        return list(self)

    @property
    def t(self) -> np.ndarray:
        return self._t[: self._n]

    @property
    def tag_codes(self) -> np.ndarray:
        return self._tag[: self._n]

    @property
    def tags(self) -> list[str]:
        return [TAGS[c] for c in self.tag_codes]

    @property
    def is_hit(self) -> np.ndarray:
        """True for the pre-kernel snapshot of a boundary event."""
        return self._hit[: self._n]

    @property
    def x(self) -> np.ndarray:
        return self._x[: self._n]

    @property
    def v(self) -> np.ndarray:
        return self._v[: self._n]

    @property
    def frozen(self) -> np.ndarray:
        return self._frozen[: self._n]

    @property
    def speed(self) -> np.ndarray:
        return self._speed[: self._n]

    @property
    def regions(self) -> list:
        return self._region[: self._n]

    def flow_velocity(self) -> np.ndarray:
        """Per-record position velocity v*s with frozen entries zeroed."""
        w = self.v * self.speed[:, None]
        w[self.frozen] = 0.0
        return w

    def event_counts(self) -> dict[str, int]:
        """Events per tag; each boundary event is counted once."""
        codes = self.tag_codes[~self.is_hit]
        counts = np.bincount(codes, minlength=len(TAGS))
        return {tag: int(counts[c]) for c, tag in enumerate(TAGS) if counts[c]}

    def check_invariants(self, rtol: float = 1e-9) -> None:
        """Assert time ordering and exact path continuity between records."""
        t = self.t
        codes = self.tag_codes
        assert codes[0] == TAG_CODE["init"] and t[0] == 0.0
        assert codes[-1] == TAG_CODE["final"] and t[-1] == self.clock
        dt = np.diff(t)
        assert np.all(dt >= 0), "skeleton times decrease"
        paired = self.is_hit[:-1]
        assert np.all(dt[paired] == 0), "hit snapshot not paired with its resolution"
        jumps = np.isin(codes[1:], [TAG_CODE["teleport"], TAG_CODE["unstick"]]) & ~self.is_hit[1:]
        pred = self.x[:-1] + self.flow_velocity()[:-1] * dt[:, None]
        err = np.abs(self.x[1:] - pred)
        scale = 1.0 + np.abs(self.x[1:])
        bad = (err > rtol * scale) & ~jumps[:, None]
        assert not bad.any(), f"path discontinuity at records {np.flatnonzero(bad.any(axis=1))[:5] + 1}"


# ------------------------------------------------------------ event loop


class Sampler:
    """Interface of the velocity kernels raced by :func:`run_sampler`."""

    velocity_dtype = float

    def default_policy(self, model):  # pragma: no cover - interface
        raise NotImplementedError

    def start(self, z, t, model, streams):  # pragma: no cover - interface
        raise NotImplementedError

    def next_event(self) -> tuple[float, str, int]:  # pragma: no cover - interface
        raise NotImplementedError

    def fire(self, z, t, kind, idx, model, streams):  # pragma: no cover - interface
        raise NotImplementedError

    def update(self, z, t, touched, speed_changed, model, streams):  # pragma: no cover
        raise NotImplementedError


def _bump_stats(stats: dict, cls: str, outcome) -> None:
    row = stats.setdefault(cls, {"hits": 0, "corner": 0, "valid": 0, "accepted": 0, "alpha_sum": 0.0})
    row["hits"] += 1
    if outcome.tag == "corner-flip":
        row["corner"] += 1
        return
    if outcome.valid:
        row["valid"] += 1
        row["alpha_sum"] += outcome.alpha
    if outcome.tag in ("teleport", "boundary-cross"):
        row["accepted"] += 1


def run_sampler(model, policy, sampler: Sampler, z0: PhasePoint, clock: float, rng,
                *, max_events_per_unit_time: float = 1e6) -> Skeleton:
    """Simulate a PDMP path up to ``clock`` and return its skeleton.

    Parameters
    ----------
    model : ModelSpec
        Target density, boundary geometry and sticky atoms.
    policy : BoundaryPolicy or None
        Boundary kernel; ``None`` takes the sampler's default.
    sampler : Sampler
        Zig-Zag or bouncy particle kernels.
    z0 : PhasePoint
        Initial state, interior or on an exit boundary.
    clock : float
        Final process time.
    rng : int, SeedSequence or Streams
        Seed material for the per-clock streams.
    """
    from .sticky import StickyLayer

    if not (clock > 0 and math.isfinite(clock)):
        raise ContractError(f"clock must be positive and finite, got {clock}")
    if z0.dim != model.dim:
        raise ContractError(f"state dimension {z0.dim} != model dimension {model.dim}")
    if policy is None:
        policy = sampler.default_policy(model)
    streams = rng if isinstance(rng, Streams) else make_streams(rng)
    model.check_state(z0)

    sk = Skeleton(model.dim, v_dtype=sampler.velocity_dtype)
    sk.clock = float(clock)
    t = 0.0
    z = z0
    speed = model.speed(z.region)
    sk.append(t, "init", z, speed)
    sticky = StickyLayer(model.sticky, model.dim)
    sampler.start(z, t, model, streams)
    sticky.refresh(z, t, streams.unstick)

    with np.errstate(divide="ignore", invalid="ignore"):
        _event_loop(model, policy, sampler, z, clock, streams, sk, sticky, speed,
                    max_events_per_unit_time)
    return sk


def _event_loop(model, policy, sampler, z, clock, streams, sk, sticky, speed, max_rate):
    from .boundary import BoundaryHit, resolve_boundary

    t = 0.0
    window_end = 1.0
    window_count = 0
    while True:
        w = effective_velocity(z, speed)
        cand = model.next_boundary(z, w)
        tau_s, stick_idx = sticky.next_hit(z, w)
        if tau_s <= cand.tau:
            hit_tau, hit_idx = tau_s, -1 - stick_idx
        else:
            hit_tau, hit_idx = cand.tau, 0
        t_u, u_idx = sticky.next_release()
        t_r, kind, r_idx = sampler.next_event()
        race = {"boundary-hit": (t + hit_tau, hit_idx), "unstick": (t_u, u_idx)}
        race["reflection" if kind == "reflection" else "refreshment"] = (t_r, r_idx)
        out = race_clocks(race)
        t_next = out.tau
        if t_next >= clock:
            z = flow_advance(z, clock - t, model.speed)
            sk.append(clock, "final", z, speed)
            break
        z = flow_advance(z, t_next - t, model.speed)
        t = t_next

        touched = None
        speed_changed = False
        if out.winner == "boundary-hit" and out.index < 0:
            spec_i = -1 - out.index
            z = sticky.stick(z, spec_i)
            touched = (sticky.specs[spec_i].coordinate,)
            sk.append(t, "stick", z, speed)
        elif out.winner == "boundary-hit":
            facet = cand.facet
            if facet.kind == "vanishing":
                raise VanishingBoundaryError(
                    f"flow reached vanishing-density facet {facet} at t={t}; the target "
                    "should repel the path before contact")
            z = model.on_facet(z, facet)
            n = model.normal(z, facet)
            gap = (cand.tau_next - cand.tau) * float(np.linalg.norm(w))
            hit = BoundaryHit(z, facet, n, bool(gap <= policy.corner_tol))
            outcome = resolve_boundary(hit, policy, model, streams.boundary)
            _bump_stats(sk.stats, facet.cls, outcome)
            sk.append(t, outcome.tag, z, speed, hit=True)
            z = outcome.z
            new_speed = model.speed(z.region)
            speed_changed = new_speed != speed
            speed = new_speed
            sk.append(t, outcome.tag, z, speed)
            if outcome.tag == "corner-flip" or outcome.tag == "teleport":
                touched = None
            else:
                touched = model.facet_coords(facet, outcome.tag == "boundary-cross")
        elif out.winner == "unstick":
            z = sticky.unstick(z, out.index)
            touched = (out.index,)
            sk.append(t, "unstick", z, speed)
        else:
            z, tag, touched = sampler.fire(z, t, kind, out.index, model, streams)
            if tag is not None:
                sk.append(t, tag, z, speed)
        sampler.update(z, t, touched, speed_changed, model, streams)
        sticky.refresh(z, t, streams.unstick)

        window_count += 1
        if t >= window_end:
            window_end = math.floor(t) + 1.0
            window_count = 0
        elif window_count > max_rate:
            raise EventCascadeError(f"more than {max_rate:g} events within one time unit near t={t}")
