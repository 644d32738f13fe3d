"""Latent infection times of an SIR epidemic with notifications and removals.

Individual ``i`` is infected at ``x_i``, notified at ``tau_star[i]`` and
removed at ``tau_circ[i]``; both observation times are ``inf`` when not seen
before the horizon ``T``. The posterior over the unobserved ``x`` has
density jumps wherever an infection time crosses another individual's
infection, notification or removal time. Occult individuals (never notified)
carry an atom at ``T`` standing for "not infected by T".

Comparisons between coordinates are made on ``(value, velocity)`` keys so
that a coordinate sitting exactly on a facet is classified by the side it is
moving into. That keeps the crossed or reflected outcome semantic rather
than decided by rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ContractError, PhasePoint
from .model import BoundaryCandidate, Crossing, Facet, ModelSpec, NO_BOUNDARY
from .sticky import StickySpec

# Off-centre split point, keeps starts away from observation times that sit at midpoints.
_GOLDEN = (3.0 - math.sqrt(5.0)) / 2.0


def _early(i: int) -> float:
    # Early in the window keeps later windows wide. Distinct per individual
    # so that shared windows do not produce ties.
    return 0.01 * (1.0 + ((i + 1) * _GOLDEN) % 1.0)


@dataclass(frozen=True)
class ExponentialDelay:
    """Notification delay ``tau_star - x ~ Exp(rate)``."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ContractError("delay rate must be positive")

    def neg_logpdf(self, s):
        return self.rate * s - math.log(self.rate)

    def neg_logsf(self, s):
        return self.rate * s

    @property
    def hazard(self) -> float:
        # d/dx of -log f(tau - x) and of -log (1 - F(T - x)).
        return -self.rate


@dataclass(frozen=True, eq=False)
class SirData:
    """Observed epidemic and fixed model parameters."""

    T: float
    tau_star: np.ndarray
    tau_circ: np.ndarray
    C: np.ndarray
    gamma: float
    delay_beta: float

    def __post_init__(self):
        ts = np.array(self.tau_star, dtype=float)
        tc = np.array(self.tau_circ, dtype=float)
        c = np.array(self.C, dtype=float)
        d = ts.shape[0]
        if tc.shape != (d,) or c.shape != (d, d):
            raise ContractError("tau_star, tau_circ and C have inconsistent sizes")
        if np.any(ts <= 0) or np.any(tc <= 0):
            raise ContractError("observation times must be positive")
        both = np.isfinite(ts) & np.isfinite(tc)
        if np.any(ts[both] >= tc[both]):
            raise ContractError("removal must follow notification")
        if np.any(np.isfinite(tc) & ~np.isfinite(ts)):
            raise ContractError("a removed individual must have been notified")
        if np.any(c < 0) or np.any(np.diag(c) != 0):
            raise ContractError("C must be non-negative with zero diagonal")
        if not 0 < self.gamma < 1:
            raise ContractError("gamma must lie in (0, 1)")
        if not self.delay_beta > 0:
            raise ContractError("delay_beta must be positive")
        object.__setattr__(self, "tau_star", ts)
        object.__setattr__(self, "tau_circ", tc)
        object.__setattr__(self, "C", c)

    @property
    def d(self) -> int:
        return self.tau_star.shape[0]

    @property
    def notified(self) -> np.ndarray:
        return self.tau_star < self.T


# ------------------------------------------------- closed-form quantities


def beta_ij(x, data: SirData, i: int, j: int) -> float:
    """Infection pressure exerted by ``i`` on ``j`` at time ``x_j``."""
    if i == j:
        raise ContractError("beta_ij needs i != j")
    xi, xj = x[i], x[j]
    ts, tc = data.tau_star[i], data.tau_circ[i]
    if xi < xj <= ts:
        return float(data.C[i, j])
    if ts < xj <= tc:
        return float(data.gamma * data.C[i, j])
    return 0.0


def pressure(x, data: SirData, j: int) -> float:
    return float(sum(beta_ij(x, data, i, j) for i in range(data.d) if i != j))


def B_integral(x, data: SirData, j: int) -> float:
    """Integrated pressure on ``j`` over ``[0, x_j]``."""
    x = np.asarray(x, dtype=float)
    xj = x[j]
    ts = np.minimum(data.tau_star, xj)
    tc = np.minimum(data.tau_circ, xj)
    xi = np.minimum(x, xj)
    terms = data.C[:, j] * ((ts - xi) + data.gamma * (tc - ts))
    terms[j] = 0.0
    return float(terms.sum())


def _g_matrix(xk, wk, rows, xf, wf, data: SirData):
    """Rows ``k`` of the piecewise-constant matrix whose row sums give ``d psi / d x_k``."""
    xk = xk[:, None]
    wk = wk[:, None]
    xi = xf[None, :]
    wi = wf[None, :]
    ts = data.tau_star[None, :]
    tc = data.tau_circ[None, :]
    before = (xk < xi) | ((xk == xi) & (wk < wi))
    after = (xi < xk) | ((xi == xk) & (wi < wk))
    pre_notice = after & ((xk < ts) | ((xk == ts) & (wk < 0)))
    post_notice = ((ts < xk) | ((ts == xk) & (wk > 0))) & ((xk < tc) | ((xk == tc) & (wk < 0)))
    cki = data.C[rows, :]
    cik = data.C[:, rows].T
    g = np.where(before, -cki, np.where(pre_notice, cik, np.where(post_notice, data.gamma * cik, 0.0)))
    return g


def grad_neglogL(x, data: SirData, k: int) -> float:
    """``d/dx_k`` of the negative log posterior of an infected, unfrozen ``k``."""
    x = np.asarray(x, dtype=float)
    others = np.delete(np.arange(data.d), k)
    pts = np.concatenate([x[others], data.tau_star[others], data.tau_circ[others]])
    if np.any(pts == x[k]):
        raise ContractError("gradient requested exactly at a density discontinuity")
    w = np.zeros(data.d)
    g = _g_matrix(x[[k]], w[[k]], np.array([k]), x, w, data)
    return float(g.sum()) - data.delay_beta


def _pressure_vector(xf, wf, data: SirData) -> np.ndarray:
    xi = xf[:, None]
    wi = wf[:, None]
    xj = xf[None, :]
    wj = wf[None, :]
    ts = data.tau_star[:, None]
    tc = data.tau_circ[:, None]
    infected_before = (xi < xj) | ((xi == xj) & (wi < wj))
    below_ts = ~((ts < xj) | ((ts == xj) & (wj > 0)))
    above_ts = (ts < xj) | ((ts == xj) & (wj > 0))
    below_tc = ~((tc < xj) | ((tc == xj) & (wj > 0)))
    b = np.where(infected_before & below_ts, data.C,
                 np.where(above_ts & below_tc, data.gamma * data.C, 0.0))
    return b.sum(axis=0)


def _b_vector(xf, data: SirData) -> np.ndarray:
    xj = xf[None, :]
    ts = np.minimum(data.tau_star[:, None], xj)
    tc = np.minimum(data.tau_circ[:, None], xj)
    xi = np.minimum(xf[:, None], xj)
    return (data.C * ((ts - xi) + data.gamma * (tc - ts))).sum(axis=0)


# ------------------------------------------------------------ the model


class SirModel(ModelSpec):
    """Posterior over infection times of all individuals except clamped ones.

    Parameters
    ----------
    data : SirData
    clamped : dict
        Individual index -> fixed infection time (the seed infection).
    """

    def __init__(self, data: SirData, clamped: dict | None = None):
        self.data = data
        self.delay = ExponentialDelay(data.delay_beta)
        self.clamped = dict(clamped or {})
        d = data.d
        self.free = np.array([i for i in range(d) if i not in self.clamped], dtype=int)
        self.dim = self.free.size
        self._base_x = np.zeros(d)
        for i, val in self.clamped.items():
            self._base_x[i] = val
        notified = data.notified
        self._free_notified = notified[self.free]
        self._ts_free = data.tau_star[self.free]
        self._tc_free = data.tau_circ[self.free]
        atoms = []
        for pos, i in enumerate(self.free.tolist()):
            if not notified[i]:
                atoms.append(StickySpec(pos, data.T, self._atom_weight(pos), one_sided=True))
        self.sticky = tuple(atoms)
        self._occult = ~self._free_notified
        link = (data.C + data.C.T)[np.ix_(self.free, self.free)] > 0
        self._link = link
        self._upper = np.triu(link, k=1)
        self._nbrs = [np.union1d(np.flatnonzero(link[:, k]), [k]) for k in range(self.dim)]
        # Threshold candidates for coordinate k: tau_star and tau_circ of every infector.
        infector = data.C[:, self.free].T > 0  # (k, i): C[i, free[k]] > 0
        self._thr_ts = np.where(infector & np.isfinite(data.tau_star)[None, :], data.tau_star[None, :], np.nan)
        self._thr_tc = np.where(infector & np.isfinite(data.tau_circ)[None, :], data.tau_circ[None, :], np.nan)
        for pos, i in enumerate(self.free.tolist()):
            self._thr_ts[pos, i] = np.nan
            self._thr_tc[pos, i] = np.nan
        self._thr = np.concatenate([self._thr_ts, self._thr_tc], axis=1)

    def _atom_weight(self, pos):
        j = int(self.free[pos])
        data = self.data
        col = data.C[:, j]
        ts, tc = data.tau_star, data.tau_circ

        def weight(x):
            xf = self.full(x)
            xj = xf[j]
            b = float(np.sum(np.where((xf < xj) & (xj <= ts), col,
                                      np.where((ts < xj) & (xj <= tc), data.gamma * col, 0.0))))
            return math.inf if b == 0 else 1.0 / b
        return weight

    # -- helpers
    def full(self, x) -> np.ndarray:
        xf = self._base_x.copy()
        xf[self.free] = x
        return xf

    def _full_w(self, w) -> np.ndarray:
        wf = np.zeros(self.data.d)
        wf[self.free] = w
        return wf

    def _w(self, z) -> np.ndarray:
        w = z.v.copy()
        w[z.frozen] = 0.0
        return w

    def state(self, x, v, frozen=None) -> PhasePoint:
        return PhasePoint(x, v, None, frozen)

    def initial_state(self, x_free, rng: np.random.Generator) -> PhasePoint:
        """Start at ``x_free`` with random velocities; occult coordinates at ``T`` are stuck."""
        x = np.array(x_free, dtype=float)
        frozen = self._occult & (x >= self.data.T)
        x[frozen] = self.data.T
        v = rng.choice([-1.0, 1.0], size=self.dim)
        v[frozen] = 1.0
        return PhasePoint(x, v, None, frozen)

    def check_state(self, z):
        super().check_state(z)
        x = z.x
        if np.any(x < 0) or np.any(x[self._free_notified] > self._ts_free[self._free_notified]):
            raise ContractError("infection time outside its support")
        if np.any(x[self._occult] > self.data.T):
            raise ContractError("occult infection time beyond the horizon")
        if np.any(z.frozen & ~self._occult) or np.any(x[z.frozen] != self.data.T):
            raise ContractError("only occult coordinates may be stuck, and only at T")
        moving = x[~z.frozen]
        fixed = np.concatenate([self.data.tau_star, self.data.tau_circ, list(self.clamped.values())])
        if np.unique(moving).size != moving.size or np.isin(moving, fixed).any():
            raise ContractError("tied infection times at the start; jitter the initial state")

    # -- density
    def psi_directional(self, z, direction: float) -> float:
        """Stratum potential with ties resolved on the side ``x + direction * 0+ * w``."""
        data = self.data
        xf = self.full(z.x)
        wf = self._full_w(direction * self._w(z))
        stuck = z.frozen
        b = _b_vector(xf, data)[self.free]
        beta = _pressure_vector(xf, wf, data)[self.free]
        live = ~stuck
        if np.any(beta[live] <= 0):
            return math.inf
        x = z.x
        val = float(b.sum()) - float(np.log(beta[live]).sum())
        nb = self._free_notified
        val += float(self.delay.neg_logpdf(self._ts_free[nb] - x[nb]).sum())
        occ = self._occult & live
        val += float(self.delay.neg_logsf(data.T - x[occ]).sum())
        return val

    def psi(self, z) -> float:
        return self.psi_directional(z, 1.0)

    def gradient_line(self, z, w, idx=None):
        if idx is None:
            idx = np.arange(self.dim)
        data = self.data
        xf = self.full(z.x)
        wf = self._full_w(w)
        rows = self.free[idx]
        g = _g_matrix(xf[rows], wf[rows], rows, xf, wf, data)
        g0 = g.sum(axis=1) + self.delay.hazard
        return g0, np.zeros(g0.shape)

    def dependents(self, touched) -> np.ndarray:
        if len(touched) == 1:
            return self._nbrs[touched[0]]
        return np.unique(np.concatenate([self._nbrs[k] for k in touched]))

    # -- geometry
    def next_boundary(self, z, w) -> BoundaryCandidate:
        x = z.x
        moving = w != 0
        if not moving.any():
            return NO_BOUNDARY
        n = self.dim
        down = w < 0
        up = w > 0
        t_lo = np.where(down, x / -np.where(down, w, -1.0), np.inf)
        t_hi = np.where(up & self._free_notified, (self._ts_free - x) / np.where(up, w, 1.0), np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_thr = (self._thr - x[:, None]) / w[:, None]
            dw = w[:, None] - w[None, :]
            t_col = (x[None, :] - x[:, None]) / dw
        t_thr = np.where(np.isfinite(t_thr) & (t_thr > 0), t_thr, np.inf)
        ok = self._upper & moving[:, None] & moving[None, :] & (dw != 0) & (t_col > 0)
        t_col = np.where(ok, t_col, np.inf)
        times = np.concatenate([t_lo, t_hi, t_thr.ravel(), t_col.ravel()])
        two = np.argpartition(times, 1)[:2]
        k = int(two[0]) if times[two[0]] <= times[two[1]] else int(two[1])
        tau = float(times[k])
        if not math.isfinite(tau):
            return NO_BOUNDARY
        second = float(times[two[1] if k == two[0] else two[0]])
        if k < n:
            facet = Facet("hard", "hard", ("lo", k))
        elif k < 2 * n:
            facet = Facet("hard", "hard", ("hi", k - n))
        elif k < 2 * n + self._thr.size:
            row, col = divmod(k - 2 * n, self._thr.shape[1])
            facet = Facet("soft", "threshold", ("thr", row, float(self._thr[row, col])))
        else:
            a, b = divmod(k - 2 * n - self._thr.size, n)
            facet = Facet("soft", "collision", ("col", a, b))
        return BoundaryCandidate(tau, facet, second)

    def on_facet(self, z, facet):
        x = z.x.copy()
        kind = facet.data[0]
        if kind == "lo":
            x[facet.data[1]] = 0.0
        elif kind == "hi":
            k = facet.data[1]
            x[k] = self._ts_free[k]
        elif kind == "thr":
            x[facet.data[1]] = facet.data[2]
        else:
            _, a, b = facet.data
            x[a] = x[b]
        return PhasePoint(x, z.v, z.region, z.frozen)

    def normal(self, z, facet) -> np.ndarray:
        n = np.zeros(self.dim)
        w = self._w(z)
        if facet.data[0] == "col":
            _, a, b = facet.data
            sgn = 1.0 if w[a] - w[b] > 0 else -1.0
            n[a] = sgn / math.sqrt(2.0)
            n[b] = -sgn / math.sqrt(2.0)
        else:
            k = facet.data[1]
            n[k] = 1.0 if w[k] > 0 else -1.0
        return n

    def crossing(self, z, facet) -> Crossing:
        if facet.kind == "hard":
            return Crossing(self.psi_directional(z, -1.0), math.inf, 1.0, 1.0, None)
        near = self.psi_directional(z, -1.0)
        far = self.psi_directional(z, 1.0)
        return Crossing(near, far, 1.0, 1.0, z)

    def facet_coords(self, facet, crossed) -> tuple:
        if facet.data[0] == "col":
            return (facet.data[1], facet.data[2])
        return (facet.data[1],)


def next_structural_event(model: SirModel, z: PhasePoint) -> BoundaryCandidate:
    """Earliest collision, threshold crossing or hard wall along the current flow."""
    w = z.v.astype(float).copy()
    w[z.frozen] = 0.0
    return model.next_boundary(z, w)


def crossing_probability(model: SirModel, z: PhasePoint, facet: Facet) -> float:
    """Metropolis probability of crossing ``facet`` from the side ``z`` arrives on."""
    from .boundary import acceptance_ratio

    cr = model.crossing(z, facet)
    return acceptance_ratio(cr.psi_near, cr.psi_far, cr.s_near, cr.s_far)


# -------------------------------------------------------- data generation


@dataclass(frozen=True)
class SirParams:
    """Parameters of the synthetic epidemic and its infectivity kernel.

    ``gamma`` must be given: nothing fixes its value a priori. Removal
    delays after notification are exponential with ``removal_beta``, which
    defaults to the notification delay rate.
    """

    gamma: float
    seed: int
    d: int = 50
    T: float = 5.0
    delay_beta: float = 0.3
    removal_beta: float | None = None
    distance_scale: float = 0.4
    distance_radius: int = 5
    baseline_low: float = 0.7
    baseline_width: float = 0.9
    seed_individual: int = 24
    seed_time: float = 0.0

    @property
    def removal_rate(self) -> float:
        return self.delay_beta if self.removal_beta is None else self.removal_beta


def infectivity_matrix(params: SirParams) -> np.ndarray:
    """``C_ij = d(i, j) theta_i xi_j`` with a banded distance kernel."""
    rng = np.random.default_rng(params.seed)
    theta = params.baseline_width * rng.random(params.d) + params.baseline_low
    xi = params.baseline_width * rng.random(params.d) + params.baseline_low
    idx = np.arange(params.d)
    dist = params.distance_scale * (np.abs(idx[:, None] - idx[None, :]) <= params.distance_radius)
    c = dist * theta[:, None] * xi[None, :]
    np.fill_diagonal(c, 0.0)
    return c


def forward_simulate(params: SirParams, C: np.ndarray, rng: np.random.Generator):
    """Gillespie simulation of infection, notification and removal up to ``T``.

    Returns
    -------
    data : SirData
    x_true : ndarray
        Infection times, with ``T`` for individuals not infected by ``T``.
    """
    d, T = params.d, params.T
    x = np.full(d, np.inf)
    ts = np.full(d, np.inf)
    tc = np.full(d, np.inf)
    s0 = params.seed_individual
    x[s0] = params.seed_time
    ts[s0] = x[s0] + rng.exponential(1.0 / params.delay_beta)
    tc[s0] = ts[s0] + rng.exponential(1.0 / params.removal_rate)
    t = params.seed_time
    while True:
        infected = x <= t
        active = infected & (t < ts)
        notified = (ts <= t) & (t < tc)
        force = C.T @ active.astype(float) + params.gamma * (C.T @ notified.astype(float))
        force[infected] = 0.0
        total = float(force.sum())
        pending = np.concatenate([ts[ts > t], tc[tc > t]])
        t_sched = float(pending.min()) if pending.size else math.inf
        t_inf = t + rng.exponential(1.0 / total) if total > 0 else math.inf
        t_next = min(t_inf, t_sched)
        if t_next >= T:
            break
        t = t_next
        if t_inf < t_sched:
            j = int(rng.choice(d, p=force / total))
            x[j] = t
            ts[j] = t + rng.exponential(1.0 / params.delay_beta)
            tc[j] = ts[j] + rng.exponential(1.0 / params.removal_rate)
    obs_ts = np.where(ts < T, ts, np.inf)
    obs_tc = np.where(tc < T, tc, np.inf)
    data = SirData(T, obs_ts, obs_tc, C, params.gamma, params.delay_beta)
    return data, np.minimum(x, T)


def epidemic_counts(data: SirData, x_true: np.ndarray) -> dict:
    return {
        "infected": int(np.sum(x_true < data.T)),
        "notified": int(np.sum(np.isfinite(data.tau_star))),
        "removed": int(np.sum(np.isfinite(data.tau_circ))),
    }


def feasible_start(model: SirModel) -> np.ndarray:
    """An infection-time vector of positive density built from the observations.

    Notified individuals are placed one by one inside the infectious window
    of an already placed infector. When none can be placed, an occult
    individual is infected early to act as a go-between. Remaining occult
    individuals start on their atom.
    """
    data = model.data
    d = data.d
    x = np.full(d, np.nan)
    for i, val in model.clamped.items():
        x[i] = val
    notified = [i for i in np.argsort(data.tau_star).tolist() if np.isnan(x[i]) and data.notified[i]]
    occult = [i for i in range(d) if np.isnan(x[i]) and not data.notified[i]]

    def window(i):
        best = None
        limit = data.tau_star[i] if data.notified[i] else data.T
        for j in np.flatnonzero(~np.isnan(x)).tolist():
            if data.C[j, i] <= 0:
                continue
            lo, hi = x[j], min(limit, data.tau_circ[j])
            if hi > lo and (best is None or lo < best[0]):
                best = (lo, hi)
        return best

    while notified:
        placed = False
        for i in list(notified):
            w = window(i)
            if w is not None:
                x[i] = w[0] + _early(i) * (w[1] - w[0])
                notified.remove(i)
                placed = True
        if placed:
            continue
        for i in list(occult):
            w = window(i)
            if w is not None:
                x[i] = w[0] + _early(i) * (w[1] - w[0])
                occult.remove(i)
                placed = True
                break
        if not placed:
            raise ContractError("could not find a positive-density start for the notified individuals")
    x[np.isnan(x)] = data.T
    return x[model.free]


# --------------------------------------------------------------- oracle


def target_logdensity_oracle(x, data: SirData, clamped=()) -> float:
    """Brute-force log posterior density of the full infection-time vector.

    Written directly from the model definition with explicit loops, and with
    the integrated pressure computed by adaptive quadrature. The reference
    measure of an occult individual is Lebesgue on ``[0, T]`` plus a unit
    atom at ``T``; an individual at ``T`` contributes its survival factor
    only. Individuals in ``clamped`` contribute nothing of their own.
    """
    from scipy.integrate import quad

    x = [float(v) for v in x]
    d = data.d
    T = data.T
    beta = data.delay_beta
    clamped = set(clamped)

    def rate(i, j, s):
        if x[i] < s <= data.tau_star[i]:
            return data.C[i, j]
        if data.tau_star[i] < s <= data.tau_circ[i]:
            return data.gamma * data.C[i, j]
        return 0.0

    logp = 0.0
    for j in range(d):
        if j in clamped:
            continue
        notified = data.tau_star[j] < T
        if notified and not 0 <= x[j] <= data.tau_star[j]:
            return -math.inf
        if not notified and not 0 <= x[j] <= T:
            return -math.inf
        cuts = sorted({v for i in range(d) if i != j
                       for v in (x[i], data.tau_star[i], data.tau_circ[i]) if 0 < v < x[j]})
        integral = 0.0
        edges = [0.0] + cuts + [x[j]]
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi > lo:
                integral += quad(lambda s: sum(rate(i, j, s) for i in range(d) if i != j),
                                 lo, hi, epsabs=1e-13, epsrel=1e-13)[0]
        logp -= integral
        at_atom = (not notified) and x[j] == T
        if not at_atom:
            b = sum(rate(i, j, x[j]) for i in range(d) if i != j)
            if b <= 0:
                return -math.inf
            logp += math.log(b)
            if notified:
                logp += math.log(beta) - beta * (data.tau_star[j] - x[j])
            else:
                logp += -beta * (T - x[j])
    return logp


def small_instance() -> tuple[SirData, dict]:
    """Three individuals: a clamped seed, one notified, one never notified."""
    data = SirData(
        T=3.0,
        tau_star=np.array([1.0, 2.5, np.inf]),
        tau_circ=np.array([2.0, np.inf, np.inf]),
        C=np.array([[0.0, 0.8, 0.6], [0.5, 0.0, 0.7], [0.4, 0.9, 0.0]]),
        gamma=0.5,
        delay_beta=1.0,
    )
    return data, {0: 0.0}
