"""Ogata thinning for one agent and for the lattice-coupled process.

The lattice sampler keeps one candidate event time per agent in an indexed
binary heap. Between events every intensity only decays, so the value at the
last update is a valid thinning bound for that agent until something excites
it. When an event fires, only the firing agent and (for neighbour coupling)
its k neighbours need a fresh candidate, which keeps the work per event at
O(k log N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .lattice import Lattice
from .point_process import KernelParams

_SEED_BOUND = 2**32


@dataclass
class EventTimeline:
    """Events of one observation window, times relative to the window start."""

    times: np.ndarray
    agents: np.ndarray
    n_agents: int
    duration: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.agents = np.asarray(self.agents, dtype=np.int64)

    def __len__(self):
        return len(self.times)

    @property
    def per_agent_counts(self) -> np.ndarray:
        return np.bincount(self.agents, minlength=self.n_agents)

    def agent_times(self, i: int) -> np.ndarray:
        return self.times[self.agents == i]


# ---------------------------------------------------------------------------
# numba kernels


@numba.njit(cache=True)
def _seed(s):
    np.random.seed(s)


@numba.njit(cache=True)
def _exp_draw(rate):
    if rate <= 0.0:
        return np.inf
    # inverse CDF; 1 - U lies in (0, 1]
    return -math.log(1.0 - np.random.random()) / rate


@numba.njit(cache=True)
def _thin_single(rho, alpha, nu, decay, t_end):
    """One agent, steps 1-5 of Ogata's method with the recursive kernel sum."""
    cap = 64
    out = np.empty(cap)
    n = 0
    t = 0.0
    excite = 0.0  # sum of exp(-decay (t - t_l)) over past events, valued at t
    lam_star = rho
    jump = alpha * nu
    while True:
        dt = _exp_draw(lam_star)
        t_new = t + dt
        if t_new >= t_end:
            break
        excite *= math.exp(-decay * dt)
        lam = rho + jump * excite
        t = t_new
        if np.random.random() * lam_star < lam:
            if n == cap:
                cap *= 2
                grown = np.empty(cap)
                grown[:n] = out[:n]
                out = grown
            out[n] = t
            n += 1
            excite += 1.0
            lam_star = lam + jump
        else:
            lam_star = lam
    return out[:n]


@numba.njit(cache=True)
def _less(cand, a, b):
    ta = cand[a]
    tb = cand[b]
    return ta < tb or (ta == tb and a < b)


@numba.njit(cache=True)
def _sift_up(heap, pos, cand, p):
    item = heap[p]
    while p > 0:
        parent = (p - 1) >> 1
        other = heap[parent]
        if _less(cand, item, other):
            heap[p] = other
            pos[other] = p
            p = parent
        else:
            break
    heap[p] = item
    pos[item] = p


@numba.njit(cache=True)
def _sift_down(heap, pos, cand, p):
    n = heap.shape[0]
    item = heap[p]
    while True:
        c = 2 * p + 1
        if c >= n:
            break
        if c + 1 < n and _less(cand, heap[c + 1], heap[c]):
            c += 1
        child = heap[c]
        if _less(cand, child, item):
            heap[p] = child
            pos[child] = p
            p = c
        else:
            break
    heap[p] = item
    pos[item] = p


@numba.njit(cache=True)
def _reschedule(heap, pos, cand, i, t_new):
    old = cand[i]
    cand[i] = t_new
    if t_new < old:
        _sift_up(heap, pos, cand, pos[i])
    else:
        _sift_down(heap, pos, cand, pos[i])


@numba.njit(cache=True)
def _heapify(heap, pos, cand):
    n = heap.shape[0]
    for i in range(n):
        heap[i] = i
        pos[i] = i
    for p in range(n // 2 - 1, -1, -1):
        _sift_down(heap, pos, cand, p)


@numba.njit(cache=True)
def _init_candidates(t0, rho, bound, cand, t_ref, heap, pos):
    n = cand.shape[0]
    for i in range(n):
        t_ref[i] = t0
        bound[i] = rho
        cand[i] = t0 + _exp_draw(rho)
    _heapify(heap, pos, cand)


@numba.njit(cache=True)
def _advance(t_end, record, rho, a_n, a_x, nu, decay, nbrs,
             endo, exo, t_ref, bound, cand, heap, pos, ev_t, ev_a):
    """Run the lattice process up to ``t_end``; returns (times, agents, n)."""
    k = nbrs.shape[1]
    jump_n = a_n * nu
    jump_x = a_x * nu
    coupled = a_x > 0.0
    n_ev = 0
    cap = ev_t.shape[0]
    while True:
        i = heap[0]
        t = cand[i]
        if t >= t_end:
            break
        f = math.exp(-decay * (t - t_ref[i]))
        endo[i] *= f
        exo[i] *= f
        t_ref[i] = t
        lam = rho + jump_n * endo[i] + jump_x * exo[i]
        if np.random.random() * bound[i] < lam:
            if record:
                if n_ev == cap:
                    cap *= 2
                    gt = np.empty(cap)
                    ga = np.empty(cap, dtype=np.int64)
                    gt[:n_ev] = ev_t[:n_ev]
                    ga[:n_ev] = ev_a[:n_ev]
                    ev_t = gt
                    ev_a = ga
                ev_t[n_ev] = t
                ev_a[n_ev] = i
                n_ev += 1
            endo[i] += 1.0
            bound[i] = lam + jump_n
            _reschedule(heap, pos, cand, i, t + _exp_draw(bound[i]))
            if coupled:
                for c in range(k):
                    j = nbrs[i, c]
                    g = math.exp(-decay * (t - t_ref[j]))
                    endo[j] *= g
                    exo[j] = exo[j] * g + 1.0
                    t_ref[j] = t
                    bound[j] = rho + jump_n * endo[j] + jump_x * exo[j]
                    _reschedule(heap, pos, cand, j, t + _exp_draw(bound[j]))
        else:
            bound[i] = lam
            _reschedule(heap, pos, cand, i, t + _exp_draw(lam))
    return ev_t, ev_a, n_ev


# ---------------------------------------------------------------------------
# public API


def _window_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(_SEED_BOUND))


def sample_single(params: KernelParams, t_G: float, rng: np.random.Generator) -> EventTimeline:
    """Events of one self-exciting agent on [0, t_G), empty history at 0.

    Only ``alpha_n`` excites; ``alpha_x`` has no meaning for a lone agent.
    """
    if not t_G > 0:
        raise ValueError(f"t_G must be > 0, got {t_G}")
    params.check_stationary(0)
    _seed(_window_seed(rng))
    times = _thin_single(params.rho, params.alpha_n, params.nu, params.decay, float(t_G))
    return EventTimeline(times, np.zeros(len(times), dtype=np.int64), 1, float(t_G))


def default_burn_in(params: KernelParams, k: int, n_relax: float = 10.0) -> float:
    """Time for the mean intensity to relax to within exp(-n_relax) of stationarity."""
    if params.alpha_n == 0 and params.alpha_x == 0:
        return 0.0
    gamma = (params.alpha_n + k * params.alpha_x) / params.beta
    return n_relax / (params.decay * (1.0 - gamma))


class LatticeSampler:
    """Stateful multivariate sampler over a lattice.

    Each call to :meth:`next_window` returns the events of the next window of
    length ``t_G``. With ``carry_history`` the excitation state and pending
    candidates survive across windows, so consecutive windows are slices of
    one continuous process; otherwise every window restarts from an empty
    history with intensity rho.
    """

    def __init__(
        self,
        params: KernelParams,
        lattice: Lattice,
        rng: np.random.Generator,
        carry_history: bool = True,
        burn_in: Optional[float] = None,
    ):
        params.check_stationary(lattice.k)
        self.params = params
        self.lattice = lattice
        self.rng = rng
        self.carry_history = carry_history
        self._nbrs = np.ascontiguousarray(lattice.neighbors, dtype=np.int64)
        n = lattice.N
        self.endo = np.zeros(n)
        self.exo = np.zeros(n)
        self.t_ref = np.zeros(n)
        self.bound = np.zeros(n)
        self.cand = np.zeros(n)
        self._heap = np.zeros(n, dtype=np.int64)
        self._pos = np.zeros(n, dtype=np.int64)
        self._buf_t = np.empty(max(64, 2 * n))
        self._buf_a = np.empty(max(64, 2 * n), dtype=np.int64)
        self.clock = 0.0
        if burn_in is None:
            burn_in = default_burn_in(params, lattice.k) if carry_history else 0.0
        self.burn_in = burn_in
        self._started = False

    def _restart(self):
        self.endo[:] = 0.0
        self.exo[:] = 0.0
        self.clock = 0.0
        _init_candidates(0.0, self.params.rho, self.bound, self.cand, self.t_ref, self._heap, self._pos)

    def _run(self, t_end: float, record: bool):
        p = self.params
        ev_t, ev_a, n = _advance(
            t_end, record, p.rho, p.alpha_n, p.alpha_x, p.nu, p.decay, self._nbrs,
            self.endo, self.exo, self.t_ref, self.bound, self.cand, self._heap, self._pos,
            self._buf_t, self._buf_a,
        )
        self._buf_t, self._buf_a = ev_t, ev_a
        return ev_t[:n].copy(), ev_a[:n].copy()

    def next_window(self, t_G: float) -> EventTimeline:
        if not t_G > 0:
            raise ValueError(f"t_G must be > 0, got {t_G}")
        _seed(_window_seed(self.rng))
        if not self._started or not self.carry_history:
            self._restart()
            if self.burn_in > 0:
                self._run(self.burn_in, False)
                self.clock = self.burn_in
            self._started = True
        start = self.clock
        times, agents = self._run(start + t_G, True)
        self.clock = start + t_G
        return EventTimeline(times - start, agents, self.lattice.N, float(t_G))

    def intensity(self, i: int, t: Optional[float] = None) -> float:
        """Current intensity of agent ``i`` at absolute time ``t`` (default: clock)."""
        if t is None:
            t = self.clock
        if t < self.t_ref[i]:
            raise ValueError("cannot evaluate the intensity before the agent's last update")
        p = self.params
        f = math.exp(-p.decay * (t - self.t_ref[i]))
        return p.rho + p.nu * (p.alpha_n * self.endo[i] + p.alpha_x * self.exo[i]) * f


def sample_lattice(
    params: KernelParams,
    lattice: Lattice,
    t_G: float,
    rng: np.random.Generator,
    burn_in: float = 0.0,
) -> EventTimeline:
    """Joint events of all agents on [0, t_G) after an optional burn-in.

    With ``burn_in=0`` every agent starts from an empty history.
    """
    sampler = LatticeSampler(params, lattice, rng, carry_history=True, burn_in=burn_in)
    return sampler.next_window(t_G)
