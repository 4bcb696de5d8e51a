"""Donation game on a periodic lattice with imitate-the-best updating.

Agents are stored as parallel arrays (:class:`Population`) rather than one
object per agent; index ``i`` addresses agent ``i`` of the :class:`Lattice`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lattice import Lattice
from .metrics import GenerationStats, generation_stats
from .point_process import CaseKind, KernelParams
from .sampler import EventTimeline, LatticeSampler

__all__ = [
    "Lattice",
    "Population",
    "GameParams",
    "Engine",
    "init_population",
    "apply_donation",
    "donation_payoffs",
    "run_donation_stage_standard",
    "run_donation_stage_hp",
    "run_update_stage",
]

# relative tolerance when deciding that two payoffs tie
PAYOFF_TIE_RTOL = 1e-9


@dataclass
class Population:
    cooperate: np.ndarray  # bool, True for C
    payoff: np.ndarray  # float64, accumulated this generation
    actions: np.ndarray  # int64, d_i for this generation

    @property
    def N(self) -> int:
        return len(self.cooperate)

    def reset_generation(self):
        self.payoff[:] = 0.0
        self.actions[:] = 0

    def copy(self) -> "Population":
        return Population(self.cooperate.copy(), self.payoff.copy(), self.actions.copy())


@dataclass(frozen=True)
class GameParams:
    b: float
    mu: float = 0.01
    t_G: float = 1.0
    G_end: int = 1000
    G_ave: int = 200
    case: CaseKind = CaseKind.STANDARD
    # False: d_i counts only the actions of cooperators
    count_defector_actions: bool = True

    def __post_init__(self):
        object.__setattr__(self, "case", CaseKind.parse(self.case))
        if not self.b > 1:
            raise ValueError(f"b must be > 1, got {self.b}")
        if not 0 <= self.mu <= 1:
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")
        if not self.t_G > 0:
            raise ValueError(f"t_G must be > 0, got {self.t_G}")
        if not 0 < self.G_ave <= self.G_end:
            raise ValueError(f"need 0 < G_ave <= G_end, got G_ave={self.G_ave}, G_end={self.G_end}")


def init_population(lattice: Lattice, rng: np.random.Generator) -> Population:
    n = lattice.N
    return Population(
        cooperate=rng.random(n) < 0.5,
        payoff=np.zeros(n),
        actions=np.zeros(n, dtype=np.int64),
    )


def apply_donation(pop: Population, lattice: Lattice, actor: int, b: float) -> None:
    """One action by ``actor``: a cooperator gives b to each neighbour and pays k(b-1)."""
    pop.actions[actor] += 1
    if pop.cooperate[actor]:
        pop.payoff[lattice.neighbors[actor]] += b
        pop.payoff[actor] -= lattice.k * (b - 1.0)


def donation_payoffs(cooperate: np.ndarray, actions: np.ndarray, lattice: Lattice, b: float) -> np.ndarray:
    """Payoffs of a whole donation stage given each agent's action count.

    Equivalent to calling :func:`apply_donation` once per action, in any order.
    """
    given = np.where(cooperate, actions, 0)
    received = given[lattice.neighbors].sum(axis=1)
    return b * received - lattice.k * (b - 1.0) * given


def run_donation_stage_standard(pop: Population, lattice: Lattice, b: float) -> Population:
    pop.actions[:] = 1
    pop.payoff += donation_payoffs(pop.cooperate, pop.actions, lattice, b)
    return pop


def run_donation_stage_hp(
    pop: Population,
    lattice: Lattice,
    b: float,
    sampler: LatticeSampler,
    t_G: float,
    count_defector_actions: bool = True,
) -> tuple[Population, EventTimeline]:
    timeline = sampler.next_window(t_G)
    counts = timeline.per_agent_counts
    pop.payoff += donation_payoffs(pop.cooperate, counts, lattice, b)
    pop.actions[:] = counts if count_defector_actions else np.where(pop.cooperate, counts, 0)
    return pop, timeline


def imitation_targets(payoff: np.ndarray, lattice: Lattice, tie_keys: np.ndarray) -> np.ndarray:
    """Index of the best-paid agent among each agent and its neighbours.

    ``tie_keys`` has shape (N, k+1), one uniform key per candidate slot
    (self first, then neighbours in table order); the largest key among the
    tied candidates wins.
    """
    cands = np.column_stack([np.arange(lattice.N), lattice.neighbors])
    p = payoff[cands]
    best = p.max(axis=1, keepdims=True)
    tol = PAYOFF_TIE_RTOL * np.maximum(1.0, np.abs(best))
    keys = np.where(p >= best - tol, tie_keys, -1.0)
    choice = keys.argmax(axis=1)
    return cands[np.arange(lattice.N), choice]


def run_update_stage(pop: Population, lattice: Lattice, mu: float, rng: np.random.Generator) -> Population:
    """Synchronous imitation of the best neighbour, then mutation.

    All draws are made as per-agent arrays so the outcome does not depend on
    any iteration order.
    """
    n = lattice.N
    tie_keys = rng.random((n, lattice.k + 1))
    mutate = rng.random(n) < mu
    random_strategy = rng.random(n) < 0.5
    targets = imitation_targets(pop.payoff, lattice, tie_keys)
    # read from the pre-update array, write a fresh one
    new = pop.cooperate[targets]
    pop.cooperate = np.where(mutate, random_strategy, new)
    return pop


class Engine:
    """One trial: lattice, population, timing process and RNG."""

    def __init__(
        self,
        lattice: Lattice,
        game: GameParams,
        kernel: Optional[KernelParams],
        rng: np.random.Generator,
        carry_history: bool = True,
        burn_in: Optional[float] = None,
        sigma_raw: bool = False,
    ):
        if game.case.uses_hawkes and kernel is None:
            raise ValueError(f"case {game.case.value} needs kernel parameters")
        self.lattice = lattice
        self.game = game
        self.kernel = kernel
        self.rng = rng
        self.sigma_raw = sigma_raw
        self.pop = init_population(lattice, rng)
        self.sampler = None
        if game.case.uses_hawkes:
            self.sampler = LatticeSampler(kernel, lattice, rng, carry_history=carry_history, burn_in=burn_in)
        self.generation = 0
        self.last_timeline: Optional[EventTimeline] = None

    def step(self, full_stats: bool = True) -> GenerationStats:
        """One generation: donation stage, snapshot, update stage."""
        pop, g = self.pop, self.game
        pop.reset_generation()
        if self.sampler is None:
            run_donation_stage_standard(pop, self.lattice, g.b)
            self.last_timeline = None
        else:
            _, self.last_timeline = run_donation_stage_hp(
                pop, self.lattice, g.b, self.sampler, g.t_G, g.count_defector_actions
            )
        stats = generation_stats(pop.cooperate, pop.actions, self.lattice, full=full_stats, sigma_raw=self.sigma_raw)
        run_update_stage(pop, self.lattice, g.mu, self.rng)
        self.generation += 1
        return stats

    def run(self, full_stats_from: int = 0) -> list[GenerationStats]:
        return [self.step(full_stats=gen >= full_stats_from) for gen in range(self.game.G_end)]
