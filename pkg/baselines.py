#!/usr/bin/env python3
"""
Classical baselines: uniform search without repetition (BFS) and simulated
annealing. Both report the same RunTrace as F-VQE, one cost evaluation per
sample.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Set

import numpy as np

from core import SeededRng
from problem_encodings import AtspInstance, Problem, lehmer_encode
from traces import BestTracker, RunTrace

logger = logging.getLogger(__name__)

T_INIT = 5.0
FINAL_TEMPERATURES = (1.0, 0.1, 0.01, 0.001)
EVAL_CHUNK = 1 << 16


@dataclass(frozen=True)
class SaConfig:
    t_final: float
    budget: int
    t_init: float = T_INIT

    def __post_init__(self):
        if self.t_init <= 0 or self.t_final <= 0:
            raise ValueError(f"Temperatures must be positive, got {self.t_init}, {self.t_final}")
        if self.budget < 1:
            raise ValueError(f"Budget must be at least 1, got {self.budget}")

    def temperature(self, i: int) -> float:
        """Geometric schedule: t_init at i=0, t_final at i=budget-1."""
        if self.budget == 1:
            return self.t_init
        return self.t_init * (self.t_final / self.t_init) ** (i / (self.budget - 1))


def acceptance_probability(delta: float, temperature: float) -> float:
    if delta <= 0:
        return 1.0
    return math.exp(-delta / temperature)


def metropolis_accept(delta: float, temperature: float, rng: SeededRng) -> bool:
    if delta <= 0:
        return True
    return rng.generator.random() < math.exp(-delta / temperature)


class BfsState:
    """
    Uniform draws without repetition. Rejection sampling while less than
    half the space is visited, then a shuffled list of what is left.
    """

    def __init__(self, n_bits: int, rng: SeededRng):
        self.size = 1 << n_bits
        self.rng = rng
        self.visited: Set[int] = set()
        self.remaining: Optional[np.ndarray] = None
        self.position = 0

    @property
    def exhausted(self) -> bool:
        return len(self.visited) >= self.size

    def _switch_to_remaining(self) -> None:
        unseen = np.ones(self.size, dtype=bool)
        unseen[np.fromiter(self.visited, dtype=np.int64, count=len(self.visited))] = False
        self.remaining = np.flatnonzero(unseen)
        self.rng.generator.shuffle(self.remaining)
        self.position = 0

    def draw(self, count: int) -> np.ndarray:
        out: List[int] = []
        while len(out) < count and not self.exhausted:
            if self.remaining is None and 2 * len(self.visited) >= self.size:
                self._switch_to_remaining()
            if self.remaining is not None:
                take = self.remaining[self.position:self.position + count - len(out)]
                self.position += len(take)
                self.visited.update(int(x) for x in take)
                out.extend(int(x) for x in take)
                continue
            for candidate in self.rng.generator.integers(0, self.size, size=count - len(out)):
                candidate = int(candidate)
                if candidate in self.visited:
                    continue
                self.visited.add(candidate)
                out.append(candidate)
                if 2 * len(self.visited) >= self.size:
                    break
        return np.array(out, dtype=np.int64)


def bfs_run(problem: Problem, budget: int, seed: int) -> RunTrace:
    n = problem.n_bits
    if budget > (1 << n):
        logger.warning(f"BFS budget {budget} exceeds 2**{n}; truncating at exhaustion")
        budget = 1 << n
    logger.info(f"Starting bfs on {problem.instance_id}: N={n} budget={budget} seed={seed}")

    state = BfsState(n, SeededRng(seed))
    tracker = BestTracker(n, problem.c_min, problem.c_max)
    consumed = 0
    while consumed < budget:
        batch = state.draw(min(EVAL_CHUNK, budget - consumed))
        tracker.observe(batch, problem.cost_model.raw(batch), consumed)
        consumed += len(batch)

    trace = RunTrace('bfs', problem.instance_id, seed, n, samples_consumed=consumed,
                     config={'problem': problem.kind, 'budget': budget})
    return tracker.fill(trace)


def _maxcut_chain(problem: Problem, config: SaConfig, rng: SeededRng):
    n = problem.n_bits
    model = problem.cost_model
    x = int(rng.generator.integers(0, 1 << n))
    cost = float(model.raw(np.array([x]))[0])
    indices, costs, accepted = [x], [cost], 0
    for i in range(1, config.budget):
        proposal = x ^ (1 << int(rng.generator.integers(0, n)))
        new_cost = float(model.raw(np.array([proposal]))[0])
        delta = float(model.rescale(new_cost) - model.rescale(cost))
        indices.append(proposal)
        costs.append(new_cost)
        if metropolis_accept(delta, config.temperature(i), rng):
            x, cost = proposal, new_cost
            accepted += 1
    return indices, costs, accepted


def _atsp_chain(problem: Problem, config: SaConfig, rng: SeededRng):
    """Chain over routes; adjacent swaps among the n-1 free cities."""
    instance: AtspInstance = problem.instance
    model = problem.cost_model
    items = list(range(instance.n - 1))
    route = [int(c) for c in rng.generator.permutation(instance.n - 1)]
    x = lehmer_encode(route, items)
    cost = float(model.raw(np.array([x]))[0])
    indices, costs, accepted = [x], [cost], 0
    for i in range(1, config.budget):
        j = int(rng.generator.integers(0, instance.n - 2))
        proposal_route = list(route)
        proposal_route[j], proposal_route[j + 1] = proposal_route[j + 1], proposal_route[j]
        proposal = lehmer_encode(proposal_route, items)
        new_cost = float(model.raw(np.array([proposal]))[0])
        delta = float(model.rescale(new_cost) - model.rescale(cost))
        indices.append(proposal)
        costs.append(new_cost)
        if metropolis_accept(delta, config.temperature(i), rng):
            route, x, cost = proposal_route, proposal, new_cost
            accepted += 1
    return indices, costs, accepted


def sa_run(problem: Problem, config: SaConfig, seed: int) -> RunTrace:
    """Metropolis chain on the rescaled cost; the initial candidate counts as one evaluation."""
    rng = SeededRng(seed)
    logger.info(
        f"Starting sa on {problem.instance_id}: N={problem.n_bits} budget={config.budget} "
        f"t_final={config.t_final} seed={seed}"
    )
    chain = _atsp_chain if problem.kind == 'atsp' else _maxcut_chain
    indices, costs, accepted = chain(problem, config, rng)

    tracker = BestTracker(problem.n_bits, problem.c_min, problem.c_max)
    tracker.observe(np.array(indices, dtype=np.int64), np.array(costs), 0)
    proposals = config.budget - 1
    trace = RunTrace(
        'sa', problem.instance_id, seed, problem.n_bits,
        samples_consumed=config.budget,
        config={'problem': problem.kind, 'budget': config.budget,
                't_init': config.t_init, 't_final': config.t_final},
        extra={'acceptance_rate': accepted / proposals if proposals else 0.0},
    )
    return tracker.fill(trace)


def select_final_temperature(problems: Sequence[Problem], budget: int,
                             candidates: Sequence[float] = FINAL_TEMPERATURES,
                             seeds: Sequence[int] = (0,),
                             runner: Callable[[Problem, SaConfig, int], RunTrace] = sa_run) -> float:
    """Final temperature solving the most runs optimally; ties go to the larger one."""
    if not problems:
        raise ValueError("Need at least one problem to select a temperature")
    best_t, best_count = None, -1
    for t_final in sorted(candidates, reverse=True):
        config = SaConfig(t_final, budget)
        solved = sum(
            1 for problem in problems for seed in seeds
            if runner(problem, config, seed).best_ratio >= 1.0
        )
        logger.info(f"SA t_final={t_final}: {solved} optimal runs")
        if solved > best_count:
            best_t, best_count = t_final, solved
    return best_t
