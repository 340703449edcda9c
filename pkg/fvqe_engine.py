#!/usr/bin/env python3
"""
F-VQE training loop.

Each step draws shots from the current state, then estimates every partial
derivative from the +pi/2 shifted circuit only, using
P_{-k}(x) = P_{+k}(x XOR q_k), and takes a normalized gradient step. Every
sampled string, shifted circuits included, feeds best-so-far tracking; the
mirrored x XOR q_k strings are only used in the estimate.
VQE is the same loop with tau = -1 (the filter becomes the cost itself).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from classical_ansatz import (
    DEFAULT_EXACT_CAP,
    ClassicalAnsatz,
    exact_classical_distribution,
    sample_classical_indices,
)
from core import CostModel, FilterDomainError, SeededRng, SimulatorCapError
from iqp_ansatz import (
    DEFAULT_SIMULATOR_CAP,
    IqpCircuit,
    apply_generators,
    build_circuit,
    chain_pattern,
    initial_parameters,
    minimal_layers,
    sample_indices,
    shifted_state,
)
from problem_encodings import Problem
from traces import BestTracker, RunTrace, StepRecord

logger = logging.getLogger(__name__)

SHIFT = np.pi / 2
DEFAULT_STEPS = 200
DEFAULT_PRESET = 'hp2'
SUCCESS_THRESHOLDS = (0.9, 0.95, 1.0)


@dataclass(frozen=True)
class FilterSpec:
    tau: float

    @property
    def is_vqe(self) -> bool:
        return self.tau == -1


def filter_function(c: Union[float, np.ndarray], tau: float):
    """Inverse filter c**(-tau) on rescaled costs in (0, 1]."""
    values = np.asarray(c, dtype=np.float64)
    if np.any(values <= 0.0):
        raise FilterDomainError(f"Filter needs rescaled costs > 0, got minimum {values.min()}")
    result = values ** (-tau)
    return float(result) if np.ndim(c) == 0 else result


def _shots(value: float) -> int:
    return max(1, math.ceil(round(value, 9)))


@dataclass(frozen=True)
class Hyperparameters:
    shots: int
    learning_rate: float
    tau: float
    steps: int = DEFAULT_STEPS
    name: str = 'custom'

    def __post_init__(self):
        if self.shots < 1 or self.steps < 1:
            raise ValueError(f"shots and steps must be positive, got {self.shots}, {self.steps}")

    @classmethod
    def preset(cls, name: str, n_qubits: int, steps: int = DEFAULT_STEPS) -> 'Hyperparameters':
        """Size-dependent presets hp1..hp4 and the VQE setting."""
        n = n_qubits
        name = name.lower()
        if name == 'hp1':
            return cls(_shots(25 * n - 100), 0.45 - 0.01 * n, 1 + 0.1 * n, steps, name)
        if name == 'hp2':
            return cls(_shots(25 * n - 100), 0.25, 2.5, steps, name)
        if name == 'hp3':
            return cls(_shots(2.5 * n - 10), (0.45 - 0.01 * n) / 1.5, (1 + 0.1 * n) / 5, steps, name)
        if name == 'hp4':
            return cls(_shots(2.5 * n - 10), 0.125, 0.25, steps, name)
        if name == 'vqe':
            return cls(_shots(25 * n - 100), 0.35, -1.0, steps, name)
        raise ValueError(f"Unknown preset {name!r}; expected hp1, hp2, hp3, hp4 or vqe")

    @property
    def filter(self) -> FilterSpec:
        return FilterSpec(self.tau)


def exact_filtered_distribution(probs: np.ndarray, costs: np.ndarray, tau: float) -> np.ndarray:
    """P^f(x) = f(C(x))**2 P(x) / E_P(f**2)."""
    weighted = filter_function(costs, tau) ** 2 * np.asarray(probs, dtype=np.float64)
    return weighted / weighted.sum()


def infidelity(p: np.ndarray, q: np.ndarray) -> float:
    overlap = np.sum(np.sqrt(np.clip(p, 0.0, None) * np.clip(q, 0.0, None)))
    return float(1.0 - overlap ** 2)


# Ansatz models: a uniform sampling/distribution surface over both ansatz kinds

class IqpModel:
    kind = 'iqp'

    def __init__(self, circuit: IqpCircuit, cap: int = DEFAULT_SIMULATOR_CAP):
        if circuit.n_qubits > cap:
            raise SimulatorCapError(f"{circuit.n_qubits} qubits exceeds the simulator cap of {cap}")
        self.circuit = circuit
        self.cap = cap
        self.masks = [g.mask for g in circuit.generators]

    @property
    def n_params(self) -> int:
        return self.circuit.n_params

    def distribution(self, thetas: np.ndarray) -> np.ndarray:
        return apply_generators(self.circuit, thetas, self.cap).probabilities()

    def shifted_distribution(self, thetas: np.ndarray, k: int, shift: float) -> np.ndarray:
        base = apply_generators(self.circuit, thetas, self.cap)
        return shifted_state(base, self.masks[k], shift).probabilities()

    def shifted_distributions(self, thetas: np.ndarray, shift: float) -> List[np.ndarray]:
        base = apply_generators(self.circuit, thetas, self.cap)
        return [shifted_state(base, mask, shift).probabilities() for mask in self.masks]

    def sample(self, thetas: np.ndarray, shots: int, rng: SeededRng) -> np.ndarray:
        return sample_indices(self.distribution(thetas), shots, rng)

    def sample_shifted(self, thetas: np.ndarray, shots: int, rng: SeededRng) -> List[np.ndarray]:
        """Shots from each +pi/2 shifted circuit, k = 0..M-1."""
        base = apply_generators(self.circuit, thetas, self.cap)
        return [
            sample_indices(shifted_state(base, mask, SHIFT).probabilities(), shots, rng)
            for mask in self.masks
        ]


class ClassicalModel:
    kind = 'classical'

    def __init__(self, circuit: IqpCircuit, exact_cap: int = DEFAULT_EXACT_CAP):
        self.ansatz = ClassicalAnsatz.from_circuit(circuit)
        self.exact_cap = exact_cap
        self.masks = list(self.ansatz.masks)

    @property
    def n_params(self) -> int:
        return self.ansatz.n_params

    def _shifted_thetas(self, thetas: np.ndarray, k: int, shift: float) -> np.ndarray:
        moved = np.array(thetas, dtype=np.float64)
        moved[k] += shift
        return moved

    def distribution(self, thetas: np.ndarray) -> np.ndarray:
        return exact_classical_distribution(self.ansatz.with_thetas(thetas), self.exact_cap)

    def shifted_distribution(self, thetas: np.ndarray, k: int, shift: float) -> np.ndarray:
        return self.distribution(self._shifted_thetas(thetas, k, shift))

    def shifted_distributions(self, thetas: np.ndarray, shift: float) -> List[np.ndarray]:
        return [self.shifted_distribution(thetas, k, shift) for k in range(self.n_params)]

    def sample(self, thetas: np.ndarray, shots: int, rng: SeededRng) -> np.ndarray:
        return sample_classical_indices(self.ansatz.with_thetas(thetas), shots, rng)

    def sample_shifted(self, thetas: np.ndarray, shots: int, rng: SeededRng) -> List[np.ndarray]:
        return [
            self.sample(self._shifted_thetas(thetas, k, SHIFT), shots, rng)
            for k in range(self.n_params)
        ]


AnsatzModel = Union[IqpModel, ClassicalModel]


def make_model(circuit: IqpCircuit, ansatz: str, simulator_cap: int = DEFAULT_SIMULATOR_CAP,
               exact_cap: int = DEFAULT_EXACT_CAP) -> AnsatzModel:
    if ansatz == 'iqp':
        return IqpModel(circuit, simulator_cap)
    if ansatz == 'classical':
        return ClassicalModel(circuit, exact_cap)
    raise ValueError(f"Unknown ansatz {ansatz!r}; expected 'iqp' or 'classical'")


def loss(model: AnsatzModel, thetas: np.ndarray, previous_probs: np.ndarray,
         rescaled_costs: np.ndarray, tau: float) -> float:
    """Infidelity between P_theta and the exactly filtered previous distribution."""
    target = exact_filtered_distribution(previous_probs, rescaled_costs, tau)
    return infidelity(model.distribution(thetas), target)


def single_circuit_estimates(shifted_samples: np.ndarray, mask: int,
                             cost_model: CostModel, tau: float) -> np.ndarray:
    """Per-shot f(C(x XOR q_k)) - f(C(x)) for samples of the +shift circuit."""
    forward = filter_function(cost_model.rescaled(shifted_samples), tau)
    mirrored = filter_function(cost_model.rescaled(shifted_samples ^ mask), tau)
    return mirrored - forward


def estimate_gradient_single_circuit(model: AnsatzModel, thetas: np.ndarray, k: int, shots: int,
                                     cost_model: CostModel, tau: float, rng: SeededRng) -> float:
    if not 0 <= k < model.n_params:
        raise ValueError(f"Parameter index {k} outside 0..{model.n_params - 1}")
    moved = np.array(thetas, dtype=np.float64)
    moved[k] += SHIFT
    samples = model.sample(moved, shots, rng)
    return float(single_circuit_estimates(samples, model.masks[k], cost_model, tau).mean())


def estimate_gradient(model: AnsatzModel, thetas: np.ndarray, shots: int,
                      cost_model: CostModel, tau: float, rng: SeededRng) -> np.ndarray:
    """All M single-circuit estimates for one step, fresh shots per parameter."""
    return gradient_from_batches(model.sample_shifted(thetas, shots, rng), model.masks, cost_model, tau)


def gradient_from_batches(batches: Sequence[np.ndarray], masks: np.ndarray,
                          cost_model: CostModel, tau: float) -> np.ndarray:
    return np.array([
        single_circuit_estimates(samples, mask, cost_model, tau).mean()
        for samples, mask in zip(batches, masks)
    ])


def exact_gradient(model: AnsatzModel, thetas: np.ndarray, k: int,
                   rescaled_costs: np.ndarray, tau: float) -> float:
    """E_{-k}(f) - E_{+k}(f) from exact shifted distributions."""
    f = filter_function(rescaled_costs, tau)
    minus = model.shifted_distribution(thetas, k, -SHIFT)
    plus = model.shifted_distribution(thetas, k, SHIFT)
    return float(np.dot(minus - plus, f))


def loss_prefactor(probs: np.ndarray, rescaled_costs: np.ndarray, tau: float) -> float:
    """1/2 E(f) / E(f**2): turns exact_gradient into the loss derivative."""
    f = filter_function(rescaled_costs, tau)
    return 0.5 * float(np.dot(probs, f)) / float(np.dot(probs, f ** 2))


def loss_derivatives(model: AnsatzModel, thetas: np.ndarray,
                     rescaled_costs: np.ndarray, tau: float) -> np.ndarray:
    """Exact dL/dtheta_k for every k at the current parameters."""
    probs = model.distribution(thetas)
    prefactor = loss_prefactor(probs, rescaled_costs, tau)
    f = filter_function(rescaled_costs, tau)
    minus = model.shifted_distributions(thetas, -SHIFT)
    plus = model.shifted_distributions(thetas, SHIFT)
    return np.array([prefactor * float(np.dot(m - p, f)) for m, p in zip(minus, plus)])


def update(thetas: np.ndarray, gradient: np.ndarray, learning_rate: float) -> np.ndarray:
    norm = float(np.linalg.norm(gradient))
    if norm == 0.0:
        logger.warning("Zero gradient estimate; skipping update")
        return np.array(thetas, dtype=np.float64)
    return np.asarray(thetas, dtype=np.float64) - learning_rate * np.asarray(gradient) / norm


@dataclass
class TrainerState:
    thetas: np.ndarray
    ansatz: str
    rng: SeededRng
    tracker: BestTracker
    step: int = 0
    samples_consumed: int = 0
    stalls: int = 0
    records: List[StepRecord] = field(default_factory=list)


def default_circuit(n_qubits: int, layers: Optional[int] = None) -> IqpCircuit:
    pattern = chain_pattern(n_qubits)
    return build_circuit(pattern, layers or minimal_layers(n_qubits, pattern))


def success_probabilities(probs: np.ndarray, ratios: np.ndarray,
                          thresholds: Sequence[float] = SUCCESS_THRESHOLDS) -> Dict[str, float]:
    return {f"{a:g}": float(probs[ratios >= a].sum()) for a in thresholds}


def run_fvqe(problem: Problem, ansatz: str = 'iqp', hyperparameters: Optional[Hyperparameters] = None,
             seed: int = 0, layers: Optional[int] = None, circuit: Optional[IqpCircuit] = None,
             max_samples: Optional[int] = None, record_exact: bool = False,
             simulator_cap: int = DEFAULT_SIMULATOR_CAP, exact_cap: int = DEFAULT_EXACT_CAP,
             algorithm: Optional[str] = None) -> RunTrace:
    n = problem.n_bits
    hp = hyperparameters or Hyperparameters.preset(DEFAULT_PRESET, n)
    circuit = circuit or default_circuit(n, layers)
    if circuit.n_qubits != n:
        raise ValueError(f"Circuit has {circuit.n_qubits} qubits, problem needs {n}")
    model = make_model(circuit, ansatz, simulator_cap, exact_cap)
    cost_model = problem.cost_model
    algorithm = algorithm or ('vqe' if hp.filter.is_vqe else 'fvqe') + f"-{ansatz}"

    state = TrainerState(
        thetas=initial_parameters(circuit),
        ansatz=ansatz,
        rng=SeededRng(seed),
        tracker=BestTracker(n, problem.c_min, problem.c_max),
    )

    exact_tables = None
    if record_exact:
        if n > exact_cap:
            raise SimulatorCapError(f"Exact recording over {n} qubits exceeds cap {exact_cap}")
        exact_tables = (cost_model.rescaled_table, problem.ratio_of_costs(cost_model.raw_table))

    per_step = (model.n_params + 1) * hp.shots
    logger.info(
        f"Starting {algorithm} on {problem.instance_id}: N={n} M={model.n_params} "
        f"preset={hp.name} shots={hp.shots} steps={hp.steps} seed={seed}"
    )

    for _ in range(hp.steps):
        if max_samples is not None and state.samples_consumed + per_step > max_samples:
            logger.info(f"Sample budget {max_samples} reached after {state.step} steps")
            break
        state.step += 1

        current = model.sample(state.thetas, hp.shots, state.rng)
        state.tracker.observe(current, cost_model.raw(current), state.samples_consumed)
        state.samples_consumed += hp.shots

        record = StepRecord(state.step, 0, hp.shots, 0.0)
        if exact_tables is not None:
            rescaled, ratios = exact_tables
            record.success_probabilities = success_probabilities(model.distribution(state.thetas), ratios)
            record.exact_gradients = np.abs(loss_derivatives(model, state.thetas, rescaled, hp.tau)).tolist()

        batches = model.sample_shifted(state.thetas, hp.shots, state.rng)
        for batch in batches:
            state.tracker.observe(batch, cost_model.raw(batch), state.samples_consumed)
            state.samples_consumed += hp.shots
        gradient = gradient_from_batches(batches, model.masks, cost_model, hp.tau)
        if hp.filter.is_vqe:
            # f = c here, so descending the expected cost needs the opposite sign
            gradient = -gradient
        record.samples_consumed = state.samples_consumed
        record.gradient_norm = float(np.linalg.norm(gradient))
        if record.gradient_norm == 0.0:
            record.stalled = True
            state.stalls += 1
        state.thetas = update(state.thetas, gradient, hp.learning_rate)
        state.records.append(record)

    trace = RunTrace(
        algorithm=algorithm,
        instance_id=problem.instance_id,
        seed=seed,
        n_bits=n,
        samples_consumed=state.samples_consumed,
        steps=state.records,
        config={
            'problem': problem.kind,
            'ansatz': ansatz,
            'preset': hp.name,
            'shots': hp.shots,
            'tau': hp.tau,
            'learning_rate': hp.learning_rate,
            'steps': hp.steps,
            'layers': circuit.layers,
            'n_params': model.n_params,
            'max_samples': max_samples,
        },
        extra={'stalls': state.stalls},
    )
    state.tracker.fill(trace)
    logger.info(
        f"Finished {algorithm} on {problem.instance_id}: best A={trace.best_ratio:.4f} "
        f"after {state.samples_consumed} samples"
    )
    return trace
