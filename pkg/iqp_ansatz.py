#!/usr/bin/env python3
"""
Layered hardware-efficient IQP ansatz.

A circuit is built from rotation layers (one X-rotation per qubit) with a
two-column CNOT block between consecutive layers. Every rotation is pushed
forward through the CNOTs that follow it (CNOT_ct X_c = X_c X_t CNOT_ct,
CNOT_ct X_t = X_t CNOT_ct), which turns the circuit into a product of
commuting multi-qubit X rotations exp(-i theta_k X_{Q_k} / 2) on |0...0>.
Repeated generators are deleted, keeping the last occurrence.
"""

import json
import logging
from collections import deque
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

import networkx as nx
import numpy as np

from core import (
    BitString,
    LayoutSearchError,
    SeededRng,
    SimulatorCapError,
    as_indices,
    qubit_bit,
    qubits_from_mask,
)

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]
DEFAULT_SIMULATOR_CAP = 29
MAX_EXHAUSTIVE_NODES = 20


@dataclass(frozen=True)
class CnotPattern:
    """
    Two columns of directed (control, target) pairs on qubit indices 0..N-1.
    Pairs inside a column are applied in the listed order.
    """
    n_qubits: int
    columns: Tuple[Tuple[Pair, ...], Tuple[Pair, ...]]
    labels: Optional[Tuple] = None

    def __post_init__(self):
        if len(self.columns) != 2:
            raise ValueError(f"A CNOT pattern has exactly two columns, got {len(self.columns)}")
        columns = tuple(tuple((int(c), int(t)) for c, t in col) for col in self.columns)
        for col in columns:
            for c, t in col:
                if c == t or not (0 <= c < self.n_qubits and 0 <= t < self.n_qubits):
                    raise ValueError(f"Invalid CNOT ({c}, {t}) for {self.n_qubits} qubits")
        object.__setattr__(self, 'columns', columns)

    def labelled_columns(self) -> Tuple[Tuple[Tuple, ...], Tuple[Tuple, ...]]:
        """Columns expressed with the original graph labels."""
        labels = self.labels or tuple(range(1, self.n_qubits + 1))
        return tuple(tuple((labels[c], labels[t]) for c, t in col) for col in self.columns)

    def propagate(self, mask: int) -> int:
        """Push an X-string mask through one CNOT block."""
        for col in self.columns:
            for c, t in col:
                if mask & qubit_bit(c, self.n_qubits):
                    mask ^= qubit_bit(t, self.n_qubits)
        return mask


def chain_pattern(n_qubits: int) -> CnotPattern:
    """Nearest-neighbour chain: first column pairs (0,1),(2,3)..., second (1,2),(3,4)..."""
    first = tuple((q, q + 1) for q in range(0, n_qubits - 1, 2))
    second = tuple((q, q + 1) for q in range(1, n_qubits - 1, 2))
    return CnotPattern(n_qubits, (first, second))


@dataclass(frozen=True)
class Generator:
    mask: int
    theta: float
    layer: int
    qubit: int
    parameter: int  # position in the layer-major parameter list before deletion


@dataclass(frozen=True)
class IqpCircuit:
    n_qubits: int
    layers: int
    pattern: CnotPattern
    generators: Tuple[Generator, ...]

    @property
    def n_params(self) -> int:
        return len(self.generators)

    @property
    def masks(self) -> np.ndarray:
        return np.array([g.mask for g in self.generators], dtype=np.int64)

    @property
    def thetas(self) -> np.ndarray:
        return np.array([g.theta for g in self.generators], dtype=np.float64)

    def mask_bits(self, k: int) -> BitString:
        return BitString.from_int(self.generators[k].mask, self.n_qubits)

    def with_thetas(self, thetas: Sequence[float]) -> 'IqpCircuit':
        thetas = np.asarray(thetas, dtype=np.float64)
        if thetas.shape != (self.n_params,):
            raise ValueError(f"Expected {self.n_params} angles, got shape {thetas.shape}")
        gens = tuple(replace(g, theta=float(t)) for g, t in zip(self.generators, thetas))
        return replace(self, generators=gens)

    def angle_grid(self) -> np.ndarray:
        """(layers, N) rotation angles of the explicit circuit; deleted gates are 0."""
        grid = np.zeros((self.layers, self.n_qubits), dtype=np.float64)
        for g in self.generators:
            grid[g.layer, g.qubit] = g.theta
        return grid


def propagated_masks(pattern: CnotPattern, layers: int) -> List[Tuple[int, int, int]]:
    """(mask, layer, qubit) for every rotation, layer-major, before deletion."""
    n = pattern.n_qubits
    result = []
    for layer in range(layers):
        for q in range(n):
            mask = qubit_bit(q, n)
            for _ in range(layers - 1 - layer):
                mask = pattern.propagate(mask)
            result.append((mask, layer, q))
    return result


def build_circuit(pattern: CnotPattern, layers: int, deduplicate: bool = True) -> IqpCircuit:
    if layers < 1:
        raise ValueError(f"Need at least one layer, got {layers}")
    raw = propagated_masks(pattern, layers)
    last_seen: Dict[int, int] = {}
    for position, (mask, _, _) in enumerate(raw):
        last_seen[mask] = position

    generators = []
    for position, (mask, layer, q) in enumerate(raw):
        if deduplicate and last_seen[mask] != position:
            continue
        generators.append(Generator(mask, 0.0, layer, q, position))
    circuit = IqpCircuit(pattern.n_qubits, layers, pattern, tuple(generators))
    return circuit.with_thetas(initial_parameters(circuit))


def build_line_circuit(n_qubits: int, layers: int) -> IqpCircuit:
    if n_qubits < 2:
        raise ValueError(f"Line circuit needs N >= 2, got {n_qubits}")
    return build_circuit(chain_pattern(n_qubits), layers)


def initial_parameters(circuit: IqpCircuit) -> np.ndarray:
    """Zero everywhere except pi/2 on the last layer: the uniform state."""
    return np.array(
        [np.pi / 2 if g.layer == circuit.layers - 1 else 0.0 for g in circuit.generators],
        dtype=np.float64,
    )


def covered_pairs(circuit: IqpCircuit) -> Set[Tuple[int, int]]:
    covered = set()
    for g in circuit.generators:
        covered.update(combinations(qubits_from_mask(g.mask, circuit.n_qubits), 2))
    return covered


def pair_coverage(circuit: IqpCircuit) -> bool:
    return len(covered_pairs(circuit)) == circuit.n_qubits * (circuit.n_qubits - 1) // 2


@dataclass(frozen=True)
class CoverageReport:
    layers: int
    uncovered: Tuple[Tuple, ...]  # graph labels, never joined by any generator

    @property
    def complete(self) -> bool:
        return not self.uncovered


def coverage_report(pattern: CnotPattern) -> CoverageReport:
    """
    Smallest depth at which the pattern covers every pair it can ever cover.

    Propagating one more block adds one mask per qubit, so coverage only
    grows with depth. The scan stops once all pairs are covered, once the
    propagated masks return to single qubits (the orbit repeats), or at 4N+4.
    """
    n = pattern.n_qubits
    singles = [qubit_bit(q, n) for q in range(n)]
    all_pairs = set(combinations(range(n), 2))
    covered: Set[Tuple[int, int]] = set()
    masks = list(singles)
    best = 1
    for layers in range(1, 4 * n + 5):
        before = len(covered)
        for mask in masks:
            covered.update(combinations(qubits_from_mask(mask, n), 2))
        if len(covered) > before:
            best = layers
        if len(covered) == len(all_pairs):
            break
        masks = [pattern.propagate(m) for m in masks]
        if masks == singles:
            break
    labels = pattern.labels or tuple(range(1, n + 1))
    uncovered = tuple(sorted((labels[a], labels[b]) for a, b in all_pairs - covered))
    return CoverageReport(best, uncovered)


def minimal_layers(n_qubits: int, pattern: Optional[CnotPattern] = None) -> int:
    """Smallest layer count reaching the pattern's full pair coverage."""
    pattern = pattern or chain_pattern(n_qubits)
    report = coverage_report(pattern)
    if not report.complete:
        logger.warning(
            f"CNOT pattern on {n_qubits} qubits never covers pairs {list(report.uncovered)}; "
            f"using {report.layers} layers"
        )
    return report.layers


def dump_circuit(circuit: IqpCircuit) -> str:
    rows = [
        {
            'mask': str(BitString.from_int(g.mask, circuit.n_qubits)),
            'theta': g.theta,
            'layer': g.layer,
            'qubit': g.qubit,
        }
        for g in circuit.generators
    ]
    return json.dumps(rows, indent=2)


# Connectivity adaptation

@dataclass(frozen=True)
class ConnectivityGraph:
    qubits: Tuple
    couplings: Tuple[Tuple, ...]

    def __post_init__(self):
        object.__setattr__(self, 'qubits', tuple(sorted(self.qubits)))
        object.__setattr__(self, 'couplings', tuple(tuple(e) for e in self.couplings))
        graph = self.to_networkx()
        if len(self.qubits) < 2 or not nx.is_connected(graph):
            raise ValueError("Connectivity graph must be connected with at least two qubits")

    @classmethod
    def from_edges(cls, edges: Sequence[Tuple]) -> 'ConnectivityGraph':
        nodes = sorted({u for e in edges for u in e})
        return cls(tuple(nodes), tuple(edges))

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.qubits)
        graph.add_edges_from(self.couplings)
        return graph


def _canonical_cycle(cycle: Sequence) -> Tuple:
    """Start at the smallest label, continue towards its smaller neighbour."""
    start = cycle.index(min(cycle))
    rotated = list(cycle[start:]) + list(cycle[:start])
    if len(rotated) > 2 and rotated[-1] < rotated[1]:
        rotated = [rotated[0]] + rotated[1:][::-1]
    return tuple(rotated)


def _canonical_path(path: Sequence) -> Tuple:
    return tuple(path) if path[0] <= path[-1] else tuple(reversed(path))


def _longest(candidates: List[Tuple]) -> Optional[Tuple]:
    """Longest candidate; ties go to the lexicographically smallest."""
    if not candidates:
        return None
    length = max(len(c) for c in candidates)
    return min(c for c in candidates if len(c) == length)


def longest_even_cycle(graph: nx.Graph) -> Optional[Tuple]:
    return _longest([
        _canonical_cycle(cycle)
        for cycle in nx.simple_cycles(graph)
        if len(cycle) >= 4 and len(cycle) % 2 == 0
    ])


def longest_path(graph: nx.Graph) -> Tuple:
    nodes = sorted(graph.nodes)
    return _longest([
        _canonical_path(path)
        for i, source in enumerate(nodes)
        for target in nodes[i + 1:]
        for path in nx.all_simple_paths(graph, source, target)
    ])


def adapt_layout(graph: ConnectivityGraph, cycle: Optional[Sequence] = None) -> CnotPattern:
    """
    Derive a two-column CNOT pattern from device connectivity.

    Directed CNOTs alternate between the columns around the longest even
    cycle (longest path when the graph has no even cycle). Every other qubit
    is attached as a control onto an already placed neighbour, in the column
    of a CNOT entering that neighbour (the opposite of its outgoing column
    when nothing enters it). Only graph edges are used.
    """
    g = graph.to_networkx()
    closed = True
    if cycle is not None:
        backbone = _canonical_cycle(list(cycle))
        if len(backbone) % 2 or len(backbone) < 4:
            raise LayoutSearchError(f"Explicit cycle must have even length >= 4, got {len(backbone)}")
        ring = list(backbone) + [backbone[0]]
        for a, b in zip(ring[:-1], ring[1:]):
            if not g.has_edge(a, b):
                raise LayoutSearchError(f"Explicit cycle uses missing coupling ({a}, {b})")
    else:
        if g.number_of_nodes() > MAX_EXHAUSTIVE_NODES:
            raise LayoutSearchError(
                f"Graph has {g.number_of_nodes()} qubits; exhaustive cycle search is limited to "
                f"{MAX_EXHAUSTIVE_NODES}. Pass an explicit cycle."
            )
        backbone = longest_even_cycle(g)
        if backbone is None:
            closed = False
            backbone = longest_path(g)

    stops = list(backbone) + ([backbone[0]] if closed else [])
    columns: Tuple[List, List] = ([], [])
    entering: Dict = {}
    outgoing: Dict = {}
    for step, (control, target) in enumerate(zip(stops[:-1], stops[1:])):
        color = step % 2
        columns[color].append((control, target))
        entering.setdefault(target, color)
        outgoing.setdefault(control, color)

    placed = set(backbone)
    while len(placed) < g.number_of_nodes():
        frontier = sorted(v for v in g.nodes if v not in placed and any(u in placed for u in g[v]))
        for node in frontier:
            anchor = min(u for u in g[node] if u in placed)
            color = entering[anchor] if anchor in entering else 1 - outgoing[anchor]
            columns[color].append((node, anchor))
            entering.setdefault(anchor, color)
            outgoing.setdefault(node, color)
        placed.update(frontier)

    labels = graph.qubits
    position = {label: i for i, label in enumerate(labels)}
    indexed = tuple(tuple((position[c], position[t]) for c, t in col) for col in columns)
    logger.debug(f"Adapted layout on backbone {backbone}: {columns}")
    return CnotPattern(len(labels), indexed, labels)


# Simulation

@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def probabilities(self) -> np.ndarray:
        probs = np.abs(self.amplitudes) ** 2
        return probs

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))


def zero_state(n_qubits: int, cap: int = DEFAULT_SIMULATOR_CAP) -> StateVector:
    if n_qubits > cap:
        raise SimulatorCapError(f"{n_qubits} qubits exceeds the simulator cap of {cap}")
    amplitudes = np.zeros(1 << n_qubits, dtype=np.complex128)
    amplitudes[0] = 1.0
    return StateVector(n_qubits, amplitudes)


def apply_rotation(state: StateVector, mask: int, theta: float) -> StateVector:
    """exp(-i theta X_Q / 2): pairs amplitudes at x and x XOR mask."""
    a = state.amplitudes
    partner = np.arange(a.size, dtype=np.int64) ^ mask
    rotated = np.cos(theta / 2) * a - 1j * np.sin(theta / 2) * a[partner]
    return StateVector(state.n_qubits, rotated)


def apply_generators(circuit: IqpCircuit, thetas: Optional[Sequence[float]] = None,
                     cap: int = DEFAULT_SIMULATOR_CAP) -> StateVector:
    thetas = circuit.thetas if thetas is None else np.asarray(thetas, dtype=np.float64)
    state = zero_state(circuit.n_qubits, cap)
    for g, theta in zip(circuit.generators, thetas):
        if theta != 0.0:
            state = apply_rotation(state, g.mask, theta)
    return state


def shifted_state(base: StateVector, mask: int, shift: float) -> StateVector:
    """The base state with parameter k moved by `shift` (generators commute)."""
    return apply_rotation(base, mask, shift)


def sample_indices(probabilities: np.ndarray, shots: int, rng: SeededRng) -> np.ndarray:
    p = np.asarray(probabilities, dtype=np.float64)
    p = p / p.sum()
    return rng.generator.choice(p.size, size=shots, p=p).astype(np.int64)


def sample(state: StateVector, shots: int, rng: SeededRng) -> List[BitString]:
    indices = sample_indices(state.probabilities(), shots, rng)
    return [BitString.from_int(int(i), state.n_qubits) for i in indices]


def shifted_distribution_pushforward(samples: Union[np.ndarray, Sequence[BitString]],
                                     mask: Union[int, BitString]):
    """Samples of the +pi/2 shifted circuit XOR q_k: distributed as the -pi/2 one."""
    mask = mask.to_int() if isinstance(mask, BitString) else int(mask)
    if isinstance(samples, np.ndarray):
        return as_indices(samples) ^ mask
    return [BitString.from_int(x.to_int() ^ mask, len(x)) for x in samples]
