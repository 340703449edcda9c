#!/usr/bin/env python3
"""
Random benchmark instances and their solution spectra.

MaxCut: connected 3-regular graphs from the configuration (pairing) model
with rejection, weights uniform on (0, 1].
ATSP: complete asymmetric matrices, off-diagonal weights uniform on (0, 1].
"""

import json
import logging
from dataclasses import dataclass
from math import factorial
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from core import SeededRng, SimulatorCapError
from problem_encodings import (
    AtspInstance,
    MaxCutInstance,
    Problem,
    ProblemInstance,
    atsp_qubits,
    build_problem,
    save_instance,
)

logger = logging.getLogger(__name__)

DEGREE = 3
MAX_ATTEMPTS = 10000
DEFAULT_THRESHOLDS = (0.0, 0.5, 0.8, 0.85, 0.9, 0.95, 0.99, 1.0)
SPECTRUM_CHUNK = 1 << 20


def _pairing_edges(n: int, rng: SeededRng) -> Optional[List[Tuple[int, int]]]:
    """One configuration-model attempt; None on a self-loop or repeated edge."""
    stubs = np.repeat(np.arange(n), DEGREE)
    rng.generator.shuffle(stubs)
    edges = set()
    for a, b in zip(stubs[0::2], stubs[1::2]):
        a, b = (int(a), int(b)) if a < b else (int(b), int(a))
        if a == b or (a, b) in edges:
            return None
        edges.add((a, b))
    return sorted(edges)


def generate_maxcut(n: int, seed: int) -> MaxCutInstance:
    if n < 4 or n % 2:
        raise ValueError(f"3-regular graphs need an even vertex count >= 4, got {n}")
    rng = SeededRng(seed)
    for attempt in range(1, MAX_ATTEMPTS + 1):
        edges = _pairing_edges(n, rng)
        if edges is None:
            continue
        graph = nx.Graph(edges)
        if graph.number_of_nodes() < n or not nx.is_connected(graph):
            continue
        weights = 1.0 - rng.generator.random(len(edges))
        logger.debug(f"Cubic graph n={n} seed={seed} accepted after {attempt} attempts")
        return MaxCutInstance(n, tuple((u + 1, v + 1, float(w)) for (u, v), w in zip(edges, weights)))
    raise RuntimeError(f"No connected 3-regular graph on {n} vertices after {MAX_ATTEMPTS} attempts")


def generate_atsp(n: int, seed: int) -> AtspInstance:
    if n < 4:
        raise ValueError(f"ATSP generation needs n >= 4, got {n}")
    rng = SeededRng(seed)
    W = 1.0 - rng.generator.random((n, n))
    np.fill_diagonal(W, 0.0)
    return AtspInstance(n, W)


def maxcut_vertices_for_qubits(n_qubits: int) -> int:
    n = n_qubits + 1
    if n % 2:
        raise ValueError(f"MaxCut on cubic graphs needs an odd qubit count, got {n_qubits}")
    return n


def atsp_cities_for_qubits(n_qubits: int) -> int:
    for n in range(3, 64):
        if atsp_qubits(n) == n_qubits:
            return n
        if atsp_qubits(n) > n_qubits:
            break
    raise ValueError(f"No ATSP city count encodes into exactly {n_qubits} qubits")


def generate(kind: str, n_qubits: int, seed: int) -> ProblemInstance:
    if kind == 'maxcut':
        return generate_maxcut(maxcut_vertices_for_qubits(n_qubits), seed)
    if kind == 'atsp':
        return generate_atsp(atsp_cities_for_qubits(n_qubits), seed)
    raise ValueError(f"Unknown problem kind {kind!r}")


def generation_parameters(instance: ProblemInstance) -> Dict:
    if isinstance(instance, MaxCutInstance):
        return {'weights': 'uniform(0,1]', 'graph': 'configuration-model', 'degree': DEGREE}
    return {'weights': 'uniform(0,1]', 'matrix': 'complete-asymmetric', 'metric': False}


def write_instance(instance: ProblemInstance, path: Union[str, Path], seed: int,
                   brute_force_cap: int = 29) -> Path:
    """Instance JSON plus a `<stem>.meta.json` sidecar."""
    path = Path(path)
    save_instance(instance, path)
    c_min = c_max = None
    if instance.n_qubits <= brute_force_cap:
        problem = build_problem(instance, instance_id=path.stem, brute_force_cap=brute_force_cap)
        c_min, c_max = problem.c_min, problem.c_max
    meta = {
        'seed': seed,
        'n': instance.n,
        'N': instance.n_qubits,
        'c_min': c_min,
        'c_max': c_max,
        'generation': generation_parameters(instance),
    }
    meta_path = path.with_name(f"{path.stem}.meta.json")
    with open(meta_path, 'w') as f:
        json.dump(meta, f, indent=2, sort_keys=True)
    logger.info(f"Wrote {path} (N={instance.n_qubits})")
    return meta_path


@dataclass
class SpectrumReport:
    instance_id: str
    kind: str
    n_bits: int
    thresholds: List[float]
    fractions: List[float]
    reference: float
    optimal_count: int = 0

    def rows(self) -> List[Dict]:
        return [
            {
                'instance_id': self.instance_id,
                'kind': self.kind,
                'n_bits': self.n_bits,
                'threshold': a,
                'fraction': frac,
                'reference': self.reference,
            }
            for a, frac in zip(self.thresholds, self.fractions)
        ]


def reference_line(problem: Problem) -> float:
    """Fraction of a single optimal candidate: 2**-N (MaxCut) or 1/(n-1)! (ATSP)."""
    if problem.kind == 'atsp':
        return 1.0 / factorial(problem.instance.n - 1)
    return 2.0 ** -problem.n_bits


def spectrum(problem: Problem, thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
             cap: int = 29, chunk: int = SPECTRUM_CHUNK) -> SpectrumReport:
    """Exact fraction of all 2**N candidates with A(x) >= a, streamed in chunks."""
    n = problem.n_bits
    if n > cap:
        raise SimulatorCapError(f"Spectrum over {n} bits exceeds brute-force cap {cap}")
    total = 1 << n
    thresholds = sorted(float(a) for a in thresholds)
    counts = np.zeros(len(thresholds), dtype=np.int64)
    optimal = 0
    for start in range(0, total, chunk):
        raw = problem.cost_model.raw(np.arange(start, min(start + chunk, total), dtype=np.int64))
        ratios = problem.ratio_of_costs(raw)
        counts += np.array([np.count_nonzero(ratios >= a) for a in thresholds])
        optimal += int(np.count_nonzero(raw == problem.c_min))
    return SpectrumReport(
        instance_id=problem.instance_id,
        kind=problem.kind,
        n_bits=n,
        thresholds=thresholds,
        fractions=(counts / total).tolist(),
        reference=reference_line(problem),
        optimal_count=optimal,
    )
