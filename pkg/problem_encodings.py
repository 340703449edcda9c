#!/usr/bin/env python3
"""
Problem encodings: weighted MaxCut with the last vertex pinned to side 0,
and the generalized ATSP cost (binary index -> Lehmer permutation -> route
length) with optimum-branching bounds.

Instance files are JSON with 1-based vertex/city labels:
    {"type": "maxcut", "n": 4, "edges": [[1, 2, 0.5], ...]}
    {"type": "atsp", "n": 5, "W": [[0, 0.3, ...], ...]}
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from functools import partial
from math import factorial
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from core import (
    BitString,
    CostModel,
    LengthMismatchError,
    SimulatorCapError,
    approximation_ratios,
    indices_to_bits,
)

logger = logging.getLogger(__name__)

DEFAULT_CHUNK = 1 << 20


@dataclass(frozen=True)
class MaxCutInstance:
    n: int
    edges: Tuple[Tuple[int, int, float], ...]

    def __post_init__(self):
        edges = tuple((int(u), int(v), float(w)) for u, v, w in self.edges)
        seen = set()
        for u, v, w in edges:
            if u == v:
                raise ValueError(f"Self-loop on vertex {u}")
            if not (1 <= u <= self.n and 1 <= v <= self.n):
                raise ValueError(f"Edge ({u}, {v}) outside vertices 1..{self.n}")
            if not 0.0 < w <= 1.0:
                raise ValueError(f"Edge ({u}, {v}) weight {w} outside (0, 1]")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"Duplicate edge {key}")
            seen.add(key)
        object.__setattr__(self, 'edges', edges)

    @property
    def n_qubits(self) -> int:
        return self.n - 1

    @property
    def total_weight(self) -> float:
        return float(sum(w for _, _, w in self.edges))

    def to_graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(1, self.n + 1))
        graph.add_weighted_edges_from(self.edges)
        return graph


def atsp_qubits(n: int) -> int:
    """ceil(log2((n-1)!)) computed exactly on integers."""
    if n < 2:
        raise ValueError(f"ATSP needs at least 2 cities, got {n}")
    return (factorial(n - 1) - 1).bit_length()


@dataclass(frozen=True)
class AtspInstance:
    n: int
    W: np.ndarray = field(compare=False)

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        if W.shape != (self.n, self.n):
            raise ValueError(f"ATSP matrix must be {self.n}x{self.n}, got {W.shape}")
        if np.any(np.diag(W) != 0.0):
            raise ValueError("ATSP matrix must have a zero diagonal")
        off = W[~np.eye(self.n, dtype=bool)]
        if np.any(np.isnan(off)) or np.any(off <= 0.0):
            raise ValueError("ATSP off-diagonal entries must be strictly positive")
        W.setflags(write=False)
        object.__setattr__(self, 'W', W)

    @property
    def n_qubits(self) -> int:
        return atsp_qubits(self.n)


ProblemInstance = Union[MaxCutInstance, AtspInstance]


@dataclass(frozen=True)
class Route:
    """City order (1-based labels) with city n always last."""
    order: Tuple[int, ...]

    def __post_init__(self):
        order = tuple(int(c) for c in self.order)
        n = len(order)
        if sorted(order) != list(range(1, n + 1)):
            raise ValueError(f"Route {order} is not a permutation of 1..{n}")
        if order[-1] != n:
            raise ValueError(f"Route {order} must end with city {n}")
        object.__setattr__(self, 'order', order)


def _check_length(x: BitString, expected: int) -> None:
    if len(x) != expected:
        raise LengthMismatchError(f"Expected {expected} bits, got {len(x)}")


# MaxCut

def maxcut_costs(instance: MaxCutInstance, indices: np.ndarray) -> np.ndarray:
    """Vectorised MaxCut cost: minus the weight of cut edges, vertex n on side 0."""
    indices = np.asarray(indices, dtype=np.int64)
    bits = indices_to_bits(indices, instance.n_qubits)
    tags = np.concatenate([bits, np.zeros((len(indices), 1), dtype=np.int64)], axis=1)
    cost = np.zeros(len(indices), dtype=np.float64)
    for u, v, w in instance.edges:
        cost -= w * (tags[:, u - 1] ^ tags[:, v - 1])
    return cost


def maxcut_cost(instance: MaxCutInstance, x: BitString) -> float:
    _check_length(x, instance.n_qubits)
    return float(maxcut_costs(instance, np.array([x.to_int()]))[0])


def maxcut_bounds(instance: MaxCutInstance) -> Tuple[float, float]:
    if not instance.edges:
        raise ValueError("MaxCut bounds need at least one edge")
    return -instance.total_weight, 0.0


# Lehmer codes

def lehmer_decode(index: int, items: Sequence) -> Tuple:
    """
    index-th permutation of `items` in factoradic order.

    Indices in the excess range [(m)!, 2**N) wrap modulo m!, where m is the
    number of items and N = ceil(log2(m!)).
    """
    m = len(items)
    count = factorial(m)
    n_bits = (count - 1).bit_length()
    if index < 0 or index >= max(1 << n_bits, 1):
        raise ValueError(f"Lehmer index {index} outside [0, 2**{n_bits})")
    index %= count
    remaining = list(items)
    result = []
    for position in range(m):
        base = factorial(m - 1 - position)
        digit, index = divmod(index, base)
        result.append(remaining.pop(digit))
    return tuple(result)


def lehmer_encode(permutation: Sequence, items: Sequence) -> int:
    """Inverse of lehmer_decode on [0, m!)."""
    if sorted(permutation) != sorted(items) or len(permutation) != len(items):
        raise ValueError(f"{permutation} is not a permutation of {items}")
    remaining = list(items)
    m = len(items)
    index = 0
    for position, item in enumerate(permutation):
        digit = remaining.index(item)
        index += digit * factorial(m - 1 - position)
        remaining.pop(digit)
    return index


def lehmer_decode_many(indices: np.ndarray, m: int) -> np.ndarray:
    """(k,) indices -> (k, m) permutations of 0..m-1, excess indices wrapped."""
    indices = np.asarray(indices, dtype=np.int64) % factorial(m)
    k = len(indices)
    remaining = np.tile(np.arange(m, dtype=np.int64), (k, 1))
    out = np.empty((k, m), dtype=np.int64)
    rest = indices.copy()
    for position in range(m):
        base = factorial(m - 1 - position)
        digit = rest // base
        rest = rest % base
        out[:, position] = np.take_along_axis(remaining, digit[:, None], axis=1)[:, 0]
        keep = np.arange(remaining.shape[1])[None, :] != digit[:, None]
        remaining = remaining[keep].reshape(k, -1)
    return out


# ATSP

def atsp_costs(instance: AtspInstance, indices: np.ndarray) -> np.ndarray:
    """Vectorised generalized ATSP cost over binary indices."""
    n = instance.n
    perms = lehmer_decode_many(indices, n - 1)
    last = np.full((len(perms), 1), n - 1, dtype=np.int64)
    routes = np.concatenate([perms, last], axis=1)
    W = instance.W
    cost = W[routes[:, -1], routes[:, 0]].copy()
    for i in range(n - 1):
        cost += W[routes[:, i], routes[:, i + 1]]
    return cost


def decode_route(instance: AtspInstance, x: BitString) -> Route:
    _check_length(x, instance.n_qubits)
    perm = lehmer_decode(x.to_int(), list(range(1, instance.n)))
    return Route(perm + (instance.n,))


def encode_route(instance: AtspInstance, route: Route) -> BitString:
    if len(route.order) != instance.n:
        raise LengthMismatchError(f"Route visits {len(route.order)} cities, instance has {instance.n}")
    index = lehmer_encode(route.order[:-1], list(range(1, instance.n)))
    return BitString.from_int(index, instance.n_qubits)


def route_cost(instance: AtspInstance, route: Route) -> float:
    order = [c - 1 for c in route.order]
    W = instance.W
    total = W[order[-1], order[0]]
    for a, b in zip(order[:-1], order[1:]):
        total += W[a, b]
    return float(total)


def atsp_cost(instance: AtspInstance, x: BitString) -> float:
    _check_length(x, instance.n_qubits)
    return float(atsp_costs(instance, np.array([x.to_int()]))[0])


def atsp_digraph(instance: AtspInstance) -> nx.DiGraph:
    graph = nx.DiGraph()
    for i in range(instance.n):
        for j in range(instance.n):
            if i != j:
                graph.add_edge(i, j, weight=float(instance.W[i, j]))
    return graph


def atsp_bounds(instance: AtspInstance) -> Tuple[float, float]:
    """
    Lower bound: minimum spanning arborescence (a tour minus one edge is one).
    Upper bound: maximum branching plus the most expensive single edge.
    """
    if instance.n < 3:
        raise ValueError(f"ATSP bounds need n >= 3, got {instance.n}")
    off = instance.W[~np.eye(instance.n, dtype=bool)]
    if not np.all(np.isfinite(off)):
        raise ValueError("ATSP cost graph has infinite entries; no branching bound exists")

    graph = atsp_digraph(instance)
    lower_tree = nx.minimum_spanning_arborescence(graph, attr='weight')
    upper_tree = nx.maximum_branching(graph, attr='weight')
    lower = sum(d['weight'] for _, _, d in lower_tree.edges(data=True))
    upper = sum(d['weight'] for _, _, d in upper_tree.edges(data=True)) + float(off.max())
    return float(lower), float(upper)


# Instance files

def instance_to_dict(instance: ProblemInstance) -> Dict:
    if isinstance(instance, MaxCutInstance):
        return {'type': 'maxcut', 'n': instance.n, 'edges': [[u, v, w] for u, v, w in instance.edges]}
    return {'type': 'atsp', 'n': instance.n, 'W': instance.W.tolist()}


def instance_from_dict(data: Dict) -> ProblemInstance:
    kind = data.get('type')
    if kind == 'maxcut':
        return MaxCutInstance(int(data['n']), tuple(tuple(e) for e in data['edges']))
    if kind == 'atsp':
        return AtspInstance(int(data['n']), np.array(data['W'], dtype=np.float64))
    raise ValueError(f"Unknown instance type {kind!r}")


def save_instance(instance: ProblemInstance, path: Union[str, Path]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(instance_to_dict(instance), f, indent=2)


def load_instance(path: Union[str, Path]) -> ProblemInstance:
    with open(path, 'r') as f:
        return instance_from_dict(json.load(f))


def instance_hash(instance: ProblemInstance) -> str:
    """md5 of the canonical JSON form."""
    canonical = json.dumps(instance_to_dict(instance), sort_keys=True, separators=(',', ':'))
    return hashlib.md5(canonical.encode('utf-8')).hexdigest()


# Problems

def cost_model_for(instance: ProblemInstance) -> CostModel:
    if isinstance(instance, MaxCutInstance):
        lower, upper = maxcut_bounds(instance)
        return CostModel(instance.n_qubits, partial(maxcut_costs, instance), lower, upper)
    lower, upper = atsp_bounds(instance)
    return CostModel(instance.n_qubits, partial(atsp_costs, instance), lower, upper)


def exhaustive_extremes(cost_model: CostModel, cap: int = 29,
                        chunk: int = DEFAULT_CHUNK) -> Tuple[float, float, int]:
    """Streaming (c_min, c_max, number of optimal strings) over all 2**N candidates."""
    if cost_model.n_bits > cap:
        raise SimulatorCapError(f"Exhaustive search over {cost_model.n_bits} bits exceeds cap {cap}")
    total = 1 << cost_model.n_bits
    c_min, c_max, optimal = np.inf, -np.inf, 0
    for start in range(0, total, chunk):
        costs = cost_model.raw(np.arange(start, min(start + chunk, total), dtype=np.int64))
        low = costs.min()
        if low < c_min:
            c_min, optimal = low, 0
        if low == c_min:
            optimal += int(np.count_nonzero(costs == c_min))
        c_max = max(c_max, costs.max())
    return float(c_min), float(c_max), optimal


@dataclass(frozen=True)
class Problem:
    """An instance with its cost model, exact extremes and identity."""
    instance: ProblemInstance
    cost_model: CostModel
    c_min: float
    c_max: float
    instance_id: str

    @property
    def kind(self) -> str:
        return 'maxcut' if isinstance(self.instance, MaxCutInstance) else 'atsp'

    @property
    def n_bits(self) -> int:
        return self.cost_model.n_bits

    def ratios(self, indices: np.ndarray) -> np.ndarray:
        return approximation_ratios(self.cost_model.raw(indices), self.c_min, self.c_max)

    def ratio_of_costs(self, raw_costs: np.ndarray) -> np.ndarray:
        return approximation_ratios(raw_costs, self.c_min, self.c_max)


def build_problem(instance: ProblemInstance, instance_id: Optional[str] = None,
                  brute_force_cap: int = 29) -> Problem:
    cost_model = cost_model_for(instance)
    c_min, c_max, _ = exhaustive_extremes(cost_model, cap=brute_force_cap)
    logger.debug(f"Built problem N={cost_model.n_bits} c_min={c_min} c_max={c_max}")
    return Problem(instance, cost_model, c_min, c_max, instance_id or instance_hash(instance))


def load_problem(path: Union[str, Path], brute_force_cap: int = 29) -> Problem:
    return build_problem(load_instance(path), instance_id=Path(path).stem, brute_force_cap=brute_force_cap)
