#!/usr/bin/env python3
"""
Run traces: the common record written by every algorithm (F-VQE, VQE, BFS,
SA) and read back by the analysis pipeline.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from core import BitString, approximation_ratio

logger = logging.getLogger(__name__)


@dataclass
class StepRecord:
    """Per-training-step data; exact fields are filled only when requested."""
    step: int
    samples_consumed: int
    shots: int
    gradient_norm: float
    stalled: bool = False
    success_probabilities: Optional[Dict[str, float]] = None
    exact_gradients: Optional[List[float]] = None


@dataclass
class RunTrace:
    algorithm: str
    instance_id: str
    seed: int
    n_bits: int
    points: List[Tuple[int, float]] = field(default_factory=list)
    best_bits: Optional[str] = None
    best_cost: Optional[float] = None
    samples_consumed: int = 0
    steps: List[StepRecord] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def best_ratio(self) -> float:
        return self.points[-1][1] if self.points else 0.0

    def best_ratio_at(self, samples: int) -> float:
        """Best approximation ratio after `samples` evaluations (right-continuous)."""
        best = 0.0
        for consumed, ratio in self.points:
            if consumed > samples:
                break
            best = ratio
        return best

    def first_reaching(self, threshold: float) -> Optional[int]:
        for consumed, ratio in self.points:
            if ratio >= threshold:
                return consumed
        return None

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['points'] = [[int(s), float(a)] for s, a in self.points]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunTrace':
        steps = [StepRecord(**s) for s in data.get('steps', [])]
        return cls(
            algorithm=data['algorithm'],
            instance_id=data['instance_id'],
            seed=int(data['seed']),
            n_bits=int(data['n_bits']),
            points=[(int(s), float(a)) for s, a in data.get('points', [])],
            best_bits=data.get('best_bits'),
            best_cost=data.get('best_cost'),
            samples_consumed=int(data.get('samples_consumed', 0)),
            steps=steps,
            config=data.get('config', {}),
            extra=data.get('extra', {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + '\n'

    def save(self, path: Union[str, Path]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='\n') as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'RunTrace':
        with open(path, 'r') as f:
            return cls.from_dict(json.load(f))


class BestTracker:
    """Best-so-far over a stream of evaluated candidates."""

    def __init__(self, n_bits: int, c_min: float, c_max: float):
        self.n_bits = n_bits
        self.c_min = c_min
        self.c_max = c_max
        self.best_index: Optional[int] = None
        self.best_cost = np.inf
        self.points: List[Tuple[int, float]] = []

    def observe(self, indices: np.ndarray, raw_costs: np.ndarray, offset: int) -> None:
        """
        Feed a batch of candidates; the i-th one is evaluation number
        offset + i + 1. Records a point at every strict improvement.
        """
        raw_costs = np.asarray(raw_costs, dtype=np.float64)
        if raw_costs.size == 0:
            return
        previous = np.minimum.accumulate(np.concatenate([[self.best_cost], raw_costs]))[:-1]
        improved = np.flatnonzero(raw_costs < previous)
        for i in improved:
            self.best_cost = float(raw_costs[i])
            self.best_index = int(indices[i])
            ratio = approximation_ratio(self.best_cost, self.c_min, self.c_max)
            self.points.append((offset + int(i) + 1, float(ratio)))

    @property
    def best_bits(self) -> Optional[str]:
        if self.best_index is None:
            return None
        return str(BitString.from_int(self.best_index, self.n_bits))

    def fill(self, trace: RunTrace) -> RunTrace:
        trace.points = list(self.points)
        trace.best_bits = self.best_bits
        trace.best_cost = None if self.best_index is None else self.best_cost
        return trace
