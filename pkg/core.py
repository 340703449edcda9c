#!/usr/bin/env python3
"""
Core domain types shared by every module: bit strings, cost models,
approximation ratios and seeded randomness.

Integer convention used everywhere: qubit 0 is the most-significant bit,
so index = sum(b_q * 2**(N-1-q)). State vectors, probability tables and
XOR masks all use this indexing.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

# Fraction of the bound range subtracted from the lower bound so that the
# rescaled cost of the true optimum stays strictly positive.
LOWER_BOUND_SHIFT = 1e-9


class LengthMismatchError(ValueError):
    """Two bit strings (or a bit string and an instance) disagree on length."""


class UnscorableInstanceError(ValueError):
    """Approximation ratio undefined because c_min == c_max."""


class SimulatorCapError(ValueError):
    """Requested state vector or probability table exceeds the configured cap."""


class FilterDomainError(ValueError):
    """A non-positive rescaled cost reached the filtering function."""


class LayoutSearchError(ValueError):
    """No usable CNOT layout could be derived from a connectivity graph."""


@dataclass(frozen=True)
class BitString:
    """Fixed-width binary candidate solution; bit q belongs to qubit q."""
    bits: Tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError(f"BitString entries must be 0 or 1, got {self.bits}")
        object.__setattr__(self, 'bits', bits)

    @classmethod
    def from_str(cls, text: str) -> 'BitString':
        return cls(tuple(int(ch) for ch in text.strip()))

    @classmethod
    def from_int(cls, value: int, n_bits: int) -> 'BitString':
        if value < 0 or value >= (1 << n_bits):
            raise ValueError(f"Index {value} does not fit in {n_bits} bits")
        return cls(tuple((value >> (n_bits - 1 - q)) & 1 for q in range(n_bits)))

    @classmethod
    def zeros(cls, n_bits: int) -> 'BitString':
        return cls((0,) * n_bits)

    def to_int(self) -> int:
        value = 0
        for b in self.bits:
            value = (value << 1) | b
        return value

    def support(self) -> Tuple[int, ...]:
        """Qubits set to 1."""
        return tuple(q for q, b in enumerate(self.bits) if b)

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return ''.join(str(b) for b in self.bits)

    def __xor__(self, other: 'BitString') -> 'BitString':
        return xor(self, other)


def xor(a: BitString, b: BitString) -> BitString:
    """Bitwise exclusive-or of two equal-length bit strings."""
    if len(a) != len(b):
        raise LengthMismatchError(f"Cannot XOR bit strings of length {len(a)} and {len(b)}")
    return BitString(tuple(x ^ y for x, y in zip(a.bits, b.bits)))


def qubit_bit(qubit: int, n_bits: int) -> int:
    """Integer mask with only `qubit` set."""
    return 1 << (n_bits - 1 - qubit)


def mask_from_qubits(qubits: Iterable[int], n_bits: int) -> int:
    mask = 0
    for q in qubits:
        mask |= qubit_bit(q, n_bits)
    return mask


def qubits_from_mask(mask: int, n_bits: int) -> Tuple[int, ...]:
    return tuple(q for q in range(n_bits) if mask & qubit_bit(q, n_bits))


def indices_to_bits(indices: np.ndarray, n_bits: int) -> np.ndarray:
    """(k,) integer indices -> (k, n_bits) 0/1 matrix, column q = qubit q."""
    indices = np.asarray(indices, dtype=np.int64)
    shifts = np.arange(n_bits - 1, -1, -1, dtype=np.int64)
    return ((indices[:, None] >> shifts[None, :]) & 1).astype(np.int64)


def as_indices(candidates: Union[np.ndarray, Sequence[BitString], Sequence[int]]) -> np.ndarray:
    """Normalize BitStrings or integers to an int64 index array."""
    if isinstance(candidates, np.ndarray):
        return candidates.astype(np.int64, copy=False)
    values = [c.to_int() if isinstance(c, BitString) else int(c) for c in candidates]
    return np.asarray(values, dtype=np.int64)


@dataclass(frozen=True)
class CostModel:
    """
    Raw cost function plus bounds used to rescale costs into (0, 1].

    `raw_cost` maps an int64 index array to a float64 cost array.
    """
    n_bits: int
    raw_cost: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    lower_bound: float
    upper_bound: float

    def __post_init__(self):
        if not self.lower_bound < self.upper_bound:
            raise ValueError(
                f"Cost bounds must satisfy lower < upper, got {self.lower_bound} >= {self.upper_bound}"
            )

    @property
    def shifted_lower_bound(self) -> float:
        return self.lower_bound - LOWER_BOUND_SHIFT * (self.upper_bound - self.lower_bound)

    def raw(self, indices: np.ndarray) -> np.ndarray:
        return np.asarray(self.raw_cost(as_indices(indices)), dtype=np.float64)

    def rescale(self, raw_costs: np.ndarray) -> np.ndarray:
        lower = self.shifted_lower_bound
        return (np.asarray(raw_costs, dtype=np.float64) - lower) / (self.upper_bound - lower)

    def rescaled(self, indices: np.ndarray) -> np.ndarray:
        return self.rescale(self.raw(indices))

    def cost_of(self, x: BitString) -> float:
        if len(x) != self.n_bits:
            raise LengthMismatchError(f"Expected {self.n_bits} bits, got {len(x)}")
        return float(self.raw(np.array([x.to_int()]))[0])

    @cached_property
    def raw_table(self) -> np.ndarray:
        """Raw cost of every index in [0, 2**N); only for small N."""
        return self.raw(np.arange(1 << self.n_bits, dtype=np.int64))

    @cached_property
    def rescaled_table(self) -> np.ndarray:
        return self.rescale(self.raw_table)


def approximation_ratio(cost: float, c_min: float, c_max: float) -> float:
    """(c_max - cost) / (c_max - c_min): 1 at the optimum, 0 at the worst candidate."""
    if not c_min < c_max:
        raise UnscorableInstanceError(f"Degenerate cost range c_min={c_min}, c_max={c_max}")
    return (c_max - cost) / (c_max - c_min)


def approximation_ratios(costs: np.ndarray, c_min: float, c_max: float) -> np.ndarray:
    if not c_min < c_max:
        raise UnscorableInstanceError(f"Degenerate cost range c_min={c_min}, c_max={c_max}")
    return (c_max - np.asarray(costs, dtype=np.float64)) / (c_max - c_min)


class SeededRng:
    """
    Deterministic random source. Single owner: parallel runs each build their
    own from the run seed and never share one.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) % (1 << 64)
        self.generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed})"
