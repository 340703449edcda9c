#!/usr/bin/env python3
"""
Classical bit-flip mirror of the IQP ansatz: channel k flips the bits of
q_k with probability sin^2(theta_k / 2). Equals the IQP circuit with every
qubit completely dephased after each rotation.
"""

import logging
from dataclasses import dataclass, replace
from functools import reduce
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core import BitString, SeededRng, SimulatorCapError, qubit_bit
from iqp_ansatz import IqpCircuit

logger = logging.getLogger(__name__)

DEFAULT_EXACT_CAP = 20
ORACLE_CAP = 6


@dataclass(frozen=True)
class ClassicalAnsatz:
    n_bits: int
    masks: Tuple[int, ...]
    thetas: Tuple[float, ...]

    @classmethod
    def from_circuit(cls, circuit: IqpCircuit) -> 'ClassicalAnsatz':
        return cls(
            circuit.n_qubits,
            tuple(g.mask for g in circuit.generators),
            tuple(g.theta for g in circuit.generators),
        )

    @property
    def n_params(self) -> int:
        return len(self.masks)

    def with_thetas(self, thetas: Sequence[float]) -> 'ClassicalAnsatz':
        if len(thetas) != self.n_params:
            raise ValueError(f"Expected {self.n_params} angles, got {len(thetas)}")
        return replace(self, thetas=tuple(float(t) for t in thetas))

    def flip_probabilities(self) -> np.ndarray:
        return np.sin(np.asarray(self.thetas, dtype=np.float64) / 2) ** 2


def sample_classical_indices(ansatz: ClassicalAnsatz, shots: int, rng: SeededRng) -> np.ndarray:
    x = np.zeros(shots, dtype=np.int64)
    for mask, p in zip(ansatz.masks, ansatz.flip_probabilities()):
        flips = rng.generator.random(shots) < p
        x ^= flips.astype(np.int64) * mask
    return x


def sample_classical(ansatz: ClassicalAnsatz, shots: int, rng: SeededRng) -> List[BitString]:
    return [BitString.from_int(int(i), ansatz.n_bits) for i in sample_classical_indices(ansatz, shots, rng)]


def exact_classical_distribution(ansatz: ClassicalAnsatz, cap: int = DEFAULT_EXACT_CAP) -> np.ndarray:
    """Two-point XOR convolution per channel on the 2**N probability table."""
    if ansatz.n_bits > cap:
        raise SimulatorCapError(f"Exact classical table over {ansatz.n_bits} bits exceeds cap {cap}")
    size = 1 << ansatz.n_bits
    index = np.arange(size, dtype=np.int64)
    probs = np.zeros(size, dtype=np.float64)
    probs[0] = 1.0
    for mask, p in zip(ansatz.masks, ansatz.flip_probabilities()):
        probs = (1.0 - p) * probs + p * probs[index ^ mask]
    return probs


# Dephased density-matrix oracle

def _rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def _single_qubit(op: np.ndarray, qubit: int, n: int) -> np.ndarray:
    factors = [op if q == qubit else np.eye(2, dtype=np.complex128) for q in range(n)]
    return reduce(np.kron, factors)


def _cnot(control: int, target: int, n: int) -> np.ndarray:
    size = 1 << n
    perm = np.zeros((size, size), dtype=np.complex128)
    cbit, tbit = qubit_bit(control, n), qubit_bit(target, n)
    for x in range(size):
        perm[x ^ tbit if x & cbit else x, x] = 1.0
    return perm


def _dephase_all(rho: np.ndarray, n: int) -> np.ndarray:
    for q in range(n):
        z = _single_qubit(np.diag([1.0, -1.0]).astype(np.complex128), q, n)
        rho = 0.5 * rho + 0.5 * z @ rho @ z
    return rho


def dephased_iqp_oracle(circuit: IqpCircuit, cap: int = ORACLE_CAP) -> np.ndarray:
    """
    Literal density-matrix evolution of the explicit layered circuit with a
    complete dephasing of every qubit after each rotation. Returns the
    diagonal. Test-sized only.
    """
    n = circuit.n_qubits
    if n > cap:
        raise SimulatorCapError(f"Dephased oracle limited to {cap} qubits, got {n}")
    size = 1 << n
    rho = np.zeros((size, size), dtype=np.complex128)
    rho[0, 0] = 1.0
    grid = circuit.angle_grid()
    for layer in range(circuit.layers):
        for q in range(n):
            u = _single_qubit(_rx(grid[layer, q]), q, n)
            rho = _dephase_all(u @ rho @ u.conj().T, n)
        if layer < circuit.layers - 1:
            for column in circuit.pattern.columns:
                for control, target in column:
                    p = _cnot(control, target, n)
                    rho = p @ rho @ p.T
    return np.real(np.diag(rho)).copy()
