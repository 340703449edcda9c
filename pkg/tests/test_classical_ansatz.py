import itertools

import numpy as np
import pytest

from classical_ansatz import (
    ClassicalAnsatz,
    dephased_iqp_oracle,
    exact_classical_distribution,
    sample_classical,
    sample_classical_indices,
)
from core import BitString, SeededRng, SimulatorCapError
from iqp_ansatz import build_line_circuit, minimal_layers


def brute_force_distribution(ansatz):
    """Sum over every flip pattern of the channels."""
    probs = np.zeros(1 << ansatz.n_bits)
    flip = ansatz.flip_probabilities()
    for pattern in itertools.product((0, 1), repeat=ansatz.n_params):
        weight, x = 1.0, 0
        for fired, mask, p in zip(pattern, ansatz.masks, flip):
            weight *= p if fired else 1.0 - p
            if fired:
                x ^= mask
        probs[x] += weight
    return probs


def test_full_flip_is_deterministic():
    ansatz = ClassicalAnsatz(4, (0b0101,), (np.pi,))
    assert set(sample_classical(ansatz, 30, SeededRng(0))) == {BitString.from_str('0101')}


def test_zero_angles_sample_zeros():
    circuit = build_line_circuit(4, 3)
    ansatz = ClassicalAnsatz.from_circuit(circuit).with_thetas(np.zeros(circuit.n_params))
    assert not sample_classical_indices(ansatz, 100, SeededRng(1)).any()


def test_exact_distribution_small_cases():
    assert exact_classical_distribution(ClassicalAnsatz(3, (), ())).tolist() == [1, 0, 0, 0, 0, 0, 0, 0]
    half = exact_classical_distribution(ClassicalAnsatz(4, (0b1000,), (np.pi / 2,)))
    assert half[0] == pytest.approx(0.5)
    assert half[0b1000] == pytest.approx(0.5)


def test_initial_parameters_spread_uniformly():
    circuit = build_line_circuit(4, 3)
    probs = exact_classical_distribution(ClassicalAnsatz.from_circuit(circuit))
    np.testing.assert_allclose(probs, np.full(16, 1 / 16), atol=1e-12)


def test_exact_distribution_matches_flip_pattern_enumeration():
    circuit = build_line_circuit(4, 3)
    rng = np.random.default_rng(17)
    for _ in range(5):
        ansatz = ClassicalAnsatz.from_circuit(circuit).with_thetas(rng.uniform(-np.pi, np.pi, circuit.n_params))
        np.testing.assert_allclose(exact_classical_distribution(ansatz), brute_force_distribution(ansatz),
                                   atol=1e-12)


@pytest.mark.parametrize('n,layers', [(2, 1), (2, 2), (3, 2), (3, 3), (4, 2), (4, 3)])
def test_matches_fully_dephased_iqp_circuit(n, layers):
    rng = np.random.default_rng(100 * n + layers)
    circuit = build_line_circuit(n, layers)
    for _ in range(50):
        thetas = rng.uniform(-np.pi, np.pi, circuit.n_params)
        oracle = dephased_iqp_oracle(circuit.with_thetas(thetas))
        mirror = exact_classical_distribution(ClassicalAnsatz.from_circuit(circuit).with_thetas(thetas))
        np.testing.assert_allclose(mirror, oracle, atol=1e-10)


def test_channel_order_does_not_matter():
    circuit = build_line_circuit(5, minimal_layers(5))
    thetas = np.random.default_rng(4).uniform(-np.pi, np.pi, circuit.n_params)
    ansatz = ClassicalAnsatz.from_circuit(circuit).with_thetas(thetas)
    shuffled = ClassicalAnsatz(ansatz.n_bits, ansatz.masks[::-1], ansatz.thetas[::-1])
    np.testing.assert_allclose(exact_classical_distribution(ansatz), exact_classical_distribution(shuffled),
                               atol=1e-12)


def test_shifted_distributions_are_mirror_images():
    circuit = build_line_circuit(4, 3)
    thetas = np.random.default_rng(8).uniform(-np.pi, np.pi, circuit.n_params)
    ansatz = ClassicalAnsatz.from_circuit(circuit)
    index = np.arange(16)
    for k, mask in enumerate(ansatz.masks):
        minus, plus = thetas.copy(), thetas.copy()
        minus[k] -= np.pi / 2
        plus[k] += np.pi / 2
        p_minus = exact_classical_distribution(ansatz.with_thetas(minus))
        p_plus = exact_classical_distribution(ansatz.with_thetas(plus))
        np.testing.assert_allclose(p_minus, p_plus[index ^ mask], atol=1e-12)


def test_sampling_frequencies_follow_exact_distribution():
    circuit = build_line_circuit(3, 2)
    thetas = np.random.default_rng(12).uniform(-np.pi, np.pi, circuit.n_params)
    ansatz = ClassicalAnsatz.from_circuit(circuit).with_thetas(thetas)
    draws = sample_classical_indices(ansatz, 200_000, SeededRng(3))
    observed = np.bincount(draws, minlength=8) / len(draws)
    np.testing.assert_allclose(observed, exact_classical_distribution(ansatz), atol=0.01)


def test_caps():
    with pytest.raises(SimulatorCapError):
        exact_classical_distribution(ClassicalAnsatz(21, (), ()))
    with pytest.raises(SimulatorCapError):
        dephased_iqp_oracle(build_line_circuit(7, 2))
    with pytest.raises(ValueError):
        ClassicalAnsatz(3, (1,), (0.0,)).with_thetas([0.0, 1.0])
