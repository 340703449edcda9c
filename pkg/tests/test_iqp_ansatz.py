import json

import numpy as np
import pytest
from scipy import stats

from core import BitString, LayoutSearchError, SeededRng, SimulatorCapError, qubits_from_mask
from iqp_ansatz import (
    CnotPattern,
    ConnectivityGraph,
    IqpCircuit,
    adapt_layout,
    apply_generators,
    build_circuit,
    build_line_circuit,
    chain_pattern,
    coverage_report,
    covered_pairs,
    dump_circuit,
    minimal_layers,
    pair_coverage,
    propagated_masks,
    sample,
    sample_indices,
    shifted_distribution_pushforward,
    shifted_state,
    zero_state,
)


def one_based(mask, n):
    return {q + 1 for q in qubits_from_mask(mask, n)}


def gate_list_masks(pattern, layers):
    """Independent oracle: walk the explicit gate list and conjugate each X rotation forward."""
    gates = []
    for layer in range(layers):
        gates.extend(('rx', q) for q in range(pattern.n_qubits))
        if layer < layers - 1:
            for column in pattern.columns:
                gates.extend(('cnot', c, t) for c, t in column)

    masks = []
    for position, gate in enumerate(gates):
        if gate[0] != 'rx':
            continue
        support = {gate[1]}
        for later in gates[position + 1:]:
            if later[0] == 'cnot' and later[1] in support:
                support ^= {later[2]}
        masks.append(sum(1 << (pattern.n_qubits - 1 - q) for q in support))
    return masks


# Generators

def test_four_qubit_three_layer_generators():
    raw = propagated_masks(chain_pattern(4), 3)
    expected = [{1, 3, 4}, {2, 4}, {3}, {4}, {1, 2, 3}, {2, 3}, {3, 4}, {4}, {1}, {2}, {3}, {4}]
    assert [one_based(mask, 4) for mask, _, _ in raw] == expected

    circuit = build_line_circuit(4, 3)
    assert circuit.n_params == 9
    assert [g.parameter for g in circuit.generators] == [0, 1, 4, 5, 6, 8, 9, 10, 11]
    assert minimal_layers(4) == 3


def test_five_qubit_propagation_through_full_block():
    raw = propagated_masks(chain_pattern(5), 3)
    assert one_based(raw[1][0], 5) == {2, 4, 5}


@pytest.mark.parametrize('n', range(2, 9))
@pytest.mark.parametrize('layers', range(1, 6))
def test_propagation_matches_gate_list_oracle(n, layers):
    pattern = chain_pattern(n)
    assert [m for m, _, _ in propagated_masks(pattern, layers)] == gate_list_masks(pattern, layers)


def test_deduplication_keeps_last_occurrence():
    circuit = build_circuit(chain_pattern(4), 3)
    masks = [g.mask for g in circuit.generators]
    assert len(masks) == len(set(masks))
    full = build_circuit(chain_pattern(4), 3, deduplicate=False)
    assert full.n_params == 12
    for g in circuit.generators:
        later = [h for h in full.generators if h.mask == g.mask and h.parameter > g.parameter]
        assert not later


def test_two_qubit_minimal_layers():
    one = build_line_circuit(2, 1)
    assert [one_based(g.mask, 2) for g in one.generators] == [{1}, {2}]
    assert not pair_coverage(one)
    assert minimal_layers(2) == 2


@pytest.mark.parametrize('n', range(2, 9))
def test_minimal_layers_is_minimal(n):
    layers = minimal_layers(n)
    assert pair_coverage(build_line_circuit(n, layers))
    if layers > 1:
        assert not pair_coverage(build_line_circuit(n, layers - 1))


def test_dump_circuit_lists_generators():
    rows = json.loads(dump_circuit(build_line_circuit(4, 3)))
    assert len(rows) == 9
    assert rows[0] == {'mask': '1011', 'theta': 0.0, 'layer': 0, 'qubit': 0}
    assert rows[-1]['theta'] == pytest.approx(np.pi / 2)


def test_invalid_patterns():
    with pytest.raises(ValueError):
        CnotPattern(3, (((0, 0),), ()))
    with pytest.raises(ValueError):
        CnotPattern(3, (((0, 3),), ()))
    with pytest.raises(ValueError):
        build_circuit(chain_pattern(3), 0)


# Layout adaptation

def test_adapt_layout_six_qubit_device(caplog):
    graph = ConnectivityGraph.from_edges([(1, 2), (2, 3), (3, 5), (5, 6), (6, 2), (3, 4)])
    pattern = adapt_layout(graph)
    first, second = pattern.labelled_columns()
    assert set(first) == {(2, 3), (5, 6), (4, 3)}
    assert set(second) == {(3, 5), (6, 2), (1, 2)}
    edges = {frozenset(e) for e in graph.couplings}
    assert all(frozenset(pair) in edges for col in (first, second) for pair in col)

    # qubits 1 and 4 are only ever controls, so no generator joins them
    report = coverage_report(pattern)
    assert not report.complete
    assert (1, 4) in report.uncovered
    with caplog.at_level('WARNING'):
        layers = minimal_layers(6, pattern)
    assert layers == report.layers
    assert 'never covers pairs' in caplog.text

    reached = covered_pairs(build_circuit(pattern, layers))
    assert len(reached) == 15 - len(report.uncovered)
    assert covered_pairs(build_circuit(pattern, 4 * 6 + 4)) == reached
    if layers > 1:
        assert len(covered_pairs(build_circuit(pattern, layers - 1))) < len(reached)


def test_coverage_report_complete_for_chain():
    report = coverage_report(chain_pattern(5))
    assert report.complete
    assert report.layers == minimal_layers(5)


def test_adapt_layout_line_reproduces_chain():
    graph = ConnectivityGraph.from_edges([(1, 2), (2, 3), (3, 4), (4, 5)])
    assert adapt_layout(graph).columns == chain_pattern(5).columns


def test_adapt_layout_square():
    graph = ConnectivityGraph.from_edges([(1, 2), (2, 3), (3, 4), (4, 1)])
    first, second = adapt_layout(graph).labelled_columns()
    assert first == ((1, 2), (3, 4))
    assert second == ((2, 3), (4, 1))


def test_adapt_layout_is_deterministic():
    edges = [(1, 2), (2, 3), (3, 4), (4, 1), (4, 5), (5, 6), (6, 1), (2, 7)]
    a = adapt_layout(ConnectivityGraph.from_edges(edges))
    b = adapt_layout(ConnectivityGraph.from_edges(list(reversed(edges))))
    assert a == b


def test_adapt_layout_large_graphs_need_explicit_cycle():
    ring = list(range(1, 23))
    edges = list(zip(ring, ring[1:] + ring[:1]))
    graph = ConnectivityGraph.from_edges(edges)
    with pytest.raises(LayoutSearchError):
        adapt_layout(graph)
    pattern = adapt_layout(graph, cycle=ring)
    assert len(pattern.columns[0]) == 11 and len(pattern.columns[1]) == 11
    with pytest.raises(LayoutSearchError):
        adapt_layout(graph, cycle=[1, 2, 3])


def test_disconnected_graph_rejected():
    with pytest.raises(ValueError):
        ConnectivityGraph.from_edges([(1, 2), (3, 4)])


# Simulation

def test_zero_parameters_give_zero_state():
    circuit = build_line_circuit(4, 3)
    probs = apply_generators(circuit, np.zeros(circuit.n_params)).probabilities()
    assert probs[0] == pytest.approx(1.0)


@pytest.mark.parametrize('n', range(2, 11))
def test_initial_parameters_give_uniform_distribution(n):
    circuit = build_line_circuit(n, minimal_layers(n))
    probs = apply_generators(circuit).probabilities()
    np.testing.assert_allclose(probs, np.full(1 << n, 2.0 ** -n), atol=1e-12)


def test_single_generator_flips_its_support():
    circuit = build_line_circuit(4, 3)
    target = next(k for k, g in enumerate(circuit.generators) if one_based(g.mask, 4) == {1, 2, 3})
    thetas = np.zeros(circuit.n_params)
    thetas[target] = np.pi
    probs = apply_generators(circuit, thetas).probabilities()
    assert probs[0b1110] == pytest.approx(1.0)


def test_state_is_normalised_and_order_independent():
    circuit = build_line_circuit(5, minimal_layers(5))
    thetas = np.random.default_rng(0).uniform(-np.pi, np.pi, circuit.n_params)
    state = apply_generators(circuit, thetas)
    assert state.norm() == pytest.approx(1.0)

    reversed_circuit = IqpCircuit(circuit.n_qubits, circuit.layers, circuit.pattern,
                                  tuple(reversed(circuit.generators)))
    other = apply_generators(reversed_circuit, thetas[::-1])
    assert np.max(np.abs(state.amplitudes - other.amplitudes)) < 1e-12


def test_shifted_distributions_are_mirror_images():
    circuit = build_line_circuit(4, 3)
    thetas = np.random.default_rng(5).uniform(-np.pi, np.pi, circuit.n_params)
    base = apply_generators(circuit, thetas)
    index = np.arange(16)
    for g in circuit.generators:
        minus = shifted_state(base, g.mask, -np.pi / 2).probabilities()
        plus = shifted_state(base, g.mask, np.pi / 2).probabilities()
        np.testing.assert_allclose(minus, plus[index ^ g.mask], atol=1e-10)


def test_pushforward_of_samples():
    shots = np.array([0b0000, 0b1010, 0b1111])
    assert shifted_distribution_pushforward(shots, 0b0110).tolist() == [0b0110, 0b1100, 0b1001]
    mapped = shifted_distribution_pushforward([BitString.from_str('0000')], BitString.from_str('0110'))
    assert mapped == [BitString.from_str('0110')]


def test_sampling_matches_exact_distribution():
    circuit = build_line_circuit(4, 3)
    thetas = np.random.default_rng(1).uniform(-np.pi, np.pi, circuit.n_params)
    probs = apply_generators(circuit, thetas).probabilities()
    shots = 100_000
    draws = sample_indices(probs, shots, SeededRng(2024))
    observed = np.bincount(draws, minlength=16)
    expected = probs / probs.sum() * shots
    keep = expected > 5
    _, p_value = stats.chisquare(observed[keep], expected[keep] * observed[keep].sum() / expected[keep].sum())
    assert p_value > 1e-3


def test_sampling_is_deterministic():
    circuit = build_line_circuit(4, 3)
    state = apply_generators(circuit)
    assert sample(state, 50, SeededRng(9)) == sample(state, 50, SeededRng(9))

    point = apply_generators(circuit, np.zeros(circuit.n_params))
    assert set(sample(point, 20, SeededRng(1))) == {BitString.zeros(4)}


def test_simulator_cap():
    with pytest.raises(SimulatorCapError):
        zero_state(30)
    with pytest.raises(SimulatorCapError):
        apply_generators(build_line_circuit(4, 3), cap=3)
