import itertools
import json
from math import factorial

import numpy as np
import pytest

from conftest import complete_maxcut, random_atsp
from core import BitString, LengthMismatchError, SimulatorCapError
from problem_encodings import (
    AtspInstance,
    MaxCutInstance,
    Route,
    atsp_bounds,
    atsp_cost,
    atsp_costs,
    atsp_qubits,
    build_problem,
    cost_model_for,
    decode_route,
    encode_route,
    exhaustive_extremes,
    instance_hash,
    lehmer_decode,
    lehmer_decode_many,
    lehmer_encode,
    load_instance,
    load_problem,
    maxcut_bounds,
    maxcut_cost,
    maxcut_costs,
    route_cost,
    save_instance,
)


# MaxCut

def test_triangle_cases(triangle):
    assert maxcut_cost(triangle, BitString.from_str('10')) == -1.5
    assert maxcut_cost(triangle, BitString.from_str('00')) == 0.0
    assert maxcut_cost(triangle, BitString.from_str('11')) == -1.0
    assert maxcut_bounds(triangle) == (-2.0, 0.0)


def test_maxcut_length_mismatch(triangle):
    with pytest.raises(LengthMismatchError):
        maxcut_cost(triangle, BitString.from_str('101'))


def _cut_weight(instance, tags):
    return sum(w for u, v, w in instance.edges if tags[u - 1] != tags[v - 1])


def test_maxcut_matches_full_partition_and_explicit_formula():
    instance = complete_maxcut(6, seed=11)
    n = instance.n
    for tags in itertools.product((0, 1), repeat=n):
        complement = tuple(1 - t for t in tags)
        assert _cut_weight(instance, tags) == pytest.approx(_cut_weight(instance, complement))

    costs = maxcut_costs(instance, np.arange(1 << (n - 1)))
    for index, cost in enumerate(costs):
        x = BitString.from_int(index, n - 1).bits
        assert cost == pytest.approx(-_cut_weight(instance, x + (0,)))
        explicit = 0.0
        for u, v, w in instance.edges:
            if v == n:
                explicit -= w * x[u - 1]
            else:
                explicit -= w * (x[u - 1] + x[v - 1] - 2 * x[u - 1] * x[v - 1])
        assert cost == pytest.approx(explicit)


def test_maxcut_instance_validation():
    with pytest.raises(ValueError):
        MaxCutInstance(3, ((1, 1, 0.5),))
    with pytest.raises(ValueError):
        MaxCutInstance(3, ((1, 4, 0.5),))
    with pytest.raises(ValueError):
        MaxCutInstance(3, ((1, 2, 1.5),))
    with pytest.raises(ValueError):
        MaxCutInstance(3, ((1, 2, 0.5), (2, 1, 0.5)))
    with pytest.raises(ValueError):
        maxcut_bounds(MaxCutInstance(3, ()))


# Lehmer codes

def test_lehmer_cases():
    assert lehmer_decode(3, [1, 2, 3]) == (2, 3, 1)
    assert lehmer_decode(5, [1, 2, 3]) == (3, 2, 1)
    assert lehmer_decode(0, [1, 2, 3]) == (1, 2, 3)


def test_lehmer_excess_indices_wrap():
    assert lehmer_decode(6, [1, 2, 3]) == lehmer_decode(0, [1, 2, 3])
    assert lehmer_decode(7, [1, 2, 3]) == lehmer_decode(1, [1, 2, 3])
    with pytest.raises(ValueError):
        lehmer_decode(8, [1, 2, 3])


@pytest.mark.parametrize('m', range(1, 8))
def test_lehmer_is_a_bijection_in_lexicographic_order(m):
    items = list(range(1, m + 1))
    expected = list(itertools.permutations(items))
    decoded = [lehmer_decode(i, items) for i in range(factorial(m))]
    assert decoded == expected
    assert [lehmer_encode(p, items) for p in decoded] == list(range(factorial(m)))


def test_vectorised_lehmer_matches_scalar():
    m = 4
    n_bits = (factorial(m) - 1).bit_length()
    perms = lehmer_decode_many(np.arange(1 << n_bits), m)
    for index, row in enumerate(perms):
        assert tuple(row) == lehmer_decode(index, list(range(m)))


# ATSP

def test_atsp_qubit_counts():
    assert [atsp_qubits(n) for n in range(8, 14)] == [13, 16, 19, 22, 26, 29]
    assert atsp_qubits(4) == 3


def test_atsp_four_city_cases():
    instance = random_atsp(4, seed=1)
    W = instance.W
    assert atsp_cost(instance, BitString.from_str('000')) == pytest.approx(
        W[0, 1] + W[1, 2] + W[2, 3] + W[3, 0])
    assert decode_route(instance, BitString.from_str('101')) == Route((3, 2, 1, 4))
    assert atsp_cost(instance, BitString.from_str('101')) == pytest.approx(
        W[2, 1] + W[1, 0] + W[0, 3] + W[3, 2])


def test_atsp_excess_strings_repeat_routes():
    instance = random_atsp(4, seed=2)
    routes = [decode_route(instance, BitString.from_int(i, 3)) for i in range(8)]
    assert len(set(routes)) == factorial(3)
    assert routes[6] == routes[0] and routes[7] == routes[1]


@pytest.mark.parametrize('n', [4, 5, 6])
def test_atsp_costs_match_route_enumeration(n):
    instance = random_atsp(n, seed=n)
    n_bits = atsp_qubits(n)
    costs = atsp_costs(instance, np.arange(1 << n_bits))
    by_route = {
        Route(perm + (n,)): route_cost(instance, Route(perm + (n,)))
        for perm in itertools.permutations(range(1, n))
    }
    for index, cost in enumerate(costs):
        route = decode_route(instance, BitString.from_int(index, n_bits))
        assert cost == pytest.approx(by_route[route])
        if index < factorial(n - 1):
            assert encode_route(instance, route).to_int() == index


@pytest.mark.parametrize('seed', range(5))
def test_atsp_bounds_sandwich_every_tour(seed):
    for n in (4, 5, 6):
        instance = random_atsp(n, seed=seed)
        lower, upper = atsp_bounds(instance)
        costs = atsp_costs(instance, np.arange(factorial(n - 1)))
        assert lower <= costs.min() + 1e-12
        assert costs.max() <= upper + 1e-12


def test_atsp_uniform_weights_lower_bound():
    W = np.ones((4, 4))
    np.fill_diagonal(W, 0.0)
    lower, upper = atsp_bounds(AtspInstance(4, W))
    assert lower == pytest.approx(3.0)
    assert upper == pytest.approx(4.0)


def test_atsp_validation():
    W = np.ones((3, 3))
    with pytest.raises(ValueError):
        AtspInstance(3, W)
    np.fill_diagonal(W, 0.0)
    W[0, 1] = -1.0
    with pytest.raises(ValueError):
        AtspInstance(3, W)
    W[0, 1] = np.inf
    with pytest.raises(ValueError, match='infinite'):
        atsp_bounds(AtspInstance(3, W))


# Files and problems

def test_instance_file_round_trip(tmp_path, triangle):
    for instance in (triangle, random_atsp(5, seed=4)):
        path = tmp_path / f"{type(instance).__name__}.json"
        save_instance(instance, path)
        loaded = load_instance(path)
        assert instance_hash(loaded) == instance_hash(instance)
        assert json.loads(path.read_text())['n'] == instance.n


def test_build_problem_uses_exhaustive_extremes(tmp_path):
    instance = complete_maxcut(5, seed=8)
    problem = build_problem(instance)
    table = cost_model_for(instance).raw_table
    assert problem.c_min == table.min() and problem.c_max == table.max()
    ratios = problem.ratios(np.arange(1 << problem.n_bits))
    assert ratios.max() == 1.0 and ratios.min() == 0.0
    assert problem.kind == 'maxcut'

    save_instance(instance, tmp_path / 'k5.json')
    assert load_problem(tmp_path / 'k5.json').instance_id == 'k5'


def test_exhaustive_extremes_counts_optima_and_respects_cap(triangle):
    model = cost_model_for(triangle)
    assert exhaustive_extremes(model, chunk=1) == (-1.5, 0.0, 2)
    with pytest.raises(SimulatorCapError):
        exhaustive_extremes(model, cap=1)
