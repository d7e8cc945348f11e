import math

import numpy as np
import pytest
from scipy.optimize import linprog

from stockshift.instgen import GeneratorParams, generate_instance
from stockshift.mcf import ArcKind, FlowNetwork, FlowStatus, build_rounding_network, solve_min_cost_flow


def reference_cost(net: FlowNetwork) -> float:
    n_arcs = len(net.arcs)
    A = np.zeros((net.n_nodes, n_arcs))
    for k, arc in enumerate(net.arcs):
        A[arc.tail, k] += 1.0
        A[arc.head, k] -= 1.0
    result = linprog(
        [arc.cost for arc in net.arcs],
        A_eq=A,
        b_eq=net.supply,
        bounds=[(arc.lower, arc.upper) for arc in net.arcs],
        method="highs",
    )
    assert result.status == 0
    return float(result.fun)


def random_network(seed: int) -> FlowNetwork:
    rng = np.random.default_rng(seed)
    n_nodes = 7
    net = FlowNetwork()
    for _ in range(n_nodes):
        net.add_node()
    flows = []
    for _ in range(18):
        tail, head = rng.choice(n_nodes, size=2, replace=False)
        lower = int(rng.integers(0, 2))
        upper = lower + int(rng.integers(0, 5))
        net.add_arc(tail, head, lower, upper, float(rng.integers(-5, 10)))
        flows.append(int(rng.integers(lower, upper + 1)))
    # supplies taken from a known flow keep the network feasible
    net.supply = [int(v) for v in net.net_outflow(np.array(flows))]
    return net


@pytest.mark.parametrize("seed", range(10))
def test_matches_linear_programming(seed):
    net = random_network(seed)
    result = solve_min_cost_flow(net)
    assert result.status is FlowStatus.OPTIMAL
    assert result.cost == pytest.approx(reference_cost(net), abs=1e-6)
    assert net.net_outflow(result.flows).tolist() == net.supply
    for arc, flow in zip(net.arcs, result.flows, strict=True):
        assert arc.lower <= flow <= arc.upper


def test_negative_cycle_is_saturated():
    net = FlowNetwork()
    a, b = net.add_node("a"), net.add_node("b")
    net.add_arc(a, b, 0, 3, -2.0)
    net.add_arc(b, a, 0, 5, 1.0)
    result = solve_min_cost_flow(net)
    assert result.flows.tolist() == [3, 3]
    assert result.cost == pytest.approx(-3.0)


def test_unbalanced_supply_is_infeasible():
    net = FlowNetwork()
    a, b = net.add_node("a", 2), net.add_node("b", -1)
    net.add_arc(a, b, 0, 5, 1.0)
    assert solve_min_cost_flow(net).status is FlowStatus.INFEASIBLE


def test_insufficient_capacity_is_infeasible():
    net = FlowNetwork()
    a, b = net.add_node("a", 5), net.add_node("b", -5)
    net.add_arc(a, b, 0, 3, 1.0)
    result = solve_min_cost_flow(net)
    assert not result.is_optimal
    assert math.isinf(result.cost)


def test_lower_bounds_are_respected():
    net = FlowNetwork()
    a, b, c = net.add_node("a"), net.add_node("b"), net.add_node("c")
    net.add_arc(a, b, 2, 4, 5.0)
    net.add_arc(b, c, 0, 4, 1.0)
    net.add_arc(c, a, 0, 4, 1.0)
    result = solve_min_cost_flow(net)
    assert result.flows.tolist() == [2, 2, 2]
    assert result.cost == pytest.approx(14.0)


@pytest.mark.parametrize("seed", range(4))
def test_rounding_network_keeps_every_sum_within_floor_and_ceil(seed):
    instance = generate_instance(GeneratorParams.from_preset("desk", rng_seed=seed))
    rng = np.random.default_rng(seed)
    x_rel = rng.uniform(0.0, 3.0, size=instance.n_movements)
    x_rel[rng.random(instance.n_movements) < 0.5] = 0.0
    c_hat = rng.normal(size=instance.n_movements)

    network = build_rounding_network(instance, 0, x_rel, c_hat)
    assert len(network.network.arcs_of_kind(ArcKind.TRANSFER)) == instance.n_movements
    rounded = network.solve()

    assert (rounded >= np.floor(x_rel)).all()
    assert (rounded <= np.ceil(x_rel)).all()
    sent = np.zeros(instance.n_facilities)
    received = np.zeros(instance.n_facilities)
    np.add.at(sent, instance.tails, rounded)
    np.add.at(received, instance.heads, rounded)
    for exact, value in ((network.sent, sent), (network.received, received), (network.balance, received - sent)):
        assert (value >= np.floor(exact - 1e-9)).all()
        assert (value <= np.ceil(exact + 1e-9)).all()


def test_integral_transfers_round_to_themselves(three_facility):
    x = np.array([1.0, 0.0, 2.0])
    network = build_rounding_network(three_facility, 2, x, np.array([-1.0, 0.0, -1.0]))
    assert network.solve().tolist() == [1, 0, 2]


@pytest.mark.slow
def test_many_random_networks_match_linear_programming():
    for seed in range(100, 200):
        net = random_network(seed)
        result = solve_min_cost_flow(net)
        assert result.status is FlowStatus.OPTIMAL
        assert np.array_equal(result.flows, np.rint(result.flows))
        assert result.cost == pytest.approx(reference_cost(net), rel=1e-9, abs=1e-9)
