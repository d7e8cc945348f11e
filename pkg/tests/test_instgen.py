import math

import numpy as np
import pytest

from stockshift.domain import MovementPolicy, validate_instance
from stockshift.instgen import PRESETS, GeneratorError, GeneratorParams, generate_instance, partition
from stockshift.serialization import dumps_instance


def test_partition_largest_remainder():
    assert partition(10, [1, 1, 1]).tolist() == [4, 3, 3]
    assert partition(7, [0.5, 0.5]).tolist() == [4, 3]
    assert partition(5, [0.0, 2.0, 3.0]).tolist() == [0, 2, 3]
    assert partition(0, [1, 2]).tolist() == [0, 0]


def test_partition_keeps_shape_and_total():
    rng = np.random.default_rng(3)
    weights = rng.uniform(size=(4, 5))
    shares = partition(101, weights)
    assert shares.shape == (4, 5)
    assert shares.sum() == 101
    quota = 101 * weights / weights.sum()
    assert (shares >= np.floor(quota)).all()
    assert (shares <= np.ceil(quota)).all()


@pytest.mark.parametrize("weights", [[0, 0], [-1, 2]])
def test_partition_rejects_bad_weights(weights):
    with pytest.raises(GeneratorError):
        partition(3, weights)


def test_same_seed_same_instance():
    params = GeneratorParams.from_preset("desk", rng_seed=42)
    assert dumps_instance(generate_instance(params)) == dumps_instance(generate_instance(params))


def test_different_seed_different_instance():
    first = generate_instance(GeneratorParams.from_preset("desk", rng_seed=1))
    second = generate_instance(GeneratorParams.from_preset("desk", rng_seed=2))
    assert not np.array_equal(first.initial_stock, second.initial_stock)


@pytest.mark.parametrize("seed", range(5))
def test_small_preset_shape_and_invariants(seed):
    params = GeneratorParams.from_preset("small", rng_seed=seed)
    instance = generate_instance(params)
    assert validate_instance(instance).ok
    assert instance.n_skus == 10
    assert instance.n_packages == 2
    assert instance.outlets == tuple(range(1, 11))
    assert instance.n_movements == 11 * 10
    assert instance.facilities[0] == "W0"
    assert instance.facilities[1] == "O1"

    assert instance.initial_stock.sum() == 1000
    warehouse_stock = instance.initial_stock[0].sum()
    assert warehouse_stock == math.ceil(1000 * 0.4)
    assert (instance.fixed_demand.sum(axis=0) <= instance.sku_totals()).all()
    assert not instance.fixed_demand[0].any()
    assert not instance.variable_demand[0].any()
    assert 250 <= instance.variable_demand.sum() <= 500
    assert (instance.priority[1:] == 1.0).all()
    assert (instance.weight >= 0).all() and (instance.weight <= 1).all()
    assert (instance.capacity >= 2).all() and (instance.capacity <= 10).all()


def test_costs_follow_capacity_and_warehouse_factor():
    params = GeneratorParams.from_preset("desk", rng_seed=4, ware_pack_cost_factor=0.0)
    instance = generate_instance(params)
    touches = instance.is_warehouse[instance.tails] | instance.is_warehouse[instance.heads]
    assert not instance.cost[touches].any()
    assert (instance.cost[~touches] > 0).all()
    assert (instance.cost <= 100.0).all()


def test_policy_shapes_the_movement_set():
    instance = generate_instance(GeneratorParams.from_preset("tiny", movement_policy=MovementPolicy.CR))
    assert instance.movements == ((0, 1), (0, 2), (1, 0), (2, 0))


def test_unknown_preset():
    with pytest.raises(GeneratorError):
        GeneratorParams.from_preset("huge")


def test_invalid_override():
    with pytest.raises(GeneratorError):
        GeneratorParams.from_preset("small", min_cost=500.0)


def test_grid_presets():
    assert PRESETS["g1"] == {"num_refs": 80, "num_packs": 2, "num_outlets": 80, "total_stock": 64000}
    assert PRESETS["g10"]["num_refs"] == 260


@pytest.mark.slow
def test_fuzzed_instances_pass_validation():
    rng = np.random.default_rng(2024)
    policies = list(MovementPolicy)
    for seed in range(1000):
        total = int(rng.integers(1, 500))
        params = GeneratorParams(
            num_refs=int(rng.integers(1, 9)),
            num_packs=int(rng.integers(1, 5)),
            num_outlets=int(rng.integers(1, 9)),
            num_warehouses=int(rng.integers(1, 4)),
            total_stock=total,
            movement_policy=policies[seed % len(policies)],
            rng_seed=seed,
        )
        instance = generate_instance(params)
        report = validate_instance(instance)
        assert report.ok, (seed, report)
        warehouses = list(instance.warehouses)
        outlets = list(instance.outlets)
        # 40% of the stock, rounded up, starts in the warehouses
        assert instance.initial_stock[warehouses].sum() == -(-2 * total // 5)
        assert instance.initial_stock[outlets].sum() == 3 * total // 5


@pytest.mark.slow
def test_partition_properties_on_random_cases():
    rng = np.random.default_rng(99)
    for _ in range(10_000):
        size = int(rng.integers(1, 12))
        weights = rng.uniform(0.0, 5.0, size=size)
        weights[rng.random(size) < 0.2] = 0.0
        if weights.sum() == 0:
            weights[0] = 1.0
        total = int(rng.integers(0, 1000))
        shares = partition(total, weights)
        quota = total * weights / weights.sum()
        assert shares.sum() == total
        assert (shares >= np.floor(quota - 1e-9)).all()
        assert (shares <= np.ceil(quota + 1e-9)).all()
        assert not shares[weights == 0].any()
