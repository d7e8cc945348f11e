import numpy as np
import pytest

from stockshift.domain import Solution
from stockshift.packing import PackingFault, PackingTask, pack_all, packing_task, solve_packing
from tests.oracles import packing_cost


def make_task(units, weight, capacity, cost, availability=None) -> PackingTask:
    return PackingTask(
        movement=(0, 1),
        units=np.asarray(units, dtype=np.int64),
        weight=np.asarray(weight, dtype=float),
        capacity=np.asarray(capacity, dtype=float),
        cost=np.asarray(cost, dtype=float),
        availability=np.full(len(capacity), 100) if availability is None else np.asarray(availability),
    )


def assert_valid(task: PackingTask, result) -> None:
    shipped = np.zeros(len(task.units), dtype=np.int64)
    for package in result.packages:
        assert package.load <= task.capacity[package.package_type] + 1e-9
        for sku, count in package.contents.items():
            shipped[sku] += count
    assert shipped.tolist() == task.units.tolist()
    assert result.cost == pytest.approx(sum(task.cost[p.package_type] for p in result.packages))


def test_exact_packing_of_a_small_task():
    task = make_task([1, 2, 2], [4.0, 3.0, 2.0], [5.0, 10.0], [3.0, 5.0])
    result = solve_packing(task)
    assert result.is_exact
    assert_valid(task, result)
    weights = [4.0, 3.0, 3.0, 2.0, 2.0]
    assert result.cost == pytest.approx(packing_cost(weights, task.capacity, task.cost))


@pytest.mark.parametrize("seed", range(10))
def test_exact_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    n_skus = 3
    units = rng.integers(0, 3, size=n_skus)
    units[0] += 1
    weight = np.round(rng.uniform(0.5, 4.0, size=n_skus), 2)
    capacity = np.array([4.0, 6.0, 9.0])
    cost = np.round(rng.uniform(2.0, 8.0, size=3), 2)
    task = make_task(units, weight, capacity, cost)
    result = solve_packing(task)
    items = [float(weight[s]) for s in range(n_skus) for _ in range(units[s])]
    assert result.is_exact
    assert_valid(task, result)
    assert result.cost == pytest.approx(packing_cost(items, capacity, cost))


def test_large_tasks_use_the_heuristic():
    task = make_task([20, 15, 10], [1.0, 2.5, 0.7], [5.0, 8.0], [4.0, 6.0])
    result = solve_packing(task, exact_threshold=30)
    assert not result.is_exact
    assert_valid(task, result)


def test_weightless_units_ride_along():
    task = make_task([2, 3], [1.5, 0.0], [4.0], [7.0])
    result = solve_packing(task)
    assert_valid(task, result)
    assert len(result.packages) == 1
    assert result.packages[0].contents == {0: 2, 1: 3}


def test_only_weightless_units_open_the_cheapest_package():
    task = make_task([0, 2], [1.0, 0.0], [4.0, 2.0], [7.0, 3.0])
    result = solve_packing(task)
    assert [p.package_type for p in result.packages] == [1]


def test_too_heavy_unit_is_a_fault():
    task = make_task([1], [12.0], [5.0, 10.0], [1.0, 2.0])
    with pytest.raises(PackingFault, match="unpackable"):
        solve_packing(task)


def test_availability_limits_package_types():
    task = make_task([3], [2.0], [2.0, 6.0], [1.0, 5.0], availability=[1, 5])
    result = solve_packing(task)
    assert_valid(task, result)
    assert result.counts(2)[0] <= 1


def test_pack_all_three_facility(three_facility):
    solution = Solution.from_transfers(three_facility, [[1, 0, 0], [0, 1, 0], [0, 0, 1]], [[1], [1], [1]])
    packed = pack_all(three_facility, solution)
    assert set(packed.manifests) == {(0, 1), (1, 2), (0, 2)}
    assert packed.solution.Y.tolist() == [[1], [1], [1]]
    assert packed.transport_cost == pytest.approx(30.0)
    assert packed.all_exact
    document = packed.manifest_document()
    assert document[0] == {"movement": [0, 1], "packages": [{"type": 0, "contents": [[0, 1]]}], "exact": True}


def test_packing_task_availability_covers_the_units(shortfall_instance):
    task = packing_task(shortfall_instance, 0, [40, 0])
    assert (task.availability >= 40).all()
    assert task.movement == (0, 1)


def test_fragmentation_needs_more_packages_than_the_weight_bound():
    # total weight 9 fits two packages of capacity 5, but no two units share one
    task = make_task([3], [3.0], [5.0], [1.0])
    result = solve_packing(task)
    assert_valid(task, result)
    assert len(result.packages) == 3
    assert 3 * task.weight[0] <= 2 * task.capacity[0]
