import dataclasses

import numpy as np
import pytest
from pydantic import ValidationError

from stockshift.domain import (
    InstanceError,
    MovementPolicy,
    SolverConfig,
    dimensions_for_sizes,
    model_dimensions,
    movements_for_policy,
    validate_instance,
)
from stockshift.instgen import GeneratorParams, generate_instance


@pytest.mark.parametrize(("policy", "count"), [("CR", 6), ("DR", 9), ("GR", 12)])
def test_policy_movement_counts(policy, count):
    movements = movements_for_policy(range(4), [0], MovementPolicy(policy))
    assert len(movements) == count
    assert all(i != j for i, j in movements)
    assert list(movements) == sorted(movements)


def test_policy_rules():
    cr = movements_for_policy(range(4), [0], MovementPolicy.CR)
    dr = movements_for_policy(range(4), [0], MovementPolicy.DR)
    assert all(0 in movement for movement in cr)
    assert all(j != 0 for _, j in dr)
    assert set(cr) & set(dr) == {(0, 1), (0, 2), (0, 3)}


def test_policy_needs_a_warehouse():
    with pytest.raises(InstanceError):
        movements_for_policy(range(3), [], MovementPolicy.GR)
    with pytest.raises(InstanceError):
        movements_for_policy([], [0], MovementPolicy.GR)


def test_instance_arrays_are_read_only(three_facility):
    with pytest.raises(ValueError):
        three_facility.initial_stock[0, 0] = 3
    assert three_facility.outlets == (1, 2)
    assert three_facility.is_warehouse.tolist() == [True, False, False]


def test_final_stock(three_facility):
    X = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    assert three_facility.final_stock(X).tolist() == [[4, 0, 4], [1, 0, 1], [0, 1, 1]]


def test_valid_instance_passes(three_facility, shortfall_instance, tiny_instance):
    for instance in (three_facility, shortfall_instance, tiny_instance):
        report = validate_instance(instance)
        assert report.ok, report.violations


@pytest.mark.parametrize(
    ("changes", "kind"),
    [
        ({"initial_stock": [[5, 0, 5], [0, -1, 1], [0, 0, 0]]}, "negative stock"),
        ({"fixed_demand": [[1, 0, 0], [1, 0, 1], [0, 1, 1]]}, "warehouse demand"),
        ({"fixed_demand": [[0, 0, 0], [1, 0, 1], [0, 5, 1]]}, "aggregate infeasibility"),
        ({"capacity": [0.0]}, "nonpositive capacity"),
        ({"cost": [[10.0], [-1.0], [10.0]]}, "negative cost"),
        ({"weight": [1.0, -1.0, 1.0]}, "negative weight"),
        ({"weight": [1.0, 1.0]}, "shape"),
        ({"priority": np.full((3, 3), 2.0)}, "priority out of range"),
        ({"movements": ((0, 1), (1, 1), (0, 1))}, "self-loop"),
        ({"movements": ((0, 1), (1, 2), (0, 1))}, "duplicate movement"),
        ({"movements": ((0, 1), (1, 2), (0, 5))}, "unknown facility"),
    ],
)
def test_validation_flags(three_facility, changes, kind):
    broken = dataclasses.replace(three_facility, **changes)
    assert kind in validate_instance(broken).kinds()


def test_with_policy_keeps_costs(shortfall_instance):
    dr = shortfall_instance.with_policy(MovementPolicy.DR)
    assert dr.movements == ((0, 1), (0, 2), (1, 2), (2, 1))
    assert dr.cost.shape == (4, 2)
    assert validate_instance(dr).ok


def test_with_policy_requires_cost_data(three_facility):
    with pytest.raises(InstanceError):
        three_facility.with_policy(MovementPolicy.GR)


def test_scaled_warehouse_costs(shortfall_instance):
    scaled = shortfall_instance.with_scaled_warehouse_costs(2.0)
    for m, (i, j) in enumerate(scaled.movements):
        factor = 2.0 if 0 in (i, j) else 1.0
        assert scaled.cost[m].tolist() == (factor * shortfall_instance.cost[m]).tolist()
    with pytest.raises(InstanceError):
        shortfall_instance.with_scaled_warehouse_costs(-1.0)


def test_model_dimensions(three_facility):
    dims = model_dimensions(three_facility)
    assert (dims.n_vars, dims.n_int_vars_T, dims.n_int_vars_RT, dims.n_constraints) == (21, 12, 3, 27)


def test_model_dimensions_under_a_policy(shortfall_instance):
    assert model_dimensions(shortfall_instance, MovementPolicy.CR).n_int_vars_RT == 4 * 2


@pytest.mark.parametrize(
    ("size", "n_vars", "n_constraints"),
    [(260, 17847180, 271180), (160, 4198880, 161 * 160 + 2 * 160 * 160 + 161 * 160 + 160)],
)
def test_grid_test_set_dimensions(size, n_vars, n_constraints):
    n_movements = (size + 1) * size
    dims = dimensions_for_sizes(size, 2, 1, size, n_movements)
    assert dims.n_vars == n_vars
    assert dims.n_int_vars_T == n_movements * (size + 2)
    assert dims.n_int_vars_RT == n_movements * 2
    assert dims.n_constraints == n_constraints


@pytest.mark.parametrize("delta", [0.0, -0.5, 1.5])
def test_delta_range(delta):
    with pytest.raises(ValidationError):
        SolverConfig(delta=delta)


def test_small_preset_dimensions():
    instance = generate_instance(GeneratorParams.from_preset("small", rng_seed=1))
    dims = model_dimensions(instance)
    assert (dims.n_vars, dims.n_constraints, dims.n_int_vars_T, dims.n_int_vars_RT) == (1430, 430, 1320, 220)


@pytest.mark.parametrize(
    ("sizes", "expected"),
    [
        ((30, 4, 1, 30, 31 * 30), (32550, 3690, 31620, 3720)),
        ((100, 4, 1, 100, 101 * 100), (1060500, 40300, 1050400, 40400)),
        ((100, 2, 1, 100, 101 * 100), (1040300, 40300, 1030200, 20200)),
    ],
)
def test_preset_dimensions(sizes, expected):
    dims = dimensions_for_sizes(*sizes)
    assert (dims.n_vars, dims.n_constraints, dims.n_int_vars_T, dims.n_int_vars_RT) == expected
