from pathlib import Path

import numpy as np
import pytest

from stockshift.domain import Instance, MovementPolicy, movements_for_policy
from stockshift.instgen import GeneratorParams, generate_instance
from stockshift.serialization import save_instance

REPO_CONFIG = Path(__file__).resolve().parents[1] / "config" / "options.toml"


def make_three_facility_instance() -> Instance:
    """
    One warehouse W and outlets O1, O2 with three unit-weight SKUs and a single package type.
    O1 only has spare s2, so O2's s2 must come from O1 and everything else from W.
    """
    return Instance(
        facilities=("W", "O1", "O2"),
        warehouses=(0,),
        skus=("s1", "s2", "s3"),
        package_types=("box",),
        movements=((0, 1), (1, 2), (0, 2)),
        initial_stock=[[5, 0, 5], [0, 1, 1], [0, 0, 0]],
        fixed_demand=[[0, 0, 0], [1, 0, 1], [0, 1, 1]],
        variable_demand=np.zeros((3, 3), dtype=np.int64),
        priority=np.ones((3, 3)),
        weight=[1.0, 1.0, 1.0],
        capacity=[10.0],
        cost=[[10.0], [10.0], [10.0]],
    )


@pytest.fixture
def repo_config():
    return REPO_CONFIG


@pytest.fixture
def three_facility():
    return make_three_facility_instance()


@pytest.fixture
def three_facility_file(tmp_path, three_facility):
    path = tmp_path / "three_facility.json"
    save_instance(three_facility, path)
    return path


@pytest.fixture
def tiny_instance():
    return generate_instance(GeneratorParams.from_preset("tiny", rng_seed=7))


@pytest.fixture
def shortfall_instance():
    """Two outlets with variable demand that stock can only partly cover."""
    facilities = range(3)
    return Instance(
        facilities=("W", "A", "B"),
        warehouses=(0,),
        skus=("s1", "s2"),
        package_types=("small", "large"),
        movements=movements_for_policy(facilities, [0], MovementPolicy.GR),
        initial_stock=[[4, 2], [1, 0], [0, 3]],
        fixed_demand=[[0, 0], [1, 1], [0, 1]],
        variable_demand=[[0, 0], [3, 1], [2, 2]],
        priority=[[0.0, 0.0], [1.0, 0.5], [0.25, 1.0]],
        weight=[0.5, 1.0],
        capacity=[2.0, 5.0],
        cost=[[3.0, 6.0]] * 6,
    )
