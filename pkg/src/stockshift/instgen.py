"""
Seeded synthetic instances.

Each generation step draws from its own PCG64 stream spawned from one ``SeedSequence``,
in this order: weights, capacities, costs, initial stock, fixed demand, variable demand,
priorities. The same parameters therefore always give the same instance.
"""

import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from stockshift.domain import Instance, MovementPolicy, movements_for_policy

STREAMS = ("weights", "capacities", "costs", "stock", "fixed_demand", "variable_demand", "priority")


class GeneratorError(ValueError):
    pass


class GeneratorParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    num_refs: int = Field(gt=0)
    num_packs: int = Field(gt=0)
    num_outlets: int = Field(gt=0)
    total_stock: int = Field(gt=0)
    movement_policy: MovementPolicy = MovementPolicy.GR
    ware_pack_cost_factor: float = Field(default=1.0, ge=0.0)
    rng_seed: int = Field(default=0, ge=0)

    num_warehouses: int = Field(default=1, gt=0)
    warehouses_prop: float = Field(default=0.4, ge=0.0, le=1.0)
    min_weight: float = Field(default=0.0, ge=0.0)
    max_weight: float = 1.0
    min_cost: float = Field(default=10.0, ge=0.0)
    max_cost: float = 100.0
    m_factor: float = Field(default=0.5, ge=0.0, le=1.0)
    mp_factor: float = Field(default=0.8, ge=0.0, le=1.0)
    min_cap: float = Field(default=2.0, gt=0.0)
    max_cap: float = 10.0
    min_fix_dem_factor: float = Field(default=0.5, ge=0.0, le=1.0)
    max_fix_dem_factor: float = Field(default=1.0, ge=0.0, le=1.0)
    min_var_dem_factor: float = Field(default=0.25, ge=0.0)
    max_var_dem_factor: float = Field(default=0.5, ge=0.0)
    min_priority: float = Field(default=1.0, ge=0.0, le=1.0)
    max_priority: float = Field(default=1.0, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _ordered_ranges(self):
        for low, high in (
            ("min_weight", "max_weight"),
            ("min_cost", "max_cost"),
            ("min_cap", "max_cap"),
            ("min_fix_dem_factor", "max_fix_dem_factor"),
            ("min_var_dem_factor", "max_var_dem_factor"),
            ("min_priority", "max_priority"),
        ):
            if getattr(self, low) > getattr(self, high):
                msg = f"{low} must not exceed {high}"
                raise ValueError(msg)
        return self

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "GeneratorParams":
        if name not in PRESETS:
            msg = f"unknown preset {name!r}, expected one of {', '.join(PRESETS)}"
            raise GeneratorError(msg)
        try:
            return cls(**{**PRESETS[name], **overrides})
        except ValidationError as exc:
            raise GeneratorError(str(exc)) from exc


def _grid_preset(k: int) -> dict:
    size = 80 + 20 * (k - 1)
    return {"num_refs": size, "num_packs": 2, "num_outlets": size, "total_stock": size * size * 10}


PRESETS: dict[str, dict] = {
    "tiny": {"num_refs": 2, "num_packs": 1, "num_outlets": 2, "total_stock": 4},
    "desk": {"num_refs": 5, "num_packs": 2, "num_outlets": 5, "total_stock": 100},
    "small": {"num_refs": 10, "num_packs": 2, "num_outlets": 10, "total_stock": 1000},
    "medium": {"num_refs": 30, "num_packs": 4, "num_outlets": 30, "total_stock": 9000},
    "large": {"num_refs": 100, "num_packs": 4, "num_outlets": 100, "total_stock": 100000},
    **{f"g{k}": _grid_preset(k) for k in range(1, 11)},
}


def partition(total: int, weights) -> np.ndarray:
    """
    Split a nonnegative integer `total` proportionally to `weights` (largest remainder).
    Every share is the floor or ceiling of its quota; leftover units go to the largest
    fractional parts, lower index first on ties.
    """
    weights = np.asarray(weights, dtype=float)
    if total < 0:
        msg = f"cannot partition a negative total {total}"
        raise GeneratorError(msg)
    if (weights < 0).any() or weights.sum() <= 0:
        msg = "partition weights must be nonnegative with a positive sum"
        raise GeneratorError(msg)
    shape = weights.shape
    flat = weights.ravel()
    quota = total * flat / flat.sum()
    shares = np.floor(quota).astype(np.int64)
    leftover = int(total - shares.sum())
    if leftover > 0:
        order = np.argsort(-(quota - shares), kind="stable")
        shares[order[:leftover]] += 1
    return shares.reshape(shape)


def gen_costs(
    movements: tuple[tuple[int, int], ...],
    is_warehouse: np.ndarray,
    capacity: np.ndarray,
    params: GeneratorParams,
    rng: np.random.Generator,
) -> np.ndarray:
    max_cap = float(np.max(capacity))
    ini_min_cost = params.min_cost + (params.max_cost - params.min_cost) * params.m_factor * params.mp_factor
    ini_cost = ini_min_cost + (params.max_cost - ini_min_cost) * np.asarray(capacity) / max_cap

    cost = np.zeros((len(movements), len(capacity)))
    for m, (i, j) in enumerate(movements):
        m_cost = rng.uniform(params.m_factor, 1.0)
        for p in range(len(capacity)):
            move_pack_factor = rng.uniform(params.mp_factor, 1.0)
            cost[m, p] = move_pack_factor * m_cost * ini_cost[p]
            if is_warehouse[i] or is_warehouse[j]:
                cost[m, p] *= params.ware_pack_cost_factor
    return cost


def gen_initial_stock(
    n_skus: int, warehouses: list[int], outlets: list[int], params: GeneratorParams, rng: np.random.Generator
) -> np.ndarray:
    n_facilities = len(warehouses) + len(outlets)
    draws = rng.uniform(0.0, 1.0, size=(n_facilities, n_skus))
    # rounding first keeps Ceil from jumping on float noise such as 1000 * 0.4
    t_stock_ware = math.ceil(round(params.total_stock * params.warehouses_prop, 9))
    t_stock_outlets = params.total_stock - t_stock_ware

    stock = np.zeros((n_facilities, n_skus), dtype=np.int64)
    stock[warehouses] = partition(t_stock_ware, draws[warehouses])
    stock[outlets] = partition(t_stock_outlets, draws[outlets])
    return stock


def gen_fixed_demand(
    initial_stock: np.ndarray, outlets: list[int], params: GeneratorParams, rng: np.random.Generator
) -> np.ndarray:
    n_facilities, n_skus = initial_stock.shape
    demand = np.zeros((n_facilities, n_skus), dtype=np.int64)
    for s in range(n_skus):
        draws = rng.uniform(0.0, 1.0, size=len(outlets))
        t_stock = int(initial_stock[:, s].sum())
        low, high = t_stock * params.min_fix_dem_factor, t_stock * params.max_fix_dem_factor
        rand_stock = min(t_stock, round(rng.uniform(low, high)))
        demand[outlets, s] = partition(rand_stock, draws)
    return demand


def gen_variable_demand(
    n_facilities: int, n_skus: int, outlets: list[int], params: GeneratorParams, rng: np.random.Generator
) -> np.ndarray:
    draws = rng.uniform(0.0, 1.0, size=(len(outlets), n_skus))
    low = params.total_stock * params.min_var_dem_factor
    high = params.total_stock * params.max_var_dem_factor
    rand_stock = round(rng.uniform(low, high))
    demand = np.zeros((n_facilities, n_skus), dtype=np.int64)
    demand[outlets] = partition(rand_stock, draws)
    return demand


def gen_priorities(
    n_facilities: int, n_skus: int, outlets: list[int], params: GeneratorParams, rng: np.random.Generator
) -> np.ndarray:
    priority = np.zeros((n_facilities, n_skus))
    priority[outlets] = rng.uniform(params.min_priority, params.max_priority, size=(len(outlets), n_skus))
    return priority


def generate_instance(params: GeneratorParams) -> Instance:
    streams = dict(
        zip(
            STREAMS,
            (np.random.Generator(np.random.PCG64(seq)) for seq in np.random.SeedSequence(params.rng_seed).spawn(7)),
            strict=True,
        )
    )
    warehouses = list(range(params.num_warehouses))
    outlets = list(range(params.num_warehouses, params.num_warehouses + params.num_outlets))
    n_facilities = len(warehouses) + len(outlets)
    is_warehouse = np.zeros(n_facilities, dtype=bool)
    is_warehouse[warehouses] = True
    movements = movements_for_policy(range(n_facilities), warehouses, params.movement_policy)

    weight = streams["weights"].uniform(params.min_weight, params.max_weight, size=params.num_refs)
    capacity = streams["capacities"].uniform(params.min_cap, params.max_cap, size=params.num_packs)
    cost = gen_costs(movements, is_warehouse, capacity, params, streams["costs"])
    stock = gen_initial_stock(params.num_refs, warehouses, outlets, params, streams["stock"])
    fixed = gen_fixed_demand(stock, outlets, params, streams["fixed_demand"])
    variable = gen_variable_demand(n_facilities, params.num_refs, outlets, params, streams["variable_demand"])
    priority = gen_priorities(n_facilities, params.num_refs, outlets, params, streams["priority"])

    return Instance(
        facilities=tuple([f"W{k}" for k in range(len(warehouses))] + [f"O{k + 1}" for k in range(len(outlets))]),
        warehouses=tuple(warehouses),
        skus=tuple(f"S{s + 1}" for s in range(params.num_refs)),
        package_types=tuple(f"P{p + 1}" for p in range(params.num_packs)),
        movements=movements,
        initial_stock=stock,
        fixed_demand=fixed,
        variable_demand=variable,
        priority=priority,
        weight=weight,
        capacity=capacity,
        cost=cost,
    )
