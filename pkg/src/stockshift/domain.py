import dataclasses
from collections.abc import Iterable, Sequence
from enum import StrEnum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class InstanceError(ValueError):
    pass


class MovementPolicy(StrEnum):
    """
    Redistribution policy, encoded by the set of allowed movements
    """

    CR = "CR"
    """Centralized: every movement starts or ends at a warehouse"""
    DR = "DR"
    """Decentralized: no outlet sends to a warehouse"""
    GR = "GR"
    """General: every ordered pair of distinct facilities"""


class SendRule(StrEnum):
    EXCESS_ONLY = "excess_only"
    """An outlet only sends what it holds beyond its fixed demand"""
    UP_TO_STOCK = "up_to_stock"
    """An outlet may send up to its whole initial stock"""


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(default=1.0, ge=0.0)
    epsilon: float = Field(default=0.0001, ge=0.0)
    delta: float = 1.0
    send_rule: SendRule = SendRule.EXCESS_ONLY
    time_limit: float | None = 300.0
    rng_seed: int = Field(default=0, ge=0, lt=2**64)

    @field_validator("delta")
    @classmethod
    def _delta_in_unit_interval(cls, value: float) -> float:
        if not 0.0 < value <= 1.0:
            msg = f"delta must lie in (0, 1], got {value}"
            raise ValueError(msg)
        return value


@dataclasses.dataclass(frozen=True)
class Instance:
    """Snapshot of a two-echelon network. Arrays are indexed by dense 0-based ids in file order.

    Demands and priorities are stored for every facility; rows of warehouses must be zero
    (demands) and are ignored (priority).
    """

    facilities: tuple[str, ...]
    warehouses: tuple[int, ...]
    skus: tuple[str, ...]
    package_types: tuple[str, ...]
    movements: tuple[tuple[int, int], ...]
    initial_stock: np.ndarray
    fixed_demand: np.ndarray
    variable_demand: np.ndarray
    priority: np.ndarray
    weight: np.ndarray
    capacity: np.ndarray
    cost: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "facilities", tuple(self.facilities))
        object.__setattr__(self, "warehouses", tuple(sorted(int(w) for w in self.warehouses)))
        object.__setattr__(self, "skus", tuple(self.skus))
        object.__setattr__(self, "package_types", tuple(self.package_types))
        object.__setattr__(self, "movements", tuple((int(i), int(j)) for i, j in self.movements))
        for name, dtype in (
            ("initial_stock", np.int64),
            ("fixed_demand", np.int64),
            ("variable_demand", np.int64),
            ("priority", float),
            ("weight", float),
            ("capacity", float),
            ("cost", float),
        ):
            array = np.array(getattr(self, name), dtype=dtype)
            array.flags.writeable = False
            object.__setattr__(self, name, array)
        if self.cost.size == 0:
            cost = np.zeros((len(self.movements), len(self.package_types)))
            cost.flags.writeable = False
            object.__setattr__(self, "cost", cost)

    @property
    def n_facilities(self) -> int:
        return len(self.facilities)

    @property
    def n_skus(self) -> int:
        return len(self.skus)

    @property
    def n_packages(self) -> int:
        return len(self.package_types)

    @property
    def n_movements(self) -> int:
        return len(self.movements)

    @property
    def outlets(self) -> tuple[int, ...]:
        warehouses = set(self.warehouses)
        return tuple(i for i in range(self.n_facilities) if i not in warehouses)

    @property
    def is_warehouse(self) -> np.ndarray:
        mask = np.zeros(self.n_facilities, dtype=bool)
        mask[list(self.warehouses)] = True
        return mask

    @property
    def tails(self) -> np.ndarray:
        return np.array([i for i, _ in self.movements], dtype=np.int64)

    @property
    def heads(self) -> np.ndarray:
        return np.array([j for _, j in self.movements], dtype=np.int64)

    def sku_totals(self) -> np.ndarray:
        return self.initial_stock.sum(axis=0)

    def movement_index(self) -> dict[tuple[int, int], int]:
        return {movement: m for m, movement in enumerate(self.movements)}

    def final_stock(self, transfers: np.ndarray) -> np.ndarray:
        """Final stock FS = IS + inflow - outflow for a transfer matrix of shape (|M|, |S|)."""
        transfers = np.asarray(transfers, dtype=float)
        final = self.initial_stock.astype(float).copy()
        if self.n_movements:
            np.add.at(final, self.heads, transfers)
            np.subtract.at(final, self.tails, transfers)
        return final

    def with_movements(self, movements: Iterable[tuple[int, int]]) -> "Instance":
        """Restrict the movement set to a subset of the current one, keeping its costs."""
        index = self.movement_index()
        movements = tuple((int(i), int(j)) for i, j in movements)
        missing = [m for m in movements if m not in index]
        if missing:
            msg = f"movements {missing[:3]} have no cost data in this instance"
            raise InstanceError(msg)
        rows = [index[m] for m in movements]
        return dataclasses.replace(
            self, movements=movements, cost=self.cost[rows].reshape(len(rows), self.n_packages)
        )

    def with_policy(self, policy: "MovementPolicy") -> "Instance":
        return self.with_movements(movements_for_policy(range(self.n_facilities), self.warehouses, policy))

    def with_scaled_warehouse_costs(self, factor: float) -> "Instance":
        """Multiply the package costs of every movement touching a warehouse by `factor`."""
        if factor < 0:
            msg = f"cost scaling factor must be nonnegative, got {factor}"
            raise InstanceError(msg)
        touches = self.is_warehouse[self.tails] | self.is_warehouse[self.heads] if self.n_movements else []
        cost = self.cost.copy()
        cost[touches] *= factor
        return dataclasses.replace(self, cost=cost)


@dataclasses.dataclass(frozen=True)
class ObjectiveTerms:
    transport: float
    shortfall: float
    tiebreak: float

    @property
    def total(self) -> float:
        return self.transport + self.shortfall + self.tiebreak

    def as_dict(self) -> dict[str, float]:
        return {
            "transport": self.transport,
            "shortfall": self.shortfall,
            "tiebreak": self.tiebreak,
            "total": self.total,
        }


@dataclasses.dataclass(frozen=True)
class Solution:
    """Transfers X (|M| x |S|), package counts Y (|M| x |P|) and derived final stock FS."""

    X: np.ndarray
    Y: np.ndarray
    FS: np.ndarray
    objective: ObjectiveTerms | None = None

    @classmethod
    def from_transfers(cls, instance: Instance, X: np.ndarray, Y: np.ndarray, objective=None) -> "Solution":
        X = np.asarray(X, dtype=float).reshape(instance.n_movements, instance.n_skus)
        Y = np.rint(np.asarray(Y, dtype=float)).astype(np.int64).reshape(instance.n_movements, instance.n_packages)
        return cls(X=X, Y=Y, FS=instance.final_stock(X), objective=objective)

    @property
    def is_integral(self) -> bool:
        return bool(np.all(np.abs(self.X - np.rint(self.X)) <= 1e-6))

    @property
    def package_count(self) -> int:
        return int(self.Y.sum())


@dataclasses.dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


@dataclasses.dataclass
class ValidationReport:
    violations: list[Violation] = dataclasses.field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def add(self, kind: str, detail: str) -> None:
        self.violations.append(Violation(kind, detail))


@dataclasses.dataclass(frozen=True)
class DimensionReport:
    """Closed-form model sizes: shortfall columns and per-outlet send rows are not counted."""

    n_vars: int
    n_int_vars_T: int  # noqa: N815
    n_int_vars_RT: int  # noqa: N815
    n_constraints: int


def movements_for_policy(
    facilities: Sequence[int] | range, warehouses: Iterable[int], policy: MovementPolicy
) -> tuple[tuple[int, int], ...]:
    facilities = list(facilities)
    warehouses = set(warehouses)
    if not facilities:
        msg = "facility set is empty"
        raise InstanceError(msg)
    if not warehouses:
        msg = "warehouse set is empty"
        raise InstanceError(msg)
    if not warehouses.issubset(facilities):
        msg = f"warehouses {sorted(warehouses - set(facilities))} are not facilities"
        raise InstanceError(msg)

    match MovementPolicy(policy):
        case MovementPolicy.CR:
            allowed = lambda i, j: i in warehouses or j in warehouses  # noqa: E731
        case MovementPolicy.DR:
            allowed = lambda i, j: j not in warehouses  # noqa: E731
        case _:
            allowed = lambda i, j: True  # noqa: E731, ARG005

    return tuple((i, j) for i in facilities for j in facilities if i != j and allowed(i, j))


def dimensions_for_sizes(n_skus: int, n_packages: int, n_warehouses: int, n_outlets: int, n_movements: int):
    n_facilities = n_warehouses + n_outlets
    int_t = n_movements * (n_skus + n_packages)
    return DimensionReport(
        n_vars=int_t + n_facilities * n_skus,
        n_int_vars_T=int_t,
        n_int_vars_RT=n_movements * n_packages,
        n_constraints=n_facilities * n_skus + 2 * n_outlets * n_skus + n_movements + n_skus,
    )


def model_dimensions(instance: Instance, policy: MovementPolicy | None = None) -> DimensionReport:
    """Closed-form sizes of T and RT; `policy` overrides the instance's own movement set."""
    if policy is None:
        n_movements = instance.n_movements
    else:
        n_movements = len(movements_for_policy(range(instance.n_facilities), instance.warehouses, policy))
    return dimensions_for_sizes(
        instance.n_skus, instance.n_packages, len(instance.warehouses), len(instance.outlets), n_movements
    )


def validate_instance(instance: Instance) -> ValidationReport:
    report = ValidationReport()
    n_f, n_s, n_p, n_m = instance.n_facilities, instance.n_skus, instance.n_packages, instance.n_movements

    shapes = {
        "initial_stock": (n_f, n_s),
        "fixed_demand": (n_f, n_s),
        "variable_demand": (n_f, n_s),
        "priority": (n_f, n_s),
        "weight": (n_s,),
        "capacity": (n_p,),
        "cost": (n_m, n_p),
    }
    bad_shape = False
    for name, shape in shapes.items():
        actual = getattr(instance, name).shape
        if actual != shape:
            report.add("shape", f"{name} has shape {actual}, expected {shape}")
            bad_shape = True

    if not instance.warehouses:
        report.add("no warehouse", "the warehouse set is empty")
    if any(w < 0 or w >= n_f for w in instance.warehouses):
        report.add("unknown facility", f"warehouses {instance.warehouses} reference unknown facilities")
    if len(set(instance.warehouses)) != len(instance.warehouses):
        report.add("duplicate warehouse", "a warehouse is listed twice")

    seen = set()
    for i, j in instance.movements:
        if i == j:
            report.add("self-loop", f"movement ({i},{j}) is a self-loop")
        if not (0 <= i < n_f and 0 <= j < n_f):
            report.add("unknown facility", f"movement ({i},{j}) references an unknown facility")
        if (i, j) in seen:
            report.add("duplicate movement", f"movement ({i},{j}) appears twice")
        seen.add((i, j))

    if bad_shape:
        return report

    if (instance.initial_stock < 0).any():
        report.add("negative stock", "initial stock has negative entries")
    if (instance.fixed_demand < 0).any() or (instance.variable_demand < 0).any():
        report.add("negative demand", "demand has negative entries")
    if instance.warehouses and (
        instance.fixed_demand[list(instance.warehouses)].any()
        or instance.variable_demand[list(instance.warehouses)].any()
    ):
        report.add("warehouse demand", "demand is only defined on outlets")
    outlets = list(instance.outlets)
    if outlets and ((instance.priority[outlets] < 0).any() or (instance.priority[outlets] > 1).any()):
        report.add("priority out of range", "priorities must lie in [0, 1]")
    if (instance.weight < 0).any():
        report.add("negative weight", "SKU weights must be nonnegative")
    if (instance.capacity <= 0).any():
        report.add("nonpositive capacity", "package capacities must be positive")
    if (instance.cost < 0).any():
        report.add("negative cost", "package costs must be nonnegative")

    supply = instance.initial_stock.sum(axis=0)
    demand = instance.fixed_demand[outlets].sum(axis=0) if outlets else np.zeros(n_s, dtype=np.int64)
    for s in np.flatnonzero(demand > supply):
        report.add(
            "aggregate infeasibility",
            f"SKU {instance.skus[s]}: fixed demand {int(demand[s])} exceeds network stock {int(supply[s])}",
        )
    return report
