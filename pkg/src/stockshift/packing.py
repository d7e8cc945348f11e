import dataclasses
import math

import numpy as np
from loguru import logger

from stockshift.domain import Instance, Solution

WEIGHT_TOL = 1e-9
DEFAULT_EXACT_THRESHOLD = 30
NODE_BUDGET = 200_000


class PackingFault(RuntimeError):
    pass


@dataclasses.dataclass(frozen=True)
class PackingTask:
    movement: tuple[int, int]
    units: np.ndarray
    """Units to ship per SKU"""
    weight: np.ndarray
    capacity: np.ndarray
    cost: np.ndarray
    availability: np.ndarray

    @property
    def total_weight(self) -> float:
        return float(self.units @ self.weight)


@dataclasses.dataclass
class PackedPackage:
    package_type: int
    contents: dict[int, int] = dataclasses.field(default_factory=dict)
    load: float = 0.0

    def put(self, sku: int, weight: float, units: int = 1) -> None:
        self.contents[sku] = self.contents.get(sku, 0) + units
        self.load += weight * units

    def as_dict(self) -> dict:
        return {"type": self.package_type, "contents": [[s, n] for s, n in sorted(self.contents.items())]}


@dataclasses.dataclass(frozen=True)
class PackingResult:
    packages: list[PackedPackage]
    cost: float
    is_exact: bool

    def counts(self, n_types: int) -> np.ndarray:
        counts = np.zeros(n_types, dtype=np.int64)
        for package in self.packages:
            counts[package.package_type] += 1
        return counts


@dataclasses.dataclass(frozen=True)
class PackedSolution:
    solution: Solution
    manifests: dict[tuple[int, int], PackingResult]
    transport_cost: float
    all_exact: bool

    def manifest_document(self) -> list[dict]:
        return [
            {"movement": list(movement), "packages": [p.as_dict() for p in result.packages], "exact": result.is_exact}
            for movement, result in self.manifests.items()
        ]


def default_availability(instance: Instance, units_on_movement: int = 0) -> np.ndarray:
    """Per-type package availability: network weight over the smallest capacity plus |P|, never fewer than the unit count."""
    total_weight = float(instance.weight @ instance.sku_totals())
    base = math.ceil(total_weight / float(instance.capacity.min()) - WEIGHT_TOL) + instance.n_packages
    return np.full(instance.n_packages, max(base, units_on_movement), dtype=np.int64)


def packing_task(instance: Instance, movement: int, units: np.ndarray) -> PackingTask:
    units = np.rint(np.asarray(units, dtype=float)).astype(np.int64)
    return PackingTask(
        movement=instance.movements[movement],
        units=units,
        weight=np.asarray(instance.weight, dtype=float),
        capacity=np.asarray(instance.capacity, dtype=float),
        cost=np.asarray(instance.cost[movement], dtype=float),
        availability=default_availability(instance, int(units.sum())),
    )


def _items(task: PackingTask) -> tuple[list[int], list[int]]:
    """Positive-weight units heaviest first (ties by SKU), and zero-weight units."""
    heavy, light = [], []
    for s in sorted(range(len(task.units)), key=lambda s: (-task.weight[s], s)):
        target = heavy if task.weight[s] > WEIGHT_TOL else light
        target.extend([s] * int(task.units[s]))
    return heavy, light


def _type_order(task: PackingTask) -> list[int]:
    return sorted(range(len(task.capacity)), key=lambda p: (task.cost[p] / task.capacity[p], task.cost[p], p))


def _place_weightless(task: PackingTask, packages: list[PackedPackage], light: list[int]) -> None:
    if not light:
        return
    if not packages:
        cheapest = min(range(len(task.cost)), key=lambda p: (task.cost[p], p))
        packages.append(PackedPackage(cheapest))
    for s in light:
        packages[0].put(s, 0.0)


def _first_fit_decreasing(task: PackingTask, heavy: list[int]) -> list[PackedPackage]:
    order = _type_order(task)
    used = np.zeros(len(task.capacity), dtype=np.int64)
    packages: list[PackedPackage] = []
    for s in heavy:
        w = float(task.weight[s])
        target = next((pk for pk in packages if pk.load + w <= task.capacity[pk.package_type] + WEIGHT_TOL), None)
        if target is None:
            p = next((p for p in order if task.capacity[p] + WEIGHT_TOL >= w and used[p] < task.availability[p]), None)
            if p is None:
                msg = f"unpackable item: SKU {s} on movement {task.movement} fits no available package"
                raise PackingFault(msg)
            used[p] += 1
            target = PackedPackage(p)
            packages.append(target)
        target.put(s, w)

    # repack each package into the cheapest type that still holds its load
    for package in packages:
        options = [
            p
            for p in range(len(task.capacity))
            if task.capacity[p] + WEIGHT_TOL >= package.load
            and (p == package.package_type or used[p] < task.availability[p])
        ]
        best = min(options, key=lambda p: (task.cost[p], p))
        if task.cost[best] < task.cost[package.package_type]:
            used[package.package_type] -= 1
            used[best] += 1
            package.package_type = best
    return packages


class _ExactSearch:
    def __init__(self, task: PackingTask, heavy: list[int], incumbent: list[PackedPackage]):
        self.task = task
        self.heavy = heavy
        self.weights = [float(task.weight[s]) for s in heavy]
        self.suffix = np.concatenate([np.cumsum(self.weights[::-1])[::-1], [0.0]]) if heavy else np.zeros(1)
        self.rate = min(task.cost[p] / task.capacity[p] for p in range(len(task.capacity)))
        self.order = _type_order(task)
        self.best_cost = sum(task.cost[p.package_type] for p in incumbent)
        self.best: list[tuple[int, list[int]]] | None = None
        self.nodes = 0
        self.exhausted = True

    def run(self) -> None:
        self._branch(0, [], [], [], 0.0, np.zeros(len(self.task.capacity), dtype=np.int64), [])

    def _branch(self, k, types, loads, members, cost, used, assigned):
        self.nodes += 1
        if self.nodes > NODE_BUDGET:
            self.exhausted = False
            return
        if k == len(self.heavy):
            if cost < self.best_cost - 1e-12:
                self.best_cost = cost
                self.best = [(t, list(mem)) for t, mem in zip(types, members, strict=True)]
            return
        free = sum(self.task.capacity[t] - load for t, load in zip(types, loads, strict=True))
        if cost + max(0.0, self.suffix[k] - free) * self.rate >= self.best_cost - 1e-12:
            return

        w = self.weights[k]
        # identical units fill packages in nondecreasing index order
        first = assigned[-1] if k and self.heavy[k - 1] == self.heavy[k] else 0
        seen = set()
        for idx in range(first, len(types)):
            t = types[idx]
            if loads[idx] + w > self.task.capacity[t] + WEIGHT_TOL:
                continue
            signature = (t, round(loads[idx], 9))
            if signature in seen:
                continue
            seen.add(signature)
            loads[idx] += w
            members[idx].append(k)
            assigned.append(idx)
            self._branch(k + 1, types, loads, members, cost, used, assigned)
            assigned.pop()
            members[idx].pop()
            loads[idx] -= w
            if not self.exhausted:
                return
        for p in self.order:
            if self.task.capacity[p] + WEIGHT_TOL < w or used[p] >= self.task.availability[p]:
                continue
            types.append(p)
            loads.append(w)
            members.append([k])
            assigned.append(len(types) - 1)
            used[p] += 1
            self._branch(k + 1, types, loads, members, cost + self.task.cost[p], used, assigned)
            used[p] -= 1
            assigned.pop()
            members.pop()
            loads.pop()
            types.pop()
            if not self.exhausted:
                return


def solve_packing(task: PackingTask, exact_threshold: int = DEFAULT_EXACT_THRESHOLD) -> PackingResult:
    """
    Assign the units of one movement to individual packages of minimum total cost.

    Up to `exact_threshold` weighted units are packed exactly by branch-and-bound seeded with
    the first-fit-decreasing packing; larger tasks keep the heuristic packing.
    """
    if len(task.capacity) == 0:
        if task.units.sum():
            msg = f"unpackable item: no package types for movement {task.movement}"
            raise PackingFault(msg)
        return PackingResult([], 0.0, True)
    heavy, light = _items(task)
    too_heavy = [s for s in set(heavy) if task.weight[s] > task.capacity.max() + WEIGHT_TOL]
    if too_heavy:
        msg = f"unpackable item: SKU {min(too_heavy)} weighs more than every package capacity"
        raise PackingFault(msg)

    packages = _first_fit_decreasing(task, heavy)
    is_exact = not heavy
    if heavy and len(heavy) <= exact_threshold:
        search = _ExactSearch(task, heavy, packages)
        search.run()
        if search.best is not None:
            packages = []
            for p, members in search.best:
                package = PackedPackage(p)
                for k in members:
                    package.put(heavy[k], search.weights[k])
                packages.append(package)
        is_exact = search.exhausted
        if not search.exhausted:
            logger.warning(f"exact packing of {task.movement} hit the node budget, keeping the best packing found")

    _place_weightless(task, packages, light)
    cost = float(sum(task.cost[p.package_type] for p in packages))
    return PackingResult(packages, cost, is_exact)


def pack_all(
    instance: Instance, solution: Solution, exact_threshold: int = DEFAULT_EXACT_THRESHOLD
) -> PackedSolution:
    """Pack every movement with positive transfers and rebuild Y from the opened packages. X is kept as is."""
    X = np.rint(np.asarray(solution.X, dtype=float)).astype(np.int64)
    Y = np.zeros((instance.n_movements, instance.n_packages), dtype=np.int64)
    manifests: dict[tuple[int, int], PackingResult] = {}
    for m in range(instance.n_movements):
        if not X[m].any():
            continue
        result = solve_packing(packing_task(instance, m, X[m]), exact_threshold)
        manifests[instance.movements[m]] = result
        Y[m] = result.counts(instance.n_packages)
    transport = float(np.sum(instance.cost * Y)) if instance.n_movements else 0.0
    packed = Solution.from_transfers(instance, X, Y)
    all_exact = all(r.is_exact for r in manifests.values())
    heuristic = sum(1 for r in manifests.values() if not r.is_exact)
    if heuristic:
        logger.warning(f"{heuristic} of {len(manifests)} movements packed heuristically")
    return PackedSolution(packed, manifests, transport, all_exact)
