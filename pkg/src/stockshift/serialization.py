"""
JSON documents for instances, solutions and package manifests
"""

import json
import re
from os import PathLike
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field

from stockshift.domain import Instance, InstanceError, ObjectiveTerms, Solution

_COST_KEY = re.compile(r"^\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)$")


class InstanceDocument(BaseModel):
    facilities: list[str]
    warehouses: list[int]
    skus: list[str]
    package_types: list[str]
    movements: list[tuple[int, int]]
    initial_stock: list[list[int]]
    fixed_demand: list[list[int]]
    variable_demand: list[list[int]]
    priority: list[list[float]]
    weight: list[float]
    capacity: list[float]
    cost: dict[str, float] = Field(default_factory=dict)


class SolutionDocument(BaseModel):
    instance: str | None = None
    X: list[tuple[int, int, float]] = Field(default_factory=list)
    Y: list[tuple[int, int, int]] = Field(default_factory=list)
    objective_terms: dict[str, float] | None = None


def instance_to_document(instance: Instance) -> InstanceDocument:
    cost = {}
    for m, (i, j) in enumerate(instance.movements):
        for p in range(instance.n_packages):
            cost[f"({i},{j},{p})"] = float(instance.cost[m, p])
    return InstanceDocument(
        facilities=list(instance.facilities),
        warehouses=list(instance.warehouses),
        skus=list(instance.skus),
        package_types=list(instance.package_types),
        movements=[tuple(m) for m in instance.movements],
        initial_stock=instance.initial_stock.tolist(),
        fixed_demand=instance.fixed_demand.tolist(),
        variable_demand=instance.variable_demand.tolist(),
        priority=instance.priority.tolist(),
        weight=instance.weight.tolist(),
        capacity=instance.capacity.tolist(),
        cost=cost,
    )


def document_to_instance(document: InstanceDocument) -> Instance:
    n_f, n_s, n_p = len(document.facilities), len(document.skus), len(document.package_types)
    index = {tuple(m): k for k, m in enumerate(document.movements)}
    cost = np.zeros((len(document.movements), n_p))
    for key, value in document.cost.items():
        match = _COST_KEY.match(key)
        if match is None:
            msg = f"malformed cost key {key!r}, expected '(i,j,p)'"
            raise InstanceError(msg)
        i, j, p = (int(g) for g in match.groups())
        if (i, j) not in index or p >= n_p:
            msg = f"cost key {key!r} does not name a movement and package type"
            raise InstanceError(msg)
        cost[index[(i, j)], p] = value

    def matrix(rows, dtype):
        array = np.array(rows, dtype=dtype)
        return array.reshape(n_f, n_s) if array.size == n_f * n_s else array

    return Instance(
        facilities=tuple(document.facilities),
        warehouses=tuple(document.warehouses),
        skus=tuple(document.skus),
        package_types=tuple(document.package_types),
        movements=tuple(tuple(m) for m in document.movements),
        initial_stock=matrix(document.initial_stock, np.int64),
        fixed_demand=matrix(document.fixed_demand, np.int64),
        variable_demand=matrix(document.variable_demand, np.int64),
        priority=matrix(document.priority, float),
        weight=np.array(document.weight, dtype=float),
        capacity=np.array(document.capacity, dtype=float),
        cost=cost,
    )


def dumps_instance(instance: Instance) -> str:
    # sort_keys keeps the output byte-identical for identical instances
    return json.dumps(instance_to_document(instance).model_dump(mode="json"), sort_keys=True, indent=1) + "\n"


def loads_instance(text: str | bytes) -> Instance:
    return document_to_instance(InstanceDocument.model_validate_json(text))


def save_instance(instance: Instance, path: PathLike | str) -> None:
    Path(path).write_text(dumps_instance(instance), encoding="utf-8")


def load_instance(path: PathLike | str) -> Instance:
    return loads_instance(Path(path).read_text(encoding="utf-8"))


def solution_to_document(solution: Solution, instance_path: str | None = None) -> SolutionDocument:
    x_rows, x_cols = np.nonzero(np.abs(solution.X) > 1e-9)
    y_rows, y_cols = np.nonzero(solution.Y)
    return SolutionDocument(
        instance=instance_path,
        X=[(int(m), int(s), float(solution.X[m, s])) for m, s in zip(x_rows, x_cols, strict=True)],
        Y=[(int(m), int(p), int(solution.Y[m, p])) for m, p in zip(y_rows, y_cols, strict=True)],
        objective_terms=solution.objective.as_dict() if solution.objective else None,
    )


def document_to_solution(document: SolutionDocument, instance: Instance) -> Solution:
    X = np.zeros((instance.n_movements, instance.n_skus))
    Y = np.zeros((instance.n_movements, instance.n_packages), dtype=np.int64)
    msg = "solution references movements, SKUs or package types outside the instance"
    if any(m < 0 or k < 0 for m, k, _ in (*document.X, *document.Y)):
        raise InstanceError(msg)
    try:
        for m, s, value in document.X:
            X[m, s] = value
        for m, p, value in document.Y:
            Y[m, p] = value
    except IndexError as exc:
        raise InstanceError(msg) from exc
    objective = None
    if document.objective_terms:
        terms = document.objective_terms
        objective = ObjectiveTerms(terms["transport"], terms["shortfall"], terms["tiebreak"])
    return Solution.from_transfers(instance, X, Y, objective)


def save_solution(solution: Solution, path: PathLike | str, instance_path: str | None = None) -> None:
    document = solution_to_document(solution, instance_path)
    Path(path).write_text(json.dumps(document.model_dump(mode="json"), indent=1) + "\n", encoding="utf-8")


def load_solution(path: PathLike | str, instance: Instance | None = None) -> tuple[Solution, Instance]:
    """Load a solution; the instance is read from the path stored in the document unless given."""
    document = SolutionDocument.model_validate_json(Path(path).read_text(encoding="utf-8"))
    if instance is None:
        if document.instance is None:
            msg = f"{path} does not reference an instance file"
            raise InstanceError(msg)
        instance_path = Path(document.instance)
        if not instance_path.is_absolute() and not instance_path.exists():
            instance_path = Path(path).parent / instance_path
        instance = load_instance(instance_path)
    return document_to_solution(document, instance), instance
