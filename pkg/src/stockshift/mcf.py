"""
Minimum-cost flow with arc lower bounds and signed costs, and the per-SKU rounding network
"""

import dataclasses
import heapq
import math
from enum import StrEnum

import numpy as np
from loguru import logger

from stockshift.domain import Instance
from stockshift.util import snap_integral

COST_SCALE = 10**6


class FlowInfeasibleError(RuntimeError):
    pass


class FlowStatus(StrEnum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


class ArcKind(StrEnum):
    TRANSFER = "transfer"
    """Facility-row i to facility-col j; carries the rounded transfer of one movement"""
    SEND = "send"
    """Balance node to facility-row: total units sent"""
    RECEIVE = "receive"
    """Facility-col to balance node: total units received"""
    BALANCE = "balance"
    """Between a facility balance node and the SKU node, oriented by the sign of the net balance"""
    OTHER = "other"


@dataclasses.dataclass(frozen=True)
class Arc:
    tail: int
    head: int
    lower: int
    upper: int
    cost: float
    kind: ArcKind = ArcKind.OTHER
    key: object = None


@dataclasses.dataclass
class FlowNetwork:
    node_names: list[str] = dataclasses.field(default_factory=list)
    supply: list[int] = dataclasses.field(default_factory=list)
    arcs: list[Arc] = dataclasses.field(default_factory=list)

    @property
    def n_nodes(self) -> int:
        return len(self.node_names)

    def add_node(self, name: str = "", supply: int = 0) -> int:
        """Add a node; positive `supply` is a source, negative a sink."""
        self.node_names.append(name or f"n{len(self.node_names)}")
        self.supply.append(int(supply))
        return len(self.node_names) - 1

    def add_arc(
        self,
        tail: int,
        head: int,
        lower: int = 0,
        upper: int = 0,
        cost: float = 0.0,
        kind: ArcKind = ArcKind.OTHER,
        key: object = None,
    ) -> int:
        self.arcs.append(Arc(int(tail), int(head), int(lower), int(upper), float(cost), kind, key))
        return len(self.arcs) - 1

    def arcs_of_kind(self, kind: ArcKind) -> list[int]:
        return [k for k, arc in enumerate(self.arcs) if arc.kind == kind]

    def net_outflow(self, flows: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n_nodes, dtype=np.int64)
        for arc, flow in zip(self.arcs, flows, strict=True):
            out[arc.tail] += flow
            out[arc.head] -= flow
        return out


@dataclasses.dataclass(frozen=True)
class FlowResult:
    status: FlowStatus
    flows: np.ndarray
    cost: float

    @property
    def is_optimal(self) -> bool:
        return self.status is FlowStatus.OPTIMAL


class _Residual:
    def __init__(self, n: int):
        self.head: list[int] = []
        self.cap: list[int] = []
        self.cost: list[int] = []
        self.adjacent: list[list[int]] = [[] for _ in range(n)]

    def add(self, u: int, v: int, cap: int, cost: int) -> int:
        edge = len(self.head)
        self.head += [v, u]
        self.cap += [cap, 0]
        self.cost += [cost, -cost]
        self.adjacent[u].append(edge)
        self.adjacent[v].append(edge + 1)
        return edge


def _successive_shortest_paths(res: _Residual, source: int, sink: int, required: int) -> int:
    """Push up to `required` units from source to sink along reduced-cost shortest paths."""
    n = len(res.adjacent)
    potential = [0] * n
    sent = 0
    while sent < required:
        dist = [math.inf] * n
        via = [-1] * n
        dist[source] = 0
        queue = [(0, source)]
        while queue:
            d, u = heapq.heappop(queue)
            if d > dist[u]:
                continue
            for edge in res.adjacent[u]:
                if res.cap[edge] <= 0:
                    continue
                v = res.head[edge]
                nd = d + res.cost[edge] + potential[u] - potential[v]
                if nd < dist[v]:
                    dist[v] = nd
                    via[v] = edge
                    heapq.heappush(queue, (nd, v))
        if dist[sink] == math.inf:
            break
        for v in range(n):
            potential[v] += min(dist[v], dist[sink])

        push = required - sent
        v = sink
        while v != source:
            edge = via[v]
            push = min(push, res.cap[edge])
            v = res.head[edge ^ 1]
        v = sink
        while v != source:
            edge = via[v]
            res.cap[edge] -= push
            res.cap[edge ^ 1] += push
            v = res.head[edge ^ 1]
        sent += push
    return sent


def solve_min_cost_flow(net: FlowNetwork) -> FlowResult:
    """
    Integral minimum-cost flow. Lower bounds are shifted out, negative-cost arcs are
    saturated up front so every residual cost starts nonnegative, and the remaining
    imbalance is routed by successive shortest paths with node potentials.
    """
    n_arcs = len(net.arcs)
    empty = FlowResult(FlowStatus.INFEASIBLE, np.zeros(n_arcs, dtype=np.int64), math.inf)
    if sum(net.supply) != 0:
        logger.trace("flow network supplies do not balance")
        return empty
    if any(arc.lower > arc.upper for arc in net.arcs):
        return empty

    n = net.n_nodes
    excess = list(net.supply)
    base = np.zeros(n_arcs, dtype=np.int64)
    res = _Residual(n + 2)
    edges = []
    for k, arc in enumerate(net.arcs):
        scaled = round(arc.cost * COST_SCALE)
        capacity = arc.upper - arc.lower
        base[k] = arc.lower
        if scaled < 0:
            base[k] = arc.upper
            edges.append((res.add(arc.head, arc.tail, capacity, -scaled), -1))
        else:
            edges.append((res.add(arc.tail, arc.head, capacity, scaled), 1))
        excess[arc.tail] -= int(base[k])
        excess[arc.head] += int(base[k])

    source, sink = n, n + 1
    required = 0
    for v in range(n):
        if excess[v] > 0:
            res.add(source, v, excess[v], 0)
            required += excess[v]
        elif excess[v] < 0:
            res.add(v, sink, -excess[v], 0)

    if required and _successive_shortest_paths(res, source, sink, required) < required:
        return empty

    flows = base.copy()
    for k, (edge, direction) in enumerate(edges):
        # flow on the forward residual edge equals the capacity accumulated on its twin
        flows[k] += direction * res.cap[edge ^ 1]
    cost = float(sum(arc.cost * int(flow) for arc, flow in zip(net.arcs, flows, strict=True)))
    return FlowResult(FlowStatus.OPTIMAL, flows, cost)


@dataclasses.dataclass
class RoundingNetwork:
    """Circulation whose integral solutions are the controlled roundings of one SKU's transfers."""

    network: FlowNetwork
    sku: int
    transfer_arcs: list[int]
    sent: np.ndarray
    received: np.ndarray
    balance: np.ndarray

    def transfers(self, result: FlowResult) -> np.ndarray:
        return np.array([result.flows[k] for k in self.transfer_arcs], dtype=np.int64)

    def solve(self) -> np.ndarray:
        result = solve_min_cost_flow(self.network)
        if not result.is_optimal:
            msg = f"rounding network of SKU {self.sku} has no feasible integral flow"
            raise FlowInfeasibleError(msg)
        return self.transfers(result)


def _interval(value: float) -> tuple[int, int]:
    return math.floor(value), math.ceil(value)


def build_rounding_network(instance: Instance, sku: int, x_rel: np.ndarray, c_hat: np.ndarray) -> RoundingNetwork:
    """
    Nodes per facility: a send row, a receive column and a balance node, plus one SKU node.
    Transfer arcs keep each X within its floor/ceil; send and receive arcs do the same for
    row and column sums; the balance arc does it for the net balance received minus sent.
    """
    x_rel = snap_integral(np.maximum(np.asarray(x_rel, dtype=float), 0.0))
    n_f = instance.n_facilities
    sent = np.zeros(n_f)
    received = np.zeros(n_f)
    if instance.n_movements:
        np.add.at(sent, instance.tails, x_rel)
        np.add.at(received, instance.heads, x_rel)
    sent, received = snap_integral(sent), snap_integral(received)
    balance = snap_integral(received - sent)

    net = FlowNetwork()
    rows = [net.add_node(f"row_{i}") for i in range(n_f)]
    cols = [net.add_node(f"col_{i}") for i in range(n_f)]
    bals = [net.add_node(f"bal_{i}") for i in range(n_f)]
    hub = net.add_node(f"sku_{sku}")

    transfer_arcs = []
    for m, (i, j) in enumerate(instance.movements):
        lo, up = _interval(x_rel[m])
        transfer_arcs.append(net.add_arc(rows[i], cols[j], lo, up, float(c_hat[m]), ArcKind.TRANSFER, m))
    for i in range(n_f):
        lo, up = _interval(sent[i])
        net.add_arc(bals[i], rows[i], lo, up, 0.0, ArcKind.SEND, i)
        lo, up = _interval(received[i])
        net.add_arc(cols[i], bals[i], lo, up, 0.0, ArcKind.RECEIVE, i)
        lo, up = _interval(abs(balance[i]))
        if balance[i] >= 0:
            net.add_arc(bals[i], hub, lo, up, 0.0, ArcKind.BALANCE, i)
        else:
            net.add_arc(hub, bals[i], lo, up, 0.0, ArcKind.BALANCE, i)
    return RoundingNetwork(net, sku, transfer_arcs, sent, received, balance)
