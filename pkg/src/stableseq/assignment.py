"""Exact solver for the path-matching transportation problem.

Given a cost matrix over (row, column) pairs with ``n_rows >= n_cols``, find
x minimizing ``sum c[p,q] x[p,q]`` subject to ``sum_q x[p,q] = 1`` for every
row and ``sum_p x[p,q] >= 1`` for every column. The column lower bounds are
removed by the standard reduction (subtract the mandatory unit from the arc,
credit the endpoints' balances) and the residual problem is solved as a
min-cost flow by successive shortest paths with Johnson potentials. Unit
augmentations keep the flow, and hence the returned matching, integral.
"""

from __future__ import annotations

import numpy as np


class _FlowNet:
    def __init__(self, n_nodes: int):
        self.n = n_nodes
        self.head: list[int] = []
        self.cap: list[int] = []
        self.cost: list[float] = []
        self.adj: list[list[int]] = [[] for _ in range(n_nodes)]

    def add_edge(self, u: int, v: int, cap: int, cost: float) -> int:
        idx = len(self.head)
        self.head.append(v)
        self.cap.append(cap)
        self.cost.append(cost)
        self.adj[u].append(idx)
        self.head.append(u)
        self.cap.append(0)
        self.cost.append(-cost)
        self.adj[v].append(idx + 1)
        return idx


def _dijkstra(net: _FlowNet, source: int, potential: np.ndarray):
    n = net.n
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    prev_edge = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    for _ in range(n):
        u = -1
        best = np.inf
        for v in range(n):
            if not done[v] and dist[v] < best:
                best = dist[v]
                u = v
        if u < 0:
            break
        done[u] = True
        for e in net.adj[u]:
            if net.cap[e] <= 0:
                continue
            v = net.head[e]
            if done[v]:
                continue
            nd = dist[u] + net.cost[e] + potential[u] - potential[v]
            if nd < dist[v]:
                dist[v] = nd
                prev_edge[v] = e
    return dist, prev_edge


def solve_matching(cost: np.ndarray) -> tuple[float, np.ndarray]:
    """Optimal row-to-column matching covering every column at least once.

    Returns ``(objective, x)`` with ``x`` an integer 0/1 matrix. Requires
    ``cost.shape[0] >= cost.shape[1]`` and non-negative finite costs.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n_rows, n_cols = cost.shape
    if n_rows < n_cols:
        raise ValueError("cost matrix must have at least as many rows as columns")
    if n_cols == 0:
        raise ValueError("cost matrix must have at least one column")
    if not np.all(np.isfinite(cost)) or np.any(cost < 0):
        raise ValueError("costs must be finite and non-negative")

    source = 0
    row0 = 1
    col0 = 1 + n_rows
    sink = 1 + n_rows + n_cols
    net = _FlowNet(sink + 1)

    for p in range(n_rows):
        net.add_edge(source, row0 + p, 1, 0.0)
    pq_edges = np.empty((n_rows, n_cols), dtype=np.int64)
    for p in range(n_rows):
        for q in range(n_cols):
            pq_edges[p, q] = net.add_edge(row0 + p, col0 + q, 1, float(cost[p, q]))
    for q in range(n_cols):
        # lower bound 1 already credited to the balances below
        net.add_edge(col0 + q, sink, n_rows - 1, 0.0)

    balance = np.zeros(net.n, dtype=np.int64)
    balance[source] = n_rows
    balance[col0 : col0 + n_cols] -= 1
    balance[sink] -= n_rows - n_cols

    potential = np.zeros(net.n)
    while balance[source] > 0:
        dist, prev_edge = _dijkstra(net, source, potential)
        # nearest reachable deficit node
        target = -1
        best = np.inf
        for v in range(net.n):
            if balance[v] < 0 and dist[v] < best:
                best = dist[v]
                target = v
        if target < 0:
            raise RuntimeError("matching flow is infeasible (should not happen)")
        finite = np.isfinite(dist)
        potential[finite] += dist[finite]
        # bottleneck along the path
        push = balance[source]
        v = target
        while v != source:
            e = int(prev_edge[v])
            push = min(push, net.cap[e])
            v = net.head[e ^ 1]
        push = min(push, -balance[target])
        v = target
        while v != source:
            e = int(prev_edge[v])
            net.cap[e] -= push
            net.cap[e ^ 1] += push
            v = net.head[e ^ 1]
        balance[source] -= push
        balance[target] += push

    x = np.zeros((n_rows, n_cols), dtype=np.int64)
    for p in range(n_rows):
        for q in range(n_cols):
            e = int(pq_edges[p, q])
            if net.cap[e ^ 1] > 0:  # reverse capacity == flow sent
                x[p, q] = 1
    objective = 0.0
    for p in range(n_rows):
        for q in range(n_cols):
            if x[p, q]:
                objective += cost[p, q]
    return objective, x
