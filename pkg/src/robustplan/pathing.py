"""Global optimizers over a roadmap.

:func:`max_prob_path` maximizes the product of edge success probabilities
by running Dijkstra on ``-log p``.  :func:`constrained_shortest_path`
minimizes path cost subject to ``prod p >= p_min`` with a dynamic program
over ``S + 1`` probability levels ``q(s) = p_min ** (s / S)``: an edge with
probability ``p`` consumes ``S * log(p) / log(p_min)`` levels, rounded up,
so every reconstructed path is feasible.  Probability-one edges consume no
level and are relaxed to a fixpoint inside each level.

Both optimizers accept a :class:`~robustplan.roadmap.Roadmap` or a
:class:`WeightedDigraph`, and break ties toward lower node ids.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import rng as rngmod
from .controller import ControllerSpec, _simulate
from .exceptions import Infeasible, Unreachable


@dataclass
class WeightedDigraph:
    """Plain directed graph with per-edge success probability and cost."""

    n_nodes: int
    src: np.ndarray
    dst: np.ndarray
    p: np.ndarray
    c: np.ndarray

    @classmethod
    def from_edges(cls, n_nodes: int, edges) -> "WeightedDigraph":
        edges = sorted((int(i), int(j), float(p), float(c)) for i, j, p, c in edges)
        arr = list(zip(*edges)) if edges else [(), (), (), ()]
        return cls(
            int(n_nodes),
            np.array(arr[0], dtype=int),
            np.array(arr[1], dtype=int),
            np.array(arr[2], dtype=float),
            np.array(arr[3], dtype=float),
        )

    def edge_arrays(self, use_p_hat: bool = False):
        return self.src, self.dst, self.p, self.c


@dataclass
class PlannedPath:
    node_ids: List[int]
    total_cost: Optional[float]
    success_lower_bound: float

    def to_dict(self) -> dict:
        return {"path": list(self.node_ids), "cost": self.total_cost,
                "success_lower_bound": self.success_lower_bound}


def _arrays(graph, use_p_hat):
    src, dst, p, c = graph.edge_arrays(use_p_hat)
    if np.any(~(p > 0)) or np.any(p > 1):
        raise ValueError("edge probabilities must lie in (0, 1]")
    if np.any(~(c >= 0)):
        raise ValueError("edge costs must be nonnegative")
    return src, dst, p, c


def _check_node(graph, i, name):
    if not 0 <= int(i) < graph.n_nodes:
        raise ValueError(f"{name} {i} is not a node id")
    return int(i)


def _path_summary(node_ids, lookup) -> PlannedPath:
    prob = 1.0
    cost = 0.0
    for u, v in zip(node_ids[:-1], node_ids[1:]):
        p, c = lookup[(u, v)]
        prob *= p
        cost += c
    return PlannedPath(list(node_ids), cost, prob)


def _lookup(src, dst, p, c):
    return {(int(a), int(b)): (float(pp), float(cc)) for a, b, pp, cc in zip(src, dst, p, c)}


def dijkstra(n_nodes, src, dst, weight, start):
    """Label-setting shortest paths from ``start``; ties go to the lower predecessor id.

    Returns ``(dist, pred)`` with ``inf`` and ``-1`` for unreachable nodes.
    """
    adj = [[] for _ in range(n_nodes)]
    for a, b, w in zip(src, dst, weight):
        adj[a].append((int(b), float(w)))
    dist = [math.inf] * n_nodes
    pred = [-1] * n_nodes
    done = [False] * n_nodes
    dist[start] = 0.0
    heap = [(0.0, start)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, w in adj[u]:
            if done[v]:
                continue
            nd = d + w
            if nd < dist[v] or (nd == dist[v] and u < pred[v]):
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, pred


def _walk_back(pred, start, goal):
    path = [goal]
    while path[-1] != start:
        path.append(pred[path[-1]])
    return path[::-1]


def max_prob_path(graph, start_id: int, goal_id: int, use_p_hat: bool = False) -> PlannedPath:
    """Path maximizing the product of edge probabilities.

    Raises :class:`Unreachable` when the goal cannot be reached.
    """
    start = _check_node(graph, start_id, "start_id")
    goal = _check_node(graph, goal_id, "goal_id")
    src, dst, p, c = _arrays(graph, use_p_hat)
    dist, pred = dijkstra(graph.n_nodes, src, dst, -np.log(p), start)
    if math.isinf(dist[goal]):
        raise Unreachable(f"node {goal} is unreachable from node {start}")
    return _path_summary(_walk_back(pred, start, goal), _lookup(src, dst, p, c))


def min_cost_path(graph, start_id: int, goal_id: int) -> PlannedPath:
    """Cheapest path ignoring success probabilities."""
    start = _check_node(graph, start_id, "start_id")
    goal = _check_node(graph, goal_id, "goal_id")
    src, dst, p, c = _arrays(graph, False)
    dist, pred = dijkstra(graph.n_nodes, src, dst, c, start)
    if math.isinf(dist[goal]):
        raise Unreachable(f"node {goal} is unreachable from node {start}")
    return _path_summary(_walk_back(pred, start, goal), _lookup(src, dst, p, c))


COPY = -1


@dataclass
class ValueTable:
    """Constrained DP table.

    ``V[s, j]`` is the least cost of reaching ``j`` from the start with
    success probability at least ``p_min ** (s / S)``; ``inf`` marks
    unreachable states.  ``back_node[s, j]`` is the predecessor node, or
    ``COPY`` when the value was inherited from level ``s - 1``;
    ``back_level[s, j]`` is the level the predecessor was read from.
    """

    V: np.ndarray
    back_level: np.ndarray
    back_node: np.ndarray
    p_min: float
    S: int
    start: int

    def path_to(self, goal: int, level: Optional[int] = None) -> List[int]:
        s = self.S if level is None else int(level)
        j = int(goal)
        if math.isinf(self.V[s, j]):
            raise Infeasible(f"node {goal} is not reachable at level {s}")
        path = [j]
        while j != self.start:
            k = self.back_node[s, j]
            if k == COPY:
                s -= 1
            else:
                s, j = int(self.back_level[s, j]), int(k)
                path.append(j)
        return path[::-1]


def level_drop(p, p_min: float, S: int) -> np.ndarray:
    """Whole levels consumed by each edge: ``ceil(S * log p / log p_min)``.

    ``floor(s - x) == s - ceil(x)`` for integer ``s``; the right side avoids
    the rounding of ``s - x`` in floating point.
    """
    ratio = np.log(np.asarray(p, dtype=float)) / math.log(p_min)
    return np.ceil(S * ratio).astype(np.int64)


def value_table(graph, start_id: int, p_min: float, S: int = 1024, use_p_hat: bool = False) -> ValueTable:
    """Fill the ``(S + 1) x n_nodes`` constrained-cost table from ``start_id``."""
    p_min = float(p_min)
    if not 0.0 < p_min < 1.0:
        raise ValueError("p_min must lie in (0, 1)")
    S = int(S)
    if S < 1:
        raise ValueError("S must be a positive integer")
    start = _check_node(graph, start_id, "start_id")
    src, dst, p, c = _arrays(graph, use_p_hat)
    N = graph.n_nodes
    drop = level_drop(p, p_min, S)
    # edges into the start never improve its zero label
    keep = dst != start
    src, dst, c, drop = src[keep], dst[keep], c[keep], drop[keep]

    zero = drop == 0
    zero_adj = [[] for _ in range(N)]
    for a, b, w in zip(src[zero], dst[zero], c[zero]):
        zero_adj[a].append((int(b), float(w)))
    has_zero = bool(zero.any())
    pos = ~zero & (drop <= S)
    e_src, e_dst, e_c, e_drop = src[pos], dst[pos], c[pos], drop[pos]

    V = np.full((S + 1, N), np.inf)
    back_level = np.full((S + 1, N), -1, dtype=np.int64)
    back_node = np.full((S + 1, N), COPY, dtype=np.int64)
    for s in range(S + 1):
        if s == 0:
            V[0, start] = 0.0
        else:
            V[s] = V[s - 1]
            back_level[s] = s - 1
            usable = e_drop <= s
            if usable.any():
                lv = s - e_drop[usable]
                u = e_src[usable]
                v = e_dst[usable]
                cand = V[lv, u] + e_c[usable]
                finite = np.isfinite(cand)
                if finite.any():
                    lv, u, v, cand = lv[finite], u[finite], v[finite], cand[finite]
                    order = np.lexsort((u, cand, v))
                    v_sorted = v[order]
                    first = np.concatenate([[True], v_sorted[1:] != v_sorted[:-1]])
                    best = order[first]
                    better = cand[best] < V[s, v[best]]
                    best = best[better]
                    V[s, v[best]] = cand[best]
                    back_level[s, v[best]] = lv[best]
                    back_node[s, v[best]] = u[best]
        if has_zero:
            _relax_within_level(V[s], back_level[s], back_node[s], zero_adj, s)
    return ValueTable(V, back_level, back_node, p_min, S, start)


def _relax_within_level(row, back_level, back_node, zero_adj, s):
    """Dijkstra over probability-one edges, seeded with the level's current labels."""
    heap = [(row[j], j) for j in np.flatnonzero(np.isfinite(row))]
    heapq.heapify(heap)
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done or d > row[u]:
            continue
        done.add(u)
        for v, w in zero_adj[u]:
            nd = d + w
            if nd < row[v]:
                row[v] = nd
                back_level[v] = s
                back_node[v] = u
                heapq.heappush(heap, (nd, v))


def constrained_shortest_path(graph, start_id: int, goal_id: int, p_min: float, S: int = 1024,
                              use_p_hat: bool = False) -> PlannedPath:
    """Least-cost path whose success probability is at least ``p_min``.

    Raises :class:`Infeasible` (carrying the best achievable probability)
    when the DP finds no path at the top level.
    """
    goal = _check_node(graph, goal_id, "goal_id")
    table = value_table(graph, start_id, p_min, S, use_p_hat)
    if math.isinf(table.V[table.S, goal]):
        try:
            best = max_prob_path(graph, start_id, goal, use_p_hat).success_lower_bound
        except Unreachable:
            best = 0.0
        raise Infeasible(f"no path reaches node {goal} with success probability >= {p_min}", best)
    src, dst, p, c = _arrays(graph, use_p_hat)
    return _path_summary(table.path_to(goal), _lookup(src, dst, p, c))


def execute_policy(scenario, controller: ControllerSpec, roadmap, path: PlannedPath, runs: int, seed: int = 0):
    """Simulate the controller leg by leg along ``path``.

    Each leg starts at its milestone and draws a fresh obstacle placement,
    matching how edge statistics were estimated.  A run succeeds when every
    leg does.

    Returns
    -------
    (success_rate, mean_cost)
        ``mean_cost`` averages the summed leg costs of successful runs and is
        ``None`` if no run succeeded.
    """
    runs = int(runs)
    if runs < 1:
        raise ValueError("runs must be >= 1")
    ids = list(path.node_ids)
    for u, v in zip(ids[:-1], ids[1:]):
        if (u, v) not in roadmap.edges:
            raise ValueError(f"({u}, {v}) is not a roadmap edge")
    alive = np.ones(runs, dtype=bool)
    cost = np.zeros(runs)
    for leg, (u, v) in enumerate(zip(ids[:-1], ids[1:])):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        key = rngmod.stream_key(seed, rngmod.POLICY_RUNS, leg, u, v)
        outcomes = _simulate(scenario, controller, roadmap.milestones[u], roadmap.milestones[v],
                             rngmod.trial_generators(key, idx))
        for r, o in zip(idx, outcomes):
            if o.success:
                cost[r] += o.cost
            else:
                alive[r] = False
    rate = float(alive.mean())
    mean_cost = float(cost[alive].mean()) if alive.any() else None
    return rate, mean_cost


def milestone_bound(epsilon: float, alpha: float, beta: float, gamma: float) -> int:
    """Milestone count sufficient for an expansive free space.

    ``2 * ceil(8 ln(8 / (eps alpha gamma)) / (eps alpha) + 3 / beta) + 2``;
    every argument must lie in ``(0, 1]``.
    """
    vals = {"epsilon": epsilon, "alpha": alpha, "beta": beta, "gamma": gamma}
    for name, v in vals.items():
        if not 0.0 < float(v) <= 1.0:
            raise ValueError(f"{name} must lie in (0, 1], got {v}")
    ea = float(epsilon) * float(alpha)
    inner = 8.0 * math.log(8.0 / (ea * float(gamma))) / ea + 3.0 / float(beta)
    return 2 * math.ceil(inner) + 2
