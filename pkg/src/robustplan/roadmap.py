"""Milestone graphs annotated with controller success statistics.

Node ids follow the query convention: sampled milestones are ``1 .. n-1``,
the query start is ``0`` and the query goal is ``n``.  Rows 0 and ``n`` of
:attr:`Roadmap.milestones` are NaN until :func:`insert_query` fills them.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from . import rng as rngmod
from .controller import ControllerSpec, run_trials_many
from .estimation import VERBATIM, EdgeStats, edge_stats, lower_bound
from .exceptions import DisconnectedQuery
from .scenario import Scenario, collides, sample_free_configs

FORMAT_VERSION = 1


@dataclass
class Roadmap:
    """Directed roadmap.

    Attributes
    ----------
    milestones : ndarray of shape (n + 1, dof)
    edges : dict mapping ``(from_id, to_id)`` to :class:`EdgeStats`
        Only edges with ``p_lower > 0`` are stored, so every edge has at
        least one successful trial and a cost estimate.
    build_params : dict
        ``n, k, T, gamma, seed, mode`` used to build the graph.
    """

    milestones: np.ndarray
    edges: Dict[Tuple[int, int], EdgeStats] = field(default_factory=dict)
    build_params: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        """Id of the goal slot; there are ``n + 1`` node ids in total."""
        return len(self.milestones) - 1

    @property
    def n_nodes(self) -> int:
        return len(self.milestones)

    @property
    def dof(self) -> int:
        return self.milestones.shape[1]

    @property
    def has_query(self) -> bool:
        return bool(np.all(np.isfinite(self.milestones[[0, self.n]])))

    def sampled_ids(self) -> np.ndarray:
        return np.arange(1, self.n)

    def successors(self, i: int) -> List[int]:
        return sorted(j for (a, j) in self.edges if a == i)

    def edge_arrays(self, use_p_hat: bool = False):
        """``(src, dst, p, c)`` arrays sorted by ``(src, dst)``."""
        keys = sorted(self.edges)
        src = np.array([k[0] for k in keys], dtype=int)
        dst = np.array([k[1] for k in keys], dtype=int)
        stats = [self.edges[k] for k in keys]
        p = np.array([s.p_hat if use_p_hat else s.p_lower for s in stats], dtype=float)
        c = np.array([s.c_hat for s in stats], dtype=float)
        return src, dst, p, c

    def edge_probabilities(self) -> np.ndarray:
        return np.array([self.edges[k].p_lower for k in sorted(self.edges)])

    def check_provenance(self) -> None:
        """Recompute every edge's bound from its stored counts; raise on mismatch."""
        for key, s in self.edges.items():
            p = lower_bound(s.T, s.T_success, s.gamma, s.mode)
            if abs(p - s.p_lower) > 1e-12:
                raise ValueError(f"edge {key}: stored p_lower {s.p_lower} != recomputed {p}")
            if not (s.p_lower > 0 and s.c_hat is not None):
                raise ValueError(f"edge {key} should not be stored")

    def to_dict(self) -> dict:
        n = self.n
        start = self.milestones[0]
        goal = self.milestones[n]
        edges = []
        for (i, j) in sorted(self.edges):
            rec = {"from": i, "to": j}
            rec.update(self.edges[(i, j)].to_dict())
            edges.append(rec)
        return {
            "format": FORMAT_VERSION,
            "kind": "roadmap",
            "dof": self.dof,
            "build_params": dict(self.build_params),
            "milestones": self.milestones[1:n].tolist(),
            "start": start.tolist() if np.all(np.isfinite(start)) else None,
            "goal": goal.tolist() if np.all(np.isfinite(goal)) else None,
            "edges": edges,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Roadmap":
        if d.get("format") != FORMAT_VERSION or d.get("kind") != "roadmap":
            raise ValueError("not a version-1 roadmap document")
        dof = int(d["dof"])
        inner = np.asarray(d["milestones"], dtype=float).reshape(-1, dof)
        nan = np.full((1, dof), np.nan)
        start = nan if d.get("start") is None else np.asarray(d["start"], dtype=float).reshape(1, dof)
        goal = nan if d.get("goal") is None else np.asarray(d["goal"], dtype=float).reshape(1, dof)
        milestones = np.vstack([start, inner, goal])
        edges = {(int(e["from"]), int(e["to"])): EdgeStats.from_dict(e) for e in d["edges"]}
        return cls(milestones, edges, dict(d.get("build_params", {})))


def nearest_neighbors(roadmap: Roadmap, config, k: int, exclude: Optional[int] = None) -> List[int]:
    """Ids of the ``k`` sampled milestones closest to ``config``.

    Sorted by Euclidean distance, ties to the lower id.  Query nodes (0 and
    ``n``) are never returned.  Fewer than ``k`` ids come back when the
    roadmap is smaller.
    """
    if int(k) < 1:
        raise ValueError("k must be >= 1")
    ids = roadmap.sampled_ids()
    if exclude is not None:
        ids = ids[ids != exclude]
    d = np.linalg.norm(roadmap.milestones[ids] - np.asarray(config, dtype=float), axis=1)
    order = np.lexsort((ids, d))
    return [int(i) for i in ids[order[: int(k)]]]


EDGE_BATCH = 32


def _evaluate(scenario, controller, roadmap, pairs, T, gamma, mode, seed, purpose):
    out = []
    M = roadmap.milestones
    for s in range(0, len(pairs), EDGE_BATCH):
        batch = pairs[s:s + EDGE_BATCH]
        src = [i for i, _ in batch]
        dst = [j for _, j in batch]
        results = run_trials_many(scenario, controller, M[src], M[dst], T, seed, batch, purpose)
        out.extend((key, edge_stats(o, gamma, mode)) for key, o in zip(batch, results))
    return out


def _evaluate_pairs(scenario, controller, roadmap, pairs, T, gamma, mode, seed, purpose, n_jobs):
    if n_jobs in (None, 1) or len(pairs) < 2:
        return _evaluate(scenario, controller, roadmap, pairs, T, gamma, mode, seed, purpose)
    chunks = [pairs[s::8] for s in range(8)]
    parts = Parallel(n_jobs=n_jobs)(
        delayed(_evaluate)(scenario, controller, roadmap, c, T, gamma, mode, seed, purpose) for c in chunks if c
    )
    return sorted((item for part in parts for item in part), key=lambda kv: kv[0])


def build(scenario: Scenario, controller: ControllerSpec, n: int, k: int = 10, T: int = 100,
          gamma: float = 0.95, seed: int = 0, mode: str = VERBATIM, n_jobs: Optional[int] = None) -> Roadmap:
    """Sample ``n - 1`` free milestones and connect each to its ``k`` nearest neighbors.

    Every neighbor pair is simulated in both directions (each ordered pair
    once).  Edges whose lower bound is 0 are dropped.
    """
    n, k, T = int(n), int(k), int(T)
    if n < 2:
        raise ValueError("n must be >= 2")
    if k < 1:
        raise ValueError("k must be >= 1")
    if T < 1:
        raise ValueError("T must be >= 1")
    rngmod.check_seed(seed)
    configs, _ = sample_free_configs(scenario, rngmod.derive(seed, rngmod.MILESTONES), n - 1)
    nan = np.full((1, scenario.dof), np.nan)
    roadmap = Roadmap(
        np.vstack([nan, configs, nan]),
        {},
        {"n": n, "k": k, "T": T, "gamma": float(gamma), "seed": int(seed), "mode": mode},
    )
    pairs = set()
    for i in roadmap.sampled_ids():
        for j in nearest_neighbors(roadmap, roadmap.milestones[i], k, exclude=int(i)):
            pairs.add((int(i), j))
            pairs.add((j, int(i)))
    results = _evaluate_pairs(scenario, controller, roadmap, sorted(pairs), T, gamma, mode, seed,
                              rngmod.EDGE_TRIALS, n_jobs)
    roadmap.edges = {key: s for key, s in results if s.p_lower > 0}
    return roadmap


def insert_query(roadmap: Roadmap, scenario: Scenario, controller: ControllerSpec, start=None, goal=None,
                 k: Optional[int] = None, T: Optional[int] = None, gamma: Optional[float] = None,
                 seed: int = 0, mode: Optional[str] = None, n_jobs: Optional[int] = None):
    """Add the query endpoints as nodes ``0`` (start) and ``n`` (goal).

    The start gets outgoing trials to its ``k`` nearest milestones and the
    goal incoming trials from its ``k`` nearest.  Parameters default to the
    roadmap's build parameters and the endpoints to the scenario's.

    Returns
    -------
    (start_id, goal_id, Roadmap)
        A new roadmap; the input is left untouched.

    Raises
    ------
    DisconnectedQuery
        If an endpoint collides in the nominal world or no connection trial
        succeeds.
    """
    bp = roadmap.build_params
    k = int(bp.get("k", 10) if k is None else k)
    T = int(bp.get("T", 100) if T is None else T)
    gamma = float(bp.get("gamma", 0.95) if gamma is None else gamma)
    mode = bp.get("mode", VERBATIM) if mode is None else mode
    start = scenario.check_config(scenario.start if start is None else start, "start")
    goal = scenario.check_config(scenario.goal if goal is None else goal, "goal")
    for name, x in (("start", start), ("goal", goal)):
        if collides(scenario, x):
            raise DisconnectedQuery(f"{name} configuration collides with a nominal obstacle")
    n = roadmap.n
    # a previous query's endpoint edges are replaced
    edges = {key: s for key, s in roadmap.edges.items() if key[0] not in (0, n) and key[1] not in (0, n)}
    out = Roadmap(roadmap.milestones.copy(), edges, copy.deepcopy(roadmap.build_params))
    out.milestones[0] = start
    out.milestones[n] = goal
    pairs = [(0, j) for j in nearest_neighbors(out, start, k)]
    pairs += [(i, n) for i in nearest_neighbors(out, goal, k)]
    results = _evaluate_pairs(scenario, controller, out, sorted(pairs), T, gamma, mode, seed,
                              rngmod.QUERY_TRIALS, n_jobs)
    for key, s in results:
        if s.p_lower > 0:
            out.edges[key] = s
    if not any(key[0] == 0 for key in out.edges):
        raise DisconnectedQuery("no successful connection out of the start configuration")
    if not any(key[1] == n for key in out.edges):
        raise DisconnectedQuery("no successful connection into the goal configuration")
    return 0, n, out
