import itertools
import math

import numpy as np
import pytest

from robustplan.controller import ControllerSpec
from robustplan.mdp import IntervalMdp
from robustplan.pathing import WeightedDigraph
from robustplan.scenario import DiscSet, Obstacle, Scenario


def random_digraph(rng, max_nodes=8, p_range=(0.5, 1.0), c_range=(0.0, 10.0), density=0.4, p_one=0.15):
    """Random digraph from the acceptance family; a share of edges gets p = 1 exactly."""
    n = int(rng.integers(2, max_nodes + 1))
    edges = []
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < density:
                p = 1.0 if rng.random() < p_one else float(rng.uniform(*p_range))
                edges.append((i, j, p, float(rng.uniform(*c_range))))
    return WeightedDigraph.from_edges(n, edges)


def simple_paths(graph, start, goal):
    """Every simple start-goal path as (nodes, prob, cost)."""
    adj = {}
    for a, b, p, c in zip(graph.src, graph.dst, graph.p, graph.c):
        adj.setdefault(int(a), []).append((int(b), float(p), float(c)))
    out = []

    def walk(node, seen, prob, cost, nodes):
        if node == goal:
            out.append((list(nodes), prob, cost))
            return
        for v, p, c in adj.get(node, []):
            if v not in seen:
                seen.add(v)
                nodes.append(v)
                walk(v, seen, prob * p, cost + c, nodes)
                nodes.pop()
                seen.discard(v)

    walk(start, {start}, 1.0, 0.0, [start])
    return out


def path_product(graph, nodes):
    lookup = {(int(a), int(b)): float(p) for a, b, p in zip(graph.src, graph.dst, graph.p)}
    return math.prod(lookup[(u, v)] for u, v in zip(nodes[:-1], nodes[1:]))


def empty_box(dof_pairs=1, radius=0.02, **kw):
    kw.setdefault("endgame_radius", 0.01)
    kw.setdefault("step_size", 0.01)
    return Scenario(
        lower=[0.0] * (2 * dof_pairs), upper=[1.0] * (2 * dof_pairs), robot=DiscSet((radius,) * dof_pairs),
        obstacles=[], start=[0.1, 0.1] * dof_pairs if dof_pairs == 1 else [0.1, 0.1, 0.9, 0.9],
        goal=[0.9, 0.9] * dof_pairs if dof_pairs == 1 else [0.9, 0.9, 0.1, 0.1], **kw,
    )


@pytest.fixture
def free_scenario():
    return empty_box()


@pytest.fixture
def blocked_scenario():
    """A certain wall across the middle with one gap at the top."""
    return Scenario(
        lower=[0, 0], upper=[1, 1], robot=DiscSet((0.02,)),
        obstacles=[Obstacle.rect((0.5, 0.4), 0.1, 0.8)],
        start=[0.2, 0.2], goal=[0.8, 0.2], endgame_radius=0.01, step_size=0.01, max_steps=400,
    )


@pytest.fixture
def noiseless():
    return ControllerSpec()


def all_vertices(lo, hi, m_lo, m_hi):
    """Vertices of {lo <= x <= hi, m_lo <= sum(x) <= m_hi}: all but one coordinate at a bound."""
    n = len(lo)
    verts = []
    for corner in itertools.product(*[(lo[i], hi[i]) for i in range(n)]):
        x = np.array(corner, dtype=float)
        if m_lo - 1e-12 <= x.sum() <= m_hi + 1e-12:
            verts.append(x)
    for free in range(n):
        others = [i for i in range(n) if i != free]
        for corner in itertools.product(*[(lo[i], hi[i]) for i in others]):
            for m in (m_lo, m_hi):
                x = np.empty(n)
                x[others] = corner
                x[free] = m - sum(corner)
                if lo[free] - 1e-12 <= x[free] <= hi[free] + 1e-12:
                    verts.append(x)
    return verts


def random_interval_mdp(rng, n=3, A=2, max_mass=0.97):
    """Random interval MDP whose upper row masses stay at or below ``max_mass``."""
    P_hat = rng.dirichlet(np.ones(n + 1), size=(A, n))[..., :n] * rng.uniform(0.5, min(0.95, max_mass - 0.02), (A, n, 1))
    half = rng.uniform(0, 0.08, (A, n, n))
    P_lo = np.clip(P_hat - half, 0, 1)
    P_hi = np.clip(P_hat + half, 0, 1)
    mass = P_hat.sum(-1)
    m_half = rng.uniform(0, 0.05, (A, n))
    m_lo = np.clip(mass - m_half, 0, 1)
    m_hi = np.minimum(np.minimum(mass + m_half, P_hi.sum(-1)), max_mass)
    m_lo = np.maximum(m_lo, P_lo.sum(-1))
    c = rng.uniform(0, 3, (A, n))
    c_half = rng.uniform(0, 0.5, (A, n))
    return IntervalMdp(P_lo, P_hi, np.maximum(c - c_half, 0), c + c_half, m_lo, m_hi)


def vertex_value_iteration(imdp, maximize, tol=1e-12):
    A, n, _ = imdp.P_lo.shape
    verts = [[np.array(all_vertices(imdp.P_lo[a, i], imdp.P_hi[a, i], imdp.row_mass_lo[a, i],
                                    imdp.row_mass_hi[a, i])) for i in range(n)] for a in range(A)]
    c = imdp.c_hi if maximize else imdp.c_lo
    V = np.zeros(n)
    for _ in range(100_000):
        Q = np.empty((A, n))
        for a in range(A):
            for i in range(n):
                vals = verts[a][i] @ V
                Q[a, i] = c[a, i] + (vals.max() if maximize else vals.min())
        new = Q.min(axis=0)
        if np.max(np.abs(new - V)) < tol:
            return new
        V = new
    raise AssertionError


def random_search_inner_max(p, Omega, delta, V, rng, samples=200_000):
    n = len(p)
    w = rng.normal(size=(samples, n))
    w -= w.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,jk,ik->i", w, Omega, w))
    w /= norms[:, None]
    return float(p @ V + delta * (w @ V).max())


# ------------------------------------------------------ acceptance reporting

_ACCEPTANCE_KEY = pytest.StashKey[list]()


class CriterionRecorder:
    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.line = None

    def check(self, ok, detail=""):
        """Record the verdict and fail the test when ``ok`` is false."""
        verdict = "PASS" if ok else "FAIL"
        self.line = f"{verdict} criterion {self.number}: {self.title}" + (f" ({detail})" if detail else "")
        print(self.line)
        assert ok, self.line


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("acceptance")
    rec = CriterionRecorder(*marker.args)
    yield rec
    if rec.line is None:
        rec.line = f"FAIL criterion {rec.number}: {rec.title} (raised before reaching a verdict)"
    request.config.stash.setdefault(_ACCEPTANCE_KEY, []).append((rec.number, rec.line))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
