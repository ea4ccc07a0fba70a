"""Robust planning with stochastic local controllers.

Roadmaps whose edges carry simulated success statistics, maximum-success
and chance-constrained path search over them, and robust discounted MDPs
over Voronoi regions estimated from simulation.
"""

__version__ = "0.1.0"

from .controller import ControllerSpec, run_trials, simulate_transition
from .demos import load_demo
from .estimation import EdgeStats, edge_stats, inv_norm_cdf, lower_bound
from .estimators import RobustMdpPolicy, RobustRoadmapPlanner
from .exceptions import (
    ConvergenceError,
    DisconnectedQuery,
    Infeasible,
    NonContractive,
    PlanningError,
    SamplingBudgetExceeded,
    Unreachable,
)
from .pathing import (
    PlannedPath,
    WeightedDigraph,
    constrained_shortest_path,
    execute_policy,
    max_prob_path,
    milestone_bound,
)
from .roadmap import Roadmap, build, insert_query
from .scenario import DiscSet, Obstacle, PlanarArm, Scenario, WorldSample, collides, sample_world

__all__ = [
    "ControllerSpec", "run_trials", "simulate_transition",
    "EdgeStats", "edge_stats", "inv_norm_cdf", "lower_bound",
    "load_demo",
    "RobustMdpPolicy", "RobustRoadmapPlanner",
    "ConvergenceError", "DisconnectedQuery", "Infeasible", "NonContractive", "PlanningError",
    "SamplingBudgetExceeded", "Unreachable",
    "PlannedPath", "WeightedDigraph", "constrained_shortest_path", "execute_policy", "max_prob_path",
    "milestone_bound",
    "Roadmap", "build", "insert_query",
    "DiscSet", "Obstacle", "PlanarArm", "Scenario", "WorldSample", "collides", "sample_world",
]
