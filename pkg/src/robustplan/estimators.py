"""scikit-learn style front ends.

:class:`RobustRoadmapPlanner` and :class:`RobustMdpPolicy` hold their
hyperparameters as constructor arguments (so ``get_params``/``set_params``
and ``clone`` work) and learn everything in ``fit``.  Fitted state lives in
trailing-underscore attributes.  They are thin wrappers: the functional API
in :mod:`robustplan.roadmap`, :mod:`robustplan.pathing` and
:mod:`robustplan.mdp` does the work.
"""

from __future__ import annotations

import numbers
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted, check_scalar

from . import mdp
from . import rng as rngmod
from .controller import ControllerSpec
from .estimation import STANDARD_ERROR, VERBATIM
from .pathing import constrained_shortest_path, execute_policy, max_prob_path
from .roadmap import build, insert_query
from .scenario import Scenario, sample_free_configs


def _check_mode(mode, allowed, name):
    if mode not in allowed:
        raise ValueError(f"{name} must be one of {allowed}, got {mode!r}")


class RobustRoadmapPlanner(BaseEstimator):
    """Roadmap planner under obstacle-position uncertainty.

    Parameters
    ----------
    n : int
        Node-id count; ``n - 1`` milestones are sampled.
    k : int
        Neighbors tried per milestone.
    T : int
        Controller trials per edge.
    gamma : float
        Confidence level of the edge lower bounds.
    bound_mode : {"verbatim", "standard_error"}
    controller : ControllerSpec, optional
        Defaults to a noiseless straight-line controller.
    seed : int
    n_jobs : int, optional
        Passed to joblib for edge simulation; results do not depend on it.

    Attributes
    ----------
    roadmap_ : Roadmap
        The fitted roadmap, without query nodes.
    scenario_ : Scenario
    query_roadmap_ : Roadmap or None
        Roadmap with the most recent query inserted.
    """

    def __init__(self, n: int = 200, k: int = 10, T: int = 100, gamma: float = 0.95,
                 bound_mode: str = VERBATIM, controller: Optional[ControllerSpec] = None,
                 seed: int = 0, n_jobs: Optional[int] = None):
        self.n = n
        self.k = k
        self.T = T
        self.gamma = gamma
        self.bound_mode = bound_mode
        self.controller = controller
        self.seed = seed
        self.n_jobs = n_jobs

    def _controller(self):
        return self.controller if self.controller is not None else ControllerSpec()

    def fit(self, scenario: Scenario, y=None):
        """Sample milestones and estimate every neighbor edge."""
        check_scalar(self.n, "n", numbers.Integral, min_val=2)
        check_scalar(self.k, "k", numbers.Integral, min_val=1)
        check_scalar(self.T, "T", numbers.Integral, min_val=1)
        check_scalar(self.gamma, "gamma", numbers.Real, min_val=0.0, max_val=1.0, include_boundaries="neither")
        _check_mode(self.bound_mode, (VERBATIM, STANDARD_ERROR), "bound_mode")
        rngmod.check_seed(self.seed)
        self.scenario_ = scenario
        self.roadmap_ = build(scenario, self._controller(), self.n, self.k, self.T, self.gamma, self.seed,
                              self.bound_mode, self.n_jobs)
        self.query_roadmap_ = None
        return self

    def plan(self, start=None, goal=None, p_min: Optional[float] = None, S: int = 1024,
             use_p_hat: bool = False):
        """Connect a query and return the planned path.

        Without ``p_min`` this is the maximum-success path; with it, the
        cheapest path whose success bound is at least ``p_min``.
        """
        check_is_fitted(self, "roadmap_")
        s, g, rq = insert_query(self.roadmap_, self.scenario_, self._controller(), start, goal, seed=self.seed,
                                n_jobs=self.n_jobs)
        self.query_roadmap_ = rq
        if p_min is None:
            return max_prob_path(rq, s, g, use_p_hat)
        return constrained_shortest_path(rq, s, g, p_min, S, use_p_hat)

    def execute(self, path, runs: int = 1000, seed: Optional[int] = None):
        """Monte-Carlo check of a path from :meth:`plan`: ``(success_rate, mean_cost)``."""
        check_is_fitted(self, "query_roadmap_")
        if self.query_roadmap_ is None:
            raise ValueError("call plan() before execute()")
        return execute_policy(self.scenario_, self._controller(), self.query_roadmap_, path, runs,
                              self.seed if seed is None else seed)


class RobustMdpPolicy(BaseEstimator):
    """Robust MDP controller selection over Voronoi regions.

    ``fit`` samples ``n_milestones`` free milestones, estimates the
    discounted transition model by simulation and solves it under interval
    or ellipsoidal uncertainty.  ``predict`` maps configurations to the
    action of their region.

    Attributes
    ----------
    milestones_ : ndarray (n_milestones, dof)
    estimate_ : MdpEstimate
    value_ : ndarray
        Pessimistic values (``V_hi`` in interval mode).
    value_lo_ : ndarray or None
        Optimistic values (interval mode only).
    policy_ : ndarray of int
        One action per region.
    targets_ : ndarray
        ``targets_[i, a]`` is the milestone action ``a`` steers to from region ``i``.
    """

    def __init__(self, n_milestones: int = 20, alpha: float = 0.95, trials_per_state: int = 50,
                 gamma: float = 0.95, mode: str = "interval",
                 controllers: Optional[Sequence[ControllerSpec]] = None, n_neighbors: Optional[int] = None,
                 absorbing: Sequence[int] = (), failure_cost: float = 0.0, seed: int = 0):
        self.n_milestones = n_milestones
        self.alpha = alpha
        self.trials_per_state = trials_per_state
        self.gamma = gamma
        self.mode = mode
        self.controllers = controllers
        self.n_neighbors = n_neighbors
        self.absorbing = absorbing
        self.failure_cost = failure_cost
        self.seed = seed

    def fit(self, scenario: Scenario, y=None, milestones=None):
        check_scalar(self.n_milestones, "n_milestones", numbers.Integral, min_val=2)
        check_scalar(self.alpha, "alpha", numbers.Real, min_val=0.0, max_val=1.0, include_boundaries="left")
        check_scalar(self.trials_per_state, "trials_per_state", numbers.Integral, min_val=1)
        check_scalar(self.gamma, "gamma", numbers.Real, min_val=0.0, max_val=1.0, include_boundaries="neither")
        _check_mode(self.mode, ("interval", "ellipsoid"), "mode")
        rngmod.check_seed(self.seed)
        if milestones is None:
            milestones, _ = sample_free_configs(scenario, rngmod.derive(self.seed, rngmod.MDP_MILESTONES),
                                                self.n_milestones)
        controllers = list(self.controllers) if self.controllers is not None else [ControllerSpec()]
        self.estimate_ = mdp.estimate(scenario, milestones, controllers, self.alpha, self.trials_per_state,
                                      self.seed, self.n_neighbors, self.absorbing, self.failure_cost)
        self.milestones_ = self.estimate_.milestones
        self.targets_ = self.estimate_.targets
        if self.mode == "interval":
            vi = mdp.interval_value_iteration(mdp.interval_bounds(self.estimate_, self.gamma))
            self.value_, self.value_lo_, self.policy_ = vi.V_hi, vi.V_lo, vi.policy_hi
        else:
            V, policy = mdp.robust_value_iteration_ellipsoidal(mdp.ellipsoidal_bounds(self.estimate_, self.gamma))
            self.value_, self.value_lo_, self.policy_ = V, None, policy
        return self

    def predict(self, X) -> np.ndarray:
        """Action index for each configuration row of ``X``."""
        check_is_fitted(self, "policy_")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.milestones_.shape[1]:
            raise ValueError(f"X must have shape (m, {self.milestones_.shape[1]})")
        return self.policy_[mdp.nearest_milestone(self.milestones_, X)]

    def predict_target(self, X) -> np.ndarray:
        """Milestone each configuration's chosen action steers toward."""
        regions = mdp.nearest_milestone(self.milestones_, np.asarray(X, dtype=float))
        return self.targets_[regions, self.predict(X)]
