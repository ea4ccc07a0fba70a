"""Discounted MDPs over Voronoi regions, solved robustly.

Regions are the Voronoi cells of a set of milestones.  A trial starts
uniformly inside cell ``i`` and runs a controller until the trajectory's
nearest milestone changes; the new cell ``j`` and the stopping time ``tau``
give a contribution ``alpha ** (tau - 1)`` to the discounted transition
probability ``P[a, i, j]``.  Collisions and exhausted step budgets end in an
implicit absorbing state: they add nothing to ``P`` but their discounted
cost still counts.

Two uncertainty sets are supported on top of the point estimate:

* elementwise intervals (plus an interval on each row's total mass), solved
  by :func:`interval_value_iteration`;
* per-row ellipsoids ``{P_hat + delta * w : w' Omega w <= 1, sum(w) = 0}``,
  solved by :func:`robust_value_iteration_ellipsoidal`.

Actions: for each controller and each neighbor rank ``m``, action
``a = controller_index * n_neighbors + m`` steers toward the ``m``-th
nearest other milestone of the current region.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import stats

from . import rng as rngmod
from .controller import ControllerSpec, advance, draw_trial_noise
from .estimation import inv_norm_cdf
from .exceptions import ConvergenceError, NonContractive, SamplingBudgetExceeded
from .scenario import Scenario, collision_mask

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
ABSORBED = -1
CLAMPED_MASS = 1.0 - 1e-9


def nearest_milestone(milestones, x) -> np.ndarray:
    """Voronoi cell index of each row of ``x`` (ties to the lower index)."""
    d = np.linalg.norm(np.asarray(x, dtype=float)[:, None, :] - milestones[None, :, :], axis=-1)
    return np.argmin(d, axis=1)


def neighbor_table(milestones, n_neighbors: int) -> np.ndarray:
    """``(n, n_neighbors)`` array: other milestones by increasing distance."""
    n = len(milestones)
    out = np.empty((n, n_neighbors), dtype=int)
    ids = np.arange(n)
    for i in range(n):
        d = np.linalg.norm(milestones - milestones[i], axis=1)
        others = ids[ids != i]
        order = np.lexsort((others, d[others]))
        out[i] = others[order[:n_neighbors]]
    return out


@dataclass
class MdpEstimate:
    """Simulated trial records and the point estimates derived from them.

    ``dest``, ``tau`` and ``cost`` have shape ``(n_regions, n_actions, T)``;
    ``dest == -1`` marks an absorbed (failed) trial.  ``targets[i, a]`` is
    the milestone action ``a`` steers to from region ``i``.
    """

    alpha: float
    milestones: np.ndarray
    targets: np.ndarray
    dest: np.ndarray
    tau: np.ndarray
    cost: np.ndarray
    controllers: List[ControllerSpec] = field(default_factory=list)
    absorbing: tuple = ()

    @property
    def n_regions(self) -> int:
        return self.dest.shape[0]

    @property
    def n_actions(self) -> int:
        return self.dest.shape[1]

    @property
    def n_trials(self) -> int:
        return self.dest.shape[2]

    def contributions(self) -> np.ndarray:
        """``(A, n, T, n)`` per-trial vectors ``alpha ** (tau - 1) * e_dest``."""
        n = self.n_regions
        weight = np.where(self.dest >= 0, self.alpha ** (self.tau - 1.0), 0.0)
        onehot = (self.dest[..., None] == np.arange(n)).astype(float)
        return np.moveaxis(weight[..., None] * onehot, 1, 0)

    @property
    def P_hat(self) -> np.ndarray:
        """``(A, n, n)`` discounted transition estimates."""
        return self.contributions().mean(axis=2)

    @property
    def c_hat(self) -> np.ndarray:
        """``(A, n)`` mean discounted costs."""
        return self.cost.mean(axis=2).T

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "kind": "mdp_estimate",
            "alpha": self.alpha,
            "milestones": self.milestones.tolist(),
            "targets": self.targets.tolist(),
            "controllers": [c.to_dict() for c in self.controllers],
            "absorbing": list(self.absorbing),
            "trials": {"dest": self.dest.tolist(), "tau": self.tau.tolist(), "cost": self.cost.tolist()},
            "P_hat": self.P_hat.tolist(),
            "c_hat": self.c_hat.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MdpEstimate":
        if d.get("format") != FORMAT_VERSION or d.get("kind") != "mdp_estimate":
            raise ValueError("not a version-1 MDP estimate document")
        tr = d["trials"]
        return cls(
            alpha=float(d["alpha"]),
            milestones=np.asarray(d["milestones"], dtype=float),
            targets=np.asarray(d["targets"], dtype=int),
            dest=np.asarray(tr["dest"], dtype=int),
            tau=np.asarray(tr["tau"], dtype=int),
            cost=np.asarray(tr["cost"], dtype=float),
            controllers=[ControllerSpec.from_dict(c) for c in d.get("controllers", [])],
            absorbing=tuple(d.get("absorbing", ())),
        )


def _region_starts(scenario, milestones, region, size, gen, max_attempts):
    out = []
    attempts = 0
    while len(out) < size:
        if attempts >= max_attempts:
            raise SamplingBudgetExceeded(
                f"region {region}: {len(out)}/{size} start points after {attempts} draws; "
                "the Voronoi cell is empty or blocked"
            )
        m = min(256, max_attempts - attempts)
        draws = gen.uniform(scenario.lower, scenario.upper, size=(m, scenario.dof))
        attempts += m
        ok = nearest_milestone(milestones, draws) == region
        if ok.any():
            cand = draws[ok]
            free = ~collision_mask(scenario, cand, scenario.nominal_positions)
            out.extend(cand[free][: size - len(out)])
    return np.array(out)


def estimate(scenario: Scenario, milestones, controllers: Sequence[ControllerSpec], alpha: float,
             trials_per_state: int, seed: int = 0, n_neighbors: Optional[int] = None,
             absorbing: Sequence[int] = (), failure_cost: float = 0.0,
             max_attempts: int = 200_000) -> MdpEstimate:
    """Simulate every (region, action) pair ``trials_per_state`` times.

    Regions listed in ``absorbing`` are not simulated: their rows of ``P``
    and their costs are zero.  ``failure_cost`` is charged, discounted by
    ``alpha ** (tau - 1)``, when a trial collides or runs out of steps.
    """
    alpha = float(alpha)
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    T = int(trials_per_state)
    if T < 1:
        raise ValueError("trials_per_state must be >= 1")
    if failure_cost < 0:
        raise ValueError("failure_cost must be >= 0")
    ms = np.asarray(milestones, dtype=float)
    if ms.ndim != 2 or ms.shape[1] != scenario.dof or len(ms) < 2:
        raise ValueError(f"need at least 2 milestones of dimension {scenario.dof}")
    if len(np.unique(ms, axis=0)) != len(ms):
        raise ValueError("milestones must be distinct")
    controllers = list(controllers)
    if not controllers:
        raise ValueError("need at least one controller")
    n = len(ms)
    m = min(4, n - 1) if n_neighbors is None else int(n_neighbors)
    if not 1 <= m <= n - 1:
        raise ValueError("n_neighbors must lie in [1, n_regions - 1]")
    absorbing = tuple(sorted(int(i) for i in absorbing))
    nbrs = neighbor_table(ms, m)
    A = len(controllers) * m
    targets = np.empty((n, A), dtype=int)
    dest = np.full((n, A, T), ABSORBED, dtype=int)
    tau = np.ones((n, A, T), dtype=int)
    cost = np.zeros((n, A, T))
    for i in range(n):
        for ci, ctrl in enumerate(controllers):
            for rank in range(m):
                a = ci * m + rank
                targets[i, a] = nbrs[i, rank]
                if i in absorbing:
                    continue
                starts = _region_starts(scenario, ms, i, T, rngmod.derive(seed, rngmod.MDP_STARTS, i, a),
                                        max_attempts)
                key = rngmod.stream_key(seed, rngmod.MDP_TRIALS, i, a)
                worlds, noise = draw_trial_noise(scenario, ctrl, rngmod.trial_generators(key, range(T)))
                res = advance(
                    scenario, starts, ms[targets[i, a]], worlds, noise,
                    lambda x, idx, i=i: nearest_milestone(ms, x) != i, discount=alpha,
                )
                left = res.stopped
                dest[i, a] = np.where(left, nearest_milestone(ms, res.final), ABSORBED)
                tau[i, a] = res.steps
                penalty = np.where(left, 0.0, failure_cost * alpha ** (res.steps - 1.0))
                cost[i, a] = res.cost + penalty
    return MdpEstimate(alpha, ms, targets, dest, tau, cost, controllers, absorbing)


@dataclass
class IntervalMdp:
    """Elementwise bounds on ``P`` (``(A, n, n)``) and ``c`` (``(A, n)``), plus row-mass bounds."""

    P_lo: np.ndarray
    P_hi: np.ndarray
    c_lo: np.ndarray
    c_hi: np.ndarray
    row_mass_lo: np.ndarray
    row_mass_hi: np.ndarray
    row_mass_hat: Optional[np.ndarray] = None

    @classmethod
    def from_point(cls, P, c) -> "IntervalMdp":
        P = np.asarray(P, dtype=float)
        c = np.asarray(c, dtype=float)
        mass = P.sum(-1)
        return cls(P, P.copy(), c, c.copy(), mass, mass.copy(), mass.copy())

    def validate(self) -> None:
        P_lo, P_hi = self.P_lo, self.P_hi
        if P_lo.ndim != 3 or P_lo.shape != P_hi.shape or P_lo.shape[1] != P_lo.shape[2]:
            raise ValueError("transition bounds must have shape (A, n, n)")
        if self.c_lo.shape != P_lo.shape[:2] or self.c_hi.shape != P_lo.shape[:2]:
            raise ValueError("cost bounds must have shape (A, n)")
        if np.any(P_lo < 0) or np.any(P_hi > 1) or np.any(P_lo > P_hi):
            raise ValueError("need 0 <= P_lo <= P_hi <= 1")
        if np.any(self.c_lo < 0) or np.any(self.c_lo > self.c_hi):
            raise ValueError("need 0 <= c_lo <= c_hi")
        if np.any(self.row_mass_lo > self.row_mass_hi):
            raise ValueError("need row_mass_lo <= row_mass_hi")
        tol = 1e-12
        if np.any(P_lo.sum(-1) > self.row_mass_hi + tol) or np.any(P_hi.sum(-1) < self.row_mass_lo - tol):
            raise ValueError("row-mass bounds are inconsistent with the elementwise bounds")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k).tolist() for k in ("P_lo", "P_hi", "c_lo", "c_hi", "row_mass_lo", "row_mass_hi")}
        d["row_mass_hat"] = None if self.row_mass_hat is None else self.row_mass_hat.tolist()
        return d


def _mean_and_se(x, axis):
    T = x.shape[axis]
    mean = x.mean(axis=axis)
    if T < 2:
        return mean, np.zeros_like(mean)
    return mean, x.std(axis=axis, ddof=1) / math.sqrt(T)


def interval_bounds(est: MdpEstimate, gamma: float = 0.95) -> IntervalMdp:
    """Mean plus or minus ``inv_norm_cdf(gamma)`` standard errors, clipped to the valid range."""
    z = inv_norm_cdf(gamma)
    contrib = est.contributions()  # (A, n, T, n)
    P, se = _mean_and_se(contrib, axis=2)
    c, c_se = _mean_and_se(est.cost.transpose(1, 0, 2), axis=2)
    mass, m_se = _mean_and_se(contrib.sum(-1), axis=2)
    return IntervalMdp(
        P_lo=np.clip(P - z * se, 0.0, 1.0),
        P_hi=np.clip(P + z * se, 0.0, 1.0),
        c_lo=np.maximum(c - z * c_se, 0.0),
        c_hi=np.maximum(c + z * c_se, 0.0),
        row_mass_lo=np.clip(mass - z * m_se, 0.0, 1.0),
        row_mass_hi=np.clip(mass + z * m_se, 0.0, 1.0),
        row_mass_hat=mass,
    )


def interval_expectation(P_lo, P_hi, mass_lo, mass_hi, V, maximize: bool) -> np.ndarray:
    """Extreme of ``P @ V`` over ``P_lo <= P <= P_hi``, ``mass_lo <= sum(P) <= mass_hi``.

    Greedy: start every entry at its lower bound, then pour mass into
    destinations in order of decreasing (maximize) or increasing (minimize)
    value, each up to its cap.  Mass goes in only while it helps the
    objective, except what is needed to reach ``mass_lo``.
    """
    V = np.asarray(V, dtype=float)
    order = np.argsort(-V if maximize else V, kind="stable")
    Vs = V[order]
    caps = (P_hi - P_lo)[..., order]
    base = P_lo.sum(-1)
    helpful = Vs > 0 if maximize else Vs < 0
    cap_helpful = (caps * helpful).sum(-1)
    budget = np.minimum(mass_hi - base, np.maximum(mass_lo - base, cap_helpful))
    budget = np.maximum(budget, 0.0)
    before = np.cumsum(caps, axis=-1) - caps
    fill = np.clip(budget[..., None] - before, 0.0, caps)
    return P_lo @ V + (fill * Vs).sum(-1)


@dataclass
class ValueInterval:
    V_lo: np.ndarray
    V_hi: np.ndarray
    policy_hi: np.ndarray
    iterations: int = 0
    residuals: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"V_lo": self.V_lo.tolist(), "V_hi": self.V_hi.tolist(), "policy": self.policy_hi.tolist(),
                "iterations": self.iterations}


def _contractive_mass_hi(imdp: IntervalMdp) -> np.ndarray:
    mass_hi = np.array(imdp.row_mass_hi, dtype=float)
    effective = np.minimum(mass_hi, imdp.P_hi.sum(-1))
    bad = effective >= 1.0
    if not bad.any():
        return mass_hi
    if imdp.row_mass_hat is not None:
        fixable = bad & (imdp.row_mass_hat < 1.0)
        mass_hi[fixable] = CLAMPED_MASS
        bad &= ~fixable
    if bad.any():
        offenders = [(int(i), int(a)) for a, i in zip(*np.nonzero(bad))]
        raise NonContractive(
            f"worst-case discounted row mass reaches 1 for (state, action) pairs {offenders}; "
            "lower alpha or collect more trials",
            offenders,
        )
    return mass_hi


def interval_value_iteration(imdp: IntervalMdp, tol: float = 1e-8, max_iters: int = 100_000,
                             callback: Optional[Callable[[int, float], None]] = None) -> ValueInterval:
    """Pessimistic and optimistic value bounds of an interval MDP (costs are minimized).

    ``V_hi`` takes the worst transition matrix and the upper costs, ``V_lo``
    the best matrix and the lower costs; both start at 0 and iterate until
    the sup-norm change of both falls below ``tol``.  ``policy_hi`` is the
    argmin action of the pessimistic update, ties to the lower index.
    ``callback(iteration, residual)`` is called after every sweep.
    """
    imdp.validate()
    mass_hi = _contractive_mass_hi(imdp)
    n = imdp.P_lo.shape[1]
    V_lo = np.zeros(n)
    V_hi = np.zeros(n)
    residuals = []
    for it in range(1, int(max_iters) + 1):
        Q_hi = imdp.c_hi + interval_expectation(imdp.P_lo, imdp.P_hi, imdp.row_mass_lo, mass_hi, V_hi, True)
        Q_lo = imdp.c_lo + interval_expectation(imdp.P_lo, imdp.P_hi, imdp.row_mass_lo, mass_hi, V_lo, False)
        new_hi = Q_hi.min(axis=0)
        new_lo = Q_lo.min(axis=0)
        res = float(max(np.max(np.abs(new_hi - V_hi)), np.max(np.abs(new_lo - V_lo))))
        V_hi, V_lo = new_hi, new_lo
        residuals.append(res)
        logger.debug("interval VI sweep %d residual %.3e", it, res)
        if callback is not None:
            callback(it, res)
        if res < tol:
            policy = np.argmin(Q_hi, axis=0)
            return ValueInterval(V_lo, V_hi, policy, it, residuals)
    raise ConvergenceError(f"interval value iteration did not converge in {max_iters} sweeps (residual {res:.3e})")


def value_iteration(P, c, tol: float = 1e-10, max_iters: int = 100_000):
    """Classic value iteration for ``min_a c_a + P_a V``; returns ``(V, policy)``."""
    P = np.asarray(P, dtype=float)
    c = np.asarray(c, dtype=float)
    V = np.zeros(P.shape[1])
    for _ in range(int(max_iters)):
        Q = c + P @ V
        new = Q.min(axis=0)
        if np.max(np.abs(new - V)) < tol:
            return new, np.argmin(c + P @ new, axis=0)
        V = new
    raise ConvergenceError("value iteration did not converge")


# ---------------------------------------------------------------- ellipsoids


def _check_spd(Omega) -> np.ndarray:
    Omega = np.asarray(Omega, dtype=float)
    if not np.allclose(Omega, np.swapaxes(Omega, -1, -2), rtol=1e-10, atol=1e-12):
        raise ValueError("Omega must be symmetric")
    try:
        np.linalg.cholesky(Omega)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Omega is not positive definite") from exc
    return Omega


def _slice_terms(Omega_inv, V):
    """Closed-form maximizer of ``V'w`` over ``{w' Omega w <= 1, sum(w) = 0}``.

    Returns ``(value, w)``: ``value = sqrt(y' Omega^-1 y)`` with
    ``y = V - lambda 1`` and ``lambda = 1'Omega^-1 V / 1'Omega^-1 1``, and the
    maximizing ``w = Omega^-1 y / value`` (zero when ``value == 0``).
    """
    V = np.asarray(V, dtype=float)
    # y does not change when V is shifted by a constant; shifting by V[0]
    # makes a constant V exactly zero instead of leaving rounding residue
    V = V - V[..., :1]
    ones_inv = Omega_inv.sum(-1)
    lam = (Omega_inv @ V).sum(-1) / ones_inv.sum(-1)
    y = V - lam[..., None]
    Oy = np.einsum("...jk,...k->...j", Omega_inv, y)
    q = np.maximum(np.einsum("...j,...j->...", y, Oy), 0.0)
    value = np.sqrt(q)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(value[..., None] > 0, Oy / value[..., None], 0.0)
    return value, w


def ellipsoid_inner_max(p_row, Omega, delta: float, V) -> float:
    """``max p'V`` over the row ellipsoid ``{p_row + delta w : ||w||_Omega <= 1, sum(w) = 0}``.

    The box ``0 <= p <= 1`` is not imposed.
    """
    if not delta >= 0:
        raise ValueError("delta must be >= 0")
    Omega = _check_spd(Omega)
    p_row = np.asarray(p_row, dtype=float)
    V = np.asarray(V, dtype=float)
    if delta == 0:
        return float(p_row @ V)
    value, _ = _slice_terms(np.linalg.inv(Omega), V)
    return float(p_row @ V + delta * value)


def omega_from_samples(Y, eps: float) -> np.ndarray:
    """``T * inv(cov(Y) + eps I)`` for ``T`` sample rows of ``Y``."""
    Y = np.asarray(Y, dtype=float)
    T, n = Y.shape
    if T < 2:
        raise ValueError("need at least 2 trials to fit Omega")
    if not eps > 0:
        raise ValueError("eps must be > 0")
    cov = np.atleast_2d(np.cov(Y, rowvar=False, ddof=1))
    Omega = T * np.linalg.inv(cov + eps * np.eye(n))
    return 0.5 * (Omega + Omega.T)


def ellipsoid_radius(gamma: float, n: int) -> float:
    """Square root of the chi-square ``gamma`` quantile with ``n - 1`` degrees of freedom."""
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    return float(np.sqrt(stats.chi2.ppf(gamma, max(n - 1, 1))))


def fit_omega(dest, tau, n: int, alpha: float, gamma: float = 0.95, eps: float = 1e-6):
    """Metric and radius of the confidence ellipsoid for one (region, action) row.

    Each trial is the vector ``alpha ** (tau - 1) * e_dest`` (zero when
    absorbed); ``Omega`` is ``T`` times the regularized inverse sample
    covariance of those vectors, so the unit ``Omega``-ball is a one
    standard-error ball around the mean.
    """
    dest = np.asarray(dest, dtype=int)
    tau = np.asarray(tau, dtype=float)
    weight = np.where(dest >= 0, alpha ** (tau - 1.0), 0.0)
    Y = weight[:, None] * (dest[:, None] == np.arange(n))
    return omega_from_samples(Y, eps), ellipsoid_radius(gamma, n)


@dataclass
class EllipsoidalMdp:
    """Per-row ellipsoidal uncertainty: centers ``P_hat`` ``(A, n, n)``, metrics ``Omega`` ``(A, n, n, n)``,
    radii ``delta`` ``(A, n)`` and point costs ``c_hat`` ``(A, n)``."""

    P_hat: np.ndarray
    Omega: np.ndarray
    delta: np.ndarray
    c_hat: np.ndarray

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("P_hat", "Omega", "delta", "c_hat")}


def ellipsoidal_bounds(est: MdpEstimate, gamma: float = 0.95, eps: float = 1e-6) -> EllipsoidalMdp:
    n, A = est.n_regions, est.n_actions
    Omega = np.empty((A, n, n, n))
    delta = np.empty((A, n))
    for a in range(A):
        for i in range(n):
            Omega[a, i], delta[a, i] = fit_omega(est.dest[i, a], est.tau[i, a], n, est.alpha, gamma, eps)
    return EllipsoidalMdp(est.P_hat, Omega, delta, est.c_hat)


def robust_value_iteration_ellipsoidal(emdp: EllipsoidalMdp, costs=None, tol: float = 1e-8,
                                       max_iters: int = 100_000,
                                       callback: Optional[Callable[[int, float], None]] = None):
    """Pessimistic value iteration under ellipsoidal row uncertainty.

    Returns ``(V, policy)``.  Every sweep checks that the maximizing rows
    keep ``sum(|P(i, .)|) < 1``; otherwise :class:`NonContractive` is raised.
    A ``RuntimeWarning`` is issued once if a maximizing row leaves
    ``[0, 1]``, since the simplex box is not part of the uncertainty set.
    """
    P = np.asarray(emdp.P_hat, dtype=float)
    c = np.asarray(emdp.c_hat if costs is None else costs, dtype=float)
    delta = np.asarray(emdp.delta, dtype=float)
    if np.any(delta < 0):
        raise ValueError("delta must be >= 0")
    Omega = _check_spd(emdp.Omega)
    Omega_inv = np.linalg.inv(Omega)
    n = P.shape[1]
    V = np.zeros(n)
    warned = False
    for it in range(1, int(max_iters) + 1):
        value, w = _slice_terms(Omega_inv, V)
        Q = c + P @ V + delta * value
        rows = P + delta[..., None] * w
        mass = np.abs(rows).sum(-1)
        if np.any(mass >= 1.0):
            offenders = [(int(i), int(a)) for a, i in zip(*np.nonzero(mass >= 1.0))]
            raise NonContractive(f"worst-case rows have absolute mass >= 1 at (state, action) {offenders}",
                                 offenders)
        if not warned and (np.any(rows < -1e-12) or np.any(rows > 1 + 1e-12)):
            warnings.warn("a worst-case transition row leaves [0, 1]; the ellipsoid is wider than the simplex",
                          RuntimeWarning, stacklevel=2)
            warned = True
        new = Q.min(axis=0)
        res = float(np.max(np.abs(new - V)))
        V = new
        logger.debug("ellipsoidal VI sweep %d residual %.3e", it, res)
        if callback is not None:
            callback(it, res)
        if res < tol:
            value, _ = _slice_terms(Omega_inv, V)
            policy = np.argmin(c + P @ V + delta * value, axis=0)
            return V, policy
    raise ConvergenceError(f"ellipsoidal value iteration did not converge in {max_iters} sweeps")
