"""Local controllers as generative models.

A controller steers from one configuration toward another in fixed-length
steps.  Each trial draws one obstacle placement at its start (obstacles stay
put for the whole trial) and, when ``actuation_noise_std > 0``, a Gaussian
perturbation per step.  Collisions are checked at every discrete step
configuration, so ``step_size`` should not exceed the smallest obstacle
feature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from . import rng as rngmod
from .scenario import Scenario, collision_mask

STRAIGHT_LINE = "straight_line"
CONTROLLER_KINDS = (STRAIGHT_LINE,)


@dataclass(frozen=True)
class ControllerSpec:
    kind: str = STRAIGHT_LINE
    actuation_noise_std: float = 0.0

    def __post_init__(self):
        if self.kind not in CONTROLLER_KINDS:
            raise ValueError(f"unknown controller kind {self.kind!r}")
        if not self.actuation_noise_std >= 0:
            raise ValueError("actuation_noise_std must be >= 0")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "actuation_noise_std": self.actuation_noise_std}

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "ControllerSpec":
        d = d or {}
        return cls(d.get("kind", STRAIGHT_LINE), float(d.get("actuation_noise_std", 0.0)))


@dataclass(frozen=True)
class TrialOutcome:
    success: bool
    cost: float
    steps: int


@dataclass
class BatchResult:
    """Per-trial arrays from :func:`advance`."""

    stopped: np.ndarray  # reached the stop condition
    collided: np.ndarray
    cost: np.ndarray  # accumulated (possibly discounted) path length
    steps: np.ndarray
    final: np.ndarray  # configuration where each trial ended


def draw_trial_noise(scenario: Scenario, controller: ControllerSpec, generators):
    """Obstacle placements and per-step actuation noise, one generator per trial.

    ``generators`` is iterated once; each is consumed in a fixed order
    (obstacles, then all step noise) regardless of how long its trial lasts.
    Returns ``(worlds, noise)`` with ``noise`` ``None`` for a noiseless
    controller.
    """
    nominal = scenario.nominal_positions
    std = scenario.position_std
    sigma = controller.actuation_noise_std
    worlds, noise = [], []
    for g in generators:
        worlds.append(nominal + std * g.standard_normal(nominal.shape))
        if sigma > 0:
            noise.append(sigma * g.standard_normal((scenario.max_steps, scenario.dof)))
    worlds = np.array(worlds).reshape((len(worlds),) + nominal.shape)
    return worlds, (np.array(noise) if sigma > 0 else None)


def advance(scenario: Scenario, starts, target, worlds, noise, stop: Callable, discount: float = 1.0) -> BatchResult:
    """Step a batch of trials in lockstep toward ``target``.

    ``target`` is one configuration or one per trial.  ``stop(x, idx)``
    maps configurations ``x`` of the trials ``idx`` to a boolean mask of
    trials that have finished successfully.  It is evaluated once at the
    start (a trial already satisfying it takes one step of zero length) and
    after every move.  A move is ``min(step_size, distance)`` along the
    straight line to the target plus the trial's actuation noise; the cost
    of the ``t``-th move is its length times ``discount ** (t - 1)``.
    """
    x = np.array(starts, dtype=float)
    B = x.shape[0]
    target = np.broadcast_to(np.asarray(target, dtype=float), x.shape)
    h = scenario.step_size
    cost = np.zeros(B)
    steps = np.full(B, scenario.max_steps, dtype=int)
    stopped = np.asarray(stop(x, np.arange(B)), dtype=bool).copy()
    collided = np.zeros(B, dtype=bool)
    steps[stopped] = 1
    active = np.flatnonzero(~stopped)
    weight = 1.0
    for t in range(1, scenario.max_steps + 1):
        if active.size == 0:
            break
        d = target[active] - x[active]
        dist = np.linalg.norm(d, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(dist > 0, np.minimum(h, dist) / dist, 0.0)
        move = d * scale[:, None]
        if noise is not None:
            move = move + noise[active, t - 1]
        x[active] += move
        cost[active] += weight * np.linalg.norm(move, axis=1)
        weight *= discount
        hit = collision_mask(scenario, x[active], worlds[active])
        done = hit.copy()
        collided[active[hit]] = True
        fine = active[~hit]
        if fine.size:
            arrived = np.zeros(active.size, dtype=bool)
            arrived[~hit] = np.asarray(stop(x[fine], fine), dtype=bool)
            stopped[active[arrived]] = True
            done |= arrived
        steps[active[done]] = t
        active = active[~done]
    return BatchResult(stopped, collided, cost, steps, x)


def _outcomes(res) -> List[TrialOutcome]:
    return [
        TrialOutcome(bool(s), float(c) if s else 0.0, int(n))
        for s, c, n in zip(res.stopped, res.cost, res.steps)
    ]


def _simulate(scenario, controller, from_, to, generators) -> List[TrialOutcome]:
    from_ = scenario.check_config(from_, "from")
    to = scenario.check_config(to, "to")
    worlds, noise = draw_trial_noise(scenario, controller, generators)
    r = scenario.endgame_radius
    starts = np.broadcast_to(from_, (len(worlds), scenario.dof))
    res = advance(scenario, starts, to, worlds, noise, lambda x, idx: np.linalg.norm(x - to, axis=1) <= r)
    return _outcomes(res)


def simulate_transition(scenario: Scenario, controller: ControllerSpec, from_, to,
                        rng: np.random.Generator) -> TrialOutcome:
    """Run one trial of the controller from ``from_`` toward ``to``.

    Success means reaching the endgame ball around ``to``; the cost is then
    the configuration-space length travelled.  Collisions and exhausting the
    step budget are failures with cost 0.
    """
    return _simulate(scenario, controller, from_, to, [rng])[0]


def run_trials(scenario: Scenario, controller: ControllerSpec, from_, to, T: int, seed: int,
               edge=(0, 0), purpose: int = rngmod.EDGE_TRIALS) -> List[TrialOutcome]:
    """``T`` independent trials; trial ``t`` uses the stream ``(seed, purpose, *edge)`` at counter ``t``.

    The result is ordered by trial index and does not depend on how trials
    are batched.
    """
    T = int(T)
    if T < 1:
        raise ValueError("T must be >= 1")
    key = rngmod.stream_key(seed, purpose, *edge)
    return _simulate(scenario, controller, from_, to, rngmod.trial_generators(key, range(T)))


def run_trials_many(scenario: Scenario, controller: ControllerSpec, froms, tos, T: int, seed: int, edges,
                    purpose: int = rngmod.EDGE_TRIALS) -> List[List[TrialOutcome]]:
    """:func:`run_trials` for several edges at once, stepped as one batch.

    Element ``e`` of the result equals
    ``run_trials(scenario, controller, froms[e], tos[e], T, seed, edges[e], purpose)``.
    """
    T = int(T)
    if T < 1:
        raise ValueError("T must be >= 1")
    froms = np.asarray(froms, dtype=float).reshape(-1, scenario.dof)
    tos = np.asarray(tos, dtype=float).reshape(-1, scenario.dof)
    E = len(froms)
    if E == 0:
        return []
    if not (np.all(np.isfinite(froms)) and np.all(np.isfinite(tos))):
        raise ValueError("edge endpoints must be finite")
    gens = (g for e in edges for g in rngmod.trial_generators(rngmod.stream_key(seed, purpose, *e), range(T)))
    worlds, noise = draw_trial_noise(scenario, controller, gens)
    starts = np.repeat(froms, T, axis=0)
    targets = np.repeat(tos, T, axis=0)
    r = scenario.endgame_radius
    res = advance(scenario, starts, targets, worlds, noise,
                  lambda x, idx: np.linalg.norm(x - targets[idx], axis=1) <= r)
    flat = _outcomes(res)
    return [flat[e * T:(e + 1) * T] for e in range(E)]
