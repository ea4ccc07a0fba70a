import math

import numpy as np
import pytest

from robustplan import rng as rngmod
from robustplan.controller import ControllerSpec, run_trials, run_trials_many, simulate_transition
from robustplan.estimation import norm_cdf
from robustplan.scenario import DiscSet, Obstacle, Scenario


def line_world(obstacles=(), **kw):
    kw.setdefault("step_size", 0.0625)
    kw.setdefault("endgame_radius", 0.03125)
    return Scenario(lower=[-2, -2], upper=[2, 2], robot=DiscSet((0.05,)), obstacles=list(obstacles),
                    start=[-1, 0], goal=[1, 0], **kw)


def test_already_in_endgame_region():
    sc = line_world()
    out = simulate_transition(sc, ControllerSpec(), [0.3, 0.3], [0.3, 0.3], np.random.default_rng(0))
    assert (out.success, out.cost, out.steps) == (True, 0.0, 1)


@pytest.mark.parametrize(
    "radius, steps, cost",
    [
        (0.03125, 12, 0.75),  # ceil((0.75 - 1/32) / (1/16)) = 12, final partial step lands on the target
        (0.1, 11, 0.6875),  # ceil(0.65 / 0.0625) = 11
    ],
)
def test_stepping_arithmetic(radius, steps, cost):
    sc = line_world(endgame_radius=radius)
    out = simulate_transition(sc, ControllerSpec(), [0.0, 0.0], [0.75, 0.0], np.random.default_rng(0))
    assert out.success
    assert out.steps == steps == math.ceil((0.75 - radius) / 0.0625)
    assert out.cost == pytest.approx(cost, abs=1e-12)
    assert abs(out.cost - 0.75) <= 0.0625 + 1e-12


def test_blocked_line_fails_with_zero_cost():
    sc = line_world([Obstacle.disc((0, 0), 0.1)])
    out = simulate_transition(sc, ControllerSpec(), [-1, 0], [1, 0], np.random.default_rng(0))
    assert not out.success
    assert out.cost == 0.0
    assert out.steps == 14  # x = -1 + 14/16 = -0.125 is the first centre within 0.15 of the origin


def test_step_budget_exhausted():
    sc = line_world(max_steps=5)
    out = simulate_transition(sc, ControllerSpec(), [-1, 0], [1, 0], np.random.default_rng(0))
    assert (out.success, out.cost, out.steps) == (False, 0.0, 5)


def test_run_trials_shape_and_determinism():
    sc = line_world([Obstacle.disc((0, 0.2), 0.1, std=(0.05, 0.1))])
    ctrl = ControllerSpec(actuation_noise_std=0.01)
    assert len(run_trials(sc, ctrl, [-1, 0], [1, 0], 1, seed=3)) == 1
    a = run_trials(sc, ctrl, [-1, 0], [1, 0], 50, seed=3, edge=(4, 5))
    b = run_trials(sc, ctrl, [-1, 0], [1, 0], 50, seed=3, edge=(4, 5))
    assert a == b
    c = run_trials(sc, ctrl, [-1, 0], [1, 0], 50, seed=3, edge=(5, 4))
    assert a != c
    for o in a:
        assert o.steps <= sc.max_steps
        assert o.success or o.cost == 0.0


def test_batch_equals_single_trials():
    sc = line_world([Obstacle.disc((0, 0.15), 0.1, std=(0.05, 0.1))])
    ctrl = ControllerSpec(actuation_noise_std=0.02)
    batch = run_trials(sc, ctrl, [-1, 0], [1, 0], 40, seed=9, edge=(1, 2))
    key = rngmod.stream_key(9, rngmod.EDGE_TRIALS, 1, 2)
    single = [simulate_transition(sc, ctrl, [-1, 0], [1, 0], rngmod.trial_generator(key, t)) for t in range(40)]
    assert batch == single


def test_many_edges_equal_individual_runs():
    sc = line_world([Obstacle.disc((0, 0.15), 0.1, std=(0.05, 0.1))])
    ctrl = ControllerSpec(actuation_noise_std=0.01)
    froms = [[-1, 0], [0.5, 0.5], [0, -1]]
    tos = [[1, 0], [-0.5, 0.2], [0, 1]]
    edges = [(1, 2), (2, 1), (3, 7)]
    many = run_trials_many(sc, ctrl, froms, tos, 30, 5, edges)
    for f, t, e, got in zip(froms, tos, edges, many):
        assert got == run_trials(sc, ctrl, f, t, 30, 5, edge=e)


def test_success_rate_matches_gaussian_tail():
    # The robot passes x = 0 exactly (16 steps of 1/16 from x = -1), so it
    # collides iff the obstacle's vertical offset is below R + r there.
    y0, sigma, clearance = 0.2, 0.1, 0.1 + 0.05
    sc = line_world([Obstacle.disc((0, y0), 0.1, std=(0.0, sigma))])
    T = 10_000
    out = run_trials(sc, ControllerSpec(), [-1, 0], [1, 0], T, seed=21)
    rate = np.mean([o.success for o in out])
    p_hit = norm_cdf((clearance - y0) / sigma) - norm_cdf((-clearance - y0) / sigma)
    p = 1.0 - p_hit
    assert 0.0 < rate < 1.0
    assert abs(rate - p) < 3 * math.sqrt(p * (1 - p) / T)


def test_controller_spec_validation():
    with pytest.raises(ValueError):
        ControllerSpec(actuation_noise_std=-1)
    with pytest.raises(ValueError):
        ControllerSpec(kind="potential_field")
    assert ControllerSpec.from_dict(ControllerSpec(actuation_noise_std=0.5).to_dict()).actuation_noise_std == 0.5
