"""Shipped demo scenarios.

* ``corridor`` -- one disc robot; a wall with a wide, certain opening far
  from the straight line and a short passage between two noisy discs.
* ``two_robots`` -- two disc robots (4 dof) crossing the same kind of wall.
* ``arm`` -- a planar 5-link arm reaching around noisy obstacles.

Each entry also records build and plan parameters that work at desk scale.
"""

from __future__ import annotations

import math

from .controller import ControllerSpec
from .scenario import DiscSet, Obstacle, PlanarArm, Scenario

# (xmin, xmax) of the wall and the y-ranges of its openings in the corridor demo
WALL_X = (0.48, 0.52)
RISKY_OPENING = (0.32, 0.68)
SAFE_OPENING = (0.85, 1.0)

# seed the demo parameters were tuned with
DEMO_SEED = 0


def _wall(noise):
    return [
        Obstacle.rect((0.5, 0.16), 0.04, 0.32),
        Obstacle.rect((0.5, 0.765), 0.04, 0.17),
        Obstacle.disc((0.5, 0.36), 0.04, std=(noise, noise)),
        Obstacle.disc((0.5, 0.64), 0.04, std=(noise, noise)),
    ]


def corridor():
    scenario = Scenario(
        lower=[0.0, 0.0],
        upper=[1.0, 1.0],
        robot=DiscSet((0.02,)),
        obstacles=_wall(0.02),
        start=[0.1, 0.5],
        goal=[0.9, 0.5],
        endgame_radius=0.01,
        step_size=0.01,
        max_steps=200,
    )
    return scenario, ControllerSpec()


def two_robots():
    scenario = Scenario(
        lower=[0.0] * 4,
        upper=[1.0] * 4,
        robot=DiscSet((0.02, 0.02)),
        obstacles=_wall(0.02),
        start=[0.1, 0.4, 0.1, 0.6],
        goal=[0.9, 0.4, 0.9, 0.6],
        endgame_radius=0.02,
        step_size=0.01,
        max_steps=300,
    )
    return scenario, ControllerSpec()


def arm():
    scenario = Scenario(
        lower=[0.0, -2.2, -2.2, -2.2, -2.2],
        upper=[math.pi, 2.2, 2.2, 2.2, 2.2],
        robot=PlanarArm((0.0, 0.0), (0.2, 0.2, 0.2, 0.2, 0.2)),
        obstacles=[
            Obstacle.disc((0.0, 0.75), 0.12, std=(0.02, 0.02)),
            Obstacle.disc((0.45, 0.45), 0.06, std=(0.03, 0.03)),
            Obstacle.disc((-0.45, 0.45), 0.06, std=(0.03, 0.03)),
            Obstacle.rect((0.0, -0.1), 2.4, 0.1),
        ],
        start=[0.15, 0.0, 0.0, 0.0, 0.0],
        goal=[math.pi - 0.15, 0.0, 0.0, 0.0, 0.0],
        endgame_radius=0.05,
        step_size=0.04,
        max_steps=400,
        workspace=(-1.1, -0.2, 1.1, 1.1),
    )
    return scenario, ControllerSpec()


DEMOS = {
    "corridor": (corridor, {"n": 300, "k": 10, "T": 100}),
    "two_robots": (two_robots, {"n": 400, "k": 10, "T": 100}),
    "arm": (arm, {"n": 300, "k": 10, "T": 60}),
}


def load_demo(name: str):
    """``(scenario, controller, build_params)`` for a shipped demo."""
    try:
        factory, params = DEMOS[name]
    except KeyError:
        raise ValueError(f"unknown demo {name!r}; choose from {sorted(DEMOS)}") from None
    scenario, controller = factory()
    return scenario, controller, dict(params)
