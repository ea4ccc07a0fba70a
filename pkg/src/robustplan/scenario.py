"""Worlds: configuration space, robot bodies, Gaussian-uncertain obstacles.

A :class:`Scenario` is immutable once built.  Obstacle positions are random;
one realization of all of them is a :class:`WorldSample`.  Collision checks
are vectorized over a batch of configurations, each paired with its own
world, so whole sets of controller trials are stepped at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import geometry
from .exceptions import SamplingBudgetExceeded

FORMAT_VERSION = 1


@dataclass(frozen=True)
class Obstacle:
    """A disc or axis-aligned rectangle whose center is Gaussian-distributed.

    ``position`` is the nominal (mean) center.  ``std`` holds the per-axis
    standard deviation of the position noise.
    """

    shape: str
    position: tuple
    std: tuple = (0.0, 0.0)
    radius: float = 0.0
    width: float = 0.0
    height: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "std", tuple(float(v) for v in self.std))
        if len(self.position) != 2 or len(self.std) != 2:
            raise ValueError("obstacle position and std must be 2-vectors")
        if not all(math.isfinite(v) for v in self.position):
            raise ValueError("obstacle position must be finite")
        if any(s < 0 or not math.isfinite(s) for s in self.std):
            raise ValueError("obstacle position_std must be nonnegative")
        if self.shape == "disc":
            if not self.radius > 0:
                raise ValueError("disc obstacle radius must be > 0")
        elif self.shape == "rect":
            if not (self.width > 0 and self.height > 0):
                raise ValueError("rectangle width and height must be > 0")
        else:
            raise ValueError(f"unknown obstacle shape {self.shape!r}")

    @classmethod
    def disc(cls, position, radius, std=(0.0, 0.0)):
        return cls("disc", tuple(position), tuple(std), radius=float(radius))

    @classmethod
    def rect(cls, position, width, height, std=(0.0, 0.0)):
        return cls("rect", tuple(position), tuple(std), width=float(width), height=float(height))

    @property
    def feature_size(self) -> float:
        """Radius, or half the shorter side of a rectangle."""
        if self.shape == "disc":
            return self.radius
        return 0.5 * min(self.width, self.height)

    def to_dict(self) -> dict:
        d = {"shape": self.shape, "position": list(self.position), "std": list(self.std)}
        if self.shape == "disc":
            d["radius"] = self.radius
        else:
            d["width"] = self.width
            d["height"] = self.height
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Obstacle":
        return cls(
            d["shape"],
            tuple(d["position"]),
            tuple(d.get("std", (0.0, 0.0))),
            radius=float(d.get("radius", 0.0)),
            width=float(d.get("width", 0.0)),
            height=float(d.get("height", 0.0)),
        )


@dataclass(frozen=True)
class DiscSet:
    """Holonomic disc robots; a configuration concatenates their 2-D centers."""

    radii: tuple

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        if not self.radii or any(not r > 0 for r in self.radii):
            raise ValueError("DiscSet needs at least one positive radius")

    @property
    def dof(self) -> int:
        return 2 * len(self.radii)

    def to_dict(self) -> dict:
        return {"type": "disc_set", "radii": list(self.radii)}


@dataclass(frozen=True)
class PlanarArm:
    """Planar serial arm with segment links; a configuration is joint angles.

    Angles are relative to the previous link; the first is measured from the
    +x axis at ``base``.
    """

    base: tuple
    lengths: tuple

    def __post_init__(self):
        object.__setattr__(self, "base", tuple(float(v) for v in self.base))
        object.__setattr__(self, "lengths", tuple(float(v) for v in self.lengths))
        if len(self.base) != 2:
            raise ValueError("arm base must be a 2-vector")
        if not self.lengths or any(not v > 0 for v in self.lengths):
            raise ValueError("arm needs at least one positive link length")

    @property
    def dof(self) -> int:
        return len(self.lengths)

    def joints(self, angles):
        return geometry.arm_joints(np.asarray(angles, dtype=float), np.asarray(self.base), self.lengths)

    def to_dict(self) -> dict:
        return {"type": "planar_arm", "base": list(self.base), "lengths": list(self.lengths)}


RobotModel = Union[DiscSet, PlanarArm]


def robot_from_dict(d: dict) -> RobotModel:
    kind = d.get("type")
    if kind == "disc_set":
        return DiscSet(tuple(d["radii"]))
    if kind == "planar_arm":
        return PlanarArm(tuple(d["base"]), tuple(d["lengths"]))
    raise ValueError(f"unknown robot type {kind!r}")


@dataclass(frozen=True)
class WorldSample:
    """One draw of every obstacle position, shape ``(n_obstacles, 2)``."""

    obstacle_positions: np.ndarray

    def __len__(self):
        return len(self.obstacle_positions)


@dataclass(frozen=True, eq=False)
class Scenario:
    """A planning problem under obstacle-position uncertainty.

    Parameters
    ----------
    lower, upper : sequence of float
        Configuration-space box, one entry per degree of freedom.
    robot : DiscSet or PlanarArm
    obstacles : sequence of Obstacle
    start, goal : sequence of float
        Query configurations; must lie inside the box.
    endgame_radius : float
        A controller succeeds once within this configuration distance of its
        target.
    step_size : float, optional
        Controller step length.  Defaults to half the smallest obstacle
        feature (radius, or half the short side of a rectangle), or 1/50 of
        the box diagonal for an empty world.
    max_steps : int
        Step budget of one controller run.
    workspace : (xmin, ymin, xmax, ymax), optional
        Box the robot body must stay in.  For disc robots it defaults to the
        box spanned by the center coordinates; arms are unconstrained unless
        it is given.
    """

    lower: np.ndarray
    upper: np.ndarray
    robot: RobotModel
    obstacles: tuple
    start: np.ndarray
    goal: np.ndarray
    endgame_radius: float
    step_size: Optional[float] = None
    max_steps: int = 1000
    workspace: Optional[tuple] = None
    _arrays: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        set_ = object.__setattr__
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        dof = self.robot.dof
        if lower.shape != (dof,) or upper.shape != (dof,):
            raise ValueError(f"configuration bounds must have length {dof}")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper)) and np.all(lower < upper)):
            raise ValueError("configuration bounds must be finite with lower < upper")
        set_(self, "lower", lower)
        set_(self, "upper", upper)
        set_(self, "obstacles", tuple(self.obstacles))
        set_(self, "start", self.check_config(self.start, "start"))
        set_(self, "goal", self.check_config(self.goal, "goal"))
        for name in ("start", "goal"):
            x = getattr(self, name)
            if np.any(x < lower) or np.any(x > upper):
                raise ValueError(f"{name} lies outside the configuration bounds")
        if not self.endgame_radius > 0:
            raise ValueError("endgame_radius must be > 0")
        set_(self, "endgame_radius", float(self.endgame_radius))
        if self.step_size is None:
            if self.obstacles:
                step = 0.5 * min(o.feature_size for o in self.obstacles)
            else:
                step = float(np.linalg.norm(upper - lower)) / 50.0
            set_(self, "step_size", step)
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")
        set_(self, "step_size", float(self.step_size))
        if int(self.max_steps) < 1:
            raise ValueError("max_steps must be >= 1")
        set_(self, "max_steps", int(self.max_steps))
        ws = self.workspace
        if ws is None and isinstance(self.robot, DiscSet):
            ws = (lower[0::2].min(), lower[1::2].min(), upper[0::2].max(), upper[1::2].max())
        if ws is not None:
            ws = tuple(float(v) for v in ws)
            if len(ws) != 4 or not (ws[0] < ws[2] and ws[1] < ws[3]):
                raise ValueError("workspace must be (xmin, ymin, xmax, ymax) with min < max")
        set_(self, "workspace", ws)
        self._build_arrays()

    def _build_arrays(self):
        obs = self.obstacles
        a = self._arrays
        a["nominal"] = np.array([o.position for o in obs], dtype=float).reshape(-1, 2)
        a["std"] = np.array([o.std for o in obs], dtype=float).reshape(-1, 2)
        a["disc_idx"] = np.array([i for i, o in enumerate(obs) if o.shape == "disc"], dtype=int)
        a["disc_r"] = np.array([o.radius for o in obs if o.shape == "disc"], dtype=float)
        a["rect_idx"] = np.array([i for i, o in enumerate(obs) if o.shape == "rect"], dtype=int)
        a["rect_half"] = np.array(
            [(0.5 * o.width, 0.5 * o.height) for o in obs if o.shape == "rect"], dtype=float
        ).reshape(-1, 2)
        if isinstance(self.robot, PlanarArm):
            L = self.robot.dof
            pairs = [(i, j) for i in range(L) for j in range(i + 2, L)]
            a["self_pairs"] = np.array(pairs, dtype=int).reshape(-1, 2)
        else:
            m = len(self.robot.radii)
            pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
            a["self_pairs"] = np.array(pairs, dtype=int).reshape(-1, 2)

    @property
    def dof(self) -> int:
        return self.robot.dof

    @property
    def nominal_positions(self) -> np.ndarray:
        return self._arrays["nominal"]

    @property
    def position_std(self) -> np.ndarray:
        return self._arrays["std"]

    def nominal_world(self) -> WorldSample:
        return WorldSample(self.nominal_positions.copy())

    def check_config(self, config, name="config") -> np.ndarray:
        x = np.asarray(config, dtype=float)
        if x.shape != (self.robot.dof,):
            raise ValueError(f"{name} must have length {self.robot.dof}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError(f"{name} must be finite")
        return x

    def replace(self, **changes) -> "Scenario":
        kw = dict(
            lower=self.lower, upper=self.upper, robot=self.robot, obstacles=self.obstacles,
            start=self.start, goal=self.goal, endgame_radius=self.endgame_radius,
            step_size=self.step_size, max_steps=self.max_steps, workspace=self.workspace,
        )
        kw.update(changes)
        return Scenario(**kw)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "cspace_bounds": {"lower": self.lower.tolist(), "upper": self.upper.tolist()},
            "robot": self.robot.to_dict(),
            "workspace": list(self.workspace) if self.workspace is not None else None,
            "obstacles": [o.to_dict() for o in self.obstacles],
            "start": self.start.tolist(),
            "goal": self.goal.tolist(),
            "endgame_radius": self.endgame_radius,
            "step_size": self.step_size,
            "max_steps": self.max_steps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if d.get("format") != FORMAT_VERSION:
            raise ValueError(f"unsupported scenario format {d.get('format')!r}")
        bounds = d["cspace_bounds"]
        return cls(
            lower=bounds["lower"],
            upper=bounds["upper"],
            robot=robot_from_dict(d["robot"]),
            obstacles=tuple(Obstacle.from_dict(o) for o in d.get("obstacles", [])),
            start=d["start"],
            goal=d["goal"],
            endgame_radius=d["endgame_radius"],
            step_size=d.get("step_size"),
            max_steps=d.get("max_steps", 1000),
            workspace=d.get("workspace"),
        )


def sample_world(scenario: Scenario, rng: np.random.Generator) -> WorldSample:
    """Draw every obstacle position from its Gaussian."""
    noise = rng.standard_normal(scenario.nominal_positions.shape)
    return WorldSample(scenario.nominal_positions + scenario.position_std * noise)


def collision_mask(scenario: Scenario, configs, positions) -> np.ndarray:
    """Batched collision test.

    Parameters
    ----------
    configs : array of shape (B, dof)
    positions : array of shape (B, n_obstacles, 2) or (n_obstacles, 2)
        Obstacle positions, per configuration or shared.

    Returns
    -------
    ndarray of bool, shape (B,)
    """
    a = scenario._arrays
    q = np.asarray(configs, dtype=float)
    B = q.shape[0]
    pos = np.asarray(positions, dtype=float)
    if pos.ndim == 2:
        pos = np.broadcast_to(pos, (B,) + pos.shape)
    hit = np.zeros(B, dtype=bool)
    robot = scenario.robot
    ws = scenario.workspace
    didx, ridx = a["disc_idx"], a["rect_idx"]

    if isinstance(robot, DiscSet):
        centers = q.reshape(B, -1, 2)
        radii = np.asarray(robot.radii)
        if didx.size:
            d = np.linalg.norm(centers[:, :, None, :] - pos[:, None, didx, :], axis=-1)
            hit |= np.any(d < radii[None, :, None] + a["disc_r"][None, None, :], axis=(1, 2))
        if ridx.size:
            d = geometry.point_box_distance(centers[:, :, None, :], pos[:, None, ridx, :], a["rect_half"])
            hit |= np.any(d < radii[None, :, None], axis=(1, 2))
        pairs = a["self_pairs"]
        if pairs.size:
            d = np.linalg.norm(centers[:, pairs[:, 0]] - centers[:, pairs[:, 1]], axis=-1)
            hit |= np.any(d < radii[pairs[:, 0]] + radii[pairs[:, 1]], axis=1)
        if ws is not None:
            out = (
                (centers[..., 0] - radii < ws[0])
                | (centers[..., 1] - radii < ws[1])
                | (centers[..., 0] + radii > ws[2])
                | (centers[..., 1] + radii > ws[3])
            )
            hit |= np.any(out, axis=1)
        return hit

    joints = robot.joints(q)  # (B, L+1, 2)
    a0, a1 = joints[:, :-1], joints[:, 1:]
    if didx.size:
        d = geometry.point_segment_distance(pos[:, None, didx, :], a0[:, :, None, :], a1[:, :, None, :])
        hit |= np.any(d < a["disc_r"][None, None, :], axis=(1, 2))
    if ridx.size:
        h = geometry.segment_hits_box(a0[:, :, None, :], a1[:, :, None, :], pos[:, None, ridx, :], a["rect_half"])
        hit |= np.any(h, axis=(1, 2))
    pairs = a["self_pairs"]
    if pairs.size:
        s = geometry.segments_intersect(a0[:, pairs[:, 0]], a1[:, pairs[:, 0]], a0[:, pairs[:, 1]], a1[:, pairs[:, 1]])
        hit |= np.any(s, axis=1)
    if ws is not None:
        out = (
            (joints[..., 0] < ws[0]) | (joints[..., 1] < ws[1]) | (joints[..., 0] > ws[2]) | (joints[..., 1] > ws[3])
        )
        hit |= np.any(out, axis=1)
    return hit


def collides(scenario: Scenario, config, world: Optional[WorldSample] = None) -> bool:
    """True if the robot at ``config`` hits an obstacle, itself, or the workspace wall.

    ``world`` defaults to the nominal obstacle placement.
    """
    x = scenario.check_config(config)
    pos = scenario.nominal_positions if world is None else np.asarray(world.obstacle_positions)
    if pos.shape != scenario.nominal_positions.shape:
        raise ValueError("world sample does not match the scenario's obstacles")
    return bool(collision_mask(scenario, x[None, :], pos)[0])


def sample_free_configs(scenario: Scenario, rng: np.random.Generator, size: int, max_attempts: int = 100_000,
                        chunk: int = 64):
    """Draw ``size`` uniform configurations free under the nominal world.

    Returns ``(configs, attempts)`` where ``attempts`` counts every uniform
    draw examined.  Raises :class:`SamplingBudgetExceeded` once
    ``max_attempts`` draws have been examined without enough acceptances.
    """
    out = []
    attempts = 0
    nominal = scenario.nominal_positions
    while len(out) < size:
        if attempts >= max_attempts:
            raise SamplingBudgetExceeded(
                f"found {len(out)}/{size} free configurations in {attempts} attempts; "
                "free space is empty or very small"
            )
        m = min(chunk, max_attempts - attempts)
        draws = rng.uniform(scenario.lower, scenario.upper, size=(m, scenario.dof))
        free = ~collision_mask(scenario, draws, nominal)
        need = size - len(out)
        idx = np.flatnonzero(free)
        if idx.size >= need:
            out.extend(draws[idx[:need]])
            attempts += int(idx[need - 1]) + 1
        else:
            out.extend(draws[idx])
            attempts += m
    return np.array(out).reshape(size, scenario.dof), attempts


def sample_free_config(scenario: Scenario, rng: np.random.Generator, max_attempts: int = 100_000) -> np.ndarray:
    """Uniform configuration conditioned on no collision in the nominal world."""
    configs, _ = sample_free_configs(scenario, rng, 1, max_attempts=max_attempts)
    return configs[0]


def config_distance(a, b) -> np.ndarray:
    """Euclidean distance on raw coordinates (joint angles are not wrapped)."""
    return np.linalg.norm(np.asarray(a) - np.asarray(b), axis=-1)


def workspace_box(scenario: Scenario) -> tuple:
    """Bounding box for drawing: the workspace, or the arm's reach box."""
    if scenario.workspace is not None:
        return scenario.workspace
    bx, by = scenario.robot.base
    reach = sum(scenario.robot.lengths)
    return (bx - reach, by - reach, bx + reach, by + reach)

