"""RBF-defined 2D navigation world and its point-mass simulator.

A task is a set of obstacle points; the environment field is a sum of
Gaussian bumps centred on them and anything above the threshold ``eta`` is
obstacle. The robot is a point that moves by clamped displacements and slides
along obstacle boundaries on contact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._kernels import norm2, rbf_field, sim_step

Policy = Callable[[np.ndarray], Optional[np.ndarray]]


@dataclass(frozen=True)
class EnvParams:
    gamma: float = 25.0
    eta: float = 0.9
    lo: float = -1.2
    hi: float = 1.2
    start: tuple[float, float] = (-1.0, -1.0)
    goal: tuple[float, float] = (1.0, 1.0)
    step_clamp: float = 0.03
    max_steps: int = 1000
    goal_tol: float = 0.05
    n_substeps: int = 10
    n_points: int = 15
    coord_range: float = 0.7

    def __post_init__(self):
        if not self.eta < 1.0:
            raise ValueError("eta must be < 1 so every obstacle point is exposed")
        if self.lo >= self.hi:
            raise ValueError("empty workspace")

    @property
    def start_arr(self) -> np.ndarray:
        return np.array(self.start, dtype=float)

    @property
    def goal_arr(self) -> np.ndarray:
        return np.array(self.goal, dtype=float)


DEFAULT_PARAMS = EnvParams()


@dataclass(frozen=True, eq=False)
class Task2D:
    """Obstacle points of one environment, shape ``(n_points, 2)``.

    Coordinates outside the prior box are representable (proposals and tests
    need them); :meth:`in_support` tells whether the prior covers the task.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __eq__(self, other):
        return isinstance(other, Task2D) and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    def in_support(self, params: EnvParams = DEFAULT_PARAMS) -> bool:
        return (
            self.points.shape == (params.n_points, 2)
            and bool(np.all(np.abs(self.points) <= params.coord_range))
        )

    def to_list(self) -> list[float]:
        return [float(v) for v in self.points.ravel()]

    @classmethod
    def from_list(cls, values) -> "Task2D":
        values = list(values)
        if len(values) % 2:
            raise ValueError("task needs an even number of coordinates")
        return cls(np.asarray(values, dtype=float).reshape(-1, 2))


@dataclass
class Trajectory:
    positions: np.ndarray
    reached_goal: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)

    def __len__(self):
        return len(self.positions)

    def to_list(self) -> list[list[float]]:
        return [[float(x), float(y)] for x, y in self.positions]

    @classmethod
    def from_list(cls, pairs, reached_goal=False) -> "Trajectory":
        return cls(np.asarray(pairs, dtype=float).reshape(-1, 2), reached_goal)


def env_field(task: Task2D, params: EnvParams, p) -> np.ndarray | float:
    """Sum of RBF bumps at ``p``; ``p`` may be a single point or ``(..., 2)``."""
    p = np.asarray(p, dtype=float)
    if p.shape == (2,):
        # same compiled path the simulator uses, so single-point checks agree bit-for-bit
        return rbf_field(task.points, params.gamma, p[0], p[1])
    d = p[..., None, :] - task.points
    return np.exp(-params.gamma * np.einsum("...ij,...ij->...i", d, d)).sum(axis=-1)


def field_gradient(task: Task2D, params: EnvParams, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    d = p[..., None, :] - task.points
    w = np.exp(-params.gamma * np.einsum("...ij,...ij->...i", d, d))
    return -2.0 * params.gamma * np.einsum("...i,...ij->...j", w, d)


def is_obstacle(task: Task2D, params: EnvParams, p):
    val = env_field(task, params, p)
    return val > params.eta


def in_bounds(params: EnvParams, p) -> bool:
    return bool(np.all((p >= params.lo) & (p <= params.hi)))


def is_free(task: Task2D, params: EnvParams, p) -> bool:
    return in_bounds(params, p) and not is_obstacle(task, params, p)


def step(task: Task2D, params: EnvParams, position, action) -> np.ndarray:
    """Advance the point robot by one clamped action.

    Only the endpoint of the full move is collision-checked. On contact the
    move is replayed in ``n_substeps`` micro-steps; a blocked micro-step loses
    its component along the field gradient at the contact point and the
    tangential remainder is applied if it lands in free space. Walls act the
    same way through per-axis clipping to the box.
    """
    x, y = sim_step(
        task.points, params.gamma, params.eta, params.lo, params.hi,
        params.step_clamp, params.n_substeps,
        float(position[0]), float(position[1]), float(action[0]), float(action[1]),
    )
    return np.array([x, y])


def start_goal_free(task: Task2D, params: EnvParams = DEFAULT_PARAMS) -> bool:
    return not is_obstacle(task, params, params.start_arr) and not is_obstacle(
        task, params, params.goal_arr
    )


def sample_prior_task(rng: np.random.Generator, params: EnvParams = DEFAULT_PARAMS) -> Task2D:
    """Uniform obstacle points, redrawn until start and goal are free."""
    r = params.coord_range
    while True:
        task = Task2D(rng.uniform(-r, r, size=(params.n_points, 2)))
        if start_goal_free(task, params):
            return task


def rollout(policy: Policy, task: Task2D, params: EnvParams = DEFAULT_PARAMS) -> Trajectory:
    """Run ``policy`` from the start until the goal is within tolerance.

    The policy may return ``None`` to stop early (e.g. a replayed plan ran out
    of actions).
    """
    goal = params.goal_arr
    pos = params.start_arr
    positions = [pos]
    for _ in range(params.max_steps):
        if norm2(pos[0] - goal[0], pos[1] - goal[1]) <= params.goal_tol:
            break
        action = policy(pos)
        if action is None:
            break
        pos = step(task, params, pos, action)
        positions.append(pos)
    reached = norm2(pos[0] - goal[0], pos[1] - goal[1]) <= params.goal_tol
    return Trajectory(np.array(positions), reached)


def straight_policy(params: EnvParams = DEFAULT_PARAMS, speed: Optional[float] = None) -> Policy:
    """Head straight for the goal at ``speed`` per step (default: the clamp)."""
    speed = params.step_clamp if speed is None else speed
    goal = params.goal_arr

    def policy(pos):
        d = goal - pos
        n = math.hypot(d[0], d[1])
        return d if n <= speed else d * (speed / n)

    return policy


GRID_RES = 150


def grid_axis(params: EnvParams = DEFAULT_PARAMS, res: int = GRID_RES) -> np.ndarray:
    """Cell-centre coordinates along one axis of the ``res x res`` raster."""
    h = (params.hi - params.lo) / res
    return params.lo + h * (np.arange(res) + 0.5)


def occupancy_grid(task: Task2D, params: EnvParams = DEFAULT_PARAMS, res: int = GRID_RES) -> np.ndarray:
    """Boolean raster indexed ``[ix, iy]``; a cell is occupied iff its centre is."""
    ax = grid_axis(params, res)
    # the Gaussian kernel factorises over axes
    ex = np.exp(-params.gamma * (ax[None, :] - task.points[:, :1]) ** 2)
    ey = np.exp(-params.gamma * (ax[None, :] - task.points[:, 1:]) ** 2)
    return ex.T @ ey > params.eta
