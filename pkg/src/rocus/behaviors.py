"""Trajectory behaviors as (length-normalised) line integrals of scalar fields.

Integrals are discretised over the polyline of recorded positions: each
segment contributes ``V(midpoint) * segment_length``. Time derivatives use
forward differences with one simulator step as the time unit; the k-th
derivative sample is attached to the segment starting at the same index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import ndimage

from .env2d import DEFAULT_PARAMS, GRID_RES, EnvParams, Task2D, Trajectory, grid_axis, occupancy_grid
from .errors import DegenerateTrajectory

NEAR_OBSTACLE_FLOOR = 1e-3


def _positions(traj) -> np.ndarray:
    p = traj.positions if isinstance(traj, Trajectory) else traj
    return np.asarray(p, dtype=float).reshape(-1, 2)


def _segments(p):
    d = np.diff(p, axis=0)
    return d, np.hypot(d[:, 0], d[:, 1]), 0.5 * (p[:-1] + p[1:])


def line_integral(traj, field: Callable[[np.ndarray], np.ndarray], normalized: bool = False) -> float:
    """Midpoint-rule line integral of ``field`` along the polyline.

    ``field`` maps an ``(n, 2)`` array of points to ``n`` values. The
    normalised form of a zero-length trajectory is ``field(x0)``.
    """
    p = _positions(traj)
    if len(p) < 2:
        if normalized:
            return float(np.asarray(field(p[:1]))[0])
        return 0.0
    _, ds, mid = _segments(p)
    total = float(ds.sum())
    if normalized and total == 0.0:
        return float(np.asarray(field(p[:1]))[0])
    val = float(np.dot(np.asarray(field(mid), dtype=float), ds))
    return val / total if normalized else val


def traj_length(traj) -> float:
    p = _positions(traj)
    if len(p) < 2:
        return 0.0
    return float(_segments(p)[1].sum())


def _avg_derivative(traj, order: int) -> float:
    p = _positions(traj)
    if len(p) < order + 1:
        raise DegenerateTrajectory(f"need at least {order + 1} points for derivative order {order}")
    deriv = np.diff(p, n=order, axis=0)
    mag = np.hypot(deriv[:, 0], deriv[:, 1])
    ds = _segments(p)[1][: len(mag)]
    total = ds.sum()
    if total == 0.0:
        return 0.0
    return float(np.dot(mag, ds) / total)


def avg_velocity(traj) -> float:
    return _avg_derivative(traj, 1)


def avg_acceleration(traj) -> float:
    return _avg_derivative(traj, 2)


def avg_jerk(traj) -> float:
    return _avg_derivative(traj, 3)


def straight_line_deviation(traj) -> float:
    """Mean perpendicular distance from the line through the first and last points."""
    p = _positions(traj)
    axis = p[-1] - p[0]
    n = math.hypot(axis[0], axis[1])
    if n == 0.0:
        raise DegenerateTrajectory("start and end coincide; deviation axis undefined")
    u = axis / n
    x0 = p[0]

    def dist(x):
        r = x - x0
        return np.abs(r[:, 0] * u[1] - r[:, 1] * u[0])

    return line_integral(p, dist, normalized=True)


class DistanceField:
    """Nearest-obstacle distance on the raster, bilinearly interpolated.

    Distances are exact Euclidean distances between cell centres (zero on
    obstacle cells). A task with no obstacle cells gets the arena
    half-diagonal everywhere and ``empty`` set.
    """

    def __init__(self, task: Task2D, params: EnvParams = DEFAULT_PARAMS, res: int = GRID_RES, occ=None):
        self.params = params
        self.res = res
        self.h = (params.hi - params.lo) / res
        self.occ = occupancy_grid(task, params, res) if occ is None else occ
        self.empty = not self.occ.any()
        if self.empty:
            half_diag = 0.5 * (params.hi - params.lo) * math.sqrt(2.0)
            self.grid = np.full((res, res), half_diag)
        else:
            self.grid = ndimage.distance_transform_edt(~self.occ, sampling=self.h)

    @property
    def axis(self) -> np.ndarray:
        return grid_axis(self.params, self.res)

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        idx = (pts - self.params.lo) / self.h - 0.5
        idx = np.clip(idx, 0.0, self.res - 1.0)
        return ndimage.map_coordinates(self.grid, idx.T, order=1, mode="nearest")


def obstacle_clearance(traj, dfield: DistanceField) -> float:
    return line_integral(traj, dfield, normalized=True)


def near_obstacle_velocity(traj, dfield: DistanceField, floor: float = NEAR_OBSTACLE_FLOOR) -> float:
    """Average speed weighted by inverse obstacle distance (floored)."""
    p = _positions(traj)
    if len(p) < 2:
        raise DegenerateTrajectory("need at least 2 points for a velocity")
    _, ds, mid = _segments(p)
    speed = ds  # one step per segment
    w = ds / np.maximum(dfield(mid), floor)
    den = w.sum()
    if den == 0.0:
        return 0.0
    return float(np.dot(speed, w) / den)


def legibility(traj, goal) -> float:
    """Length-weighted mean cosine between motion and the direction to the goal."""
    p = _positions(traj)
    if len(p) < 2:
        raise DegenerateTrajectory("need at least 2 points for a heading")
    d, ds, mid = _segments(p)
    to_goal = np.asarray(goal, dtype=float) - mid
    keep = ds > 0
    # same reduction as the numerator so aligned motion gives exactly 1
    total = float(np.dot(np.ones_like(ds), ds))
    if total == 0.0:
        return 0.0
    # angle via atan2 so exactly aligned segments give cos == 1
    cross = d[:, 0] * to_goal[:, 1] - d[:, 1] * to_goal[:, 0]
    dot = np.einsum("ij,ij->i", d, to_goal)
    gn = np.hypot(to_goal[:, 0], to_goal[:, 1])
    cos = np.where(keep & (gn > 0), np.cos(np.arctan2(cross, dot)), 0.0)
    return float(np.dot(cos, ds) / total)


@dataclass
class BehaviorContext:
    """Per-task inputs for behaviors; the distance field is built lazily."""

    task: Task2D
    params: EnvParams = DEFAULT_PARAMS

    @cached_property
    def dfield(self) -> DistanceField:
        return DistanceField(self.task, self.params)


BEHAVIORS: dict[str, Callable[[Trajectory, BehaviorContext], float]] = {
    "length": lambda tr, ctx: traj_length(tr),
    "avg_vel": lambda tr, ctx: avg_velocity(tr),
    "avg_acc": lambda tr, ctx: avg_acceleration(tr),
    "avg_jerk": lambda tr, ctx: avg_jerk(tr),
    "straight_dev": lambda tr, ctx: straight_line_deviation(tr),
    "clearance": lambda tr, ctx: obstacle_clearance(tr, ctx.dfield),
    "near_obs_vel": lambda tr, ctx: near_obstacle_velocity(tr, ctx.dfield),
    "legibility": lambda tr, ctx: legibility(tr, ctx.params.goal),
}


def get_behavior(behavior_id: str):
    try:
        return BEHAVIORS[behavior_id]
    except KeyError:
        raise KeyError(f"unknown behavior {behavior_id!r}; choose from {sorted(BEHAVIORS)}") from None


def evaluate_behavior(behavior_id: str, traj: Trajectory, task: Task2D, params: EnvParams = DEFAULT_PARAMS) -> float:
    return float(get_behavior(behavior_id)(traj, BehaviorContext(task, params)))
