"""Dynamical-system controller with modulation-based obstacle avoidance.

Obstacles are recovered from the RBF field by rasterising it, labelling
4-connected components and completing each component into a star shape
around its centroid. Each star obstacle gets a Gamma-function (distance to the
reference point over boundary radius along the same direction); the linear
attractor ``goal - x`` is modulated per obstacle and the per-obstacle
velocities are blended in kappa (angle) space.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _kernels as _k
from .env2d import (
    DEFAULT_PARAMS,
    GRID_RES,
    EnvParams,
    Task2D,
    Trajectory,
    grid_axis,
    occupancy_grid,
)

N_RAYS = 50
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class StarObstacle:
    reference_point: np.ndarray
    boundary_radii: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "reference_point", np.asarray(self.reference_point, dtype=float))
        object.__setattr__(self, "boundary_radii", np.asarray(self.boundary_radii, dtype=float))

    @property
    def n_rays(self) -> int:
        return len(self.boundary_radii)

    @property
    def ray_angles(self) -> np.ndarray:
        return np.arange(self.n_rays) * (TWO_PI / self.n_rays)

    @property
    def vertices(self) -> np.ndarray:
        a = self.ray_angles
        dirs = np.stack([np.cos(a), np.sin(a)], axis=1)
        return self.reference_point + self.boundary_radii[:, None] * dirs

    def gamma(self, x) -> float | np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape == (2,):
            return _k.star_gamma(self.reference_point, self.boundary_radii, x[0], x[1])
        g = gamma_many(self.reference_point[None], self.boundary_radii[None], x.reshape(-1, 2))[0]
        return g.reshape(x.shape[:-1])

    @classmethod
    def circle(cls, center, radius, n_rays=N_RAYS) -> "StarObstacle":
        return cls(np.asarray(center, dtype=float), np.full(n_rays, float(radius)))

    def to_dict(self) -> dict:
        return {
            "reference_point": self.reference_point.tolist(),
            "vertices": self.vertices.tolist(),
            "boundary_radii": self.boundary_radii.tolist(),
        }


def gamma_many(refs: np.ndarray, radii: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Gamma of every obstacle at every point, shape ``(K, P)``.

    Boundary radius is linearly interpolated in angle between the two
    neighbouring rays. At the reference point itself Gamma is 0.
    """
    d = pts[None, :, :] - refs[:, None, :]
    rho = np.hypot(d[..., 0], d[..., 1])
    n = radii.shape[1]
    t = (np.arctan2(d[..., 1], d[..., 0]) % TWO_PI) * (n / TWO_PI)
    k0 = np.floor(t)
    frac = t - k0
    k0 = k0.astype(np.intp) % n
    r0 = np.take_along_axis(radii, k0, axis=1)
    r1 = np.take_along_axis(radii, (k0 + 1) % n, axis=1)
    return rho / ((1.0 - frac) * r0 + frac * r1)


def gamma_value(obs: StarObstacle, x) -> float:
    return obs.gamma(x)


def extract_obstacles(
    task: Task2D,
    params: EnvParams = DEFAULT_PARAMS,
    res: int = GRID_RES,
    n_rays: int = N_RAYS,
    occ: np.ndarray | None = None,
) -> list[StarObstacle]:
    """Star-shaped obstacles from 4-connected components of the occupancy raster."""
    if occ is None:
        occ = occupancy_grid(task, params, res)
    labels, n_comp = ndimage.label(occ)
    if n_comp == 0:
        return []
    ax = grid_axis(params, res)
    h = (params.hi - params.lo) / res
    march = h / 8.0
    angles = np.arange(n_rays) * (TWO_PI / n_rays)
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)

    obstacles = []
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        ii, jj = np.nonzero(labels[sl] == lab)
        ii = ii + sl[0].start
        jj = jj + sl[1].start
        cx, cy = ax[ii], ax[jj]
        ref = np.array([cx.mean(), cy.mean()])
        ci = min(max(int((ref[0] - params.lo) // h), 0), res - 1)
        cj = min(max(int((ref[1] - params.lo) // h), 0), res - 1)
        if labels[ci, cj] != lab:
            # non-convex component whose centroid falls outside it
            k = np.argmin((cx - ref[0]) ** 2 + (cy - ref[1]) ** 2)
            ref = np.array([cx[k], cy[k]])

        reach = np.sqrt(((cx - ref[0]) ** 2 + (cy - ref[1]) ** 2).max()) + h
        t = np.arange(0.0, reach + march, march)
        pts = ref[None, None, :] + t[None, :, None] * dirs[:, None, :]
        idx = np.floor((pts - params.lo) / h).astype(np.intp)
        valid = np.all((idx >= 0) & (idx < res), axis=-1)
        idx = np.clip(idx, 0, res - 1)
        inside = valid & (labels[idx[..., 0], idx[..., 1]] == lab)
        last = t.size - 1 - np.argmax(inside[:, ::-1], axis=1)
        radii = t[last] + march / 2.0
        obstacles.append(StarObstacle(ref, radii))
    return obstacles


def obstacles_debug_json(task: Task2D, params: EnvParams = DEFAULT_PARAMS, res: int = GRID_RES) -> str:
    occ = occupancy_grid(task, params, res)
    obstacles = extract_obstacles(task, params, res, occ=occ)
    return json.dumps(
        {
            "bounds": [params.lo, params.hi],
            "resolution": res,
            "occupancy": occ.astype(int).tolist(),
            "obstacles": [o.to_dict() for o in obstacles],
        }
    )


class ObstacleSet:
    """Stacked reference points and radii for the compiled kernels."""

    def __init__(self, obstacles: list[StarObstacle]):
        self.obstacles = list(obstacles)
        n = self.obstacles[0].n_rays if self.obstacles else N_RAYS
        if self.obstacles:
            self.refs = np.ascontiguousarray(np.stack([o.reference_point for o in self.obstacles]))
            self.radii = np.ascontiguousarray(np.stack([o.boundary_radii for o in self.obstacles]))
        else:
            self.refs = np.zeros((0, 2))
            self.radii = np.zeros((0, n))

    def __len__(self):
        return len(self.obstacles)

    def gammas(self, x) -> np.ndarray:
        return np.array([_k.star_gamma(r, rad, float(x[0]), float(x[1])) for r, rad in zip(self.refs, self.radii)])

    def modulate(self, x, u) -> tuple[np.ndarray, np.ndarray]:
        """Per-obstacle modulated velocities and Gammas at ``x``."""
        return _k.modulate_all(self.refs, self.radii, float(x[0]), float(x[1]), float(u[0]), float(u[1]))


def _as_set(obstacles) -> ObstacleSet:
    return obstacles if isinstance(obstacles, ObstacleSet) else ObstacleSet(obstacles)


def modulate_single(obs: StarObstacle, x, u) -> np.ndarray:
    """Velocity ``u`` at ``x`` modulated by one obstacle, ``E D E^-1 u``.

    ``E = [s, e1]`` with ``s`` the unit vector from the reference point and
    ``e1`` orthogonal to the (finite-difference) Gamma gradient. Inside the
    obstacle (Gamma <= 1) the result is the outward direction ``s`` at the
    speed of ``u``.
    """
    mx, my, _ = _k.modulate_one(
        obs.reference_point, obs.boundary_radii, float(x[0]), float(x[1]), float(u[0]), float(u[1])
    )
    return np.array([mx, my])


def obstacle_weights(gammas) -> np.ndarray:
    """``w_i`` proportional to the product of the other obstacles' ``Gamma - 1``.

    Margins are floored at 0 so that a point on (or inside) one obstacle gives
    that obstacle the full weight.
    """
    return _k.obstacle_weights(np.asarray(gammas, dtype=float).reshape(-1))


def to_kappa(u_hat) -> np.ndarray:
    """Unit vectors expressed in the attractor frame -> 1-D kappa coordinates."""
    u_hat = np.atleast_2d(np.asarray(u_hat, dtype=float))
    # arccos(u1) * sign(u2) for unit vectors; atan2 keeps precision near kappa = 0
    return np.arctan2(np.abs(u_hat[:, 1]), u_hat[:, 0]) * np.sign(u_hat[:, 1])


def from_kappa(kappa) -> np.ndarray:
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    return np.stack([np.cos(kappa), np.sin(kappa)], axis=1)


def aggregate(obstacles, x, goal) -> np.ndarray:
    """Blend per-obstacle modulations of the attractor ``goal - x``.

    Norm is the weighted mean of the individual norms; direction is the
    weighted mean in kappa space relative to the unmodulated direction.
    """
    obs = _as_set(obstacles)
    vx, vy = _k.aggregate_velocity(obs.refs, obs.radii, float(x[0]), float(x[1]), float(goal[0]), float(goal[1]))
    return np.array([vx, vy])


class DSPolicy:
    """Stateless map from position to action for one task.

    The blended velocity is rescaled, direction preserved, so that its norm
    does not exceed the simulator step bound.
    """

    def __init__(self, obstacles, params: EnvParams = DEFAULT_PARAMS):
        self.obstacles = _as_set(obstacles)
        self.goal = params.goal_arr
        self.max_speed = params.step_clamp

    def velocity(self, x) -> np.ndarray:
        return aggregate(self.obstacles, x, self.goal)

    def __call__(self, x) -> np.ndarray:
        v = self.velocity(x)
        return np.array(_k.cap_speed(v[0], v[1], self.max_speed))


def ds_policy(task: Task2D, params: EnvParams = DEFAULT_PARAMS) -> DSPolicy:
    return DSPolicy(extract_obstacles(task, params), params)


def ds_rollout(task: Task2D, params: EnvParams = DEFAULT_PARAMS, obstacles=None) -> Trajectory:
    """Compiled equivalent of ``rollout(ds_policy(task), task, params)``."""
    obs = _as_set(extract_obstacles(task, params) if obstacles is None else obstacles)
    pos = _k.ds_rollout(
        task.points, params.gamma, params.eta, params.lo, params.hi, params.step_clamp,
        params.n_substeps, obs.refs, obs.radii, params.start[0], params.start[1],
        params.goal[0], params.goal[1], params.goal_tol, params.max_steps, params.step_clamp,
    )
    reached = _k.norm2(pos[-1, 0] - params.goal[0], pos[-1, 1] - params.goal[1]) <= params.goal_tol
    return Trajectory(pos, reached)


class DSController:
    name = "ds"
    stochastic = False

    def run(self, task: Task2D, params: EnvParams = DEFAULT_PARAMS, tape=None, rng=None) -> Trajectory:
        return ds_rollout(task, params)
