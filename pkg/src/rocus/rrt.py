"""RRT planner driven by a lazily grown tape of configuration samples.

All randomness of the planner lives in the tape, so a plan is a deterministic
function of ``(task, tape)``. The tape is extended with fresh uniform draws
only when planning reads past its end, which is what lets the MCMC sampler
treat the planner's randomness as part of the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._kernels import rbf_field
from .env2d import DEFAULT_PARAMS, EnvParams, Task2D, Trajectory, rollout
from .errors import PlanFailure

EDGE_RESOLUTION = 0.01
MAX_TAPE = 10_000


class GrowthTape:
    """Ordered configuration samples; grows on demand, never rewritten."""

    def __init__(self, entries=None, cursor: int = 0):
        arr = np.zeros((0, 2)) if entries is None else np.asarray(entries, dtype=float).reshape(-1, 2)
        self._entries = [tuple(map(float, e)) for e in arr]
        self.cursor = cursor

    def __len__(self):
        return len(self._entries)

    @property
    def entries(self) -> np.ndarray:
        return np.array(self._entries, dtype=float).reshape(-1, 2)

    def entry(self, i: int, rng: np.random.Generator | None, params: EnvParams = DEFAULT_PARAMS):
        while i >= len(self._entries):
            if rng is None:
                raise PlanFailure("tape exhausted and no generator to extend it")
            self._entries.append(tuple(map(float, rng.uniform(params.lo, params.hi, size=2))))
        return self._entries[i]

    def copy(self) -> "GrowthTape":
        t = GrowthTape(cursor=self.cursor)
        t._entries = list(self._entries)
        return t

    def to_dict(self) -> dict:
        return {"entries": [list(e) for e in self._entries], "cursor": self.cursor}

    @classmethod
    def from_dict(cls, d) -> "GrowthTape":
        return cls(d["entries"], d.get("cursor", 0))


def segment_steps(a, b, clamp: float) -> int:
    """Number of equal simulator steps covering ``a -> b`` within the per-axis clamp."""
    span = max(abs(b[0] - a[0]), abs(b[1] - a[1]))
    if span == 0.0:
        return 0
    return max(1, math.ceil(span / clamp - 1e-9))


@njit(cache=True)
def _segment_free(pts, gamma, eta, ax, ay, bx, by, n):
    dx = (bx - ax) / n
    dy = (by - ay) / n
    for j in range(1, n + 1):
        if rbf_field(pts, gamma, ax + j * dx, ay + j * dy) > eta:
            return False
    return True


def segment_free(task: Task2D, params: EnvParams, a, b, resolution: float = EDGE_RESOLUTION) -> bool:
    """Collision check of the straight segment at spacing <= ``resolution``.

    Sample points are a refinement of the simulator step endpoints used by
    :func:`discretize`, so a checked edge replays without contact.
    """
    steps = segment_steps(a, b, params.step_clamp)
    if steps == 0:
        return True
    length = math.hypot(b[0] - a[0], b[1] - a[1])
    sub = max(1, math.ceil(length / (resolution * steps)))
    return _segment_free(task.points, params.gamma, params.eta,
                         float(a[0]), float(a[1]), float(b[0]), float(b[1]), steps * sub)


class Tree:
    def __init__(self, root):
        self.nodes = [tuple(map(float, root))]
        self.parents = [-1]
        self._arr = np.array([root], dtype=float)

    def __len__(self):
        return len(self.nodes)

    def add(self, config, parent: int) -> int:
        self.nodes.append(tuple(map(float, config)))
        self.parents.append(parent)
        self._arr = np.vstack([self._arr, [config]])
        return len(self.nodes) - 1

    def nearest(self, config) -> int:
        d = self._arr - np.asarray(config, dtype=float)
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def path_to(self, idx: int) -> np.ndarray:
        out = []
        while idx >= 0:
            out.append(self.nodes[idx])
            idx = self.parents[idx]
        return np.array(out[::-1])


def attempt_grow(task: Task2D, params: EnvParams, tree: Tree, from_idx: int, to) -> int | None:
    """Add ``to`` as a child of node ``from_idx`` if the edge is free.

    Returns the new node index, or ``None`` with the tree unchanged.
    """
    if not segment_free(task, params, tree.nodes[from_idx], to):
        return None
    return tree.add(to, from_idx)


@dataclass
class PlannedPath:
    nodes: np.ndarray
    tree_size: int = 0
    tape_used: int = 0
    edges: list = field(default_factory=list)


def rrt_plan(
    task: Task2D,
    tape: GrowthTape,
    params: EnvParams = DEFAULT_PARAMS,
    rng: np.random.Generator | None = None,
    max_tape: int = MAX_TAPE,
) -> PlannedPath:
    """Plain RRT: direct connection first, then grow towards tape samples.

    Every sample that is successfully attached is immediately tried against
    the goal. No goal bias, no step-size limit, no smoothing.
    """
    start = params.start
    goal = params.goal
    tree = Tree(start)
    end = attempt_grow(task, params, tree, 0, goal)
    i = 0
    while end is None:
        if i >= max_tape:
            tape.cursor = i
            raise PlanFailure(f"no path after {max_tape} tape entries")
        s = tape.entry(i, rng, params)
        i += 1
        new = attempt_grow(task, params, tree, tree.nearest(s), s)
        if new is not None:
            end = attempt_grow(task, params, tree, new, goal)
    tape.cursor = i
    edges = [(tree.nodes[p], tree.nodes[c]) for c, p in enumerate(tree.parents) if p >= 0]
    return PlannedPath(tree.path_to(end), len(tree), i, edges)


def discretize(path: PlannedPath | np.ndarray, params: EnvParams = DEFAULT_PARAMS) -> np.ndarray:
    """Equal sub-steps per edge, each within the per-axis step clamp."""
    nodes = path.nodes if isinstance(path, PlannedPath) else np.asarray(path, dtype=float)
    actions = []
    for a, b in zip(nodes[:-1], nodes[1:]):
        n = segment_steps(a, b, params.step_clamp)
        if n:
            actions.extend([(b - a) / n] * n)
    return np.array(actions, dtype=float).reshape(-1, 2)


class ReplayPolicy:
    """Feeds a fixed action sequence; returns ``None`` when exhausted."""

    def __init__(self, actions: np.ndarray):
        self.actions = actions
        self.k = 0

    def __call__(self, pos):
        if self.k >= len(self.actions):
            return None
        a = self.actions[self.k]
        self.k += 1
        return a


class RRTController:
    name = "rrt"
    stochastic = True

    def __init__(self, max_tape: int = MAX_TAPE):
        self.max_tape = max_tape

    def run(self, task: Task2D, params: EnvParams = DEFAULT_PARAMS,
            tape: GrowthTape | None = None, rng: np.random.Generator | None = None) -> Trajectory:
        """Plan on ``tape`` (extended from ``rng`` as needed) and replay the plan.

        Raises :class:`PlanFailure` if the tape budget runs out.
        """
        if tape is None:
            tape = GrowthTape()
        path = rrt_plan(task, tape, params, rng, self.max_tape)
        traj = rollout(ReplayPolicy(discretize(path, params)), task, params)
        traj.meta["path"] = path.nodes
        traj.meta["tape_used"] = path.tape_used
        return traj
