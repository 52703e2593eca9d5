"""Top-k selection over prior rollouts: the hard cut-off alternative to sampling."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .env2d import DEFAULT_PARAMS, EnvParams
from .sampler import BehaviorSpec, Rollout, prior_rollouts


def extremeness(values, spec: BehaviorSpec) -> np.ndarray:
    """Sort key, smaller is more extreme.

    ``values`` are in ``spec`` units, so a negated maximal spec (``sign=-1``)
    already ranks the smallest raw values first.
    """
    v = np.asarray(values, dtype=float)
    if spec.mode == "matching":
        return np.abs(v - spec.target)
    return -v


def top_k_indices(values, spec: BehaviorSpec, k: int) -> np.ndarray:
    """Indices of the ``k`` most extreme values; ties keep sampling order."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return np.argsort(extremeness(values, spec), kind="stable")[:k]


@dataclass
class TopKResult:
    selected: list[Rollout]
    pool_values: np.ndarray
    threshold: float
    n_skipped: int = 0
    pool: list = field(default_factory=list, repr=False)

    @property
    def pool_size(self) -> int:
        return len(self.pool_values)

    @property
    def selected_values(self) -> np.ndarray:
        return np.array([r.behavior for r in self.selected])

    def histogram_csv(self, bins: int = 50) -> str:
        return histogram_csv(self.pool_values, bins)


def select(pool: list[Rollout], spec: BehaviorSpec, k: int) -> TopKResult:
    """Top-k of an already-scored pool. Failed rollouts are left out of the ranking."""
    good = [r for r in pool if r.behavior is not None]
    values = np.array([r.behavior for r in good], dtype=float)
    idx = top_k_indices(values, spec, min(k, len(good)))
    selected = [good[i] for i in idx]
    threshold = float(values[idx[-1]]) if len(idx) else float("nan")
    return TopKResult(selected, values, threshold, len(pool) - len(good), pool)


def top_k_select(
    controller,
    spec: BehaviorSpec,
    n: int,
    k: int,
    rng: np.random.Generator,
    params: EnvParams = DEFAULT_PARAMS,
    behavior_fn=None,
) -> TopKResult:
    """Run ``n`` prior rollouts and keep the ``k`` most extreme."""
    if k > n:
        raise ValueError("k must not exceed the pool size")
    return select(prior_rollouts(controller, spec, n, rng, params, behavior_fn), spec, k)


def histogram_csv(values, bins: int = 50) -> str:
    """``value,count`` rows with bin centres as values."""
    values = np.asarray(values, dtype=float)
    counts, edges = np.histogram(values, bins=bins)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["value", "count"])
    for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
        w.writerow([repr(float(0.5 * (lo + hi))), int(c)])
    return buf.getvalue()
