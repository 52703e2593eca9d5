"""Posterior sampling of tasks (and planner randomness) that exhibit a behavior.

Two relaxed posteriors are supported:

* matching: ``b_hat ~ N(b, sigma^2)`` conditioned on ``b_hat = target``;
* maximal: ``b`` standardised by its prior moments, squashed by a sigmoid to
  ``beta`` and ``beta_hat ~ N(beta, sigma^2)`` conditioned on ``beta_hat = 1``.

``sigma`` is never a free knob: it is calibrated from ``alpha``, the fraction
of prior behavior mass inside the ``+-sqrt(3) sigma`` window (one-sided for
maximal mode), which makes the posterior invariant to the units of ``b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import truncnorm

from .behaviors import evaluate_behavior, get_behavior
from .env2d import DEFAULT_PARAMS, EnvParams, Task2D, Trajectory, sample_prior_task, start_goal_free
from .errors import ControllerFailure, DegenerateMarginal, DegenerateTrajectory
from .rrt import GrowthTape

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class BehaviorSpec:
    """Which behavior to target and how.

    ``scale`` multiplies the raw behavior (a change of units); ``target`` is
    given in scaled units. In maximal mode ``sign=-1`` targets minimal values
    by negating the behavior. The likelihood only ever sees the unscaled
    ``score``, so two specs differing by ``scale`` give bit-identical chains.
    """

    behavior_id: str
    mode: str = "matching"
    target: float = 0.0
    sign: int = 1
    alpha: float = 0.01
    scale: float = 1.0

    def __post_init__(self):
        if self.mode not in ("matching", "maximal"):
            raise ValueError(f"mode must be 'matching' or 'maximal', got {self.mode!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.mode == "matching" and not math.isfinite(self.target):
            raise ValueError("matching target must be finite")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        get_behavior(self.behavior_id)

    def score(self, raw: float) -> float:
        """Unscaled, sign-adjusted behavior seen by the likelihood."""
        return self.sign * raw if self.mode == "maximal" else raw

    def value(self, raw: float) -> float:
        """Behavior in scaled units (what gets reported)."""
        return self.scale * self.score(raw)

    @property
    def score_target(self) -> float:
        return self.target / self.scale

    def evaluate(self, traj: Trajectory, task: Task2D, params: EnvParams = DEFAULT_PARAMS) -> float:
        return self.value(evaluate_behavior(self.behavior_id, traj, task, params))


@dataclass
class SamplerConfig:
    n_samples: int = 10_000
    burn_in: int = 5_000
    thin: int = 1
    kernel_sigma: float = 0.1
    tape_sigma_fraction: float = 0.1
    seed: int = 0
    reject_failed_rollouts: bool = False
    n_prior: int = 1000
    max_init_tries: int = 100

    def __post_init__(self):
        if not 0 <= self.burn_in < self.n_samples:
            raise ValueError("burn_in must be in [0, n_samples)")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")


@dataclass
class Rollout:
    task: Task2D
    tape: Optional[GrowthTape]
    traj: Optional[Trajectory]
    behavior: Optional[float]
    failure: Optional[str] = None
    score: Optional[float] = None

    def __post_init__(self):
        if self.score is None:
            self.score = self.behavior


def evaluate_task(
    controller,
    spec: BehaviorSpec,
    task: Task2D,
    tape: Optional[GrowthTape],
    rng: Optional[np.random.Generator],
    params: EnvParams = DEFAULT_PARAMS,
    behavior_fn: Optional[Callable] = None,
) -> Rollout:
    """Roll out the controller and score it; failures are recorded, not raised."""
    try:
        traj = controller.run(task, params, tape=tape, rng=rng)
    except ControllerFailure as exc:
        return Rollout(task, tape, None, None, f"controller: {exc}")
    try:
        if behavior_fn is None:
            raw = evaluate_behavior(spec.behavior_id, traj, task, params)
        else:
            raw = behavior_fn(traj, task)
    except DegenerateTrajectory as exc:
        return Rollout(task, tape, traj, None, f"degenerate: {exc}")
    return Rollout(task, tape, traj, spec.value(raw), score=spec.score(raw))


def prior_rollouts(controller, spec, n, rng, params=DEFAULT_PARAMS, behavior_fn=None) -> list[Rollout]:
    out = []
    for _ in range(n):
        task = sample_prior_task(rng, params)
        tape = GrowthTape() if controller.stochastic else None
        out.append(evaluate_task(controller, spec, task, tape, rng, params, behavior_fn))
    return out


@dataclass
class MarginalStats:
    samples: np.ndarray
    mean: float
    variance: float
    n_skipped: int = 0
    rollouts: list = field(default_factory=list, repr=False, compare=False)
    scores: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @classmethod
    def from_values(cls, values, n_skipped: int = 0, rollouts=None, scores=None) -> "MarginalStats":
        """``values`` in spec units; ``scores`` (unscaled) default to ``values``."""
        v = np.sort(np.asarray(values, dtype=float))
        if v.size == 0:
            raise ValueError("marginal needs at least one sample")
        sc = v if scores is None else np.sort(np.asarray(scores, dtype=float))
        return cls(v, float(v.mean()), float(v.var()), n_skipped, rollouts or [], sc)

    def score_stats(self) -> "MarginalStats":
        if self.scores is self.samples:
            return self
        return MarginalStats.from_values(self.scores, self.n_skipped)

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


def estimate_marginal(
    controller,
    spec: BehaviorSpec,
    n_prior: int,
    rng: np.random.Generator,
    params: EnvParams = DEFAULT_PARAMS,
    reject_failed_rollouts: bool = False,
    behavior_fn: Optional[Callable] = None,
) -> MarginalStats:
    """Behavior values of ``n_prior`` prior rollouts (in ``spec`` units).

    Controller failures and degenerate trajectories are skipped and counted.
    """
    rolls = prior_rollouts(controller, spec, n_prior, rng, params, behavior_fn)
    good = _usable(rolls, reject_failed_rollouts)
    return MarginalStats.from_values([r.behavior for r in good], len(rolls) - len(good), rolls,
                                     [r.score for r in good])


def _usable(rolls, reject_failed_rollouts: bool) -> list[Rollout]:
    return [
        r for r in rolls
        if r.behavior is not None and not (reject_failed_rollouts and not r.traj.reached_goal)
    ]


def _window_sigma(distances: np.ndarray, alpha: float) -> float:
    # smallest sigma whose sqrt(3)-window holds at least alpha of the samples
    d = np.sort(distances)
    k = min(max(math.ceil(alpha * d.size - 1e-9), 1), d.size)
    edge = float(d[k - 1])
    if edge == 0.0:
        # alpha already met by an atom at the target; a zero width would make
        # the likelihood singular, so take the next distinct sample instead
        pos = d[d > 0.0]
        if not pos.size:
            return 0.0
        edge = float(pos[0])
    sigma = edge / SQRT3
    if SQRT3 * sigma < edge:
        # rounding must not push the edge sample out of the window
        sigma = float(np.nextafter(sigma, np.inf))
    return sigma


def window_fraction(values, center: float, sigma: float) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.mean(np.abs(values - center) <= SQRT3 * sigma))


def sigma_from_alpha_matching(stats: MarginalStats, b_star: float, alpha: float) -> float:
    """``sigma`` such that ``[b* - sqrt3 sigma, b* + sqrt3 sigma]`` holds ``alpha`` of the marginal.

    The empirical coverage is a step function of ``sigma`` with jumps at the
    sorted distances ``|b - b*| / sqrt3``; the result is the jump where the
    coverage first reaches ``alpha``, i.e. the limit of bisecting ``sigma``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return _window_sigma(np.abs(stats.samples - b_star), alpha)


def standardized_sigmoid(values, mean: float, std: float) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-(np.asarray(values, dtype=float) - mean) / std))


def sigma_from_alpha_maximal(stats: MarginalStats, alpha: float) -> tuple[tuple[float, float], float]:
    """``((mean, std), sigma)`` such that ``[1 - sqrt3 sigma, 1]`` holds ``alpha`` of ``beta``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if not stats.variance > 0.0:
        raise DegenerateMarginal("behavior marginal has zero variance")
    beta = standardized_sigmoid(stats.samples, stats.mean, stats.std)
    return (stats.mean, stats.std), _window_sigma(1.0 - beta, alpha)


@dataclass(frozen=True)
class Calibration:
    mode: str
    sigma: float
    target: float = 0.0
    mean: float = 0.0
    std: float = 1.0

    @classmethod
    def fit(cls, spec: BehaviorSpec, stats: MarginalStats) -> "Calibration":
        """Calibrate on the scores (unscaled behavior) carried by ``stats``."""
        stats = stats.score_stats()
        if spec.mode == "matching":
            t = spec.score_target
            return cls("matching", sigma_from_alpha_matching(stats, t, spec.alpha), t)
        (mean, std), sigma = sigma_from_alpha_maximal(stats, spec.alpha)
        return cls("maximal", sigma, 1.0, mean, std)

    def log_likelihood(self, b: float) -> float:
        """Gaussian log-density up to an additive constant."""
        if self.sigma <= 0.0:
            raise ValueError("calibrated sigma is zero; the marginal has no spread around the target")
        if self.mode == "matching":
            z = (self.target - b) / self.sigma
        else:
            beta = 1.0 / (1.0 + math.exp(-(b - self.mean) / self.std))
            z = (1.0 - beta) / self.sigma
        return -0.5 * z * z


def log_posterior(
    roll: Rollout,
    calib: Calibration,
    params: EnvParams = DEFAULT_PARAMS,
    reject_failed_rollouts: bool = False,
) -> float:
    """Unnormalised log posterior; ``-inf`` marks zero density.

    Task and tape priors are uniform on their boxes and contribute only a
    constant inside them.
    """
    if not roll.task.in_support(params) or not start_goal_free(roll.task, params):
        return -math.inf
    if roll.tape is not None and len(roll.tape):
        e = roll.tape.entries
        if np.any((e < params.lo) | (e > params.hi)):
            return -math.inf
    if roll.score is None or not math.isfinite(roll.score):
        return -math.inf
    if reject_failed_rollouts and not roll.traj.reached_goal:
        return -math.inf
    return calib.log_likelihood(roll.score)


def _truncnorm_move(x: np.ndarray, lo: float, hi: float, sigma: float, rng):
    a = (lo - x) / sigma
    b = (hi - x) / sigma
    y = truncnorm.rvs(a, b, loc=x, scale=sigma, random_state=rng)
    y = np.clip(y, lo, hi)
    fwd = truncnorm.logpdf(y, a, b, loc=x, scale=sigma).sum()
    rev = truncnorm.logpdf(x, (lo - y) / sigma, (hi - y) / sigma, loc=y, scale=sigma).sum()
    return y, float(fwd), float(rev)


def truncnorm_logpdf(y, x, lo, hi, sigma) -> float:
    """Log-density of moving ``x -> y`` under the truncated Gaussian kernel."""
    x = np.asarray(x, dtype=float)
    return float(truncnorm.logpdf(y, (lo - x) / sigma, (hi - x) / sigma, loc=x, scale=sigma).sum())


def propose(
    task: Task2D,
    tape: Optional[GrowthTape],
    config: SamplerConfig,
    rng: np.random.Generator,
    params: EnvParams = DEFAULT_PARAMS,
) -> tuple[Task2D, Optional[GrowthTape], float, float]:
    """Perturb every obstacle coordinate (and every instantiated tape entry).

    Returns ``(task', tape', log q(forward), log q(reverse))``. Both densities
    are over the entries present in the current state only; entries the
    candidate's planner appends later are fresh prior draws.
    """
    r = params.coord_range
    pts, lq_f, lq_r = _truncnorm_move(task.points.ravel(), -r, r, config.kernel_sigma, rng)
    new_task = Task2D(pts.reshape(-1, 2))
    new_tape = None
    if tape is not None:
        new_tape = GrowthTape()
        if len(tape):
            s = config.tape_sigma_fraction * (params.hi - params.lo)
            e, tf, tr = _truncnorm_move(tape.entries.ravel(), params.lo, params.hi, s, rng)
            new_tape = GrowthTape(e.reshape(-1, 2))
            lq_f += tf
            lq_r += tr
    return new_task, new_tape, lq_f, lq_r


@dataclass
class ChainSample:
    task: Task2D
    tape: Optional[GrowthTape]
    behavior: float
    log_post: float
    accepted: bool
    log_accept: float = 0.0
    traj: Optional[Trajectory] = field(default=None, repr=False)

    def to_record(self) -> dict:
        rec = {"task": self.task.to_list()}
        if self.tape is not None:
            rec["tape"] = self.tape.to_dict()
        rec.update(behavior=self.behavior, log_post=self.log_post, accepted=self.accepted)
        return rec


@dataclass
class ChainResult:
    samples: list[ChainSample]
    calibration: Calibration
    config: SamplerConfig
    n_candidate_failures: int = 0
    n_init_tries: int = 1
    failure_counts: dict = field(default_factory=dict)

    @property
    def kept(self) -> list[ChainSample]:
        return self.samples[self.config.burn_in :: self.config.thin]

    @property
    def trace(self) -> np.ndarray:
        return np.array([s.behavior for s in self.samples])

    @property
    def accept_flags(self) -> np.ndarray:
        return np.array([s.accepted for s in self.samples])

    @property
    def acceptance_rate(self) -> float:
        return float(self.accept_flags.mean()) if self.samples else 0.0

    @property
    def failure_rate(self) -> float:
        return self.n_candidate_failures / max(len(self.samples), 1)

    @property
    def plan_failure_rate(self) -> float:
        return self.failure_counts.get("controller", 0) / max(len(self.samples), 1)


def run_chain(
    controller,
    spec: BehaviorSpec,
    config: SamplerConfig,
    calib: Calibration,
    params: EnvParams = DEFAULT_PARAMS,
    behavior_fn: Optional[Callable] = None,
    rng: Optional[np.random.Generator] = None,
) -> ChainResult:
    """Metropolis-Hastings over tasks (plus tape for stochastic controllers).

    Every iteration appends the current state, so a rejected proposal repeats
    its predecessor. Burn-in and thinning are applied by ``ChainResult.kept``.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    reject_failed = config.reject_failed_rollouts

    def score(task, tape):
        roll = evaluate_task(controller, spec, task, tape, rng, params, behavior_fn)
        return roll, log_posterior(roll, calib, params, reject_failed)

    for tries in range(1, config.max_init_tries + 1):
        tape = GrowthTape() if controller.stochastic else None
        cur, cur_lp = score(sample_prior_task(rng, params), tape)
        if math.isfinite(cur_lp):
            break
    else:
        raise RuntimeError(f"no finite-density initial state in {config.max_init_tries} prior draws")

    samples = []
    n_fail = 0
    kinds: dict[str, int] = {}
    for _ in range(config.n_samples):
        task, tape, lq_f, lq_r = propose(cur.task, cur.tape, config, rng, params)
        cand, cand_lp = score(task, tape)
        if not math.isfinite(cand_lp):
            n_fail += 1
            kind = cand.failure.split(":")[0] if cand.failure else "density"
            kinds[kind] = kinds.get(kind, 0) + 1
            log_a = -math.inf
        else:
            log_a = cand_lp + lq_r - cur_lp - lq_f
        accepted = math.log(rng.random()) < log_a
        if accepted:
            cur, cur_lp = cand, cand_lp
        samples.append(ChainSample(cur.task, cur.tape, cur.behavior, cur_lp, accepted, log_a, cur.traj))
    return ChainResult(samples, calib, config, n_fail, tries, kinds)


def calibrate(
    controller,
    spec: BehaviorSpec,
    config: SamplerConfig,
    params: EnvParams = DEFAULT_PARAMS,
    behavior_fn: Optional[Callable] = None,
) -> tuple[MarginalStats, Calibration]:
    """Prior marginal (in spec units) and the calibration fitted on its scores.

    Uses its own generator stream (seeded from ``config.seed``) so the chain's
    stream does not depend on ``n_prior``.
    """
    rng = np.random.default_rng([config.seed, 1])
    stats = estimate_marginal(controller, spec, config.n_prior, rng, params,
                              config.reject_failed_rollouts, behavior_fn)
    return stats, Calibration.fit(spec, stats)
