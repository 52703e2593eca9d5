"""Experiment stages writing into a run directory.

A run directory holds (depending on the stages run)::

    prior.jsonl            calibration rollouts {task, tape?, behavior, reached_goal}
    calibration.json       marginal moments, skip count, calibrated sigma
    samples.jsonl          kept chain states {task, tape?, behavior, log_post, accepted}
    chain.json             full behavior trace, accept flags, rates
    baseline.jsonl         top-k selection, same record shape as samples
    pool.csv               every pool score in sampling order
    pool_histogram.csv     value,count
    *.svg, summary.csv     rendered reports
    manifest.json          config, run statistics and sha256 of every file above
"""

from __future__ import annotations

import json
import math
import os
import shutil
import time
from pathlib import Path

import numpy as np

from . import artifacts as art
from . import svg
from .baseline import select
from .config import dump_config
from .ds import DSController
from .env2d import DEFAULT_PARAMS, Task2D
from .rrt import GrowthTape, RRTController
from .sampler import Calibration, calibrate, prior_rollouts, run_chain

CONTROLLERS = {"ds": DSController, "rrt": RRTController}


def make_controller(name: str):
    return CONTROLLERS[name]()


def _record(task, tape, behavior, **extra) -> dict:
    rec = {"task": task.to_list()}
    if tape is not None:
        rec["tape"] = tape.to_dict()
    rec["behavior"] = behavior
    rec.update(extra)
    return rec


def _float_or_none(v):
    return None if v is None or not math.isfinite(v) else float(v)


def stage_calibrate(cfg, run_dir: Path, params=DEFAULT_PARAMS) -> Calibration:
    ctrl = make_controller(cfg.controller)
    stats, calib = calibrate(ctrl, cfg.behavior, cfg.sampler, params)
    recs = [
        _record(r.task, r.tape, _float_or_none(r.behavior),
                reached_goal=bool(r.traj is not None and r.traj.reached_goal), failure=r.failure)
        for r in stats.rollouts
    ]
    art.atomic_write(run_dir / "prior.jsonl", art.dumps_jsonl(recs))
    doc = {
        "mean": stats.mean, "variance": stats.variance, "n_prior": len(stats.rollouts),
        "n_skipped": stats.n_skipped, "calibration": calib.__dict__,
    }
    art.atomic_write(run_dir / "calibration.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return calib


def load_calibration(run_dir: Path) -> Calibration:
    with open(run_dir / "calibration.json") as fh:
        return Calibration(**json.load(fh)["calibration"])


def stage_sample(cfg, run_dir: Path, calib: Calibration | None = None, params=DEFAULT_PARAMS) -> dict:
    if calib is None:
        calib = load_calibration(run_dir) if (run_dir / "calibration.json").exists() else stage_calibrate(cfg, run_dir, params)
    res = run_chain(make_controller(cfg.controller), cfg.behavior, cfg.sampler, calib, params)
    art.atomic_write(run_dir / "samples.jsonl", art.dumps_jsonl(s.to_record() for s in res.kept))
    chain = {
        "trace": res.trace.tolist(),
        "accepted": res.accept_flags.astype(int).tolist(),
        "acceptance_rate": res.acceptance_rate,
        "candidate_failure_rate": res.failure_rate,
        "n_init_tries": res.n_init_tries,
        "burn_in": cfg.sampler.burn_in,
        "thin": cfg.sampler.thin,
    }
    art.atomic_write(run_dir / "chain.json", json.dumps(chain, sort_keys=True) + "\n")
    return {k: chain[k] for k in ("acceptance_rate", "candidate_failure_rate", "n_init_tries")}


def stage_baseline(cfg, run_dir: Path, params=DEFAULT_PARAMS) -> dict:
    rng = np.random.default_rng([cfg.sampler.seed, 2])
    pool = prior_rollouts(make_controller(cfg.controller), cfg.behavior, cfg.baseline.n, rng, params)
    res = select(pool, cfg.behavior, cfg.baseline.k)
    art.atomic_write(run_dir / "baseline.jsonl", art.dumps_jsonl(
        _record(r.task, r.tape, r.behavior) for r in res.selected))
    lines = ["index,value"] + [f"{i},{_float_or_none(r.behavior)!r}" for i, r in enumerate(pool)]
    art.atomic_write(run_dir / "pool.csv", "\n".join(lines) + "\n")
    art.atomic_write(run_dir / "pool_histogram.csv", res.histogram_csv())
    return {"baseline_threshold": res.threshold, "baseline_skipped": res.n_skipped}


def _replay(cfg, records, limit, params=DEFAULT_PARAMS):
    ctrl = make_controller(cfg.controller)
    idx = np.unique(np.linspace(0, len(records) - 1, min(limit, len(records))).astype(int)) if records else []
    out = []
    for i in idx:
        r = records[i]
        tape = GrowthTape.from_dict(r["tape"]) if "tape" in r else None
        try:
            out.append(ctrl.run(Task2D.from_list(r["task"]), params, tape=tape, rng=None))
        except Exception:
            continue
    return out


def _values(records):
    return [r["behavior"] for r in records if r.get("behavior") is not None]


def stage_render(cfg, run_dir: Path, params=DEFAULT_PARAMS) -> list[str]:
    prior = [r for r in art.read_jsonl(run_dir / "prior.jsonl") if r.get("behavior") is not None]
    post = art.read_jsonl(run_dir / "samples.jsonl")
    name = f"{cfg.controller} {cfg.behavior.behavior_id} ({cfg.behavior.mode})"
    written = []
    lim = cfg.render.max_trajectories
    art.atomic_write(run_dir / "trajectories.svg", svg.render_trajectories(
        _replay(cfg, prior, lim, params), _replay(cfg, post, lim, params), params, name))
    prior_tasks = [Task2D.from_list(r["task"]) for r in prior]
    post_tasks = [Task2D.from_list(r["task"]) for r in post]
    art.atomic_write(run_dir / "density_diff.svg",
                     svg.render_density_diff(svg.density_diff(prior_tasks, post_tasks, params), params, name))
    with open(run_dir / "chain.json") as fh:
        chain = json.load(fh)
    art.atomic_write(run_dir / "trace.svg", svg.render_trace(chain["trace"], name, chain["burn_in"]))
    series = {"prior": _values(prior), "posterior": _values(post)}
    if (run_dir / "baseline.jsonl").exists():
        series["top-k"] = _values(art.read_jsonl(run_dir / "baseline.jsonl"))
    art.atomic_write(run_dir / "density.svg", svg.render_density(series, name))
    written += ["trajectories.svg", "density_diff.svg", "trace.svg", "density.svg"]
    return written


def stage_summarize(cfg, run_dir: Path) -> list[dict]:
    prior = _values(art.read_jsonl(run_dir / "prior.jsonl"))
    post = _values(art.read_jsonl(run_dir / "samples.jsonl"))
    rows = [art.summary_row(cfg.controller, cfg.behavior, prior, post)]
    art.atomic_write(run_dir / "summary.csv", art.summary_csv(rows))
    return rows


def finalize(cfg, run_dir: Path, info: dict) -> None:
    old = {}
    if (run_dir / art.MANIFEST).exists():
        old = {k: v for k, v in art.read_manifest(run_dir).items() if k != "files"}
    stats = dict(old.get("stats", {}), **info)
    doc = {"config": cfg.to_dict(), "stats": stats}
    cal = run_dir / "calibration.json"
    if cal.exists():
        with open(cal) as fh:
            c = json.load(fh)
        stats.update(sigma=c["calibration"]["sigma"], prior_skipped=c["n_skipped"])
    art.write_manifest(run_dir, doc)


def _stamp() -> str:
    return time.strftime("%Y%m%d-%H%M%S")


def new_run_dir(output_dir) -> tuple[Path, Path]:
    """``(staging, final)`` paths; the staging directory is created now."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = _stamp()
    final, n = out / base, 1
    while final.exists():
        final, n = out / f"{base}-{n}", n + 1
    staging = out / f".staging-{final.name}-{os.getpid()}"
    staging.mkdir()
    return staging, final


class StagedRun:
    """Context manager: work in a hidden staging directory, publish on success."""

    def __init__(self, output_dir):
        self.staging, self.final = new_run_dir(output_dir)

    def __enter__(self) -> Path:
        return self.staging

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            shutil.rmtree(self.staging, ignore_errors=True)
            return False
        os.replace(self.staging, self.final)
        return False


def run_experiment(cfg, params=DEFAULT_PARAMS, stages=("calibrate", "sample", "baseline", "render", "summarize")) -> Path:
    """Execute the requested stages into a fresh timestamped run directory."""
    info = {}
    run = StagedRun(cfg.output_dir)
    with run as d:
        art.atomic_write(d / "config.yaml", dump_config(cfg))
        if "calibrate" in stages or "sample" in stages:
            calib = stage_calibrate(cfg, d, params)
        if "sample" in stages:
            info.update(stage_sample(cfg, d, calib, params))
        if "baseline" in stages and cfg.baseline.enabled:
            info.update(stage_baseline(cfg, d, params))
        if "render" in stages and "sample" in stages:
            stage_render(cfg, d, params)
        if "summarize" in stages and "sample" in stages:
            stage_summarize(cfg, d)
        finalize(cfg, d, info)
    return run.final
