"""Command line entry point: ``rocus <verb> [options]``.

Verbs creating a new run (``calibrate``, ``sample``, ``baseline``, ``run``)
write into ``<output_dir>/<timestamp>``; ``render``, ``summarize`` and
``verify`` act on an existing run directory.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import artifacts as art
from . import experiment as ex
from .config import ConfigError, config_from_dict, load_config

log = logging.getLogger("rocus")

VERB_STAGES = {
    "calibrate": ("calibrate",),
    "sample": ("calibrate", "sample", "render", "summarize"),
    "baseline": ("baseline",),
    "run": ("calibrate", "sample", "baseline", "render", "summarize"),
}


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML experiment config")
    p.add_argument("--controller", choices=["ds", "rrt"])
    p.add_argument("--behavior", dest="behavior_id")
    p.add_argument("--mode", choices=["matching", "maximal"])
    p.add_argument("--target", type=float)
    p.add_argument("--sign", type=int, choices=[1, -1])
    p.add_argument("--alpha", type=float)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-prior", type=int)
    p.add_argument("--reject-failed", action="store_true", default=None)
    p.add_argument("--baseline-n", type=int)
    p.add_argument("--baseline-k", type=int)
    p.add_argument("--no-baseline", action="store_true")
    p.add_argument("--output-dir")


def _merged_config(args):
    """Config file (if any) with command-line flags layered on top."""
    if args.config is not None:
        doc = load_config(args.config).to_dict()
        source = str(args.config)
    else:
        doc, source = {}, "<flags>"
    b = doc.setdefault("behavior", {})
    s = doc.setdefault("sampler", {})
    bl = doc.setdefault("baseline", {})
    flag_map = [
        (b, "id", args.behavior_id), (b, "mode", args.mode), (b, "target", args.target),
        (b, "sign", args.sign), (b, "alpha", args.alpha),
        (s, "n_samples", args.n_samples), (s, "burn_in", args.burn_in), (s, "thin", args.thin),
        (s, "seed", args.seed), (s, "n_prior", args.n_prior), (s, "reject_failed_rollouts", args.reject_failed),
        (bl, "n", args.baseline_n), (bl, "k", args.baseline_k),
        (doc, "controller", args.controller), (doc, "output_dir", args.output_dir),
    ]
    for d, k, v in flag_map:
        if v is not None:
            d[k] = v
    if args.no_baseline:
        bl["enabled"] = False
    return config_from_dict(doc, source)


def _run_config(run_dir: Path):
    return config_from_dict(art.read_manifest(run_dir)["config"], str(run_dir / art.MANIFEST))


def cmd_new_run(args) -> int:
    cfg = _merged_config(args)
    run_dir = ex.run_experiment(cfg, stages=VERB_STAGES[args.verb])
    print(run_dir)
    return 0


def cmd_render(args) -> int:
    cfg = _run_config(args.run_dir)
    for name in ex.stage_render(cfg, args.run_dir):
        print(args.run_dir / name)
    ex.finalize(cfg, args.run_dir, {})
    return 0


def cmd_summarize(args) -> int:
    cfg = _run_config(args.run_dir)
    ex.stage_summarize(cfg, args.run_dir)
    ex.finalize(cfg, args.run_dir, {})
    sys.stdout.write((args.run_dir / "summary.csv").read_text())
    return 0


def cmd_verify(args) -> int:
    problems = art.verify_manifest(args.run_dir)
    for p in problems:
        print(p)
    if not problems:
        print(f"ok: {len(art.read_manifest(args.run_dir)['files'])} files verified")
    return 1 if problems else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rocus", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERB_STAGES:
        p = sub.add_parser(verb)
        _add_overrides(p)
        p.set_defaults(func=cmd_new_run)
    for verb, fn in (("render", cmd_render), ("summarize", cmd_summarize), ("verify", cmd_verify)):
        p = sub.add_parser(verb)
        p.add_argument("run_dir", type=Path)
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
