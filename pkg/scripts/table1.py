"""Prior vs posterior behavior means for the 2D rows of the results table.

    python3 scripts/table1.py [--n-samples 5000] [--burn-in 1000] [--seed 0] [--top-k]

Each row runs one chain; ``--top-k`` adds the mean of the top-k baseline
drawn from a prior pool of the same size as the chain.
"""

import argparse
import time

import numpy as np

from rocus import BehaviorSpec, SamplerConfig, calibrate, run_chain
from rocus.baseline import top_k_select
from rocus.experiment import make_controller

ROWS = [
    ("ds", BehaviorSpec("straight_dev", target=0.0)),
    ("rrt", BehaviorSpec("straight_dev", target=0.0)),
    ("ds", BehaviorSpec("legibility", mode="maximal")),
    ("rrt", BehaviorSpec("legibility", mode="maximal")),
    ("ds", BehaviorSpec("clearance", mode="maximal")),
    ("rrt", BehaviorSpec("clearance", mode="maximal")),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-samples", type=int, default=5000)
    ap.add_argument("--burn-in", type=int, default=1000)
    ap.add_argument("--n-prior", type=int, default=1000)
    ap.add_argument("--alpha", type=float, default=0.01)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--top-k", type=int, default=0, help="also report a top-k baseline with this k")
    args = ap.parse_args()
    cfg = SamplerConfig(n_samples=args.n_samples, burn_in=args.burn_in, n_prior=args.n_prior, seed=args.seed)
    head = f"{'controller':<10} {'behavior':<14} {'mode':<9} {'prior':>8} {'posterior':>10} {'accept':>7}"
    print(head + (f" {'top-k':>8}" if args.top_k else "") + "   time")
    for name, base in ROWS:
        spec = BehaviorSpec(base.behavior_id, base.mode, base.target, alpha=args.alpha)
        ctrl = make_controller(name)
        t0 = time.time()
        stats, cal = calibrate(ctrl, spec, cfg)
        res = run_chain(ctrl, spec, cfg, cal)
        post = float(np.mean([s.behavior for s in res.kept]))
        line = f"{name:<10} {spec.behavior_id:<14} {spec.mode:<9} {stats.mean:>8.4f} {post:>10.4f} {res.acceptance_rate:>7.3f}"
        if args.top_k:
            tk = top_k_select(ctrl, spec, args.n_samples, args.top_k, np.random.default_rng([args.seed, 2]))
            line += f" {float(np.mean(tk.selected_values)):>8.4f}"
        print(line + f"   {time.time() - t0:.0f}s", flush=True)


if __name__ == "__main__":
    main()
