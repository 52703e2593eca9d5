"""Mixing diagnostic across seeds: second-half vs third-quarter trace means.

    python3 scripts/mixing_seeds.py [--controller ds] [--behavior straight_dev] [--seeds 0-8]
"""

import argparse

from rocus import BehaviorSpec, SamplerConfig, calibrate, run_chain
from rocus.experiment import make_controller


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--controller", default="ds", choices=["ds", "rrt"])
    ap.add_argument("--behavior", default="straight_dev")
    ap.add_argument("--mode", default="matching", choices=["matching", "maximal"])
    ap.add_argument("--n-samples", type=int, default=5000)
    ap.add_argument("--burn-in", type=int, default=1000)
    ap.add_argument("--seeds", default="0-8", help="inclusive range a-b")
    args = ap.parse_args()
    lo, hi = (int(x) for x in args.seeds.split("-"))
    spec = BehaviorSpec(args.behavior, args.mode)
    ctrl = make_controller(args.controller)
    n_pass = 0
    for seed in range(lo, hi + 1):
        cfg = SamplerConfig(n_samples=args.n_samples, burn_in=args.burn_in, seed=seed)
        _, cal = calibrate(ctrl, spec, cfg)
        res = run_chain(ctrl, spec, cfg, cal)
        t, n = res.trace, args.n_samples
        second, third_q = t[n // 2:].mean(), t[n // 2: 3 * n // 4].mean()
        ok = abs(second - third_q) <= 0.2 * abs(third_q)
        n_pass += ok
        print(f"seed {seed:3d}  second half {second:.4f}  third quarter {third_q:.4f}  "
              f"accept {res.acceptance_rate:.3f}  {'ok' if ok else 'FAIL'}", flush=True)
    print(f"{n_pass}/{hi - lo + 1} seeds within 20%")


if __name__ == "__main__":
    main()
