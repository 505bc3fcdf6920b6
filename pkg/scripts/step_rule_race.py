#!/usr/bin/env python3
"""Convergence-speed comparison of WF step rules and an LBFGS baseline.

Runs the `step-rules` suite preset (Fisher step, backtracking, exact Gaussian
line search, LBFGS) over a seed list and writes per-algorithm median traces
plus a final-metric comparison CSV.
"""

import argparse

from poisson_pr.cli import main as cli_main


def parse_args():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="out/step_rule_race")
    p.add_argument("--seeds", type=int, nargs="+", default=list(range(10)))
    p.add_argument("--n-iters", type=int, default=200)
    return p.parse_args()


if __name__ == "__main__":
    args = parse_args()
    argv = ["suite", "--preset", "step-rules", "--out", args.out,
            "--override", f"n_iters={args.n_iters}"]
    for s in args.seeds:
        argv += ["--seed", str(s)]
    raise SystemExit(cli_main(argv))
