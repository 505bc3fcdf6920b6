#!/usr/bin/env python3
"""Regularized-solver race: WF (Fisher and backtracking steps), MM with both
curvatures, ADMM, and LBFGS, all minimizing the same Huber-TV-regularized
Poisson cost.

Runs the `reg-race` suite preset over a seed list and writes per-algorithm
median traces plus a final-metric comparison CSV.
"""

import argparse

from poisson_pr.cli import main as cli_main


def parse_args():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="out/regularized_race")
    p.add_argument("--seeds", type=int, nargs="+", default=list(range(10)))
    p.add_argument("--n-iters", type=int, default=200)
    p.add_argument("--beta", type=float, default=32.0)
    p.add_argument("--alpha", type=float, default=0.1)
    return p.parse_args()


if __name__ == "__main__":
    args = parse_args()
    argv = ["suite", "--preset", "reg-race", "--out", args.out,
            "--override", f"n_iters={args.n_iters}",
            "--override", f"regularizer.beta={args.beta}",
            "--override", f"regularizer.alpha={args.alpha}"]
    for s in args.seeds:
        argv += ["--seed", str(s)]
    raise SystemExit(cli_main(argv))
