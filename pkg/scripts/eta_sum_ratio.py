"""Empirical stepsize-sum constant ``(sum eta_k)(sum L_k) / T^3`` across instances.

The proved lower bound on this ratio is 1/1000; this script logs how far
above it actual runs sit, without asserting anything.

    python3 scripts/eta_sum_ratio.py --seeds 0 1 2 --horizons 50 200 500
"""

import argparse
import sys

from flagopt.flag import FlagConfig, flag_run
from flagopt.generators import GENERATORS, ProblemDescriptor, generate_problem


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 7])
    ap.add_argument("--horizons", type=int, nargs="+", default=[50, 200, 500])
    args = ap.parse_args(argv)

    print("generator\tseed\tT\titers\tratio\tJ_B\tstatus")
    lowest = float("inf")
    for gen in GENERATORS:
        for seed in args.seeds:
            box = (-1.0, 1.0) if gen == "logistic_l1" else (-10.0, 10.0)
            problem = generate_problem(ProblemDescriptor(gen, seed=seed, box_lower=box[0],
                                                         box_upper=box[1]))
            for T in args.horizons:
                _, trace = flag_run(problem, FlagConfig(T=T))
                ratio = trace.eta_sum_ratio
                lowest = min(lowest, ratio)
                print(f"{gen}\t{seed}\t{T}\t{trace.iterations}\t{ratio:.4f}\t{trace.J_B:.4f}\t{trace.status}")
    print(f"# smallest ratio {lowest:.4f} (proved bound 0.001)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
