"""Training time of ESDL vs the ADMM variant as the dictionary grows.

Both solvers start from the same per-class K-SVD dictionary and run with the same
iteration cap. Reported numbers are medians over paired, back-to-back runs.

    python3 scripts/timing_comparison.py --atoms 20 40 80 --iters 50
"""

import argparse

import numpy as np

from structdict.bench import make_synthetic
from structdict.core import EsdlParams
from structdict.data import SplitSpec, half_split_alternative, normalize_columns, train_test_split
from structdict.esdl import esdl_train
from structdict.ksvd import KsvdParams, init_dictionary_per_class
from structdict.sdl_l1 import AdmmParams, sdl_l1_train


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--atoms", type=int, nargs="+", default=[20, 40, 80])
    ap.add_argument("--iters", type=int, default=50)
    ap.add_argument("--trials", type=int, default=9)
    ap.add_argument("--per-class", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    data = normalize_columns(make_synthetic(10, 64, 5, args.per_class, 0.05, args.seed), log=[])
    train, _ = train_test_split(data, SplitSpec(args.per_class // 2, seed=args.seed), log=[])
    Y, Ya = half_split_alternative(train, args.seed, log=[])
    print(f"{'K':>4s} {'esdl s':>9s} {'admm s':>9s} {'ratio':>6s} {'esdl it':>8s} {'admm it':>8s}")
    for K in args.atoms:
        init = init_dictionary_per_class(Y, K, KsvdParams(seed=args.seed))
        te, ta = [], []
        for trial in range(args.trials):
            e = lambda: esdl_train(Y, Ya, K, EsdlParams(max_iters=args.iters), init_dictionary=init)
            a = lambda: sdl_l1_train(Y, Ya, K, AdmmParams(max_iters=args.iters), init_dictionary=init)
            if trial % 2:
                ra, re = a(), e()
            else:
                re, ra = e(), a()
            te.append(re.report.train_seconds)
            ta.append(ra.report.train_seconds)
        ratio = np.median(np.array(ta) / np.array(te))
        print(f"{K:4d} {np.median(te):9.4f} {np.median(ta):9.4f} {ratio:6.2f} "
              f"{re.report.iterations_run:8d} {ra.report.iterations_run:8d}")


if __name__ == "__main__":
    main()
