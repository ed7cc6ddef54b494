"""Run ESDL, the ADMM variant and the K-SVD baseline on the synthetic fixture.

    python3 scripts/run_synthetic_benchmark.py --repeats 5 --mean-shift 0
    python3 scripts/run_synthetic_benchmark.py --repeats 5 --mean-shift 2 --out results.json
"""

import argparse
import json

from structdict.bench import METHODS, ExperimentConfig, make_synthetic, report_json, run_experiment
from structdict.data import SplitSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--classes", type=int, default=10)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--subspace-dim", type=int, default=5)
    ap.add_argument("--per-class", type=int, default=40)
    ap.add_argument("--noise", type=float, default=0.05)
    ap.add_argument("--mean-shift", type=float, default=0.0)
    ap.add_argument("--atoms", type=int, default=40)
    ap.add_argument("--train-per-class", type=int, default=20)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--coding", default="omp:30")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="write all three reports as one JSON document")
    args = ap.parse_args()

    data = make_synthetic(args.classes, args.dim, args.subspace_dim, args.per_class,
                          args.noise, args.seed, args.mean_shift)
    reports = {}
    print(f"{'method':14s} {'accuracy':>9s} {'train s':>9s} {'test s':>9s}")
    for method in METHODS:
        cfg = ExperimentConfig(method=method, atoms=args.atoms, coding=args.coding,
                               split=SplitSpec(args.train_per_class), repeats=args.repeats,
                               seed=args.seed)
        r = run_experiment(cfg, data)
        reports[method] = json.loads(report_json(r))
        print(f"{method:14s} {r.mean_accuracy:9.3f} {r.train_seconds_mean:9.3f} {r.test_seconds_mean:9.3f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(reports, fh, sort_keys=True, indent=2)


if __name__ == "__main__":
    main()
