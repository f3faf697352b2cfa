"""Outlier-detection experiment on the synthetic data with a Blue-group shift."""

import argparse
from pathlib import Path

from afcp.harness import OUTLIER_METHODS, ExperimentConfig, run_outlier


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", type=int, nargs="+", default=[200, 500, 1000, 2000])
    p.add_argument("--methods", nargs="+", default=list(OUTLIER_METHODS))
    p.add_argument("--reps", type=int, default=30)
    p.add_argument("--n-test", type=int, default=500)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--max-picks", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="results")
    args = p.parse_args()

    cfg = ExperimentConfig(kind="outlier", methods=tuple(args.methods), sample_sizes=tuple(args.sizes),
                           n_test=args.n_test, n_reps=args.reps, alpha=args.alpha, max_picks=args.max_picks,
                           seed=args.seed)
    table = run_outlier(cfg, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "outlier.csv").write_text(table.to_csv())
    (out / "outlier.md").write_text(table.to_markdown())
    for n in cfg.sample_sizes:
        print(f"n={n}")
        for m in cfg.methods:
            fpr = table.value(m, n, "overall", "overall", "fpr")
            tpr = table.value(m, n, "overall", "overall", "tpr")
            blue = table.value(m, n, "Color", "Blue", "fpr")
            print(f"  {m:12s} fpr={fpr:.3f} tpr={tpr:.3f} blue_fpr={blue:.3f}")


if __name__ == "__main__":
    main()
