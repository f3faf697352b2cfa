"""Classification experiment on the synthetic medical data.

Writes a long-format CSV and a Markdown table with coverage and set size per
method, sample size and group, plus AFCP selection frequencies.
"""

import argparse
from pathlib import Path

from afcp.harness import CLASSIFY_METHODS, ExperimentConfig, run_classification


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", type=int, nargs="+", default=[200, 500, 1000, 2000])
    p.add_argument("--methods", nargs="+", default=list(CLASSIFY_METHODS))
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--n-test", type=int, default=500)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--blue-prob", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="results")
    args = p.parse_args()

    cfg = ExperimentConfig(kind="classify", methods=tuple(args.methods), sample_sizes=tuple(args.sizes),
                           n_test=args.n_test, n_reps=args.reps, alpha=args.alpha, blue_prob=args.blue_prob,
                           seed=args.seed)
    table = run_classification(cfg, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "medical.csv").write_text(table.to_csv())
    (out / "medical.md").write_text(table.to_markdown())
    for n in cfg.sample_sizes:
        print(f"n={n}")
        for m in cfg.methods:
            cov = table.value(m, n, "overall", "overall", "coverage")
            blue = table.value(m, n, "Color", "Blue", "coverage")
            size = table.value(m, n, "overall", "overall", "size")
            print(f"  {m:12s} coverage={cov:.3f} blue={blue:.3f} size={size:.3f}")


if __name__ == "__main__":
    main()
