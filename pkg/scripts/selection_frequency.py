"""Print how often the adaptive method selects each attribute subset, by sample size.

Reads a CSV written by ``afcp run`` or the experiment scripts.
"""

import argparse
import csv
from collections import defaultdict


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("csv")
    p.add_argument("--method", default="afcp")
    args = p.parse_args()

    freqs = defaultdict(dict)
    with open(args.csv, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["method"] == args.method and row["metric"] == "frequency":
                freqs[int(row["sample_size"])][row["level"]] = float(row["value"])
    if not freqs:
        raise SystemExit(f"no selection frequencies for method {args.method!r}")
    names = sorted({k for f in freqs.values() for k in f}, key=lambda s: (s != "none", s.count("+"), s))
    print("n".rjust(6) + "".join(name.rjust(16) for name in names))
    for n in sorted(freqs):
        print(str(n).rjust(6) + "".join(f"{freqs[n].get(name, 0.0):16.3f}" for name in names))


if __name__ == "__main__":
    main()
