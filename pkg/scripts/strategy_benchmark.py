"""Benchmark uncertainty sampling against random selection on overlapping
Gaussians, paired across seeds.

Writes the experiment config it ran, per-run histories, and a
comparison table:

    python3 scripts/strategy_benchmark.py --out out/benchmark --seeds 10
"""

import argparse
import json
import math
from pathlib import Path

from alpool import cli


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="out/benchmark", help="output directory")
    parser.add_argument("--seeds", type=int, default=10, help="number of paired seeds")
    parser.add_argument("--n-per-class", type=int, default=1500)
    parser.add_argument("--rounds", type=int, default=1)
    args = parser.parse_args()

    # class means at +/-(a, a) so the overlap leaves a 10% irreducible error rate
    a = 1.2815515655446004 / math.sqrt(2.0)
    spec = {
        "dataset": {
            "kind": "synthetic",
            "n_per_class": args.n_per_class,
            "class_count": 2,
            "means": [[-a, -a], [a, a]],
            "stddev": 1.0,
        },
        "split": {"train_fraction": 2 / 3, "validation_fraction": 1 / 6,
                  "test_fraction": 1 / 6},
        "session": {"rounds": args.rounds},
        "seeds": list(range(args.seeds)),
        "strategies": ["uncertainty", "random"],
        "output_dir": args.out,
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = out / "experiment.json"
    config.write_text(json.dumps(spec, indent=2) + "\n")

    code = cli.main(["run", "--config", str(config)])
    if code == 0:
        print()
        print((out / "comparison.csv").read_text().strip())
    return code


if __name__ == "__main__":
    raise SystemExit(main())
