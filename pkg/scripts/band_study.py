"""Train on percentile bands of the uncertainty ranking and tabulate AUC
against band position.

Drops the top and bottom 10% of the ranking as outliers, then sweeps
decile bands of what remains, next to a full-cohort baseline:

    python3 scripts/band_study.py --out out/bands --seeds 5
"""

import argparse
import json
from pathlib import Path

from alpool import cli


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="out/bands", help="output directory")
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--n-per-class", type=int, default=300)
    args = parser.parse_args()

    deciles = [[i / 10, (i + 1) / 10] for i in range(10)]
    spec = {
        "dataset": {
            "kind": "synthetic",
            "n_per_class": args.n_per_class,
            "class_count": 2,
            "means": [[-0.9, -0.9], [0.9, 0.9]],
            "stddev": 1.0,
        },
        "split": {"train_fraction": 2 / 3, "validation_fraction": 1 / 6,
                  "test_fraction": 1 / 6},
        # the middle rate trains each band's model; small bands need a rate
        # that converges within the epoch budget
        "session": {"train": {"epochs": 30, "batch_size": 8},
                    "committee_lrs": [0.1, 0.05, 0.01]},
        "seeds": list(range(args.seeds)),
        "drop_top": 0.1,
        "drop_bottom": 0.1,
        "bands": deciles,
        "output_dir": args.out,
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = out / "bandstudy.json"
    config.write_text(json.dumps(spec, indent=2) + "\n")

    code = cli.main(["bandstudy", "--config", str(config)])
    if code == 0:
        print()
        print((out / "bands.csv").read_text().strip())
    return code


if __name__ == "__main__":
    raise SystemExit(main())
