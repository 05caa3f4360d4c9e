#!/usr/bin/env python3
"""End-to-end desk-scale run: generate data, sweep both emulators on the
quadratic-mode variable, and summarize the score difference.

Takes roughly an hour on two cores; pass --workers to use more. Figures can
be rendered afterwards with the emubench-figures package, e.g.

    emubench-fig iv-sweep --in out/iv_cnnlstm.csv out/iv_lps.csv --out out/iv.png
"""

import argparse
import sys
from pathlib import Path

from emubench.cli import main as emubench


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="desk_run", help="output directory")
    parser.add_argument("--variable", default="precip", choices=["precip", "temp"])
    parser.add_argument("--seed", type=int, default=1850)
    parser.add_argument("--workers", type=int, default=2)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = out / "synth12x24"
    seed = str(args.seed)
    workers = str(args.workers)

    steps = [
        ["gen-data", "--out", str(dataset), "--seed", seed],
        ["validate", "--dataset", str(dataset)],
        ["run-iv", "--dataset", str(dataset), "--technique", "lps",
         "--variable", args.variable, "--profile", "desk",
         "--out", str(out / "iv_lps.csv"), "--seed", seed, "--workers", workers],
        ["run-iv", "--dataset", str(dataset), "--technique", "cnnlstm",
         "--variable", args.variable, "--profile", "desk",
         "--out", str(out / "iv_cnnlstm.csv"), "--seed", seed, "--workers", workers],
        ["report", "--results-a", str(out / "iv_cnnlstm.csv"),
         "--results-b", str(out / "iv_lps.csv"),
         "--out", str(out / "delta_rmse.csv")],
    ]
    for step in steps:
        if dataset.exists() and step[0] == "gen-data":
            print(f"skipping gen-data ({dataset} exists)")
            continue
        print(f"\n== emubench {' '.join(step)}")
        code = emubench(step)
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
