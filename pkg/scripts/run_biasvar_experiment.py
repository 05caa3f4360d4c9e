#!/usr/bin/env python3
"""Scalar bias-variance experiment at desk (K=200) or paper (K=2000) scale.

Outputs biasvar.csv, spectra.csv, and fitbands.csv; render with

    emubench-fig biasvar --in out/biasvar.csv --out out/biasvar.png
    emubench-fig spectra --in out/spectra.csv --out out/spectra.png
"""

import argparse
import sys
from pathlib import Path

from emubench.cli import main as emubench


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="biasvar_run")
    parser.add_argument("--profile", default="desk", choices=["desk", "paper"])
    parser.add_argument("--seed", type=int, default=1850)
    parser.add_argument("--workers", type=int, default=2)
    args = parser.parse_args()
    Path(args.out).mkdir(parents=True, exist_ok=True)
    return emubench([
        "run-biasvar", "--out-dir", args.out, "--profile", args.profile,
        "--seed", str(args.seed), "--workers", str(args.workers),
    ])


if __name__ == "__main__":
    sys.exit(main())
