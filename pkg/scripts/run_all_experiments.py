#!/usr/bin/env python3
"""Run every example config in configs/ and print a verdict summary.

Usage: python scripts/run_all_experiments.py [--out-dir runs] [--seed N]

Each experiment writes its artifacts (report.json, samples.csv, cdf.csv,
ecf.csv) to <out-dir>/<config-stem>/. Exits nonzero if any verdict fails.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from sdlevy.cli import run

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out-dir", default="runs")
    parser.add_argument("--seed", type=int, default=None,
                        help="override every config's seed")
    parser.add_argument("--configs", default=str(ROOT / "configs"))
    args = parser.parse_args()

    failures = []
    for cfg_path in sorted(Path(args.configs).glob("*.json")):
        config = json.loads(cfg_path.read_text())
        if args.seed is not None:
            config["seed"] = args.seed
        out = Path(args.out_dir) / cfg_path.stem
        t0 = time.time()
        status = run(config, out_dir=out)
        verdict = "pass" if status == 0 else "FAIL"
        print(f"{cfg_path.stem:30s} {config['experiment']:28s} "
              f"{verdict:4s}  {time.time() - t0:6.1f}s  -> {out}")
        if status != 0:
            failures.append(cfg_path.stem)

    if failures:
        print(f"\n{len(failures)} experiment(s) failed: {', '.join(failures)}")
        return 1
    print("\nall experiments passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
