#!/usr/bin/env python3
"""Reproduce the gap-vs-budget rate fits on the smooth and nonsmooth suites.

Writes one CSV + JSONL pair per experiment under the chosen output directory
and prints the fitted slopes. The smooth quadratic is expected near -1 for
the mean-iterate suboptimality (the output point converges faster), the
nonsmooth l1 problem near -1/2.
"""

import argparse
import pathlib
import sys

from stepfree.cli import main as cli_main

EXPERIMENTS = {
    "quadratic": ["sweep", "--family", "quadratic", "--dimension", "5",
                  "--smoothness", "1.0", "--eta-eps", "0.25"],
    "l1": ["sweep", "--family", "l1", "--dimension", "5",
           "--eta-eps", "0.00006103515625"],
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="results", type=pathlib.Path)
    parser.add_argument("--reps", type=int, default=20)
    parser.add_argument("--budgets",
                        default="1024,2048,4096,8192,16384,32768,65536")
    args = parser.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    status = 0
    for name, base in EXPERIMENTS.items():
        print(f"== {name} sweep ==")
        code = cli_main(base + [
            "--budgets", args.budgets, "--reps", str(args.reps),
            "--csv", str(args.out_dir / f"sweep_{name}.csv"),
            "--jsonl", str(args.out_dir / f"sweep_{name}.jsonl"),
        ])
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())
