"""Sticky Zig-Zag on the 80-dimensional boundary showcase target.

The soft-wall jump and the seed of the random precision matrix have no
canonical values, so both are required.
"""

import argparse
import json
import time
from pathlib import Path

from pdmpbound import cli


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--jump", type=float, required=True)
    p.add_argument("--gamma-seed", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clock", type=float, default=1e3)
    p.add_argument("--refresh-rate", type=float, default=0.1)
    p.add_argument("--coords", default="1,2", help="1-based coordinates to trace")
    p.add_argument("--out", type=Path, default=Path("runs/showcase"))
    args = p.parse_args()
    start = time.perf_counter()
    cli.main(["showcase", "--jump", str(args.jump), "--gamma-seed", str(args.gamma_seed), "--seed", str(args.seed),
              "--clock", str(args.clock), "--refresh-rate", str(args.refresh_rate), "--coords", args.coords,
              "--out", str(args.out)])
    summary = json.loads((args.out / "summary.json").read_text())
    print(f"runtime {time.perf_counter() - start:.1f} s, support ok {summary['support_ok']}")
    print(json.dumps(summary["event_counts"], indent=1))


if __name__ == "__main__":
    main()
