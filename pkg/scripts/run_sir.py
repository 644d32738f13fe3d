"""Simulate the 50-individual epidemic and sample its latent infection times.

The post-notification infectivity ``gamma`` has no canonical value and must
be given.
"""

import argparse
import json
import time
from pathlib import Path

from pdmpbound import cli


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--kernel-seed", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clock", type=float, default=500.0)
    p.add_argument("--refresh-rate", type=float, default=0.0)
    p.add_argument("--individuals", default="1,2,3", help="1-based ids for marginal histograms")
    p.add_argument("--out", type=Path, default=Path("runs/sir"))
    args = p.parse_args()
    common = ["--gamma", str(args.gamma), "--kernel-seed", str(args.kernel_seed), "--seed", str(args.seed)]
    cli.main(["sir", "simulate", *common, "--out", str(args.out / "data")])
    print(json.loads((args.out / "data" / "summary.json").read_text())["counts"])
    start = time.perf_counter()
    cli.main(["sir", "sample", *common, "--data", str(args.out / "data" / "dataset.csv"), "--clock", str(args.clock),
              "--refresh-rate", str(args.refresh_rate), "--individuals", args.individuals,
              "--out", str(args.out / "posterior")])
    summary = json.loads((args.out / "posterior" / "summary.json").read_text())
    print(f"sampling took {time.perf_counter() - start:.1f} s")
    print(json.dumps(summary["event_counts"], indent=1))


if __name__ == "__main__":
    main()
