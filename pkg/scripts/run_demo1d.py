"""Run every one-dimensional scenario and print its headline numbers."""

import argparse
import json
from pathlib import Path

from pdmpbound import cli
from pdmpbound.experiments import DEMO_SCENARIOS

KEYS = ("mean", "min_position", "stuck_fraction", "right_left_ratio", "acceptance_high_to_low")


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--clock", type=float, default=1e4)
    p.add_argument("--out", type=Path, default=Path("runs/demo1d"))
    args = p.parse_args()
    for scenario in DEMO_SCENARIOS:
        out = args.out / scenario
        cli.main(["demo1d", "--scenario", scenario, "--seed", str(args.seed), "--clock", str(args.clock),
                  "--out", str(out), "--no-skeleton"])
        summary = json.loads((out / "summary.json").read_text())
        cells = [f"{k}={summary[k]:.4f}" for k in KEYS if isinstance(summary.get(k), float)]
        print(f"{scenario:18s} " + " ".join(cells))


if __name__ == "__main__":
    main()
