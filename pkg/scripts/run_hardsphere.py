"""Six hard discs without and with teleportation, on several seeds."""

import argparse
import json
from pathlib import Path

from pdmpbound import cli


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--clock", type=float, default=2000.0)
    p.add_argument("--rules", default="none,weighted")
    p.add_argument("--out", type=Path, default=Path("runs/hardsphere"))
    args = p.parse_args()
    for rule in args.rules.split(","):
        for seed in range(args.seeds):
            out = args.out / rule / f"seed_{seed}"
            cli.main(["hardsphere", "--teleport", rule, "--seed", str(seed), "--clock", str(args.clock),
                      "--out", str(out)])
            s = json.loads((out / "summary.json").read_text())
            print(f"{rule:10s} seed {seed}: teleports {s['teleports_accepted']:5d}, "
                  f"trace [{s['trace_min']:8.2f}, {s['trace_max']:8.2f}], overlaps {s['overlap']['events']}")


if __name__ == "__main__":
    main()
