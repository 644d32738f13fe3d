"""Command line entry point: ``pdmpbound <command> --seed N [options]``.

Every command writes into ``--out`` a skeleton file, command-specific CSV
tables and a ``summary.json``. With ``--chains K`` the seed is split into
``K`` independent children, each chain writing to ``chain_<k>/``.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import io, sir
from .axis import ShowcaseConfig, showcase_model
from .hardsphere import RULES

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


def _parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, required=True, help="non-negative integer seed")
    p.add_argument("--clock", type=float, help="final process time")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--refresh-rate", type=float, help="refreshment rate")
    p.add_argument("--format", choices=io.FORMATS, default="ndjson", help="skeleton file format")
    p.add_argument("--chains", type=int, default=1, help="independent chains run in parallel")
    p.add_argument("--no-skeleton", action="store_true", help="skip writing the full skeleton")
    return p


def build_parser() -> argparse.ArgumentParser:
    parent = _parent()
    parser = argparse.ArgumentParser(prog="pdmpbound", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo1d", parents=[parent], help="one-dimensional boundary scenarios")
    p.add_argument("--scenario", choices=ex.DEMO_SCENARIOS, required=True)
    p.add_argument("--jump", type=float, default=1.0, help="log density jump across the soft wall")
    p.add_argument("--kappa", type=float, default=1.0, help="atom weight")
    p.add_argument("--weight", type=float, default=1.0, help="repelling wall strength")
    p.add_argument("--sampler", choices=("zz", "bps"), default="zz")
    p.add_argument("--bins", type=int, default=20)

    p = sub.add_parser("showcase", parents=[parent], help="80-dimensional sticky Zig-Zag target")
    p.add_argument("--jump", type=float, required=True, help="soft wall jump c")
    p.add_argument("--gamma-seed", type=int, required=True, help="seed of the random precision matrix")
    p.add_argument("--dim", type=int, default=80)
    p.add_argument("--coords", type=str, default="", help="comma-separated 1-based coordinates to trace (default all)")

    p = sub.add_parser("sir", help="SIR epidemic with notifications")
    sir_sub = p.add_subparsers(dest="action", required=True)
    for name, helptext in (("simulate", "forward-simulate a dataset"), ("sample", "sample infection times")):
        q = sir_sub.add_parser(name, parents=[parent], help=helptext)
        q.add_argument("--params", type=Path, help="TOML file with SirParams fields")
        q.add_argument("--gamma", type=float, help="relative infectivity after notification")
        q.add_argument("--kernel-seed", type=int, help="seed of the infectivity kernel")
        if name == "sample":
            q.add_argument("--data", type=Path, required=True, help="dataset CSV written by simulate")
            q.add_argument("--individuals", type=str, default="", help="comma-separated 1-based ids")
            q.add_argument("--bins", type=int, default=50)

    p = sub.add_parser("hardsphere", parents=[parent], help="hard spheres with teleportation")
    p.add_argument("--config", type=Path, help="TOML file with N, dim, radii, radii_seed, rule, refresh_rate, clock")
    p.add_argument("--teleport", choices=RULES, help="teleport rule (default weighted)")
    p.add_argument("--N", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--radii", type=str, help="comma-separated radii (default 2 + 1.5 U)")
    p.add_argument("--radii-seed", type=int)
    return parser


# ----------------------------------------------------------- commands


def _write_skeleton(sk, args, out: Path):
    if not args.no_skeleton:
        io.write_skeleton(sk, out / f"skeleton.{args.format}", args.format)


def _demo1d(args, seed, out: Path):
    cfg = ex.Demo1dConfig(args.scenario, clock=args.clock or 1e4, jump=args.jump, kappa=args.kappa,
                          weight=args.weight, sampler=args.sampler,
                          refresh_rate=args.refresh_rate or 0.0, bins=args.bins)
    sk, summary, hist = ex.run_demo1d(cfg, seed)
    _write_skeleton(sk, args, out)
    io.write_trace(out / "histogram.csv", hist)
    return summary


def _showcase(args, seed, out: Path):
    cfg = ShowcaseConfig(jump=args.jump, gamma_seed=args.gamma_seed, dim=args.dim)
    sk, summary = ex.run_showcase(cfg, seed, clock=args.clock or 1e3, refresh_rate=args.refresh_rate or 0.0)
    summary["support_ok"] = ex.showcase_support_ok(sk, showcase_model(cfg))
    _write_skeleton(sk, args, out)
    coords = [int(c) - 1 for c in args.coords.split(",") if c] or range(cfg.dim)
    traces = out / "traces"
    traces.mkdir(exist_ok=True)
    for k in coords:
        io.write_trace(traces / f"coord_{k + 1:03d}.csv",
                       {"t": sk.t, "tag": sk.tags, "x": sk.x[:, k], "v": sk.v[:, k], "frozen": sk.frozen[:, k]})
    return summary


def load_sir_params(args) -> sir.SirParams:
    fields = {}
    if args.params is not None:
        with args.params.open("rb") as fh:
            fields.update(tomllib.load(fh))
    if args.gamma is not None:
        fields["gamma"] = args.gamma
    if args.kernel_seed is not None:
        fields["seed"] = args.kernel_seed
    if "seed_individual" in fields:
        # Files use 1-based individual ids.
        fields["seed_individual"] = int(fields["seed_individual"]) - 1
    else:
        fields["seed_individual"] = 24
    missing = [k for k in ("gamma", "seed") if k not in fields]
    if missing:
        raise SystemExit(f"missing SIR parameters: {', '.join(missing)} (use --params or flags)")
    return sir.SirParams(**fields)


def write_sir_dataset(path: Path, data: sir.SirData):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "tau_star", "tau_circ"])
        for i in range(data.d):
            w.writerow([i + 1, _time_cell(data.tau_star[i]), _time_cell(data.tau_circ[i])])


def _time_cell(t) -> str:
    # Unobserved times are written as empty cells.
    return repr(float(t)) if np.isfinite(t) else ""


def _time_value(cell: str) -> float:
    return float(cell) if cell.strip() else np.inf


def read_sir_dataset(path: Path, params: sir.SirParams) -> sir.SirData:
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    rows.sort(key=lambda r: int(r["id"]))
    ts = np.array([_time_value(r["tau_star"]) for r in rows])
    tc = np.array([_time_value(r["tau_circ"]) for r in rows])
    if ts.size != params.d:
        raise SystemExit(f"dataset has {ts.size} individuals, parameters say {params.d}")
    return sir.SirData(params.T, ts, tc, sir.infectivity_matrix(params), params.gamma, params.delay_beta)


def _sir(args, seed, out: Path):
    params = load_sir_params(args)
    if args.action == "simulate":
        _, init = ex.split_seed(seed)
        data, x_true = sir.forward_simulate(params, sir.infectivity_matrix(params), init)
        write_sir_dataset(out / "dataset.csv", data)
        io.write_trace(out / "truth.csv", {"individual": np.arange(1, params.d + 1), "x": x_true})
        echo = dict(vars(params), seed_individual=params.seed_individual + 1)
        return {"counts": sir.epidemic_counts(data, x_true), "params": echo}
    data = read_sir_dataset(args.data, params)
    individuals = [int(c) for c in args.individuals.split(",") if c]
    sk, summary, marginals = ex.run_sir_sample(data, params, seed, clock=args.clock or 500.0,
                                               refresh_rate=args.refresh_rate or 0.0,
                                               individuals=individuals, bins=args.bins)
    _write_skeleton(sk, args, out)
    for ind, table in marginals.items():
        io.write_trace(out / f"marginal_{ind:03d}.csv",
                       {"left": table["left"], "right": table["right"], "mass": table["mass"]})
        summary.setdefault("atom_mass", {})[str(ind)] = table["atom"]
    return summary


def load_sphere_config(args) -> ex.SphereRunConfig:
    fields = {}
    if args.config is not None:
        with args.config.open("rb") as fh:
            fields.update(tomllib.load(fh))
    if isinstance(fields.get("radii"), str):
        # Only the random-radii form is accepted as a string.
        fields.pop("radii")
    flags = {"N": args.N, "dim": args.dim, "radii_seed": args.radii_seed, "rule": args.teleport,
             "refresh_rate": args.refresh_rate, "clock": args.clock}
    fields.update({k: v for k, v in flags.items() if v is not None})
    if args.radii:
        fields["radii"] = [float(r) for r in args.radii.split(",") if r]
    if "radii" in fields:
        fields["radii"] = tuple(float(r) for r in fields["radii"])
    return ex.SphereRunConfig(**fields)


def _hardsphere(args, seed, out: Path):
    cfg = load_sphere_config(args)
    sk, summary, trace = ex.run_hardsphere(cfg, seed)
    _write_skeleton(sk, args, out)
    io.write_trace(out / "trace.csv", {"t": sk.t, "inner_product": trace})
    return summary


COMMANDS = {"demo1d": _demo1d, "showcase": _showcase, "sir": _sir, "hardsphere": _hardsphere}


def run_one(args, seed, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    summary = COMMANDS[args.command](args, seed, out)
    summary["seed"] = args.seed
    io.write_summary(out / "summary.json", summary)
    return summary


def _chain(job):
    args, seed, out = job
    run_one(args, seed, out)
    return str(out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed < 0:
        raise SystemExit("--seed must be non-negative")
    if args.chains < 1:
        raise SystemExit("--chains must be at least 1")
    if args.chains == 1:
        run_one(args, args.seed, args.out)
        return 0
    jobs = [(args, child, args.out / f"chain_{k}") for k, child in enumerate(ex.chain_seeds(args.seed, args.chains))]
    with ProcessPoolExecutor() as pool:
        for path in pool.map(_chain, jobs):
            print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
