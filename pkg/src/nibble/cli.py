"""Command line entry point: run, trajectory, verify, sweep, monitor."""

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from nibble import io as nio
from nibble.config import ConfigError, RunConfig
from nibble.engine import export_binary, export_text, run
from nibble.monitors import monitor_record
from nibble.trajectory import build_tables, default_n, verify_bounds
from nibble.verifier import calibrate_star_size, certificate, star_statistic, thread_count

log = logging.getLogger("nibble")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_VERIFY = 0, 2, 3, 4


def _dump_json(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _config_from_args(args):
    data = {}
    if args.config:
        data = RunConfig.loads(Path(args.config).read_text()).to_dict()
    overrides = {
        "N": args.n, "beta": args.beta, "delta": args.delta, "bigC": args.bigC,
        "seed": args.seed, "steps_override": args.steps_override,
        "monitor_level": args.monitor_level, "n": args.set_size, "out_dir": args.out,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(data)


def _monitor_rows(records):
    rows = []
    for rec in records:
        for name, ev in rec["events"].items():
            wit = "" if ev["witness"] is None else " ".join(str(v) for v in ev["witness"])
            rows.append((rec["step"], name, ev["worstRatio"], wit))
    return rows


def execute(config):
    """Run one configuration and write its artifacts into config.out_dir."""
    result = run(config)
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _dump_json(result.manifest, out / "manifest.json")
        (out / "hypergraph.txt").write_text(export_text(config.N, result.H))
        (out / "hypergraph.bin").write_bytes(export_binary(result.H))
        if result.monitors:
            nio.write_csv(out / "monitors.csv", ["step", "event", "worstRatio", "witness"],
                          _monitor_rows(result.monitors))
    return result


def cmd_run(args):
    config = _config_from_args(args)
    result = execute(config)
    if not config.out_dir:
        _dump_json(result.manifest)
    return EXIT_OK


def trajectory_rows(table):
    return [(i, table.q[i], table.pi[i], table.tau[i], table.threshold[i])
            for i in range(table.I + 1)]


TRAJECTORY_COLUMNS = ["i", "q_i", "pi_i", "tau_i", "threshold_i"]


def cmd_trajectory(args):
    try:
        table = build_tables(args.n, args.beta, args.delta, steps=args.steps_override)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    report = verify_bounds(table)
    payload = {"table": table.to_dict(), "bounds": report.to_dict()}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        nio.write_csv(out / "trajectory.csv", TRAJECTORY_COLUMNS, trajectory_rows(table))
        _dump_json(payload, out / "bounds.json")
    else:
        _dump_json(payload)
    return EXIT_OK if report.all_passed else EXIT_VERIFY


def cmd_verify(args):
    ranks, N = nio.read_export(args.export, args.n)
    n = args.set_size if args.set_size is not None else min(default_n(N), (N - 1) // 2)
    if args.mode == "sampled" and 2 * n + 1 > N:
        raise ConfigError(f"n = {n} too large for sampled mode with N = {N}")
    cert = certificate(np.asarray(ranks, np.int64), N, n, mode=args.mode,
                       k=args.samples, seed=args.seed or 0)
    _dump_json(cert, args.out)
    return EXIT_OK if cert["k4minusFree"] else EXIT_VERIFY


def parse_seeds(items):
    seeds = []
    for item in items:
        for part in item.split(","):
            if "-" in part:
                lo, hi = part.split("-")
                seeds.extend(range(int(lo), int(hi) + 1))
            elif part:
                seeds.append(int(part))
    if not seeds:
        raise ConfigError("at least one seed is required")
    return seeds


def sweep(template, seeds, out_dir, star_samples=10_000):
    """Run one config per seed; returns (per-step rows, star rows, failures)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def one(seed):
        cfg = RunConfig.from_dict({**template.to_dict(), "seed": seed,
                                   "out_dir": str(out / f"seed_{seed}")})
        res = execute(cfg)
        n = calibrate_star_size(res.H, cfg.N, k=star_samples, seed=seed) or cfg.set_size
        star = star_statistic(res.H, cfg.N, n, res.table, k=star_samples, seed=seed)
        return res, star

    results, failures = {}, {}
    with ThreadPoolExecutor(max_workers=thread_count()) as ex:
        futures = {s: ex.submit(one, s) for s in seeds}
        for s in seeds:
            try:
                results[s] = futures[s].result()
            except Exception as exc:  # reported per seed; the sweep goes on
                failures[s] = f"{type(exc).__name__}: {exc}"
                log.error("seed %s failed: %s", s, exc)
    step_rows, star_rows = [], []
    if results:
        first = next(iter(results.values()))[0]
        table = first.table
        fracs = {s: [1.0] + [r.actual_open_fraction for r in res.reports]
                 for s, (res, _) in results.items()}
        depth = max(len(f) for f in fracs.values())
        for i in range(depth):
            vals = [f[i] for f in fracs.values() if i < len(f)]
            step_rows.append((i, float(table.q[i]), float(np.mean(vals)),
                              float(np.min(vals)), float(np.max(vals)), len(vals)))
        for s, (_, star) in results.items():
            star_rows.append((s, star["n"], star["mean_ratio"], star["min_ratio"],
                              star["max_ratio"], star["zeros"]))
    nio.write_csv(out / "aggregate.csv",
                  ["step", "q_i", "mean_open_fraction", "min_open_fraction",
                   "max_open_fraction", "seeds"], step_rows)
    mean_ratio = float(np.mean([r[2] for r in star_rows])) if star_rows else float("nan")
    nio.write_csv(out / "star.csv",
                  ["seed", "n", "mean_ratio", "min_ratio", "max_ratio", "zeros"],
                  star_rows + ([("mean", "", mean_ratio, "", "", "")] if star_rows else []))
    _dump_json({"seeds": seeds, "succeeded": sorted(results), "failures": failures,
                "mean_star_ratio": mean_ratio}, out / "summary.json")
    return step_rows, star_rows, failures


def cmd_sweep(args):
    template = _config_from_args(args)
    seeds = parse_seeds(args.seeds)
    out = args.out or "sweep_out"
    _, _, failures = sweep(template, seeds, out, star_samples=args.samples)
    return EXIT_OK if not failures else EXIT_VERIFY


def cmd_monitor(args):
    config = _config_from_args(args)
    if config.monitor_level == "off":
        config.monitor_level = "light"
    result = run(config, monitor=monitor_record)
    rows = _monitor_rows(result.monitors)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        nio.write_csv(out / "monitors.csv", ["step", "event", "worstRatio", "witness"], rows)
        _dump_json(result.monitors, out / "monitors.json")
    else:
        _dump_json(result.monitors)
    return EXIT_OK


def _run_flags(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--n", type=int, help="number of vertices N")
    p.add_argument("--beta", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--bigC", type=float, help="constant C in n = C sqrt(N log N)")
    p.add_argument("--seed", type=int)
    p.add_argument("--steps-override", type=int)
    p.add_argument("--set-size", type=int, help="override the derived n")
    p.add_argument("--monitor-level", choices=["off", "light", "full"])
    p.add_argument("--export", "--out", dest="out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="nibble", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the nibble process")
    _run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trajectory", help="emit q, pi, tau tables and the bound report")
    p.add_argument("--n", type=int, required=True, help="number of vertices N")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--steps-override", type=int)
    p.add_argument("--out", help="output directory (default: JSON to stdout)")
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("verify", help="certify an exported hypergraph")
    p.add_argument("export", help="hypergraph.txt or hypergraph.bin")
    p.add_argument("--n", type=int, help="number of vertices (default: from the export)")
    p.add_argument("--set-size", type=int, help="star size n to probe")
    p.add_argument("--mode", choices=["exact", "sampled"], default="sampled")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="certificate path (default: stdout)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="run a config over several seeds")
    _run_flags(p)
    p.add_argument("--seeds", nargs="+", required=True, help="e.g. 1 2 3 or 1-20")
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("monitor", help="run with event monitors and emit their records")
    _run_flags(p)
    p.set_defaults(func=cmd_monitor)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, nio.MalformedExport, ValueError) as exc:
        print(f"nibble: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"nibble: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
