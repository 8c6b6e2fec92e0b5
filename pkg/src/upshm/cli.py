"""Command-line interface: ``upshm {generate,run,compare,sweep}``.

Exit codes: 0 success, 1 runtime failure (unreadable trace, bad fuzzy
config, unwritable output), 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import statistics
import sys
from pathlib import Path

from . import fuzzy as fz
from .policy import PolicyParams
from .sim import METRICS, SimParams, SimReport, aggregate, reports_to_csv, run_many
from .workload import TraceFormatError, WorkloadConfig, generate_trace, load_trace, metadata_path, save_trace

log = logging.getLogger("upshm")

DEFAULTS = {
    "policy": "UPSHM",
    "beta": [0.8],
    "theta": [0.85],
    "capacity": 100,
    "trend_window": 10,
    "priority_threshold": 0.5,
    "demand_threshold": 0.5,
    "seeds": list(range(1, 11)),
    "intervals": 100,
    "interval_duration": 1.0,
    "lambda_range": [10.0, 60.0],
    "mu_range": [10.0, 40.0],
    "fuzzy_config": None,
    "out": ".",
    "format": "csv",
    "jobs": 1,
}

# config-file sections -> flat option names
_SECTIONS = {
    "workload": {"num_intervals": "intervals", "interval_duration": "interval_duration",
                 "lambda_range": "lambda_range", "mu_range": "mu_range"},
    "policy": {"name": "policy", "beta": "beta", "theta": "theta", "capacity": "capacity",
               "priority_high_threshold": "priority_threshold", "demand_high_threshold": "demand_threshold"},
    "sim": {"trend_window": "trend_window", "seeds": "seeds", "jobs": "jobs"},
    "fuzzy": {"path": "fuzzy_config"},
    "output": {"dir": "out", "format": "format"},
}

AGG_FIELDS = ("policy", "beta", "theta_fraction", "theta", "n") + tuple(
    f"{m}_{stat}" for m in METRICS for stat in ("mean", "std", "sem"))
TABLE_FIELDS = ("metric", "BM", "UPSHM", "delta")


class CLIError(Exception):
    """Runtime failure reported as a one-line diagnostic with exit code 1."""


def theta_value(raw) -> float:
    """Accept ``0.85``, ``85`` or ``85%`` and return the fraction."""
    text = str(raw).strip()
    pct = text.endswith("%")
    value = float(text.rstrip("%"))
    if pct or value > 1:
        value /= 100.0
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"theta must be in (0, 1] or (0, 100]%, got {raw}")
    return value


def _listify(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def load_run_config(path) -> dict:
    """Flatten a JSON run config into option names used by the parser."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise CLIError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CLIError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise CLIError(f"{path}: config must be a JSON object")
    flat = {}
    for section, body in data.items():
        if section not in _SECTIONS or not isinstance(body, dict):
            raise CLIError(f"{path}: unknown config section {section!r}")
        for key, value in body.items():
            if key not in _SECTIONS[section]:
                raise CLIError(f"{path}: unknown key {section}.{key}")
            flat[_SECTIONS[section][key]] = value
    if "fuzzy_config" in flat and flat["fuzzy_config"] is not None:
        flat["fuzzy_config"] = str(Path(path).parent / flat["fuzzy_config"])
    return flat


def resolve_options(args: argparse.Namespace) -> dict:
    """Merge flag > config file > built-in default."""
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        opts.update(load_run_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    opts["beta"] = [float(b) for b in _listify(opts["beta"])]
    opts["theta"] = [theta_value(t) for t in _listify(opts["theta"])]
    opts["seeds"] = [int(s) for s in _listify(opts["seeds"])]
    if not opts["seeds"]:
        raise CLIError("at least one seed is required")
    return opts


def _workload(opts: dict, seed: int) -> WorkloadConfig:
    try:
        return WorkloadConfig(num_intervals=int(opts["intervals"]), lambda_range=tuple(opts["lambda_range"]),
                              mu_range=tuple(opts["mu_range"]), interval_duration=float(opts["interval_duration"]),
                              rng_seed=seed)
    except ValueError as exc:
        raise CLIError(f"invalid workload: {exc}") from None


def _fuzzy(opts: dict) -> fz.FuzzyConfig:
    if opts["fuzzy_config"] is None:
        return fz.default_config()
    try:
        return fz.load_fuzzy_config(opts["fuzzy_config"])
    except OSError as exc:
        raise CLIError(f"cannot read fuzzy config {opts['fuzzy_config']}: {exc.strerror}") from None
    except ValueError as exc:
        raise CLIError(f"bad fuzzy config: {exc}") from None


def _sim_params(opts: dict, policy: str, beta: float, theta: float, seed: int, fuzzy_config) -> SimParams:
    try:
        pp = PolicyParams(beta=beta, theta_fraction=theta, capacity=int(opts["capacity"]),
                          priority_high_threshold=float(opts["priority_threshold"]),
                          demand_high_threshold=float(opts["demand_threshold"]))
        return SimParams(policy, pp, fuzzy_config, opts["trend_window"], seed)
    except ValueError as exc:
        raise CLIError(str(exc)) from None


def _traces(opts: dict, trace_path):
    """``[(seed, trace)]``: the given file once, or one generated trace per seed."""
    if trace_path:
        try:
            return [(0, load_trace(trace_path))]
        except FileNotFoundError:
            raise CLIError(f"trace not found: {trace_path}") from None
        except TraceFormatError as exc:
            raise CLIError(str(exc)) from None
    return [(s, generate_trace(_workload(opts, s))) for s in opts["seeds"]]


def _aggregate_rows(reports: list[SimReport]) -> list[dict]:
    """One row per (policy, beta, theta) cell with mean/std/sem of each metric."""
    cells: dict = {}
    for r in reports:
        key = (r.params["policy"], r.params["beta"], r.params["theta_fraction"], r.params["theta"])
        cells.setdefault(key, []).append(r)
    rows = []
    for (policy, beta, frac, theta), group in cells.items():
        agg = aggregate(group)
        row = {"policy": policy, "beta": beta, "theta_fraction": frac, "theta": theta, "n": agg["n"]}
        for m in METRICS:
            row.update({f"{m}_{stat}": agg[m][stat] for stat in ("mean", "std", "sem")})
        rows.append(row)
    return rows


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise CLIError(f"cannot write {path}: {exc.strerror}") from None
    log.info("wrote %s", path)


def _rows_to_csv(rows: list[dict], header) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def load_aggregate_csv(path) -> list[dict]:
    """Read an aggregate CSV written by ``run``/``compare``/``sweep``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != AGG_FIELDS:
            raise ValueError(f"unexpected aggregate header: {reader.fieldnames}")
        out = []
        for row in reader:
            parsed = {k: float(v) for k, v in row.items() if k not in ("policy", "theta", "n")}
            out.append({"policy": row["policy"], "theta": int(row["theta"]), "n": int(row["n"]), **parsed})
        return out


def load_compare_table(path) -> list[dict]:
    """Read ``compare_table.csv``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TABLE_FIELDS:
            raise ValueError(f"unexpected compare table header: {reader.fieldnames}")
        return [{"metric": row["metric"], **{k: float(row[k]) for k in TABLE_FIELDS[1:]}} for row in reader]


def _emit(opts: dict, stem: str, reports: list[SimReport], extra: dict | None = None) -> None:
    out = Path(opts["out"])
    agg_rows = _aggregate_rows(reports)
    if opts["format"] == "json":
        doc = {"reports": [r.to_dict() for r in reports], "aggregate": agg_rows}
        if extra:
            doc.update(extra)
        _write(out / f"{stem}.json", json.dumps(doc, sort_keys=True, indent=1) + "\n")
    else:
        _write(out / f"{stem}.csv", reports_to_csv(reports))
        _write(out / f"{stem}_aggregate.csv", _rows_to_csv(agg_rows, AGG_FIELDS))


# -- subcommands --------------------------------------------------------------

def cmd_generate(args) -> int:
    opts = resolve_options(args)
    seed = args.seed if args.seed is not None else opts["seeds"][0]
    trace = generate_trace(_workload(opts, seed))
    path = Path(args.out_file)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_trace(trace, path)
    except OSError as exc:
        raise CLIError(f"cannot write {path}: {exc.strerror}") from None
    per_interval = [len(g) for g in trace.tasks_by_interval()]
    print(f"wrote {path} and {metadata_path(path)}")
    print(f"E={trace.num_tasks} W={trace.num_intervals} seed={seed}")
    print(f"tasks/interval mean={statistics.fmean(per_interval):.2f} "
          f"min={min(per_interval)} max={max(per_interval)}")
    print(f"lambda mean={statistics.fmean(iv.lam for iv in trace.intervals):.3f} "
          f"mu mean={statistics.fmean(iv.mu for iv in trace.intervals):.3f}")
    return 0


def cmd_run(args) -> int:
    opts = resolve_options(args)
    fuzzy_config = _fuzzy(opts)
    jobs = [(tr, _sim_params(opts, opts["policy"], opts["beta"][0], opts["theta"][0], seed, fuzzy_config))
            for seed, tr in _traces(opts, args.trace)]
    reports = run_many(jobs, n_jobs=opts["jobs"])
    _emit(opts, "run", reports)
    agg = aggregate(reports)
    p = reports[0].params
    print(f"policy={p['policy']} beta={p['beta']} theta={p['theta']} ({p['theta_fraction']:.0%} of K={p['capacity']}) "
          f"runs={agg['n']}")
    for m in METRICS:
        print(f"  {m:<6} mean={agg[m]['mean']:.4f} std={agg[m]['std']:.4f}")
    return 0


def cmd_compare(args) -> int:
    opts = resolve_options(args)
    fuzzy_config = _fuzzy(opts)
    beta, theta = opts["beta"][0], opts["theta"][0]
    jobs = []
    for seed, tr in _traces(opts, args.trace):
        for policy in ("BM", "UPSHM"):
            jobs.append((tr, _sim_params(opts, policy, beta, theta, seed, fuzzy_config)))
    reports = run_many(jobs, n_jobs=opts["jobs"])
    bm = aggregate([r for r in reports if r.params["policy"] == "BM"])
    up = aggregate([r for r in reports if r.params["policy"] == "UPSHM"])
    table = [{"metric": m, "BM": bm[m]["mean"], "UPSHM": up[m]["mean"], "delta": up[m]["mean"] - bm[m]["mean"]}
             for m in METRICS]
    if opts["format"] == "json":
        _emit(opts, "compare", reports, {"table": table})
    else:
        _emit(opts, "compare", reports)
        _write(Path(opts["out"]) / "compare_table.csv", _rows_to_csv(table, TABLE_FIELDS))
    print(f"beta={beta} theta={theta:.0%} runs={bm['n']}")
    print(f"{'metric':<8}{'BM':>10}{'UPSHM':>10}{'delta':>10}")
    for row in table:
        print(f"{row['metric']:<8}{row['BM']:>10.4f}{row['UPSHM']:>10.4f}{row['delta']:>+10.4f}")
    return 0


def cmd_sweep(args) -> int:
    opts = resolve_options(args)
    fuzzy_config = _fuzzy(opts)
    jobs = []
    for seed, tr in _traces(opts, args.trace):
        for beta in opts["beta"]:
            for theta in opts["theta"]:
                jobs.append((tr, _sim_params(opts, opts["policy"], beta, theta, seed, fuzzy_config)))
    reports = run_many(jobs, n_jobs=opts["jobs"])
    _emit(opts, "sweep", reports)
    for row in _aggregate_rows(reports):
        metrics = " ".join(f"{m}={row[m + '_mean']:.4f}" for m in METRICS)
        print(f"beta={row['beta']} theta={row['theta_fraction']:.0%} {metrics}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="upshm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config (flags override it)")
    common.add_argument("--seeds", type=int, nargs="+", help="workload seeds (default 1..10)")
    common.add_argument("--intervals", type=int, help="number of time intervals W")
    common.add_argument("--interval-duration", type=float, dest="interval_duration")
    common.add_argument("--lambda-range", type=float, nargs=2, dest="lambda_range", metavar=("LO", "HI"))
    common.add_argument("--mu-range", type=float, nargs=2, dest="mu_range", metavar=("LO", "HI"))

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--trace", help="trace CSV (default: generate one per seed)")
    sim.add_argument("--capacity", type=int, help="queue capacity K")
    sim.add_argument("--trend-window", type=int, dest="trend_window")
    sim.add_argument("--priority-threshold", type=float, dest="priority_threshold")
    sim.add_argument("--demand-threshold", type=float, dest="demand_threshold")
    sim.add_argument("--fuzzy-config", dest="fuzzy_config", help="JSON fuzzy configuration")
    sim.add_argument("--out", help="output directory")
    sim.add_argument("--format", choices=("csv", "json"))
    sim.add_argument("--jobs", type=int, help="worker processes")

    g = sub.add_parser("generate", parents=[common], help="write a synthetic task trace")
    g.add_argument("--out", dest="out_file", default="trace.csv", help="trace CSV path")
    g.add_argument("--seed", type=int, help="seed (default: first of --seeds)")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", parents=[common, sim], help="simulate one policy")
    r.add_argument("--policy", type=str.upper, choices=("UPSHM", "BM"))
    r.add_argument("--beta", type=float)
    r.add_argument("--theta", type=theta_value, help="0.85, 85 or 85%%")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", parents=[common, sim], help="UPSHM vs BM on identical traces")
    c.add_argument("--beta", type=float)
    c.add_argument("--theta", type=theta_value)
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("sweep", parents=[common, sim], help="grid over beta and theta")
    s.add_argument("--policy", type=str.upper, choices=("UPSHM", "BM"))
    s.add_argument("--beta", type=float, nargs="+")
    s.add_argument("--theta", type=theta_value, nargs="+")
    s.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"upshm: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
