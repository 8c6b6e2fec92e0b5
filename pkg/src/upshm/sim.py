"""Event-driven simulation of a single node with a bounded FCFS queue.

Completions are processed lazily: before each arrival every admitted task
finishing at or before that instant leaves the system. Decisions depend only
on the queue length at arrival instants, so this is equivalent to a full
event calendar.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import statistics
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from joblib import Parallel, delayed

from . import fuzzy as fz
from .policy import Decision, NodeState, PolicyParams, decide_baseline, decide_upshm, is_high_demand, is_high_priority
from .queueing import QueueParams, overload_probability
from .trend import DEFAULT_WINDOW, RateSeries, trend_of_window
from .workload import TaskTrace, WorkloadConfig, generate_trace

POLICIES = ("UPSHM", "BM")
METRICS = ("phi", "eta", "omega", "psi")


@dataclass(frozen=True)
class SimParams:
    policy: str = "UPSHM"
    policy_params: PolicyParams = field(default_factory=PolicyParams)
    fuzzy_config: fz.FuzzyConfig | None = None
    trend_window: int | None = DEFAULT_WINDOW
    rng_seed: int = 0

    def __post_init__(self):
        policy = self.policy.upper()
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}, expected one of {POLICIES}")
        object.__setattr__(self, "policy", policy)
        if self.fuzzy_config is None:
            object.__setattr__(self, "fuzzy_config", fz.default_config())
        if self.trend_window is not None and self.trend_window < 2:
            raise ValueError("trend_window must be >= 2 (or None for the full history)")

    def echo(self) -> dict:
        pp = self.policy_params
        return {
            "policy": self.policy,
            "beta": pp.beta,
            "theta_fraction": pp.theta_fraction,
            "theta": pp.theta,
            "capacity": pp.capacity,
            "priority_high_threshold": pp.priority_high_threshold,
            "demand_high_threshold": pp.demand_high_threshold,
            "trend_window": self.trend_window,
            "rng_seed": self.rng_seed,
        }


@dataclass(frozen=True)
class Metrics:
    phi: float
    eta: float
    omega: float
    psi: float
    eta_defined: bool = True
    omega_defined: bool = True


def compute_metrics(executed: int, arrivals: int, hp_executed: int, hp_arrivals: int,
                    hd_executed: int, hd_arrivals: int, queue_full_events: int) -> Metrics:
    """Local-execution ratios and the queue-full rate.

    ``eta``/``omega`` are 0 with ``*_defined=False`` when no high-priority
    (high-demand) task arrived.
    """
    if arrivals <= 0:
        raise ValueError("no arrivals: metrics are undefined")
    return Metrics(
        phi=executed / arrivals,
        eta=hp_executed / hp_arrivals if hp_arrivals else 0.0,
        omega=hd_executed / hd_arrivals if hd_arrivals else 0.0,
        psi=queue_full_events / arrivals,
        eta_defined=hp_arrivals > 0,
        omega_defined=hd_arrivals > 0,
    )


@dataclass(frozen=True)
class SimReport:
    phi: float
    eta: float
    omega: float
    psi: float
    arrivals: int
    executed: int
    offloaded: int
    queue_full_events: int
    high_priority_arrivals: int
    high_priority_executed: int
    high_demand_arrivals: int
    high_demand_executed: int
    eta_defined: bool
    omega_defined: bool
    oi: tuple[float, ...] = ()
    pdelta: tuple[float, ...] = ()
    tau_norm: tuple[float, ...] = ()
    occupancy: tuple[int, ...] = ()
    params: dict = field(default_factory=dict, compare=False)
    decisions: tuple[Decision, ...] = field(default=(), compare=False, repr=False)

    def outcome(self) -> dict:
        """Every simulated quantity, without the parameter echo."""
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("params", "decisions")}
        for key in SERIES_FIELDS:
            d[key] = list(d[key])
        return d

    def to_dict(self) -> dict:
        d = self.outcome()
        d["params"] = dict(self.params)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def csv_row(self) -> dict:
        row = {k: self.params.get(k) for k in PARAM_FIELDS}
        row.update({k: getattr(self, k) for k in SCALAR_FIELDS})
        return row

    @classmethod
    def from_dict(cls, d: dict) -> SimReport:
        kwargs = {k: d[k] for k in SCALAR_FIELDS}
        kwargs.update({k: tuple(d.get(k, ())) for k in SERIES_FIELDS})
        kwargs["params"] = dict(d.get("params", {}))
        return cls(**kwargs)


SCALAR_FIELDS = ("phi", "eta", "omega", "psi", "arrivals", "executed", "offloaded", "queue_full_events",
                 "high_priority_arrivals", "high_priority_executed", "high_demand_arrivals",
                 "high_demand_executed", "eta_defined", "omega_defined")
SERIES_FIELDS = ("oi", "pdelta", "tau_norm", "occupancy")
PARAM_FIELDS = ("policy", "beta", "theta_fraction", "theta", "capacity", "trend_window", "rng_seed")


def run_simulation(trace: TaskTrace, params: SimParams) -> SimReport:
    if trace.num_tasks == 0:
        raise ValueError("trace has no tasks")
    try:
        trace.validate()
    except ValueError as exc:
        raise ValueError(f"inconsistent trace: {exc}") from None

    pp = params.policy_params
    cfg = params.fuzzy_config
    state = NodeState(pp.capacity)
    mus: list[float] = []
    oi_s, pd_s, tau_s, occ_s = [], [], [], []
    log: list[Decision] = []

    for j, tasks in enumerate(trace.tasks_by_interval()):
        iv = trace.intervals[j]
        mus.append(iv.mu)
        # inputs are constant within an interval, so OI is computed once per interval
        pdelta = overload_probability(QueueParams(iv.lam, iv.mu, pp.capacity, pp.theta))
        tau_norm = trend_of_window(RateSeries(tuple(mus), params.trend_window))
        oi = fz.overload_indicator(cfg, pdelta, tau_norm)
        oi_s.append(oi)
        pd_s.append(pdelta)
        tau_s.append(tau_norm)

        for task in tasks:
            state.advance(task.arrival_time)
            hp = is_high_priority(task, pp)
            hd = is_high_demand(task, pp)
            state.arrivals += 1
            state.high_priority_arrivals += hp
            state.high_demand_arrivals += hd
            if state.is_full:
                state.queue_full_events += 1
            if params.policy == "UPSHM":
                decision = decide_upshm(state, task, oi, pp)
            else:
                decision = decide_baseline(state, task, pp)
            if decision.local:
                state.admit(task, task.arrival_time)
                state.executed += 1
                state.high_priority_executed += hp
                state.high_demand_executed += hd
            else:
                state.offloaded += 1
            log.append(decision)

        state.advance((j + 1) * trace.interval_duration)
        occ_s.append(state.in_queue_count)

    state.advance(math.inf)
    state.check_invariants()
    m = compute_metrics(state.executed, state.arrivals, state.high_priority_executed,
                        state.high_priority_arrivals, state.high_demand_executed,
                        state.high_demand_arrivals, state.queue_full_events)
    return SimReport(
        phi=m.phi, eta=m.eta, omega=m.omega, psi=m.psi,
        arrivals=state.arrivals, executed=state.executed, offloaded=state.offloaded,
        queue_full_events=state.queue_full_events,
        high_priority_arrivals=state.high_priority_arrivals,
        high_priority_executed=state.high_priority_executed,
        high_demand_arrivals=state.high_demand_arrivals,
        high_demand_executed=state.high_demand_executed,
        eta_defined=m.eta_defined, omega_defined=m.omega_defined,
        oi=tuple(oi_s), pdelta=tuple(pd_s), tau_norm=tuple(tau_s), occupancy=tuple(occ_s),
        params=params.echo(), decisions=tuple(log),
    )


@dataclass(frozen=True)
class Comparison:
    upshm: SimReport
    bm: SimReport

    @property
    def deltas(self) -> dict:
        """UPSHM minus BM for each metric."""
        return {m: getattr(self.upshm, m) - getattr(self.bm, m) for m in METRICS}


def run_comparison(trace: TaskTrace, upshm_params: SimParams, bm_params: SimParams | None = None) -> Comparison:
    if bm_params is None:
        bm_params = replace(upshm_params, policy="BM")
    if upshm_params.policy != "UPSHM" or bm_params.policy != "BM":
        raise ValueError("run_comparison expects one UPSHM and one BM parameter set")
    return Comparison(run_simulation(trace, upshm_params), run_simulation(trace, bm_params))


@dataclass(frozen=True)
class SweepCell:
    beta: float
    theta_fraction: float
    report: SimReport


def _with_thresholds(params: SimParams, beta: float, theta_fraction: float) -> SimParams:
    return replace(params, policy_params=replace(params.policy_params, beta=beta, theta_fraction=theta_fraction))


def run_sweep(source: TaskTrace | WorkloadConfig, base: SimParams, beta_values: Sequence[float],
              theta_values: Sequence[float], n_jobs: int | None = None) -> list[SweepCell]:
    """One run per (beta, theta) cell on a single shared trace, beta-major order."""
    beta_values, theta_values = list(beta_values), list(theta_values)
    if not beta_values or not theta_values:
        raise ValueError("sweep grids must be non-empty")
    trace = generate_trace(source) if isinstance(source, WorkloadConfig) else source
    grid = [(b, t) for b in beta_values for t in theta_values]
    reports = run_many([(trace, _with_thresholds(base, b, t)) for b, t in grid], n_jobs=n_jobs)
    return [SweepCell(b, t, r) for (b, t), r in zip(grid, reports)]


def run_many(jobs: Iterable[tuple[TaskTrace, SimParams]], n_jobs: int | None = None) -> list[SimReport]:
    """Run independent simulations, optionally across worker processes.

    Results come back in submission order, identical to a serial run.
    """
    jobs = list(jobs)
    if not n_jobs or n_jobs == 1 or len(jobs) < 2:
        return [run_simulation(t, p) for t, p in jobs]
    return Parallel(n_jobs=n_jobs)(delayed(run_simulation)(t, p) for t, p in jobs)


def aggregate(reports: Sequence[SimReport]) -> dict:
    """Mean, sample standard deviation and standard error of each metric."""
    if not reports:
        raise ValueError("nothing to aggregate")
    out = {"n": len(reports)}
    for m in METRICS:
        vals = [getattr(r, m) for r in reports]
        mean = statistics.fmean(vals)
        sd = statistics.stdev(vals) if len(vals) > 1 else 0.0
        out[m] = {"mean": mean, "std": sd, "sem": sd / math.sqrt(len(vals))}
    return out


# -- serialization ----------------------------------------------------------

REPORT_CSV_FIELDS = PARAM_FIELDS + SCALAR_FIELDS


def reports_to_csv(reports: Iterable[SimReport]) -> str:
    """Long-format CSV, one row per report, columns ``REPORT_CSV_FIELDS``."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow({k: _fmt(v) for k, v in r.csv_row().items()})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return v


_INT_FIELDS = {"theta", "capacity", "rng_seed", "arrivals", "executed", "offloaded", "queue_full_events",
               "high_priority_arrivals", "high_priority_executed", "high_demand_arrivals", "high_demand_executed"}
_BOOL_FIELDS = {"eta_defined", "omega_defined"}
_STR_FIELDS = {"policy"}


def _parse_cell(key: str, raw: str):
    if key in _STR_FIELDS:
        return raw
    if key in _BOOL_FIELDS:
        if raw not in ("True", "False"):
            raise ValueError(f"{key}: expected True/False, got {raw!r}")
        return raw == "True"
    if raw == "":
        return None
    if key in _INT_FIELDS or key == "trend_window":
        return int(raw)
    return float(raw)


def load_reports_csv(path_or_text: str | os.PathLike) -> list[SimReport]:
    """Parse a CSV written by :func:`reports_to_csv` back into reports (no series)."""
    text = str(path_or_text)
    if "\n" not in text:
        text = Path(path_or_text).read_text(encoding="utf-8")
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames) != REPORT_CSV_FIELDS:
        raise ValueError(f"unexpected report CSV header: {reader.fieldnames}")
    reports = []
    for row in reader:
        try:
            values = {k: _parse_cell(k, row[k]) for k in REPORT_CSV_FIELDS}
        except ValueError as exc:
            raise ValueError(f"line {reader.line_num}: {exc}") from None
        d = {k: values[k] for k in SCALAR_FIELDS}
        d["params"] = {k: values[k] for k in PARAM_FIELDS}
        reports.append(SimReport.from_dict(d))
    return reports
