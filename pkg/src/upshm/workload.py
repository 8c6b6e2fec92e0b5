"""Task trace generation and persistence.

A trace is a sequence of ``W`` equal-length time intervals. Each interval
draws its own arrival rate and service rate uniformly from configured
ranges; tasks inside it arrive as a Poisson process and carry exponential
service times. Randomness comes from numpy's ``PCG64`` bit generator seeded
with ``WorkloadConfig.rng_seed``, so a seed reproduces a trace bit for bit
on any platform.

On disk a trace is two files: ``<name>.csv`` with the five task columns and
``<name>.meta.json`` with the per-interval rates and boundaries.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Task",
    "IntervalProfile",
    "TaskTrace",
    "WorkloadConfig",
    "TraceFormatError",
    "make_rng",
    "poisson_pmf",
    "sample_interarrival",
    "sample_service",
    "generate_trace",
    "save_trace",
    "load_trace",
    "metadata_path",
]

CSV_HEADER = ("id", "service_time", "arrival_time", "priority", "demand")
META_FORMAT = "upshm-trace/1"


class TraceFormatError(ValueError):
    """Raised when a trace file cannot be parsed."""

    def __init__(self, message: str, path: str | os.PathLike | None = None, line: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


@dataclass(frozen=True)
class Task:
    id: int
    arrival_time: float
    service_time: float
    priority: float
    demand: float

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"task id must be non-negative, got {self.id}")
        if not self.service_time > 0:
            raise ValueError(f"service_time must be > 0, got {self.service_time}")
        if not self.arrival_time >= 0:
            raise ValueError(f"arrival_time must be >= 0, got {self.arrival_time}")
        for name in ("priority", "demand"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class IntervalProfile:
    index: int
    lam: float
    mu: float

    def __post_init__(self):
        if not (self.lam > 0 and self.mu > 0):
            raise ValueError(f"interval {self.index}: rates must be positive (lam={self.lam}, mu={self.mu})")


@dataclass(frozen=True)
class TaskTrace:
    """Tasks grouped by interval.

    ``tasks`` is flat and ordered by interval, then by arrival time;
    ``interval_of(i)`` recovers which interval a task belongs to from its
    arrival time.
    """

    intervals: tuple[IntervalProfile, ...]
    tasks: tuple[Task, ...]
    interval_duration: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(self.intervals))
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if not self.interval_duration > 0:
            raise ValueError("interval_duration must be positive")
        for pos, iv in enumerate(self.intervals):
            if iv.index != pos:
                raise ValueError(f"interval indices must be 0..W-1 in order, got {iv.index} at position {pos}")

    @property
    def num_intervals(self) -> int:
        return len(self.intervals)

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)

    @property
    def horizon(self) -> float:
        return self.num_intervals * self.interval_duration

    def interval_of(self, arrival_time: float) -> int:
        j = int(math.floor(arrival_time / self.interval_duration))
        return min(max(j, 0), self.num_intervals - 1)

    def boundaries(self) -> list[float]:
        return [j * self.interval_duration for j in range(self.num_intervals + 1)]

    def tasks_by_interval(self) -> list[list[Task]]:
        groups: list[list[Task]] = [[] for _ in self.intervals]
        for task in self.tasks:
            groups[self.interval_of(task.arrival_time)].append(task)
        return groups

    def validate(self) -> None:
        """Check the ordering and id invariants; raise ``ValueError`` on failure."""
        if not self.intervals:
            raise ValueError("trace has no intervals")
        ids = [t.id for t in self.tasks]
        if sorted(ids) != list(range(len(ids))):
            raise ValueError("task ids must be unique and dense (0..E-1)")
        prev = -math.inf
        for task in self.tasks:
            if task.arrival_time > self.horizon:
                raise ValueError(f"task {task.id} arrives after the last interval ends")
            if task.arrival_time < prev:
                raise ValueError(f"task {task.id} arrives before its predecessor")
            prev = task.arrival_time


@dataclass(frozen=True)
class WorkloadConfig:
    num_intervals: int = 100
    lambda_range: tuple[float, float] = (10.0, 60.0)
    mu_range: tuple[float, float] = (10.0, 40.0)
    interval_duration: float = 1.0
    rng_seed: int = 0
    priority_range: tuple[float, float] = field(default=(0.0, 1.0), repr=False)
    demand_range: tuple[float, float] = field(default=(0.0, 1.0), repr=False)

    def __post_init__(self):
        if self.num_intervals < 1:
            raise ValueError("num_intervals must be >= 1")
        for name in ("lambda_range", "mu_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ValueError(f"{name} must satisfy 0 < low <= high, got {(lo, hi)}")
        if not self.interval_duration > 0:
            raise ValueError("interval_duration must be positive")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")


def make_rng(seed: int) -> np.random.Generator:
    """The pinned generator: PCG64 seeded through ``SeedSequence(seed)``."""
    return np.random.Generator(np.random.PCG64(seed))


def poisson_pmf(k: int, lam: float, t: float = 1.0) -> float:
    """Probability that a rate-``lam`` Poisson process has ``k`` arrivals in ``(0, t]``.

    Evaluated in log space so large ``k`` or ``lam * t`` do not overflow.
    """
    if k < 0 or int(k) != k:
        raise ValueError(f"k must be a non-negative integer, got {k}")
    if not (lam > 0 and t > 0):
        raise ValueError(f"lam and t must be positive, got lam={lam}, t={t}")
    m = lam * t
    return math.exp(-m + k * math.log(m) - math.lgamma(k + 1))


def _exponential(rate: float, rng: np.random.Generator) -> float:
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    # inverse transform; 1 - U lies in (0, 1] so the log is finite
    return -math.log1p(-rng.random()) / rate


def sample_interarrival(lam: float, rng: np.random.Generator) -> float:
    return _exponential(lam, rng)


def sample_service(mu: float, rng: np.random.Generator) -> float:
    return _exponential(mu, rng)


def generate_trace(config: WorkloadConfig) -> TaskTrace:
    """Draw a trace from ``config``; identical seeds give identical traces.

    Arrival times follow an exponential clock restarted at each interval
    boundary, and any arrival past the boundary is discarded, so the per-
    interval count is exactly Poisson(``lam * interval_duration``).
    """
    rng = make_rng(config.rng_seed)
    d = config.interval_duration
    intervals = []
    tasks: list[Task] = []
    next_id = 0
    for j in range(config.num_intervals):
        lam = float(rng.uniform(*config.lambda_range))
        mu = float(rng.uniform(*config.mu_range))
        intervals.append(IntervalProfile(j, lam, mu))
        start, end = j * d, (j + 1) * d
        t = start
        while True:
            t += sample_interarrival(lam, rng)
            if t >= end:
                break
            service = sample_service(mu, rng)
            priority = float(rng.uniform(*config.priority_range))
            demand = float(rng.uniform(*config.demand_range))
            tasks.append(Task(next_id, t, service, priority, demand))
            next_id += 1
    return TaskTrace(tuple(intervals), tuple(tasks), d)


def metadata_path(path: str | os.PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def save_trace(trace: TaskTrace, path: str | os.PathLike) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for t in trace.tasks:
            writer.writerow([t.id, repr(t.service_time), repr(t.arrival_time), repr(t.priority), repr(t.demand)])
    meta = {
        "format": META_FORMAT,
        "num_intervals": trace.num_intervals,
        "num_tasks": trace.num_tasks,
        "interval_duration": trace.interval_duration,
        "boundaries": trace.boundaries(),
        "intervals": [{"index": iv.index, "lambda": iv.lam, "mu": iv.mu} for iv in trace.intervals],
    }
    with open(metadata_path(path), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")


def _parse_float(raw: str, column: str, path, lineno: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise TraceFormatError(f"column {column!r}: not a number: {raw!r}", path, lineno) from None
    if not math.isfinite(value):
        raise TraceFormatError(f"column {column!r}: non-finite value {raw!r}", path, lineno)
    return value


def _read_tasks(path: Path) -> list[Task]:
    tasks = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFormatError("empty file, expected a header line", path, 1) from None
        header = [h.strip() for h in header]
        missing = [c for c in CSV_HEADER if c not in header]
        if missing or len(header) != len(CSV_HEADER):
            raise TraceFormatError(f"header must be {','.join(CSV_HEADER)}, got {','.join(header)}", path, 1)
        cols = {name: header.index(name) for name in CSV_HEADER}
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise TraceFormatError(f"expected {len(CSV_HEADER)} columns, got {len(row)}", path, lineno)
            raw_id = row[cols["id"]].strip()
            if not raw_id.isdigit():
                raise TraceFormatError(f"column 'id': not a non-negative integer: {raw_id!r}", path, lineno)
            values = {c: _parse_float(row[cols[c]], c, path, lineno) for c in CSV_HEADER[1:]}
            for c in ("priority", "demand"):
                if not 0.0 <= values[c] <= 1.0:
                    raise TraceFormatError(f"column {c!r}: {values[c]} outside [0, 1]", path, lineno)
            if values["service_time"] <= 0:
                raise TraceFormatError("column 'service_time' must be positive", path, lineno)
            if values["arrival_time"] < 0:
                raise TraceFormatError("column 'arrival_time' must be non-negative", path, lineno)
            tasks.append(Task(int(raw_id), values["arrival_time"], values["service_time"],
                              values["priority"], values["demand"]))
    return tasks


def load_trace(path: str | os.PathLike) -> TaskTrace:
    """Load a trace written by :func:`save_trace`.

    A CSV without a sidecar (e.g. the original five-column dataset) is
    accepted only if ``<name>.meta.json`` exists; rates cannot be inferred.
    """
    path = Path(path)
    meta_file = metadata_path(path)
    tasks = _read_tasks(path)
    try:
        with open(meta_file, encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        raise TraceFormatError("missing metadata sidecar", meta_file) from None
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"invalid JSON: {exc.msg}", meta_file, exc.lineno) from None
    try:
        intervals = tuple(IntervalProfile(int(iv["index"]), float(iv["lambda"]), float(iv["mu"]))
                          for iv in meta["intervals"])
        duration = float(meta["interval_duration"])
        declared = meta.get("num_tasks")
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceFormatError(f"malformed metadata: {exc}", meta_file) from None
    if declared is not None and int(declared) != len(tasks):
        raise TraceFormatError(f"metadata declares {declared} tasks, CSV has {len(tasks)}", meta_file)
    tasks.sort(key=lambda t: (t.arrival_time, t.id))
    trace = TaskTrace(intervals, tuple(tasks), duration)
    try:
        trace.validate()
    except ValueError as exc:
        raise TraceFormatError(str(exc), path) from None
    return trace
