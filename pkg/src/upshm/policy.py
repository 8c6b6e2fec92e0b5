"""Per-task placement decisions: the OI-driven offloading policy and the
queue-full baseline."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .workload import Task


class Action(str, Enum):
    PLACE_LOCAL = "PlaceLocal"
    OFFLOAD = "Offload"


class Reason(str, Enum):
    QUEUE_FULL = "QueueFull"
    CASE_A_PRIORITY = "CaseA-Priority"
    CASE_A_OFFLOAD = "CaseA-Offload"
    CASE_B_PRIORITY_OR_DEMAND = "CaseB-PriorityOrDemand"
    CASE_B_OFFLOAD = "CaseB-Offload"
    BELOW_BETA = "BelowBeta"
    BASELINE_ADMIT = "BaselineAdmit"
    BASELINE_OFFLOAD = "BaselineOffload"


_LOCAL_REASONS = {Reason.CASE_A_PRIORITY, Reason.CASE_B_PRIORITY_OR_DEMAND, Reason.BELOW_BETA, Reason.BASELINE_ADMIT}


@dataclass(frozen=True)
class Decision:
    action: Action
    reason: Reason

    def __post_init__(self):
        if (self.action is Action.PLACE_LOCAL) != (self.reason in _LOCAL_REASONS):
            raise ValueError(f"reason {self.reason.value} is inconsistent with action {self.action.value}")

    @property
    def local(self) -> bool:
        return self.action is Action.PLACE_LOCAL


@dataclass(frozen=True)
class PolicyParams:
    beta: float = 0.8
    theta_fraction: float = 0.85
    capacity: int = 100
    priority_high_threshold: float = 0.5
    demand_high_threshold: float = 0.5

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            # beta = 1 is allowed: it switches the OI branch off entirely
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if not 0 < self.theta_fraction <= 1:
            raise ValueError(f"theta_fraction must lie in (0, 1], got {self.theta_fraction}")
        if self.capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {self.capacity}")
        for name in ("priority_high_threshold", "demand_high_threshold"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")

    @property
    def theta(self) -> int:
        # round first so 0.85 * 100 = 85.00000000000001 still maps to 85
        return max(1, min(self.capacity, math.ceil(round(self.theta_fraction * self.capacity, 9))))


@dataclass
class NodeState:
    """FCFS queue of admitted tasks plus the counters behind the metrics.

    ``queue`` holds the completion time of every task still in the system
    (waiting or in service), in admission order.
    """

    capacity: int
    queue: deque = field(default_factory=deque)
    arrivals: int = 0
    executed: int = 0
    offloaded: int = 0
    queue_full_events: int = 0
    high_priority_arrivals: int = 0
    high_priority_executed: int = 0
    high_demand_arrivals: int = 0
    high_demand_executed: int = 0
    completed: int = 0
    busy_until: float = 0.0

    @property
    def in_queue_count(self) -> int:
        return len(self.queue)

    @property
    def is_full(self) -> bool:
        return len(self.queue) >= self.capacity

    def advance(self, now: float) -> None:
        """Retire every admitted task that finishes at or before ``now``."""
        q = self.queue
        while q and q[0] <= now:
            q.popleft()
            self.completed += 1

    def admit(self, task: Task, now: float) -> float:
        if self.is_full:
            raise RuntimeError("admission into a full queue")
        start = max(now, self.busy_until)
        self.busy_until = start + task.service_time
        self.queue.append(self.busy_until)
        return self.busy_until

    def check_invariants(self) -> None:
        assert 0 <= self.in_queue_count <= self.capacity
        assert self.executed + self.offloaded == self.arrivals
        assert self.completed + self.in_queue_count == self.executed
        assert self.high_priority_executed <= self.high_priority_arrivals
        assert self.high_demand_executed <= self.high_demand_arrivals
        assert self.queue_full_events <= self.arrivals


def is_high_priority(task: Task, params: PolicyParams) -> bool:
    return task.priority >= params.priority_high_threshold


def is_high_demand(task: Task, params: PolicyParams) -> bool:
    return task.demand >= params.demand_high_threshold


def decide_upshm(state: NodeState, task: Task, oi: float, params: PolicyParams) -> Decision:
    """Place or offload ``task`` given the current overload indicator.

    Full queue: offload. OI above ``beta`` with at least ``theta`` tasks
    queued (late detection): keep only high-priority tasks. OI above
    ``beta`` below ``theta`` (early detection): keep high-priority or
    high-demand tasks. Otherwise admit.
    """
    count = state.in_queue_count
    if count >= params.capacity:
        return Decision(Action.OFFLOAD, Reason.QUEUE_FULL)
    if oi > params.beta:
        if count >= params.theta:
            if is_high_priority(task, params):
                return Decision(Action.PLACE_LOCAL, Reason.CASE_A_PRIORITY)
            return Decision(Action.OFFLOAD, Reason.CASE_A_OFFLOAD)
        if is_high_priority(task, params) or is_high_demand(task, params):
            return Decision(Action.PLACE_LOCAL, Reason.CASE_B_PRIORITY_OR_DEMAND)
        return Decision(Action.OFFLOAD, Reason.CASE_B_OFFLOAD)
    return Decision(Action.PLACE_LOCAL, Reason.BELOW_BETA)


def decide_baseline(state: NodeState, task: Task, params: PolicyParams) -> Decision:
    if state.in_queue_count < params.capacity:
        return Decision(Action.PLACE_LOCAL, Reason.BASELINE_ADMIT)
    return Decision(Action.OFFLOAD, Reason.BASELINE_OFFLOAD)
