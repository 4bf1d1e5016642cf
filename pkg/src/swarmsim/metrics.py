"""Run metrics: task accounting, message counts, convergence measurements.

The collector listens to trace records as the simulation emits them and is
periodically given a chance to sample global state (utilization, membership
and registry digests). Convergence times are measured from scenario start:
the first sampling instant, after the last disturbance (churn, crash,
partition edge), at which all running nodes agree.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field


@dataclass
class MetricsReport:
    tasks_submitted: int = 0
    tasks_done: int = 0
    tasks_failed_permanent: int = 0
    tasks_in_flight: int = 0
    deadline_violations: int = 0
    reschedule_attempts: int = 0  # placement attempts beyond the first
    mean_task_latency: float = math.nan
    p95_task_latency: float = math.nan
    mean_transfer_time: float = math.nan
    messages_by_type: dict = field(default_factory=dict)
    membership_convergence_time: float = math.nan
    registry_convergence_time: float = math.nan
    swarm_splits: int = 0
    swarm_merges: int = 0
    per_node_utilization: dict = field(default_factory=dict)

    def balance_holds(self) -> bool:
        return (
            self.tasks_done + self.tasks_failed_permanent + self.tasks_in_flight
            == self.tasks_submitted
        )

    def failure_rate(self) -> float:
        """(permanent failures + re-placements) per submitted task."""
        if self.tasks_submitted == 0:
            return 0.0
        return (
            self.tasks_failed_permanent + self.reschedule_attempts
        ) / self.tasks_submitted

    def rows(self) -> list:
        rows = [
            ("tasks_submitted", self.tasks_submitted),
            ("tasks_done", self.tasks_done),
            ("tasks_failed_permanent", self.tasks_failed_permanent),
            ("tasks_in_flight", self.tasks_in_flight),
            ("deadline_violations", self.deadline_violations),
            ("reschedule_attempts", self.reschedule_attempts),
            ("failure_rate", self.failure_rate()),
            ("mean_task_latency", self.mean_task_latency),
            ("p95_task_latency", self.p95_task_latency),
            ("mean_transfer_time", self.mean_transfer_time),
            ("membership_convergence_time", self.membership_convergence_time),
            ("registry_convergence_time", self.registry_convergence_time),
            ("swarm_splits", self.swarm_splits),
            ("swarm_merges", self.swarm_merges),
        ]
        for kind in sorted(self.messages_by_type):
            rows.append((f"messages_{kind}", self.messages_by_type[kind]))
        for node in sorted(self.per_node_utilization):
            rows.append((f"utilization_mean_node_{node}", self.per_node_utilization[node]))
        return rows

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            for name, value in self.rows():
                writer.writerow([name, value])

    def as_dict(self) -> dict:
        return dict(self.rows())


_DISTURBANCES = {
    "join",
    "leave",
    "crash",
    "battery_dead",
    "partition_start",
    "partition_end",
}


def p95(values: list) -> float:
    if not values:
        return math.nan
    ordered = sorted(values)
    idx = max(0, math.ceil(0.95 * len(ordered)) - 1)
    return ordered[idx]


class MetricsCollector:
    def __init__(self):
        self.counts = {}
        self.messages = {}
        self.latencies = []
        self.transfer_times = []
        self.deadline_violations = 0
        self.reschedule_attempts = 0
        self.swarm_splits = 0
        self.swarm_merges = 0
        self.last_disturbance = 0.0
        self.membership_converged_at = math.nan
        self.registry_converged_at = math.nan
        self._util_sums = {}
        self._util_samples = {}

    # -- trace listener -----------------------------------------------------

    def on_record(self, rec: dict) -> None:
        kind = rec["type"]
        self.counts[kind] = self.counts.get(kind, 0) + 1
        if kind == "send":
            msg = rec["kind"]
            self.messages[msg] = self.messages.get(msg, 0) + 1
        elif kind == "task_done":
            self.latencies.append(rec["latency"])
            if rec["deadline_violation"]:
                self.deadline_violations += 1
        elif kind == "run_admitted":
            self.transfer_times.append(rec["transfer_time"])
        elif kind in ("local_admit", "sched_decision") and rec["attempt"] > 1:
            self.reschedule_attempts += 1
        elif kind == "swarm_change":
            if rec["kind"] == "split":
                self.swarm_splits += 1
            else:
                self.swarm_merges += 1
        if kind in _DISTURBANCES:
            self.last_disturbance = rec["t"]
            self.membership_converged_at = math.nan
            self.registry_converged_at = math.nan

    # -- periodic global sampling ------------------------------------------

    def sample(self, now: float, sim, agents: dict) -> None:
        up = [agents[n] for n in sorted(agents) if sim.node_up(n)]
        for ag in up:
            self._util_sums[ag.node] = self._util_sums.get(ag.node, 0.0) + (
                ag.engine.utilization()
            )
            self._util_samples[ag.node] = self._util_samples.get(ag.node, 0) + 1
        if not up or now < self.last_disturbance:
            return
        if math.isnan(self.membership_converged_at):
            digests = {ag.view.member_set_digest() for ag in up}
            if len(digests) == 1:
                self.membership_converged_at = now
        if math.isnan(self.registry_converged_at):
            hashes = {ag.registry.content_hash() for ag in up}
            if len(hashes) == 1:
                self.registry_converged_at = now

    # -- report -------------------------------------------------------------

    def report(self) -> MetricsReport:
        submitted = self.counts.get("task_submitted", 0)
        done = self.counts.get("task_done", 0)
        failed = self.counts.get("task_failed_permanent", 0)
        mean_latency = (
            sum(self.latencies) / len(self.latencies) if self.latencies else math.nan
        )
        mean_transfer = (
            sum(self.transfer_times) / len(self.transfer_times)
            if self.transfer_times
            else math.nan
        )
        util = {
            node: self._util_sums[node] / self._util_samples[node]
            for node in self._util_sums
        }
        return MetricsReport(
            tasks_submitted=submitted,
            tasks_done=done,
            tasks_failed_permanent=failed,
            tasks_in_flight=submitted - done - failed,
            deadline_violations=self.deadline_violations,
            reschedule_attempts=self.reschedule_attempts,
            mean_task_latency=mean_latency,
            p95_task_latency=p95(self.latencies),
            mean_transfer_time=mean_transfer,
            messages_by_type=dict(self.messages),
            membership_convergence_time=self.membership_converged_at,
            registry_convergence_time=self.registry_converged_at,
            swarm_splits=self.swarm_splits,
            swarm_merges=self.swarm_merges,
            per_node_utilization=util,
        )
