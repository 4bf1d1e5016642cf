"""Shared vocabulary types for nodes, tasks, capabilities and QoS.

Everything here is an immutable value object: agents exchange copies, never
references, so these types are safe to pass between per-node state machines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Final, Union

NodeId = int
TaskId = int
DataSourceId = int

#: Sentinel battery level for nodes without a battery constraint.
MAINS: Final[str] = "MAINS"

BatteryLevel = Union[float, str]


def is_mains(battery: BatteryLevel) -> bool:
    return isinstance(battery, str) and battery == MAINS


@dataclass(frozen=True)
class Position:
    """A point on the 2-D plane, in meters."""

    x: float
    y: float

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y}

    @classmethod
    def from_dict(cls, d: dict) -> "Position":
        return cls(x=float(d["x"]), y=float(d["y"]))


def distance(a: Position, b: Position) -> float:
    """Euclidean distance in meters."""
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class StaticHardwareProfile:
    cpu_perf_index: float  # work-units per second
    memory: int  # MiB
    link_bandwidth: float  # MiB per second

    def to_dict(self) -> dict:
        return {
            "cpu_perf_index": self.cpu_perf_index,
            "memory": self.memory,
            "link_bandwidth": self.link_bandwidth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StaticHardwareProfile":
        return cls(
            cpu_perf_index=float(d["cpu_perf_index"]),
            memory=int(d["memory"]),
            link_bandwidth=float(d["link_bandwidth"]),
        )


@dataclass(frozen=True)
class StaticSoftwareProfile:
    os_tag: str
    supported_runtimes: frozenset = frozenset()

    def to_dict(self) -> dict:
        return {
            "os_tag": self.os_tag,
            "supported_runtimes": sorted(self.supported_runtimes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StaticSoftwareProfile":
        return cls(
            os_tag=str(d["os_tag"]),
            supported_runtimes=frozenset(d.get("supported_runtimes", [])),
        )


@dataclass(frozen=True)
class DynamicStatus:
    utilization: float  # [0, 1]
    battery: BatteryLevel  # [0, 1] or MAINS
    position: Position
    scheduled_task_ids: tuple = ()
    status_version: int = 0

    def to_dict(self) -> dict:
        return {
            "utilization": self.utilization,
            "battery": self.battery,
            "position": self.position.to_dict(),
            "scheduled_task_ids": list(self.scheduled_task_ids),
            "status_version": self.status_version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DynamicStatus":
        battery = d["battery"]
        if not is_mains(battery):
            battery = float(battery)
        return cls(
            utilization=float(d["utilization"]),
            battery=battery,
            position=Position.from_dict(d["position"]),
            scheduled_task_ids=tuple(d.get("scheduled_task_ids", [])),
            status_version=int(d.get("status_version", 0)),
        )


@dataclass(frozen=True)
class CapabilityAdvertisement:
    node: NodeId
    task_typologies: frozenset = frozenset()
    data_sources: frozenset = frozenset()

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "task_typologies": sorted(self.task_typologies),
            "data_sources": sorted(self.data_sources),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CapabilityAdvertisement":
        return cls(
            node=int(d["node"]),
            task_typologies=frozenset(d.get("task_typologies", [])),
            data_sources=frozenset(d.get("data_sources", [])),
        )


@dataclass(frozen=True)
class QoSRequirement:
    deadline: float  # seconds from submission
    min_success_replicas: int = 1

    def to_dict(self) -> dict:
        return {
            "deadline": self.deadline,
            "min_success_replicas": self.min_success_replicas,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QoSRequirement":
        return cls(
            deadline=float(d["deadline"]),
            min_success_replicas=int(d.get("min_success_replicas", 1)),
        )


@dataclass(frozen=True)
class DataInput:
    """Reference to one task input: a data source and its size in MiB."""

    source: DataSourceId
    size: float

    def to_dict(self) -> dict:
        return {"source": self.source, "size": self.size}

    @classmethod
    def from_dict(cls, d: dict) -> "DataInput":
        return cls(source=int(d["source"]), size=float(d["size"]))


@dataclass(frozen=True)
class TaskSpec:
    task_id: TaskId
    typology: str
    work: float  # work-units
    memory_demand: int  # MiB
    input_data: tuple = ()  # tuple of DataInput
    qos: QoSRequirement = QoSRequirement(deadline=60.0)
    origin_node: NodeId = 0

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "typology": self.typology,
            "work": self.work,
            "memory_demand": self.memory_demand,
            "input_data": [i.to_dict() for i in self.input_data],
            "qos": self.qos.to_dict(),
            "origin_node": self.origin_node,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSpec":
        return cls(
            task_id=int(d["task_id"]),
            typology=str(d["typology"]),
            work=float(d["work"]),
            memory_demand=int(d["memory_demand"]),
            input_data=tuple(DataInput.from_dict(i) for i in d.get("input_data", [])),
            qos=QoSRequirement.from_dict(d["qos"]),
            origin_node=int(d["origin_node"]),
        )


@dataclass(frozen=True)
class NodeProfile:
    node: NodeId
    hw: StaticHardwareProfile
    sw: StaticSoftwareProfile
    dyn: DynamicStatus
    adv: CapabilityAdvertisement

    def with_dyn(self, **changes) -> "NodeProfile":
        return replace(self, dyn=replace(self.dyn, **changes))

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "hw": self.hw.to_dict(),
            "sw": self.sw.to_dict(),
            "dyn": self.dyn.to_dict(),
            "adv": self.adv.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NodeProfile":
        return cls(
            node=int(d["node"]),
            hw=StaticHardwareProfile.from_dict(d["hw"]),
            sw=StaticSoftwareProfile.from_dict(d["sw"]),
            dyn=DynamicStatus.from_dict(d["dyn"]),
            adv=CapabilityAdvertisement.from_dict(d["adv"]),
        )


def capability_match(task: TaskSpec, profile: NodeProfile) -> bool:
    """Can this node run this task at all?

    Checks typology advertisement, memory capacity and that the node is not
    battery-dead. Total function: never raises on validated inputs.
    """
    if task.typology not in profile.adv.task_typologies:
        return False
    if task.memory_demand > profile.hw.memory:
        return False
    battery = profile.dyn.battery
    if not is_mains(battery) and battery <= 0.0:
        return False
    return True


def validate_profile(profile: NodeProfile) -> list:
    """Collect every violated invariant as a 'field.path: message' string.

    An empty list means the profile is valid.
    """
    violations: list = []

    hw = profile.hw
    if not (hw.cpu_perf_index > 0):
        violations.append("hw.cpu_perf_index not positive")
    if not (hw.memory > 0):
        violations.append("hw.memory not positive")
    if not (hw.link_bandwidth > 0):
        violations.append("hw.link_bandwidth not positive")

    if not profile.sw.os_tag:
        violations.append("sw.os_tag empty")

    dyn = profile.dyn
    if not (0.0 <= dyn.utilization <= 1.0):
        violations.append("dyn.utilization out of [0,1]")
    if not is_mains(dyn.battery):
        if not isinstance(dyn.battery, (int, float)) or not (0.0 <= dyn.battery <= 1.0):
            violations.append("dyn.battery out of [0,1]")
    if not (math.isfinite(dyn.position.x) and math.isfinite(dyn.position.y)):
        violations.append("dyn.position not finite")
    if dyn.status_version < 0:
        violations.append("dyn.status_version negative")

    adv = profile.adv
    if adv.node != profile.node:
        violations.append("adv.node differs from node")
    for label in adv.task_typologies:
        if not label:
            violations.append("adv.task_typologies contains empty label")
            break

    return violations


def validate_task(task: TaskSpec) -> list:
    """Invariant check for TaskSpec, same contract as validate_profile."""
    violations: list = []
    if not (task.work > 0):
        violations.append("work not positive")
    if task.memory_demand < 0:
        violations.append("memory_demand negative")
    if not task.typology:
        violations.append("typology empty")
    if not (task.qos.deadline > 0):
        violations.append("qos.deadline not positive")
    if task.qos.min_success_replicas < 1:
        violations.append("qos.min_success_replicas < 1")
    for inp in task.input_data:
        if not (inp.size > 0):
            violations.append("input_data size not positive")
            break
    return violations
