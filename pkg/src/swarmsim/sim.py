"""Deterministic discrete-event simulation of the mesh network.

Single-threaded core: events are processed strictly in (time, seq) order and
agents are written as pure event handlers, so two runs with the same seed and
scenario produce identical traces. Virtual time only; nothing here reads a
wall clock.

Message transport is a disk model: a send is dropped when the receiver is out
of radio range, an active partition window separates the pair, or the
per-sender loss draw fires. Otherwise delivery happens after an affine
distance latency.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field

from . import wire
from .model import NodeId, Position, distance

# Event kinds.
EV_MESSAGE = "message"
EV_JOIN = "join"
EV_LEAVE = "leave"
EV_CRASH = "crash"
EV_TIMER = "timer"
EV_PARTITION_START = "partition_start"
EV_PARTITION_END = "partition_end"
EV_BATTERY_TICK = "battery_tick"
EV_MOVE = "move"


@dataclass(frozen=True)
class NetModel:
    base_latency: float = 0.01  # seconds
    latency_per_meter: float = 0.0001  # seconds per meter
    loss_prob: float = 0.0
    radio_range: float = 1.0e9  # meters

    def __post_init__(self):
        if self.base_latency < 0 or self.latency_per_meter < 0 or self.radio_range < 0:
            raise ValueError("net model parameters must be non-negative")
        if not (0.0 <= self.loss_prob <= 1.0):
            raise ValueError("loss_prob must be in [0,1]")

    def latency(self, dist: float) -> float:
        return self.base_latency + self.latency_per_meter * dist


@dataclass(frozen=True)
class RngState:
    """Seed record: all draws come from named substreams of this seed.

    Substreams use Python's Mersenne Twister seeded from a SHA-256 hash of
    (seed, label), so the draw sequence is identical across runs and
    platforms.
    """

    seed: int
    algorithm: str = "mt19937-sha256-substreams"


def substream(seed: int, label: str) -> random.Random:
    """Independent, reproducible RNG stream for one purpose label."""
    h = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return random.Random(int.from_bytes(h[:8], "big"))


@dataclass(frozen=True)
class PartitionWindow:
    group_a: frozenset
    group_b: frozenset
    start: float
    end: float

    def separates(self, a: NodeId, b: NodeId, t: float) -> bool:
        if not (self.start <= t < self.end):
            return False
        return (a in self.group_a and b in self.group_b) or (
            a in self.group_b and b in self.group_a
        )


@dataclass
class SimEvent:
    time: float
    seq: int
    kind: str
    data: dict = field(default_factory=dict)

    def sort_key(self):
        return (self.time, self.seq)


class SimFault(Exception):
    """An agent handler raised; the offending event is attached."""

    def __init__(self, event: SimEvent, cause: BaseException):
        super().__init__(f"handler fault at t={event.time} on {event.kind}: {cause!r}")
        self.event = event
        self.cause = cause


@dataclass
class SimNode:
    node: NodeId
    position: Position
    up: bool = False
    ever_started: bool = False


class Simulator:
    """Event queue, transport and node lifecycle bookkeeping."""

    def __init__(self, seed: int, net: NetModel, trace_timers: bool = False):
        self.seed = seed
        self.rng_state = RngState(seed=seed)
        self.net = net
        self.now = 0.0
        self.trace_timers = trace_timers
        self._queue: list = []
        self._seq = 0
        self._msg_seq = 0
        self.nodes: dict = {}  # NodeId -> SimNode
        self.agents: dict = {}  # NodeId -> agent (see agent.NodeAgent)
        self.partitions: list = []
        self.trace: list = []
        self.listeners: list = []  # callables invoked per trace record
        self._loss_rngs: dict = {}

    # -- infrastructure -----------------------------------------------------

    def add_node(self, node: NodeId, position: Position) -> None:
        if node in self.nodes:
            raise ValueError(f"duplicate node {node}")
        self.nodes[node] = SimNode(node=node, position=position)

    def register_agent(self, node: NodeId, agent) -> None:
        self.agents[node] = agent

    def node_up(self, node: NodeId) -> bool:
        rec = self.nodes.get(node)
        return rec is not None and rec.up

    def position_of(self, node: NodeId) -> Position:
        return self.nodes[node].position

    def _loss_rng(self, node: NodeId) -> random.Random:
        rng = self._loss_rngs.get(node)
        if rng is None:
            rng = substream(self.seed, f"loss:{node}")
            self._loss_rngs[node] = rng
        return rng

    def record(self, rec: dict) -> None:
        self.trace.append(rec)
        for listener in self.listeners:
            listener(rec)

    # -- scheduling ---------------------------------------------------------

    def schedule(self, time: float, kind: str, data: dict = None) -> SimEvent:
        if time < self.now:
            raise ValueError("cannot schedule into the past")
        ev = SimEvent(time=time, seq=self._seq, kind=kind, data=data or {})
        self._seq += 1
        heapq.heappush(self._queue, (ev.time, ev.seq, ev))
        return ev

    def set_timer(self, node: NodeId, delay: float, timer_kind: str, data: dict = None):
        payload = {"node": node, "timer": timer_kind, "data": data or {}}
        return self.schedule(self.now + delay, EV_TIMER, payload)

    # -- partitions ---------------------------------------------------------

    def inject_partition(self, group_a, group_b, start: float, end: float) -> None:
        ga, gb = frozenset(group_a), frozenset(group_b)
        if ga & gb:
            raise ValueError("partition groups must be disjoint")
        if not start < end:
            raise ValueError("partition start must precede end")
        self.partitions.append(PartitionWindow(ga, gb, start, end))
        self.schedule(start, EV_PARTITION_START, {"a": sorted(ga), "b": sorted(gb)})
        self.schedule(end, EV_PARTITION_END, {"a": sorted(ga), "b": sorted(gb)})

    def partitioned(self, a: NodeId, b: NodeId, t: float = None) -> bool:
        t = self.now if t is None else t
        return any(w.separates(a, b, t) for w in self.partitions)

    def in_range(self, a: NodeId, b: NodeId) -> bool:
        dist = distance(self.position_of(a), self.position_of(b))
        return dist <= self.net.radio_range

    def discover(self, node: NodeId) -> list:
        """All live nodes reachable in one hop: in range, same partition side.

        Deterministic given sim state (no loss draw); sorted by NodeId.
        """
        out = []
        for other, rec in self.nodes.items():
            if other == node or not rec.up:
                continue
            if not self.in_range(node, other):
                continue
            if self.partitioned(node, other):
                continue
            out.append(other)
        return sorted(out)

    # -- transport ----------------------------------------------------------

    def send(self, frm: NodeId, to: NodeId, msg: wire.Message) -> str:
        """Returns "scheduled" or "dropped"."""
        if frm not in self.nodes or to not in self.nodes:
            raise ValueError(f"send between unknown nodes {frm}->{to}")
        encoded = wire.encode(msg)
        msg_id = self._msg_seq
        self._msg_seq = msg_id + 1
        self.record(
            {
                "t": self.now,
                "type": "send",
                "from": frm,
                "to": to,
                "msg_id": msg_id,
                "kind": msg.kind,
                "digest": wire.digest(encoded),
                "body": msg.body,
            }
        )
        reason = None
        if not self.in_range(frm, to):
            reason = "range"
        elif self.partitioned(frm, to):
            reason = "partition"
        elif self.net.loss_prob > 0 and self._loss_rng(frm).random() < self.net.loss_prob:
            reason = "loss"
        if reason is not None:
            self.record(
                {"t": self.now, "type": "drop", "msg_id": msg_id, "reason": reason}
            )
            return "dropped"
        dist = distance(self.position_of(frm), self.position_of(to))
        delivery = self.now + self.net.latency(dist)
        self.schedule(
            delivery,
            EV_MESSAGE,
            {"from": frm, "to": to, "msg_id": msg_id, "encoded": encoded},
        )
        return "scheduled"

    # -- node lifecycle -----------------------------------------------------

    def crash_node(self, node: NodeId) -> None:
        """Schedule an immediate crash (battery depletion path)."""
        self.schedule(self.now, EV_CRASH, {"node": node})

    # -- main loop ----------------------------------------------------------

    def run_until(self, t_end: float) -> list:
        """Process all events with time <= t_end; returns the trace list."""
        while self._queue and self._queue[0][0] <= t_end:
            _, _, ev = heapq.heappop(self._queue)
            self.now = ev.time
            try:
                self._dispatch(ev)
            except SimFault:
                raise
            except Exception as exc:  # attach the offending event
                raise SimFault(ev, exc) from exc
        self.now = max(self.now, t_end)
        return self.trace

    def _dispatch(self, ev: SimEvent) -> None:
        kind = ev.kind
        if kind == EV_MESSAGE:
            self._deliver(ev)
        elif kind == EV_TIMER:
            node = ev.data["node"]
            if self.trace_timers:
                self.record(
                    {"t": ev.time, "type": "timer", "node": node, "timer": ev.data["timer"]}
                )
            if self.node_up(node):
                self.agents[node].on_timer(ev.data["timer"], ev.data["data"])
        elif kind == EV_JOIN:
            node = ev.data["node"]
            rec = self.nodes[node]
            if rec.up:
                return
            rec.up = True
            rec.ever_started = True
            self.record({"t": ev.time, "type": "join", "node": node})
            self.agents[node].on_start()
        elif kind == EV_LEAVE:
            node = ev.data["node"]
            rec = self.nodes[node]
            if not rec.up:
                return
            self.record({"t": ev.time, "type": "leave", "node": node})
            self.agents[node].on_leave()
            rec.up = False
        elif kind == EV_CRASH:
            node = ev.data["node"]
            rec = self.nodes[node]
            if not rec.up:
                return
            rec.up = False
            self.record({"t": ev.time, "type": "crash", "node": node})
            self.agents[node].on_crash()
        elif kind == EV_PARTITION_START:
            self.record(
                {"t": ev.time, "type": "partition_start", "a": ev.data["a"], "b": ev.data["b"]}
            )
        elif kind == EV_PARTITION_END:
            self.record(
                {"t": ev.time, "type": "partition_end", "a": ev.data["a"], "b": ev.data["b"]}
            )
        elif kind == EV_BATTERY_TICK:
            node = ev.data["node"]
            if self.node_up(node):
                self.agents[node].on_battery_tick(ev.data["dt"])
        elif kind == EV_MOVE:
            node = ev.data["node"]
            pos = Position(ev.data["x"], ev.data["y"])
            self.nodes[node].position = pos
            self.record({"t": ev.time, "type": "move", "node": node, "x": pos.x, "y": pos.y})
            if self.node_up(node):
                self.agents[node].on_move(pos)
        else:
            raise ValueError(f"unknown event kind {kind}")

    def _deliver(self, ev: SimEvent) -> None:
        to = ev.data["to"]
        msg_id = ev.data["msg_id"]
        if not self.node_up(to):
            self.record({"t": ev.time, "type": "drop", "msg_id": msg_id, "reason": "down"})
            return
        msg = wire.decode(ev.data["encoded"])
        self.record(
            {
                "t": ev.time,
                "type": "deliver",
                "from": ev.data["from"],
                "to": to,
                "msg_id": msg_id,
                "kind": msg.kind,
            }
        )
        self.agents[to].on_message(ev.data["from"], msg)


def battery_step(battery: float, drain_rate: float, dt: float) -> float:
    """Linear drain clamped at zero. MAINS handling lives with the caller."""
    return max(0.0, battery - drain_rate * dt)
