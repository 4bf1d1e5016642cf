"""The per-node agent: one state machine driving every protocol.

Each node runs one NodeAgent instance. All behavior is event-driven
(message in / timer in -> state mutation + outgoing messages), and agents
never touch each other's state except through messages, so the same handlers
could run on independent real processes.

Protocol summary:
  * membership: round-robin PING/ACK probing with piggybacked deltas
    (Suspect on timeout, Dead after t_dead, incarnation refutation),
    HELLO/HELLO-ACK discovery on start and periodic re-discovery to heal
    partitions and merge swarms;
  * registry + data catalog: periodic digest-first anti-entropy with a
    round-robin peer, carrying full membership views for fast convergence;
  * scheduling: local-first admission, then OFFER to the top-k scored
    candidates, origin-side arbitration (earliest ACCEPT, NodeId tie-break),
    CLAIM/CANCEL, NACK-driven retry, re-placement on executor death and
    speculative parallel attempts on QoS warnings;
  * execution: fair-share engine with exact completion events plus a
    periodic monitor tick for QoS projection and load forecasting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import cognition, dataplane, executor, membership, wire
from .cognition import LoadForecast, SessionHistory
from .model import (
    DynamicStatus,
    NodeId,
    NodeProfile,
    Position,
    TaskSpec,
    capability_match,
    distance,
    is_mains,
)
from .registry import Registry, RegistryEntry
from .scheduler import SchedulerParams, compute_score, data_centroid, select_top_k
from .sim import Simulator, battery_step, substream


@dataclass(frozen=True)
class AgentConfig:
    """Protocol timing and policy knobs, scenario-configurable."""

    probe_period: float = 1.0  # seconds between probe rounds
    probe_timeout: float = 0.15  # ack wait per attempt (3x one-hop RTT)
    probe_retries: int = 3  # consecutive misses before Suspect
    t_dead: float = 0.6  # Suspect -> Dead promotion delay (4x timeout)
    t_split: float = 1.5  # unreachable-majority age triggering split
    retention: float = 30.0  # Dead/Left GC delay
    gossip_k: int = 8  # piggybacked deltas per message
    retransmit_limit: int = 12  # times a delta is piggybacked before retiring
    leave_fanout: int = 3
    anti_entropy_every: int = 2  # in probe rounds
    rediscover_every: int = 5  # in probe rounds
    status_refresh_every: int = 2  # in probe rounds
    battery_tick: float = 1.0
    exec_tick: float = 0.1  # monitor period while tasks are active
    reservation_ttl: float = 0.3  # 2x probe_timeout
    offer_timeout: float = 0.25  # origin decision wait; < reservation_ttl
    retry_delay: float = 1.0  # backoff when no candidates exist
    scheduler: SchedulerParams = field(default_factory=SchedulerParams)
    forecast_alpha: float = 0.3
    min_capacity: float = cognition.MIN_CAPACITY_FRACTION


@dataclass
class _OriginTask:
    """Origin-side lifecycle record for one submitted task."""

    spec: TaskSpec
    submitted_at: float
    attempts: int = 0
    done: bool = False
    failed: bool = False
    executors: dict = field(default_factory=dict)  # attempt -> NodeId
    offer: dict = None  # outstanding offer round, if any
    warned_attempts: set = field(default_factory=set)


class NodeAgent:
    """State machine for one cognitive resource."""

    def __init__(
        self,
        sim: Simulator,
        cfg: AgentConfig,
        profile: NodeProfile,
        drain_rate: float = 0.0,
        drain_rates: dict = None,
        owned_sources: list = None,
    ):
        self.sim = sim
        self.cfg = cfg
        self.node = profile.node
        self.base_profile = profile
        self.initial_battery = profile.dyn.battery
        self.drain_rate = drain_rate
        self.drain_rates = drain_rates or {}
        self.owned_sources = list(owned_sources or [])
        self.incarnation = 0
        self.alive = False
        self.epoch = 0  # bumps per life; stale-life timers are ignored
        self._reset_state()

    def _set_timer(self, delay: float, kind: str, data: dict = None) -> None:
        payload = dict(data or {})
        payload["epoch"] = self.epoch
        self.sim.set_timer(self.node, delay, kind, payload)

    # ------------------------------------------------------------------
    # lifecycle
    # ------------------------------------------------------------------

    def _reset_state(self) -> None:
        """Volatile state is lost on crash; rebuilt on (re)join."""
        self.profile = self.base_profile
        self.view = membership.SwarmView(self_node=self.node)
        self.registry = Registry(self.node)
        self.catalog = dataplane.Catalog(self.node)
        self.engine = executor.ExecutorEngine(self.base_profile.hw.cpu_perf_index)
        self.forecast = LoadForecast(
            ewma_utilization=self.base_profile.dyn.utilization,
            alpha=self.cfg.forecast_alpha,
        )
        self.gossip_buffer = {}  # NodeId -> [MemberState, transmit_count]
        self.alive_since = {}  # peer -> local time it became Alive in my view
        self.session_durations = {}  # peer -> list of completed durations
        self.tasks = {}  # TaskId -> _OriginTask
        self.exec_meta = {}  # TaskId -> dict (executor-side wire context)
        self.pending_probes = {}  # target -> token
        self._probe_token = 0
        self._probe_rng = substream(self.sim.seed, f"probe-{self.node}-{self.epoch}")
        self.round_no = 0
        self.last_swarm_id = self.node
        self._monitor_armed = False
        self._self_declared_at = 0.0

    def on_start(self) -> None:
        now = self.sim.now
        self.alive = True
        self.epoch += 1
        if self.epoch > 1:
            # Every restart is a new incarnation, so this life's records
            # dominate anything gossip still carries from the previous one.
            self.incarnation += 1
        self._reset_state()
        self.profile = self.base_profile.with_dyn(
            battery=self.initial_battery, position=self.sim.position_of(self.node)
        )
        self._self_declared_at = now
        self.view.apply(self._self_state())
        self.publish_profile(force=True)
        for desc in self.owned_sources:
            self.catalog.announce(desc, self.node)
        # Discovery: one-hop broadcast HELLO to physically reachable peers.
        for peer in self.sim.discover(self.node):
            self._send(peer, wire.Message(wire.HELLO, self._hello_body()))
        self._set_timer(self.cfg.probe_period, "round")
        if not is_mains(self.profile.dyn.battery) and self.drain_rate > 0:
            self._set_timer(
                self.cfg.battery_tick,
                "battery",
                {"dt": self.cfg.battery_tick},
            )

    def on_leave(self) -> None:
        """Graceful departure: fail running tasks, announce Left."""
        now = self.sim.now
        self.engine.integrate(now)
        for run in sorted(self.engine.runs.values(), key=lambda r: r.task_id):
            if run.state in (executor.RUNNING, executor.TRANSFERRING, executor.RESERVED):
                run.transition(executor.FAILED)
                self.sim.record(
                    {
                        "t": now,
                        "type": "run_failed",
                        "node": self.node,
                        "task": run.task_id,
                        "attempt": run.attempt,
                        "cause": "leave",
                    }
                )
                if run.origin != self.node:
                    self._send(
                        run.origin,
                        wire.Message(
                            wire.FAILED,
                            {
                                "task_id": run.task_id,
                                "attempt": run.attempt,
                                "cause": "leave",
                            },
                        ),
                    )
        left = membership.MemberState(
            node=self.node,
            status=membership.LEFT,
            incarnation=self.incarnation,
            last_update_time=now,
        )
        self.view.apply(left)
        self._queue_delta(left)
        peers = [
            n
            for n in self.view.alive_nodes()
            if n != self.node
        ][: self.cfg.leave_fanout]
        for peer in peers:
            self._send(peer, wire.Message(wire.LEAVE, {}))
        self.alive = False

    def on_crash(self) -> None:
        self.alive = False

    def on_move(self, position: Position) -> None:
        self.profile = self.profile.with_dyn(position=position)
        self.publish_profile(force=True)

    def on_battery_tick(self, dt: float) -> None:
        battery = self.profile.dyn.battery
        if is_mains(battery):
            return
        new_level = battery_step(battery, self.drain_rate, dt)
        self.profile = self.profile.with_dyn(battery=new_level)
        if new_level <= 0.0:
            self.sim.record(
                {"t": self.sim.now, "type": "battery_dead", "node": self.node}
            )
            self.sim.crash_node(self.node)
            return
        self._set_timer(self.cfg.battery_tick, "battery", {"dt": dt})

    # ------------------------------------------------------------------
    # membership internals
    # ------------------------------------------------------------------

    def _self_state(self) -> membership.MemberState:
        return membership.MemberState(
            node=self.node,
            status=membership.ALIVE,
            incarnation=self.incarnation,
            last_update_time=self._self_declared_at,
        )

    def _queue_delta(self, state: membership.MemberState) -> None:
        self.gossip_buffer[state.node] = [state, 0]

    def _pick_deltas(self) -> list:
        self_record = self.view.members.get(self.node) or self._self_state()
        picks = [self_record.to_dict()]
        order = sorted(self.gossip_buffer.items(), key=lambda kv: (kv[1][1], kv[0]))
        for node, slot in order:
            if node == self.node:
                continue
            if len(picks) >= self.cfg.gossip_k:
                break
            picks.append(slot[0].to_dict())
            slot[1] += 1
        for node in [
            n for n, slot in self.gossip_buffer.items() if slot[1] >= self.cfg.retransmit_limit
        ]:
            del self.gossip_buffer[node]
        return picks

    def _send(self, to: NodeId, msg: wire.Message) -> None:
        msg.deltas = self._pick_deltas()
        self.sim.send(self.node, to, msg)

    def _merge_member(self, state: membership.MemberState) -> None:
        now = self.sim.now
        if state.node == self.node:
            # Refutation: someone believes we are gone; reclaim with a higher
            # incarnation. Dead at incarnation k can only return as k+1.
            if (
                state.status != membership.ALIVE
                and state.incarnation >= self.incarnation
                and self.alive
            ):
                self.incarnation = state.incarnation + 1
                self._self_declared_at = now
                self.view.apply(self._self_state())
                self._queue_delta(self._self_state())
                self.publish_profile(force=True)
            return
        if (
            state.status in (membership.DEAD, membership.LEFT)
            and state.last_update_time + self.cfg.retention <= now
        ):
            # Expired tombstone: every holder GC'd it at the same declared
            # time; re-admitting a stale copy would restart its gossip.
            return
        before = self.view.members.get(state.node)
        if not self.view.apply(state):
            return
        after = self.view.members[state.node]
        self._queue_delta(after)
        before_status = before.status if before is not None else None
        if after.status == membership.ALIVE and before_status != membership.ALIVE:
            self.alive_since[state.node] = now
        if after.status == membership.SUSPECT:
            self._set_timer(
                max(0.0, after.last_update_time + self.cfg.t_dead - now),
                "suspect_dead",
                {
                    "node": after.node,
                    "incarnation": after.incarnation,
                    "since": after.last_update_time,
                },
            )
        if after.status in (membership.DEAD, membership.LEFT):
            if before_status not in (membership.DEAD, membership.LEFT):
                started = self.alive_since.pop(state.node, None)
                if started is not None:
                    self.session_durations.setdefault(state.node, []).append(
                        max(0.0, after.last_update_time - started)
                    )
                self._on_member_unavailable(after.node)
            # Re-armed on every record change: the declared timestamp can
            # still drop (prefer keeps the minimum), and GC must match the
            # final record exactly so all holders collect simultaneously.
            self._set_timer(
                max(0.0, after.last_update_time + self.cfg.retention - now),
                "member_gc",
                {
                    "node": after.node,
                    "incarnation": after.incarnation,
                    "status": after.status,
                    "since": after.last_update_time,
                },
            )
        self._check_swarm_change("merge")

    def _merge_deltas(self, deltas: list) -> None:
        for d in deltas:
            self._merge_member(membership.MemberState.from_dict(d))

    def _merge_view_dicts(self, members: list) -> None:
        self._merge_deltas(members)

    def _view_summary(self) -> list:
        return [
            m.to_dict() for _, m in sorted(self.view.members.items())
        ]

    def _hello_body(self) -> dict:
        return {"view": self._view_summary(), "digest": self.view.member_set_digest()}

    def _suspect(self, target: NodeId) -> None:
        current = self.view.members.get(target)
        if current is None or current.status != membership.ALIVE:
            return
        self._merge_member(
            membership.MemberState(
                node=target,
                status=membership.SUSPECT,
                incarnation=current.incarnation,
                last_update_time=self.sim.now,
            )
        )

    def _check_swarm_change(self, reason: str) -> None:
        sid = self.view.swarm_id
        if sid != self.last_swarm_id:
            kind = "merge" if sid < self.last_swarm_id else "split"
            self.sim.record(
                {
                    "t": self.sim.now,
                    "type": "swarm_change",
                    "node": self.node,
                    "old": self.last_swarm_id,
                    "new": sid,
                    "kind": kind,
                    "reason": reason,
                }
            )
            self.last_swarm_id = sid

    def member_status(self, node: NodeId):
        state = self.view.members.get(node)
        return state.status if state is not None else None

    def _is_usable(self, node: NodeId) -> bool:
        return self.member_status(node) not in (membership.DEAD, membership.LEFT, None)

    # ------------------------------------------------------------------
    # probe rounds and anti-entropy
    # ------------------------------------------------------------------

    def _on_round(self) -> None:
        now = self.sim.now
        self.round_no += 1
        targets = sorted(
            n
            for n, m in self.view.members.items()
            if n != self.node and m.status in (membership.ALIVE, membership.SUSPECT)
        )
        if targets:
            # Random pick from a per-node stream, not synchronized
            # round-robin: lockstep schedules leave the same member unprobed
            # by everyone at once.
            target = targets[self._probe_rng.randrange(len(targets))]
            self._probe(target)
        if self.round_no % self.cfg.anti_entropy_every == 0:
            self._anti_entropy_round()
        if self.round_no % self.cfg.rediscover_every == 0:
            self._rediscover()
        if self.round_no % self.cfg.status_refresh_every == 0:
            self.publish_profile()
        if membership.split_condition(self.view, now, self.cfg.t_split):
            self._check_swarm_change("split_detect")
        # Extra liveness probing of our remote executors at both round start
        # and mid-round, so the failure-detection path for active work beats
        # the round-robin cycle even with probe retries in the budget.
        self._ping_executors()
        self._set_timer(self.cfg.probe_period / 2, "liveness")
        self._set_timer(self.cfg.probe_period, "round")

    def _probe(self, target: NodeId, misses: int = 0) -> None:
        self._probe_token += 1
        token = self._probe_token
        self.pending_probes[target] = token
        self._send(target, wire.Message(wire.PING, {"token": token}))
        self._set_timer(
            self.cfg.probe_timeout,
            "probe_timeout",
            {"target": target, "token": token, "misses": misses},
        )

    def _on_liveness(self) -> None:
        self._ping_executors()

    def _ping_executors(self) -> None:
        executors = set()
        for ot in self.tasks.values():
            if ot.done or ot.failed:
                continue
            for node in ot.executors.values():
                if node != self.node and self._is_usable(node):
                    executors.add(node)
        for target in sorted(executors):
            if target not in self.pending_probes:
                self._probe(target)

    def _anti_entropy_round(self) -> None:
        peers = [n for n in self.view.alive_nodes() if n != self.node]
        if not peers:
            return
        peer = peers[(self.round_no // self.cfg.anti_entropy_every) % len(peers)]
        body = {
            "versions": {str(n): list(v) for n, v in self.registry.digest().items()},
            "view": self._view_summary(),
            "catalog": [r.to_dict() for _, r in sorted(self.catalog.records.items())],
        }
        self._send(peer, wire.Message(wire.DIGEST, body))

    def _rediscover(self) -> None:
        for peer in self.sim.discover(self.node):
            if self.member_status(peer) != membership.ALIVE:
                self._send(peer, wire.Message(wire.HELLO, self._hello_body()))

    # ------------------------------------------------------------------
    # message handling
    # ------------------------------------------------------------------

    def on_message(self, frm: NodeId, msg: wire.Message) -> None:
        if not self.alive:
            return
        self._merge_deltas(msg.deltas)
        handler = {
            wire.HELLO: self._handle_hello,
            wire.HELLO_ACK: self._handle_hello_ack,
            wire.PING: self._handle_ping,
            wire.ACK: self._handle_ack,
            wire.LEAVE: self._handle_noop,
            wire.DIGEST: self._handle_digest,
            wire.DELTA: self._handle_delta,
            wire.OFFER: self._handle_offer,
            wire.ACCEPT: self._handle_accept,
            wire.REJECT: self._handle_reject,
            wire.CLAIM: self._handle_claim,
            wire.CANCEL: self._handle_cancel,
            wire.NACK: self._handle_nack,
            wire.DONE: self._handle_done,
            wire.FAILED: self._handle_failed,
            wire.QOS_WARN: self._handle_qos_warn,
        }[msg.kind]
        handler(frm, msg.body)

    def _handle_noop(self, frm: NodeId, body: dict) -> None:
        pass

    def _handle_hello(self, frm: NodeId, body: dict) -> None:
        self._merge_view_dicts(body["view"])
        if self.view.member_set_digest() != body["digest"]:
            self._send(frm, wire.Message(wire.HELLO_ACK, {"view": self._view_summary()}))

    def _handle_hello_ack(self, frm: NodeId, body: dict) -> None:
        self._merge_view_dicts(body["view"])

    def _handle_ping(self, frm: NodeId, body: dict) -> None:
        self._send(frm, wire.Message(wire.ACK, {"token": body["token"]}))

    def _handle_ack(self, frm: NodeId, body: dict) -> None:
        if self.pending_probes.get(frm) == body["token"]:
            del self.pending_probes[frm]

    def _handle_digest(self, frm: NodeId, body: dict) -> None:
        self._merge_view_dicts(body["view"])
        for rec in body["catalog"]:
            self.catalog.merge(dataplane.CatalogRecord.from_dict(rec))
        remote = {int(n): tuple(v) for n, v in body["versions"].items()}
        newer_here, want = self.registry.diff(remote)
        reply = {
            "entries": [e.to_dict() for e in newer_here],
            "want": want,
            "view": self._view_summary(),
            "catalog": [r.to_dict() for _, r in sorted(self.catalog.records.items())],
        }
        self._send(frm, wire.Message(wire.DELTA, reply))

    def _handle_delta(self, frm: NodeId, body: dict) -> None:
        self._merge_view_dicts(body.get("view", []))
        for rec in body.get("catalog", []):
            self.catalog.merge(dataplane.CatalogRecord.from_dict(rec))
        for doc in body.get("entries", []):
            self.registry.merge(RegistryEntry.from_dict(doc))
        want = body.get("want", [])
        if want:
            entries = [
                self.registry.entries[n].to_dict()
                for n in want
                if n in self.registry.entries
            ]
            if entries:
                self._send(
                    frm, wire.Message(wire.DELTA, {"entries": entries, "want": []})
                )

    # ------------------------------------------------------------------
    # timers
    # ------------------------------------------------------------------

    def on_timer(self, timer_kind: str, data: dict) -> None:
        if not self.alive:
            return
        if data.get("epoch", self.epoch) != self.epoch:
            return  # timer from a previous life of this node
        if timer_kind == "round":
            self._on_round()
        elif timer_kind == "liveness":
            self._on_liveness()
        elif timer_kind == "probe_timeout":
            if self.pending_probes.get(data["target"]) == data["token"]:
                del self.pending_probes[data["target"]]
                misses = data.get("misses", 0) + 1
                if misses < self.cfg.probe_retries:
                    # Retry before suspecting: one lost PING/ACK must not
                    # look like a crash on a lossy link.
                    self._probe(data["target"], misses=misses)
                else:
                    self._suspect(data["target"])
        elif timer_kind == "suspect_dead":
            self._promote_dead(data)
        elif timer_kind == "member_gc":
            self._gc_member(data)
        elif timer_kind == "battery":
            self.on_battery_tick(data["dt"])
        elif timer_kind == "task_arrival":
            self.submit_task(TaskSpec.from_dict(data["task"]))
        elif timer_kind == "offer_decision":
            self._decide_offers(data["task_id"], data["attempt"], timed_out=True)
        elif timer_kind == "reservation_ttl":
            self._expire_reservation(data["task_id"], data["attempt"])
        elif timer_kind == "transfer_done":
            self._transfer_done(data["task_id"], data["attempt"])
        elif timer_kind == "completion":
            self._on_completion_timer(data["generation"])
        elif timer_kind == "monitor":
            self._on_monitor()
        elif timer_kind == "retry_place":
            self._retry_place(data["task_id"])
        elif timer_kind == "replicate_done":
            self._replicate_done(data)
        else:
            raise ValueError(f"unknown timer {timer_kind}")

    def _promote_dead(self, data: dict) -> None:
        state = self.view.members.get(data["node"])
        if (
            state is not None
            and state.status == membership.SUSPECT
            and state.incarnation == data["incarnation"]
            and state.last_update_time == data["since"]
        ):
            self._merge_member(
                membership.MemberState(
                    node=state.node,
                    status=membership.DEAD,
                    incarnation=state.incarnation,
                    last_update_time=data["since"] + self.cfg.t_dead,
                )
            )

    def _gc_member(self, data: dict) -> None:
        state = self.view.members.get(data["node"])
        if (
            state is not None
            and state.status == data["status"]
            and state.incarnation == data["incarnation"]
            and state.last_update_time == data["since"]
        ):
            del self.view.members[data["node"]]
            self.gossip_buffer.pop(data["node"], None)
            self.registry.evict(data["node"])

    # ------------------------------------------------------------------
    # profile publishing
    # ------------------------------------------------------------------

    def publish_profile(self, force: bool = False) -> None:
        dyn = DynamicStatus(
            utilization=round(self.forecast.ewma_utilization, 6),
            battery=(
                self.profile.dyn.battery
                if is_mains(self.profile.dyn.battery)
                else round(self.profile.dyn.battery, 4)
            ),
            position=self.profile.dyn.position,
            scheduled_task_ids=tuple(sorted(self.engine.runs)),
            status_version=self.profile.dyn.status_version,
        )
        candidate = NodeProfile(
            node=self.node,
            hw=self.profile.hw,
            sw=self.profile.sw,
            dyn=dyn,
            adv=self.profile.adv,
        )
        current = self.registry.entries.get(self.node)
        if not force and current is not None:
            a, b = current.profile.to_dict(), candidate.to_dict()
            a["dyn"]["status_version"] = b["dyn"]["status_version"] = 0
            if a == b:
                return
        self.registry.local_update(candidate, self.incarnation, self.sim.now)

    # ------------------------------------------------------------------
    # data plane
    # ------------------------------------------------------------------

    def _alive_for_data(self, node: NodeId) -> bool:
        if node == self.node:
            return True
        return self.member_status(node) == membership.ALIVE

    def _position_of_member(self, node: NodeId):
        if node == self.node:
            return self.profile.dyn.position
        entry = self.registry.entries.get(node)
        return entry.profile.dyn.position if entry is not None else None

    def _resolve(self, data_id, reader: NodeId):
        def pos(n):
            p = self._position_of_member(n)
            # Unknown positions sort last but stay eligible.
            return p if p is not None else Position(1e12, 1e12)

        def alive(n):
            return self._alive_for_data(n) and (
                n == reader or self._position_of_member(n) is not None
            )

        return self.catalog.resolve(data_id, reader, pos, alive)

    def _remote_inputs_for(self, task: TaskSpec, runner: NodeId):
        """[(size, distance)] for inputs not local to `runner`; None when an
        input has no live resolvable replica."""
        out = []
        runner_pos = self._position_of_member(runner)
        for inp in task.input_data:
            replica = self._resolve(inp.source, runner)
            if replica is None:
                return None
            if replica == runner:
                continue
            rep_pos = self._position_of_member(replica)
            if runner_pos is None or rep_pos is None:
                return None
            out.append((inp.size, distance(runner_pos, rep_pos)))
        return out

    def replicate(self, data_id, on_done=None) -> bool:
        """Pull a copy of `data_id` onto this node; False when unresolvable."""
        if data_id in self.catalog.records and self.node in self.catalog.records[
            data_id
        ].descriptor.replicas:
            return True  # already a replica, no-op
        source = self._resolve(data_id, self.node)
        if source is None or source == self.node:
            if source is None:
                self.sim.record(
                    {
                        "t": self.sim.now,
                        "type": "replicate_failed",
                        "node": self.node,
                        "data": data_id,
                    }
                )
                return False
            return True
        size = self.catalog.records[data_id].descriptor.size
        dist = distance(
            self.profile.dyn.position, self._position_of_member(source)
        )
        duration = size / self.profile.hw.link_bandwidth + self.sim.net.latency(dist)
        self.sim.record(
            {
                "t": self.sim.now,
                "type": "replicate_start",
                "node": self.node,
                "data": data_id,
                "source": source,
                "duration": duration,
            }
        )
        self._set_timer(
            duration,
            "replicate_done",
            {"data": data_id, "source": source},
        )
        return True

    def _replicate_done(self, data: dict) -> None:
        source, data_id = data["source"], data["data"]
        if self.member_status(source) != membership.ALIVE:
            # Source died mid-transfer: abort and retry from another replica.
            self.sim.record(
                {
                    "t": self.sim.now,
                    "type": "replicate_abort",
                    "node": self.node,
                    "data": data_id,
                    "source": source,
                }
            )
            self.replicate(data_id)
            return
        self.catalog.add_replica(data_id, self.node)
        self.sim.record(
            {
                "t": self.sim.now,
                "type": "replicate_done",
                "node": self.node,
                "data": data_id,
                "source": source,
            }
        )

    # ------------------------------------------------------------------
    # scheduling: origin side
    # ------------------------------------------------------------------

    def submit_task(self, task: TaskSpec) -> None:
        now = self.sim.now
        self.tasks[task.task_id] = _OriginTask(spec=task, submitted_at=now)
        self.sim.record(
            {
                "t": now,
                "type": "task_submitted",
                "node": self.node,
                "task": task.task_id,
                "typology": task.typology,
            }
        )
        self._place(task.task_id)

    def _retry_place(self, task_id) -> None:
        ot = self.tasks.get(task_id)
        if ot is not None and not ot.done and not ot.failed and not ot.executors:
            self._place(task_id)

    def _fail_permanent(self, ot: _OriginTask) -> None:
        ot.failed = True
        self.sim.record(
            {
                "t": self.sim.now,
                "type": "task_failed_permanent",
                "node": self.node,
                "task": ot.spec.task_id,
                "attempts": ot.attempts,
            }
        )

    def _place(self, task_id, exclude: frozenset = frozenset()) -> None:
        """One placement attempt: local-first, then offers to top-k."""
        ot = self.tasks[task_id]
        if ot.done or ot.failed:
            return
        ot.attempts += 1
        attempt = ot.attempts
        if attempt > self.cfg.scheduler.max_attempts:
            self._fail_permanent(ot)
            return
        now = self.sim.now
        task = ot.spec
        deadline_remaining = ot.submitted_at + task.qos.deadline - now
        if self.node not in exclude and self._locally_feasible(task, deadline_remaining):
            self.sim.record(
                {
                    "t": now,
                    "type": "local_admit",
                    "node": self.node,
                    "task": task.task_id,
                    "attempt": attempt,
                }
            )
            ot.executors[attempt] = self.node
            self._reserve_run(task, attempt, ot.submitted_at)
            self._admit_run(task.task_id, attempt)
            return
        scored, decision = self._score_candidates(task, deadline_remaining, exclude)
        chosen = select_top_k(scored, self.cfg.scheduler.top_k)
        self.sim.record(
            {
                "t": now,
                "type": "sched_decision",
                "node": self.node,
                "task": task.task_id,
                "attempt": attempt,
                "candidates": decision,
                "chosen": chosen,
            }
        )
        if not chosen:
            self.sim.record(
                {
                    "t": now,
                    "type": "unschedulable",
                    "node": self.node,
                    "task": task.task_id,
                    "attempt": attempt,
                }
            )
            self._set_timer(
                self.cfg.retry_delay, "retry_place", {"task_id": task.task_id}
            )
            return
        ot.offer = {
            "attempt": attempt,
            "sent": set(chosen),
            "responded": set(),
            "accepts": [],
            "decided": False,
        }
        body = {
            "task": task.to_dict(),
            "attempt": attempt,
            "submitted_at": ot.submitted_at,
        }
        for node in chosen:
            self._send(node, wire.Message(wire.OFFER, dict(body)))
        self._set_timer(
            self.cfg.offer_timeout,
            "offer_decision",
            {"task_id": task.task_id, "attempt": attempt},
        )

    def _locally_feasible(self, task: TaskSpec, deadline_remaining: float) -> bool:
        if not capability_match(task, self.profile):
            return False
        if self.engine.memory_in_use() + task.memory_demand > self.profile.hw.memory:
            return False
        remote = self._remote_inputs_for(task, self.node)
        if remote is None:
            return False
        completion = cognition.predict_completion(
            task,
            self._own_profile_snapshot(),
            remote,
            base_latency=self.sim.net.base_latency,
            latency_per_meter=self.sim.net.latency_per_meter,
            min_capacity=self.cfg.min_capacity,
        )
        return completion <= deadline_remaining

    def _own_profile_snapshot(self) -> NodeProfile:
        return self.profile.with_dyn(utilization=self.engine.utilization())

    def _score_candidates(self, task: TaskSpec, deadline_remaining: float, exclude):
        now = self.sim.now

        def pred(entry):
            return entry.node != self.node and entry.node not in exclude and capability_match(
                task, entry.profile
            )

        centroid = data_centroid(
            task, self._source_position, self.profile.dyn.position
        )
        scored, decision = [], []
        for entry, stale in self.registry.query(pred, self.member_status):
            remote = self._remote_inputs_for(task, entry.node)
            if remote is None:
                continue
            completion = cognition.predict_completion(
                task,
                entry.profile,
                remote,
                base_latency=self.sim.net.base_latency,
                latency_per_meter=self.sim.net.latency_per_meter,
                min_capacity=self.cfg.min_capacity,
            )
            # Horizon is padded with the entry age so stale battery readings
            # are extrapolated to now before looking ahead.
            horizon = completion + max(0.0, now - entry.stamped_time)
            history = SessionHistory(
                durations=tuple(self.session_durations.get(entry.node, ())),
                current_session_age=max(
                    0.0, now - self.alive_since.get(entry.node, now)
                ),
            )
            availability = cognition.predict_availability(
                entry.profile,
                history,
                horizon,
                drain_rate=self.drain_rates.get(entry.node, 0.0),
            )
            dist = distance(entry.profile.dyn.position, centroid)
            score = compute_score(
                availability,
                completion,
                deadline_remaining,
                dist,
                self.cfg.scheduler,
            )
            scored.append((entry.node, score))
            decision.append(
                {
                    "node": entry.node,
                    "stale": stale,
                    "availability": availability,
                    "completion": completion,
                    "deadline_remaining": deadline_remaining,
                    "distance": dist,
                    "qos": score.qos,
                    "locality": score.locality,
                    "total": score.total,
                }
            )
        return scored, decision

    def _source_position(self, source_id):
        rec = self.catalog.records.get(source_id)
        if rec is None:
            return None
        owner = rec.descriptor.owner
        pos = self._position_of_member(owner)
        if pos is not None:
            return pos
        for replica in sorted(rec.descriptor.replicas):
            pos = self._position_of_member(replica)
            if pos is not None:
                return pos
        return None

    def _decide_offers(self, task_id, attempt: int, timed_out: bool = False) -> None:
        ot = self.tasks.get(task_id)
        if ot is None or ot.offer is None:
            return
        st = ot.offer
        if st["attempt"] != attempt or st["decided"]:
            return
        if not timed_out and st["responded"] != st["sent"]:
            return
        st["decided"] = True
        accepts = sorted(st["accepts"])  # (time, node): earliest, then lowest id
        if ot.done or ot.failed:
            losers = [n for _, n in accepts]
        elif accepts:
            winner = accepts[0][1]
            losers = [n for _, n in accepts[1:]]
            ot.executors[attempt] = winner
            self.sim.record(
                {
                    "t": self.sim.now,
                    "type": "claim",
                    "node": self.node,
                    "task": task_id,
                    "attempt": attempt,
                    "executor": winner,
                }
            )
            self._send(
                winner,
                wire.Message(wire.CLAIM, {"task_id": task_id, "attempt": attempt}),
            )
        else:
            losers = []
            self._place(task_id)
        for loser in losers:
            self._send(
                loser,
                wire.Message(wire.CANCEL, {"task_id": task_id, "attempt": attempt}),
            )

    def _handle_accept(self, frm: NodeId, body: dict) -> None:
        task_id, attempt = body["task_id"], body["attempt"]
        ot = self.tasks.get(task_id)
        st = ot.offer if ot is not None else None
        if (
            st is None
            or st["attempt"] != attempt
            or st["decided"]
            or frm not in st["sent"]
        ):
            # Late or stale acceptance: release the candidate's reservation.
            self._send(
                frm, wire.Message(wire.CANCEL, {"task_id": task_id, "attempt": attempt})
            )
            return
        st["responded"].add(frm)
        st["accepts"].append((self.sim.now, frm))
        if st["responded"] == st["sent"]:
            self._decide_offers(task_id, attempt)

    def _handle_reject(self, frm: NodeId, body: dict) -> None:
        task_id, attempt = body["task_id"], body["attempt"]
        ot = self.tasks.get(task_id)
        st = ot.offer if ot is not None else None
        if st is None or st["attempt"] != attempt or st["decided"]:
            return
        st["responded"].add(frm)
        if st["responded"] == st["sent"]:
            self._decide_offers(task_id, attempt)

    def _handle_nack(self, frm: NodeId, body: dict) -> None:
        task_id, attempt = body["task_id"], body["attempt"]
        ot = self.tasks.get(task_id)
        if ot is None or ot.done or ot.failed:
            return
        if ot.executors.get(attempt) == frm:
            del ot.executors[attempt]
            if not ot.executors:
                self._place(task_id)

    def _handle_done(self, frm: NodeId, body: dict) -> None:
        task_id, attempt = body["task_id"], body["attempt"]
        ot = self.tasks.get(task_id)
        if ot is None or ot.failed:
            return
        if ot.done:
            ot.executors.pop(attempt, None)
            return  # exactly-once completion accounting
        ot.done = True
        latency = self.sim.now - ot.submitted_at
        self.sim.record(
            {
                "t": self.sim.now,
                "type": "task_done",
                "node": self.node,
                "task": task_id,
                "attempt": attempt,
                "executor": frm,
                "latency": latency,
                "deadline_violation": latency > ot.spec.qos.deadline,
            }
        )
        ot.executors.pop(attempt, None)
        for other_attempt, node in sorted(ot.executors.items()):
            if node == self.node:
                self._cancel_local(task_id, other_attempt)
            else:
                self._send(
                    node,
                    wire.Message(
                        wire.CANCEL, {"task_id": task_id, "attempt": other_attempt}
                    ),
                )
        ot.executors.clear()

    def _handle_failed(self, frm: NodeId, body: dict) -> None:
        task_id, attempt = body["task_id"], body["attempt"]
        ot = self.tasks.get(task_id)
        if ot is None or ot.done or ot.failed:
            return
        if ot.executors.get(attempt) == frm:
            del ot.executors[attempt]
        if not ot.executors:
            self._place(task_id, exclude=frozenset({frm}))

    def _handle_qos_warn(self, frm: NodeId, body: dict) -> None:
        task_id, attempt = body["task_id"], body["attempt"]
        ot = self.tasks.get(task_id)
        if ot is None or ot.done or ot.failed:
            return
        if attempt in ot.warned_attempts:
            return
        ot.warned_attempts.add(attempt)
        if ot.attempts >= self.cfg.scheduler.max_attempts:
            return
        # Speculative parallel attempt on a different node; first DONE wins.
        self._place(task_id, exclude=frozenset({frm}))

    def _on_member_unavailable(self, peer: NodeId) -> None:
        """Membership reports Dead/Left: re-place our tasks that ran there."""
        for task_id in sorted(self.tasks):
            ot = self.tasks[task_id]
            if ot.done or ot.failed:
                continue
            dead_attempts = [a for a, n in ot.executors.items() if n == peer]
            if not dead_attempts:
                continue
            for attempt in dead_attempts:
                del ot.executors[attempt]
            self.sim.record(
                {
                    "t": self.sim.now,
                    "type": "replace_on_death",
                    "node": self.node,
                    "task": task_id,
                    "dead": peer,
                }
            )
            if not ot.executors:
                self._place(task_id, exclude=frozenset({peer}))

    # ------------------------------------------------------------------
    # scheduling: executor side
    # ------------------------------------------------------------------

    def _handle_offer(self, frm: NodeId, body: dict) -> None:
        task = TaskSpec.from_dict(body["task"])
        attempt = body["attempt"]
        submitted_at = body["submitted_at"]
        existing = self.engine.runs.get(task.task_id)
        if existing is not None and existing.state in (
            executor.RESERVED,
            executor.TRANSFERRING,
            executor.RUNNING,
        ):
            kind = wire.ACCEPT if existing.attempt == attempt else wire.REJECT
            self._send(
                frm, wire.Message(kind, {"task_id": task.task_id, "attempt": attempt})
            )
            return
        deadline_remaining = submitted_at + task.qos.deadline - self.sim.now
        feasible = (
            capability_match(task, self.profile)
            and self.engine.memory_in_use() + task.memory_demand
            <= self.profile.hw.memory
            and self._remote_inputs_for(task, self.node) is not None
        )
        if feasible:
            remote = self._remote_inputs_for(task, self.node)
            completion = cognition.predict_completion(
                task,
                self._own_profile_snapshot(),
                remote,
                base_latency=self.sim.net.base_latency,
                latency_per_meter=self.sim.net.latency_per_meter,
                min_capacity=self.cfg.min_capacity,
            )
            feasible = completion <= deadline_remaining
        if not feasible:
            self._send(
                frm,
                wire.Message(
                    wire.REJECT, {"task_id": task.task_id, "attempt": attempt}
                ),
            )
            return
        self._reserve_run(task, attempt, submitted_at, origin=frm, with_ttl=True)
        self._send(
            frm, wire.Message(wire.ACCEPT, {"task_id": task.task_id, "attempt": attempt})
        )

    def _reserve_run(
        self,
        task: TaskSpec,
        attempt: int,
        submitted_at: float,
        origin: NodeId = None,
        with_ttl: bool = False,
    ) -> None:
        origin = self.node if origin is None else origin
        self.engine.integrate(self.sim.now)
        run = executor.TaskRun(
            task_id=task.task_id,
            attempt=attempt,
            state=executor.RESERVED,
            remaining_work=task.work,
            memory=task.memory_demand,
            origin=origin,
            submitted_at=submitted_at,
            deadline=task.qos.deadline,
        )
        self.engine.runs[task.task_id] = run
        self.exec_meta[task.task_id] = {"task": task}
        self.sim.record(
            {
                "t": self.sim.now,
                "type": "reserve",
                "node": self.node,
                "task": task.task_id,
                "attempt": attempt,
                "memory": task.memory_demand,
            }
        )
        if with_ttl:
            self._set_timer(
                self.cfg.reservation_ttl,
                "reservation_ttl",
                {"task_id": task.task_id, "attempt": attempt},
            )
        self.publish_profile()

    def _expire_reservation(self, task_id, attempt: int) -> None:
        run = self.engine.runs.get(task_id)
        if run is not None and run.state == executor.RESERVED and run.attempt == attempt:
            self._release_run(task_id, "ttl_expired", executor.EVICTED)

    def _release_run(self, task_id, reason: str, final_state: str) -> None:
        run = self.engine.runs.get(task_id)
        if run is None:
            return
        self.engine.integrate(self.sim.now)
        run.transition(final_state)
        del self.engine.runs[task_id]
        self.exec_meta.pop(task_id, None)
        self.sim.record(
            {
                "t": self.sim.now,
                "type": "release",
                "node": self.node,
                "task": task_id,
                "attempt": run.attempt,
                "memory": run.memory,
                "reason": reason,
            }
        )
        self._schedule_completion()
        self.publish_profile()

    def _handle_claim(self, frm: NodeId, body: dict) -> None:
        task_id, attempt = body["task_id"], body["attempt"]
        run = self.engine.runs.get(task_id)
        if run is None or run.state != executor.RESERVED or run.attempt != attempt:
            self._send(
                frm, wire.Message(wire.NACK, {"task_id": task_id, "attempt": attempt})
            )
            return
        self._admit_run(task_id, attempt)

    def _admit_run(self, task_id, attempt: int) -> None:
        run = self.engine.runs[task_id]
        task = self.exec_meta[task_id]["task"]
        remote = self._remote_inputs_for(task, self.node)
        if remote is None:
            self._fail_run(task_id, "data_unavailable")
            return
        transfer_time = sum(
            size / self.profile.hw.link_bandwidth + self.sim.net.latency(dist)
            for size, dist in remote
        )
        self.engine.integrate(self.sim.now)
        run.transition(executor.TRANSFERRING)
        self.sim.record(
            {
                "t": self.sim.now,
                "type": "run_admitted",
                "node": self.node,
                "task": task_id,
                "attempt": attempt,
                "transfer_time": transfer_time,
            }
        )
        self._set_timer(
            transfer_time,
            "transfer_done",
            {"task_id": task_id, "attempt": attempt},
        )

    def _transfer_done(self, task_id, attempt: int) -> None:
        run = self.engine.runs.get(task_id)
        if run is None or run.state != executor.TRANSFERRING or run.attempt != attempt:
            return
        self.engine.integrate(self.sim.now)
        run.transition(executor.RUNNING)
        run.started_at = self.sim.now
        self.sim.record(
            {
                "t": self.sim.now,
                "type": "run_start",
                "node": self.node,
                "task": task_id,
                "attempt": attempt,
            }
        )
        self._schedule_completion()
        self._arm_monitor()
        self.publish_profile()

    def _fail_run(self, task_id, cause: str) -> None:
        run = self.engine.runs.get(task_id)
        if run is None:
            return
        origin, attempt = run.origin, run.attempt
        self.sim.record(
            {
                "t": self.sim.now,
                "type": "run_failed",
                "node": self.node,
                "task": task_id,
                "attempt": attempt,
                "cause": cause,
            }
        )
        self._release_run(task_id, cause, executor.FAILED)
        msg = wire.Message(
            wire.FAILED, {"task_id": task_id, "attempt": attempt, "cause": cause}
        )
        if origin == self.node:
            self._handle_failed(self.node, msg.body)
        else:
            self._send(origin, msg)

    def _handle_cancel(self, frm: NodeId, body: dict) -> None:
        self._cancel_local(body["task_id"], body["attempt"])

    def _cancel_local(self, task_id, attempt: int) -> None:
        run = self.engine.runs.get(task_id)
        if run is None or run.attempt != attempt:
            return
        if run.state in (executor.RESERVED, executor.TRANSFERRING, executor.RUNNING):
            self.sim.record(
                {
                    "t": self.sim.now,
                    "type": "run_evicted",
                    "node": self.node,
                    "task": task_id,
                    "attempt": attempt,
                }
            )
            self._release_run(task_id, "cancel", executor.EVICTED)

    def _schedule_completion(self) -> None:
        nxt = self.engine.next_finish(self.sim.now)
        if nxt is not None:
            self._set_timer(
                max(0.0, nxt[0] - self.sim.now),
                "completion",
                {"generation": self.engine.generation},
            )

    def _on_completion_timer(self, generation: int) -> None:
        if generation != self.engine.generation:
            return  # stale: the run set changed since this was scheduled
        self.engine.integrate(self.sim.now)
        self._process_finished()
        self._schedule_completion()

    def _process_finished(self) -> None:
        for run in sorted(self.engine.finished_runs(), key=lambda r: r.task_id):
            run.transition(executor.DONE)
            del self.engine.runs[run.task_id]
            self.exec_meta.pop(run.task_id, None)
            self.sim.record(
                {
                    "t": self.sim.now,
                    "type": "run_done",
                    "node": self.node,
                    "task": run.task_id,
                    "attempt": run.attempt,
                    "progressed": run.progressed,
                }
            )
            body = {"task_id": run.task_id, "attempt": run.attempt}
            if run.origin == self.node:
                self._handle_done(self.node, body)
            else:
                self._send(run.origin, wire.Message(wire.DONE, body))
            self.publish_profile()

    def _arm_monitor(self) -> None:
        if not self._monitor_armed:
            self._monitor_armed = True
            self._set_timer(self.cfg.exec_tick, "monitor")

    def _on_monitor(self) -> None:
        if self.engine.active_count() == 0:
            # One decay step toward idle so the published load is not frozen
            # at the last busy value.
            self.forecast = cognition.forecast_load(0.0, self.forecast)
            self.publish_profile()
            self._monitor_armed = False
            return
        now = self.sim.now
        self.engine.integrate(now)
        self.forecast = cognition.forecast_load(self.engine.utilization(), self.forecast)
        self._process_finished()
        for run in sorted(self.engine.running_runs(), key=lambda r: r.task_id):
            if run.qos_warned:
                continue
            projected = self.engine.projected_finish(run, now)
            if projected > run.deadline_abs:
                run.qos_warned = True
                self.sim.record(
                    {
                        "t": now,
                        "type": "qos_warn",
                        "node": self.node,
                        "task": run.task_id,
                        "attempt": run.attempt,
                        "projected": projected,
                    }
                )
                body = {
                    "task_id": run.task_id,
                    "attempt": run.attempt,
                    "projected": projected,
                }
                if run.origin == self.node:
                    self._handle_qos_warn(self.node, body)
                else:
                    self._send(run.origin, wire.Message(wire.QOS_WARN, body))
        self._schedule_completion()
        if self.engine.active_count() > 0:
            self._set_timer(self.cfg.exec_tick, "monitor")
        else:
            self._monitor_armed = False
