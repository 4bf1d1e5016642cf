"""Gossip membership state: member records, view merging, swarm identity.

The view merge is a join-semilattice: per member, higher incarnation wins and
at equal incarnation the more terminal status wins (Left > Dead > Suspect >
Alive). Consequently merging is commutative, associative and idempotent, and
a node declared Dead at incarnation k can only come back with incarnation
> k (refutation).

Protocol timing (probe rounds, timeouts) lives in the agent; this module is
pure data logic so it can be property-tested in isolation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

from .model import NodeId

ALIVE = "alive"
SUSPECT = "suspect"
DEAD = "dead"
LEFT = "left"

#: Precedence at equal incarnation; larger rank wins a merge.
_STATUS_RANK = {ALIVE: 0, SUSPECT: 1, DEAD: 2, LEFT: 3}


@dataclass(frozen=True)
class MemberState:
    node: NodeId
    status: str
    incarnation: int
    last_update_time: float  # sim time the current status was declared

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "status": self.status,
            "incarnation": self.incarnation,
            "last_update_time": self.last_update_time,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MemberState":
        return cls(
            node=int(d["node"]),
            status=str(d["status"]),
            incarnation=int(d["incarnation"]),
            last_update_time=float(d["last_update_time"]),
        )


def prefer(a: MemberState, b: MemberState) -> MemberState:
    """The record that wins a merge between two states of the same member."""
    if a.node != b.node:
        raise ValueError("cannot merge states of different members")
    if a.incarnation != b.incarnation:
        return a if a.incarnation > b.incarnation else b
    ra, rb = _STATUS_RANK[a.status], _STATUS_RANK[b.status]
    if ra != rb:
        return a if ra > rb else b
    # Same incarnation and status: keep the earliest declaration time so all
    # nodes converge on one timestamp (matters for retention GC).
    return a if a.last_update_time <= b.last_update_time else b


@dataclass
class SwarmView:
    """One node's belief about swarm membership."""

    self_node: NodeId
    members: dict = field(default_factory=dict)  # NodeId -> MemberState
    view_version: int = 0

    def alive_nodes(self) -> list:
        return sorted(
            n for n, m in self.members.items() if m.status == ALIVE
        )

    @property
    def swarm_id(self):
        """Deterministic swarm identity: minimum Alive NodeId in the view."""
        alive = self.alive_nodes()
        return alive[0] if alive else self.self_node

    def member_set_digest(self) -> str:
        """Stable digest over (node, status, incarnation) triples."""
        items = sorted(
            (m.node, m.status, m.incarnation) for m in self.members.values()
        )
        h = hashlib.sha256(repr(items).encode())
        return h.hexdigest()[:16]

    def apply(self, incoming: MemberState) -> bool:
        """Merge one member record; returns True when the view changed."""
        current = self.members.get(incoming.node)
        if current is None:
            self.members[incoming.node] = incoming
            self.view_version += 1
            return True
        winner = prefer(current, incoming)
        if winner is not current:
            self.members[incoming.node] = winner
            self.view_version += 1
            return True
        return False


def merge_views(a: SwarmView, b: SwarmView) -> SwarmView:
    """Member-wise merge of two views (pure; used directly in tests)."""
    merged = SwarmView(self_node=a.self_node)
    merged.members = dict(a.members)
    for state in b.members.values():
        cur = merged.members.get(state.node)
        merged.members[state.node] = state if cur is None else prefer(cur, state)
    merged.view_version = max(a.view_version, b.view_version)
    return merged


def split_condition(view: SwarmView, now: float, t_split: float) -> bool:
    """True when at least half the members have been unreachable past t_split."""
    if not view.members:
        return False
    stale = sum(
        1
        for m in view.members.values()
        if m.status in (DEAD, SUSPECT) and now - m.last_update_time >= t_split
    )
    return stale * 2 >= len(view.members)
