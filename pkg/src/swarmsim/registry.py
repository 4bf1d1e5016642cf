"""Gossip-replicated resource registry: last-writer-wins profile records.

Each entry is versioned by the lexicographic pair (incarnation,
status_version), tying profile freshness to membership incarnation: after a
crash-rejoin the node's incarnation rises, so zombie profiles from the old
life can never supersede fresh ones. Per entry the merge is an LWW register,
hence idempotent, commutative and associative.

Deliberate deviation from a consensus-backed store: profile data needs
availability under churn and partitions, not linearizability, so this is a
leaderless anti-entropy design.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .model import NodeId, NodeProfile
from . import membership

Version = tuple  # (incarnation, status_version), compared lexicographically


@dataclass(frozen=True)
class RegistryEntry:
    node: NodeId
    profile: NodeProfile
    version: Version
    stamped_time: float

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "profile": self.profile.to_dict(),
            "version": list(self.version),
            "stamped_time": self.stamped_time,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegistryEntry":
        return cls(
            node=int(d["node"]),
            profile=NodeProfile.from_dict(d["profile"]),
            version=tuple(d["version"]),
            stamped_time=float(d["stamped_time"]),
        )


class ForeignUpdateError(Exception):
    """Direct local_update for a node other than the registry owner."""


class Registry:
    """One node's replica of the swarm-wide profile store."""

    def __init__(self, owner: NodeId):
        self.owner = owner
        self.entries: dict = {}  # NodeId -> RegistryEntry

    def local_update(
        self, profile: NodeProfile, incarnation: int, now: float
    ) -> RegistryEntry:
        """Install an updated own profile, bumping status_version.

        Only the owner's profile may be written directly; foreign entries
        arrive exclusively via merge (gossip).
        """
        if profile.node != self.owner:
            raise ForeignUpdateError(
                f"node {self.owner} cannot locally update profile of {profile.node}"
            )
        prev = self.entries.get(self.owner)
        prev_sv = prev.version[1] if prev is not None else profile.dyn.status_version
        new_profile = profile.with_dyn(status_version=prev_sv + 1)
        entry = RegistryEntry(
            node=self.owner,
            profile=new_profile,
            version=(incarnation, prev_sv + 1),
            stamped_time=now,
        )
        self.entries[self.owner] = entry
        return entry

    def merge(self, entry: RegistryEntry) -> bool:
        """LWW install of a gossiped entry; never regresses a version."""
        current = self.entries.get(entry.node)
        if current is not None and current.version >= entry.version:
            return False
        self.entries[entry.node] = entry
        return True

    def digest(self) -> dict:
        """NodeId -> version, deterministic summary for anti-entropy."""
        return {node: e.version for node, e in sorted(self.entries.items())}

    def diff(self, remote_digest: dict):
        """(entries newer here, node ids newer or only-known remotely)."""
        newer_here = []
        for node, entry in sorted(self.entries.items()):
            rv = remote_digest.get(node)
            if rv is None or tuple(rv) < entry.version:
                newer_here.append(entry)
        want = []
        for node, rv in sorted(remote_digest.items()):
            mine = self.entries.get(node)
            if mine is None or mine.version < tuple(rv):
                want.append(node)
        return newer_here, want

    def query(self, predicate, status_of) -> list:
        """Entries of not-Dead/Left members matching the predicate.

        status_of: NodeId -> membership status (or None when unknown).
        Returns (entry, stale) pairs ordered by NodeId; stale flags entries
        of currently suspected nodes.
        """
        out = []
        for node in sorted(self.entries):
            status = status_of(node)
            if status in (membership.DEAD, membership.LEFT):
                continue
            entry = self.entries[node]
            if predicate(entry):
                out.append((entry, status == membership.SUSPECT))
        return out

    def evict(self, node: NodeId) -> bool:
        return self.entries.pop(node, None) is not None

    def content_hash(self) -> str:
        doc = json.dumps(
            [e.to_dict() for _, e in sorted(self.entries.items())],
            sort_keys=True,
        )
        return hashlib.sha256(doc.encode()).hexdigest()[:16]
