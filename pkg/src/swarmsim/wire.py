"""Wire message kinds and the codec both ends of a link agree on.

Messages are a kind tag plus a JSON-compatible body; every message also
carries a (possibly empty) list of piggybacked membership deltas, which is
how membership information disseminates with the regular traffic. The codec
is canonical JSON (sorted keys), so encoding is deterministic and traces can
record the decoded form alongside a short digest.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field

# Membership / discovery
HELLO = "HELLO"
HELLO_ACK = "HELLO-ACK"
PING = "PING"
ACK = "ACK"
LEAVE = "LEAVE"

# Registry anti-entropy
DIGEST = "DIGEST"
DELTA = "DELTA"

# Scheduling / execution
OFFER = "OFFER"
ACCEPT = "ACCEPT"
REJECT = "REJECT"
CLAIM = "CLAIM"
CANCEL = "CANCEL"
NACK = "NACK"
DONE = "DONE"
FAILED = "FAILED"
QOS_WARN = "QOS-WARN"

ALL_KINDS = frozenset(
    {
        HELLO,
        HELLO_ACK,
        PING,
        ACK,
        LEAVE,
        DIGEST,
        DELTA,
        OFFER,
        ACCEPT,
        REJECT,
        CLAIM,
        CANCEL,
        NACK,
        DONE,
        FAILED,
        QOS_WARN,
    }
)


@dataclass
class Message:
    kind: str
    body: dict = field(default_factory=dict)
    deltas: list = field(default_factory=list)  # piggybacked membership deltas


def encode(msg: Message) -> bytes:
    if msg.kind not in ALL_KINDS:
        raise ValueError(f"unknown message kind: {msg.kind}")
    doc = {"kind": msg.kind, "body": msg.body, "deltas": msg.deltas}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def decode(data: bytes) -> Message:
    doc = json.loads(data.decode())
    kind = doc["kind"]
    if kind not in ALL_KINDS:
        raise ValueError(f"unknown message kind: {kind}")
    return Message(kind=kind, body=doc["body"], deltas=doc["deltas"])


def digest(data: bytes) -> str:
    """Short stable content digest for trace records."""
    return format(zlib.crc32(data), "08x")
