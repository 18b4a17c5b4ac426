"""Message-counter bookkeeping and the value types shared by every layer.

Each process keeps two per-peer counters for the current checkpoint interval:
how many application messages it sent to each peer and how many it received
from each peer.  Committing a checkpoint freezes those counters into the
checkpoint record and resets the working copies to zero, so counters are
always relative to the interval that started at the last commit.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum


class CounterError(ValueError):
    """Raised for malformed counter updates (self-messages, bad pids)."""


class MessageKind(IntEnum):
    """Wire tag of a message.  Tags 0 and 1 are reserved for checkpoint
    synchronisation traffic; application payload travels under tag 2."""

    CKPT_REQUEST = 0
    STATUS_INFO = 1
    COMPUTATION = 2


class _Broadcast:
    """Singleton destination for messages addressed to every peer."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "BROADCAST"


BROADCAST = _Broadcast()

# Wire encoding of the broadcast destination in traces.
WIRE_BROADCAST = -1


@dataclass(frozen=True)
class StatusVector:
    """Frozen view of one process's per-peer counters for one interval.

    ``sent_to[j]`` counts computation messages this process sent to ``j``
    in the current interval, ``recd_from[j]`` those it accepted from ``j``.
    The owner's own slots stay zero; a process never messages itself.
    """

    owner: int
    sent_to: tuple[int, ...]
    recd_from: tuple[int, ...]

    def __post_init__(self):
        n = len(self.sent_to)
        if len(self.recd_from) != n:
            raise CounterError("sent_to and recd_from must have equal length")
        if not 0 <= self.owner < n:
            raise CounterError(f"owner {self.owner} out of range for n={n}")
        if self.sent_to[self.owner] or self.recd_from[self.owner]:
            raise CounterError("own counter slots must stay zero")
        if any(c < 0 for c in self.sent_to) or any(c < 0 for c in self.recd_from):
            raise CounterError("counters must be non-negative")

    @classmethod
    def zero(cls, owner: int, n: int) -> "StatusVector":
        return cls(owner, (0,) * n, (0,) * n)

    @property
    def n(self) -> int:
        return len(self.sent_to)

    def sent_partners(self) -> list[int]:
        return [j for j, c in enumerate(self.sent_to) if c > 0]

    def recd_partners(self) -> list[int]:
        return [j for j, c in enumerate(self.recd_from) if c > 0]


def _check_peer(v: StatusVector, peer: int) -> None:
    if peer == v.owner:
        raise CounterError("process cannot message itself")
    if not 0 <= peer < v.n:
        raise CounterError(f"peer {peer} out of range for n={v.n}")


def record_send(v: StatusVector, dest: int) -> tuple[StatusVector, int]:
    """Count an outgoing computation message.  Returns the updated vector and
    the sequence number the message must carry (1-based within the interval)."""
    _check_peer(v, dest)
    sent = list(v.sent_to)
    sent[dest] += 1
    return StatusVector(v.owner, tuple(sent), v.recd_from), sent[dest]


def record_receive(v: StatusVector, sender: int) -> StatusVector:
    """Count an accepted incoming computation message."""
    _check_peer(v, sender)
    recd = list(v.recd_from)
    recd[sender] += 1
    return StatusVector(v.owner, v.sent_to, tuple(recd))


@dataclass(frozen=True)
class Message:
    """One protocol message.  ``dest`` is a peer pid or BROADCAST; broadcast
    is only legal for the two synchronisation kinds.  ``check_index`` stamps
    the sender's interval, ``seq_no`` orders computation messages per
    (sender, dest, interval).  ``recovery`` marks status traffic exchanged
    during a recovery episode rather than a checkpoint round."""

    kind: MessageKind
    sender: int
    dest: "int | _Broadcast"
    check_index: int
    seq_no: int = 0
    payload: object = None
    recovery: bool = False

    def __post_init__(self):
        if self.check_index < 0:
            raise CounterError("check_index must be non-negative")
        if self.dest is BROADCAST:
            if self.kind == MessageKind.COMPUTATION:
                raise CounterError("computation messages cannot be broadcast")
        elif self.dest == self.sender:
            raise CounterError("message addressed to its own sender")
        if self.kind == MessageKind.COMPUTATION and self.seq_no < 1:
            raise CounterError("computation messages need seq_no >= 1")

    @property
    def wire_dest(self) -> int:
        return WIRE_BROADCAST if self.dest is BROADCAST else self.dest


@dataclass(frozen=True)
class CheckpointRecord:
    """A committed checkpoint: opaque state snapshot plus the frozen counter
    vector of the interval that the commit closed."""

    owner: int
    index: int
    state_snapshot: bytes
    frozen_status: StatusVector

    def __post_init__(self):
        if self.index < 0:
            raise CounterError("checkpoint index must be non-negative")
        if self.frozen_status.owner != self.owner:
            raise CounterError("frozen status vector owned by someone else")
