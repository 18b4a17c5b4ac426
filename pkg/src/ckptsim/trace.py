"""Flat, append-only event trace.

Every run emits a list of TraceRecords.  The oracle layer consumes records
directly; the text rendering exists for files and diffing, and parses back
losslessly so byte-identical text means identical traces.

Record order is the authoritative happens-before order of the run: the
simulator appends records in execution order, so "record A appears before
record B" is how the oracles decide before/after, not the (coarser) time
field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

# Event names.  Kept as module constants so the protocol, simulator and
# oracle layers agree on spelling.
WIRE_SEND = "wire-send"        # frame handed to the network
DELIVER = "deliver"            # frame arrived at a live node
DROP = "drop"                  # frame lost in transit
DUP = "dup"                    # duplicate delivery scheduled
DEAD_DROP = "dead-drop"        # frame arrived at a dead node
ACCEPT = "accept"              # computation message counted by receiver
DEFER = "defer"                # message stashed for a later state
REJECT_DUP = "reject-dup"      # duplicate or stale message discarded
REC_HOLD = "rec-hold"          # message buffered during a recovery episode
RELEASE = "release"            # stashed message re-injected
PHASE = "phase"                # protocol phase transition
ROUND_START = "round-start"    # initiator opened a checkpoint round
ROUND_DEFER = "round-defer"    # initiation postponed, initiator busy or dead
COMMIT = "commit"              # checkpoint committed
DEFICIT = "deficit"            # reconciliation started with pending messages
APP_SEND = "app-send"          # scripted computation send executed
QUEUED_SEND = "queued-send"    # scripted send queued until next commit
ACK_RECV = "ack-recv"          # sender saw the ack, retransmit cancelled
TIMEOUT_RETX = "retransmit"    # ack timeout, frame sent again
GIVE_UP = "give-up"            # retry budget exhausted
REPLICATE = "replicate"        # checkpoint copy handed to the network
REPLICA_STORED = "replica-stored"  # checkpoint copy persisted at a holder
CRASH = "crash"                # node failed
NOTIFY = "notify-failure"      # failure detected by the survivors
PROMOTE = "promote"            # TMR role change
GROUP_MODE = "group-mode"      # TMR group degraded (tmr/dmr/lone)
TAKEOVER = "takeover"          # failed node's process re-hosted
CKPT_FETCH = "ckpt-fetch"      # checkpoint pulled from a remote holder
VERDICT = "verdict"            # recovery decision for one process
ROLLBACK = "rollback"          # process restored to its last checkpoint
PURGE = "purge"                # in-flight messages of aborted interval culled
REPLAY = "replay"              # post-rollback resend scheduled
REC_BEGIN = "recovery-begin"
REC_END = "recovery-end"
STALL = "stall"                # step budget exhausted


@dataclass(frozen=True)
class TraceRecord:
    """A single trace line: time, event name, node it happened on (-1 for
    simulator-level events) and an ordered tuple of key/value fields."""

    time: int
    event: str
    node: int
    fields: tuple[tuple[str, int | str], ...] = ()

    def get(self, key: str, default=None):
        for k, v in self.fields:
            if k == key:
                return v
        return default

    def render(self) -> str:
        parts = [f"t={self.time}", f"ev={self.event}", f"node={self.node}"]
        parts += [f"{k}={v}" for k, v in self.fields]
        return " ".join(parts)


def _coerce(tok: str) -> int | str:
    try:
        return int(tok)
    except ValueError:
        return tok


def parse_record(line: str) -> TraceRecord:
    pairs = []
    for item in line.split():
        key, _, val = item.partition("=")
        pairs.append((key, _coerce(val)))
    head = dict(pairs[:3])
    return TraceRecord(head["t"], str(head["ev"]), head["node"], tuple(pairs[3:]))


def render_trace(records: list[TraceRecord]) -> str:
    return "".join(r.render() + "\n" for r in records)


def parse_trace(text: str) -> list[TraceRecord]:
    return [parse_record(ln) for ln in text.splitlines() if ln.strip()]


class TraceLog:
    """Mutable trace under construction.  The simulator owns one and hands
    bound emit callbacks to the process machines."""

    def __init__(self):
        self.records: list[TraceRecord] = []
        self.clock = 0

    def emit(self, event: str, node: int, *fields: tuple[str, int | str]):
        self.records.append(TraceRecord(self.clock, event, node, tuple(fields)))

    def render(self) -> str:
        return render_trace(self.records)
