"""Per-process checkpoint state machine.

A round works in three steps: the initiator broadcasts a checkpoint request
plus its own status vector; every process that sees the request broadcasts
its status vector; once a process holds all n-1 peer vectors it compares
each peer's sent-count against its own received-count.  If nothing is
outstanding it commits immediately, otherwise it keeps accepting the
reported in-flight messages until the deficit reaches zero and then commits.
Commits freeze the counter vector into the checkpoint record, advance the
interval index and reset the counters.

The very first checkpoint (index 0) is taken before any application
traffic, so it needs no status exchange: the initiator's request alone makes
everyone commit.  Application sends requested before a process holds
checkpoint 0, or while a round or recovery is in progress, are queued and
sent right after the next commit so no interval ever has half-counted
traffic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, NamedTuple
import hashlib

from .core import (
    BROADCAST,
    CheckpointRecord,
    Message,
    MessageKind,
    StatusVector,
    record_receive,
    record_send,
)
from . import trace as tr


class ProtocolError(RuntimeError):
    """A call that the protocol state forbids (wrong phase, bad peer)."""


class IntegrityError(ProtocolError):
    """Counter bookkeeping went inconsistent; indicates duplicated or forged
    traffic that the transport layer should have filtered."""


class Phase(Enum):
    RUNNING = "running"
    AWAITING_STATUS = "awaiting-status"
    RECONCILING = "reconciling"
    COMMITTED = "committed"
    RECOVERING = "recovering"


class Disposition(Enum):
    ACCEPT = "accept"
    DEFER = "defer"
    REJECT_DUPLICATE = "reject-dup"


class RecoveryStatus(NamedTuple):
    """Payload of a status broadcast sent during a recovery episode."""

    vector: StatusVector
    episode: int


def classify_incoming(current_index: int, next_seq: int, m: Message) -> Disposition:
    """Decide what to do with an incoming computation message.

    Messages from a later interval wait until this process catches up.
    Within the current interval the per-sender sequence number gives
    exactly-once delivery: the expected next number is accepted, anything
    below it is a duplicate, anything above it waits for the gap to fill
    (the network may reorder or duplicate frames).
    """
    if m.kind is not MessageKind.COMPUTATION:
        raise ProtocolError("classify_incoming only handles computation messages")
    if m.check_index > current_index:
        return Disposition.DEFER
    if m.check_index < current_index:
        return Disposition.REJECT_DUPLICATE
    if m.seq_no == next_seq:
        return Disposition.ACCEPT
    if m.seq_no < next_seq:
        return Disposition.REJECT_DUPLICATE
    return Disposition.DEFER


def compute_deficit(
    peer_status: Mapping[int, StatusVector], own: StatusVector
) -> dict[int, int]:
    """Per-peer count of messages reported sent to us but not yet accepted.

    A negative difference means we accepted more than the peer claims to
    have sent, which the duplicate filter makes impossible in honest runs.
    """
    deficit: dict[int, int] = {}
    for sender in sorted(peer_status):
        vec = peer_status[sender]
        if vec.owner != sender:
            raise IntegrityError(f"status vector for {sender} owned by {vec.owner}")
        missing = vec.sent_to[own.owner] - own.recd_from[sender]
        if missing < 0:
            raise IntegrityError(
                f"accepted {own.recd_from[sender]} from {sender}, "
                f"but peer reports only {vec.sent_to[own.owner]} sent"
            )
        if missing:
            deficit[sender] = missing
    return deficit


@dataclass
class ProtocolOutput:
    """What a machine call produced: messages to transmit and commits made."""

    messages: list[Message] = field(default_factory=list)
    commits: list[CheckpointRecord] = field(default_factory=list)


def _fold(state: bytes, tag: str) -> bytes:
    return hashlib.blake2b(state + tag.encode(), digest_size=8).digest()


class ProcessMachine:
    """Checkpoint protocol endpoint for one process.

    The machine is transport-agnostic: handlers return messages to send and
    never block.  ``sink`` receives (event, *fields) trace callbacks; the
    simulator binds it to the hosting node and clock.
    """

    def __init__(self, pid: int, n: int, sink: Callable | None = None):
        if n < 2:
            raise ProtocolError("need at least two processes")
        if not 0 <= pid < n:
            raise ProtocolError(f"pid {pid} out of range for n={n}")
        self.pid = pid
        self.n = n
        self.check_index = 0
        self.status = StatusVector.zero(pid, n)
        self.phase = Phase.RUNNING
        self.peer_status: dict[int, StatusVector] = {}
        self.deficit: dict[int, int] = {}
        self.stash: list[Message] = []
        self.queued_sends: list[tuple[int, str]] = []
        self.recovery_buffer: list[Message] = []
        self.recovery_vectors: dict[int, StatusVector] = {}
        self.recovery_episode = -1
        self.app_state = _fold(b"", f"init:{pid}")
        self.log: list[tuple] = []
        self._sink = sink if sink is not None else self._default_sink

    def _default_sink(self, event, *fields):
        self.log.append((event, fields))

    def _trace(self, event, *fields):
        self._sink(event, *fields)

    def _set_phase(self, phase: Phase):
        self._trace(
            tr.PHASE,
            ("pid", self.pid),
            ("from", self.phase.value),
            ("to", phase.value),
            ("ci", self.check_index),
        )
        self.phase = phase

    # ------------------------------------------------------------------
    # checkpoint rounds

    def begin_round(self, index: int) -> ProtocolOutput:
        """Initiator entry point.  Must match the current interval index and
        only runs from the computation phase."""
        if self.phase is not Phase.RUNNING:
            raise ProtocolError(
                f"P{self.pid} cannot initiate a round in phase {self.phase.value}"
            )
        if index != self.check_index:
            raise ProtocolError(
                f"P{self.pid} asked to initiate round {index} at index {self.check_index}"
            )
        out = ProtocolOutput()
        self._trace(tr.ROUND_START, ("pid", self.pid), ("ci", index))
        out.messages.append(
            Message(MessageKind.CKPT_REQUEST, self.pid, BROADCAST, index)
        )
        if index == 0:
            # Initialization checkpoint: no traffic yet, commit outright.
            self._commit(out)
        else:
            self._enter_awaiting(out)
        return out

    def _enter_awaiting(self, out: ProtocolOutput):
        self.peer_status = {}
        self.deficit = {}
        out.messages.append(
            Message(
                MessageKind.STATUS_INFO,
                self.pid,
                BROADCAST,
                self.check_index,
                payload=self.status,
            )
        )
        self._set_phase(Phase.AWAITING_STATUS)
        self._drain_stash(out)

    def handle_message(self, m: Message) -> ProtocolOutput:
        out = ProtocolOutput()
        self._dispatch(m, out)
        return out

    def _dispatch(self, m: Message, out: ProtocolOutput):
        if self.phase is Phase.RECOVERING and not m.recovery:
            # Normal traffic freezes while a failure is being resolved.
            self.recovery_buffer.append(m)
            self._trace(
                tr.REC_HOLD,
                ("pid", self.pid),
                ("tag", int(m.kind)),
                ("sender", m.sender),
                ("ci", m.check_index),
                ("seq", m.seq_no),
            )
            return
        if m.kind is MessageKind.CKPT_REQUEST:
            self._on_ckpt_request(m, out)
        elif m.kind is MessageKind.STATUS_INFO:
            if m.recovery:
                self._on_recovery_status(m)
            else:
                self._on_status_info(m, out)
        else:
            self._on_computation(m, out)

    def _on_ckpt_request(self, m: Message, out: ProtocolOutput):
        if m.check_index > self.check_index:
            if self.check_index == 0:
                # Never saw the initialization round; take checkpoint 0 on
                # first contact, then handle the newer request normally.
                self._commit(out)
                self._dispatch(m, out)
            else:
                self._stash_message(m)
            return
        if m.check_index < self.check_index or self.phase is not Phase.RUNNING:
            self._reject(m, "stale-or-dup")
            return
        if m.check_index == 0:
            self._commit(out)
        else:
            self._enter_awaiting(out)

    def _on_status_info(self, m: Message, out: ProtocolOutput):
        if m.check_index > self.check_index:
            self._stash_message(m)
            return
        if m.check_index < self.check_index:
            self._reject(m, "stale")
            return
        if self.phase is Phase.RUNNING:
            # Status can outrun the request that triggered it; wait for the
            # request before joining the round.
            self._stash_message(m)
            return
        if self.phase is Phase.RECONCILING:
            self._reject(m, "dup")
            return
        sender = m.sender
        if not 0 <= sender < self.n or sender == self.pid:
            raise ProtocolError(f"status from unknown process {sender}")
        vec = m.payload
        if not isinstance(vec, StatusVector):
            raise ProtocolError("status message without a status vector")
        self.peer_status[sender] = vec
        if len(self.peer_status) == self.n - 1:
            self.deficit = compute_deficit(self.peer_status, self.status)
            if self.deficit:
                self._trace(
                    tr.DEFICIT,
                    ("pid", self.pid),
                    ("ci", self.check_index),
                    ("pending", _render_deficit(self.deficit)),
                )
                self._set_phase(Phase.RECONCILING)
            else:
                self._commit(out)

    def _on_computation(self, m: Message, out: ProtocolOutput):
        next_seq = self.status.recd_from[m.sender] + 1
        disp = classify_incoming(self.check_index, next_seq, m)
        if disp is Disposition.ACCEPT:
            self._accept(m, out)
        elif disp is Disposition.DEFER:
            self._stash_message(m)
        else:
            self._reject(m, "dup")

    def _accept(self, m: Message, out: ProtocolOutput):
        self.status = record_receive(self.status, m.sender)
        self.app_state = _fold(self.app_state, f"r:{m.sender}:{m.check_index}:{m.seq_no}")
        self._trace(
            tr.ACCEPT,
            ("pid", self.pid),
            ("sender", m.sender),
            ("ci", m.check_index),
            ("seq", m.seq_no),
        )
        if self.phase is Phase.RECONCILING:
            left = self.deficit.get(m.sender, 0) - 1
            if left < 0:
                raise IntegrityError(
                    f"P{self.pid} accepted more than reported from {m.sender}"
                )
            if left:
                self.deficit[m.sender] = left
            else:
                self.deficit.pop(m.sender, None)
            if not self.deficit:
                self._commit(out)
                return
        self._drain_stash(out)

    def _reject(self, m: Message, why: str):
        self._trace(
            tr.REJECT_DUP,
            ("pid", self.pid),
            ("tag", int(m.kind)),
            ("sender", m.sender),
            ("ci", m.check_index),
            ("seq", m.seq_no),
            ("why", why),
        )

    def _stash_message(self, m: Message):
        key = (m.kind, m.sender, m.check_index, m.seq_no, m.recovery)
        for held in self.stash:
            if (held.kind, held.sender, held.check_index, held.seq_no, held.recovery) == key:
                self._reject(m, "dup-of-stashed")
                return
        self.stash.append(m)
        self._trace(
            tr.DEFER,
            ("pid", self.pid),
            ("tag", int(m.kind)),
            ("sender", m.sender),
            ("ci", m.check_index),
            ("seq", m.seq_no),
        )

    def _stash_ready(self, m: Message) -> bool:
        if m.kind is MessageKind.CKPT_REQUEST:
            if m.check_index <= self.check_index:
                return True
            return self.check_index == 0
        if m.kind is MessageKind.STATUS_INFO:
            if m.check_index < self.check_index:
                return True
            return m.check_index == self.check_index and self.phase in (
                Phase.AWAITING_STATUS,
                Phase.RECONCILING,
            )
        if m.check_index != self.check_index:
            return m.check_index < self.check_index
        next_seq = self.status.recd_from[m.sender] + 1
        return classify_incoming(self.check_index, next_seq, m) is not Disposition.DEFER

    def _drain_stash(self, out: ProtocolOutput):
        progressed = True
        while progressed:
            progressed = False
            for m in list(self.stash):
                if self.phase is Phase.RECOVERING:
                    return
                if self._stash_ready(m):
                    self.stash.remove(m)
                    self._trace(
                        tr.RELEASE,
                        ("pid", self.pid),
                        ("tag", int(m.kind)),
                        ("sender", m.sender),
                        ("ci", m.check_index),
                        ("seq", m.seq_no),
                    )
                    self._dispatch(m, out)
                    progressed = True
                    break

    def _commit(self, out: ProtocolOutput):
        if self.deficit:
            raise IntegrityError("commit with outstanding deficit")
        record = CheckpointRecord(
            owner=self.pid,
            index=self.check_index,
            state_snapshot=self.app_state,
            frozen_status=self.status,
        )
        self._set_phase(Phase.COMMITTED)
        self._trace(tr.COMMIT, ("pid", self.pid), ("ci", self.check_index))
        self.check_index += 1
        self.status = StatusVector.zero(self.pid, self.n)
        self.peer_status = {}
        self.deficit = {}
        self._set_phase(Phase.RUNNING)
        out.commits.append(record)
        self._drain_stash(out)
        self._flush_queued(out)

    # ------------------------------------------------------------------
    # application traffic

    def request_send(self, dest: int, payload: str = "") -> ProtocolOutput:
        """Send a computation message, or queue it if sends are paused
        (mid-round, mid-recovery, or before checkpoint 0 exists)."""
        if dest == self.pid or not 0 <= dest < self.n:
            raise ProtocolError(f"bad destination {dest}")
        out = ProtocolOutput()
        if self.phase is not Phase.RUNNING or self.check_index == 0:
            self.queued_sends.append((dest, payload))
            self._trace(tr.QUEUED_SEND, ("pid", self.pid), ("dest", dest))
            return out
        self._emit_send(dest, payload, out)
        return out

    def _emit_send(self, dest: int, payload: str, out: ProtocolOutput):
        self.status, seq = record_send(self.status, dest)
        self.app_state = _fold(self.app_state, f"s:{dest}:{self.check_index}:{seq}")
        out.messages.append(
            Message(
                MessageKind.COMPUTATION,
                self.pid,
                dest,
                self.check_index,
                seq,
                payload,
            )
        )
        self._trace(
            tr.APP_SEND,
            ("pid", self.pid),
            ("dest", dest),
            ("ci", self.check_index),
            ("seq", seq),
        )

    def _flush_queued(self, out: ProtocolOutput):
        if self.phase is not Phase.RUNNING or self.check_index == 0:
            return
        pending, self.queued_sends = self.queued_sends, []
        for dest, payload in pending:
            self._emit_send(dest, payload, out)

    # ------------------------------------------------------------------
    # recovery

    def enter_recovery(self, episode: int) -> ProtocolOutput:
        """Abort any round in progress, freeze normal traffic and broadcast
        this process's live counters for dependency analysis."""
        out = ProtocolOutput()
        self.peer_status = {}
        self.deficit = {}
        self.recovery_vectors = {}
        self.recovery_buffer = []
        self.recovery_episode = episode
        self._set_phase(Phase.RECOVERING)
        out.messages.append(
            Message(
                MessageKind.STATUS_INFO,
                self.pid,
                BROADCAST,
                self.check_index,
                payload=RecoveryStatus(self.status, episode),
                recovery=True,
            )
        )
        return out

    def _on_recovery_status(self, m: Message):
        if self.phase is not Phase.RECOVERING:
            self._reject(m, "no-episode")
            return
        payload = m.payload
        if not isinstance(payload, RecoveryStatus) or payload.episode != self.recovery_episode:
            self._reject(m, "wrong-episode")
            return
        self.recovery_vectors[m.sender] = payload.vector

    def has_recovery_vectors(self, senders) -> bool:
        return all(s in self.recovery_vectors for s in senders)

    def apply_rollback(self, record: CheckpointRecord):
        """Restore the last checkpoint: state snapshot back, counters zero,
        same interval index reopened for replay."""
        if record.owner != self.pid:
            raise ProtocolError("rollback with someone else's checkpoint")
        aborted = self.check_index
        self.app_state = record.state_snapshot
        self.check_index = record.index + 1
        self.status = StatusVector.zero(self.pid, self.n)
        self.peer_status = {}
        self.deficit = {}
        self._trace(
            tr.ROLLBACK,
            ("pid", self.pid),
            ("ci", aborted),
            ("restored", record.index),
        )

    def exit_recovery(self, flush_queued: bool = True) -> ProtocolOutput:
        """Leave recovery mode, re-inject traffic buffered meanwhile and
        optionally flush queued sends (the caller defers the flush when the
        process rolled back, so replays go out first)."""
        out = ProtocolOutput()
        self._set_phase(Phase.RUNNING)
        buffered, self.recovery_buffer = self.recovery_buffer, []
        for m in buffered:
            self._dispatch(m, out)
        self._drain_stash(out)
        if flush_queued:
            self._flush_queued(out)
        return out

    def drain_queued(self) -> list[tuple[int, str]]:
        pending, self.queued_sends = self.queued_sends, []
        return pending

    def restart_from(self, record: CheckpointRecord):
        """Cold restart after a crash: everything in memory is gone, the
        checkpoint is all that survives."""
        if record.owner != self.pid:
            raise ProtocolError("restart with someone else's checkpoint")
        self.app_state = record.state_snapshot
        self.check_index = record.index + 1
        self.status = StatusVector.zero(self.pid, self.n)
        self.peer_status = {}
        self.deficit = {}
        self.stash = []
        self.queued_sends = []
        self.recovery_buffer = []
        self.recovery_vectors = {}
        self.phase = Phase.RUNNING
        self._trace(
            tr.ROLLBACK,
            ("pid", self.pid),
            ("ci", record.index + 1),
            ("restored", record.index),
            ("restart", 1),
        )

    def purge_buffers(self, predicate) -> int:
        """Drop held messages matching ``predicate`` from the stash and the
        recovery buffer.  Returns how many were culled."""
        before = len(self.stash) + len(self.recovery_buffer)
        self.stash = [m for m in self.stash if not predicate(m)]
        self.recovery_buffer = [m for m in self.recovery_buffer if not predicate(m)]
        return before - len(self.stash) - len(self.recovery_buffer)


def _render_deficit(deficit: dict[int, int]) -> str:
    return "+".join(f"{k}:{v}" for k, v in sorted(deficit.items()))
