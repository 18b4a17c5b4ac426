"""Deterministic discrete-event simulation of the whole system.

Virtual time is an integer clock.  The event queue is a heap keyed by
(time, insertion sequence), all randomness comes from one seeded generator,
and every callback iterates containers in a fixed order, so a (scenario,
seed) pair always produces the same trace byte for byte.

The network layer gives at-least-once delivery: every frame is acked, and
an unacked frame is retransmitted on timeout up to the configured retry
budget.  Exactly-once semantics come from the per-sender sequence filter in
the protocol layer, not from the transport.

Failures are crash-stop.  A crash silences the node immediately; the
survivors learn about it after the detection latency, freeze application
traffic, exchange their live counter vectors, and every process connected
to the fault rolls back to its last checkpoint while the rest keep their
state.  Under TMR the dead node's processes are restarted on the promoted
main of the group it led; without groups the node itself restarts from its
own last checkpoint.
"""

from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass, field
from enum import Enum

from .core import BROADCAST, CheckpointRecord, Message, MessageKind
from .protocol import Phase, ProcessMachine, ProtocolOutput
from .recovery import (
    RecoveryVerdict,
    SrMatrix,
    build_sr_matrix,
    decide_verdicts,
    union_rollback_set,
)
from .scenario import Scenario, ScenarioFormatError, normalize, validate_scenario
from .tmr import (
    GroupDeadError,
    ReplicaStore,
    TmrGroup,
    TmrRole,
    UnrecoverableError,
    choose_takeover_group,
    handle_member_failure,
    locate_checkpoint,
    replication_targets,
)
from . import trace as tr


class SimError(RuntimeError):
    pass


class UnsupportedScenarioError(SimError):
    """Scenario asks for something outside the failure model, such as a
    second crash while the previous one is still being resolved."""


# Wire frame tags as they appear in traces.  Tags 0..2 mirror MessageKind.
TAG_ACK = 3
TAG_REPLICA = 4


class FrameKind(Enum):
    MSG = "msg"
    ACK = "ack"
    REPLICA = "replica"


@dataclass
class WireFrame:
    uid: int
    kind: FrameKind
    src_node: int
    dest_pid: int | None = None    # routed to the pid's current host
    dest_node: int | None = None   # or pinned to a node
    message: Message | None = None
    record: CheckpointRecord | None = None
    ack_uid: int = 0

    @property
    def tag(self) -> int:
        if self.kind is FrameKind.MSG:
            return int(self.message.kind)
        return TAG_ACK if self.kind is FrameKind.ACK else TAG_REPLICA


class EventKind(Enum):
    DELIVER = "deliver"
    TIMEOUT = "timeout"
    APP_SEND = "app-send"
    ROUND = "round"
    CRASH = "crash"
    NOTIFY = "notify"


@dataclass
class SimEvent:
    kind: EventKind
    frame: WireFrame | None = None
    uid: int = 0
    node: int = -1
    pid: int = -1
    dest: int = -1
    payload: str = ""
    tries: int = 0


@dataclass
class _Pending:
    frame: WireFrame
    retries_left: int
    attempt: int = 0


@dataclass
class _Episode:
    episode: int
    detected_at: int
    dead_node: int
    faulty: tuple[int, ...]
    survivors: tuple[int, ...]
    aborted: dict[int, int]
    start_uid: int
    adopt_gids: tuple[int, ...]
    plain: bool


@dataclass
class EpisodeSummary:
    """Everything the report and the oracles need about one recovery."""

    episode: int
    detected_at: int
    resolved_at: int
    dead_node: int
    faulty: tuple[int, ...]
    aborted: dict[int, int]
    sr: SrMatrix
    verdicts: dict[int, RecoveryVerdict]
    rollback: frozenset[int]
    purged: int
    takeovers: tuple[tuple[int, int], ...]


@dataclass
class RunResult:
    scenario: Scenario
    records: list[tr.TraceRecord]
    machines: dict[int, ProcessMachine]
    store: ReplicaStore
    groups: dict[int, TmrGroup]
    committed: dict[int, int]
    episodes: list[EpisodeSummary]
    promotions: list[tuple[int, int, int, str]]  # (time, gid, node, role)
    stalled: bool
    error: str | None
    events_processed: int
    final_time: int
    queue_snapshot: list[str]

    def trace_text(self) -> str:
        return tr.render_trace(self.records)


class Simulator:
    def __init__(self, scenario: Scenario):
        errs = validate_scenario(scenario)
        if errs:
            raise ScenarioFormatError([(0, e) for e in errs])
        self.sc = normalize(scenario)
        self.n = self.sc.n
        self.rng = random.Random(self.sc.net.rng_seed)
        self.log = tr.TraceLog()
        self.now = 0
        self._heap: list[tuple[int, int, SimEvent]] = []
        self._seq = itertools.count()
        self._uid = itertools.count(1)
        self.host_of = {pid: self.sc.nodes[pid] for pid in range(self.n)}
        self.alive: set[int] = set(self.sc.nodes)
        self.machines = {
            pid: ProcessMachine(pid, self.n, sink=self._sink_for(pid))
            for pid in range(self.n)
        }
        self.groups: dict[int, TmrGroup] = {}
        for gid, m, p, s in self.sc.groups:
            self.groups[gid] = TmrGroup(gid, m, p, s)
        self.dead_groups: set[int] = set()
        self.store = ReplicaStore()
        self.pending: dict[int, _Pending] = {}
        self.round_counter = 0
        self.episode_counter = 0
        self.active_episode: _Episode | None = None
        self.pending_notify: set[int] = set()
        self.executed_sends: dict[int, list[tuple[int, str, int]]] = {
            pid: [] for pid in range(self.n)
        }
        self.crashed_status: dict[int, object] = {}
        self.crashed_interval: dict[int, int] = {}
        self.crashed_queue: dict[int, list[tuple[int, str]]] = {}
        self.downtime_sends: dict[int, list[tuple[int, str]]] = {
            pid: [] for pid in range(self.n)
        }
        self.committed: dict[int, int] = {}
        self.episodes: list[EpisodeSummary] = []
        self.promotions: list[tuple[int, int, int, str]] = []
        self.stalled = False
        self.error: str | None = None
        self.events_processed = 0

        self.schedule(0, SimEvent(EventKind.ROUND))
        for act in self.sc.script:
            if act.kind == "send":
                self.schedule(act.at, SimEvent(EventKind.APP_SEND, pid=act.pid, dest=act.dest))
            elif act.kind == "round":
                self.schedule(act.at, SimEvent(EventKind.ROUND))
            else:
                self.schedule(act.at, SimEvent(EventKind.CRASH, node=act.node))

    # ------------------------------------------------------------------
    # plumbing

    def _sink_for(self, pid: int):
        def sink(event, *fields):
            self.log.emit(event, self.host_of[pid], *fields)
        return sink

    def schedule(self, when: int, event: SimEvent):
        if when < self.now:
            raise SimError(f"cannot schedule at {when}, clock is at {self.now}")
        heapq.heappush(self._heap, (when, next(self._seq), event))

    def _delay(self) -> int:
        net = self.sc.net
        if net.delay_min == net.delay_max:
            return net.delay_min
        return self.rng.randint(net.delay_min, net.delay_max)

    # ------------------------------------------------------------------
    # transmission

    def _transmit(self, sender_pid: int, m: Message):
        src = self.host_of[sender_pid]
        if m.kind is MessageKind.COMPUTATION:
            self.executed_sends[sender_pid].append((m.dest, m.payload, m.check_index))
        if m.dest is BROADCAST:
            if m.recovery:
                dests = [
                    p
                    for p in range(self.n)
                    if p != sender_pid and self.host_of[p] in self.alive
                ]
            else:
                dests = [p for p in range(self.n) if p != sender_pid]
            for d in dests:
                self._send_frame(
                    WireFrame(
                        next(self._uid), FrameKind.MSG, src, dest_pid=d, message=m
                    )
                )
        else:
            self._send_frame(
                WireFrame(
                    next(self._uid), FrameKind.MSG, src, dest_pid=m.dest, message=m
                )
            )

    def _send_frame(self, frame: WireFrame, reliable: bool | None = None):
        if reliable is None:
            reliable = frame.kind is not FrameKind.ACK
        if reliable:
            self.pending[frame.uid] = _Pending(frame, self.sc.net.retry_limit)
        self._attempt(frame, 0)

    def _wire_fields(self, frame: WireFrame, attempt: int):
        fields = [("uid", frame.uid), ("tag", frame.tag)]
        if frame.kind is FrameKind.MSG:
            m = frame.message
            fields += [
                ("from", m.sender),
                ("to", frame.dest_pid),
                ("ci", m.check_index),
                ("seq", m.seq_no),
            ]
            if m.recovery:
                fields.append(("rec", 1))
        elif frame.kind is FrameKind.REPLICA:
            fields += [
                ("owner", frame.record.owner),
                ("ci", frame.record.index),
                ("to", frame.dest_node),
            ]
        else:
            fields += [("ack", frame.ack_uid), ("to", frame.dest_node)]
        if attempt:
            fields.append(("retry", attempt))
        return fields

    def _attempt(self, frame: WireFrame, attempt: int):
        self.log.emit(tr.WIRE_SEND, frame.src_node, *self._wire_fields(frame, attempt))
        net = self.sc.net
        if net.drop_rate and self.rng.random() < net.drop_rate:
            self.log.emit(tr.DROP, frame.src_node, ("uid", frame.uid))
        else:
            self.schedule(
                self.now + self._delay(), SimEvent(EventKind.DELIVER, frame=frame)
            )
            if net.duplicate_rate and self.rng.random() < net.duplicate_rate:
                self.log.emit(tr.DUP, frame.src_node, ("uid", frame.uid))
                self.schedule(
                    self.now + self._delay(), SimEvent(EventKind.DELIVER, frame=frame)
                )
        if frame.uid in self.pending:
            self.schedule(
                self.now + net.ack_timeout, SimEvent(EventKind.TIMEOUT, uid=frame.uid)
            )

    def _process_output(self, pid: int, out: ProtocolOutput):
        for m in out.messages:
            self._transmit(pid, m)
        for record in out.commits:
            self._on_commit(pid, record)

    # ------------------------------------------------------------------
    # main loop

    def run(self) -> RunResult:
        budget = self.sc.step_budget
        while self._heap:
            if self.events_processed >= budget:
                self.stalled = True
                self.log.emit(tr.STALL, -1, ("events", self.events_processed))
                break
            when, _, event = heapq.heappop(self._heap)
            self.now = when
            self.log.clock = when
            try:
                self._handle(event)
            except UnrecoverableError as exc:
                self.error = str(exc)
                break
            self.events_processed += 1
        snapshot = [
            f"t={t} {ev.kind.value}" for t, _, ev in sorted(self._heap)[:10]
        ]
        return RunResult(
            scenario=self.sc,
            records=self.log.records,
            machines=self.machines,
            store=self.store,
            groups=dict(self.groups),
            committed=dict(self.committed),
            episodes=self.episodes,
            promotions=self.promotions,
            stalled=self.stalled,
            error=self.error,
            events_processed=self.events_processed,
            final_time=self.now,
            queue_snapshot=snapshot,
        )

    def _handle(self, ev: SimEvent):
        if ev.kind is EventKind.DELIVER:
            self._on_deliver(ev.frame)
        elif ev.kind is EventKind.TIMEOUT:
            self._on_timeout(ev.uid)
        elif ev.kind is EventKind.APP_SEND:
            self._on_app_send(ev.pid, ev.dest, ev.payload)
        elif ev.kind is EventKind.ROUND:
            self._on_round(ev)
        elif ev.kind is EventKind.CRASH:
            self._on_crash(ev.node)
        else:
            self._on_notify(ev.node)

    # ------------------------------------------------------------------
    # deliveries

    def _on_deliver(self, frame: WireFrame):
        dest_node = (
            frame.dest_node if frame.dest_node is not None else self.host_of[frame.dest_pid]
        )
        if dest_node not in self.alive:
            self.log.emit(tr.DEAD_DROP, dest_node, ("uid", frame.uid))
            return
        self.log.emit(tr.DELIVER, dest_node, ("uid", frame.uid), ("tag", frame.tag))
        if frame.kind is FrameKind.ACK:
            if self.pending.pop(frame.ack_uid, None) is not None:
                self.log.emit(tr.ACK_RECV, dest_node, ("ack", frame.ack_uid))
            return
        self._ack_back(frame, dest_node)
        if frame.kind is FrameKind.REPLICA:
            if self.store.put(dest_node, frame.record):
                self.log.emit(
                    tr.REPLICA_STORED,
                    dest_node,
                    ("owner", frame.record.owner),
                    ("ci", frame.record.index),
                )
            return
        machine = self.machines[frame.dest_pid]
        out = machine.handle_message(frame.message)
        self._process_output(frame.dest_pid, out)
        if frame.message.recovery and self.active_episode is not None:
            self._check_episode_done()

    def _ack_back(self, frame: WireFrame, from_node: int):
        self._send_frame(
            WireFrame(
                next(self._uid),
                FrameKind.ACK,
                from_node,
                dest_node=frame.src_node,
                ack_uid=frame.uid,
            ),
            reliable=False,
        )

    def _on_timeout(self, uid: int):
        entry = self.pending.get(uid)
        if entry is None:
            return
        if entry.frame.src_node not in self.alive:
            del self.pending[uid]
            return
        if entry.retries_left <= 0:
            del self.pending[uid]
            self.log.emit(tr.GIVE_UP, entry.frame.src_node, ("uid", uid))
            return
        entry.retries_left -= 1
        entry.attempt += 1
        self.log.emit(
            tr.TIMEOUT_RETX,
            entry.frame.src_node,
            ("uid", uid),
            ("left", entry.retries_left),
        )
        self._attempt(entry.frame, entry.attempt)

    # ------------------------------------------------------------------
    # scripted events

    def _on_app_send(self, pid: int, dest: int, payload: str):
        if self.host_of[pid] not in self.alive:
            self.downtime_sends[pid].append((dest, payload))
            return
        out = self.machines[pid].request_send(dest, payload)
        self._process_output(pid, out)

    def _initiator_pid(self) -> int:
        if self.sc.initiator_policy == "tmr-mains" and self.groups:
            mains = [self.groups[g].main for g in sorted(self.groups)]
            node = mains[self.round_counter % len(mains)]
            hosted = sorted(p for p in range(self.n) if self.host_of[p] == node)
            if hosted:
                return hosted[0]
        return self.round_counter % self.n

    def _on_round(self, ev: SimEvent):
        pid = self._initiator_pid()
        machine = self.machines[pid]
        busy = (
            self.active_episode is not None
            or self.pending_notify
            or self.host_of[pid] not in self.alive
            or machine.phase is not Phase.RUNNING
        )
        if busy:
            if ev.tries >= 400:
                self.log.emit(tr.GIVE_UP, -1, ("round", self.round_counter))
                return
            self.log.emit(tr.ROUND_DEFER, -1, ("initiator", pid), ("tries", ev.tries))
            ev.tries += 1
            self.schedule(self.now + 5, ev)
            return
        self.round_counter += 1
        out = machine.begin_round(machine.check_index)
        self._process_output(pid, out)

    # ------------------------------------------------------------------
    # failure handling

    def _on_crash(self, node: int):
        if node not in self.alive:
            raise SimError(f"node {node} is already dead")
        if self.active_episode is not None or self.pending_notify:
            raise UnsupportedScenarioError(
                "crash while an earlier failure is still being resolved"
            )
        self.alive.discard(node)
        self.pending_notify.add(node)
        hosted = sorted(p for p in range(self.n) if self.host_of[p] == node)
        self.log.emit(tr.CRASH, node, ("pids", _pidlist(hosted)))
        for pid in hosted:
            machine = self.machines[pid]
            self.crashed_status[pid] = machine.status
            self.crashed_interval[pid] = machine.check_index
            self.crashed_queue[pid] = list(machine.queued_sends)
        for uid in sorted(self.pending):
            if self.pending[uid].frame.src_node == node:
                del self.pending[uid]
        self.schedule(
            self.now + self.sc.detection_latency, SimEvent(EventKind.NOTIFY, node=node)
        )

    def _on_notify(self, node: int):
        self.pending_notify.discard(node)
        faulty = tuple(sorted(p for p in range(self.n) if self.host_of[p] == node))
        survivors = tuple(
            sorted(p for p in range(self.n) if self.host_of[p] in self.alive)
        )
        self.episode_counter += 1
        self.log.emit(
            tr.NOTIFY,
            node,
            ("episode", self.episode_counter),
            ("faulty", _pidlist(faulty)),
        )
        adopt_order = self._adoption_order(node)
        self._apply_group_failures(node)
        aborted = {pid: self.machines[pid].check_index for pid in survivors}
        for pid in faulty:
            aborted[pid] = self.crashed_interval[pid]
        self.active_episode = _Episode(
            episode=self.episode_counter,
            detected_at=self.now,
            dead_node=node,
            faulty=faulty,
            survivors=survivors,
            aborted=aborted,
            start_uid=next(self._uid),
            adopt_gids=adopt_order,
            plain=not adopt_order and not self._node_grouped(node),
        )
        self.log.emit(
            tr.REC_BEGIN, -1, ("episode", self.episode_counter), ("faulty", _pidlist(faulty))
        )
        for pid in survivors:
            out = self.machines[pid].enter_recovery(self.episode_counter)
            self._process_output(pid, out)
        self._check_episode_done()

    def _node_grouped(self, node: int) -> bool:
        grouped = set()
        for gid, m, p, s in self.sc.groups:
            grouped.update((m, p, s))
        return node in grouped

    def _adoption_order(self, node: int) -> tuple[int, ...]:
        """Groups that could adopt the node's processes, most senior role
        first.  Computed against the chains as they stand at detection."""
        ranked = []
        order = {TmrRole.MAIN: 0, TmrRole.PRIMARY: 1, TmrRole.SECONDARY: 2}
        for gid in sorted(self.groups):
            role = self.groups[gid].role_of(node)
            if role is not None:
                ranked.append((order[role], gid))
        return tuple(gid for _, gid in sorted(ranked))

    def _apply_group_failures(self, node: int):
        for gid in sorted(self.groups):
            group = self.groups[gid]
            if group.role_of(node) is None:
                continue
            try:
                new_group, promos = handle_member_failure(group, node)
            except GroupDeadError:
                del self.groups[gid]
                self.dead_groups.add(gid)
                self.log.emit(tr.GROUP_MODE, -1, ("gid", gid), ("mode", "dead"))
                continue
            self.groups[gid] = new_group
            for member, role in promos:
                self.promotions.append((self.now, gid, member, role.value))
                self.log.emit(
                    tr.PROMOTE, member, ("gid", gid), ("role", role.value)
                )
            self.log.emit(
                tr.GROUP_MODE, -1, ("gid", gid), ("mode", new_group.mode)
            )

    def _check_episode_done(self):
        ep = self.active_episode
        if ep is None:
            return
        for pid in ep.survivors:
            need = [s for s in ep.survivors if s != pid]
            if not self.machines[pid].has_recovery_vectors(need):
                return
        self._resolve_episode()

    def _resolve_episode(self):
        ep = self.active_episode
        vectors = {pid: self.machines[pid].status for pid in ep.survivors}
        for pid in ep.faulty:
            vectors[pid] = self.crashed_status[pid]
        sr = build_sr_matrix(vectors)
        verdicts = decide_verdicts(sr, ep.faulty)
        rollback = union_rollback_set(sr, ep.faulty)
        for pid in sorted(verdicts):
            v = verdicts[pid]
            self.log.emit(
                tr.VERDICT,
                self.host_of[pid],
                ("pid", pid),
                ("rollback", int(v.must_rollback)),
                ("reason", v.reason.value),
                ("path", _pidlist(v.path)),
                ("faulty", v.faulty),
            )
        replay: dict[int, list[tuple[int, str]]] = {}
        for pid in sorted(rollback):
            if pid in ep.faulty:
                continue
            self._rollback_survivor(pid, ep, replay)
        takeovers = []
        for pid in ep.faulty:
            host = self._restart_faulty(pid, ep, replay)
            takeovers.append((pid, host))
        self._restore_redundancy(ep)
        purged = self._purge(ep, rollback)
        for pid in ep.survivors:
            out = self.machines[pid].exit_recovery(flush_queued=pid not in rollback)
            self._process_output(pid, out)
            if pid in rollback:
                replay[pid].extend(self.machines[pid].drain_queued())
        when = self.now + 1
        for pid in sorted(replay):
            for dest, payload in replay[pid]:
                self.log.emit(
                    tr.REPLAY, self.host_of[pid], ("pid", pid), ("dest", dest), ("at", when)
                )
                self.schedule(
                    when, SimEvent(EventKind.APP_SEND, pid=pid, dest=dest, payload=payload)
                )
                when += 1
        self.episodes.append(
            EpisodeSummary(
                episode=ep.episode,
                detected_at=ep.detected_at,
                resolved_at=self.now,
                dead_node=ep.dead_node,
                faulty=ep.faulty,
                aborted=dict(ep.aborted),
                sr=sr,
                verdicts=verdicts,
                rollback=rollback,
                purged=purged,
                takeovers=tuple(takeovers),
            )
        )
        self.active_episode = None
        self.log.emit(
            tr.REC_END,
            -1,
            ("episode", ep.episode),
            ("rollback", _pidlist(sorted(rollback))),
        )

    def _rollback_survivor(self, pid: int, ep: _Episode, replay: dict):
        host = self.host_of[pid]
        holder, record = locate_checkpoint(pid, self.store, self.alive, prefer=host)
        if holder != host:
            self.log.emit(
                tr.CKPT_FETCH, host, ("owner", pid), ("holder", holder), ("ci", record.index)
            )
        machine = self.machines[pid]
        machine.apply_rollback(record)
        entries = [
            (dest, payload)
            for dest, payload, interval in self.executed_sends[pid]
            if interval == ep.aborted[pid]
        ]
        self.executed_sends[pid] = []
        replay[pid] = entries

    def _restart_faulty(self, pid: int, ep: _Episode, replay: dict) -> int:
        if ep.plain:
            host = ep.dead_node
            self.alive.add(host)
        else:
            host = None
            for gid in ep.adopt_gids:
                if gid in self.groups:
                    host = self.groups[gid].main
                    break
            if host is None:
                # Every group the node belonged to is gone; fall back to any
                # live holder of the checkpoint.
                holders = [
                    h for h in self.store.holders(pid) if h in self.alive
                ]
                if not holders:
                    raise UnrecoverableError(
                        f"no live copy of process {pid}'s checkpoint"
                    )
                host = holders[0]
        holder, record = locate_checkpoint(pid, self.store, self.alive, prefer=host)
        if holder != host:
            self.log.emit(
                tr.CKPT_FETCH, host, ("owner", pid), ("holder", holder), ("ci", record.index)
            )
            self.store.put(host, record)
        self.host_of[pid] = host
        machine = self.machines[pid]
        machine.restart_from(record)
        if not ep.plain:
            self.log.emit(
                tr.TAKEOVER, host, ("pid", pid), ("dead", ep.dead_node), ("host", host)
            )
        entries = [
            (dest, payload)
            for dest, payload, interval in self.executed_sends[pid]
            if interval == ep.aborted[pid]
        ]
        self.executed_sends[pid] = []
        entries.extend(self.crashed_queue.get(pid, ()))
        entries.extend(self.downtime_sends[pid])
        self.downtime_sends[pid] = []
        replay[pid] = entries
        return host

    def _restore_redundancy(self, ep: _Episode):
        """Re-establish the placement the degraded chains promise.

        The original placement keeps every checkpoint on the group's main
        and primary only, so losing one of those leaves a single live copy
        and a pure secondary holds nothing at the moment it is promoted.
        After the takeover each live member of an affected group re-ships
        the latest checkpoint of every process it hosts: self-hold where
        the new role calls for it, plus the current replication targets.
        Copies the target already has are not resent.
        """
        gids = sorted(g for g in set(ep.adopt_gids) if g in self.groups)
        for gid in gids:
            group = self.groups[gid]
            for member in sorted(group.alive_members()):
                for pid in sorted(
                    p for p in range(self.n) if self.host_of[p] == member
                ):
                    self._replace_copies(pid)

    def _replace_copies(self, pid: int):
        node = self.host_of[pid]
        holder, record = locate_checkpoint(pid, self.store, self.alive, prefer=node)
        roles = self._roles_of_node(node)
        fresh_here = (
            self.store.get(node, pid) is not None
            and self.store.get(node, pid).index >= record.index
        )
        if any(r in (TmrRole.MAIN, TmrRole.PRIMARY) for r in roles) and not fresh_here:
            if holder != node:
                self.log.emit(
                    tr.CKPT_FETCH,
                    node,
                    ("owner", pid),
                    ("holder", holder),
                    ("ci", record.index),
                )
            self.store.put(node, record)
        targets: set[int] = set()
        for gid in sorted(self.groups):
            group = self.groups[gid]
            if group.role_of(node) is not None:
                targets.update(replication_targets(group, node))
        for target in sorted(targets):
            if target == node or target not in self.alive:
                continue
            held = self.store.get(target, pid)
            if held is None or held.index < record.index:
                self._replicate(node, target, record)

    def _purge(self, ep: _Episode, rollback: frozenset[int]) -> int:
        def doomed(m: Message) -> bool:
            if m.recovery:
                return False
            if m.kind is not MessageKind.COMPUTATION:
                return True  # sync traffic of aborted rounds is void
            if m.sender in rollback and m.check_index == ep.aborted.get(m.sender):
                return True
            dest = m.dest if isinstance(m.dest, int) else None
            return dest in rollback and m.check_index == ep.aborted.get(dest)

        def frame_doomed(frame: WireFrame) -> bool:
            return (
                frame.kind is FrameKind.MSG
                and frame.uid < ep.start_uid
                and doomed(frame.message)
            )

        count = 0
        kept = []
        for entry in self._heap:
            ev = entry[2]
            if ev.kind is EventKind.DELIVER and frame_doomed(ev.frame):
                count += 1
            else:
                kept.append(entry)
        if count:
            self._heap = kept
            heapq.heapify(self._heap)
        for uid in sorted(self.pending):
            if frame_doomed(self.pending[uid].frame):
                del self.pending[uid]
        for pid in sorted(self.machines):
            count += self.machines[pid].purge_buffers(
                lambda m: m.check_index >= 0 and doomed(m)
            )
        self.log.emit(tr.PURGE, -1, ("count", count))
        return count

    def _replicate(self, src_node: int, dest_node: int, record: CheckpointRecord):
        self.log.emit(
            tr.REPLICATE,
            src_node,
            ("owner", record.owner),
            ("ci", record.index),
            ("to", dest_node),
        )
        self._send_frame(
            WireFrame(
                next(self._uid),
                FrameKind.REPLICA,
                src_node,
                dest_node=dest_node,
                record=record,
            )
        )

    # ------------------------------------------------------------------
    # commits and replication

    def _roles_of_node(self, node: int) -> list[TmrRole]:
        return [
            g.role_of(node)
            for g in (self.groups[gid] for gid in sorted(self.groups))
            if g.role_of(node) is not None
        ]

    def _on_commit(self, pid: int, record: CheckpointRecord):
        self.committed[pid] = record.index
        self.executed_sends[pid] = [
            e for e in self.executed_sends[pid] if e[2] > record.index
        ]
        node = self.host_of[pid]
        roles = self._roles_of_node(node)
        if not roles or any(r in (TmrRole.MAIN, TmrRole.PRIMARY) for r in roles):
            self.store.put(node, record)
        targets: set[int] = set()
        for gid in sorted(self.groups):
            group = self.groups[gid]
            if group.role_of(node) is not None:
                targets.update(replication_targets(group, node))
        for target in sorted(targets):
            if target != node:
                self._replicate(node, target, record)


def _pidlist(pids) -> str:
    return "-".join(str(p) for p in pids) if pids else "none"
