"""Independent trace-level checks.

These functions reconstruct what happened purely from the flat trace, on
purpose without reusing the protocol or recovery data structures, so they
can catch bookkeeping bugs in the engine:

* ``check_global_checkpoint`` tests the textbook consistency definition on
  a committed interval: no message received before the receiver's
  checkpoint but sent after the sender's (orphan), and no message sent
  before the sender's checkpoint whose receipt is missing from the
  receiver's (lost).  Before/after is trace record order, which is the
  simulator's deterministic happens-before order.
* ``brute_force_rollback`` recomputes the set of processes that must roll
  back for a failure straight from the per-interval send/accept records,
  for comparison against the engine's partner-matrix analysis.
* ``count_sync_messages`` counts unique synchronisation messages per
  round for the overhead growth checks.

Rollback records erase the aborted interval's sends and accepts of the
rolled-back process, mirroring the counter reset, so later intervals are
judged against the replayed history exactly like a live peer would see it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from . import trace as tr


class IncompleteRoundError(ValueError):
    """Asked to check an interval that some process never committed."""


# message identity: (sender, receiver, interval, seq)
MsgKey = tuple[int, int, int, int]


@dataclass
class _Events:
    sends: dict[MsgKey, int]
    accepts: dict[MsgKey, int]
    commits: dict[tuple[int, int], int]
    n: int


def _faulty_pids(rec: tr.TraceRecord) -> list[int]:
    raw = str(rec.get("faulty", "none"))
    if raw == "none":
        return []
    return [int(x) for x in raw.split("-")]


def _extract(records: list[tr.TraceRecord], stop: int | None = None) -> _Events:
    sends: dict[MsgKey, int] = {}
    accepts: dict[MsgKey, int] = {}
    commits: dict[tuple[int, int], int] = {}
    upto = len(records) if stop is None else stop
    for i in range(upto):
        rec = records[i]
        if rec.event == tr.WIRE_SEND:
            if rec.get("tag") != 2 or rec.get("retry") is not None:
                continue
            key = (rec.get("from"), rec.get("to"), rec.get("ci"), rec.get("seq"))
            sends[key] = i
        elif rec.event == tr.ACCEPT:
            if rec.get("rec") is not None:
                continue
            key = (rec.get("sender"), rec.get("pid"), rec.get("ci"), rec.get("seq"))
            accepts[key] = i
        elif rec.event == tr.COMMIT:
            commits[(rec.get("pid"), rec.get("ci"))] = i
        elif rec.event == tr.ROLLBACK:
            pid = rec.get("pid")
            aborted = rec.get("ci")
            for key in [k for k in sends if k[0] == pid and k[2] == aborted]:
                del sends[key]
            for key in [k for k in accepts if k[1] == pid and k[2] == aborted]:
                del accepts[key]
    n = 1 + max((pid for pid, _ in commits), default=-1)
    return _Events(sends, accepts, commits, n)


@dataclass
class ConsistencyReport:
    """Verdict for one committed global checkpoint."""

    interval: int
    orphans: list[MsgKey]
    missing: list[MsgKey]
    checked_messages: int

    @property
    def consistent(self) -> bool:
        return not self.orphans and not self.missing


def check_global_checkpoint(
    records: list[tr.TraceRecord], interval: int
) -> ConsistencyReport:
    """Judge the checkpoint set of ``interval`` against the effective trace."""
    ev = _extract(records)
    if ev.n == 0:
        raise IncompleteRoundError("trace has no commits at all")
    cut: dict[int, int] = {}
    for pid in range(ev.n):
        pos = ev.commits.get((pid, interval))
        if pos is None:
            raise IncompleteRoundError(
                f"process {pid} never committed checkpoint {interval}"
            )
        cut[pid] = pos
    orphans: list[MsgKey] = []
    missing: list[MsgKey] = []
    for key, i_send in sorted(ev.sends.items(), key=lambda kv: kv[1]):
        sender, receiver, _, _ = key
        if sender >= ev.n or receiver >= ev.n:
            continue
        i_acc = ev.accepts.get(key)
        if i_send > cut[sender]:
            if i_acc is not None and i_acc < cut[receiver]:
                orphans.append(key)
        else:
            if i_acc is None or i_acc > cut[receiver]:
                missing.append(key)
    return ConsistencyReport(interval, orphans, missing, len(ev.sends))


def full_intervals(records: list[tr.TraceRecord]) -> list[int]:
    """Intervals that every process committed, in order."""
    ev = _extract(records)
    if ev.n == 0:
        return []
    by_interval: dict[int, set[int]] = {}
    for pid, ci in ev.commits:
        by_interval.setdefault(ci, set()).add(pid)
    return sorted(ci for ci, pids in by_interval.items() if len(pids) == ev.n)


def brute_force_rollback(records: list[tr.TraceRecord], faulty: int) -> frozenset[int]:
    """Who must roll back with the faulty process, recomputed from raw
    per-interval traffic at the moment the failure was detected."""
    begin = None
    for i, rec in enumerate(records):
        if rec.event == tr.REC_BEGIN and faulty in _faulty_pids(rec):
            begin = i
            break
    if begin is None:
        raise ValueError(f"no recovery episode for process {faulty} in trace")
    ev = _extract(records, stop=begin)
    current: dict[int, int] = {}
    for pid in range(ev.n):
        done = [ci for (p, ci) in ev.commits if p == pid]
        current[pid] = max(done) + 1 if done else 0
    adj: dict[int, set[int]] = {pid: set() for pid in range(ev.n)}
    for sender, receiver, ci, _ in ev.sends:
        if ci == current.get(sender):
            adj[sender].add(receiver)
            adj[receiver].add(sender)
    for sender, receiver, ci, _ in ev.accepts:
        if ci == current.get(receiver):
            adj[sender].add(receiver)
            adj[receiver].add(sender)
    seen = {faulty}
    queue = deque([faulty])
    while queue:
        cur = queue.popleft()
        for nxt in sorted(adj.get(cur, ())):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return frozenset(seen)


def check_rollback_freedom(
    records: list[tr.TraceRecord],
    episode: int,
    rollback: set[int],
    aborted: dict[int, int],
) -> list[str]:
    """Contrapositive checks for the minimality claims of one episode.

    Erasing the aborted interval of the rollback set must leave no orphan
    receipt (a kept receipt whose send was erased) and no lost send (a kept
    send whose receipt was erased).  Both reduce to: any aborted-interval
    message touching the rollback set on either side must have both sides
    in the set, with matching aborted intervals.
    """
    begin = None
    for i, rec in enumerate(records):
        if rec.event == tr.REC_BEGIN and rec.get("episode") == episode:
            begin = i
            break
    if begin is None:
        return [f"episode {episode} not found in trace"]
    ev = _extract(records, stop=begin)
    problems: list[str] = []
    for (s, r, ci, seq), _ in sorted(ev.accepts.items(), key=lambda kv: kv[1]):
        if s in rollback and ci == aborted.get(s):
            if r not in rollback or ci != aborted.get(r):
                problems.append(
                    f"orphan receipt would survive: {s}>{r}@{ci}.{seq} "
                    f"accepted outside the rollback set"
                )
    for (s, r, ci, seq), _ in sorted(ev.sends.items(), key=lambda kv: kv[1]):
        if r in rollback and ci == aborted.get(r):
            if s not in rollback or ci != aborted.get(s):
                problems.append(
                    f"send would be lost: {s}>{r}@{ci}.{seq} "
                    f"sent from outside the rollback set"
                )
    return problems


def count_sync_messages(records: list[tr.TraceRecord], interval: int) -> int:
    """Unique checkpoint-synchronisation messages of one round: requests and
    status broadcasts, not counting retransmits, acks or recovery traffic."""
    count = 0
    for rec in records:
        if rec.event != tr.WIRE_SEND:
            continue
        if rec.get("tag") not in (0, 1):
            continue
        if rec.get("retry") is not None or rec.get("rec") is not None:
            continue
        if rec.get("ci") == interval:
            count += 1
    return count
