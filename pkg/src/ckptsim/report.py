"""Plain-text run reports.

The report is the human-facing summary of one run: per-interval commit and
consistency results, recovery episodes with verdicts and savings, TMR role
changes, and every oracle violation found.  Line order is deterministic so
reports diff cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .oracle import ConsistencyReport
from .simnet import EpisodeSummary, RunResult


@dataclass
class IntervalCheck:
    interval: int
    sync_messages: int
    check: ConsistencyReport


@dataclass
class RunReport:
    name: str
    n: int
    seed: int
    policy: str
    exit_code: int
    outcome: str
    committed: dict[int, int]
    intervals: list[IntervalCheck]
    episodes: list[EpisodeSummary]
    promotions: list[tuple[int, int, int, str]]
    violations: list[str]
    stalled: bool
    error: str | None
    events: int
    final_time: int
    queue_snapshot: list[str] = field(default_factory=list)

    def to_text(self) -> str:
        out = [
            f"run: {self.name}",
            f"processes: {self.n}",
            f"seed: {self.seed}",
            f"policy: {self.policy}",
            f"outcome: {self.outcome}",
            f"exit: {self.exit_code}",
            f"final-time: {self.final_time}",
            f"events: {self.events}",
        ]
        if self.committed:
            done = " ".join(f"P{p}={v}" for p, v in sorted(self.committed.items()))
            out.append(f"committed: {done}")
        else:
            out.append("committed: none")
        for item in self.intervals:
            chk = item.check
            verdict = "yes" if chk.consistent else "NO"
            line = (
                f"interval {item.interval}: sync={item.sync_messages} "
                f"consistent={verdict}"
            )
            if chk.orphans:
                line += " orphans=" + _keys(chk.orphans)
            if chk.missing:
                line += " missing=" + _keys(chk.missing)
            out.append(line)
        for ep in self.episodes:
            out.append(
                f"episode {ep.episode}: node={ep.dead_node} detected={ep.detected_at} "
                f"resolved={ep.resolved_at} faulty={_pids(ep.faulty)}"
            )
            for pid in sorted(ep.verdicts):
                v = ep.verdicts[pid]
                line = f"  verdict P{pid}: "
                line += "rollback" if v.must_rollback else "keep"
                line += f" reason={v.reason.value}"
                if v.path:
                    line += f" path={_pids(v.path)}"
                out.append(line)
            out.append(f"  rollback-set: {_pids(sorted(ep.rollback))}")
            out.append(f"  spared: {self.n - len(ep.rollback)} of {self.n}")
            out.append(f"  purged: {ep.purged}")
            for pid, host in ep.takeovers:
                out.append(f"  resumed: P{pid} on node {host}")
        for when, gid, node, role in self.promotions:
            out.append(f"promotion: t={when} group={gid} node={node} role={role}")
        if self.stalled:
            out.append("stalled: step budget exhausted")
            for line in self.queue_snapshot:
                out.append(f"  pending: {line}")
        if self.error:
            out.append(f"error: {self.error}")
        if self.violations:
            for v in self.violations:
                out.append(f"violation: {v}")
        else:
            out.append("violations: none")
        return "\n".join(out) + "\n"


def _pids(pids) -> str:
    return "-".join(str(p) for p in pids) if pids else "none"


def _keys(keys) -> str:
    return ",".join(f"{s}>{r}@{ci}.{seq}" for s, r, ci, seq in keys)
