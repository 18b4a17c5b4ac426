"""One-shot execution: simulate, run every oracle, build the report.

Exit code contract: 0 when all oracle checks pass, 1 on any violation
(inconsistent committed checkpoint, rollback-set mismatch, unrecoverable
checkpoint loss), 2 when the run exhausted its step budget without the
oracles finding anything wrong.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .oracle import (
    brute_force_rollback,
    check_global_checkpoint,
    check_rollback_freedom,
    count_sync_messages,
    full_intervals,
)
from .presets import preset_scenario, random_scenario
from .report import IntervalCheck, RunReport
from .scenario import Scenario, parse_scenario
from .simnet import RunResult, Simulator


@dataclass
class ExecutionResult:
    exit_code: int
    report: RunReport
    result: RunResult

    def trace_text(self) -> str:
        return self.result.trace_text()

    def report_text(self) -> str:
        return self.report.to_text()


def execute_scenario(
    sc: Scenario,
    seed: int | None = None,
    step_budget: int | None = None,
) -> ExecutionResult:
    if seed is not None:
        sc = replace(sc, net=replace(sc.net, rng_seed=seed))
    if step_budget is not None:
        sc = replace(sc, step_budget=step_budget)
    result = Simulator(sc).run()
    records = result.records
    violations: list[str] = []
    if result.error:
        violations.append(f"unrecoverable: {result.error}")
    intervals: list[IntervalCheck] = []
    for v in full_intervals(records):
        chk = check_global_checkpoint(records, v)
        intervals.append(IntervalCheck(v, count_sync_messages(records, v), chk))
        if not chk.consistent:
            violations.append(
                f"interval {v} inconsistent: "
                f"{len(chk.orphans)} orphan, {len(chk.missing)} missing"
            )
    for ep in result.episodes:
        recomputed: set[int] = set()
        for f in ep.faulty:
            recomputed |= brute_force_rollback(records, f)
        if recomputed != set(ep.rollback):
            violations.append(
                f"episode {ep.episode}: engine rolled back {sorted(ep.rollback)}, "
                f"trace replay says {sorted(recomputed)}"
            )
        for pid in sorted(ep.verdicts):
            if ep.verdicts[pid].must_rollback != (pid in ep.rollback):
                violations.append(
                    f"episode {ep.episode}: verdict for P{pid} disagrees with "
                    f"the rollback set"
                )
        violations.extend(
            check_rollback_freedom(records, ep.episode, set(ep.rollback), ep.aborted)
        )
    if violations:
        exit_code, outcome = 1, "violation"
    elif result.stalled:
        exit_code, outcome = 2, "livelock"
    else:
        exit_code, outcome = 0, "ok"
    report = RunReport(
        name=sc.name,
        n=sc.n,
        seed=sc.net.rng_seed,
        policy=sc.initiator_policy,
        exit_code=exit_code,
        outcome=outcome,
        committed=dict(result.committed),
        intervals=intervals,
        episodes=result.episodes,
        promotions=result.promotions,
        violations=violations,
        stalled=result.stalled,
        error=result.error,
        events=result.events_processed,
        final_time=result.final_time,
        queue_snapshot=result.queue_snapshot if result.stalled else [],
    )
    return ExecutionResult(exit_code, report, result)


def execute_text(
    text: str, seed: int | None = None, step_budget: int | None = None
) -> ExecutionResult:
    return execute_scenario(parse_scenario(text), seed=seed, step_budget=step_budget)


def execute_preset(
    name: str, seed: int | None = None, step_budget: int | None = None
) -> ExecutionResult:
    return execute_scenario(preset_scenario(name), seed=seed, step_budget=step_budget)


@dataclass
class FuzzRun:
    name: str
    seed: int
    exit_code: int
    stalled: bool
    first_violation: str = ""


@dataclass
class FuzzSummary:
    total: int
    passed: int
    livelocked: int
    failed: list[FuzzRun] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        if any(r.exit_code == 1 for r in self.failed):
            return 1
        if self.livelocked:
            return 2
        return 0

    def to_text(self) -> str:
        out = [
            f"fuzz: {self.total} runs, {self.passed} clean, "
            f"{self.livelocked} stalled, {len(self.failed)} failed"
        ]
        for run in self.failed:
            out.append(
                f"  {run.name}: exit={run.exit_code} {run.first_violation}".rstrip()
            )
        return "\n".join(out) + "\n"


def run_fuzz(count: int, base_seed: int, with_crash: bool = False) -> FuzzSummary:
    """Execute ``count`` seeded random scenarios and aggregate verdicts."""
    summary = FuzzSummary(total=count, passed=0, livelocked=0)
    for i in range(count):
        seed = base_seed + i
        sc = random_scenario(seed, with_crash=with_crash)
        res = execute_scenario(sc)
        if res.exit_code == 0:
            summary.passed += 1
        else:
            if res.report.stalled:
                summary.livelocked += 1
            first = res.report.violations[0] if res.report.violations else ""
            summary.failed.append(
                FuzzRun(sc.name, seed, res.exit_code, res.report.stalled, first)
            )
    return summary
