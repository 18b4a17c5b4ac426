"""HTTP facade over the simulator.

The service is stateless: every request runs to completion and returns the
full trace, report and oracle verdicts.  Scenarios travel as the same text
format the CLI reads, so a scenario file can be POSTed unchanged.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .presets import PRESETS, preset_scenario
from .runner import execute_scenario, run_fuzz
from .scenario import (
    ScenarioFormatError,
    parse_scenario,
    render_scenario,
)
from .simnet import SimError, UnsupportedScenarioError

app = FastAPI(
    title="ckptsim",
    description=(
        "Deterministic simulation of coordinated checkpointing, rollback "
        "recovery and TMR checkpoint failover, with trace-level consistency "
        "oracles."
    ),
    version="0.1.0",
)


class PresetInfo(BaseModel):
    name: str
    description: str


class PresetDetail(PresetInfo):
    scenario: str


class RunRequest(BaseModel):
    preset: str | None = Field(default=None, description="name of a built-in scenario")
    scenario: str | None = Field(default=None, description="scenario file text")
    seed: int | None = Field(default=None, description="override the scenario seed")
    step_budget: int | None = Field(default=None, ge=1)


class IntervalOut(BaseModel):
    interval: int
    sync_messages: int
    consistent: bool
    orphans: list[str]
    missing: list[str]


class VerdictOut(BaseModel):
    pid: int
    must_rollback: bool
    reason: str
    path: list[int]


class EpisodeOut(BaseModel):
    episode: int
    dead_node: int
    detected_at: int
    resolved_at: int
    faulty: list[int]
    rollback_set: list[int]
    spared: int
    purged: int
    verdicts: list[VerdictOut]
    takeovers: list[tuple[int, int]]


class RunResponse(BaseModel):
    name: str
    exit_code: int
    outcome: str
    seed: int
    final_time: int
    events: int
    committed: dict[int, int]
    intervals: list[IntervalOut]
    episodes: list[EpisodeOut]
    violations: list[str]
    trace: str
    report: str


class FuzzRequest(BaseModel):
    count: int = Field(default=100, ge=1, le=10_000)
    seed: int = 1
    crash: bool = False


class FuzzFailure(BaseModel):
    name: str
    seed: int
    exit_code: int
    stalled: bool
    first_violation: str


class FuzzResponse(BaseModel):
    total: int
    passed: int
    livelocked: int
    exit_code: int
    failed: list[FuzzFailure]


class ValidateRequest(BaseModel):
    scenario: str


class Diagnostic(BaseModel):
    line: int
    message: str


class ValidateResponse(BaseModel):
    ok: bool
    diagnostics: list[Diagnostic]
    canonical: str | None = None


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.get("/presets", response_model=list[PresetInfo])
def list_presets():
    return [
        PresetInfo(name=name, description=desc)
        for name, (desc, _) in sorted(PRESETS.items())
    ]


@app.get("/presets/{name}", response_model=PresetDetail)
def get_preset(name: str):
    if name not in PRESETS:
        raise HTTPException(status_code=404, detail=f"unknown preset {name!r}")
    desc, _ = PRESETS[name]
    return PresetDetail(
        name=name, description=desc, scenario=render_scenario(preset_scenario(name))
    )


def _load_scenario(req: RunRequest):
    if (req.preset is None) == (req.scenario is None):
        raise HTTPException(
            status_code=422, detail="give exactly one of 'preset' or 'scenario'"
        )
    if req.preset is not None:
        if req.preset not in PRESETS:
            raise HTTPException(status_code=404, detail=f"unknown preset {req.preset!r}")
        return preset_scenario(req.preset)
    try:
        return parse_scenario(req.scenario)
    except ScenarioFormatError as exc:
        raise HTTPException(
            status_code=422,
            detail=[{"line": ln, "message": msg} for ln, msg in exc.diagnostics],
        )


@app.post("/runs", response_model=RunResponse)
def run(req: RunRequest):
    sc = _load_scenario(req)
    try:
        res = execute_scenario(sc, seed=req.seed, step_budget=req.step_budget)
    except UnsupportedScenarioError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    except SimError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    rep = res.report
    return RunResponse(
        name=rep.name,
        exit_code=rep.exit_code,
        outcome=rep.outcome,
        seed=rep.seed,
        final_time=rep.final_time,
        events=rep.events,
        committed=rep.committed,
        intervals=[
            IntervalOut(
                interval=item.interval,
                sync_messages=item.sync_messages,
                consistent=item.check.consistent,
                orphans=[_key(k) for k in item.check.orphans],
                missing=[_key(k) for k in item.check.missing],
            )
            for item in rep.intervals
        ],
        episodes=[
            EpisodeOut(
                episode=ep.episode,
                dead_node=ep.dead_node,
                detected_at=ep.detected_at,
                resolved_at=ep.resolved_at,
                faulty=list(ep.faulty),
                rollback_set=sorted(ep.rollback),
                spared=rep.n - len(ep.rollback),
                purged=ep.purged,
                verdicts=[
                    VerdictOut(
                        pid=pid,
                        must_rollback=v.must_rollback,
                        reason=v.reason.value,
                        path=list(v.path),
                    )
                    for pid, v in sorted(ep.verdicts.items())
                ],
                takeovers=list(ep.takeovers),
            )
            for ep in rep.episodes
        ],
        violations=rep.violations,
        trace=res.trace_text(),
        report=res.report_text(),
    )


@app.post("/fuzz", response_model=FuzzResponse)
def fuzz(req: FuzzRequest):
    summary = run_fuzz(req.count, req.seed, with_crash=req.crash)
    return FuzzResponse(
        total=summary.total,
        passed=summary.passed,
        livelocked=summary.livelocked,
        exit_code=summary.exit_code,
        failed=[
            FuzzFailure(
                name=r.name,
                seed=r.seed,
                exit_code=r.exit_code,
                stalled=r.stalled,
                first_violation=r.first_violation,
            )
            for r in summary.failed
        ],
    )


@app.post("/scenarios/validate", response_model=ValidateResponse)
def validate(req: ValidateRequest):
    try:
        sc = parse_scenario(req.scenario)
    except ScenarioFormatError as exc:
        return ValidateResponse(
            ok=False,
            diagnostics=[Diagnostic(line=ln, message=msg) for ln, msg in exc.diagnostics],
        )
    return ValidateResponse(ok=True, diagnostics=[], canonical=render_scenario(sc))


def _key(key) -> str:
    s, r, ci, seq = key
    return f"{s}>{r}@{ci}.{seq}"
