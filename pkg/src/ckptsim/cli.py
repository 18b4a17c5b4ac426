"""Command line client.

The CLI talks to the HTTP API: by default it mounts the service in-process
(no network, nothing to start), with ``--server`` it targets a running
instance instead, and ``--serve`` starts one.  Exit codes: 0 all oracle
checks passed, 1 violation, 2 livelock, 3 usage or scenario errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ckptsim",
        description=(
            "Simulate coordinated checkpointing with rollback recovery and "
            "TMR failover, and check every run against trace-level oracles."
        ),
    )
    src = p.add_argument_group("what to run")
    src.add_argument("--scenario", metavar="PATH", help="scenario file to execute")
    src.add_argument("--preset", metavar="NAME", help="built-in scenario to execute")
    src.add_argument(
        "--fuzz", metavar="K", type=int, help="run K seeded random scenarios"
    )
    src.add_argument(
        "--crash",
        action="store_true",
        help="with --fuzz: include one node crash per scenario",
    )
    src.add_argument(
        "--list-presets", action="store_true", help="list built-in scenarios"
    )
    src.add_argument(
        "--validate", metavar="PATH", help="check a scenario file and print diagnostics"
    )
    run = p.add_argument_group("run options")
    run.add_argument("--seed", type=int, help="override the scenario's RNG seed")
    run.add_argument("--step-budget", type=int, help="override the event budget")
    run.add_argument(
        "--trace-out", metavar="PATH", help="write the full event trace here"
    )
    run.add_argument(
        "--report-out", metavar="PATH", help="write the run report here"
    )
    run.add_argument("--quiet", action="store_true", help="suppress stdout report")
    net = p.add_argument_group("service")
    net.add_argument(
        "--server", metavar="URL", help="use a running ckptsim service instead of in-process"
    )
    net.add_argument("--serve", action="store_true", help="start the HTTP service")
    net.add_argument("--host", default="127.0.0.1", help="bind address for --serve")
    net.add_argument("--port", type=int, default=8000, help="port for --serve")
    return p


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=600.0)
    # In-process transport: same API surface, no sockets involved.
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _fail(detail) -> int:
    if isinstance(detail, list):
        for item in detail:
            line = item.get("line", "?") if isinstance(item, dict) else "?"
            msg = item.get("message", item) if isinstance(item, dict) else item
            print(f"error: line {line}: {msg}", file=sys.stderr)
    else:
        print(f"error: {detail}", file=sys.stderr)
    return 3


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.serve:
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0
    modes = [
        args.scenario is not None,
        args.preset is not None,
        args.fuzz is not None,
        args.list_presets,
        args.validate is not None,
    ]
    if sum(modes) != 1:
        print(
            "error: pick exactly one of --scenario, --preset, --fuzz, "
            "--list-presets, --validate",
            file=sys.stderr,
        )
        return 3

    with _client(args.server) as client:
        if args.list_presets:
            resp = client.get("/presets")
            resp.raise_for_status()
            for item in resp.json():
                print(f"{item['name']}: {item['description']}")
            return 0

        if args.validate is not None:
            text = _read(args.validate)
            if text is None:
                return 3
            resp = client.post("/scenarios/validate", json={"scenario": text})
            resp.raise_for_status()
            body = resp.json()
            if body["ok"]:
                print("ok")
                return 0
            for d in body["diagnostics"]:
                print(f"line {d['line']}: {d['message']}", file=sys.stderr)
            return 3

        if args.fuzz is not None:
            resp = client.post(
                "/fuzz",
                json={
                    "count": args.fuzz,
                    "seed": args.seed if args.seed is not None else 1,
                    "crash": args.crash,
                },
            )
            if resp.status_code != 200:
                return _fail(resp.json().get("detail", resp.text))
            body = resp.json()
            print(
                f"fuzz: {body['total']} runs, {body['passed']} clean, "
                f"{body['livelocked']} stalled, {len(body['failed'])} failed"
            )
            for run in body["failed"]:
                print(f"  {run['name']}: exit={run['exit_code']} {run['first_violation']}")
            return body["exit_code"]

        payload: dict = {}
        if args.preset is not None:
            payload["preset"] = args.preset
        else:
            text = _read(args.scenario)
            if text is None:
                return 3
            payload["scenario"] = text
        if args.seed is not None:
            payload["seed"] = args.seed
        if args.step_budget is not None:
            payload["step_budget"] = args.step_budget
        resp = client.post("/runs", json=payload)
        if resp.status_code != 200:
            try:
                detail = resp.json().get("detail", resp.text)
            except json.JSONDecodeError:
                detail = resp.text
            return _fail(detail)
        body = resp.json()
        if args.trace_out:
            Path(args.trace_out).write_text(body["trace"])
        if args.report_out:
            Path(args.report_out).write_text(body["report"])
        if not args.quiet:
            print(body["report"], end="")
        return body["exit_code"]


def _read(path: str) -> str | None:
    try:
        return Path(path).read_text()
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return None


if __name__ == "__main__":
    sys.exit(main())
