"""Scenario files: what to simulate, on which topology, under which network.

A scenario is a small sectioned text file.  ``parse_scenario`` reads one
with line-anchored diagnostics, ``render_scenario`` writes the canonical
form, and the two round-trip exactly, so scenarios can be stored, diffed
and shipped over the HTTP API as plain text.

Example::

    name = demo

    [system]
    processes = 3

    [net]
    delay = uniform 1 4
    drop = 0.05
    seed = 9

    [script]
    at 50 send 0 -> 2
    at 120 round
    at 300 crash 1
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace


class ScenarioFormatError(ValueError):
    """Parse or validation failure; ``diagnostics`` holds (line, message)."""

    def __init__(self, diagnostics: list[tuple[int, str]]):
        self.diagnostics = diagnostics
        lines = "; ".join(f"line {ln}: {msg}" for ln, msg in diagnostics)
        super().__init__(lines or "invalid scenario")


@dataclass(frozen=True)
class NetConfig:
    """Link behaviour.  Delays are inclusive integer bounds; a fixed model
    has equal bounds.  Every frame is acknowledged and retransmitted on
    timeout up to ``retry_limit`` extra attempts."""

    delay_model: str = "fixed"
    delay_min: int = 2
    delay_max: int = 2
    drop_rate: float = 0.0
    duplicate_rate: float = 0.0
    ack_timeout: int = 12
    retry_limit: int = 5
    rng_seed: int = 1


@dataclass(frozen=True)
class ScriptAction:
    """One scripted event: a computation send, a checkpoint round, or a
    node crash."""

    at: int
    kind: str
    pid: int = -1
    dest: int = -1
    node: int = -1


@dataclass(frozen=True)
class Scenario:
    name: str = "unnamed"
    n: int = 2
    nodes: tuple[int, ...] = ()
    links: tuple[tuple[int, int], ...] = ()
    groups: tuple[tuple[int, int, int, int], ...] = ()
    initiator_policy: str = "round-robin"
    detection_latency: int = 10
    step_budget: int = 200_000
    net: NetConfig = field(default_factory=NetConfig)
    script: tuple[ScriptAction, ...] = ()

    def node_of(self, pid: int) -> int:
        return self.nodes[pid]


def default_nodes(n: int) -> tuple[int, ...]:
    return tuple(range(n))


def validate_scenario(sc: Scenario) -> list[str]:
    """All structural problems with a scenario, empty when it is runnable."""
    errs: list[str] = []
    if sc.n < 2:
        errs.append("need at least 2 processes")
    nodes = sc.nodes or default_nodes(sc.n)
    if len(nodes) != sc.n:
        errs.append(f"{len(nodes)} node ids for {sc.n} processes")
    if len(set(nodes)) != len(nodes):
        errs.append("node ids must be distinct")
    node_set = set(nodes)
    if sc.initiator_policy not in ("round-robin", "tmr-mains"):
        errs.append(f"unknown initiator policy {sc.initiator_policy!r}")
    if sc.initiator_policy == "tmr-mains" and not sc.groups:
        errs.append("tmr-mains initiator policy needs groups")
    seen_gids = set()
    grouped: set[int] = set()
    for gid, m, p, s in sc.groups:
        if gid in seen_gids:
            errs.append(f"duplicate group id {gid}")
        seen_gids.add(gid)
        members = (m, p, s)
        if len(set(members)) != 3:
            errs.append(f"group {gid} members must be three distinct nodes")
        for member in members:
            if member not in node_set:
                errs.append(f"group {gid} member {member} is not a declared node")
        grouped.update(members)
        if sc.links:
            linkset = {frozenset(l) for l in sc.links}
            for a in members:
                for b in members:
                    if a < b and frozenset((a, b)) not in linkset:
                        errs.append(f"group {gid} members {a} and {b} are not linked")
    for a, b in sc.links:
        if a == b:
            errs.append(f"link {a}-{b} joins a node to itself")
        if a not in node_set or b not in node_set:
            errs.append(f"link {a}-{b} references undeclared nodes")
    net = sc.net
    if net.delay_model not in ("fixed", "uniform"):
        errs.append(f"unknown delay model {net.delay_model!r}")
    if not 0 <= net.delay_min <= net.delay_max:
        errs.append("delay bounds must satisfy 0 <= min <= max")
    if net.delay_model == "fixed" and net.delay_min != net.delay_max:
        errs.append("fixed delay needs equal bounds")
    for label, rate in (("drop", net.drop_rate), ("duplicate", net.duplicate_rate)):
        if not 0.0 <= rate < 1.0:
            errs.append(f"{label} rate must be in [0, 1)")
    if net.ack_timeout <= net.delay_max:
        errs.append("ack_timeout must exceed the maximum delay")
    if net.retry_limit < 0:
        errs.append("retry_limit must be non-negative")
    if sc.detection_latency < 1:
        errs.append("detection_latency must be at least 1")
    if sc.step_budget < 1:
        errs.append("step_budget must be positive")
    for act in sc.script:
        if act.at < 0:
            errs.append(f"script time {act.at} is negative")
        if act.kind == "send":
            if not (0 <= act.pid < sc.n) or not (0 <= act.dest < sc.n):
                errs.append(f"send {act.pid}->{act.dest} references unknown processes")
            elif act.pid == act.dest:
                errs.append(f"send {act.pid}->{act.dest} targets its own sender")
        elif act.kind == "crash":
            if act.node not in node_set:
                errs.append(f"crash targets undeclared node {act.node}")
        elif act.kind != "round":
            errs.append(f"unknown script action {act.kind!r}")
    return errs


def normalize(sc: Scenario) -> Scenario:
    """Fill defaulted fields so equality and rendering are canonical."""
    if not sc.nodes:
        sc = replace(sc, nodes=default_nodes(sc.n))
    return sc


# ----------------------------------------------------------------------
# parsing


def parse_scenario(text: str) -> Scenario:
    diags: list[tuple[int, str]] = []
    name = "unnamed"
    n = 2
    step_budget = 200_000
    initiator = "round-robin"
    detection = 10
    nodes: tuple[int, ...] = ()
    links: list[tuple[int, int]] = []
    groups: list[tuple[int, int, int, int]] = []
    net_kw: dict = {}
    script: list[ScriptAction] = []

    section = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in ("system", "nodes", "groups", "net", "script"):
                diags.append((ln, f"unknown section [{section}]"))
                section = None
            continue
        if section is None:
            key, ok = _split_kv(line, ln, diags)
            if ok and key[0] == "name":
                name = key[1]
            elif ok:
                diags.append((ln, f"unexpected key {key[0]!r} before any section"))
            continue
        if section == "system":
            key, ok = _split_kv(line, ln, diags)
            if not ok:
                continue
            k, v = key
            if k == "processes":
                n = _int(v, ln, diags, default=n)
            elif k == "step_budget":
                step_budget = _int(v, ln, diags, default=step_budget)
            elif k == "initiator":
                initiator = v
            elif k == "detection_latency":
                detection = _int(v, ln, diags, default=detection)
            else:
                diags.append((ln, f"unknown system key {k!r}"))
        elif section == "nodes":
            key, ok = _split_kv(line, ln, diags)
            if not ok:
                continue
            k, v = key
            if k == "ids":
                parsed = [_int(t, ln, diags) for t in v.split()]
                nodes = tuple(parsed)
            elif k == "links":
                for tok in v.split():
                    a, sep, b = tok.partition("-")
                    if not sep:
                        diags.append((ln, f"bad link {tok!r}, expected a-b"))
                        continue
                    links.append((_int(a, ln, diags), _int(b, ln, diags)))
            else:
                diags.append((ln, f"unknown nodes key {k!r}"))
        elif section == "groups":
            key, ok = _split_kv(line, ln, diags)
            if not ok:
                continue
            k, v = key
            parts = k.split()
            if len(parts) != 2 or parts[0] != "tmr":
                diags.append((ln, f"group lines look like 'tmr <id> = m p s', got {k!r}"))
                continue
            gid = _int(parts[1], ln, diags)
            members = [_int(t, ln, diags) for t in v.split()]
            if len(members) != 3:
                diags.append((ln, f"group {gid} needs exactly three members"))
                continue
            groups.append((gid, members[0], members[1], members[2]))
        elif section == "net":
            key, ok = _split_kv(line, ln, diags)
            if not ok:
                continue
            k, v = key
            if k == "delay":
                toks = v.split()
                if toks and toks[0] == "fixed" and len(toks) == 2:
                    d = _int(toks[1], ln, diags)
                    net_kw.update(delay_model="fixed", delay_min=d, delay_max=d)
                elif toks and toks[0] == "uniform" and len(toks) == 3:
                    net_kw.update(
                        delay_model="uniform",
                        delay_min=_int(toks[1], ln, diags),
                        delay_max=_int(toks[2], ln, diags),
                    )
                else:
                    diags.append((ln, f"delay is 'fixed D' or 'uniform LO HI', got {v!r}"))
            elif k == "drop":
                net_kw["drop_rate"] = _float(v, ln, diags)
            elif k == "duplicate":
                net_kw["duplicate_rate"] = _float(v, ln, diags)
            elif k == "ack_timeout":
                net_kw["ack_timeout"] = _int(v, ln, diags)
            elif k == "retry_limit":
                net_kw["retry_limit"] = _int(v, ln, diags)
            elif k == "seed":
                net_kw["rng_seed"] = _int(v, ln, diags)
            else:
                diags.append((ln, f"unknown net key {k!r}"))
        elif section == "script":
            act = _parse_action(line, ln, diags)
            if act is not None:
                script.append(act)

    if diags:
        raise ScenarioFormatError(diags)

    sc = Scenario(
        name=name,
        n=n,
        nodes=nodes or default_nodes(n),
        links=tuple(links),
        groups=tuple(groups),
        initiator_policy=initiator,
        detection_latency=detection,
        step_budget=step_budget,
        net=NetConfig(**net_kw),
        script=tuple(script),
    )
    errs = validate_scenario(sc)
    if errs:
        raise ScenarioFormatError([(0, e) for e in errs])
    return sc


def _split_kv(line: str, ln: int, diags) -> tuple[tuple[str, str], bool]:
    key, sep, val = line.partition("=")
    if not sep:
        diags.append((ln, f"expected 'key = value', got {line!r}"))
        return ("", ""), False
    return (key.strip(), val.strip()), True


def _int(tok: str, ln: int, diags, default: int = 0) -> int:
    try:
        return int(tok)
    except ValueError:
        diags.append((ln, f"expected an integer, got {tok!r}"))
        return default


def _float(tok: str, ln: int, diags, default: float = 0.0) -> float:
    try:
        return float(tok)
    except ValueError:
        diags.append((ln, f"expected a number, got {tok!r}"))
        return default


def _parse_action(line: str, ln: int, diags) -> ScriptAction | None:
    toks = line.split()
    if len(toks) < 3 or toks[0] != "at":
        diags.append((ln, f"script lines start with 'at <time> <action>', got {line!r}"))
        return None
    at = _int(toks[1], ln, diags)
    action = toks[2]
    rest = toks[3:]
    if action == "send":
        if len(rest) == 3 and rest[1] == "->":
            return ScriptAction(at, "send", pid=_int(rest[0], ln, diags), dest=_int(rest[2], ln, diags))
        diags.append((ln, f"send lines look like 'at T send A -> B', got {line!r}"))
        return None
    if action == "round":
        if rest:
            diags.append((ln, f"round takes no arguments, got {line!r}"))
            return None
        return ScriptAction(at, "round")
    if action == "crash":
        if len(rest) == 1:
            return ScriptAction(at, "crash", node=_int(rest[0], ln, diags))
        diags.append((ln, f"crash lines look like 'at T crash NODE', got {line!r}"))
        return None
    diags.append((ln, f"unknown script action {action!r}"))
    return None


# ----------------------------------------------------------------------
# rendering


def render_scenario(sc: Scenario) -> str:
    sc = normalize(sc)
    out: list[str] = [f"name = {sc.name}", ""]
    out.append("[system]")
    out.append(f"processes = {sc.n}")
    out.append(f"step_budget = {sc.step_budget}")
    out.append(f"initiator = {sc.initiator_policy}")
    out.append(f"detection_latency = {sc.detection_latency}")
    out.append("")
    out.append("[nodes]")
    out.append("ids = " + " ".join(str(x) for x in sc.nodes))
    if sc.links:
        out.append("links = " + " ".join(f"{a}-{b}" for a, b in sc.links))
    out.append("")
    if sc.groups:
        out.append("[groups]")
        for gid, m, p, s in sc.groups:
            out.append(f"tmr {gid} = {m} {p} {s}")
        out.append("")
    net = sc.net
    out.append("[net]")
    if net.delay_model == "fixed":
        out.append(f"delay = fixed {net.delay_min}")
    else:
        out.append(f"delay = uniform {net.delay_min} {net.delay_max}")
    out.append(f"drop = {net.drop_rate!r}")
    out.append(f"duplicate = {net.duplicate_rate!r}")
    out.append(f"ack_timeout = {net.ack_timeout}")
    out.append(f"retry_limit = {net.retry_limit}")
    out.append(f"seed = {net.rng_seed}")
    out.append("")
    if sc.script:
        out.append("[script]")
        for act in sc.script:
            if act.kind == "send":
                out.append(f"at {act.at} send {act.pid} -> {act.dest}")
            elif act.kind == "round":
                out.append(f"at {act.at} round")
            else:
                out.append(f"at {act.at} crash {act.node}")
        out.append("")
    return "\n".join(out)
