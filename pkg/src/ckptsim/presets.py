"""Built-in scenarios and the randomized scenario generator.

``paper-5proc`` and ``paper-fig4`` are the two golden runs the acceptance
suite pins down: a five-process crash with a partial rollback, and a
six-node TMR cascade with promotion and takeover.  ``random_scenario``
produces seeded fuzz runs; crashes are placed in windows where no
checkpoint round is in flight, because detection in the middle of a
half-committed round is outside the recovery model (survivors that already
committed cannot rejoin the aborted round).
"""

from __future__ import annotations

import random

from .scenario import NetConfig, Scenario, ScriptAction


def five_proc() -> Scenario:
    """Five processes, a light message pattern, one crash.

    Interval 1 traffic: P1 sends to P0 and P2, P3 sends to P4.  P2 then
    fails, so P1 (direct partner) and P0 (partner of P1) roll back with it
    while P3 and P4 keep their state.
    """
    return Scenario(
        name="paper-5proc",
        n=5,
        detection_latency=8,
        net=NetConfig(delay_model="fixed", delay_min=2, delay_max=2, ack_timeout=12, rng_seed=1),
        script=(
            ScriptAction(20, "send", pid=1, dest=0),
            ScriptAction(22, "send", pid=1, dest=2),
            ScriptAction(24, "send", pid=3, dest=4),
            ScriptAction(40, "crash", node=2),
            ScriptAction(200, "round"),
        ),
    )


def fig4() -> Scenario:
    """Six nodes in three chained TMR groups; the node leading the middle
    group fails after messaging both of its neighbours' processes."""
    return Scenario(
        name="paper-fig4",
        n=6,
        nodes=(1, 2, 3, 4, 5, 6),
        groups=((1, 1, 2, 3), (2, 3, 4, 5), (3, 4, 5, 6)),
        initiator_policy="tmr-mains",
        detection_latency=8,
        net=NetConfig(delay_model="fixed", delay_min=2, delay_max=2, ack_timeout=12, rng_seed=1),
        script=(
            ScriptAction(20, "send", pid=2, dest=1),
            ScriptAction(22, "send", pid=2, dest=4),
            ScriptAction(40, "crash", node=3),
            ScriptAction(200, "round"),
        ),
    )


def demo_chaos() -> Scenario:
    """Small lossy-network run used in the docs: reordering, duplicates and
    drops with retransmission, two full rounds."""
    return Scenario(
        name="demo-chaos",
        n=4,
        net=NetConfig(
            delay_model="uniform",
            delay_min=1,
            delay_max=5,
            drop_rate=0.1,
            duplicate_rate=0.1,
            ack_timeout=16,
            retry_limit=8,
            rng_seed=7,
        ),
        script=(
            ScriptAction(30, "send", pid=0, dest=1),
            ScriptAction(32, "send", pid=1, dest=2),
            ScriptAction(35, "send", pid=2, dest=3),
            ScriptAction(38, "send", pid=3, dest=0),
            ScriptAction(41, "send", pid=0, dest=2),
            ScriptAction(44, "send", pid=1, dest=3),
            ScriptAction(300, "round"),
            ScriptAction(330, "send", pid=2, dest=0),
            ScriptAction(333, "send", pid=3, dest=1),
            ScriptAction(600, "round"),
        ),
    )


PRESETS: dict[str, tuple[str, object]] = {
    "paper-5proc": ("five processes, one crash, partial rollback", five_proc),
    "paper-fig4": ("three chained TMR groups, main of the middle group fails", fig4),
    "demo-chaos": ("lossy network, two rounds, no failures", demo_chaos),
}


def preset_scenario(name: str) -> Scenario:
    if name not in PRESETS:
        known = ", ".join(sorted(PRESETS))
        raise KeyError(f"unknown preset {name!r}; available: {known}")
    return PRESETS[name][1]()


def random_scenario(seed: int, with_crash: bool = False) -> Scenario:
    """Seeded random scenario on 2..6 processes with up to 20 computation
    messages.  With a crash, script times keep rounds clear of the failure
    window so detection never lands inside a half-committed round."""
    rng = random.Random(seed)
    n = rng.randint(2, 6)
    if rng.random() < 0.5:
        d = rng.randint(1, 3)
        delay = ("fixed", d, d)
    else:
        delay = ("uniform", 1, rng.randint(2, 6))
    drop = rng.choice([0.0, 0.05] if with_crash else [0.0, 0.05, 0.1, 0.15])
    dup = rng.choice([0.0, 0.1, 0.2])
    net = NetConfig(
        delay_model=delay[0],
        delay_min=delay[1],
        delay_max=delay[2],
        drop_rate=drop,
        duplicate_rate=dup,
        ack_timeout=2 * delay[2] + 6,
        retry_limit=8,
        rng_seed=rng.randint(1, 2**30),
    )
    msg_budget = rng.randint(0, 20)
    script: list[ScriptAction] = []

    def sends(count: int, lo: int, hi: int):
        for _ in range(count):
            a = rng.randrange(n)
            b = rng.randrange(n)
            if a == b:
                b = (b + 1) % n
            script.append(ScriptAction(rng.randint(lo, hi), "send", pid=a, dest=b))

    if with_crash:
        first = rng.randint(0, msg_budget)
        sends(first, 50, 250)
        script.append(ScriptAction(300, "crash", node=rng.randrange(n)))
        sends(msg_budget - first, 600, 750)
        script.append(ScriptAction(900, "round"))
        if rng.random() < 0.5:
            script.append(ScriptAction(1300, "round"))
    else:
        rounds = rng.randint(1, 3)
        first = rng.randint(0, msg_budget)
        sends(first, 30, 260)
        script.append(ScriptAction(320, "round"))
        if rounds > 1:
            sends(msg_budget - first, 700, 950)
            script.append(ScriptAction(1000, "round"))
        if rounds > 2:
            script.append(ScriptAction(1600, "round"))
    script.sort(key=lambda a: (a.at, a.kind, a.pid, a.dest, a.node))
    return Scenario(
        name=f"fuzz-{seed}" + ("-crash" if with_crash else ""),
        n=n,
        detection_latency=rng.randint(5, 12),
        step_budget=300_000,
        net=net,
        script=tuple(script),
    )
