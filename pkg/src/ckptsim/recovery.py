"""Dependency analysis for rollback recovery.

When a process fails, the survivors exchange their live counter vectors and
build the send/receive partner matrix for the current interval.  A process
must roll back exactly when it is connected to the faulty process in the
undirected partner graph; everyone else keeps running.  The search records
the dependency chain so a verdict can say *why* a rollback is needed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from .core import StatusVector


class RecoveryError(RuntimeError):
    pass


# Visited order of the dependency search, exposed for diagnostics.
DependsList = tuple[int, ...]


@dataclass(frozen=True)
class SrMatrix:
    """Per-process rows of interval partners.  Row i lists the peers process
    i sent to this interval (ascending) followed by the peers it only
    received from (ascending)."""

    n: int
    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.rows) != self.n:
            raise RecoveryError("one row per process required")
        for i, row in enumerate(self.rows):
            if len(set(row)) != len(row):
                raise RecoveryError(f"row {i} lists a partner twice")
            for j in row:
                if not 0 <= j < self.n or j == i:
                    raise RecoveryError(f"row {i} has bad partner {j}")

    def row(self, i: int) -> tuple[int, ...]:
        return self.rows[i]


def build_sr_matrix(vectors: Mapping[int, StatusVector]) -> SrMatrix:
    """Build the partner matrix from one status vector per process."""
    n = len(vectors)
    if sorted(vectors) != list(range(n)):
        raise RecoveryError("need exactly one vector per process 0..n-1")
    rows = []
    for i in range(n):
        vec = vectors[i]
        if vec.owner != i:
            raise RecoveryError(f"vector at slot {i} owned by {vec.owner}")
        if vec.n != n:
            raise RecoveryError("vector sized for a different system")
        sent = vec.sent_partners()
        recd = [j for j in vec.recd_partners() if j not in set(sent)]
        rows.append(tuple(sent) + tuple(recd))
    return SrMatrix(n, tuple(rows))


def neighbors(sr: SrMatrix, i: int) -> list[int]:
    """Undirected partner closure: j is a neighbor of i if either side
    recorded the exchange.  At recovery time a message can be counted by
    its sender but still be in flight, so the union of both rows is the
    dependable relation."""
    out = set(sr.row(i))
    for j in range(sr.n):
        if j != i and i in sr.row(j):
            out.add(j)
    return sorted(out)


def check_symmetry(sr: SrMatrix) -> list[tuple[int, int]]:
    """Pairs recorded by one side only.  Empty when the vectors were taken
    at a quiescent instant."""
    odd = []
    for i in range(sr.n):
        for j in sr.row(i):
            if i not in sr.row(j):
                odd.append((i, j))
    return odd


class Reason(Enum):
    IS_FAULTY = "is-faulty"
    DIRECT = "direct"
    INDIRECT = "indirect"
    NOT_DEPENDENT = "not-dependent"


@dataclass(frozen=True)
class RecoveryVerdict:
    """Outcome of the dependency search for one process against one fault.

    ``path`` is the dependency chain from the deciding process (exclusive)
    to the faulty process (inclusive); empty unless the reason is indirect
    or direct.  ``depends`` is the visited order of the search."""

    pid: int
    faulty: int
    must_rollback: bool
    reason: Reason
    path: tuple[int, ...] = ()
    depends: DependsList = ()


def detect_recovery(sr: SrMatrix, own: int, faulty: int) -> RecoveryVerdict:
    """Decide whether ``own`` must roll back for the failure of ``faulty``.

    Breadth-first search over the undirected partner graph, expanding
    neighbors in ascending pid order so verdicts are deterministic.
    """
    if not 0 <= own < sr.n or not 0 <= faulty < sr.n:
        raise RecoveryError("pid out of range")
    if own == faulty:
        return RecoveryVerdict(own, faulty, True, Reason.IS_FAULTY)
    first = neighbors(sr, own)
    if faulty in first:
        return RecoveryVerdict(own, faulty, True, Reason.DIRECT, (faulty,), (faulty,))
    parent: dict[int, int] = {}
    visited: list[int] = []
    queue = deque(first)
    for j in first:
        parent[j] = own
    while queue:
        cur = queue.popleft()
        visited.append(cur)
        if cur == faulty:
            path = [cur]
            while parent[path[-1]] != own:
                path.append(parent[path[-1]])
            path.reverse()
            return RecoveryVerdict(
                own, faulty, True, Reason.INDIRECT, tuple(path), tuple(visited)
            )
        for nxt in neighbors(sr, cur):
            if nxt != own and nxt not in parent:
                parent[nxt] = cur
                queue.append(nxt)
    return RecoveryVerdict(own, faulty, False, Reason.NOT_DEPENDENT, (), tuple(visited))


def rollback_set(sr: SrMatrix, faulty: int) -> frozenset[int]:
    """Connected component of the faulty process, the faulty one included."""
    if not 0 <= faulty < sr.n:
        raise RecoveryError("pid out of range")
    seen = {faulty}
    queue = deque([faulty])
    while queue:
        cur = queue.popleft()
        for nxt in neighbors(sr, cur):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return frozenset(seen)


def decide_verdicts(
    sr: SrMatrix, faulty: Iterable[int]
) -> dict[int, RecoveryVerdict]:
    """Verdict for every process against a set of simultaneous faults (a
    node can host several processes by the time it fails).  A process rolls
    back if any fault reaches it; the verdict keeps the first fault, in
    ascending order, that forced the rollback."""
    faults = sorted(set(faulty))
    if not faults:
        raise RecoveryError("no faulty process given")
    verdicts: dict[int, RecoveryVerdict] = {}
    for pid in range(sr.n):
        chosen = None
        for f in faults:
            v = detect_recovery(sr, pid, f)
            if chosen is None:
                chosen = v
            if v.must_rollback:
                chosen = v
                break
        verdicts[pid] = chosen
    return verdicts


def union_rollback_set(sr: SrMatrix, faulty: Iterable[int]) -> frozenset[int]:
    out: set[int] = set()
    for f in set(faulty):
        out |= rollback_set(sr, f)
    return frozenset(out)
