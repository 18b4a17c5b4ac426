"""Triple-modular-redundant checkpoint placement and failover.

Nodes are grouped in threes with a role chain: main, primary, secondary.
Checkpoint copies flow up the chain (a secondary replicates to both its
seniors, a primary to its main, a main to its primary), so after any single
failure every checkpoint still has two live homes and after two failures
one.  When a member dies the juniors each move up one role, and the group
whose chain the dead node topped takes over its processes on the promoted
main.  A group survives at most two failures; the third leaves nothing to
promote.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .core import CheckpointRecord


class TmrError(RuntimeError):
    pass


class GroupDeadError(TmrError):
    """Third failure in a group: no member left to take over."""


class UnrecoverableError(TmrError):
    """No live node holds a copy of a needed checkpoint."""


class TmrRole(Enum):
    MAIN = "main"
    PRIMARY = "primary"
    SECONDARY = "secondary"


_SENIORITY = {TmrRole.MAIN: 0, TmrRole.PRIMARY: 1, TmrRole.SECONDARY: 2}


@dataclass(frozen=True)
class TmrGroup:
    """Current role chain of one group.  Promotions compact the chain, so
    the role fields always name live nodes; ``dead`` keeps the failure
    order for reporting."""

    group_id: int
    main: int
    primary: int | None = None
    secondary: int | None = None
    dead: tuple[int, ...] = ()

    def __post_init__(self):
        members = [m for m in (self.main, self.primary, self.secondary) if m is not None]
        if len(set(members)) != len(members):
            raise TmrError("group members must be distinct")
        if self.secondary is not None and self.primary is None:
            raise TmrError("secondary without a primary")
        if set(members) & set(self.dead):
            raise TmrError("dead node still holds a role")

    def alive_members(self) -> list[int]:
        return [m for m in (self.main, self.primary, self.secondary) if m is not None]

    def members(self) -> list[int]:
        return self.alive_members() + list(self.dead)

    @property
    def mode(self) -> str:
        count = len(self.alive_members())
        return {3: "tmr", 2: "dmr", 1: "lone"}[count]

    def role_of(self, node: int) -> TmrRole | None:
        if node == self.main:
            return TmrRole.MAIN
        if node == self.primary:
            return TmrRole.PRIMARY
        if node == self.secondary:
            return TmrRole.SECONDARY
        return None


def handle_member_failure(
    group: TmrGroup, failed: int
) -> tuple[TmrGroup, list[tuple[int, TmrRole]]]:
    """Remove a failed member and promote the juniors.  Returns the updated
    group and the promotions as (node, new role) pairs."""
    role = group.role_of(failed)
    if role is None:
        if failed in group.dead:
            raise TmrError(f"node {failed} already failed in group {group.group_id}")
        raise TmrError(f"node {failed} is not in group {group.group_id}")
    if group.alive_members() == [failed]:
        raise GroupDeadError(
            f"group {group.group_id} lost its last member {failed}"
        )
    dead = group.dead + (failed,)
    promotions: list[tuple[int, TmrRole]] = []
    if role is TmrRole.MAIN:
        promotions.append((group.primary, TmrRole.MAIN))
        if group.secondary is not None:
            promotions.append((group.secondary, TmrRole.PRIMARY))
        new = replace(
            group, main=group.primary, primary=group.secondary, secondary=None, dead=dead
        )
    elif role is TmrRole.PRIMARY:
        if group.secondary is not None:
            promotions.append((group.secondary, TmrRole.PRIMARY))
        new = replace(group, primary=group.secondary, secondary=None, dead=dead)
    else:
        new = replace(group, secondary=None, dead=dead)
    return new, promotions


def replication_targets(group: TmrGroup, node: int) -> list[int]:
    """Where a member ships its checkpoint copies under the current chain."""
    role = group.role_of(node)
    if role is None:
        raise TmrError(f"node {node} holds no role in group {group.group_id}")
    if role is TmrRole.MAIN:
        return [group.primary] if group.primary is not None else []
    if role is TmrRole.PRIMARY:
        return [group.main]
    return [group.main, group.primary]


def choose_takeover_group(groups: list[TmrGroup], failed: int) -> int | None:
    """Pick the group that adopts a failed node's processes: the one where
    it held the most senior role, ties broken by group id.  Call with the
    chains as they were before the failure."""
    best: tuple[int, int] | None = None
    for g in groups:
        role = g.role_of(failed)
        if role is None:
            continue
        key = (_SENIORITY[role], g.group_id)
        if best is None or key < best:
            best = key
    return best[1] if best else None


def takeover(failed: int, group: TmrGroup) -> int:
    """Node that resumes the failed node's processes: the group's main after
    promotion."""
    if failed not in group.dead:
        raise TmrError(f"node {failed} has not failed in group {group.group_id}")
    return group.main


class ReplicaStore:
    """Checkpoint copies on stable storage, keyed by holder node and owning
    process.  A newer checkpoint replaces the previous copy; stale arrivals
    (late retransmits of an older index) are ignored."""

    def __init__(self):
        self._store: dict[int, dict[int, CheckpointRecord]] = {}

    def put(self, node: int, record: CheckpointRecord) -> bool:
        shelf = self._store.setdefault(node, {})
        existing = shelf.get(record.owner)
        if existing is not None and existing.index > record.index:
            return False
        shelf[record.owner] = record
        return True

    def get(self, node: int, owner: int) -> CheckpointRecord | None:
        return self._store.get(node, {}).get(owner)

    def holders(self, owner: int) -> list[int]:
        return sorted(
            node for node, shelf in self._store.items() if owner in shelf
        )

    def drop(self, node: int, owner: int) -> None:
        self._store.get(node, {}).pop(owner, None)


def locate_checkpoint(
    owner: int,
    store: ReplicaStore,
    alive: set[int],
    prefer: int | None = None,
) -> tuple[int, CheckpointRecord]:
    """Find a live holder of the owner's latest checkpoint, preferring the
    node the process runs on.  Raises when every copy sits on a dead node."""
    candidates = [n for n in store.holders(owner) if n in alive]
    if not candidates:
        raise UnrecoverableError(f"no live copy of process {owner}'s checkpoint")
    freshest = max(store.get(n, owner).index for n in candidates)
    eligible = [n for n in candidates if store.get(n, owner).index == freshest]
    chosen = prefer if prefer in eligible else eligible[0]
    return chosen, store.get(chosen, owner)
