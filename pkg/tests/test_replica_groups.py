"""Replica groups: role chains, promotions, copy placement, lookup."""

from __future__ import annotations

import itertools

import pytest

from ckptsim.core import CheckpointRecord, StatusVector
from ckptsim.tmr import (
    GroupDeadError,
    ReplicaStore,
    TmrError,
    TmrGroup,
    TmrRole,
    UnrecoverableError,
    choose_takeover_group,
    handle_member_failure,
    locate_checkpoint,
    replication_targets,
    takeover,
)


def _record(owner, index):
    return CheckpointRecord(owner, index, b"s", StatusVector.zero(owner, 2))


def test_group_validation():
    with pytest.raises(TmrError):
        TmrGroup(1, 5, 5, 6)  # duplicate member
    with pytest.raises(TmrError):
        TmrGroup(1, 5, None, 6)  # secondary without primary
    with pytest.raises(TmrError):
        TmrGroup(1, 5, 6, None, dead=(5,))  # dead node still in the chain


def test_group_modes():
    assert TmrGroup(1, 5, 6, 7).mode == "tmr"
    assert TmrGroup(1, 5, 6).mode == "dmr"
    assert TmrGroup(1, 5).mode == "lone"


def test_role_lookup():
    g = TmrGroup(1, 5, 6, 7)
    assert g.role_of(5) is TmrRole.MAIN
    assert g.role_of(6) is TmrRole.PRIMARY
    assert g.role_of(7) is TmrRole.SECONDARY
    assert g.role_of(8) is None


def test_replication_target_table():
    g = TmrGroup(1, 5, 6, 7)
    assert replication_targets(g, 5) == [6]  # main to primary
    assert replication_targets(g, 6) == [5]  # primary to main
    assert replication_targets(g, 7) == [5, 6]  # secondary to both seniors
    with pytest.raises(TmrError):
        replication_targets(g, 8)
    assert replication_targets(TmrGroup(1, 5), 5) == []  # lone main, nowhere


def test_failing_the_main_promotes_the_juniors():
    g = TmrGroup(1, 5, 6, 7)
    g2, promos = handle_member_failure(g, 5)
    assert promos == [(6, TmrRole.MAIN), (7, TmrRole.PRIMARY)]
    assert (g2.main, g2.primary, g2.secondary) == (6, 7, None)
    assert g2.dead == (5,)
    assert g2.mode == "dmr"


def test_failing_the_primary_promotes_only_the_secondary():
    g = TmrGroup(1, 5, 6, 7)
    g2, promos = handle_member_failure(g, 6)
    assert promos == [(7, TmrRole.PRIMARY)]
    assert (g2.main, g2.primary, g2.secondary) == (5, 7, None)


def test_failing_the_secondary_promotes_nobody():
    g = TmrGroup(1, 5, 6, 7)
    g2, promos = handle_member_failure(g, 7)
    assert promos == []
    assert (g2.main, g2.primary, g2.secondary) == (5, 6, None)


def test_every_two_failure_order_leaves_a_lone_main():
    for first, second in itertools.permutations((5, 6, 7), 2):
        g = TmrGroup(1, 5, 6, 7)
        g, _ = handle_member_failure(g, first)
        g, _ = handle_member_failure(g, second)
        assert g.mode == "lone"
        survivor = ({5, 6, 7} - {first, second}).pop()
        assert g.main == survivor
        assert g.primary is None and g.secondary is None
        assert set(g.dead) == {first, second}


def test_third_failure_kills_the_group():
    for order in itertools.permutations((5, 6, 7)):
        g = TmrGroup(1, 5, 6, 7)
        g, _ = handle_member_failure(g, order[0])
        g, _ = handle_member_failure(g, order[1])
        with pytest.raises(GroupDeadError):
            handle_member_failure(g, order[2])


def test_failure_of_a_stranger_or_repeat_failure_is_an_error():
    g = TmrGroup(1, 5, 6, 7)
    with pytest.raises(TmrError):
        handle_member_failure(g, 9)
    g2, _ = handle_member_failure(g, 7)
    with pytest.raises(TmrError):
        handle_member_failure(g2, 7)


def test_takeover_goes_to_the_group_with_the_most_senior_role():
    # Chained layout: node 3 tops group 2 but only backs up group 1.
    groups = [TmrGroup(1, 1, 2, 3), TmrGroup(2, 3, 4, 5), TmrGroup(3, 4, 5, 6)]
    assert choose_takeover_group(groups, 3) == 2
    assert choose_takeover_group(groups, 4) == 3  # main of 3 beats primary of 2
    assert choose_takeover_group(groups, 1) == 1
    assert choose_takeover_group(groups, 9) is None


def test_takeover_tie_breaks_on_lowest_group_id():
    groups = [TmrGroup(4, 8, 1, 2), TmrGroup(2, 8, 3, 4)]
    assert choose_takeover_group(groups, 8) == 2


def test_takeover_lands_on_the_promoted_main():
    g, _ = handle_member_failure(TmrGroup(1, 5, 6, 7), 5)
    assert takeover(5, g) == 6
    with pytest.raises(TmrError):
        takeover(7, g)  # node 7 has not failed


def test_store_keeps_only_the_freshest_copy_per_owner():
    store = ReplicaStore()
    assert store.put(5, _record(0, 1))
    assert not store.put(5, _record(0, 0))  # stale arrival ignored
    assert store.get(5, 0).index == 1
    assert store.put(5, _record(0, 2))
    assert store.get(5, 0).index == 2


def test_store_holders_are_sorted_and_droppable():
    store = ReplicaStore()
    store.put(7, _record(0, 1))
    store.put(5, _record(0, 1))
    store.put(6, _record(1, 1))
    assert store.holders(0) == [5, 7]
    store.drop(7, 0)
    assert store.holders(0) == [5]
    store.drop(7, 0)  # idempotent


def test_locate_prefers_the_hosting_node():
    store = ReplicaStore()
    store.put(5, _record(0, 3))
    store.put(6, _record(0, 3))
    node, rec = locate_checkpoint(0, store, alive={5, 6}, prefer=6)
    assert node == 6 and rec.index == 3


def test_locate_prefers_freshness_over_the_hosting_node():
    store = ReplicaStore()
    store.put(5, _record(0, 4))
    store.put(6, _record(0, 3))  # the preferred node only has an old copy
    node, rec = locate_checkpoint(0, store, alive={5, 6}, prefer=6)
    assert node == 5 and rec.index == 4


def test_locate_skips_dead_holders():
    store = ReplicaStore()
    store.put(5, _record(0, 4))
    store.put(6, _record(0, 3))
    node, rec = locate_checkpoint(0, store, alive={6})
    assert node == 6 and rec.index == 3


def test_locate_breaks_ties_on_the_lowest_node_id():
    store = ReplicaStore()
    store.put(9, _record(0, 2))
    store.put(4, _record(0, 2))
    node, _ = locate_checkpoint(0, store, alive={4, 9})
    assert node == 4


def test_locate_fails_when_every_copy_is_dead():
    store = ReplicaStore()
    store.put(5, _record(0, 1))
    with pytest.raises(UnrecoverableError):
        locate_checkpoint(0, store, alive={6, 7})
    with pytest.raises(UnrecoverableError):
        locate_checkpoint(3, store, alive={5})  # never checkpointed at all
