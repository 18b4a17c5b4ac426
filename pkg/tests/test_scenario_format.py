"""Scenario files: parsing, canonical rendering, diagnostics."""

from __future__ import annotations

import pytest

from ckptsim.presets import PRESETS, preset_scenario, random_scenario
from ckptsim.scenario import (
    NetConfig,
    Scenario,
    ScenarioFormatError,
    ScriptAction,
    normalize,
    parse_scenario,
    render_scenario,
    validate_scenario,
)

EXAMPLE = """
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


def test_parse_the_docstring_example():
    sc = parse_scenario(EXAMPLE)
    assert sc.name == "demo"
    assert sc.n == 3
    assert sc.nodes == (0, 1, 2)
    assert sc.net.delay_model == "uniform"
    assert (sc.net.delay_min, sc.net.delay_max) == (1, 4)
    assert sc.net.drop_rate == 0.05
    assert sc.net.rng_seed == 9
    assert sc.script == (
        ScriptAction(50, "send", pid=0, dest=2),
        ScriptAction(120, "round"),
        ScriptAction(300, "crash", node=1),
    )


def test_comments_and_blank_lines_are_ignored():
    sc = parse_scenario("name = x\n\n# note\n[system]\nprocesses = 2  # inline\n")
    assert sc.n == 2


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_round_trip_through_the_text_form(name):
    sc = preset_scenario(name)
    assert parse_scenario(render_scenario(sc)) == normalize(sc)


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("with_crash", [False, True])
def test_generated_scenarios_round_trip(seed, with_crash):
    sc = random_scenario(seed, with_crash=with_crash)
    assert parse_scenario(render_scenario(sc)) == normalize(sc)
    assert not validate_scenario(sc)


def test_rendering_is_stable():
    sc = preset_scenario("paper-fig4")
    once = render_scenario(sc)
    assert render_scenario(parse_scenario(once)) == once


def test_generated_scenarios_respect_the_advertised_bounds():
    for seed in range(60):
        sc = random_scenario(seed, with_crash=seed % 2 == 0)
        assert 2 <= sc.n <= 6
        assert sum(1 for a in sc.script if a.kind == "send") <= 20
        assert sc.net.ack_timeout > sc.net.delay_max


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("[bogus]\n", "unknown section"),
        ("name demo\n", "expected 'key = value'"),
        ("stray = 1\n", "before any section"),
        ("[system]\nweird = 1\n", "unknown system key"),
        ("[system]\nprocesses = many\n", "expected an integer"),
        ("[nodes]\nlinks = 1:2\n", "bad link"),
        ("[groups]\ntmr 1 = 1 2\n", "exactly three members"),
        ("[groups]\ngrp 1 = 1 2 3\n", "tmr <id> = m p s"),
        ("[net]\ndelay = sometimes\n", "'fixed D' or 'uniform LO HI'"),
        ("[net]\nwarp = 1\n", "unknown net key"),
        ("[script]\nsend 0 -> 1\n", "start with 'at"),
        ("[script]\nat 5 send 0 1\n", "at T send A -> B"),
        ("[script]\nat 5 round now\n", "round takes no arguments"),
        ("[script]\nat 5 crash\n", "at T crash NODE"),
        ("[script]\nat 5 explode 1\n", "unknown script action"),
    ],
)
def test_parse_diagnostics_name_the_offending_line(text, fragment):
    with pytest.raises(ScenarioFormatError) as err:
        parse_scenario(text)
    diags = err.value.diagnostics
    assert any(fragment in msg for _, msg in diags)
    assert all(ln >= 1 for ln, _ in diags)  # parse errors carry line numbers


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("[system]\nprocesses = 1\n", "at least 2 processes"),
        ("[system]\nprocesses = 3\n[nodes]\nids = 7 7 8\n", "distinct"),
        ("[system]\nprocesses = 3\n[nodes]\nids = 7 8\n", "node ids for"),
        ("[system]\ninitiator = lottery\n", "unknown initiator policy"),
        ("[system]\ninitiator = tmr-mains\n", "needs groups"),
        ("[net]\ndrop = 1.5\n", "in [0, 1)"),
        ("[net]\nack_timeout = 2\ndelay = fixed 5\n", "exceed the maximum delay"),
        ("[script]\nat 5 send 0 -> 0\n", "its own sender"),
        ("[script]\nat 5 send 0 -> 9\n", "unknown processes"),
        ("[script]\nat 5 crash 9\n", "undeclared node"),
        ("[script]\nat -5 round\n", "negative"),
    ],
)
def test_structural_problems_are_reported(text, fragment):
    with pytest.raises(ScenarioFormatError) as err:
        parse_scenario(text)
    assert fragment in str(err.value)


def test_validate_catches_problems_a_parser_never_produces():
    base = Scenario(n=3, nodes=(1, 2, 3))
    assert validate_scenario(base) == []
    bad_net = Scenario(net=NetConfig(delay_model="fixed", delay_min=1, delay_max=2))
    assert any("equal bounds" in e for e in validate_scenario(bad_net))
    neg_retry = Scenario(net=NetConfig(retry_limit=-1))
    assert any("retry_limit" in e for e in validate_scenario(neg_retry))
    self_link = Scenario(n=2, nodes=(1, 2), links=((1, 1),))
    assert any("joins a node to itself" in e for e in validate_scenario(self_link))
    dup_gid = Scenario(
        n=6,
        nodes=(1, 2, 3, 4, 5, 6),
        groups=((1, 1, 2, 3), (1, 4, 5, 6)),
    )
    assert any("duplicate group id" in e for e in validate_scenario(dup_gid))
    stranger = Scenario(n=3, nodes=(1, 2, 3), groups=((1, 1, 2, 9),))
    assert any("not a declared node" in e for e in validate_scenario(stranger))
    unlinked = Scenario(
        n=3, nodes=(1, 2, 3), groups=((1, 1, 2, 3),), links=((1, 2), (1, 3))
    )
    assert any("not linked" in e for e in validate_scenario(unlinked))
    bad_budget = Scenario(step_budget=0)
    assert any("step_budget" in e for e in validate_scenario(bad_budget))
    bad_latency = Scenario(detection_latency=0)
    assert any("detection_latency" in e for e in validate_scenario(bad_latency))


def test_group_members_need_pairwise_links_only_when_links_are_declared():
    grouped = Scenario(
        n=3,
        nodes=(1, 2, 3),
        groups=((1, 1, 2, 3),),
        links=((1, 2), (1, 3), (2, 3)),
    )
    assert validate_scenario(grouped) == []
    no_links = Scenario(n=3, nodes=(1, 2, 3), groups=((1, 1, 2, 3),))
    assert validate_scenario(no_links) == []


def test_node_of_maps_process_to_host():
    sc = normalize(Scenario(n=3, nodes=(7, 8, 9)))
    assert [sc.node_of(p) for p in range(3)] == [7, 8, 9]


def test_error_string_concatenates_line_diagnostics():
    err = ScenarioFormatError([(4, "first"), (9, "second")])
    assert str(err) == "line 4: first; line 9: second"
    assert str(ScenarioFormatError([])) == "invalid scenario"
