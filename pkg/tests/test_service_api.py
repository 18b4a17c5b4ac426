"""HTTP surface: request validation, golden run payloads, error mapping."""

from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from ckptsim.presets import preset_scenario
from ckptsim.scenario import normalize, parse_scenario, render_scenario
from ckptsim.service import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_preset_listing_is_sorted_and_complete(client):
    r = client.get("/presets")
    assert r.status_code == 200
    names = [p["name"] for p in r.json()]
    assert names == sorted(names)
    assert set(names) == {"paper-5proc", "paper-fig4", "demo-chaos"}
    assert all(p["description"] for p in r.json())


def test_preset_detail_carries_a_parseable_scenario(client):
    r = client.get("/presets/paper-fig4")
    assert r.status_code == 200
    body = r.json()
    assert parse_scenario(body["scenario"]) == normalize(preset_scenario("paper-fig4"))


def test_unknown_preset_is_404(client):
    r = client.get("/presets/nope")
    assert r.status_code == 404
    assert "unknown preset" in r.json()["detail"]


class TestRunEndpoint:
    def test_golden_preset_run(self, client):
        r = client.post("/runs", json={"preset": "paper-5proc"})
        assert r.status_code == 200
        body = r.json()
        assert body["exit_code"] == 0
        assert body["outcome"] == "ok"
        assert body["committed"] == {str(p): 1 for p in range(5)}
        (ep,) = body["episodes"]
        assert ep["rollback_set"] == [0, 1, 2]
        assert ep["spared"] == 2
        assert ep["takeovers"] == [[2, 2]]
        reasons = {v["pid"]: v["reason"] for v in ep["verdicts"]}
        assert reasons == {0: "indirect", 1: "direct", 2: "is-faulty",
                           3: "not-dependent", 4: "not-dependent"}
        paths = {v["pid"]: v["path"] for v in ep["verdicts"]}
        assert paths[0] == [1, 2] and paths[1] == [2]
        assert all(iv["consistent"] for iv in body["intervals"])
        assert body["violations"] == []
        assert "ev=commit" in body["trace"]
        assert "rollback-set: 0-1-2" in body["report"]

    def test_replicated_preset_run(self, client):
        r = client.post("/runs", json={"preset": "paper-fig4"})
        body = r.json()
        (ep,) = body["episodes"]
        assert ep["dead_node"] == 3
        assert ep["takeovers"] == [[2, 4]]

    def test_inline_scenario_with_seed_override(self, client):
        text = render_scenario(preset_scenario("demo-chaos"))
        r = client.post("/runs", json={"scenario": text, "seed": 42})
        assert r.status_code == 200
        assert r.json()["seed"] == 42
        assert r.json()["exit_code"] == 0

    def test_step_budget_override_reports_a_livelock(self, client):
        r = client.post("/runs", json={"preset": "demo-chaos", "step_budget": 45})
        assert r.status_code == 200
        assert r.json()["exit_code"] == 2
        assert r.json()["outcome"] == "livelock"

    def test_neither_input_is_422(self, client):
        r = client.post("/runs", json={})
        assert r.status_code == 422
        assert r.json()["detail"] == "give exactly one of 'preset' or 'scenario'"

    def test_both_inputs_is_422(self, client):
        r = client.post("/runs", json={"preset": "paper-5proc", "scenario": "name = x"})
        assert r.status_code == 422

    def test_unknown_preset_run_is_404(self, client):
        r = client.post("/runs", json={"preset": "nope"})
        assert r.status_code == 404

    def test_bad_scenario_text_maps_to_line_diagnostics(self, client):
        r = client.post("/runs", json={"scenario": "[system]\nprocesses = potato\n"})
        assert r.status_code == 422
        detail = r.json()["detail"]
        assert isinstance(detail, list)
        assert detail[0]["line"] == 2
        assert "expected an integer" in detail[0]["message"]

    def test_unsupported_failure_pattern_is_422_not_500(self, client):
        text = "\n".join([
            "name = overlap",
            "[system]",
            "processes = 3",
            "[net]",
            "delay = fixed 2",
            "ack_timeout = 12",
            "[script]",
            "at 40 crash 1",
            "at 42 crash 2",
        ])
        r = client.post("/runs", json={"scenario": text})
        assert r.status_code == 422
        assert "still being resolved" in r.json()["detail"]

    def test_zero_step_budget_is_rejected_by_the_model(self, client):
        r = client.post("/runs", json={"preset": "paper-5proc", "step_budget": 0})
        assert r.status_code == 422


def test_fuzz_endpoint_runs_a_batch(client):
    r = client.post("/fuzz", json={"count": 5, "seed": 3, "crash": True})
    assert r.status_code == 200
    body = r.json()
    assert body["total"] == 5
    assert body["passed"] == 5
    assert body["livelocked"] == 0
    assert body["failed"] == []
    assert body["exit_code"] == 0


def test_fuzz_count_bounds_are_enforced(client):
    assert client.post("/fuzz", json={"count": 0}).status_code == 422
    assert client.post("/fuzz", json={"count": 10_001}).status_code == 422


class TestValidateEndpoint:
    def test_good_scenario_returns_the_canonical_form(self, client):
        sc = preset_scenario("paper-5proc")
        r = client.post("/scenarios/validate",
                        json={"scenario": render_scenario(sc)})
        assert r.status_code == 200
        body = r.json()
        assert body["ok"] is True
        assert body["diagnostics"] == []
        assert parse_scenario(body["canonical"]) == normalize(sc)

    def test_bad_scenario_returns_diagnostics(self, client):
        r = client.post("/scenarios/validate",
                        json={"scenario": "[script]\nat 5 send 0 -> 0\n"})
        body = r.json()
        assert body["ok"] is False
        assert body["canonical"] is None
        assert any("its own sender" in d["message"] for d in body["diagnostics"])
