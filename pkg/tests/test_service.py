"""Tests for the HTTP API: tick submission, reads, diagnostics, checkpoints."""

import json

import pytest
from fastapi.testclient import TestClient

from triagelearn.service import EngineConfig, EngineService, build_app


def fig1_tick_body(tick=0):
    events = [
        {"instance_id": "v1", "type_id": "prox", "first_reported": 0, "factors": [1.0, 1.0]},
        {"instance_id": "v2", "type_id": "prox", "first_reported": 0, "factors": [1.0, 0.5]},
        {"instance_id": "v4", "type_id": "prox", "first_reported": 0, "factors": [1.0, 1 / 3]},
        {"instance_id": "v3", "type_id": "prox", "first_reported": 0, "factors": [1.0, 0.25]},
    ]
    return {
        "tick": tick,
        "events": events,
        "sa_priorities": {"v1": 4, "v4": 3, "v2": 2, "v3": 1},
        "resolved": [],
    }


@pytest.fixture
def service(tmp_path):
    config = EngineConfig(
        mode="online",
        history_path=str(tmp_path / "history.jsonl"),
        checkpoint_path=str(tmp_path / "checkpoint.json"),
        diagnostics_path=str(tmp_path / "diagnostics.jsonl"),
        types={"prox": ("const", "proximity")},
    )
    return EngineService(config)


@pytest.fixture
def client(service):
    return TestClient(build_app(service))


class TestReads:
    def test_ranking_empty_before_any_tick(self, client):
        response = client.get("/rankings/current")
        assert response.status_code == 200
        assert response.json() == []

    def test_events_empty_before_any_tick(self, client):
        assert client.get("/events/current").json() == []

    def test_post_then_ranking(self, client):
        post = client.post("/ticks", json=fig1_tick_body())
        assert post.status_code == 200
        report = post.json()
        assert report["tick"] == 0
        assert [e["instance_id"] for e in report["ranking"]][:1] == ["v1"]

        ranking = client.get("/rankings/current").json()
        assert ranking == report["ranking"]

    def test_queue_rows_follow_ranking_and_flags(self, client):
        client.post("/ticks", json=fig1_tick_body())
        rows = client.get("/events/current").json()
        assert [r["instance_id"] for r in rows] == [
            e["instance_id"]
            for e in client.get("/rankings/current").json()
        ]
        flagged = {r["instance_id"] for r in rows if r["flagged"]}
        assert flagged == {"v2", "v4"}
        for r in rows:
            assert r["f_value"] == r["linear_term"] + r["delta"]

    def test_resolved_events_leave_queue(self, client):
        body = fig1_tick_body()
        body["resolved"] = ["v3"]
        client.post("/ticks", json=body)
        rows = client.get("/events/current").json()
        assert "v3" not in {r["instance_id"] for r in rows}
        assert len(rows) == 3


class TestTickValidation:
    def test_wrong_tick_number(self, client):
        body = fig1_tick_body(tick=5)
        response = client.post("/ticks", json=body)
        assert response.status_code == 400
        assert "tick" in response.json()["error"]

    def test_malformed_body(self, client):
        response = client.post("/ticks", json={"events": [{"instance_id": "x"}]})
        assert response.status_code == 400

    def test_unknown_type_rejected_when_not_auto(self, tmp_path):
        config = EngineConfig(
            mode="online",
            history_path=str(tmp_path / "h.jsonl"),
            checkpoint_path=str(tmp_path / "c.json"),
            diagnostics_path=str(tmp_path / "d.jsonl"),
            types={"prox": ("const", "proximity")},
        )
        service = EngineService(config)
        client = TestClient(build_app(service))
        body = fig1_tick_body()
        body["events"][0]["type_id"] = "mystery"
        # service engines auto-register, so this succeeds and learns the schema
        response = client.post("/ticks", json=body)
        assert response.status_code == 200
        assert client.get("/models/mystery").status_code == 200

    def test_busy_signal_when_lock_held(self, service):
        client = TestClient(build_app(service))
        assert service._ingest_lock.acquire(blocking=False)
        try:
            response = client.post("/ticks", json=fig1_tick_body())
            assert response.status_code == 409
        finally:
            service._ingest_lock.release()
        assert client.post("/ticks", json=fig1_tick_body()).status_code == 200

    def test_concurrent_posts_one_wins(self, service):
        import threading

        client = TestClient(build_app(service))
        slow_body = fig1_tick_body()
        results = []

        original = service.engine.ingest_tick

        def slowed(*args, **kwargs):
            import time

            time.sleep(0.2)
            return original(*args, **kwargs)

        service.engine.ingest_tick = slowed

        def submit():
            results.append(client.post("/ticks", json=slow_body).status_code)

        threads = [threading.Thread(target=submit) for _ in range(2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(results) in ([200, 400], [200, 409])
        # 400 arises if the loser ran after the winner committed (stale tick)


class TestDiagnostics:
    def test_delta_breakdown_endpoint(self, client):
        client.post("/ticks", json=fig1_tick_body(0))
        body = fig1_tick_body(1)
        client.post("/ticks", json=body)
        response = client.get("/diagnostics/delta/v4")
        assert response.status_code == 200
        breakdown = response.json()
        assert breakdown["delta"] >= 1
        assert breakdown["omega"] == ["v2"]
        assert set(breakdown) == {
            "lambda_by_tick",
            "theta_by_tick",
            "meta_count",
            "omega",
            "m_value",
            "n_value",
            "delta",
        }

    def test_delta_unknown_instance_404(self, client):
        client.post("/ticks", json=fig1_tick_body())
        assert client.get("/diagnostics/delta/ghost").status_code == 404

    def test_flags_endpoint(self, client):
        client.post("/ticks", json=fig1_tick_body())
        flags = client.get("/diagnostics/flags").json()
        assert flags == {"v1": False, "v2": True, "v3": False, "v4": True}

    def test_model_endpoint(self, client):
        client.post("/ticks", json=fig1_tick_body())
        model = client.get("/models/prox").json()
        assert model["samples_absorbed"] == 4
        assert model["factor_schema"] == ["const", "proximity"]
        assert len(model["coefficients"]) == 2
        assert client.get("/models/nope").status_code == 404


class TestCheckpointEndpoints:
    def test_export_writes_file(self, client, service, tmp_path):
        client.post("/ticks", json=fig1_tick_body())
        response = client.post("/checkpoints/export")
        assert response.status_code == 200
        payload = response.json()
        assert payload["current_tick"] == 0
        on_disk = json.loads(open(service.config.checkpoint_path).read())
        assert on_disk == payload

    def test_merge_endpoint_adopts_bigger_model(self, client, tmp_path):
        client.post("/ticks", json=fig1_tick_body())
        mine = client.post("/checkpoints/export").json()

        other_config = EngineConfig(
            mode="online",
            history_path=str(tmp_path / "other_history.jsonl"),
            checkpoint_path=str(tmp_path / "other_checkpoint.json"),
            diagnostics_path=str(tmp_path / "other_diagnostics.jsonl"),
            types={"prox": ("const", "proximity")},
        )
        other = EngineService(other_config)
        other_client = TestClient(build_app(other))
        for t in range(3):
            body = fig1_tick_body(t)
            if t > 0:
                for e in body["events"]:
                    e["first_reported"] = 0
            other_client.post("/ticks", json=body)
        theirs = other_client.post("/checkpoints/export").json()
        their_samples = theirs["types"]["prox"]["model"]["samples_absorbed"]
        assert their_samples > mine["types"]["prox"]["model"]["samples_absorbed"]

        merged = client.post("/checkpoints/merge", json=theirs).json()
        assert merged["types"]["prox"]["model"]["samples_absorbed"] == their_samples
        model = client.get("/models/prox").json()
        assert model["samples_absorbed"] == their_samples

    def test_merge_rejects_corrupt(self, client):
        client.post("/ticks", json=fig1_tick_body())
        theirs = client.post("/checkpoints/export").json()
        theirs["flags"] = ["tampered"]
        response = client.post("/checkpoints/merge", json=theirs)
        assert response.status_code == 400


class TestPersistence:
    def test_online_ticks_append_history(self, client, service):
        client.post("/ticks", json=fig1_tick_body())
        lines = open(service.config.history_path).read().strip().splitlines()
        assert len(lines) == 1
        assert json.loads(lines[0])["tick"] == 0

    def test_diagnostics_log_one_report_per_tick(self, client, service):
        client.post("/ticks", json=fig1_tick_body())
        body = fig1_tick_body(1)
        client.post("/ticks", json=body)
        lines = open(service.config.diagnostics_path).read().strip().splitlines()
        assert len(lines) == 2
        first = json.loads(lines[0])
        assert set(first) == {"tick", "updated_types", "newly_flagged", "ranking"}
        assert first["newly_flagged"] == ["v2", "v4"]

    def test_batch_and_online_histories_identical(self, tmp_path):
        """The same tick sequence commits byte-identical histories in both modes."""
        import dataclasses

        from triagelearn.service import run_batch
        from triagelearn.simulate import (
            StreamSpec,
            default_oracle,
            generate_stream,
            price_stream,
            save_priced_stream,
        )

        spec = StreamSpec(
            types=1,
            factors_per_type=2,
            ticks=25,
            arrival_rate=1.0,
            resolution_rate=0.3,
            seed=321,
        )
        priced = price_stream(generate_stream(spec), default_oracle(spec))
        stream_path = tmp_path / "stream.jsonl"
        save_priced_stream(priced, stream_path)

        batch_dir = tmp_path / "batch"
        batch_dir.mkdir()
        batch_config = EngineConfig(
            mode="batch",
            history_path=str(batch_dir / "history.jsonl"),
            checkpoint_path=str(batch_dir / "checkpoint.json"),
            diagnostics_path=str(batch_dir / "diagnostics.jsonl"),
        )
        run_batch(batch_config, stream_path, out=lambda *_: None)

        online_dir = tmp_path / "online"
        online_dir.mkdir()
        online_config = dataclasses.replace(
            batch_config,
            mode="online",
            history_path=str(online_dir / "history.jsonl"),
            checkpoint_path=str(online_dir / "checkpoint.json"),
            diagnostics_path=str(online_dir / "diagnostics.jsonl"),
        )
        online = EngineService(online_config)
        online_client = TestClient(build_app(online))
        for pt in priced:
            body = {
                "tick": pt.tick,
                "events": [
                    {
                        "instance_id": e.instance_id,
                        "type_id": e.type_id,
                        "first_reported": e.first_reported,
                        "factors": list(e.factors),
                    }
                    for e in pt.events
                ],
                "sa_priorities": {k: p.value for k, p in pt.sa_priorities.items()},
                "resolved": sorted(pt.resolved),
            }
            assert online_client.post("/ticks", json=body).status_code == 200

        assert (batch_dir / "history.jsonl").read_bytes() == (
            online_dir / "history.jsonl"
        ).read_bytes()
        assert (batch_dir / "diagnostics.jsonl").read_bytes() == (
            online_dir / "diagnostics.jsonl"
        ).read_bytes()

    def test_service_resumes_from_history_and_checkpoint(self, client, service):
        client.post("/ticks", json=fig1_tick_body())
        client.post("/checkpoints/export")
        reborn = EngineService(service.config)
        assert reborn.engine.db.current_tick == 0
        assert reborn.engine.flags.flagged_ids() == {"v2", "v4"}
        ranking = reborn.engine.last_report.ranking
        assert ranking.order() == service.engine.last_report.ranking.order()

    def test_service_resumes_by_replay_without_checkpoint(self, client, service):
        client.post("/ticks", json=fig1_tick_body())
        # no checkpoint written
        reborn = EngineService(service.config)
        assert reborn.engine.db.current_tick == 0
        assert reborn.engine.flags.flagged_ids() == {"v2", "v4"}
        assert (
            reborn.engine.registry.models["prox"].samples_absorbed
            == service.engine.registry.models["prox"].samples_absorbed
        )
