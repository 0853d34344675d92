import json
from datetime import datetime, timedelta

import numpy as np
import pytest
from fastapi.testclient import TestClient

from driftlearn.engine import AutoPolicy, Engine
from driftlearn.nets import TrainConfig
from driftlearn.novelty import Threshold
from driftlearn.service import create_app
from driftlearn.strategies import StrategySpec


@pytest.fixture
def engine():
    eng = Engine(3, ["y0"], seed=0, latent_dim=4, hidden=8,
                 novelty_capacity=3,
                 strategy=StrategySpec(kind="naive", train=TrainConfig(epochs=2, seed=0)),
                 auto_policy=AutoPolicy(enabled=False),
                 threshold=Threshold(0.05))
    eng.blocks["ae"].threshold = Threshold(1e9)
    return eng


@pytest.fixture
def client(engine):
    return TestClient(create_app(engine))


def ingest_payload(i, engine, novel=False):
    vec = np.random.default_rng(i).random(3)
    pred = engine.regressor.predict(vec)["y0"]
    y = (0.0 if pred > 0.5 else 1.0) if novel else float(np.clip(pred, 0, 1))
    ts = (datetime(2021, 1, 1) + timedelta(hours=i)).isoformat()
    return {"x": vec.tolist(), "y": {"y0": y}, "timestamp": ts}


def drive_to_pending(client, engine, start=0):
    for i in range(start, start + 50):
        client.post("/ingest", json=ingest_payload(i, engine, novel=True))
        if client.get("/state").json()["mode"]["state"] == "awaiting_decision":
            return client.get("/state").json()
    raise AssertionError("no pending update")


def test_state_on_fresh_instance(client):
    state = client.get("/state").json()
    assert state["mode"]["state"] == "running"
    assert all(b["novelty"]["fill"] == 0 for b in state["blocks"])
    assert state["pending_update"] is None
    assert state["version"] == 0


def test_ingest_and_score_events(client, engine):
    r = client.post("/ingest", json=ingest_payload(0, engine))
    assert r.status_code == 200
    assert r.json()["accepted"]
    state = client.get("/state").json()
    assert state["ingested"] == 1


def test_malformed_ingest_is_400_with_fields(client):
    r = client.post("/ingest", json={"x": "nope"})
    assert r.status_code == 400
    body = r.json()
    assert body["error"] == "ValidationError"
    assert any(f["field"].startswith("x") for f in body["fields"])


def test_decision_round_trip(client, engine):
    state = drive_to_pending(client, engine)
    uid = state["pending_update"]["update_id"]
    versions_before = state["version_count"]
    r = client.post("/decisions", json={"update_id": uid, "verdict": "accept"})
    assert r.status_code == 200
    after = client.get("/state").json()
    assert after["version_count"] == versions_before + 1
    block = next(b for b in after["blocks"] if b["id"] == "p_y0")
    assert block["familiarity"]["fill"] == 0
    assert after["pending_update"] is None


def test_decision_conflict_is_409(client, engine):
    state = drive_to_pending(client, engine)
    uid = state["pending_update"]["update_id"]
    assert client.post("/decisions",
                       json={"update_id": uid, "verdict": "reject"}).status_code == 200
    r = client.post("/decisions", json={"update_id": uid, "verdict": "accept"})
    assert r.status_code == 409


def test_unknown_update_is_404(client):
    r = client.post("/decisions", json={"update_id": 123, "verdict": "accept"})
    assert r.status_code == 404


def test_rollback_endpoint(client, engine):
    state = drive_to_pending(client, engine)
    uid = state["pending_update"]["update_id"]
    client.post("/decisions", json={"update_id": uid, "verdict": "accept"})
    r = client.post("/rollback", json={"version": 0})
    assert r.status_code == 200
    assert r.json()["rolled_back_to"] == 0
    r = client.post("/rollback", json={"version": 999})
    assert r.status_code == 404


def test_hyperparameter_patch_and_validation(client):
    r = client.patch("/hyperparameters",
                     json={"blocks": {"p_y0": {"threshold_value": 0.25}}})
    assert r.status_code == 200
    assert r.json()["applied"]["p_y0.threshold_value"]["new"] == 0.25
    state = client.get("/state").json()
    block = next(b for b in state["blocks"] if b["id"] == "p_y0")
    assert block["threshold"]["value"] == 0.25
    r = client.patch("/hyperparameters",
                     json={"blocks": {"p_y0": {"strategy": {"lambda": -5}}}})
    assert r.status_code == 400


def test_target_addition_endpoint(client, engine):
    warmup = [ingest_payload(i, engine) for i in range(10)]
    for w in warmup:
        w["y"] = {"pv": 0.4}
    r = client.post("/targets", json={"target_id": "pv", "warmup_samples": warmup})
    assert r.status_code == 200
    assert "pv" in r.json()["targets"]
    assert client.post("/targets", json={"target_id": "pv"}).status_code == 409


def test_metrics_endpoint(client, engine):
    client.post("/ingest", json=ingest_payload(0, engine))
    r = client.get("/metrics")
    assert r.status_code == 200
    body = r.json()
    assert {b["block_id"] for b in body["blocks"]} == {"ae", "p_y0"}
    assert 0.0 <= body["cl_score"]["fused"] <= 1.0


def parse_sse(text):
    events = []
    for chunk in text.split("\n\n"):
        lines = [ln for ln in chunk.splitlines() if ln and not ln.startswith(":")]
        if not lines:
            continue
        fields = {}
        for ln in lines:
            key, _, value = ln.partition(": ")
            fields.setdefault(key, value)
        if "data" in fields:
            events.append(json.loads(fields["data"]))
    return events


def collect_events(client, since=0, headers=None):
    # follow=false closes the stream once it has caught up with the log
    r = client.get(f"/events?since={since}&follow=false", headers=headers or {})
    assert r.status_code == 200
    assert r.headers["content-type"].startswith("text/event-stream")
    return parse_sse(r.text)


def test_event_stream_resume_no_gaps_no_duplicates(client, engine):
    for i in range(4):
        client.post("/ingest", json=ingest_payload(i, engine))
    total = client.get("/state").json()["seq"]

    first = collect_events(client, since=0)
    assert first, "stream yielded nothing"
    cut = first[len(first) // 2]["seq"]

    resumed = collect_events(client, since=cut)
    seqs = [e["seq"] for e in first if e["seq"] <= cut] + [e["seq"] for e in resumed]
    # resume-from-sequence replays exactly the missed suffix
    assert sorted(set(seqs)) == list(range(1, max(seqs) + 1))
    assert len(seqs) == len(set(seqs))

    via_header = collect_events(client, since=0, headers={"Last-Event-ID": str(cut)})
    assert min(e["seq"] for e in via_header) == cut + 1
    assert max(e["seq"] for e in via_header) >= total * 0  # stream reached the log


def test_every_state_transition_has_an_event(client, engine):
    drive_to_pending(client, engine)
    state = client.get("/state").json()
    uid = state["pending_update"]["update_id"]
    client.post("/decisions", json={"update_id": uid, "verdict": "accept"})
    log = collect_events(client, since=0)
    types = [e["type"] for e in log]
    assert "update_triggered" in types
    assert "update_proposed" in types
    assert "decision" in types
    assert "version_created" in types
    seqs = [e["seq"] for e in log]
    assert seqs == sorted(seqs)
