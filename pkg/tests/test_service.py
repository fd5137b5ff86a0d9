import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from modgame.app import create_app

GAMES = Path(__file__).resolve().parents[1] / "games"


def load(name):
    return json.loads((GAMES / name).read_text())


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_health(client):
    assert client.get("/health").json()["status"] == "ok"


def test_validate_route(client):
    r = client.post("/validate", json={"game": load("bigmatch.json")})
    assert r.status_code == 200 and r.json()["valid"]


def test_eval_route(client):
    r = client.post("/eval", json={"game": load("example2.json"), "s0": "s0", "lambda": 0.5})
    assert r.status_code == 200
    assert r.json()["payoffs"]["1"] == pytest.approx(2.0, abs=1e-12)


def test_modified_eval_route(client):
    body = {"game": load("example2.json"), "spec": load("example2.spec.json")}
    r = client.post("/modified-eval", json=body)
    assert r.status_code == 200
    # s1 contributes 6 * 1/3 = 2 before the cap 4 * 1/3
    assert r.json()["modified"]["1"] == pytest.approx(4 / 3, abs=1e-12)
    assert r.json()["discounted"]["1"] == pytest.approx(2.0, abs=1e-12)


def test_values_extrapolate_route(client):
    body = {"game": load("bigmatch.json"), "player": "1", "kind": "maxmin", "extrapolate": True}
    r = client.post("/values", json=body)
    assert r.status_code == 200
    assert r.json()["values"]["s0"] == pytest.approx(0.5, abs=1e-2)


def test_classify_route(client):
    r = client.post("/classify", json={"game": load("bigmatch.json")})
    assert r.status_code == 200 and r.json()["strongly_controllable"]


def test_schema_error_is_422(client):
    r = client.post("/eval", json={"game": load("example2.json")})
    assert r.status_code == 422 and r.json()["error"] == "validation"


def test_semantic_error_is_422(client):
    bad = load("example2.json")
    bad["states"] = ["s0"]
    r = client.post("/eval", json={"game": bad, "s0": "s0", "lambda": 0.5})
    assert r.status_code == 422 and r.json()["error"] == "validation"


def test_unknown_state_is_422(client):
    r = client.post("/eval", json={"game": load("example2.json"), "s0": "nowhere", "lambda": 0.5})
    assert r.status_code == 422


def test_coin_route(client):
    r = client.post("/coin-run", json={"p": 0.5, "samples": 2000, "seed": 1})
    assert r.status_code == 200 and "report" in r.json()
