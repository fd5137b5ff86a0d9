import json
from pathlib import Path

import httpx
import pytest
from fastapi.testclient import TestClient

from modgame.app import create_app
from modgame.cli import RunManifest, main

GAMES = Path(__file__).resolve().parents[1] / "games"


def g(name):
    return str(GAMES / name)


def test_eval_example2(tmp_path):
    out = tmp_path / "eval.json"
    code = main(["eval", "--game", g("example2.json"), "--s0", "s0", "--lambda", "0.5", "--out", str(out)])
    assert code == 0
    assert json.loads(out.read_text())["payoffs"]["1"] == pytest.approx(2.0, abs=1e-12)
    man = RunManifest.load(str(out) + ".manifest.json")
    assert man.exit_code == 0 and g("example2.json") in man.inputs and "primary" in man.outputs


def test_values_extrapolate_bigmatch(tmp_path):
    out = tmp_path / "v.json"
    code = main(["values", "--game", g("bigmatch.json"), "--player", "1", "--kind", "maxmin", "--extrapolate", "--out", str(out)])
    assert code == 0
    assert json.loads(out.read_text())["values"]["s0"] == pytest.approx(0.5, abs=1e-2)


def test_classify_bigmatch(tmp_path, capsys):
    assert main(["classify", "--game", g("bigmatch.json"), "--manifest", str(tmp_path / "m.json")]) == 0
    assert json.loads(capsys.readouterr().out)["strongly_controllable"] is True


def test_modified_eval_csv(tmp_path):
    out = tmp_path / "blocks.csv"
    code = main(["modified-eval", "--game", g("example2.json"), "--spec", g("example2.spec.json"), "--format", "csv", "--out", str(out)])
    assert code == 0
    assert out.read_text().splitlines()[0].split(",")[:2] == ["player", "block"]


def test_malformed_json_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    assert main(["validate", "--game", str(bad), "--manifest", str(tmp_path / "m.json")]) == 2
    assert "line 1" in capsys.readouterr().err


def test_invalid_game_exits_2(tmp_path):
    doc = json.loads(Path(g("example2.json")).read_text())
    doc["states"] = ["s0"]
    path = tmp_path / "g.json"
    path.write_text(json.dumps(doc))
    assert main(["validate", "--game", str(path), "--manifest", str(tmp_path / "m.json")]) == 2


def test_bad_lambda_exits_2(tmp_path):
    code = main(["eval", "--game", g("example2.json"), "--s0", "s0", "--lambda", "1.5", "--manifest", str(tmp_path / "m.json")])
    assert code == 2


def test_replay_matches(tmp_path, capsys):
    out = tmp_path / "sim.jsonl"
    argv = ["simulate", "--game", g("bigmatch.json"), "--s0", "s0", "--horizon", "50", "--seed", "4", "--out", str(out)]
    assert main(argv) == 0
    capsys.readouterr()
    assert main(["replay", str(out) + ".manifest.json"]) == 0
    assert "byte-identically" in capsys.readouterr().out


def test_replay_detects_changed_input(tmp_path):
    game = tmp_path / "g.json"
    game.write_text(Path(g("example2.json")).read_text())
    out = tmp_path / "e.json"
    assert main(["eval", "--game", str(game), "--s0", "s0", "--lambda", "0.5", "--out", str(out)]) == 0
    game.write_text(game.read_text() + "\n")
    assert main(["replay", str(out) + ".manifest.json"]) == 3


def test_reproduce_writes_tables(tmp_path):
    out = tmp_path / "ex1"
    assert main(["reproduce", "example1", "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert "manifest.json" in names and len(names) >= 3


def test_coin_run(tmp_path, capsys):
    assert main(["coin-run", "--p", "0.5", "--samples", "5000", "--manifest", str(tmp_path / "m.json")]) == 0
    assert json.loads(capsys.readouterr().out)["report"]


def test_server_thin_client(tmp_path, monkeypatch, capsys):
    client = TestClient(create_app())

    def post(url, json=None, timeout=None):
        return client.post("/" + url.rsplit("/", 1)[1], json=json)

    monkeypatch.setattr(httpx, "post", post)
    base = ["--game", g("example2.json"), "--server", "http://test", "--manifest", str(tmp_path / "m.json")]
    assert main(["eval", "--s0", "s0", "--lambda", "0.5"] + base) == 0
    assert json.loads(capsys.readouterr().out)["payoffs"]["1"] == pytest.approx(2.0)
    # server-side validation failures map to the input exit code
    assert main(["eval", "--s0", "nowhere", "--lambda", "0.5"] + base) == 2


def test_simulate_inline_partition(tmp_path):
    out = tmp_path / "runs.csv"
    argv = ["simulate", "--game", g("bigmatch.json"), "--s0", "s0", "--horizon", "30", "--seed", "1",
            "--partition", '[["s0"], ["s1"], ["s2"]]', "--format", "csv", "--out", str(out)]
    assert main(argv) == 0
    assert out.read_text().splitlines()[0] == "stage,block,run"
