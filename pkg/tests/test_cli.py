import json
import shutil
from pathlib import Path

import pytest

from pmarb.cli import main
from pmarb.mockvenue import MockVenue, book_payload

FIXTURE = Path(__file__).resolve().parent / "golden" / "fixture"
SMALL_SPEC = {
    "seed": 9,
    "pre_game_s": 300,
    "in_game_s": 900,
    "post_game_s": 200,
    "results": [1],
    "injections": [
        {"game": 0, "target": "moneyline", "phase": "in_game", "start_offset_s": 100, "sweeps": 2, "edge_ticks": 2},
        {"game": 0, "target": "combo:0", "phase": "in_game", "start_offset_s": 400, "sweeps": 3, "edge_ticks": 1},
    ],
}


@pytest.fixture
def spec_file(tmp_path):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(SMALL_SPEC))
    return p


def test_empty_directory_gives_empty_report(tmp_path):
    (tmp_path / "in").mkdir()
    assert main(["scan-single", "--input", str(tmp_path / "in"), "--out", str(tmp_path / "out")]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["counts"]["active_episodes"] == 0


def test_corrupt_log_is_a_data_error(tmp_path, capsys):
    shutil.copy(FIXTURE / "synth-2026-g000.meta.json", tmp_path / "g.meta.json")
    (tmp_path / "g.jsonl").write_text('{"format":"pmarb.l1","version":1,"slug":"x"}\nnot json\n')
    assert main(["scan-single", "--input", str(tmp_path), "--out", str(tmp_path / "o")]) == 1
    assert "g.jsonl:2" in capsys.readouterr().err


def test_missing_sidecar_exit_code_names_slug(tmp_path, capsys):
    shutil.copy(FIXTURE / "synth-2026-g000.jsonl", tmp_path / "nba-lal-bos.jsonl")
    assert main(["scan-combo", "--input", str(tmp_path), "--out", str(tmp_path / "o")]) == 2
    assert "nba-lal-bos" in capsys.readouterr().err


def test_bad_flags_are_config_errors(tmp_path):
    args = ["scan-single", "--input", str(FIXTURE), "--out", str(tmp_path)]
    assert main(args + ["--budget", "-5"]) == 2
    assert main(args + ["--budget", "abc"]) == 2
    assert main(args + ["--ceiling-in", "0"]) == 2


def test_synth_then_scan_matches_manifest(tmp_path, spec_file):
    assert main(["synth", str(spec_file), "--out", str(tmp_path / "logs")]) == 0
    manifest = json.loads((tmp_path / "logs" / "manifest.json").read_text())["episodes"]
    assert main(["scan-single", "--input", str(tmp_path / "logs"), "--out", str(tmp_path / "s")]) == 0
    assert main(["scan-combo", "--input", str(tmp_path / "logs"), "--out", str(tmp_path / "c")]) == 0
    eps = json.loads((tmp_path / "s" / "report.json").read_text())["episodes"]
    combo = json.loads((tmp_path / "c" / "report.json").read_text())
    eps += combo["episodes"]
    assert sorted((e["key"], e["start"]) for e in eps) == sorted((m["key"], m["start_ts"]) for m in manifest)
    assert combo["jackpot_audit"]["jackpots"] == 1


def test_synth_seed_determinism(tmp_path, spec_file):
    main(["synth", str(spec_file), "--out", str(tmp_path / "a")])
    main(["synth", str(spec_file), "--out", str(tmp_path / "b")])
    main(["synth", str(spec_file), "--out", str(tmp_path / "c"), "--seed", "10"])
    name = "synth-9-g000.jsonl"
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert not (tmp_path / "c" / name).exists()


def test_invalid_spec_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"seed": 1, "injections": [{"game": 0, "target": "moneyline", "phase": "overtime"}]}))
    assert main(["synth", str(bad), "--out", str(tmp_path / "o")]) == 2
    bad.write_text(json.dumps({"seed": 1, "colour": "red"}))
    assert main(["synth", str(bad), "--out", str(tmp_path / "o")]) == 2
    bad.write_text("[1, 2")
    assert main(["synth", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_parallel_jobs_give_identical_reports(tmp_path):
    base = ["scan-single", "--input", str(FIXTURE)]
    assert main(base + ["--out", str(tmp_path / "one")]) == 0
    assert main(base + ["--out", str(tmp_path / "two"), "--jobs", "2"]) == 0
    for f in (tmp_path / "one").iterdir():
        assert f.read_bytes() == (tmp_path / "two" / f.name).read_bytes()


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('budget_usdc = "50"\nliquidity_floor_usdc = "5"\n')
    args = ["scan-single", "--input", str(FIXTURE), "--out", str(tmp_path / "o"), "--config", str(cfg), "--budget", "20"]
    assert main(args) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["config"]["budget_usdc"] == "20"
    assert report["config"]["liquidity_floor_usdc"] == "5"


def test_collect_against_mock_venue(tmp_path):
    meta = json.loads((FIXTURE / "synth-2026-g000.meta.json").read_text())
    (tmp_path / f"{meta['slug']}.meta.json").write_text(json.dumps(meta))
    tokens = [t for m in meta["markets"] for t in m["tokens"]]
    script = {t: [book_payload(t, [("0.40", "10")], [("0.60", "10")], f"{t}-h")] for t in tokens}
    with MockVenue(script) as v:
        rc = main(["collect", "--endpoint", v.url, "--slugs", meta["slug"], "--out", str(tmp_path), "--interval", "0,0", "--max-sweeps", "3"])
    assert rc == 0
    lines = (tmp_path / f"{meta['slug']}.jsonl").read_text().splitlines()
    assert len(lines) == 1 + len(tokens)


def test_collect_unreachable_exit_3(tmp_path):
    meta = json.loads((FIXTURE / "synth-2026-g000.meta.json").read_text())
    (tmp_path / f"{meta['slug']}.meta.json").write_text(json.dumps(meta))
    rc = main(["collect", "--endpoint", "http://127.0.0.1:9", "--slugs", meta["slug"], "--out", str(tmp_path), "--interval", "0,0"])
    assert rc == 3


def test_collect_missing_sidecar(tmp_path, capsys):
    assert main(["collect", "--endpoint", "http://127.0.0.1:9", "--slugs", "nba-x", "--out", str(tmp_path)]) == 2
    assert "nba-x" in capsys.readouterr().err
