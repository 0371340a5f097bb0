import json

import pytest

from pmarb.ingest import (
    UNREPORTED,
    LogFormatError,
    MissingSidecarError,
    UnknownTokenError,
    read_log,
    write_log,
)
from pmarb.model import FinalResult
from pmarb.synth import ScenarioSpec, generate

from helpers import bundle, moneyline, rec, schedule, spread

META = {
    "slug": "g",
    "tip_off": "2026-02-04T23:16:40.000000Z",
    "physical_end": "2026-02-05T01:46:40.000000Z",
    "markets": [{"id": "m1", "kind": "moneyline", "tokens": ["a", "b"]}],
}


def _write(tmp_path, lines, meta=META):
    log = tmp_path / "g.jsonl"
    log.write_text("".join(json.dumps(x) + "\n" for x in lines))
    (tmp_path / "g.meta.json").write_text(json.dumps(meta))
    return log


def _line(token, ts, h, bid="0.48", ask="0.52"):
    return {"slug": "g", "market": "m1", "token": token, "ts": ts, "bid": bid, "bid_sz": "100", "ask": ask, "ask_sz": "100", "hash": h}


def test_three_line_log(tmp_path):
    path = _write(
        tmp_path,
        [
            _line("a", "2026-02-04T23:00:00.000000Z", "h1"),
            _line("b", "2026-02-04T23:00:00.010000Z", "h2"),
            _line("a", "2026-02-04T23:00:04.000000Z", "h3"),
        ],
    )
    b = read_log(path)
    assert len(b.records) == 3
    assert b.dedup_dropped == 0
    assert b.records[0].bid.price == 480_000


def test_price_out_of_range_reports_line(tmp_path):
    path = _write(tmp_path, [_line("a", "2026-02-04T23:00:00Z", "h1"), _line("b", "2026-02-04T23:00:01Z", "h2", ask="1.25")])
    with pytest.raises(LogFormatError, match=r"g.jsonl:2: price out of \(0,1\)"):
        read_log(path)


def test_duplicate_hash_dropped(tmp_path):
    path = _write(tmp_path, [_line("a", "2026-02-04T23:00:00Z", "h1"), _line("a", "2026-02-04T23:00:04Z", "h1")])
    b = read_log(path)
    assert len(b.records) == 1
    assert b.dedup_dropped == 1


def test_dedup_is_a_fixed_point(tmp_path):
    path = _write(tmp_path, [_line("a", "2026-02-04T23:00:00Z", "h1"), _line("a", "2026-02-04T23:00:04Z", "h1")])
    once = read_log(path)
    write_log(once, tmp_path / "again.jsonl")
    twice = read_log(tmp_path / "again.jsonl")
    assert twice.dedup_dropped == 0
    assert twice.records == once.records


def test_unknown_token(tmp_path):
    path = _write(tmp_path, [_line("zz", "2026-02-04T23:00:00Z", "h1")])
    with pytest.raises(UnknownTokenError, match="unknown token_id"):
        read_log(path)


def test_out_of_order_and_garbage(tmp_path):
    path = _write(tmp_path, [_line("a", "2026-02-04T23:00:05Z", "h1"), _line("b", "2026-02-04T23:00:00Z", "h2")])
    with pytest.raises(LogFormatError, match="chronological"):
        read_log(path)
    path.write_text('{"slug": "g"\n')
    with pytest.raises(LogFormatError, match=":1: invalid JSON"):
        read_log(path)


def test_missing_sidecar_names_slug(tmp_path):
    path = tmp_path / "nba-x-y.jsonl"
    path.write_text("")
    with pytest.raises(MissingSidecarError) as err:
        read_log(path)
    assert err.value.slug == "nba-x-y"
    assert "nba-x-y" in str(err.value)


def test_absent_key_versus_null(tmp_path):
    line = {"slug": "g", "market": "m1", "token": "a", "ts": "2026-02-04T23:00:00Z", "bid": None, "bid_sz": None, "hash": "h"}
    b = read_log(_write(tmp_path, [line]))
    r = b.records[0]
    assert r.bid is None
    assert r.ask is UNREPORTED


def test_empty_bundle_writes_header_only(tmp_path):
    b = bundle([])
    write_log(b, tmp_path / "g.jsonl")
    lines = (tmp_path / "g.jsonl").read_text().splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0])["format"] == "pmarb.l1"
    assert read_log(tmp_path / "g.jsonl") == b


def test_result_round_trip(tmp_path):
    b = bundle([rec("a", 0, ("0.4", "10"), ("0.5", "10"))], result=None)
    write_log(b, tmp_path / "g.jsonl")
    assert "result" not in json.loads((tmp_path / "g.meta.json").read_text())
    assert read_log(tmp_path / "g.jsonl").result is None
    b2 = bundle(b.records, markets=(moneyline(), spread(outcomes=("X", "Y"))), result=FinalResult("g", 3))
    write_log(b2, tmp_path / "g.jsonl")
    assert read_log(tmp_path / "g.jsonl") == b2


def test_synthetic_round_trip_is_byte_identical(tmp_path):
    bundles, _ = generate(ScenarioSpec(seed=5, pre_game_s=300, in_game_s=600, post_game_s=120))
    b = bundles[0]
    write_log(b, tmp_path / "one.jsonl")
    again = read_log(tmp_path / "one.jsonl")
    assert again == b
    write_log(again, tmp_path / "two.jsonl")
    assert (tmp_path / "one.jsonl").read_bytes() == (tmp_path / "two.jsonl").read_bytes()
    assert (tmp_path / "one.meta.json").read_bytes() == (tmp_path / "two.meta.json").read_bytes()
