import json

import httpx
import pytest

from pmarb.cli import cmd_collect
from pmarb.collector import (
    BookParseError,
    Collector,
    IntervalPolicy,
    RetryPolicy,
    VenueUnreachable,
    cadence_stats,
    parse_book,
    poll_books,
)
from pmarb.ingest import read_log
from pmarb.mockvenue import MockVenue, book_payload
from pmarb.model import MarketDescriptor, MarketKind

from helpers import lvl

ML = MarketDescriptor("m1", "g1", MarketKind.MONEYLINE, ("a", "b"))
ML2 = MarketDescriptor("m2", "g2", MarketKind.MONEYLINE, ("c", "d"))
FAST = RetryPolicy(attempts=2, base_delay_s=0.01, timeout_s=0.3)


def book(token, h, bid="0.48", ask="0.52", ts=None):
    return book_payload(token, [(bid, "100"), ("0.40", "5")], [("0.60", "7"), (ask, "50")], h, ts)


class FakeTime:
    """Monotonic clock that only moves when slept."""

    def __init__(self):
        self.now = 1000.0
        self.sleeps = []

    def clock(self):
        return 1_770_000_000.0 + self.now

    def mono(self):
        return self.now

    def sleep(self, s):
        self.sleeps.append(s)
        self.now += s


def run(venue, markets, sweeps, interval=IntervalPolicy(0.0, 0.0), **kw):
    c = Collector(venue.url, markets, interval, FAST, **kw)
    out = []
    for i in range(sweeps):
        if i:
            c.wait()
        out.append(c.sweep())
    c.close()
    return c, out


def test_parse_book_any_order_and_extra_fields():
    bid, ask, h, ts = parse_book(book("a", "0xabc", ts=1770000000123))
    assert bid == lvl("0.48", "100")
    assert ask == lvl("0.52", "50")
    assert h == "0xabc"
    assert ts == 1770000000123000


def test_parse_book_derives_hash_and_handles_empty():
    bid, ask, h, ts = parse_book({"bids": [], "asks": [{"price": "0.5", "size": "3"}]})
    assert bid is None and ask == lvl("0.5", "3") and ts is None
    assert h == parse_book({"asks": [{"price": "0.5", "size": "3"}], "bids": []})[2]
    with pytest.raises(BookParseError):
        parse_book({"bids": [{"price": "1.5", "size": "1"}]})


def test_unchanged_hash_gives_one_record_per_token():
    script = {"a": [book("a", "h1")], "b": [book("b", "h2")]}
    with MockVenue(script) as v:
        c, sweeps = run(v, {"g1": [ML]}, 3)
    assert [len(s) for s in sweeps] == [2, 0, 0]
    assert c.sweeps[1].suppressed == 2


def test_alternating_hashes_give_one_record_per_sweep():
    script = {"a": [book("a", "x"), book("a", "y")] * 3, "b": [book("b", "p"), book("b", "q")] * 3}
    with MockVenue(script) as v:
        _, sweeps = run(v, {"g1": [ML]}, 4)
    assert [len(s) for s in sweeps] == [2, 2, 2, 2]


def test_records_share_batch_and_client_timestamp():
    script = {t: [book(t, t + "1"), book(t, t + "2")] for t in "abcd"}
    with MockVenue(script) as v:
        _, sweeps = run(v, {"g1": [ML], "g2": [ML2]}, 2)
    for i, recs in enumerate(sweeps):
        assert {r.batch for r in recs} == {i}
        assert len({r.client_ts for r in recs}) == 1
        assert [r.event_slug for r in recs] == ["g1", "g1", "g2", "g2"]


def test_server_timestamp_preferred():
    script = {"a": [book("a", "h", ts=1770000000500)], "b": [book("b", "k")]}
    with MockVenue(script) as v:
        _, (recs,) = run(v, {"g1": [ML]}, 1)
    by_tok = {r.token_id: r for r in recs}
    assert by_tok["a"].ts == 1770000000500000
    assert by_tok["b"].ts == by_tok["b"].client_ts


def test_timeout_on_one_market_keeps_the_rest():
    script = {"a": ["timeout", "timeout", book("a", "a1")], "b": [book("b", "b1")], "c": [book("c", "c1")], "d": [503, book("d", "d1")]}
    with MockVenue(script, stall_s=1.0) as v:
        c, sweeps = run(v, {"g1": [ML], "g2": [ML2]}, 2)
    first = {r.token_id for r in sweeps[0]}
    assert first == {"b", "c"}
    assert set(c.sweeps[0].failed) == {"a", "d"}
    assert {r.token_id for r in sweeps[1]} == {"a", "d"}


def test_dropped_connection_is_retried():
    script = {"a": ["drop", book("a", "a1")], "b": [book("b", "b1")]}
    with MockVenue(script) as v:
        c, (recs,) = run(v, {"g1": [ML]}, 1)
    assert {r.token_id for r in recs} == {"a", "b"}
    assert v.counts["a"] == 2


def test_unreachable_venue_raises_after_dead_sweeps():
    ft = FakeTime()
    c = Collector(
        "http://127.0.0.1:9",
        {"g1": [ML]},
        IntervalPolicy(0.0, 0.0),
        RetryPolicy(attempts=2, base_delay_s=0.01, timeout_s=0.2, dead_sweeps=2),
        sleep=ft.sleep,
    )
    c.sweep()
    with pytest.raises(VenueUnreachable):
        c.sweep()
    # exponential backoff between attempts
    assert ft.sleeps[:1] == [0.01]


def test_cadence_follows_policy_with_fake_clock():
    ft = FakeTime()
    script = {"a": [book("a", "h")], "b": [book("b", "k")]}
    with MockVenue(script) as v:
        c = Collector(v.url, {"g1": [ML]}, IntervalPolicy(3.6, 5.5, seed=1), FAST, clock=ft.clock, monotonic=ft.mono, sleep=ft.sleep)
        for i in range(30):
            if i:
                c.wait()
            c.sweep()
    stats = cadence_stats(c.sweeps)
    assert stats.sweeps == 30
    assert 3.6 <= stats.min_s and stats.max_s <= 5.5


def test_poll_books_stream():
    script = {"a": [book("a", "1"), book("a", "2")], "b": [book("b", "3")]}
    with MockVenue(script) as v:
        recs = list(poll_books(v.url, {"g1": [ML]}, IntervalPolicy(0.0, 0.0), max_sweeps=3, retry=FAST))
    assert [r.token_id for r in recs] == ["a", "b", "a"]


def test_cmd_collect_appends_and_resumes(tmp_path):
    meta = {"slug": "g1", "tip_off": "2026-02-04T23:00:00Z", "physical_end": "2026-02-05T01:00:00Z", "markets": [{"id": "m1", "kind": "moneyline", "tokens": ["a", "b"]}]}
    (tmp_path / "g1.meta.json").write_text(json.dumps(meta))
    script = {"a": [book("a", "1"), book("a", "2")], "b": [book("b", "3")]}
    with MockVenue(script) as v:
        kw = {"retry": FAST}
        cmd_collect(v.url, ["g1"], tmp_path, interval=IntervalPolicy(0.0, 0.0), max_sweeps=2, collector_kwargs=kw)
        # a restart must not re-emit unchanged books
        cmd_collect(v.url, ["g1"], tmp_path, interval=IntervalPolicy(0.0, 0.0), max_sweeps=2, collector_kwargs=kw)
    b = read_log(tmp_path / "g1.jsonl")
    assert b.dedup_dropped == 0
    assert [(r.token_id, r.book_hash) for r in b.records] == [("a", "1"), ("b", "3"), ("a", "2")]
    sweeps = (tmp_path / "sweeps.jsonl").read_text().splitlines()
    assert [json.loads(s)["batch"] for s in sweeps] == [0, 1, 2, 3]


def test_transport_errors_are_httpx_errors():
    # the collector relies on httpx raising TransportError subclasses for timeouts
    assert issubclass(httpx.ReadTimeout, httpx.TransportError)
