"""Small builders shared by the test modules."""

from __future__ import annotations

from pmarb.ingest import UNREPORTED, GameBundle, SnapshotRecord, sort_records
from pmarb.model import GameSchedule, Level, MarketDescriptor, MarketKind, parse_price, parse_qty, parse_ts
from pmarb.reconstruct import cluster_batches

T0 = parse_ts("2026-02-04T23:00:00Z")
SEC = 1_000_000


def lvl(price: str, size: str = "100") -> Level:
    return Level(parse_price(price), parse_qty(size))


def side(value):
    if value is None or value is UNREPORTED:
        return value
    if isinstance(value, Level):
        return value
    return lvl(*value)


def rec(token, t_s, bid=None, ask=None, market="m1", slug="g", h=None, ts_us=None):
    """A record at ``T0 + t_s`` seconds; sides are (price, size) tuples, None or UNREPORTED."""
    ts = ts_us if ts_us is not None else T0 + int(round(t_s * SEC))
    return SnapshotRecord(slug, market, token, ts, side(bid), side(ask), h or f"{token}-{t_s}")


def schedule(slug="g", tip_s=1000, end_s=10000) -> GameSchedule:
    return GameSchedule(slug, T0 + tip_s * SEC, T0 + end_s * SEC)


def moneyline(slug="g", mid="m1", tokens=("a", "b"), outcomes=None) -> MarketDescriptor:
    return MarketDescriptor(mid, slug, MarketKind.MONEYLINE, tokens, None, outcomes)


def spread(slug="g", mid="s1", tokens=("sa", "sb"), half=-3, outcomes=None) -> MarketDescriptor:
    return MarketDescriptor(mid, slug, MarketKind.SPREAD, tokens, half, outcomes)


def bundle(records, markets=None, sched=None, result=None) -> GameBundle:
    return GameBundle(sched or schedule(), tuple(markets or (moneyline(),)), tuple(sort_records(records)), result)


def permute_future(recs, rng, window_us=500_000):
    """Split at a random cluster boundary and shuffle everything after it.

    Returns (cut timestamp, new record list).  The shuffled tail is re-timed
    to start more than one window after the kept prefix, so the prefix
    clusters are unchanged.
    """
    clusters = cluster_batches(recs, window_us)
    k = rng.randrange(len(clusters))
    head = [r for c in clusters[: k + 1] for r in c.records]
    tail = [r for c in clusters[k + 1 :] for r in c.records]
    rng.shuffle(tail)
    start = head[-1].ts + window_us + 1
    retimed = []
    for r in tail:
        retimed.append(type(r)(r.event_slug, r.market_id, r.token_id, start, r.bid, r.ask, r.book_hash))
        start += rng.choice((1, 700_000))
    return clusters[k].ts, head + retimed


# criterion number -> (passed, description, detail); printed by conftest
ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}
