"""Continuous market state from sparse, hash-deduplicated token records.

Three steps: records close together in time are clustered onto one
timestamp, each requested leg is forward-filled from its latest record, and
the complementary token's book is reflected at 1 - P and merged into the
effective book.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

from .ingest import UNREPORTED, SnapshotRecord
from .model import ONE, BookTop, GameSchedule, Level, Phase, phase_of

DEFAULT_WINDOW_US = 500_000


class Cluster(NamedTuple):
    ts: int
    records: tuple[SnapshotRecord, ...]


class Freshness(enum.Enum):
    FRESH = "fresh"
    FORWARD_FILLED = "forward_filled"


@dataclass(frozen=True, slots=True)
class AlignedState:
    ts: int
    legs: tuple[BookTop, ...]
    freshness: tuple[Freshness, ...]
    phase: Phase


def cluster_batches(records: Iterable[SnapshotRecord], window_us: int = DEFAULT_WINDOW_US) -> list[Cluster]:
    """Group chronologically sorted records into bursts.

    A record joins the current cluster when its gap to the previous record
    is at most ``window_us``; chaining is transitive.  The cluster timestamp
    is the earliest member's.
    """
    clusters: list[Cluster] = []
    cur: list[SnapshotRecord] = []
    start = prev = None
    for rec in records:
        if prev is not None and rec.ts < prev:
            raise ValueError("records must be sorted by timestamp")
        if prev is None or rec.ts - prev > window_us:
            if cur:
                clusters.append(Cluster(start, tuple(cur)))
            cur = [rec]
            start = rec.ts
        else:
            cur.append(rec)
        prev = rec.ts
    if cur:
        clusters.append(Cluster(start, tuple(cur)))
    return clusters


def _mirror_level(level: Level | None) -> Level | None:
    if level is None:
        return None
    return Level(ONE - level.price, level.size)


def mirror(top: BookTop, token_id: str | None = None) -> BookTop:
    """Synthetic view of the complementary token: bids become asks at 1 - P."""
    return BookTop(
        token_id if token_id is not None else top.token_id,
        top.ts,
        _mirror_level(top.best_ask),
        _mirror_level(top.best_bid),
        top.book_hash,
    )


def _better(a: Level | None, b: Level | None, want_max: bool) -> Level | None:
    if a is None:
        return b
    if b is None:
        return a
    if a.price == b.price:
        return Level(a.price, a.size + b.size)
    if (a.price > b.price) == want_max:
        return a
    return b


def merge_effective_book(direct: BookTop, mirrored: BookTop) -> BookTop:
    """Best of direct and mirrored quotes; equal prices pool their sizes."""
    return BookTop(
        direct.token_id,
        max(direct.ts, mirrored.ts),
        _better(direct.best_bid, mirrored.best_bid, True),
        _better(direct.best_ask, mirrored.best_ask, False),
        direct.book_hash,
    )


def effective_pair(a: BookTop, b: BookTop) -> tuple[BookTop, BookTop]:
    """Effective books of two complementary tokens."""
    return (
        merge_effective_book(a, mirror(b, a.token_id)),
        merge_effective_book(b, mirror(a, b.token_id)),
    )


def project_states(
    clusters: Sequence[Cluster],
    legs: Sequence[str],
    schedule: GameSchedule,
) -> Iterator[AlignedState]:
    """Forward-filled state of ``legs`` at every cluster that updates one of them.

    Nothing is emitted until every leg has been observed.  Each side of a
    leg's book is filled independently, so a record that omits a side keeps
    the previous quote for it.
    """
    index = {tok: i for i, tok in enumerate(legs)}
    n = len(legs)
    bids: list = [None] * n
    asks: list = [None] * n
    src_ts = [None] * n
    hashes = [""] * n
    seen = 0
    for ts, recs in clusters:
        touched = None
        for rec in recs:
            i = index.get(rec.token_id)
            if i is None:
                continue
            if src_ts[i] is None:
                seen += 1
            if rec.bid is not UNREPORTED:
                bids[i] = rec.bid
            if rec.ask is not UNREPORTED:
                asks[i] = rec.ask
            src_ts[i] = ts
            hashes[i] = rec.book_hash
            if touched is None:
                touched = [False] * n
            touched[i] = True
        if touched is None or seen < n:
            continue
        tops = tuple(BookTop(legs[i], src_ts[i], bids[i], asks[i], hashes[i]) for i in range(n))
        fresh = tuple(Freshness.FRESH if t else Freshness.FORWARD_FILLED for t in touched)
        yield AlignedState(ts, tops, fresh, phase_of(ts, schedule))


def unified_timeline(clusters: Sequence[Cluster], markets: dict[str, Sequence[str]]) -> list[tuple[int, frozenset[str]]]:
    """Ordered union of the update timestamps of several markets.

    ``markets`` maps market id to its token ids.  Each entry carries the set
    of markets that updated at that timestamp.
    """
    token_market = {tok: mid for mid, toks in markets.items() for tok in toks}
    out = []
    for ts, recs in clusters:
        updated = frozenset(token_market[r.token_id] for r in recs if r.token_id in token_market)
        if updated:
            out.append((ts, updated))
    return out
