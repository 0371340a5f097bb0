"""Polling collector for a ``GET {endpoint}/book?token_id=...`` venue.

Each sweep walks the configured event slugs in order and requests every
outcome token once.  All records from a sweep share one batch id and one
client batch timestamp.  A record is persisted only when the token's book
hash differs from the last persisted hash.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import statistics
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterator, Mapping, Sequence

import httpx

from .ingest import (
    LOG_FORMAT,
    LOG_VERSION,
    SnapshotRecord,
    _dumps,
    read_log,
    record_to_json,
    sort_records,
)
from .model import Level, MarketDescriptor, PriceError, format_ts, parse_price, parse_qty

log = logging.getLogger(__name__)


class BookParseError(ValueError):
    pass


class VenueUnreachable(ConnectionError):
    """Raised after several consecutive sweeps in which no request got through."""


@dataclass(frozen=True)
class IntervalPolicy:
    """Start-to-start sweep interval, drawn uniformly from [min_s, max_s]."""

    min_s: float = 3.6
    max_s: float = 5.5
    seed: int | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.min_s <= self.max_s:
            raise ValueError("interval bounds must satisfy 0 <= min <= max")

    def sampler(self) -> Callable[[], float]:
        rng = random.Random(self.seed)
        return lambda: rng.uniform(self.min_s, self.max_s)


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    base_delay_s: float = 0.2
    timeout_s: float = 2.0
    dead_sweeps: int = 3


@dataclass
class SweepStats:
    batch: int
    client_ts: int
    wall_time_s: float
    interval_s: float | None
    requested: int = 0
    recorded: int = 0
    suppressed: int = 0
    failed: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        out = asdict(self)
        out["client_ts"] = format_ts(self.client_ts)
        return out


@dataclass(frozen=True)
class CadenceStats:
    sweeps: int
    min_s: float | None
    median_s: float | None
    mean_s: float | None
    max_s: float | None


def cadence_stats(sweeps: Sequence[SweepStats]) -> CadenceStats:
    gaps = [s.interval_s for s in sweeps if s.interval_s is not None]
    if not gaps:
        return CadenceStats(len(sweeps), None, None, None, None)
    return CadenceStats(len(sweeps), min(gaps), statistics.median(gaps), statistics.fmean(gaps), max(gaps))


def _best_level(levels, highest: bool) -> Level | None:
    best = None
    for lvl in levels or ():
        try:
            price, size = parse_price(str(lvl["price"])), parse_qty(str(lvl["size"]))
        except (KeyError, TypeError, PriceError, ArithmeticError, ValueError) as exc:
            raise BookParseError(f"bad book level {lvl!r}: {exc}") from None
        if size <= 0:
            continue
        if best is None or (price > best.price if highest else price < best.price):
            best = Level(price, size)
    return best


def parse_book(payload: dict) -> tuple[Level | None, Level | None, str, int | None]:
    """(best bid, best ask, book hash, server ts in microseconds or None).

    Level lists may come in any order; unknown fields are ignored.  When
    the venue sends no hash, one is derived from the book content.
    """
    if not isinstance(payload, dict):
        raise BookParseError("book payload is not an object")
    bid = _best_level(payload.get("bids"), highest=True)
    ask = _best_level(payload.get("asks"), highest=False)
    book_hash = payload.get("hash")
    if not book_hash:
        canon = json.dumps([payload.get("bids") or [], payload.get("asks") or []], sort_keys=True)
        book_hash = hashlib.sha1(canon.encode()).hexdigest()
    server_ts = None
    raw_ts = payload.get("timestamp")
    if raw_ts not in (None, ""):
        try:
            server_ts = int(raw_ts) * 1000
        except (TypeError, ValueError):
            raise BookParseError(f"bad timestamp {raw_ts!r}") from None
    return bid, ask, str(book_hash), server_ts


class Collector:
    """Stateful sweep runner; time sources are injectable for tests."""

    def __init__(
        self,
        endpoint: str,
        markets: Mapping[str, Sequence[MarketDescriptor]],
        interval: IntervalPolicy = IntervalPolicy(),
        retry: RetryPolicy = RetryPolicy(),
        client: httpx.Client | None = None,
        clock: Callable[[], float] = time.time,
        monotonic: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not markets:
            raise ValueError("no event slugs to collect")
        self.endpoint = endpoint.rstrip("/")
        self.markets = {slug: tuple(ms) for slug, ms in markets.items()}
        self.retry = retry
        self.client = client or httpx.Client(timeout=retry.timeout_s)
        self._clock, self._mono, self._sleep = clock, monotonic, sleep
        self._next_interval = interval.sampler()
        self.last_hash: dict[str, str] = {}
        self.last_ts: dict[str, int] = {}
        self.next_batch = 0
        self.sweeps: list[SweepStats] = []
        self._last_start: float | None = None
        self._dead = 0

    def seed_from_log(self, path: Path | str) -> None:
        """Resume hash suppression and batch numbering from an existing log."""
        bundle = read_log(path)
        for rec in bundle.records:
            self.last_hash[rec.token_id] = rec.book_hash
            self.last_ts[rec.event_slug] = rec.ts
            if isinstance(rec.batch, int):
                self.next_batch = max(self.next_batch, rec.batch + 1)

    def _fetch(self, token: str) -> dict | None:
        url = f"{self.endpoint}/book"
        for attempt in range(self.retry.attempts):
            try:
                resp = self.client.get(url, params={"token_id": token})
            except httpx.TransportError as exc:
                if attempt + 1 == self.retry.attempts:
                    log.warning("token %s: giving up after %d attempts (%s)", token, attempt + 1, exc)
                    raise
                self._sleep(self.retry.base_delay_s * 2**attempt)
                continue
            if resp.status_code != 200:
                log.warning("token %s: HTTP %d, skipped this sweep", token, resp.status_code)
                return None
            try:
                return resp.json()
            except ValueError:
                log.warning("token %s: response is not JSON", token)
                return None
        return None

    def sweep(self) -> list[SnapshotRecord]:
        """Run one sweep and return its new records in (ts, token) order."""
        start = self._mono()
        batch_ts = int(self._clock() * 1_000_000)
        stats = SweepStats(
            batch=self.next_batch,
            client_ts=batch_ts,
            wall_time_s=0.0,
            interval_s=None if self._last_start is None else start - self._last_start,
        )
        self._last_start = start
        self.next_batch += 1
        transport_failures = 0
        out: list[SnapshotRecord] = []
        for slug, markets in self.markets.items():
            fresh = []
            for m in markets:
                for token in m.tokens:
                    stats.requested += 1
                    try:
                        payload = self._fetch(token)
                    except httpx.TransportError:
                        transport_failures += 1
                        stats.failed.append(token)
                        continue
                    if payload is None:
                        stats.failed.append(token)
                        continue
                    try:
                        bid, ask, book_hash, server_ts = parse_book(payload)
                    except BookParseError as exc:
                        log.warning("token %s: %s", token, exc)
                        stats.failed.append(token)
                        continue
                    if self.last_hash.get(token) == book_hash:
                        stats.suppressed += 1
                        continue
                    self.last_hash[token] = book_hash
                    fresh.append(
                        SnapshotRecord(
                            event_slug=slug,
                            market_id=m.market_id,
                            token_id=token,
                            ts=server_ts if server_ts is not None else batch_ts,
                            bid=bid,
                            ask=ask,
                            book_hash=book_hash,
                            client_ts=batch_ts,
                            batch=stats.batch,
                        )
                    )
            out.extend(self._monotone(slug, sort_records(fresh)))
        stats.recorded = len(out)
        stats.wall_time_s = self._mono() - start
        self.sweeps.append(stats)
        if stats.requested and transport_failures == stats.requested:
            self._dead += 1
            if self._dead >= self.retry.dead_sweeps:
                raise VenueUnreachable(f"{self.endpoint}: no response in {self._dead} consecutive sweeps")
        else:
            self._dead = 0
        return out

    def _monotone(self, slug: str, records: list[SnapshotRecord]) -> list[SnapshotRecord]:
        # a server clock that steps backwards would break log ordering; hold
        # such records at the last persisted time instead
        last = self.last_ts.get(slug)
        out = []
        for rec in records:
            if last is not None and rec.ts < last:
                log.warning("%s: server time went backwards for %s, clamped", slug, rec.token_id)
                rec = replace(rec, ts=last)
            last = rec.ts
            out.append(rec)
        if last is not None:
            self.last_ts[slug] = last
        return out

    def wait(self) -> None:
        """Sleep until the next sweep is due."""
        if self._last_start is None:
            return
        due = self._last_start + self._next_interval()
        self._sleep(max(0.0, due - self._mono()))

    def close(self) -> None:
        self.client.close()


def poll_books(
    endpoint: str,
    markets: Mapping[str, Sequence[MarketDescriptor]],
    interval_policy: IntervalPolicy = IntervalPolicy(),
    max_sweeps: int | None = None,
    **kwargs,
) -> Iterator[SnapshotRecord]:
    """Yield records sweep by sweep, batched per event slug in slug order."""
    collector = Collector(endpoint, markets, interval_policy, **kwargs)
    try:
        n = 0
        while max_sweeps is None or n < max_sweeps:
            if n:
                collector.wait()
            yield from collector.sweep()
            n += 1
    finally:
        collector.close()


class LogAppender:
    """Appends records to per-slug logs, writing the header for new files."""

    def __init__(self, out_dir: Path | str):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def path_for(self, slug: str) -> Path:
        return self.out_dir / f"{slug}.jsonl"

    def append(self, records: Sequence[SnapshotRecord]) -> None:
        by_slug: dict[str, list[SnapshotRecord]] = {}
        for rec in records:
            by_slug.setdefault(rec.event_slug, []).append(rec)
        for slug, recs in by_slug.items():
            path = self.path_for(slug)
            new = not path.exists() or path.stat().st_size == 0
            with open(path, "a", encoding="utf-8", newline="\n") as fh:
                if new:
                    fh.write(_dumps({"format": LOG_FORMAT, "version": LOG_VERSION, "slug": slug}) + "\n")
                for rec in recs:
                    fh.write(_dumps(record_to_json(rec)) + "\n")

    def append_sweep(self, stats: SweepStats) -> None:
        with open(self.out_dir / "sweeps.jsonl", "a", encoding="utf-8", newline="\n") as fh:
            fh.write(_dumps(stats.to_json()) + "\n")
