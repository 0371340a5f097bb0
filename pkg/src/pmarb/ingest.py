"""Snapshot log format: JSON Lines records plus a per-game metadata sidecar.

A log ``<name>.jsonl`` starts with a header line and holds one line per
top-of-book change.  The sidecar ``<name>.meta.json`` carries the schedule,
market map and (optionally) the final result.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any, Iterable

from .model import (
    FinalResult,
    GameSchedule,
    Level,
    MarketDescriptor,
    MarketKind,
    PriceError,
    format_price,
    format_qty,
    format_ts,
    parse_price,
    parse_qty,
    parse_ts,
)

log = logging.getLogger(__name__)

LOG_FORMAT = "pmarb.l1"
LOG_VERSION = 1


class _Unreported:
    """Marks a book side the record did not carry (forward-filled downstream)."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "UNREPORTED"

    def __reduce__(self):
        return (_Unreported, ())


UNREPORTED = _Unreported()

Side = Level | None | _Unreported


class LogFormatError(ValueError):
    def __init__(self, path: Path | str, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = str(path)
        self.lineno = lineno


class UnknownTokenError(LogFormatError):
    pass


class MissingSidecarError(FileNotFoundError):
    def __init__(self, slug: str, path: Path):
        super().__init__(f"missing metadata sidecar for {slug!r}: {path}")
        self.slug = slug


@dataclass(frozen=True, slots=True)
class SnapshotRecord:
    event_slug: str
    market_id: str
    token_id: str
    ts: int
    bid: Side
    ask: Side
    book_hash: str
    client_ts: int | None = None
    batch: int | None = None


@dataclass(frozen=True)
class GameBundle:
    schedule: GameSchedule
    markets: tuple[MarketDescriptor, ...]
    records: tuple[SnapshotRecord, ...] = ()
    result: FinalResult | None = None
    dedup_dropped: int = field(default=0, compare=False)

    @property
    def slug(self) -> str:
        return self.schedule.event_slug

    def market(self, market_id: str) -> MarketDescriptor:
        for m in self.markets:
            if m.market_id == market_id:
                return m
        raise KeyError(market_id)


def sort_records(records: Iterable[SnapshotRecord]) -> list[SnapshotRecord]:
    return sorted(records, key=lambda r: (r.ts, r.token_id))


def sidecar_path(log_path: Path | str) -> Path:
    p = Path(log_path)
    name = p.name[: -len(".jsonl")] if p.name.endswith(".jsonl") else p.stem
    return p.with_name(name + ".meta.json")


# -- metadata ---------------------------------------------------------------


def _handicap_half(value: Any) -> int | None:
    if value is None:
        return None
    d = Decimal(str(value)) * 2
    if d != d.to_integral_value():
        raise ValueError(f"handicap {value!r} is not a multiple of 0.5")
    return int(d)


def _format_handicap(half: int) -> str:
    return str(Decimal(half) / 2)


def metadata_from_dict(raw: dict) -> tuple[GameSchedule, tuple[MarketDescriptor, ...], FinalResult | None]:
    slug = raw["slug"]
    sched = GameSchedule(slug, parse_ts(raw["tip_off"]), parse_ts(raw["physical_end"]))
    markets = []
    for m in raw.get("markets", []):
        outcomes = m.get("outcomes")
        markets.append(
            MarketDescriptor(
                market_id=str(m["id"]),
                event_slug=slug,
                kind=MarketKind(m["kind"]),
                tokens=tuple(str(t) for t in m["tokens"]),
                handicap_half=_handicap_half(m.get("handicap")),
                outcomes=tuple(outcomes) if outcomes else None,
            )
        )
    result = None
    if raw.get("result") is not None:
        result = FinalResult(slug, int(raw["result"]["delta"]))
    return sched, tuple(markets), result


def metadata_to_dict(bundle: GameBundle) -> dict:
    sched = bundle.schedule
    markets = []
    for m in bundle.markets:
        entry: dict[str, Any] = {"id": m.market_id, "kind": m.kind.value, "tokens": list(m.tokens)}
        if m.handicap_half is not None:
            entry["handicap"] = _format_handicap(m.handicap_half)
        if m.outcomes is not None:
            entry["outcomes"] = list(m.outcomes)
        markets.append(entry)
    out: dict[str, Any] = {
        "slug": sched.event_slug,
        "tip_off": format_ts(sched.tip_off),
        "physical_end": format_ts(sched.physical_end),
        "markets": markets,
    }
    if bundle.result is not None:
        out["result"] = {"delta": bundle.result.delta}
    return out


def read_metadata(path: Path | str):
    try:
        with open(path, encoding="utf-8") as fh:
            return metadata_from_dict(json.load(fh))
    except json.JSONDecodeError as exc:
        raise LogFormatError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise LogFormatError(path, 0, f"invalid metadata: {exc!r}") from None


# -- records ----------------------------------------------------------------


def _side_from_json(obj: dict, pkey: str, skey: str) -> Side:
    if pkey not in obj:
        return UNREPORTED
    price = obj[pkey]
    if price is None:
        return None
    return Level(parse_price(price), parse_qty(obj.get(skey) or "0"))


def record_from_json(obj: dict) -> SnapshotRecord:
    client_ts = obj.get("client_ts")
    return SnapshotRecord(
        event_slug=str(obj["slug"]),
        market_id=str(obj["market"]),
        token_id=str(obj["token"]),
        ts=parse_ts(obj["ts"]),
        bid=_side_from_json(obj, "bid", "bid_sz"),
        ask=_side_from_json(obj, "ask", "ask_sz"),
        book_hash=str(obj["hash"]),
        client_ts=parse_ts(client_ts) if client_ts else None,
        batch=obj.get("batch"),
    )


def record_to_json(rec: SnapshotRecord) -> dict:
    out: dict[str, Any] = {
        "slug": rec.event_slug,
        "market": rec.market_id,
        "token": rec.token_id,
        "ts": format_ts(rec.ts),
    }
    for side, pkey, skey in ((rec.bid, "bid", "bid_sz"), (rec.ask, "ask", "ask_sz")):
        if side is UNREPORTED:
            continue
        if side is None:
            out[pkey] = None
            out[skey] = None
        else:
            out[pkey] = format_price(side.price)
            out[skey] = format_qty(side.size)
    out["hash"] = rec.book_hash
    if rec.client_ts is not None:
        out["client_ts"] = format_ts(rec.client_ts)
    if rec.batch is not None:
        out["batch"] = rec.batch
    return out


def _dumps(obj: Any) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def read_log(path: Path | str, meta_path: Path | str | None = None) -> GameBundle:
    """Load and validate one game's log plus its sidecar.

    Consecutive records for a token carrying an unchanged book hash are
    dropped; the number dropped is reported in ``bundle.dedup_dropped``.
    """
    path = Path(path)
    meta_path = Path(meta_path) if meta_path else sidecar_path(path)
    slug_hint = path.name.split(".")[0]
    if not meta_path.exists():
        raise MissingSidecarError(slug_hint, meta_path)
    sched, markets, result = read_metadata(meta_path)
    token_market = {t: m.market_id for m in markets for t in m.tokens}

    records: list[SnapshotRecord] = []
    last_hash: dict[str, str] = {}
    dropped = 0
    prev_ts = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogFormatError(path, lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise LogFormatError(path, lineno, "expected a JSON object")
            if "format" in obj:
                if lineno != 1 or obj["format"] != LOG_FORMAT:
                    raise LogFormatError(path, lineno, f"unexpected header {obj.get('format')!r}")
                continue
            try:
                rec = record_from_json(obj)
            except PriceError as exc:
                raise LogFormatError(path, lineno, str(exc)) from None
            except (KeyError, TypeError, ValueError) as exc:
                raise LogFormatError(path, lineno, f"malformed record: {exc}") from None
            if rec.token_id not in token_market:
                raise UnknownTokenError(path, lineno, f"unknown token_id {rec.token_id!r}")
            if token_market[rec.token_id] != rec.market_id:
                raise UnknownTokenError(
                    path, lineno, f"token {rec.token_id!r} does not belong to market {rec.market_id!r}"
                )
            if prev_ts is not None and rec.ts < prev_ts:
                raise LogFormatError(path, lineno, "record out of chronological order")
            prev_ts = rec.ts
            if last_hash.get(rec.token_id) == rec.book_hash:
                dropped += 1
                continue
            last_hash[rec.token_id] = rec.book_hash
            records.append(rec)
    if dropped:
        log.warning("%s: dropped %d records with unchanged book hash", path, dropped)
    return GameBundle(sched, markets, tuple(sort_records(records)), result, dedup_dropped=dropped)


def write_log(bundle: GameBundle, path: Path | str, meta_path: Path | str | None = None) -> None:
    path = Path(path)
    meta_path = Path(meta_path) if meta_path else sidecar_path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_dumps({"format": LOG_FORMAT, "version": LOG_VERSION, "slug": bundle.slug}) + "\n")
            for rec in bundle.records:
                fh.write(_dumps(record_to_json(rec)) + "\n")
        with open(meta_path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(metadata_to_dict(bundle), fh, indent=2, sort_keys=False)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write log {path}: {exc}") from exc


def find_logs(directory: Path | str) -> list[Path]:
    return sorted(Path(directory).glob("*.jsonl"))
