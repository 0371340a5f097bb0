"""Domain types and exact fixed-point arithmetic.

Prices are integer micro-USDC per share and sizes are integer micro-shares,
so every detection comparison is exact.  Timestamps are integer microseconds
since the Unix epoch (UTC).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from typing import NamedTuple

PRICE_SCALE = 1_000_000
SHARE_SCALE = 1_000_000
# price (micro) x size (micro) -> 1e-12 USDC
NOTIONAL_SCALE = PRICE_SCALE * SHARE_SCALE
ONE = PRICE_SCALE
US = 1_000_000  # microseconds per second

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


class PriceError(ValueError):
    pass


def _to_decimal(value: str | int | Decimal | float) -> Decimal:
    if isinstance(value, float):
        # go through repr so 0.1 stays 0.1
        value = repr(value)
    try:
        return Decimal(value)
    except (InvalidOperation, TypeError) as exc:
        raise PriceError(f"not a number: {value!r}") from exc


def parse_price(value: str | int | Decimal | float) -> int:
    """Decimal price in (0, 1) -> micro-USDC integer."""
    d = _to_decimal(value)
    scaled = d * PRICE_SCALE
    if scaled != scaled.to_integral_value():
        raise PriceError(f"price {value!r} finer than micro-USDC")
    micro = int(scaled)
    if not 0 < micro < ONE:
        raise PriceError(f"price out of (0,1): {value!r}")
    return micro


def parse_qty(value: str | int | Decimal | float) -> int:
    d = _to_decimal(value)
    scaled = d * SHARE_SCALE
    if scaled != scaled.to_integral_value():
        raise PriceError(f"size {value!r} finer than micro-shares")
    micro = int(scaled)
    if micro < 0:
        raise PriceError(f"negative size: {value!r}")
    return micro


def _fmt_fixed(n: int, scale_digits: int) -> str:
    sign = "-" if n < 0 else ""
    n = abs(n)
    unit = 10**scale_digits
    return f"{sign}{n // unit}.{n % unit:0{scale_digits}d}"


def format_price(micro: int) -> str:
    return _fmt_fixed(micro, 6)


def format_qty(micro: int) -> str:
    return _fmt_fixed(micro, 6)


def notional_to_decimal(amount: int) -> Decimal:
    """1e-12 USDC integer -> exact Decimal dollars."""
    return Decimal(amount).scaleb(-12)


def usdc_to_micro(value: str | int | Decimal | float) -> int:
    d = _to_decimal(value) * PRICE_SCALE
    if d != d.to_integral_value():
        raise PriceError(f"amount {value!r} finer than micro-USDC")
    return int(d)


# -- timestamps -------------------------------------------------------------


def parse_ts(text: str) -> int:
    """RFC3339 timestamp -> integer microseconds since epoch."""
    s = text.strip()
    if s.endswith("Z") or s.endswith("z"):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError as exc:
        raise ValueError(f"bad timestamp: {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    delta = dt - _EPOCH
    return (delta.days * 86_400 + delta.seconds) * US + delta.microseconds


def format_ts(us: int) -> str:
    secs, micros = divmod(us, US)
    dt = datetime.fromtimestamp(secs, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S") + f".{micros:06d}Z"


# -- book types -------------------------------------------------------------


class Level(NamedTuple):
    price: int
    size: int


@dataclass(frozen=True, slots=True)
class BookTop:
    token_id: str
    ts: int
    best_bid: Level | None
    best_ask: Level | None
    book_hash: str = ""


class MarketKind(str, enum.Enum):
    MONEYLINE = "moneyline"
    SPREAD = "spread"
    TOTAL = "total"
    PLAYER_PROP = "player_prop"
    OTHER = "other"


@dataclass(frozen=True)
class MarketDescriptor:
    """One binary market.

    ``tokens[0]`` is the favorite (or Over) token.  ``handicap_half`` is the
    line for ``tokens[0]`` in half-point units using sportsbook sign
    convention, so -3 means tokens[0] must win by more than 1.5 points.
    ``outcomes`` optionally names the team behind each token.
    """

    market_id: str
    event_slug: str
    kind: MarketKind
    tokens: tuple[str, str]
    handicap_half: int | None = None
    outcomes: tuple[str, str] | None = None

    def __post_init__(self) -> None:
        if len(self.tokens) != 2 or self.tokens[0] == self.tokens[1]:
            raise ValueError(f"market {self.market_id} needs two distinct tokens")

    @property
    def favorite_token(self) -> str:
        return self.tokens[0]

    @property
    def underdog_token(self) -> str:
        return self.tokens[1]


@dataclass(frozen=True)
class GameSchedule:
    event_slug: str
    tip_off: int
    physical_end: int

    def __post_init__(self) -> None:
        if not self.tip_off < self.physical_end:
            raise ValueError(f"{self.event_slug}: tip_off must precede physical_end")


class Phase(enum.IntEnum):
    PRE_GAME = 0
    IN_GAME = 1
    POST_GAME = 2

    @property
    def label(self) -> str:
        return _PHASE_LABELS[self]


_PHASE_LABELS = {Phase.PRE_GAME: "Pre-Game", Phase.IN_GAME: "In-Game", Phase.POST_GAME: "Post-Game"}


@dataclass(frozen=True)
class FinalResult:
    """Point differential of tokens[0]'s team minus tokens[1]'s team of the moneyline."""

    event_slug: str
    delta: int

    def __post_init__(self) -> None:
        if self.delta == 0:
            raise ValueError("games cannot end in a tie (delta == 0)")


def phase_of(ts: int, sched: GameSchedule) -> Phase:
    if ts < sched.tip_off:
        return Phase.PRE_GAME
    if ts < sched.physical_end:
        return Phase.IN_GAME
    return Phase.POST_GAME


def spread_bps(top: BookTop) -> Decimal | None:
    """(ask - bid) in basis points of the $1.00 payout; negative when crossed."""
    if top.best_bid is None or top.best_ask is None:
        return None
    # micro-USDC / 100 == bps
    return Decimal(top.best_ask.price - top.best_bid.price) / 100
