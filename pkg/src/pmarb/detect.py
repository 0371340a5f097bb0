"""Single-market detection: Buy path, Mint-and-Sell path, dedup and phase filter."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, replace

from .config import Config, ConfigError
from .model import ONE, SHARE_SCALE, GameSchedule, Phase, phase_of
from .reconstruct import AlignedState

DEFAULT_CONFIG = Config()


class ArbPath(str, enum.Enum):
    LONG = "long"
    SHORT = "short"


@dataclass(frozen=True, slots=True)
class ArbSignal:
    """A crossing at one timestamp.

    ``edge`` is micro-USDC per share, ``bottleneck_shares`` micro-shares,
    ``unit_capital`` the micro-USDC committed per share (combined asks for
    the Buy path, the $1.00 mint for Mint-and-Sell) and ``notional`` the
    capital for the bottleneck size in 1e-12 USDC.
    """

    ts: int
    market_id: str
    path: ArbPath
    edge: int
    bottleneck_shares: int
    unit_capital: int
    notional: int
    phase: Phase
    prices: tuple[int, int] = (0, 0)

    @property
    def key(self) -> str:
        return f"{self.market_id}:{self.path.value}"


def budget_shares(budget_micro: int, unit_capital: int) -> int:
    """Whole shares a budget buys at ``unit_capital``, in micro-shares."""
    return (budget_micro // unit_capital) * SHARE_SCALE


def capped_potential(sig, budget_micro: int) -> int:
    return sig.edge * min(sig.bottleneck_shares, budget_shares(budget_micro, sig.unit_capital))


def passes_floor(notional: int, cfg: Config) -> bool:
    floor = cfg.floor_micro * SHARE_SCALE
    return notional >= floor if cfg.floor_inclusive else notional > floor


def detect_long(state: AlignedState, market_id: str = "", cfg: Config = DEFAULT_CONFIG) -> ArbSignal | None:
    a, b = state.legs[0].best_ask, state.legs[1].best_ask
    if a is None or b is None:
        return None
    cost = a.price + b.price
    edge = ONE - cost
    if edge <= cfg.threshold_micro:
        return None
    shares = min(a.size, b.size)
    notional = shares * cost
    if not passes_floor(notional, cfg):
        return None
    return ArbSignal(state.ts, market_id, ArbPath.LONG, edge, shares, cost, notional, state.phase, (a.price, b.price))


def detect_short(state: AlignedState, market_id: str = "", cfg: Config = DEFAULT_CONFIG) -> ArbSignal | None:
    a, b = state.legs[0].best_bid, state.legs[1].best_bid
    if a is None or b is None:
        return None
    edge = a.price + b.price - ONE
    if edge <= cfg.threshold_micro:
        return None
    shares = min(a.size, b.size)
    notional = shares * ONE
    if not passes_floor(notional, cfg):
        return None
    return ArbSignal(state.ts, market_id, ArbPath.SHORT, edge, shares, ONE, notional, state.phase, (a.price, b.price))


def dedup_signals(long: ArbSignal | None, short: ArbSignal | None, budget_micro: int | None = None) -> ArbSignal | None:
    """Keep one path when both fire: the larger budget-capped profit, Long on ties."""
    if long is None or short is None:
        return long if long is not None else short
    if budget_micro is None:
        budget_micro = DEFAULT_CONFIG.budget_micro
    if capped_potential(short, budget_micro) > capped_potential(long, budget_micro):
        return short
    return long


def filter_phase(signal, sched: GameSchedule | None, counter: Counter | None = None):
    """Drop post-game signals (counted under ``"post_game_signals"``); annotate the rest."""
    if sched is None:
        raise ConfigError("game schedule required to classify phases")
    if signal is None:
        return None
    phase = phase_of(signal.ts, sched)
    if phase is Phase.POST_GAME:
        if counter is not None:
            counter["post_game_signals"] += 1
        return None
    return signal if signal.phase is phase else replace(signal, phase=phase)
