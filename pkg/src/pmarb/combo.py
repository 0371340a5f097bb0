"""Moneyline-Spread combinatorial arbitrage.

The spread event {margin > h} is a strict subset of the moneyline event
{margin >= 1}, so buying the favorite's moneyline token and the underdog's
spread token always pays at least $1.00, and $2.00 when the final margin
lands between 1 and h.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .config import Config
from .detect import DEFAULT_CONFIG, passes_floor
from .model import ONE, FinalResult, MarketDescriptor, MarketKind, Phase
from .reconstruct import AlignedState, effective_pair

log = logging.getLogger(__name__)


class InvalidResultError(ValueError):
    pass


@dataclass(frozen=True)
class ComboPair:
    """Legs are ordered (ml_a, ml_b, sp_a, sp_b); team A lays ``h_half``/2 points."""

    event_slug: str
    ml_market: str
    spread_market: str
    ml_a: str
    ml_b: str
    sp_a: str
    sp_b: str
    h_half: int

    @property
    def pair_id(self) -> str:
        return f"{self.ml_market}|{self.spread_market}"

    @property
    def legs(self) -> tuple[str, str, str, str]:
        return (self.ml_a, self.ml_b, self.sp_a, self.sp_b)

    @property
    def handicap(self) -> float:
        return self.h_half / 2


@dataclass(frozen=True, slots=True)
class ComboSignal:
    ts: int
    pair_id: str
    ask_ml_a: int
    ask_sp_b: int
    combined_cost: int
    edge: int
    bottleneck_shares: int
    notional: int
    phase: Phase
    # raw subset violation Bid(Sp_A) > Ask(ML_A); diagnostic only
    dominance_violated: bool = False

    @property
    def unit_capital(self) -> int:
        return self.combined_cost

    @property
    def key(self) -> str:
        return self.pair_id


@dataclass(frozen=True)
class Payoff:
    payout: int  # micro-USDC per synthetic share
    jackpot: bool


def _spread_orientation(ml: MarketDescriptor, sp: MarketDescriptor) -> tuple[str, str, int] | None:
    """(sp token of the moneyline favorite, its complement, h in half points) or None."""
    hh = sp.handicap_half
    layer = 0 if hh < 0 else 1
    h_half = abs(hh)
    fav_label = ml.outcomes[0] if ml.outcomes else None
    if fav_label is not None and sp.outcomes is not None:
        if sp.outcomes[layer] != fav_label:
            return None
    elif layer != 0:
        return None
    return sp.tokens[layer], sp.tokens[1 - layer], h_half


def enumerate_pairs(markets: Iterable[MarketDescriptor]) -> list[ComboPair]:
    """Every (moneyline, spread) pair where the favorite lays a half-point line h >= 1."""
    markets = list(markets)
    mls = [m for m in markets if m.kind is MarketKind.MONEYLINE]
    spreads = [m for m in markets if m.kind is MarketKind.SPREAD]
    pairs = []
    for ml in mls:
        for sp in spreads:
            if sp.event_slug != ml.event_slug:
                continue
            if sp.handicap_half is None or sp.handicap_half == 0:
                log.warning("spread %s has no usable handicap; skipped", sp.market_id)
                continue
            orient = _spread_orientation(ml, sp)
            if orient is None:
                log.info("spread %s is not laid by the moneyline favorite; skipped", sp.market_id)
                continue
            sp_a, sp_b, h_half = orient
            # half-point lines only (no push), and h >= 1
            if h_half % 2 == 0 or h_half < 2:
                log.info("spread %s line %s excluded", sp.market_id, h_half / 2)
                continue
            pairs.append(ComboPair(ml.event_slug, ml.market_id, sp.market_id, ml.tokens[0], ml.tokens[1], sp_a, sp_b, h_half))
    return pairs


def effective_combo_legs(state: AlignedState, mirror_merge: bool = True):
    ml_a, ml_b, sp_a, sp_b = state.legs
    if mirror_merge:
        ml_a, ml_b = effective_pair(ml_a, ml_b)
        sp_a, sp_b = effective_pair(sp_a, sp_b)
    return ml_a, ml_b, sp_a, sp_b


def detect_combo_state(state: AlignedState, pair: ComboPair, cfg: Config = DEFAULT_CONFIG) -> ComboSignal | None:
    ml_a, _, _, sp_b = effective_combo_legs(state, cfg.mirror_merge)
    a, b = ml_a.best_ask, sp_b.best_ask
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
    # on merged books the mirrored Sp_A bid restates the combo condition, so
    # the diagnostic looks at the venue's direct Sp_A bid only
    raw_bid = state.legs[2].best_bid
    dominance = raw_bid is not None and raw_bid.price > a.price
    return ComboSignal(state.ts, pair.pair_id, a.price, b.price, cost, edge, shares, notional, state.phase, dominance)


def resolve_payoff(pair: ComboPair, result: FinalResult) -> Payoff:
    delta = result.delta
    if delta == 0:
        raise InvalidResultError("delta must be non-zero")
    # moneyline pays on delta >= 1, underdog spread on delta < h
    both = delta >= 1 and 2 * delta < pair.h_half
    return Payoff(2 * ONE if both else ONE, both)


@dataclass(frozen=True)
class JackpotAudit:
    resolved: int
    unresolved: int
    jackpots: int
    jackpot_episodes: tuple[str, ...]


def jackpot_audit(
    episodes: Sequence,
    pairs: Mapping[str, ComboPair],
    results: Mapping[str, FinalResult | None],
) -> JackpotAudit:
    """Ex-post payoff of every combo episode; unresolved games are left out of the denominator."""
    resolved = unresolved = 0
    hits = []
    for ep in episodes:
        pair = pairs[ep.key]
        result = results.get(pair.event_slug)
        if result is None:
            unresolved += 1
            continue
        resolved += 1
        if resolve_payoff(pair, result).jackpot:
            hits.append(ep.episode_id)
    return JackpotAudit(resolved, unresolved, len(hits), tuple(hits))
