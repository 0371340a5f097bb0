"""Brute-force reference scan.

Re-derives every evaluated state from scratch: for each timestamp on a
stream's unified timeline it looks up each token's latest quote per side
by binary search over the whole log, rebuilds the effective books from the
candidate quote lists, and re-checks the crossing conditions.  Nothing is
carried from one timestamp to the next.  It shares only value types with
the streaming pipeline, never its functions.
"""

from __future__ import annotations

from bisect import bisect_right
from collections import defaultdict
from fractions import Fraction
from statistics import median_low

from .config import Config
from .episodes import Episode
from .ingest import UNREPORTED, GameBundle
from .model import ONE, SHARE_SCALE, MarketKind, Phase

_DEFAULT = Config()


def _phase(ts: int, bundle: GameBundle) -> Phase:
    s = bundle.schedule
    return Phase.PRE_GAME if ts < s.tip_off else Phase.IN_GAME if ts < s.physical_end else Phase.POST_GAME


def _cluster_times(bundle: GameBundle, window_us: int) -> list[int]:
    """Cluster timestamp of every record, by index."""
    out = []
    anchor = None
    for i, rec in enumerate(bundle.records):
        if i == 0 or rec.ts - bundle.records[i - 1].ts > window_us:
            anchor = rec.ts
        out.append(anchor)
    return out


class _Quotes:
    """Per token, per side: sorted (cluster_ts, quote) lists of reported values."""

    def __init__(self, bundle: GameBundle, window_us: int):
        cts = _cluster_times(bundle, window_us)
        self.updates: dict[str, list[int]] = defaultdict(list)
        side_ts: dict[tuple[str, str], list[int]] = defaultdict(list)
        side_val: dict[tuple[str, str], list] = defaultdict(list)
        for t, rec in zip(cts, bundle.records):
            self.updates[rec.token_id].append(t)
            for name, val in (("bid", rec.bid), ("ask", rec.ask)):
                if val is UNREPORTED:
                    continue
                key = (rec.token_id, name)
                if side_ts[key] and side_ts[key][-1] == t:
                    side_val[key][-1] = val
                else:
                    side_ts[key].append(t)
                    side_val[key].append(val)
        self.side_ts = side_ts
        self.side_val = side_val

    def observed(self, token: str, t: int) -> bool:
        ups = self.updates.get(token, ())
        return bool(ups) and ups[0] <= t

    def quote(self, token: str, side: str, t: int):
        key = (token, side)
        ts = self.side_ts.get(key)
        if not ts:
            return None
        i = bisect_right(ts, t)
        return self.side_val[key][i - 1] if i else None


def _best(cands, lowest: bool):
    """Best (price, size) over candidate quotes; equal prices pool sizes."""
    cands = [c for c in cands if c is not None]
    if not cands:
        return None
    price = min(c[0] for c in cands) if lowest else max(c[0] for c in cands)
    return (price, sum(c[1] for c in cands if c[0] == price))


def _flip(q):
    return None if q is None else (ONE - q[0], q[1])


def _effective(quotes: _Quotes, tok: str, other: str, t: int, merge: bool):
    bid, ask = quotes.quote(tok, "bid", t), quotes.quote(tok, "ask", t)
    bid = None if bid is None else (bid.price, bid.size)
    ask = None if ask is None else (ask.price, ask.size)
    if not merge:
        return bid, ask
    obid, oask = quotes.quote(other, "bid", t), quotes.quote(other, "ask", t)
    obid = None if obid is None else (obid.price, obid.size)
    oask = None if oask is None else (oask.price, oask.size)
    return _best([bid, _flip(oask)], lowest=False), _best([ask, _flip(obid)], lowest=True)


class _Sig:
    __slots__ = ("ts", "key", "edge", "bottleneck_shares", "unit_capital", "phase")

    def __init__(self, ts, key, edge, bottleneck, unit, phase):
        self.ts, self.key, self.edge, self.bottleneck_shares, self.unit_capital, self.phase = ts, key, edge, bottleneck, unit, phase


def _floor(notional: int, cfg: Config) -> bool:
    floor = cfg.floor_micro * SHARE_SCALE
    return notional >= floor if cfg.floor_inclusive else notional > floor


def _budget_shares(budget: int, unit: int) -> int:
    return int(Fraction(budget, unit)) * SHARE_SCALE


def _single_signal(quotes, tokens, market_id, t, cfg):
    a, b = tokens
    a_bid, a_ask = _effective(quotes, a, b, t, cfg.mirror_merge)
    b_bid, b_ask = _effective(quotes, b, a, t, cfg.mirror_merge)
    found = []
    if a_ask and b_ask and ONE - (a_ask[0] + b_ask[0]) > cfg.threshold_micro:
        size = min(a_ask[1], b_ask[1])
        cost = a_ask[0] + b_ask[0]
        if _floor(size * cost, cfg):
            found.append(("long", ONE - cost, size, cost))
    if a_bid and b_bid and a_bid[0] + b_bid[0] - ONE > cfg.threshold_micro:
        size = min(a_bid[1], b_bid[1])
        if _floor(size * ONE, cfg):
            found.append(("short", a_bid[0] + b_bid[0] - ONE, size, ONE))
    if not found:
        return None
    budget = cfg.budget_micro
    # highest budget-capped profit; the Buy path is listed first and wins ties
    return max(found, key=lambda f: (f[1] * min(f[2], _budget_shares(budget, f[3])), f[0] == "long"))


def _episodes_for_stream(bundle, times, sigs, kind, cfg):
    """Group, measure and price one stream; returns (active, excluded)."""
    gaps = [b - a for a, b in zip(times, times[1:])]
    med = median_low(gaps) if gaps else cfg.fallback_gap_us
    ceil = {
        Phase.PRE_GAME: cfg.ceilings.pre_game_s * 1_000_000,
        Phase.IN_GAME: cfg.ceilings.in_game_s * 1_000_000,
        Phase.POST_GAME: cfg.ceilings.post_game_s * 1_000_000,
    }
    out = {False: [], True: []}
    i = 0
    n = len(times)
    while i < n:
        s = sigs[i]
        if s is None:
            i += 1
            continue
        post = s.phase is Phase.POST_GAME
        j = i
        while j + 1 < n and sigs[j + 1] is not None and sigs[j + 1].key == s.key and (sigs[j + 1].phase is Phase.POST_GAME) == post:
            j += 1
        run = sigs[i : j + 1]
        dur = med
        for k in range(len(run) - 1):
            dur += min(run[k + 1].ts - run[k].ts, ceil[run[k].phase])
        capped_vals = []
        for r in run:
            shares = min(r.bottleneck_shares, _budget_shares(cfg.budget_micro, r.unit_capital))
            capped_vals.append((r.edge * shares, shares, r))
        best_capped = max(c[0] for c in capped_vals)
        arg = next(c for c in capped_vals if c[0] == best_capped)
        uncapped = max(r.edge * r.bottleneck_shares for r in run)
        deployed = arg[1] * arg[2].unit_capital
        yld = float(Fraction(10_000 * best_capped, deployed)) if deployed else 0.0
        out[post].append(
            Episode(
                slug=bundle.slug,
                key=s.key,
                kind=kind,
                start_ts=run[0].ts,
                end_ts=run[-1].ts,
                snapshots=tuple(run),
                phase=run[0].phase,
                credited_duration_us=int(dur),
                capped_profit=best_capped,
                uncapped_profit=uncapped,
                yield_bps=yld,
                executable_shares=arg[1],
                budget_shares=_budget_shares(cfg.budget_micro, arg[2].unit_capital),
            )
        )
        i = j + 1
    return out[False], out[True]


def _timeline(quotes: _Quotes, tokens) -> list[int]:
    ts = set()
    for tok in tokens:
        ts.update(quotes.updates.get(tok, ()))
    return sorted(ts)


def brute_force_single(bundle: GameBundle, cfg: Config = _DEFAULT) -> tuple[list[Episode], list[Episode]]:
    quotes = _Quotes(bundle, cfg.window_us)
    active, excluded = [], []
    for m in bundle.markets:
        times = [t for t in _timeline(quotes, m.tokens) if all(quotes.observed(tok, t) for tok in m.tokens)]
        sigs = []
        for t in times:
            hit = _single_signal(quotes, m.tokens, m.market_id, t, cfg)
            if hit is None:
                sigs.append(None)
                continue
            path, edge, size, unit = hit
            sigs.append(_Sig(t, f"{m.market_id}:{path}", edge, size, unit, _phase(t, bundle)))
        a, x = _episodes_for_stream(bundle, times, sigs, m.kind.value, cfg)
        active += a
        excluded += x
    return active, excluded


def _pairs(bundle: GameBundle):
    """(ml, spread, ml_a, ml_b, sp_a, sp_b, h_half) for valid moneyline/spread pairs."""
    mls = [m for m in bundle.markets if m.kind is MarketKind.MONEYLINE]
    sps = [m for m in bundle.markets if m.kind is MarketKind.SPREAD and m.handicap_half]
    out = []
    for ml in mls:
        fav = ml.outcomes[0] if ml.outcomes else None
        for sp in sps:
            layer = 0 if sp.handicap_half < 0 else 1
            if fav is not None and sp.outcomes is not None:
                if sp.outcomes[layer] != fav:
                    continue
            elif layer:
                continue
            h = abs(sp.handicap_half)
            if h < 3 or h % 2 == 0:
                continue
            out.append((ml, sp, ml.tokens[0], ml.tokens[1], sp.tokens[layer], sp.tokens[1 - layer], h))
    return out


def brute_force_combo(bundle: GameBundle, cfg: Config = _DEFAULT) -> tuple[list[Episode], list[Episode]]:
    quotes = _Quotes(bundle, cfg.window_us)
    active, excluded = [], []
    for ml, sp, ml_a, ml_b, sp_a, sp_b, _h in _pairs(bundle):
        legs = (ml_a, ml_b, sp_a, sp_b)
        key = f"{ml.market_id}|{sp.market_id}"
        times = [t for t in _timeline(quotes, legs) if all(quotes.observed(tok, t) for tok in legs)]
        sigs = []
        for t in times:
            _, ask_a = _effective(quotes, ml_a, ml_b, t, cfg.mirror_merge)
            _, ask_b = _effective(quotes, sp_b, sp_a, t, cfg.mirror_merge)
            sig = None
            if ask_a and ask_b:
                cost = ask_a[0] + ask_b[0]
                size = min(ask_a[1], ask_b[1])
                if ONE - cost > cfg.threshold_micro and _floor(size * cost, cfg):
                    sig = _Sig(t, key, ONE - cost, size, cost, _phase(t, bundle))
            sigs.append(sig)
        a, x = _episodes_for_stream(bundle, times, sigs, "combo", cfg)
        active += a
        excluded += x
    return active, excluded


def brute_force_scan(bundle: GameBundle, cfg: Config = _DEFAULT, mode: str = "both") -> list[Episode]:
    """Reference active-episode list (single, combo or both)."""
    eps: list[Episode] = []
    if mode in ("single", "both"):
        eps += brute_force_single(bundle, cfg)[0]
    if mode in ("combo", "both"):
        eps += brute_force_combo(bundle, cfg)[0]
    return eps
