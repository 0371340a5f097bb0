"""Streaming scan of one game: reconstruct -> detect -> episodes."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable

from .combo import ComboPair, detect_combo_state, enumerate_pairs, resolve_payoff
from .config import Config
from .detect import DEFAULT_CONFIG, dedup_signals, detect_long, detect_short
from .episodes import Episode, build_episode, group_episodes, median_gap_us
from .ingest import GameBundle
from .model import GameSchedule, Phase
from .reconstruct import AlignedState, cluster_batches, effective_pair, project_states


@dataclass(frozen=True)
class StreamWindow:
    """Observation span of one evaluated stream (a market or a pair)."""

    slug: str
    key: str
    kind: str
    first_ts: int
    last_ts: int
    schedule: GameSchedule


@dataclass
class ScanResult:
    mode: str
    episodes: list[Episode] = field(default_factory=list)
    artifacts: list[Episode] = field(default_factory=list)
    evaluated: Counter = field(default_factory=Counter)
    spreads: dict = field(default_factory=lambda: {p: [] for p in Phase})
    windows: list[StreamWindow] = field(default_factory=list)
    counters: Counter = field(default_factory=Counter)
    pairs: list[ComboPair] = field(default_factory=list)
    schedules: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)

    def merge(self, other: "ScanResult") -> "ScanResult":
        self.episodes.extend(other.episodes)
        self.artifacts.extend(other.artifacts)
        self.evaluated.update(other.evaluated)
        for p in Phase:
            self.spreads[p].extend(other.spreads[p])
        self.windows.extend(other.windows)
        self.counters.update(other.counters)
        self.pairs.extend(other.pairs)
        self.schedules.update(other.schedules)
        self.results.update(other.results)
        return self

    @property
    def state_count(self) -> int:
        return sum(self.evaluated.values())


def _finish_stream(
    result: ScanResult,
    slug: str,
    key: str,
    kind: str,
    timestamps: list[int],
    active: list,
    post: list,
    sched: GameSchedule,
    cfg: Config,
) -> None:
    if not timestamps:
        return
    gap = median_gap_us(timestamps)
    for run in group_episodes(active):
        result.episodes.append(build_episode(run, slug, kind, gap, cfg))
    for run in group_episodes(post):
        result.artifacts.append(build_episode(run, slug, kind, gap, cfg))
    result.windows.append(StreamWindow(slug, key, kind, timestamps[0], timestamps[-1], sched))


def evaluate_single_state(state: AlignedState, market_id: str, cfg: Config):
    """(effective state, retained signal or None) for one market state."""
    if cfg.mirror_merge:
        state = AlignedState(state.ts, effective_pair(*state.legs), state.freshness, state.phase)
    long = detect_long(state, market_id, cfg)
    short = detect_short(state, market_id, cfg)
    return state, dedup_signals(long, short, cfg.budget_micro)


def scan_single(bundle: GameBundle, cfg: Config = DEFAULT_CONFIG) -> ScanResult:
    sched = bundle.schedule
    result = ScanResult("single", schedules={bundle.slug: sched}, results={bundle.slug: bundle.result})
    result.counters["dedup_dropped"] += bundle.dedup_dropped
    clusters = cluster_batches(bundle.records, cfg.window_us)
    for m in bundle.markets:
        timestamps, active, post = [], [], []
        for state in project_states(clusters, m.tokens, sched):
            eff, sig = evaluate_single_state(state, m.market_id, cfg)
            timestamps.append(state.ts)
            result.evaluated[state.phase] += 1
            a, b = eff.legs
            if a.best_bid is not None and a.best_ask is not None:
                result.spreads[state.phase].append(a.best_ask.price - a.best_bid.price)
            if b.best_bid is not None and b.best_ask is not None:
                result.spreads[state.phase].append(b.best_ask.price - b.best_bid.price)
            if sig is not None and state.phase is Phase.POST_GAME:
                result.counters["post_game_signals"] += 1
                active.append(None)
                post.append(sig)
            else:
                active.append(sig)
                post.append(None)
        _finish_stream(result, bundle.slug, m.market_id, m.kind.value, timestamps, active, post, sched, cfg)
    return result


def scan_combo(bundle: GameBundle, cfg: Config = DEFAULT_CONFIG) -> ScanResult:
    sched = bundle.schedule
    result = ScanResult("combo", schedules={bundle.slug: sched}, results={bundle.slug: bundle.result})
    result.counters["dedup_dropped"] += bundle.dedup_dropped
    pairs = enumerate_pairs(bundle.markets)
    result.pairs.extend(pairs)
    if not pairs:
        return result
    clusters = cluster_batches(bundle.records, cfg.window_us)
    n_before = len(result.episodes)
    for pair in pairs:
        timestamps, active, post = [], [], []
        for state in project_states(clusters, pair.legs, sched):
            sig = detect_combo_state(state, pair, cfg)
            timestamps.append(state.ts)
            result.evaluated[state.phase] += 1
            if sig is not None and sig.dominance_violated:
                result.counters["dominance_violations"] += 1
            if sig is not None and state.phase is Phase.POST_GAME:
                result.counters["post_game_signals"] += 1
                active.append(None)
                post.append(sig)
            else:
                active.append(sig)
                post.append(None)
        _finish_stream(result, bundle.slug, pair.pair_id, "combo", timestamps, active, post, sched, cfg)
    if bundle.result is not None:
        by_id = {p.pair_id: p for p in pairs}
        result.episodes[n_before:] = [
            replace(ep, jackpot=resolve_payoff(by_id[ep.key], bundle.result).jackpot) for ep in result.episodes[n_before:]
        ]
    return result


def scan_many(bundles: Iterable[GameBundle], mode: str, cfg: Config = DEFAULT_CONFIG) -> ScanResult:
    fn = scan_single if mode == "single" else scan_combo
    total = ScanResult(mode)
    for bundle in sorted(bundles, key=lambda b: b.slug):
        total.merge(fn(bundle, cfg))
    return total
