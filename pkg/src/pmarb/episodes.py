"""Episode grouping, Trust-Ceiling durations and one-shot profit."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from typing import Iterable, Sequence

from .config import Config, TrustCeiling
from .detect import budget_shares
from .model import SHARE_SCALE, US, Phase, format_ts


@dataclass(frozen=True)
class OneShot:
    capped: int  # 1e-12 USDC
    uncapped: int
    yield_bps: float
    executable_shares: int  # micro-shares at the capped argmax
    budget_shares: int
    argmax: int

    @property
    def liquidity_constrained(self) -> bool:
        """Resting size could not absorb the whole budget."""
        return self.executable_shares < self.budget_shares

    @property
    def budget_binding(self) -> bool:
        return not self.liquidity_constrained


@dataclass(frozen=True)
class Episode:
    slug: str
    key: str
    kind: str
    start_ts: int
    end_ts: int
    snapshots: tuple
    phase: Phase
    credited_duration_us: int
    capped_profit: int
    uncapped_profit: int
    yield_bps: float
    executable_shares: int
    budget_shares: int
    jackpot: bool | None = None

    @property
    def episode_id(self) -> str:
        return f"{self.slug}/{self.key}@{format_ts(self.start_ts)}"

    @property
    def duration_s(self) -> Decimal:
        return Decimal(self.credited_duration_us) / US

    @property
    def liquidity_constrained(self) -> bool:
        return self.executable_shares < self.budget_shares

    @property
    def capped_usdc(self) -> Decimal:
        return Decimal(self.capped_profit).scaleb(-12)

    @property
    def uncapped_usdc(self) -> Decimal:
        return Decimal(self.uncapped_profit).scaleb(-12)

    def fingerprint(self) -> tuple:
        """Fields compared in oracle-equivalence checks."""
        return (
            self.slug,
            self.key,
            self.start_ts,
            self.end_ts,
            len(self.snapshots),
            self.phase,
            self.credited_duration_us,
            self.capped_profit,
            self.uncapped_profit,
            self.yield_bps,
            self.executable_shares,
        )


def group_episodes(evaluated: Iterable) -> list[tuple]:
    """Split a per-state signal sequence (``None`` = no arbitrage) into runs.

    A run ends at the first state without a signal or whose signal has a
    different key (e.g. Long followed by Short).
    """
    runs: list[tuple] = []
    cur: list = []
    for sig in evaluated:
        if sig is None:
            if cur:
                runs.append(tuple(cur))
                cur = []
            continue
        if cur and cur[-1].key != sig.key:
            runs.append(tuple(cur))
            cur = []
        cur.append(sig)
    if cur:
        runs.append(tuple(cur))
    return runs


def median_gap_us(timestamps: Sequence[int]) -> int | None:
    """Lower median of the gaps between consecutive distinct timestamps."""
    uniq = sorted(set(timestamps))
    if len(uniq) < 2:
        return None
    gaps = sorted(b - a for a, b in zip(uniq, uniq[1:]))
    return gaps[(len(gaps) - 1) // 2]


def credited_duration(snapshots: Sequence, ceilings: TrustCeiling, median_gap: int) -> int:
    """Forward gaps capped per phase; the terminal snapshot is credited ``median_gap``.

    All values in microseconds.  Each snapshot needs ``ts`` and ``phase``.
    """
    total = 0
    for cur, nxt in zip(snapshots, snapshots[1:]):
        total += min(nxt.ts - cur.ts, ceilings.for_phase_us(cur.phase))
    return total + median_gap


def one_shot_profit(snapshots: Sequence, budget_micro: int) -> OneShot:
    """Best single execution across an episode's snapshots.

    Capped and uncapped maxima are taken independently; yield and sizes
    refer to the capped argmax (earliest on ties).
    """
    if not snapshots:
        raise ValueError("episode has no snapshots")
    best_capped = best_uncapped = -1
    arg = 0
    for i, sig in enumerate(snapshots):
        shares = min(sig.bottleneck_shares, budget_shares(budget_micro, sig.unit_capital))
        capped = sig.edge * shares
        uncapped = sig.edge * sig.bottleneck_shares
        if capped > best_capped:
            best_capped, arg = capped, i
        if uncapped > best_uncapped:
            best_uncapped = uncapped
    sig = snapshots[arg]
    cap_shares = budget_shares(budget_micro, sig.unit_capital)
    exec_shares = min(sig.bottleneck_shares, cap_shares)
    deployed = exec_shares * sig.unit_capital
    yld = 10_000 * best_capped / deployed if deployed else 0.0
    return OneShot(best_capped, best_uncapped, yld, exec_shares, cap_shares, arg)


def build_episode(
    run: Sequence,
    slug: str,
    kind: str,
    median_gap: int | None,
    cfg: Config,
) -> Episode:
    gap = median_gap if median_gap is not None else cfg.fallback_gap_us
    shot = one_shot_profit(run, cfg.budget_micro)
    return Episode(
        slug=slug,
        key=run[0].key,
        kind=kind,
        start_ts=run[0].ts,
        end_ts=run[-1].ts,
        snapshots=tuple(run),
        phase=run[0].phase,
        credited_duration_us=credited_duration(run, cfg.ceilings, gap),
        capped_profit=shot.capped,
        uncapped_profit=shot.uncapped,
        yield_bps=shot.yield_bps,
        executable_shares=shot.executable_shares,
        budget_shares=shot.budget_shares,
    )


@dataclass(frozen=True)
class LiquidityStats:
    episodes: int
    constrained: int
    fraction: Decimal
    mean_shares_constrained: Decimal | None
    mean_shares_all: Decimal | None


def liquidity_binding_stats(episodes: Sequence[Episode]) -> LiquidityStats:
    """Share of episodes whose resting size could not absorb the budget."""
    n = len(episodes)
    if n == 0:
        return LiquidityStats(0, 0, Decimal(0), None, None)
    hit = [e for e in episodes if e.liquidity_constrained]
    scale = Decimal(SHARE_SCALE)

    def mean(eps):
        if not eps:
            return None
        return Decimal(sum(e.executable_shares for e in eps)) / scale / len(eps)

    return LiquidityStats(n, len(hit), Decimal(len(hit)) / n, mean(hit), mean(episodes))


def naive_capped_sum(snapshots: Sequence, budget_micro: int) -> int:
    return sum(
        s.edge * min(s.bottleneck_shares, budget_shares(budget_micro, s.unit_capital)) for s in snapshots
    )

