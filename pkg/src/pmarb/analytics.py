"""Summary tables, distributions and report files.

Conventions: medians are lower medians for even-sized samples, histogram
bins are left-closed/right-open, and every number is rendered through a
fixed decimal format so repeated runs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Any, Iterable, Sequence

from .combo import JackpotAudit, jackpot_audit
from .config import Config
from .episodes import Episode, liquidity_binding_stats
from .model import US, MarketKind, Phase, format_ts
from .pipeline import ScanResult

MISSING = "---"
SUB_POLLING_S = Decimal("4.0")

_Q = {
    "usd": Decimal("0.000001"),
    "s": Decimal("0.001"),
    "pct": Decimal("0.000001"),
    "bps": Decimal("0.01"),
    "shares": Decimal("0.000001"),
    "frac": Decimal("0.0001"),
}


def fmt(value, unit: str) -> str | None:
    if value is None:
        return None
    return str(Decimal(value).quantize(_Q[unit], rounding=ROUND_HALF_EVEN))


def lower_median(values: Sequence):
    if not values:
        return None
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


@dataclass(frozen=True)
class PhaseSummary:
    phase: Phase | None  # None = totals row
    evaluated_states: int
    episode_count: int
    pct_time_in_arb: Decimal | None
    median_duration_s: Decimal | None
    capped_profit_total: Decimal
    uncapped_profit_total: Decimal
    median_yield_bps: float | None


@dataclass(frozen=True)
class MarketTypeSummary:
    kind: str  # "overall" for the totals row
    episode_count: int
    median_duration_s: Decimal | None
    capped: Decimal
    uncapped: Decimal


@dataclass(frozen=True)
class SpreadByPhase:
    phase: Phase
    samples: int
    median_spread_bps: Decimal | None


@dataclass(frozen=True)
class Histogram:
    bin_width_s: Decimal
    bins: tuple[tuple[Decimal, Decimal, int], ...]
    sub_polling_share: Decimal | None


def duration_histogram(durations_s: Iterable, bin_width_s=Decimal(4)) -> Histogram:
    width = Decimal(bin_width_s)
    if width <= 0:
        raise ValueError("bin width must be positive")
    durs = [Decimal(d) for d in durations_s]
    if not durs:
        return Histogram(width, (), None)
    counts: dict[int, int] = {}
    for d in durs:
        idx = int(d // width)
        counts[idx] = counts.get(idx, 0) + 1
    bins = tuple((i * width, (i + 1) * width, counts.get(i, 0)) for i in range(max(counts) + 1))
    share = Decimal(sum(1 for d in durs if d <= SUB_POLLING_S)) / len(durs)
    return Histogram(width, bins, share)


def _phase_walls(scan: ScanResult) -> dict[Phase, int]:
    """Wall-clock per phase summed over evaluated streams, in microseconds."""
    walls = {p: 0 for p in Phase}
    for w in scan.windows:
        s = w.schedule
        first, last = min(w.first_ts, s.tip_off), max(w.last_ts, s.physical_end)
        walls[Phase.PRE_GAME] += s.tip_off - first
        walls[Phase.IN_GAME] += s.physical_end - s.tip_off
        walls[Phase.POST_GAME] += last - s.physical_end
    return walls


def _dur_s(ep: Episode) -> Decimal:
    return Decimal(ep.credited_duration_us) / US


def _row(phase, states: int, eps: Sequence[Episode], pct) -> PhaseSummary:
    return PhaseSummary(
        phase=phase,
        evaluated_states=states,
        episode_count=len(eps),
        pct_time_in_arb=pct,
        median_duration_s=lower_median([_dur_s(e) for e in eps]),
        capped_profit_total=sum((e.capped_usdc for e in eps), Decimal(0)),
        uncapped_profit_total=sum((e.uncapped_usdc for e in eps), Decimal(0)),
        median_yield_bps=lower_median([e.yield_bps for e in eps]),
    )


def phase_summaries(scan: ScanResult) -> list[PhaseSummary]:
    walls = _phase_walls(scan)
    rows = []
    for phase in Phase:
        eps = [e for e in scan.episodes if e.phase is phase]
        arb = sum(e.credited_duration_us for e in eps)
        pct = min(Decimal(100), Decimal(100 * arb) / walls[phase]) if walls[phase] else Decimal(0)
        rows.append(_row(phase, scan.evaluated[phase], eps, pct))
    wall = sum(walls.values())
    arb = sum(e.credited_duration_us for e in scan.episodes)
    pct = min(Decimal(100), Decimal(100 * arb) / wall) if wall else Decimal(0)
    rows.append(_row(None, scan.state_count, scan.episodes, pct))
    return rows


def market_type_summaries(scan: ScanResult) -> list[MarketTypeSummary]:
    rows = []

    def build(kind, eps):
        return MarketTypeSummary(
            kind,
            len(eps),
            lower_median([_dur_s(e) for e in eps]),
            sum((e.capped_usdc for e in eps), Decimal(0)),
            sum((e.uncapped_usdc for e in eps), Decimal(0)),
        )

    kinds = [k.value for k in MarketKind] + (["combo"] if scan.mode == "combo" else [])
    for kind in kinds:
        eps = [e for e in scan.episodes if e.kind == kind]
        if eps or kind in ("moneyline", "spread", "total"):
            rows.append(build(kind, eps))
    rows.append(build("overall", scan.episodes))
    return rows


def spread_by_phase(scan: ScanResult) -> list[SpreadByPhase]:
    out = []
    for phase in Phase:
        vals = scan.spreads[phase]
        med = lower_median(vals)
        out.append(SpreadByPhase(phase, len(vals), None if med is None else Decimal(med) / 100))
    return out


def tipoff_scatter(scan: ScanResult) -> list[tuple[Decimal, Decimal]]:
    """(seconds from tip-off, credited duration) per in-game episode."""
    pts = []
    for e in scan.episodes:
        if e.phase is Phase.IN_GAME:
            tip = scan.schedules[e.slug].tip_off
            pts.append((Decimal(e.start_ts - tip) / US, _dur_s(e)))
    return sorted(pts)


# -- report assembly ----------------------------------------------------------


def _phase_label(phase: Phase | None) -> str:
    return "Total" if phase is None else phase.label


def summarize(scan: ScanResult, cfg: Config, bin_width_s=Decimal(4)) -> dict[str, Any]:
    """All tables of one scan as a plain, JSON-ready dict with fixed key order."""
    episodes = sorted(scan.episodes, key=lambda e: (e.slug, e.start_ts, e.key))
    artifacts = scan.artifacts
    liq = liquidity_binding_stats(episodes)
    hist = duration_histogram([_dur_s(e) for e in episodes], bin_width_s)
    report: dict[str, Any] = {
        "mode": scan.mode,
        "config": {
            "budget_usdc": str(cfg.budget_usdc),
            "liquidity_floor_usdc": str(cfg.liquidity_floor_usdc),
            "floor_inclusive": cfg.floor_inclusive,
            "cluster_window_ms": cfg.cluster_window_ms,
            "ceilings_s": [cfg.ceilings.pre_game_s, cfg.ceilings.in_game_s, cfg.ceilings.post_game_s],
            "profit_threshold_usdc": str(cfg.profit_threshold_usdc),
            "mirror_merge": cfg.mirror_merge,
        },
        "counts": {
            "games": len(scan.schedules),
            "streams": len(scan.windows),
            "evaluated_states": scan.state_count,
            "candidate_episodes": len(episodes) + len(artifacts),
            "active_episodes": len(episodes),
            "post_game_excluded_episodes": len(artifacts),
            "post_game_excluded_signals": scan.counters.get("post_game_signals", 0),
            "dedup_dropped_records": scan.counters.get("dedup_dropped", 0),
        },
        "phase_summary": [
            {
                "phase": _phase_label(r.phase),
                "evaluated_states": r.evaluated_states,
                "episodes": r.episode_count,
                "pct_time_in_arb": fmt(r.pct_time_in_arb, "pct"),
                "median_duration_s": fmt(r.median_duration_s, "s"),
                "capped_profit": fmt(r.capped_profit_total, "usd"),
                "uncapped_profit": fmt(r.uncapped_profit_total, "usd"),
                "median_yield_bps": fmt(r.median_yield_bps, "bps"),
            }
            for r in phase_summaries(scan)
        ],
    }
    if scan.mode == "single":
        report["spread_by_phase"] = [
            {"phase": s.phase.label, "samples": s.samples, "median_spread_bps": fmt(s.median_spread_bps, "bps")}
            for s in spread_by_phase(scan)
        ]
        report["market_type_summary"] = [
            {
                "market_type": r.kind,
                "episodes": r.episode_count,
                "median_duration_s": fmt(r.median_duration_s, "s"),
                "capped_profit": fmt(r.capped, "usd"),
                "uncapped_profit": fmt(r.uncapped, "usd"),
            }
            for r in market_type_summaries(scan)
        ]
    else:
        counts: dict[str, int] = {}
        for e in episodes:
            counts[e.key] = counts.get(e.key, 0) + 1
        report["pairs"] = [
            {"pair": p.pair_id, "handicap": str(Decimal(p.h_half) / 2), "episodes": counts.get(p.pair_id, 0)}
            for p in sorted(scan.pairs, key=lambda p: p.pair_id)
        ]
        audit: JackpotAudit = jackpot_audit(episodes, {p.pair_id: p for p in scan.pairs}, scan.results)
        report["jackpot_audit"] = {
            "resolved_episodes": audit.resolved,
            "unresolved_episodes": audit.unresolved,
            "jackpots": audit.jackpots,
            "jackpot_episodes": list(audit.jackpot_episodes),
            "note": "unresolved games are excluded from the audit denominator" if audit.unresolved else "",
        }
    report["liquidity"] = {
        "episodes": liq.episodes,
        "liquidity_constrained": liq.constrained,
        "fraction_constrained": fmt(liq.fraction, "frac"),
        "mean_executable_shares_constrained": fmt(liq.mean_shares_constrained, "shares"),
        "mean_executable_shares_all": fmt(liq.mean_shares_all, "shares"),
    }
    report["duration_histogram"] = {
        "bin_width_s": str(hist.bin_width_s),
        "bins": [{"lo_s": str(lo), "hi_s": str(hi), "count": n} for lo, hi, n in hist.bins],
        "share_le_4s": fmt(hist.sub_polling_share, "frac"),
    }
    report["episodes"] = [_episode_row(e) for e in episodes]
    report["tipoff_scatter"] = [{"offset_s": fmt(o, "s"), "duration_s": fmt(d, "s")} for o, d in tipoff_scatter(scan)]
    return report


def _episode_row(e: Episode) -> dict[str, Any]:
    return {
        "slug": e.slug,
        "key": e.key,
        "kind": e.kind,
        "phase": e.phase.label,
        "start": format_ts(e.start_ts),
        "end": format_ts(e.end_ts),
        "snapshots": len(e.snapshots),
        "duration_s": fmt(_dur_s(e), "s"),
        "capped_profit": fmt(e.capped_usdc, "usd"),
        "uncapped_profit": fmt(e.uncapped_usdc, "usd"),
        "yield_bps": fmt(e.yield_bps, "bps"),
        "executable_shares": fmt(Decimal(e.executable_shares) / 1_000_000, "shares"),
        "liquidity_constrained": e.liquidity_constrained,
        "jackpot": e.jackpot,
    }


# -- output -------------------------------------------------------------------

_CSV_TABLES = ("spread_by_phase", "phase_summary", "market_type_summary", "pairs", "episodes", "tipoff_scatter")


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (MISSING if v is None else v) for k, v in row.items()})
    return buf.getvalue()


def _flat_rows(report: dict) -> dict[str, list[dict]]:
    tables = {name: report[name] for name in _CSV_TABLES if name in report}
    tables["duration_histogram"] = report["duration_histogram"]["bins"]
    scalars = []
    for section in ("counts", "liquidity", "jackpot_audit"):
        for k, v in report.get(section, {}).items():
            if isinstance(v, list):
                v = ";".join(v)
            scalars.append({"section": section, "name": k, "value": v})
    hist = report["duration_histogram"]
    scalars.append({"section": "duration_histogram", "name": "share_le_4s", "value": hist["share_le_4s"]})
    tables["summary"] = scalars
    return tables


def render_text(report: dict) -> str:
    """Markdown tables in the layout of the published summaries."""
    out = [f"# {report['mode']} arbitrage report", ""]

    def table(title, rows, cols):
        out.append(f"## {title}")
        out.append("")
        out.append("| " + " | ".join(c for c, _ in cols) + " |")
        out.append("|" + "|".join("---" for _ in cols) + "|")
        for r in rows:
            out.append("| " + " | ".join(MISSING if r[k] is None else str(r[k]) for _, k in cols) + " |")
        out.append("")

    if "spread_by_phase" in report:
        table("Median bid-ask spread by phase", report["spread_by_phase"], [("Market Phase", "phase"), ("Median Bid-Ask Spread (bps)", "median_spread_bps")])
    table(
        "Episodes by game phase",
        report["phase_summary"],
        [
            ("Game Phase", "phase"),
            ("Evaluated States", "evaluated_states"),
            ("Episodes", "episodes"),
            ("% Time in Arb", "pct_time_in_arb"),
            ("Median Dur. (s)", "median_duration_s"),
            ("Median Yield (bps)", "median_yield_bps"),
            ("Capped Profit", "capped_profit"),
            ("Uncapped Profit", "uncapped_profit"),
        ],
    )
    if "market_type_summary" in report:
        table(
            "Episodes by market type",
            report["market_type_summary"],
            [
                ("Market Type", "market_type"),
                ("Episodes", "episodes"),
                ("Median Duration (s)", "median_duration_s"),
                ("Capped Profit", "capped_profit"),
                ("Uncapped Profit", "uncapped_profit"),
            ],
        )
    if "jackpot_audit" in report:
        a = report["jackpot_audit"]
        out += ["## Middle jackpot audit", "", f"resolved: {a['resolved_episodes']}, unresolved: {a['unresolved_episodes']}, jackpots: {a['jackpots']}", ""]
    liq = report["liquidity"]
    out += [
        "## Liquidity",
        "",
        f"liquidity-constrained episodes: {liq['liquidity_constrained']}/{liq['episodes']} ({liq['fraction_constrained']})",
        f"mean executable shares (constrained): {liq['mean_executable_shares_constrained'] or MISSING}",
        "",
    ]
    c = report["counts"]
    out += [
        "## Counts",
        "",
        f"candidate episodes: {c['candidate_episodes']}, post-game excluded: {c['post_game_excluded_episodes']}, active: {c['active_episodes']}",
        "",
    ]
    return "\n".join(out)


def emit_report(report: dict, out_dir: Path | str, fmt_: str = "json") -> list[Path]:
    """Write ``report.json`` or one CSV per table, plus episodes/scatter CSVs and a markdown view."""
    out_dir = Path(out_dir)
    written: dict[Path, str] = {}
    if fmt_ == "json":
        written[out_dir / "report.json"] = json.dumps(report, indent=2, ensure_ascii=False) + "\n"
    elif fmt_ == "csv":
        for name, rows in _flat_rows(report).items():
            written[out_dir / f"{name}.csv"] = _csv_text(rows)
    else:
        raise ValueError(f"unknown report format {fmt_!r}")
    written.setdefault(out_dir / "episodes.csv", _csv_text(report["episodes"]))
    written.setdefault(out_dir / "tipoff_scatter.csv", _csv_text(report["tipoff_scatter"]))
    written[out_dir / "report.md"] = render_text(report)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for path, text in written.items():
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {out_dir}: {exc}") from exc
    return sorted(written)
