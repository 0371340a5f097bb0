"""``pmarb`` command line: scan-single, scan-combo, collect, synth.

Exit codes: 0 ok, 1 data error, 2 configuration error (including a missing
metadata sidecar or an invalid scenario), 3 network error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .analytics import emit_report, summarize
from .collector import Collector, IntervalPolicy, LogAppender, VenueUnreachable, cadence_stats
from .config import Config, ConfigError, load_config
from .ingest import LogFormatError, MissingSidecarError, find_logs, read_log, read_metadata
from .pipeline import ScanResult, scan_combo, scan_single
from .synth import ScenarioError, load_spec, write_scenario

log = logging.getLogger("pmarb")

EXIT_OK, EXIT_DATA, EXIT_CONFIG, EXIT_NETWORK = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


# -- commands -------------------------------------------------------------


def _log_paths(input_path: Path) -> list[Path]:
    if input_path.is_dir():
        return find_logs(input_path)
    if input_path.is_file():
        return [input_path]
    raise CliError(EXIT_CONFIG, f"input {input_path} does not exist")


def _meta_for(log_path: Path, meta_dir: Path | None) -> Path | None:
    if meta_dir is None:
        return None
    return meta_dir / (log_path.name[: -len(".jsonl")] + ".meta.json")


def _scan_one(args: tuple[str, Path, Path | None, Config]) -> ScanResult:
    mode, path, meta, cfg = args
    bundle = read_log(path, meta)
    return (scan_single if mode == "single" else scan_combo)(bundle, cfg)


def cmd_scan(mode: str, cfg: Config, input_path: Path, out: Path, fmt: str = "json", jobs: int = 1, meta_dir: Path | None = None):
    """Scan every log under ``input_path`` and write the report to ``out``."""
    paths = _log_paths(input_path)
    work = [(mode, p, _meta_for(p, meta_dir), cfg) for p in paths]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_scan_one, work))
    else:
        parts = [_scan_one(w) for w in work]
    total = ScanResult(mode)
    # merge in slug order so the report does not depend on file or worker order
    for part in sorted(parts, key=lambda r: sorted(r.schedules)):
        total.merge(part)
    report = summarize(total, cfg)
    files = emit_report(report, out, fmt)
    return report, files


def cmd_synth(spec_path: Path, out: Path, seed: int | None = None):
    spec = load_spec(spec_path)
    if seed is not None:
        spec = replace(spec, seed=seed)
    return write_scenario(spec, out)


def cmd_collect(
    endpoint: str,
    slugs: Sequence[str],
    out: Path,
    meta_dir: Path | None = None,
    interval: IntervalPolicy = IntervalPolicy(),
    max_sweeps: int | None = None,
    collector_kwargs: dict | None = None,
) -> Collector:
    """Poll until interrupted (or ``max_sweeps``), appending to ``out/<slug>.jsonl``."""
    meta_dir = meta_dir or out
    markets = {}
    for slug in slugs:
        meta = meta_dir / f"{slug}.meta.json"
        if not meta.exists():
            raise MissingSidecarError(slug, meta)
        _, ms, _ = read_metadata(meta)
        markets[slug] = ms
    collector = Collector(endpoint, markets, interval, **(collector_kwargs or {}))
    sink = LogAppender(out)
    for slug in slugs:
        if sink.path_for(slug).exists():
            collector.seed_from_log(sink.path_for(slug))
    n = 0
    try:
        while max_sweeps is None or n < max_sweeps:
            if n:
                collector.wait()
            records = collector.sweep()
            sink.append(records)
            sink.append_sweep(collector.sweeps[-1])
            n += 1
    except KeyboardInterrupt:
        log.info("interrupted after %d sweeps", n)
    finally:
        collector.close()
    return collector


# -- argument parsing -----------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML key/value config file")
    p.add_argument("--budget", type=str, help="per-episode budget in USDC (default 100)")
    p.add_argument("--liquidity-floor", type=str, help="minimum executable notional in USDC (default 10)")
    p.add_argument("--cluster-window-ms", type=int, help="timestamp clustering window (default 500)")
    p.add_argument("--ceiling-pre", type=int, help="pre-game trust ceiling in seconds (default 1800)")
    p.add_argument("--ceiling-in", type=int, help="in-game trust ceiling in seconds (default 300)")
    p.add_argument("--ceiling-post", type=int, help="post-game trust ceiling in seconds (default 1800)")
    p.add_argument("--no-mirror-merge", action="store_true", help="logs already carry venue-effective books")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmarb", description="Arbitrage episode analysis for binary sports markets.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in (("scan-single", "single-market Buy / Mint-and-Sell scan"), ("scan-combo", "moneyline/spread combo scan")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--input", type=Path, required=True, help="log file or directory of *.jsonl logs")
        p.add_argument("--out", type=Path, required=True, help="report directory")
        p.add_argument("--meta", type=Path, help="directory holding the .meta.json sidecars (default: next to logs)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        _add_config_flags(p)

    p = sub.add_parser("collect", help="poll a /book endpoint into logs")
    p.add_argument("--endpoint", required=True)
    p.add_argument("--slugs", required=True, help="comma-separated event slugs")
    p.add_argument("--out", type=Path, required=True, help="log directory")
    p.add_argument("--meta", type=Path, help="sidecar directory (default: --out)")
    p.add_argument("--interval", default="3.6,5.5", help="min,max seconds between sweep starts")
    p.add_argument("--seed", type=int, help="seed for the interval draw")
    p.add_argument("--max-sweeps", type=int)

    p = sub.add_parser("synth", help="generate a seeded synthetic scenario")
    p.add_argument("spec", type=Path, help="scenario JSON")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, help="override the scenario seed")
    return parser


def _config_from_args(args) -> Config:
    overrides = {
        "budget_usdc": args.budget,
        "liquidity_floor_usdc": args.liquidity_floor,
        "cluster_window_ms": args.cluster_window_ms,
        "ceiling_pre": args.ceiling_pre,
        "ceiling_in": args.ceiling_in,
        "ceiling_post": args.ceiling_post,
        "input": args.input,
        "out": args.out,
    }
    if args.no_mirror_merge:
        overrides["mirror_merge"] = False
    try:
        return load_config(args.config, **overrides)
    except (ArithmeticError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _interval(text: str, seed: int | None) -> IntervalPolicy:
    try:
        lo, hi = (float(x) for x in text.split(","))
        return IntervalPolicy(lo, hi, seed)
    except ValueError as exc:
        raise ConfigError(f"bad --interval {text!r}: {exc}") from None


def _run(args) -> int:
    if args.command in ("scan-single", "scan-combo"):
        cfg = _config_from_args(args)
        mode = "single" if args.command == "scan-single" else "combo"
        report, files = cmd_scan(mode, cfg, args.input, args.out, args.format, max(1, args.jobs), args.meta)
        c = report["counts"]
        print(f"{mode}: {c['games']} games, {c['evaluated_states']} states, {c['active_episodes']} episodes -> {args.out}")
        return EXIT_OK
    if args.command == "synth":
        paths, manifest = cmd_synth(args.spec, args.out, args.seed)
        print(f"wrote {len(paths)} logs and {manifest}")
        return EXIT_OK
    if args.command == "collect":
        slugs = [s for s in args.slugs.split(",") if s]
        if not slugs:
            raise ConfigError("--slugs is empty")
        collector = cmd_collect(args.endpoint, slugs, args.out, args.meta, _interval(args.interval, args.seed), args.max_sweeps)
        cad = cadence_stats(collector.sweeps)
        print(f"{cad.sweeps} sweeps, interval min/median/max: {cad.min_s}/{cad.median_s}/{cad.max_s} s")
        return EXIT_OK
    raise CliError(EXIT_CONFIG, f"unknown command {args.command}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _run(args)
    except (MissingSidecarError, ConfigError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except VenueUnreachable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except LogFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
