"""Deterministic synthetic games with a manifest of injected arbitrage.

Between injections every market follows a bounded random walk whose books
are arbitrage-free by construction: on the effective (mirror-merged) books
combined asks stay at least one tick above $1.00, and every combinatorial
pair keeps the spread leg priced below the moneyline.  Injections overwrite
the books of the touched market(s) for a run of consecutive sweeps.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import asdict, dataclass, field, replace
from decimal import Decimal
from pathlib import Path
from typing import Any

from .ingest import GameBundle, SnapshotRecord, sort_records, write_log
from .model import (
    ONE,
    SHARE_SCALE,
    US,
    FinalResult,
    GameSchedule,
    Level,
    MarketDescriptor,
    MarketKind,
    Phase,
    format_ts,
    parse_ts,
    phase_of,
)


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Injection:
    """One planned arbitrage run.

    ``target`` is ``"moneyline"``, ``"total"``, ``"spread:<k>"`` (single
    market) or ``"combo:<k>"`` (moneyline + k-th spread).  ``path`` is
    ``"long"`` or ``"short"`` for single markets and ignored for combos.
    ``sizes`` are whole-or-fractional shares for the two priced legs.
    """

    game: int
    target: str
    phase: str = "in_game"
    start_offset_s: float = 600.0
    sweeps: int = 3
    path: str = "long"
    edge_ticks: int = 2
    sizes: tuple[float, float] = (200.0, 150.0)


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int = 42
    games: int = 1
    spreads: tuple[float, ...] = (-1.5, -6.5)
    include_total: bool = True
    start: str = "2026-02-04T23:00:00.000000Z"
    pre_game_s: float = 1800.0
    in_game_s: float = 8100.0
    post_game_s: float = 900.0
    interval_s: tuple[float, float] = (3.6, 5.5)
    skew_ms: tuple[int, int] = (2, 50)
    tick: str = "0.01"
    post_game_withdrawal: bool = True
    injections: tuple[Injection, ...] = ()
    # per-game final margin; None entries are drawn from the seed
    results: tuple[int | None, ...] | None = None
    budget_usdc: str = "100"
    liquidity_floor_usdc: str = "10"

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioSpec":
        raw = dict(raw)
        try:
            injections = tuple(
                Injection(**{**inj, "sizes": tuple(inj.get("sizes", (200.0, 150.0)))}) for inj in raw.pop("injections", [])
            )
            for key in ("spreads", "interval_s", "skew_ms", "results"):
                if raw.get(key) is not None:
                    raw[key] = tuple(raw[key])
            return cls(injections=injections, **raw)
        except TypeError as exc:
            raise ScenarioError(f"invalid scenario: {exc}") from None

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))


@dataclass(frozen=True)
class ManifestEntry:
    slug: str
    key: str
    kind: str
    phase: str
    excluded: bool
    snapshots: int
    start_ts: str
    edge: str
    bottleneck_shares: str
    capped_profit: str
    uncapped_profit: str
    duration_bounds_s: tuple[str, str]
    jackpot: bool | None


@dataclass
class Manifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    @property
    def active(self) -> list[ManifestEntry]:
        return [e for e in self.entries if not e.excluded]

    def to_json(self) -> str:
        return json.dumps({"episodes": [asdict(e) for e in self.entries]}, indent=2) + "\n"


_PHASE_NAMES = {"pre_game": Phase.PRE_GAME, "in_game": Phase.IN_GAME, "post_game": Phase.POST_GAME}


def _book_hash(bid: Level | None, ask: Level | None) -> str:
    text = f"{bid.price if bid else '-'}:{bid.size if bid else '-'}|{ask.price if ask else '-'}:{ask.size if ask else '-'}"
    return hashlib.sha1(text.encode()).hexdigest()[:16]


class _Game:
    """Book state for one synthetic game."""

    def __init__(self, spec: ScenarioSpec, index: int, rng: random.Random, t0: int):
        self.spec = spec
        self.rng = rng
        self.index = index
        self.tick = int(Decimal(spec.tick) * ONE)
        self.slug = f"synth-{spec.seed}-g{index:03d}"
        tip = t0 + int(spec.pre_game_s * US)
        end = tip + int(spec.in_game_s * US)
        self.stop = end + int(spec.post_game_s * US)
        self.t0 = t0
        self.schedule = GameSchedule(self.slug, tip, end)
        markets = [
            MarketDescriptor(f"{self.slug}-ml", self.slug, MarketKind.MONEYLINE, (f"{self.slug}-ml-a", f"{self.slug}-ml-b"), None, ("FAV", "DOG"))
        ]
        for k, line in enumerate(spec.spreads):
            half = int(Decimal(str(line)) * 2)
            markets.append(
                MarketDescriptor(
                    f"{self.slug}-sp{k}", self.slug, MarketKind.SPREAD, (f"{self.slug}-sp{k}-a", f"{self.slug}-sp{k}-b"), half, ("FAV", "DOG")
                )
            )
        if spec.include_total:
            markets.append(MarketDescriptor(f"{self.slug}-tot", self.slug, MarketKind.TOTAL, (f"{self.slug}-tot-a", f"{self.slug}-tot-b")))
        self.markets = markets
        t = self.tick
        # spread k's favorite token trades this far below the moneyline favorite
        self.gaps = [6 * t + 5 * t * k for k in range(len(spec.spreads))]
        self.p = rng.randrange(45, 76) * t
        self.o = rng.randrange(40, 61) * t
        self.last_hash: dict[str, str] = {}

    # -- baseline -----------------------------------------------------------

    def _randint(self, lo: int, hi: int) -> int:
        # cheaper than Random.randint on the hot path; still seeded
        return lo + int(self.rng.random() * (hi - lo + 1))

    def _spreads(self, phase: Phase) -> list[int]:
        r = self._randint
        if phase is Phase.POST_GAME and self.spec.post_game_withdrawal:
            return [r(25, 40) for _ in range(4)]
        if phase is Phase.IN_GAME:
            return [r(1, 5) for _ in range(4)]
        return [r(1, 2) for _ in range(4)]

    def _size(self, phase: Phase) -> int:
        if phase is Phase.POST_GAME and self.spec.post_game_withdrawal:
            return self._randint(1, 40) * SHARE_SCALE
        return self._randint(5, 4000) * SHARE_SCALE // 2

    def _clamp(self, price: int) -> int:
        return min(max(price, self.tick), ONE - self.tick)

    def _baseline(self, x: int, phase: Phase) -> tuple[tuple[Level, Level], tuple[Level, Level]]:
        t = self.tick
        s1, s2, s3, s4 = self._spreads(phase)
        sz = self._size
        a = (Level(self._clamp(x - s1 * t), sz(phase)), Level(self._clamp(x + s2 * t), sz(phase)))
        b = (Level(self._clamp(ONE - x - s3 * t), sz(phase)), Level(self._clamp(ONE - x + s4 * t), sz(phase)))
        return a, b

    def step(self) -> None:
        t = self.tick
        self.p = min(max(self.p + self.rng.choice((-t, 0, 0, t)), 30 * t), 85 * t)
        self.o = min(max(self.o + self.rng.choice((-t, 0, 0, t)), 35 * t), 65 * t)

    def books(self, phase: Phase) -> dict[str, tuple[tuple[Level, Level], tuple[Level, Level]]]:
        out = {self.markets[0].market_id: self._baseline(self.p, phase)}
        for k, gap in enumerate(self.gaps):
            out[self.markets[1 + k].market_id] = self._baseline(self.p - gap, phase)
        if self.spec.include_total:
            out[self.markets[-1].market_id] = self._baseline(self.o, phase)
        return out


def _fair(game: _Game, market_id: str) -> int:
    if market_id.endswith("-ml"):
        return game.p
    if market_id.endswith("-tot"):
        return game.o
    k = int(market_id.rsplit("-sp", 1)[1])
    return game.p - game.gaps[k]


def _single_injection_books(game: _Game, inj: Injection, x: int, step: int):
    t = game.tick
    e = inj.edge_ticks * t
    na, nb = (int(Decimal(str(s)) * SHARE_SCALE) for s in inj.sizes)
    vary = (100 + step) * SHARE_SCALE
    if inj.path == "long":
        a = (Level(x - e - t, vary), Level(x - e, na))
        b = (Level(ONE - x - t, 500 * SHARE_SCALE), Level(ONE - x, nb))
    else:
        a = (Level(x, na), Level(x + t, vary))
        b = (Level(ONE - x + e, nb), Level(ONE - x + e + t, 500 * SHARE_SCALE))
    return a, b


def _combo_injection_books(game: _Game, inj: Injection, k: int, step: int):
    t = game.tick
    e = inj.edge_ticks * t
    p = game.p
    q = p - game.gaps[k]
    n_ml, n_sp = (int(Decimal(str(s)) * SHARE_SCALE) for s in inj.sizes)
    vary = (100 + step) * SHARE_SCALE
    ml = (
        (Level(p - t, vary), Level(p + t, n_ml)),
        (Level(ONE - p - 2 * t, 500 * SHARE_SCALE), Level(ONE - p + 2 * t, 500 * SHARE_SCALE)),
    )
    sp = (
        (Level(q - t, 500 * SHARE_SCALE), Level(p + 2 * t + e, 500 * SHARE_SCALE)),
        (Level(ONE - p - 3 * t - e, 500 * SHARE_SCALE), Level(ONE - p - t - e, n_sp)),
    )
    return ml, sp


def _check_prices(*books) -> bool:
    for pair in books:
        for token in pair:
            for lvl in token:
                if not 0 < lvl.price < ONE:
                    return False
    return True


def _floor_ok(notional: int, floor_micro: int) -> bool:
    return notional >= floor_micro * SHARE_SCALE


def _expected(inj: Injection, tick: int, budget_micro: int, floor_micro: int) -> tuple[str, int, int, int, int] | None:
    """(path, edge, bottleneck, capped, uncapped) the pipeline should credit, or None if filtered."""
    e = inj.edge_ticks * tick
    b = min(int(Decimal(str(s)) * SHARE_SCALE) for s in inj.sizes)
    cost = ONE - e
    if inj.target.startswith("combo"):
        if not _floor_ok(b * cost, floor_micro):
            return None
        path, unit = "combo", cost
    else:
        # on merged books both paths fire with the same edge and size;
        # Long wins dedup unless only the $1.00-mint notional clears the floor
        if _floor_ok(b * cost, floor_micro):
            path, unit = "long", cost
        elif _floor_ok(b * ONE, floor_micro):
            path, unit = "short", ONE
        else:
            return None
    shares = min(b, (budget_micro // unit) * SHARE_SCALE)
    return path, e, b, e * shares, e * b


def generate(spec: ScenarioSpec) -> tuple[list[GameBundle], Manifest]:
    """Build every game of ``spec`` plus the manifest of expected episodes."""
    if spec.interval_s[0] <= 0 or spec.interval_s[1] < spec.interval_s[0]:
        raise ScenarioError("bad polling interval range")
    rng = random.Random(spec.seed)
    start = parse_ts(spec.start)
    budget_micro = int(Decimal(spec.budget_usdc) * ONE)
    floor_micro = int(Decimal(spec.liquidity_floor_usdc) * ONE)
    bundles = []
    manifest = Manifest()
    game_span = int((spec.pre_game_s + spec.in_game_s + spec.post_game_s) * US)
    for g in range(spec.games):
        t0 = start + g * (game_span + 3600 * US)
        game = _Game(spec, g, rng, t0)
        records, entries = _generate_game(spec, game, rng, budget_micro, floor_micro)
        if spec.results is not None and g < len(spec.results) and spec.results[g] is not None:
            delta = spec.results[g]
        else:
            delta = rng.choice((-1, 1)) * rng.randint(1, 25)
        result = FinalResult(game.slug, delta)
        for entry in entries:
            if entry.kind == "combo":
                k = int(entry.key.rsplit("-sp", 1)[1])
                h_half = abs(game.markets[1 + k].handicap_half)
                entry = ManifestEntry(**{**asdict(entry), "jackpot": 1 <= delta and 2 * delta < h_half})
            manifest.entries.append(entry)
        bundles.append(GameBundle(game.schedule, tuple(game.markets), tuple(records), result))
    for inj in spec.injections:
        if not 0 <= inj.game < spec.games:
            raise ScenarioError(f"injection targets missing game {inj.game}")
    return bundles, manifest


def _plan_sweeps(spec: ScenarioSpec, game: _Game, rng: random.Random) -> list[int]:
    lo, hi = (int(x * US) for x in spec.interval_s)
    out = []
    t = game.t0
    while t < game.stop:
        out.append(t)
        t += rng.randint(lo, hi)
    return out


def _generate_game(spec: ScenarioSpec, game: _Game, rng: random.Random, budget_micro: int, floor_micro: int):
    sweeps = _plan_sweeps(spec, game, rng)
    n_tokens = 2 * len(game.markets)
    skew_lo, skew_hi = (ms * 1000 for ms in spec.skew_ms)
    # token timestamps within each sweep: batch time plus cumulative serialization skew
    offsets = []
    for _ in sweeps:
        acc, row = 0, []
        for _ in range(n_tokens):
            acc += skew_lo + int(rng.random() * (skew_hi - skew_lo + 1))
            row.append(acc)
        offsets.append(row)
    sched = game.schedule
    plan: dict[int, tuple[Injection, int]] = {}
    pending = []
    busy: set[int] = set()
    for inj in spec.injections:
        if inj.game != game.index:
            continue
        if inj.sweeps < 1 or inj.edge_ticks < 1:
            raise ScenarioError("injection needs >= 1 sweep and >= 1 tick of edge")
        if inj.phase not in _PHASE_NAMES:
            raise ScenarioError(f"unknown phase {inj.phase!r}")
        phase = _PHASE_NAMES[inj.phase]
        phase_start = (game.t0, sched.tip_off, sched.physical_end)[phase]
        first = next((i for i, t in enumerate(sweeps) if t >= phase_start + int(inj.start_offset_s * US)), None)
        if first is None or first + inj.sweeps > len(sweeps):
            raise ScenarioError(f"injection {inj} runs past the end of the game")
        idx = range(first, first + inj.sweeps)
        for i in idx:
            lo_ts, hi_ts = sweeps[i] + offsets[i][0], sweeps[i] + offsets[i][-1]
            if phase_of(lo_ts, sched) is not phase or phase_of(hi_ts, sched) is not phase:
                raise ScenarioError(f"injection {inj} leaves its {inj.phase} window")
        guard = set(range(first - 1, first + inj.sweeps + 1))
        if guard & busy:
            raise ScenarioError(f"injection {inj} overlaps another injection")
        busy |= guard
        kind, _, k = inj.target.partition(":")
        if kind not in ("moneyline", "spread", "total", "combo"):
            raise ScenarioError(f"unknown injection target {inj.target!r}")
        if kind in ("spread", "combo") and not (k.isdigit() and int(k) < len(spec.spreads)):
            raise ScenarioError(f"injection target {inj.target!r} names a missing spread")
        if kind == "total" and not spec.include_total:
            raise ScenarioError("total injection without a total market")
        if kind in ("moneyline", "spread") and game.gaps and inj.edge_ticks * game.tick > min(game.gaps) - 2 * game.tick:
            raise ScenarioError("single-market edge too large: would leak into combinatorial pairs")
        for n, i in enumerate(idx):
            plan[i] = (inj, n)
        exp = _expected(inj, game.tick, budget_micro, floor_micro)
        if exp is None:
            continue
        path, edge, bottleneck, capped, uncapped = exp
        if kind == "combo":
            market_key = f"{game.slug}-ml|{game.slug}-sp{k}"
            key = market_key
            ekind = "combo"
        else:
            mid = {"moneyline": f"{game.slug}-ml", "total": f"{game.slug}-tot"}.get(kind, f"{game.slug}-sp{k}")
            key = f"{mid}:{path}"
            ekind = {"moneyline": "moneyline", "total": "total"}.get(kind, "spread")
        lo_s = Decimal(inj.sweeps) * (Decimal(str(spec.interval_s[0])) - Decimal(spec.skew_ms[1] * n_tokens) / 1000)
        hi_s = Decimal(inj.sweeps) * (Decimal(str(spec.interval_s[1])) + Decimal(spec.skew_ms[1] * n_tokens) / 1000)
        entry = dict(
            slug=game.slug,
            key=key,
            kind=ekind,
            phase=inj.phase,
            excluded=phase is Phase.POST_GAME,
            snapshots=inj.sweeps,
            edge=str(Decimal(edge) / ONE),
            bottleneck_shares=str(Decimal(bottleneck) / SHARE_SCALE),
            capped_profit=str(Decimal(capped).scaleb(-12)),
            uncapped_profit=str(Decimal(uncapped).scaleb(-12)),
            duration_bounds_s=(str(lo_s), str(hi_s)),
            jackpot=None,
        )
        pending.append((first, entry))

    records = []
    token_order = [tok for m in game.markets for tok in m.tokens]
    market_of = {tok: m.market_id for m in game.markets for tok in m.tokens}
    for i, batch_ts in enumerate(sweeps):
        phase = phase_of(batch_ts, sched)
        game.step()
        books = game.books(phase)
        if i in plan:
            inj, n = plan[i]
            kind, _, k = inj.target.partition(":")
            if kind == "combo":
                ml, sp = _combo_injection_books(game, inj, int(k), n)
                books[f"{game.slug}-ml"] = ml
                books[f"{game.slug}-sp{k}"] = sp
                touched = (ml, sp)
            else:
                mid = {"moneyline": f"{game.slug}-ml", "total": f"{game.slug}-tot"}.get(kind, f"{game.slug}-sp{k}")
                books[mid] = _single_injection_books(game, inj, _fair(game, mid), n)
                touched = (books[mid],)
            if not _check_prices(*touched):
                raise ScenarioError(f"injection {inj} pushes a price outside (0, 1)")
        for j, tok in enumerate(token_order):
            mid = market_of[tok]
            side = 0 if tok.endswith("-a") else 1
            bid, ask = books[mid][side]
            h = _book_hash(bid, ask)
            if game.last_hash.get(tok) == h:
                continue
            game.last_hash[tok] = h
            records.append(SnapshotRecord(game.slug, mid, tok, batch_ts + offsets[i][j], bid, ask, h, batch_ts, i))
    records = sort_records(records)
    sweep_ts: dict[int, int] = {}
    for rec in records:
        sweep_ts.setdefault(rec.batch, rec.ts)
    entries = [ManifestEntry(start_ts=format_ts(sweep_ts[first]), **fields_) for first, fields_ in pending]
    return records, entries


def load_spec(path: Path | str) -> ScenarioSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    return ScenarioSpec.from_dict(raw)


def write_scenario(spec: ScenarioSpec, out_dir: Path | str) -> tuple[list[Path], Path]:
    out_dir = Path(out_dir)
    bundles, manifest = generate(spec)
    paths = []
    for b in bundles:
        p = out_dir / f"{b.slug}.jsonl"
        write_log(b, p)
        paths.append(p)
    mpath = out_dir / "manifest.json"
    mpath.write_text(manifest.to_json(), encoding="utf-8")
    return paths, mpath


def random_spec(seed: int, **overrides: Any) -> ScenarioSpec:
    """A seeded scenario with a handful of injections spread over the phases."""
    base = ScenarioSpec(seed=seed, **overrides)
    rng = random.Random(seed * 7919 + 1)
    injections = []
    pre, live = base.pre_game_s, base.in_game_s
    slots = [("pre_game", pre * 0.15), ("pre_game", pre * 0.6)]
    slots += [("in_game", live * f) for f in (0.1, 0.28, 0.46, 0.64, 0.82)]
    slots.append(("post_game", min(200.0, base.post_game_s / 4)))
    targets = ["moneyline", "total", "combo:0"]
    targets += [f"spread:{k}" for k in range(len(base.spreads))] + [f"combo:{k}" for k in range(len(base.spreads))]
    if not base.include_total:
        targets.remove("total")
    if not base.spreads:
        targets = [t for t in targets if not t.startswith("combo")]
    for phase, offset in slots:
        if rng.random() < 0.25:
            continue
        injections.append(
            Injection(
                game=0,
                target=rng.choice(targets),
                phase=phase,
                start_offset_s=offset + rng.randint(0, 100),
                sweeps=rng.randint(1, 6),
                path=rng.choice(("long", "short")),
                edge_ticks=rng.randint(1, 4),
                sizes=(rng.choice((6, 10.5, 14, 40, 150, 800)), rng.choice((8, 10.2, 25, 90, 300, 1500))),
            )
        )
    return replace(base, injections=tuple(injections))
