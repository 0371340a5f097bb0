from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from functools import cached_property
from decimal import Decimal
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import US, Phase, usdc_to_micro


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrustCeiling:
    pre_game_s: int = 1800
    in_game_s: int = 300
    post_game_s: int = 1800

    def __post_init__(self) -> None:
        if min(self.pre_game_s, self.in_game_s, self.post_game_s) <= 0:
            raise ConfigError("trust ceilings must be positive")

    def for_phase_us(self, phase: Phase) -> int:
        secs = (self.pre_game_s, self.in_game_s, self.post_game_s)[phase]
        return int(Decimal(secs) * US)


@dataclass(frozen=True)
class Config:
    budget_usdc: Decimal = Decimal("100.00")
    liquidity_floor_usdc: Decimal = Decimal("10.00")
    # floor applies as notional >= floor; set False for a strict ">"
    floor_inclusive: bool = True
    cluster_window_ms: int = 500
    ceilings: TrustCeiling = field(default_factory=TrustCeiling)
    profit_threshold_usdc: Decimal = Decimal("0")
    # logs hold direct orders only; disable for venue books that already
    # include mirrored liquidity
    mirror_merge: bool = True
    # terminal credit for a market with fewer than two snapshots
    fallback_gap_s: Decimal = Decimal("4.0")
    input: Path | None = None
    out: Path | None = None

    def __post_init__(self) -> None:
        if self.budget_usdc <= 0:
            raise ConfigError("budget must be positive")
        if self.liquidity_floor_usdc < 0:
            raise ConfigError("liquidity floor must be non-negative")
        if self.cluster_window_ms < 0:
            raise ConfigError("cluster window must be non-negative")
        if self.profit_threshold_usdc < 0:
            raise ConfigError("profit threshold must be non-negative")
        if self.fallback_gap_s <= 0:
            raise ConfigError("fallback gap must be positive")

    @cached_property
    def budget_micro(self) -> int:
        return usdc_to_micro(self.budget_usdc)

    @cached_property
    def floor_micro(self) -> int:
        return usdc_to_micro(self.liquidity_floor_usdc)

    @cached_property
    def threshold_micro(self) -> int:
        return usdc_to_micro(self.profit_threshold_usdc)

    @cached_property
    def window_us(self) -> int:
        return self.cluster_window_ms * 1000

    @cached_property
    def fallback_gap_us(self) -> int:
        return int(self.fallback_gap_s * US)


_DECIMAL_KEYS = {"budget_usdc", "liquidity_floor_usdc", "profit_threshold_usdc", "fallback_gap_s"}
_CEILING_KEYS = {"ceiling_pre": "pre_game_s", "ceiling_in": "in_game_s", "ceiling_post": "post_game_s"}


def apply_overrides(cfg: Config, values: dict) -> Config:
    """Return ``cfg`` with flat key/value overrides applied (``None`` values skipped)."""
    known = {f.name for f in fields(Config)}
    kw = {}
    ceil = {}
    for key, value in values.items():
        if value is None:
            continue
        if key in _CEILING_KEYS:
            ceil[_CEILING_KEYS[key]] = int(value)
        elif key in _DECIMAL_KEYS:
            kw[key] = Decimal(str(value))
        elif key in ("input", "out"):
            kw[key] = Path(value)
        elif key in known and key != "ceilings":
            kw[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        if ceil:
            kw["ceilings"] = replace(cfg.ceilings, **ceil)
        return replace(cfg, **kw)
    except (TypeError, ArithmeticError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: Path | str | None = None, **overrides) -> Config:
    """Defaults, then a TOML key/value file, then explicit overrides."""
    cfg = Config()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = apply_overrides(cfg, data)
    return apply_overrides(cfg, overrides)
