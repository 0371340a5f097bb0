from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pmarb.config import Config, ConfigError, TrustCeiling, apply_overrides, load_config
from pmarb.model import (
    ONE,
    BookTop,
    FinalResult,
    GameSchedule,
    Phase,
    PriceError,
    format_price,
    format_ts,
    parse_price,
    parse_ts,
    phase_of,
    spread_bps,
)

from helpers import T0, lvl


def test_price_parsing_is_exact():
    assert parse_price("0.515") == 515_000
    assert parse_price("0.000001") == 1
    assert parse_price(0.1) == 100_000
    assert format_price(515_000) == "0.515000"


@pytest.mark.parametrize("bad", ["1.25", "0", "1", "-0.2", "1.000000"])
def test_price_out_of_range(bad):
    with pytest.raises(PriceError, match=r"price out of \(0,1\)"):
        parse_price(bad)


def test_price_finer_than_micro_rejected():
    with pytest.raises(PriceError):
        parse_price("0.5000001")


@given(st.integers(min_value=1, max_value=ONE - 1))
def test_price_round_trip(micro):
    assert parse_price(format_price(micro)) == micro


@given(st.integers(min_value=0, max_value=4_000_000_000 * 1_000_000))
def test_timestamp_round_trip(us):
    assert parse_ts(format_ts(us)) == us


def test_timestamp_keeps_microseconds():
    assert format_ts(parse_ts("2026-02-05T01:02:03.000450Z")) == "2026-02-05T01:02:03.000450Z"


def test_phase_intervals_are_half_open():
    sched = GameSchedule("g", T0 + 10, T0 + 20)
    assert phase_of(T0 + 9, sched) is Phase.PRE_GAME
    assert phase_of(T0 + 10, sched) is Phase.IN_GAME
    assert phase_of(T0 + 19, sched) is Phase.IN_GAME
    assert phase_of(T0 + 20, sched) is Phase.POST_GAME


def test_schedule_and_result_validation():
    with pytest.raises(ValueError):
        GameSchedule("g", T0, T0)
    with pytest.raises(ValueError):
        FinalResult("g", 0)


def test_spread_bps_sign():
    top = BookTop("a", 0, lvl("0.48"), lvl("0.52"))
    assert spread_bps(top) == Decimal(400)
    crossed = BookTop("a", 0, lvl("0.53"), lvl("0.52"))
    assert spread_bps(crossed) == Decimal(-100)
    assert spread_bps(BookTop("a", 0, None, lvl("0.52"))) is None


def test_config_defaults_match_published_parameters():
    cfg = Config()
    assert cfg.budget_usdc == Decimal("100.00")
    assert cfg.liquidity_floor_usdc == Decimal("10.00")
    assert cfg.cluster_window_ms == 500
    assert cfg.ceilings == TrustCeiling(1800, 300, 1800)
    assert cfg.profit_threshold_usdc == 0
    assert cfg.budget_micro == 100 * ONE


def test_config_file_then_flags(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text('budget_usdc = "250"\ncluster_window_ms = 800\nceiling_in = 120\n')
    cfg = load_config(path, cluster_window_ms=300)
    assert cfg.budget_usdc == 250
    assert cfg.cluster_window_ms == 300
    assert cfg.ceilings.in_game_s == 120


@pytest.mark.parametrize("override", [{"budget_usdc": "0"}, {"ceiling_in": 0}, {"nonsense": 1}, {"liquidity_floor_usdc": "-1"}])
def test_config_rejects_bad_values(override):
    with pytest.raises(ConfigError):
        apply_overrides(Config(), override)
