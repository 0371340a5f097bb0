import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmarb.ingest import UNREPORTED
from pmarb.model import ONE, BookTop, Level, Phase
from pmarb.reconstruct import (
    Freshness,
    cluster_batches,
    effective_pair,
    merge_effective_book,
    mirror,
    project_states,
    unified_timeline,
)

from helpers import T0, SEC, lvl, permute_future, rec, schedule

levels = st.one_of(
    st.none(),
    st.builds(Level, st.integers(1, ONE - 1), st.integers(0, 10**12)),
)
tops = st.builds(BookTop, st.just("x"), st.integers(0, 10**6), levels, levels)


@given(tops)
def test_mirror_is_an_involution(top):
    assert mirror(mirror(top)) == top


def test_mirror_maps_bid_to_complement_ask():
    m = mirror(BookTop("a", 0, lvl("0.48", "30"), lvl("0.55", "12")), "b")
    assert m.token_id == "b"
    assert m.best_ask == lvl("0.52", "30")
    assert m.best_bid == lvl("0.45", "12")


def test_effective_book_takes_best_and_pools_ties():
    a = BookTop("a", 0, lvl("0.48", "30"), lvl("0.53", "10"))
    b = BookTop("b", 0, lvl("0.47", "5"), lvl("0.50", "7"))
    ea, eb = effective_pair(a, b)
    # Ask(a): direct 0.53 vs mirrored 1 - 0.47 = 0.53 -> pooled
    assert ea.best_ask == lvl("0.53", "15")
    # Bid(a): direct 0.48 vs 1 - Ask(b) = 0.50 -> mirrored wins
    assert ea.best_bid == lvl("0.50", "7")
    assert eb.best_ask == lvl("0.50", "7")
    assert merge_effective_book(a, mirror(BookTop("b", 0, None, None))) == a


def _brute_clusters(ts_list, window):
    """Cluster start per record by walking back over small gaps."""
    out = []
    for i in range(len(ts_list)):
        j = i
        while j > 0 and ts_list[j] - ts_list[j - 1] <= window:
            j -= 1
        out.append(ts_list[j])
    return out


@given(st.lists(st.integers(0, 3_000_000), max_size=40), st.integers(0, 1_000_000))
def test_clustering_matches_brute_force(offsets, window):
    ts_list = sorted(offsets)
    recs = [rec("a", 0, ts_us=T0 + t) for t in ts_list]
    clusters = cluster_batches(recs, window)
    flat = [c.ts for c in clusters for _ in c.records]
    assert flat == [T0 + t for t in _brute_clusters(ts_list, window)]
    assert sum(len(c.records) for c in clusters) == len(recs)


def test_clustering_is_transitive_and_inclusive():
    ts = [0, 500_000, 1_000_000, 1_500_001]
    clusters = cluster_batches([rec("a", 0, ts_us=T0 + t) for t in ts], 500_000)
    assert [len(c.records) for c in clusters] == [3, 1]
    assert clusters[0].ts == T0


def test_clustering_rejects_unsorted():
    with pytest.raises(ValueError):
        cluster_batches([rec("a", 2), rec("a", 1)])


def test_forward_fill_per_side_and_freshness():
    recs = [
        rec("a", 0, ("0.40", "10"), ("0.45", "10")),
        rec("b", 0.01, ("0.50", "10"), ("0.58", "10")),
        rec("a", 4, UNREPORTED, ("0.44", "20")),
        rec("b", 8, None, ("0.57", "10")),
    ]
    states = list(project_states(cluster_batches(recs), ("a", "b"), schedule()))
    assert len(states) == 3
    s1 = states[1]
    assert s1.legs[0].best_bid == lvl("0.40", "10")  # kept from t=0
    assert s1.legs[0].best_ask == lvl("0.44", "20")
    assert s1.freshness == (Freshness.FRESH, Freshness.FORWARD_FILLED)
    s2 = states[2]
    assert s2.legs[1].best_bid is None  # explicit empty side
    assert s2.legs[0].ts == T0 + 4 * SEC
    assert all(s.phase is Phase.PRE_GAME for s in states)


def test_no_state_before_every_leg_seen():
    recs = [rec("a", 0, ("0.4", "1"), ("0.5", "1")), rec("a", 4, ("0.4", "1"), ("0.6", "1"))]
    assert list(project_states(cluster_batches(recs), ("a", "b"), schedule())) == []


def test_unified_timeline_marks_updated_markets():
    recs = [rec("a", 0, market="m1"), rec("c", 0.1, market="m2"), rec("c", 5, market="m2")]
    tl = unified_timeline(cluster_batches(recs), {"m1": ("a", "b"), "m2": ("c", "d")})
    assert tl == [(T0, frozenset({"m1", "m2"})), (T0 + 5 * SEC, frozenset({"m2"}))]


def _random_records(rng, n):
    t = 0.0
    out = []
    for _ in range(n):
        t += rng.choice((0.01, 0.2, 4.0, 5.1))
        tok = rng.choice("ab")
        bid = rng.choice((UNREPORTED, None, (f"0.{rng.randint(30, 49)}", "10")))
        ask = rng.choice((UNREPORTED, None, (f"0.{rng.randint(51, 70)}", "10")))
        out.append(rec(tok, round(t, 3), bid, ask))
    return out


@settings(max_examples=60)
@given(st.integers(0, 10**6))
def test_future_records_do_not_change_the_past(seed):
    rng = random.Random(seed)
    recs = _random_records(rng, 40)
    cut, permuted = permute_future(recs, rng)
    base = {s.ts: s for s in project_states(cluster_batches(recs), ("a", "b"), schedule())}
    other = {s.ts: s for s in project_states(cluster_batches(permuted), ("a", "b"), schedule())}
    for ts, state in base.items():
        if ts <= cut:
            assert other[ts] == state
