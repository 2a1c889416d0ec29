import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lowmem_experts.core import ABSTAIN
from lowmem_experts.pool import (INF, NOW, Baseline, PoolConstants, SnapshotTable, baseline_step,
                                 covering_benchmark, estimate_size, filter_pool, is_covered, merge,
                                 merge_into, sample_new, sample_subset, segment_loss)
from tests.oracles import cover_oracle, random_cover_instance


def _play(table, rows):
    for x in rows:
        table.update(np.asarray(x, dtype=float))


def test_constants_modes():
    d = PoolConstants.desk()
    assert (d.p_sample, d.size_threshold, d.pool_cap, d.K_iters) == (0.25, 8, 24, 16)
    p = PoolConstants.paper(64, 1024)
    assert p.p_sample == pytest.approx(16.0 ** -4)
    assert PoolConstants.for_mode("desk", 4, 8, K_iters=3).K_iters == 3


def test_segment_loss_examples():
    t = SnapshotTable()
    i = t.add(0)
    _play(t, [[0.2, 0], [0.3, 0]])
    j = t.add(1)
    _play(t, [[0.4, 0]])
    assert segment_loss(t, i, j) == pytest.approx(0.5)
    assert segment_loss(t, j, i) == INF
    k = t.add(0)
    k2 = t.add(1)
    assert segment_loss(t, k, k2) == INF
    assert segment_loss(t, i) == pytest.approx(0.9)


def test_self_cover_and_empty_family():
    t = SnapshotTable()
    j = t.add(0)
    _play(t, [[0.7], [0.4]])
    assert covering_benchmark(t, [j], j) == pytest.approx(1.1)
    assert is_covered(t, [j], j)
    assert covering_benchmark(t, [], j) == INF
    assert not is_covered(t, [], j)


def test_zero_loss_entry_not_covered_by_worse_family():
    t = SnapshotTable()
    f = t.add(0)
    j = t.add(1)
    _play(t, [[1, 0], [1, 0], [1, 0]])
    assert covering_benchmark(t, [f], j) == 3
    assert not is_covered(t, [f], j)


def test_late_family_gives_infinite_benchmark():
    t = SnapshotTable()
    j = t.add(0)
    _play(t, [[0.1, 0.0]])
    f = t.add(1)
    _play(t, [[0.1, 0.0]])
    assert covering_benchmark(t, [f], j) == INF
    assert not is_covered(t, [f], j)


def test_hand_built_three_by_three():
    # experts enter on days 1, 2, 3; losses chosen so the piecewise best differs from any single expert
    rows = [[0.9, 0.0, 0.5], [0.0, 0.9, 0.5], [0.0, 0.9, 0.0]]
    t = SnapshotTable()
    entries = {}
    for d, x in enumerate(rows, start=1):
        entries[t.add(d - 1)] = (d - 1, d)
        t.update(np.array(x))
    for r in range(1, 4):
        for F in itertools.combinations(entries, r):
            for j in entries:
                covered, bench = cover_oracle(rows, entries, F, j, 3)
                assert covering_benchmark(t, F, j) == pytest.approx(bench)
                assert is_covered(t, F, j) == covered


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cover_matches_oracle_on_random_instances(seed):
    table, entries, rows, now = random_cover_instance(np.random.default_rng(seed))
    slots = list(entries)
    for r in range(0, len(slots) + 1):
        for F in itertools.combinations(slots, r):
            for j in slots:
                covered, bench = cover_oracle(rows, entries, F, j, now)
                got = covering_benchmark(table, F, j)
                assert got == pytest.approx(bench) or got == bench == INF
                assert is_covered(table, F, j) == covered


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_snapshots_match_full_table(seed):
    table, entries, rows, now = random_cover_instance(np.random.default_rng(seed))
    for i, (e, ei) in entries.items():
        assert table.at(i, NOW) == pytest.approx(rows[ei - 1:, e].sum())
        for j, (_, ej) in entries.items():
            if ej > ei:
                assert segment_loss(table, i, j) == pytest.approx(rows[ei - 1:ej - 1, e].sum())
    held_days = set(table.snaps)
    assert held_days == {d for _, d in entries.values()}


def test_snapshot_garbage_collection_returns_words():
    t = SnapshotTable()
    a = t.add(0)
    _play(t, [[1.0]])
    b = t.add(0)
    assert t.words() > 6
    t.remove(b)
    t.remove(a)
    assert t.words() == 0 and len(t) == 0 and not t.snaps
    with pytest.raises(KeyError):
        t.remove(a)


def test_table_grows_past_capacity():
    t = SnapshotTable(capacity=1)
    slots = [t.add(k) for k in range(10)]
    assert len(set(slots)) == 10 and len(t) == 10


def test_estimate_and_sample_degenerate_rates():
    rng = np.random.default_rng(0)
    Q = list(range(30))
    assert estimate_size(Q, 1.0, rng) == 30 and sample_subset(Q, 1.0, rng) == Q
    assert estimate_size(Q, 0.0, rng) == 0 and sample_subset(Q, 0.0, rng) == []


def test_estimate_size_concentrates():
    Q = range(1000)
    est = [estimate_size(Q, 0.1, np.random.default_rng(s)) for s in range(100)]
    assert abs(np.mean(est) - 100) <= 10


def test_filter_empty_family_keeps_q():
    t = SnapshotTable()
    slots = [t.add(k) for k in range(3)]
    assert filter_pool(t, [], slots) == slots


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_filter_matches_per_entry_oracle_and_is_idempotent(seed):
    rng = np.random.default_rng(seed)
    table, entries, rows, now = random_cover_instance(rng)
    slots = list(entries)
    F = [s for s in slots if rng.random() < 0.5]
    out = filter_pool(table, F, slots)
    expect = [q for q in slots if not cover_oracle(rows, entries, F, q, now)[0]] if F else slots
    assert out == expect
    assert filter_pool(table, F, out) == out


def test_merge_small_union_untouched():
    t = SnapshotTable()
    A = [t.add(0), t.add(1)]
    B = [t.add(2)]
    c = PoolConstants.desk(p_sample=1.0)
    assert merge(t, A, B, np.random.default_rng(0), c) == A + B


def test_merge_empty_inputs():
    assert merge(SnapshotTable(), [], [], np.random.default_rng(0), PoolConstants.desk()) == []


def test_merge_keeps_sampled_family():
    t = SnapshotTable()
    Q = [t.add(0) for _ in range(40)]
    _play(t, [[0.5]] * 3)
    c = PoolConstants.desk(p_sample=0.5, size_threshold=2)
    out = merge(t, Q, [], np.random.default_rng(1), c)
    assert set(out) <= set(Q) and len(out) >= 1


def test_merge_dominant_expert_shrinks_clones():
    wins = 0
    for seed in range(20):
        t = SnapshotTable()
        good = t.add(0)
        clones = [t.add(1) for _ in range(50)]
        _play(t, [[0.0, 1.0]] * 10)
        c = PoolConstants.desk(p_sample=0.5)
        out = merge(t, [good], clones, np.random.default_rng(seed), c)
        wins += len(out) < c.pool_cap
    assert wins >= 18


def test_merge_into_evicts_losers():
    t = SnapshotTable()
    Q = [t.add(1) for _ in range(50)]
    _play(t, [[0.0, 1.0]] * 5)
    evicted = []
    out = merge_into(t, Q, [], np.random.default_rng(2), PoolConstants.desk(p_sample=0.5), evicted.append)
    assert len(t) == len(out)
    assert sorted(out + evicted) == sorted(Q)


def test_sample_new_rate():
    counts = [sample_new(100, np.random.default_rng(s)).size for s in range(400)]
    assert abs(np.mean(counts) - 1) < 0.15


def test_baseline_single_expert():
    b = Baseline(1, 64, 8, np.random.default_rng(0))
    acts = [baseline_step(b, np.array([0.3])) for _ in range(64)]
    assert set(acts) == {0}


def test_baseline_empty_pool_abstains():
    class NoPick:
        def random(self, size=None):
            return np.ones(size) if size is not None else 1.0
    b = Baseline(4, 8, 4, NoPick())
    assert b.act() == ABSTAIN


def test_baseline_rejects_bad_epoch_length():
    with pytest.raises(ValueError):
        Baseline(4, 10, 3, np.random.default_rng(0))


def _equal_loss_peak(constants, seed=3):
    b = Baseline(16, 1024, 16, np.random.default_rng(seed), constants)
    for _ in range(1024):
        baseline_step(b, np.full(16, 0.5))
    return max(max(s) for s in b.size_log)


@pytest.mark.xfail(strict=True, reason="desk stop point threshold/p = 32 exceeds cap 24; see ledger")
def test_baseline_identical_losses_pool_bounded():
    assert _equal_loss_peak(PoolConstants.desk()) <= PoolConstants.desk().pool_cap


def test_baseline_identical_losses_bounded_by_stop_point():
    # merge only stops once the p-sample is <= threshold, so the pool settles near threshold / p
    c = PoolConstants.desk()
    limit = 2 * c.size_threshold / c.p_sample
    assert all(_equal_loss_peak(c, s) <= limit for s in range(5))


def _gap_regret(seed, n=32, B=64, T=8192):
    rng = np.random.default_rng(1000 + seed)
    b = Baseline(n, T, B, np.random.default_rng(seed))
    x = np.full(n, 0.9)
    x[0] = 0.1
    total = 0.0
    for _ in range(T):
        a = b.act()
        total += 1.0 if a == ABSTAIN else x[a]
        b.observe(x)
    return (total - 0.1 * T) / T


@pytest.fixture(scope="module")
def gap_regrets():
    return [_gap_regret(s) for s in range(20)]


@pytest.mark.xfail(strict=True, reason="1/n sampling leaves the best expert out for ~n epochs; see ledger")
def test_baseline_stationary_gap(gap_regrets):
    assert sum(r <= 0.1 for r in gap_regrets) >= 18


def test_baseline_stationary_gap_matches_sampling_delay(gap_regrets):
    # epochs before expert 0 is first drawn ~ Geometric(1/n); each costs 0.8 per day
    n, B, T = 32, 64, 8192
    waits = np.arange(T // B)
    probs = (1 - 1 / n) ** waits * (1 / n)
    expected_wait = (np.minimum(waits, T // B) * probs).sum() + (T // B) * (1 - 1 / n) ** (T // B)
    predicted = 0.8 * expected_wait * B / T
    assert np.mean(gap_regrets) <= predicted + 0.05


def test_baseline_memory_tracks_table():
    b = Baseline(8, 256, 16, np.random.default_rng(4))
    rng = np.random.default_rng(5)
    for _ in range(256):
        baseline_step(b, rng.random(8))
        assert b.memory_words() >= b.table.words()
        assert len(b.table) == len(b.pool_slots())
