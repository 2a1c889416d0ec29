import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lowmem_experts.adversaries import (DisjointnessAdversary, IidStream, PlantedGap, StrongAdversary, TwoPhase,
                                        choose_block_size, make_stream, point_mass, sample_disjointness,
                                        two_phase_best_loss)
from lowmem_experts.core import ABSTAIN, ConfigError


def test_block_size_choice():
    assert choose_block_size(144, 0.25) == 4
    assert choose_block_size(16, 1.0) == 4
    with pytest.raises(ConfigError):
        choose_block_size(9, 0.5)


def test_smallest_block_has_each_pair_once():
    inst = sample_disjointness(16, 1.0, np.random.default_rng(0), M=4)
    assert (inst.N, inst.special.size) == (4, 4)
    for a in range(inst.N):
        pairs = sorted(zip(inst.x_a[a].tolist(), inst.x_b[a].tolist()))
        assert pairs == [(0, 0), (0, 1), (1, 0), (1, 1)]


@given(st.sampled_from([4, 7, 10]), st.integers(0, 2**32 - 1))
@settings(max_examples=20)
def test_blocks_intersect_exactly_at_star(M, seed):
    inst = sample_disjointness(4 * M, 1.0, np.random.default_rng(seed), M=M)
    both = inst.x_a & inst.x_b
    assert (both.sum(axis=1) == 1).all()
    assert (both.argmax(axis=1) == inst.star).all()


def test_marginals():
    M = 7
    rng = np.random.default_rng(1)
    ones = np.zeros(M)
    reps = 10_000
    for _ in range(reps):
        inst = sample_disjointness(M, 1.0, rng, M=M)
        ones += inst.x_a[0]
    expect = (1 + (M - 1) / 3) / M
    assert np.all(np.abs(ones / reps - expect) < 0.02)


def test_invalid_block_size():
    with pytest.raises(ConfigError):
        sample_disjointness(16, 1.0, np.random.default_rng(0), M=5)


class HotRng:
    """Always takes the eps^2 branch; `side` picks A (< 0.5) or B."""

    def __init__(self, side):
        self.side = side

    def random(self, size=None):
        return np.array([0.0, self.side]) if size == 2 else 0.0


def _hot_adversary(side, n=16):
    adv = DisjointnessAdversary(n, 1.0, np.random.default_rng(0), M=4)
    adv.rng = HotRng(side)
    return adv


def test_unplayed_a_side_zero_where_xa_one():
    adv = _hot_adversary(0.1)
    x = adv.reveal(1, ())
    assert np.array_equal(x == 0, adv.instance.x_a.reshape(-1) == 1)


def test_all_blocks_played_gives_half():
    adv = _hot_adversary(0.9)
    adv.epoch_length = 10
    history = tuple(range(0, 16, 4))
    x = adv.reveal(5, history)
    assert np.all(x == 0.5)


def test_played_blocks_reset_each_epoch():
    adv = _hot_adversary(0.1, n=160)
    assert adv.epoch_length == 4
    assert adv.played_blocks(4, (0, 5, ABSTAIN)) == {0, 1}
    assert adv.played_blocks(5, (0, 5, 9, 13)) == set()


def test_adaptive_losses_in_three_values():
    adv = DisjointnessAdversary(64, 0.5, np.random.default_rng(2))
    hist = []
    for d in range(1, 200):
        x = adv.reveal(d, tuple(hist))
        assert set(np.unique(x)) <= {0.0, 0.5, 1.0}
        hist.append(d % 64)


def test_strong_uniform_tie_rule():
    adv = StrongAdversary(100, 2, np.random.default_rng(0))
    x = adv.reveal(1, (), np.full(100, 0.01))
    ones = np.flatnonzero(x[adv.special] == 1)
    assert ones.tolist() == [0, 1, 2, 3]
    out = np.setdiff1d(np.arange(100), adv.special)
    assert np.all(x[out] == 1)


def test_strong_concentrated_on_special():
    adv = StrongAdversary(100, 2, np.random.default_rng(1))
    target = adv.special[5]
    x = adv.reveal(1, (), point_mass(100, int(target)))
    hit = set(adv.special[x[adv.special] == 1].tolist())
    assert hit == {int(target), *adv.special[:3].tolist()}
    assert x.min() == 0


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_strong_average_over_special_is_one_fifth(seed):
    rng = np.random.default_rng(seed)
    S = int(rng.integers(1, 5))
    adv = StrongAdversary(50 * S, S, rng)
    p = rng.dirichlet(np.ones(50 * S))
    x = adv.reveal(1, (), p)
    assert x[adv.special].mean() == pytest.approx(0.2)
    assert set(np.unique(x)) <= {0.0, 1.0}


def test_strong_rejects_bad_distribution():
    adv = StrongAdversary(20, 1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        adv.reveal(1, (), np.ones(20))
    with pytest.raises(ValueError):
        adv.reveal(1, ())
    with pytest.raises(ConfigError):
        StrongAdversary(20, 3, np.random.default_rng(0))


def test_point_mass():
    assert point_mass(3, 1).tolist() == [0, 1, 0]
    assert np.allclose(point_mass(4, ABSTAIN), 0.25)


def test_planted_gap_zero_identical():
    s = PlantedGap(5, np.random.default_rng(0), gap=0.0, noise=0.0)
    x = s.reveal(1, ())
    assert np.all(x == x[0])


def test_two_phase_closed_form():
    T, n = 4000, 4
    s = TwoPhase(n, T, np.random.default_rng(0))
    table = np.array([s.reveal(d, ()) for d in range(1, T + 1)])
    best = table.sum(axis=0).min()
    expected = two_phase_best_loss(T, T // 2, 0.25, 0.75)
    assert expected == 2000
    assert abs(best - expected) < 4 * math.sqrt(T)


def test_iid_bernoulli_best_expert_below_half():
    T, n = 2000, 16
    gaps = []
    for seed in range(10):
        s = IidStream(n, np.random.default_rng(seed), q=0.5)
        table = np.array([s.reveal(d, ()) for d in range(T)])
        gaps.append(T / 2 - table.sum(axis=0).min())
    scale = math.sqrt(T * math.log(n))
    assert 0.2 * scale < np.median(gaps) < 2 * scale


def test_streams_deterministic_and_unknown_kind():
    a = make_stream("planted", 6, 10, np.random.default_rng(3)).reveal(1, ())
    b = make_stream("planted", 6, 10, np.random.default_rng(3)).reveal(1, ())
    assert np.array_equal(a, b)
    with pytest.raises(ConfigError):
        make_stream("nope", 6, 10, np.random.default_rng(0))
