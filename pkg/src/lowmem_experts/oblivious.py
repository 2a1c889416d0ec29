"""Oblivious-adversary learner: geometric Baseline+ threads feeding a MonocarpicExpert."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError, RandomnessSource, is_power_of_two, pw
from .hedger import GroupedLearner, group_partition
from .monocarpic import MonocarpicExpert
from .pool import PoolConstants, SnapshotTable, merge_into, sample_new

DESK_MAX_THREADS = 6


@dataclass
class ThreadSchedule:
    """Thread r (1-based) runs epochs of B_r = T / (n 2^(r-1)) days and restarts every T_r days."""

    n: int
    T: int
    R: int

    @classmethod
    def build(cls, n: int, T: int, max_threads: int | None = DESK_MAX_THREADS) -> "ThreadSchedule":
        if not (is_power_of_two(n) and is_power_of_two(T)) or T < 2 * n:
            raise ConfigError("need n, T powers of two with T >= 2n")
        R = (T // n).bit_length() - 1
        if max_threads is not None:
            R = min(R, max_threads)
        return cls(n, T, max(1, R))

    def epoch_length(self, r: int) -> int:
        return self.T // (self.n << (r - 1))

    def restart_period(self, r: int) -> int:
        return self.T if r == 1 else 2 * self.epoch_length(r)

    def epochs_per_restart(self, r: int) -> int:
        return self.restart_period(r) // self.epoch_length(r)

    def starting(self, t: int) -> list[int]:
        """Threads whose epoch begins on day t."""
        return [r for r in range(1, self.R + 1) if (t - 1) % self.epoch_length(r) == 0]

    def ending(self, t: int) -> list[int]:
        return [r for r in range(1, self.R + 1) if t % self.epoch_length(r) == 0]


@dataclass
class ThreadPool:
    subpools: list = field(default_factory=list)
    epoch: int = 0  # epochs begun since the last restart

    def slots(self) -> list[int]:
        return [s for sp in self.subpools for s in sp]

    def restart(self) -> None:
        self.subpools = [[] for _ in self.subpools]
        self.epoch = 0


class ObliviousFull:
    """R Baseline+ threads share one snapshot table; the union of their pools is
    played through a MonocarpicExpert.

    An expert wakes in the MonocarpicExpert when its first pool entry appears
    (keyed by expert id and wake day) and dies when its last entry is evicted.
    """

    def __init__(self, n: int, T: int, rng: np.random.Generator,
                 constants: PoolConstants | None = None, max_threads: int | None = DESK_MAX_THREADS):
        self.n, self.T = n, T
        self.rng = rng
        self.constants = constants or PoolConstants.desk()
        self.schedule = ThreadSchedule.build(n, T, max_threads)
        self.R = self.schedule.R
        self.table = SnapshotTable()
        self.threads = [ThreadPool([[] for _ in range(self.schedule.epochs_per_restart(r).bit_length() + 1)])
                        for r in range(1, self.R + 1)]
        self.mono = MonocarpicExpert(T, rng)
        self.count: dict[int, int] = {}
        self.key: dict[int, tuple] = {}
        self.day = 0
        self.union_peak = 0

    def thread(self, r: int) -> ThreadPool:
        return self.threads[r - 1]

    # -- union bookkeeping ---------------------------------------------------

    def _enter(self, expert: int) -> int:
        slot = self.table.add(expert)
        c = self.count.get(expert, 0)
        if c == 0:
            key = (expert, self.day + 1)
            self.key[expert] = key
            self.mono.admit(key, expert)
        self.count[expert] = c + 1
        return slot

    def _evict(self, slot: int) -> None:
        e = int(self.table.expert[slot])
        self.count[e] -= 1
        if self.count[e] == 0:
            del self.count[e]
            self.mono.kill(self.key.pop(e))

    def _merge(self, QA, QB) -> list:
        return merge_into(self.table, QA, QB, self.rng, self.constants, on_evict=self._evict)

    # -- schedule --------------------------------------------------------------

    def _epoch_starts(self, t: int) -> None:
        new = self.schedule.starting(t)
        if not new:
            return
        r = new[0]
        low = self.thread(r)
        for donor_r in range(self.R, r, -1):
            donor = self.thread(donor_r)
            low.subpools[0] = self._merge(low.subpools[0], donor.slots())
            donor.restart()
        for rr in new:
            th = self.thread(rr)
            th.epoch += 1
            for e in sample_new(self.n, self.rng):
                th.subpools[0].append(self._enter(int(e)))

    def _epoch_ends(self, t: int) -> None:
        for r in self.schedule.ending(t):
            th = self.thread(r)
            for lvl in range(pw(th.epoch) + 1):
                th.subpools[lvl + 1] = self._merge(th.subpools[lvl + 1], th.subpools[lvl])
                th.subpools[lvl] = []

    def union_size(self) -> int:
        return len(self.table)

    def act(self) -> int:
        self._epoch_starts(self.day + 1)
        self.union_peak = max(self.union_peak, self.union_size())
        return self.mono.act()

    def observe(self, losses) -> None:
        self.table.update(losses)
        self.mono.observe(losses)
        self.day += 1
        self._epoch_ends(self.day)
        self.mono.migrate()

    def memory_words(self) -> int:
        refs = len(self.table)  # every live entry sits in exactly one sub-pool
        # two words per union counter and wake key
        return self.table.words() + refs + 2 * len(self.count) + 2 * len(self.key) + self.mono.memory_words()


def grouped_oblivious(n: int, T: int, G: int, source: RandomnessSource,
                      constants: PoolConstants | None = None,
                      max_threads: int | None = DESK_MAX_THREADS) -> GroupedLearner:
    """G contiguous groups, one ObliviousFull per group, MWU on top.

    Group 0 draws from the "learner" stream so that G = 1 reproduces the
    ungrouped learner exactly.
    """
    groups = group_partition(n, G)
    subs = []
    for g, members in enumerate(groups):
        rng = source.fork("learner" if g == 0 else f"learner/group{g}")
        subs.append(ObliviousFull(len(members), T, rng, constants, max_threads))
    return GroupedLearner(groups, subs, source.fork("learner/top"), horizon=T)
