"""Adaptive-adversary learner: fresh-sample MWU threads plus observe-then-commit pools."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import ABSTAIN, ConfigError, RandomnessSource, child_rng
from .hedger import GroupedLearner, group_partition
from .interval import IntervalRegret
from .monocarpic import MonocarpicExpert, _next_pow2


@dataclass(frozen=True)
class AdaptiveSchedule:
    n: int
    T: int
    eps: float
    c_N: float = 4.0
    c_adm: float = 2.0

    def __post_init__(self):
        k = -math.log2(self.eps)
        if not 0 < self.eps < 1 or abs(k - round(k)) > 1e-12:
            raise ConfigError(f"epsilon must be a power of 1/2, got {self.eps}")
        if self.T % self.B:
            raise ConfigError(f"epoch length {self.B} must divide T = {self.T}")

    @classmethod
    def for_mode(cls, mode: str, n: int, T: int, eps: float, **consts) -> "AdaptiveSchedule":
        if mode == "paper":
            lg = math.log2(n * T)
            consts.setdefault("c_N", lg**2)
            consts.setdefault("c_adm", 2 * lg)
        return cls(n, T, eps, **consts)

    @property
    def B(self) -> int:
        return round(1 / self.eps**2)

    @property
    def R(self) -> int:
        return max(1, math.ceil(-math.log2(self.eps) - 1e-12))

    def eps_r(self, r: int) -> float:
        return self.eps * 2 ** (r - 1)

    def restart_length(self, r: int) -> int:
        return round(1 / self.eps_r(r) ** 2)

    def restarts_per_epoch(self, r: int) -> int:
        return self.B // self.restart_length(r)

    def width(self, r: int) -> int:
        return max(1, math.floor(self.c_N * self.eps_r(r) ** 2 * math.sqrt(self.n) / self.eps))

    @property
    def observe_rate(self) -> float:
        return min(1.0, 1.0 / (self.eps * math.sqrt(self.n)))

    @property
    def lifetime(self) -> int:
        """Epochs an admitted expert stays in the pool."""
        return max(1, round(self.eps * math.sqrt(self.n)))


class Rexp:
    """One thread of RandomExpert.

    Each restart draws a (length x width) grid of experts uniformly with
    replacement and runs one MWU per row; day b of the restart plays row b,
    whose experts were never played before that day.
    """

    def __init__(self, n: int, length: int, width: int, rng: np.random.Generator):
        self.n, self.length, self.width = n, length, width
        self.rng = rng
        self.eta = math.sqrt(math.log(width) / length)
        self.b = length  # forces a draw on the first day
        self.samples = np.zeros((length, width), dtype=np.int64)
        self.cum = np.zeros((length, width))
        self.realized = 0.0
        self.action = ABSTAIN

    @property
    def restarting(self) -> bool:
        return self.b >= self.length

    def act(self) -> int:
        if self.restarting:
            self.samples = self.rng.integers(0, self.n, size=(self.length, self.width))
            self.cum[:] = 0.0
            self.realized = 0.0
            self.b = 0
        row = kernels.mwu_sample(self.cum[self.b], self.eta, self.rng.random())
        self.action = int(self.samples[self.b, row])
        return self.action

    def observe(self, losses: np.ndarray) -> float:
        self.cum += losses[self.samples]
        loss = float(losses[self.action])
        self.realized += loss
        self.b += 1
        return loss

    def memory_words(self) -> int:
        return 2 * self.samples.size + 3


class MaintainPool:
    """Observe a fresh random candidate set during each restart of a thread and
    admit candidates that beat the thread's realized loss by the margin."""

    def __init__(self, n: int, rate: float, margin: float, lifetime: int, rng: np.random.Generator):
        self.n, self.rate, self.margin, self.lifetime = n, rate, margin, lifetime
        self.rng = rng
        self.candidates = np.empty(0, dtype=np.int64)
        self.loss = np.empty(0)
        self.pool: dict[int, int] = {}  # expert -> expiry epoch

    def start(self) -> None:
        self.candidates = np.flatnonzero(self.rng.random(self.n) < self.rate)
        self.loss = np.zeros(self.candidates.size)

    def observe(self, losses: np.ndarray) -> None:
        self.loss += losses[self.candidates]

    def finish(self, rexp_loss: float, epoch: int) -> tuple[list[int], list[tuple]]:
        """Admit winners; returns (experts new to the pool, all (expert, loss) admitted)."""
        fresh, admitted = [], []
        for i, li in zip(self.candidates.tolist(), self.loss.tolist()):
            if li < rexp_loss - self.margin:
                if i not in self.pool:
                    fresh.append(i)
                self.pool[i] = epoch + self.lifetime
                admitted.append((i, li))
        return fresh, admitted

    def expire(self, epoch: int) -> list[int]:
        gone = [i for i, e in self.pool.items() if e <= epoch]
        for i in gone:
            del self.pool[i]
        return gone

    def memory_words(self) -> int:
        return 2 * self.candidates.size + 2 * len(self.pool)


class Adaptive:
    """IntervalRegret over RandomExpert and LongExpert.

    RandomExpert is an IntervalRegret over the R Rexp threads, restarted every
    epoch of 1/eps^2 days. LongExpert is a MonocarpicExpert over the union of
    the thread pools.
    """

    def __init__(self, n: int, T: int, eps: float, rng: np.random.Generator,
                 schedule: AdaptiveSchedule | None = None):
        self.sched = schedule or AdaptiveSchedule(n, T, eps)
        s = self.sched
        self.n, self.T = n, T
        self.rng = rng
        pool_rng = child_rng(rng)
        self.rexp = [Rexp(n, s.restart_length(r), s.width(r), rng) for r in range(1, s.R + 1)]
        self.pools = [MaintainPool(n, s.observe_rate, s.c_adm / s.eps_r(r), s.lifetime, pool_rng)
                      for r in range(1, s.R + 1)]
        self.random_ir: IntervalRegret | None = None
        self.long = MonocarpicExpert(T, rng)
        self.top = IntervalRegret(2, _next_pow2(T), rng)
        self.count: dict[int, int] = {}
        self.key: dict[int, tuple] = {}
        self.day = 0
        self.admissions: list[tuple] = []  # (day, thread, expert, candidate loss, thread loss)

    def _wake(self, expert: int) -> None:
        c = self.count.get(expert, 0)
        if c == 0:
            key = (expert, self.day + 1)
            self.key[expert] = key
            self.long.admit(key, expert)
        self.count[expert] = c + 1

    def _sleep(self, expert: int) -> None:
        self.count[expert] -= 1
        if self.count[expert] == 0:
            del self.count[expert]
            self.long.kill(self.key.pop(expert))

    def act(self) -> int:
        t = self.day + 1
        if (t - 1) % self.sched.B == 0:
            self.random_ir = IntervalRegret(self.sched.R, self.sched.B, self.rng)
        for th, mp in zip(self.rexp, self.pools):
            if th.restarting:
                mp.start()
        self._proposals = [th.act() for th in self.rexp]
        self._rand_pick = self.random_ir.act()
        rand_action = self._proposals[self._rand_pick]
        self._long_action = self.long.act()
        self._branch = self.top.act()
        if self._branch == 1 and self._long_action != ABSTAIN:
            return self._long_action
        return rand_action

    def observe(self, losses) -> None:
        losses = np.asarray(losses, dtype=float)
        thread_losses = np.array([th.observe(losses) for th in self.rexp])
        for mp in self.pools:
            mp.observe(losses)
        self.random_ir.observe(thread_losses)
        rand_loss = thread_losses[self._rand_pick]
        long_loss = 1.0 if self._long_action == ABSTAIN else float(losses[self._long_action])
        self.top.observe(np.array([rand_loss, long_loss]))
        self.long.observe(losses)
        self.day += 1
        t = self.day
        epoch = (t - 1) // self.sched.B + 1
        fresh = []
        for r, (th, mp) in enumerate(zip(self.rexp, self.pools), start=1):
            if th.restarting:
                new, admitted = mp.finish(th.realized, epoch)
                fresh.extend(new)
                self.admissions.extend((t, r, i, li, th.realized) for i, li in admitted)
        if t % self.sched.B == 0:
            for mp in self.pools:
                for i in mp.expire(epoch):
                    self._sleep(i)
        self.long.migrate()
        for i in fresh:
            self._wake(i)

    def pool_union(self) -> set:
        return set(self.count)

    def memory_words(self) -> int:
        words = sum(th.memory_words() for th in self.rexp) + sum(mp.memory_words() for mp in self.pools)
        if self.random_ir is not None:
            words += self.random_ir.memory_words()
        words += self.top.memory_words() + self.long.memory_words() + 2 * len(self.count) + 2 * len(self.key)
        return words


def grouped_adaptive(n: int, T: int, eps: float, G: int, source: RandomnessSource,
                     mode: str = "desk", **consts) -> GroupedLearner:
    """G contiguous groups, one Adaptive per group, MWU on top.

    Group 0 uses the "learner" stream, so G = 1 reproduces the ungrouped run.
    """
    groups = group_partition(n, G)
    subs = []
    for g, members in enumerate(groups):
        rng = source.fork("learner" if g == 0 else f"learner/group{g}")
        sched = AdaptiveSchedule.for_mode(mode, len(members), T, eps, **consts)
        subs.append(Adaptive(len(members), T, eps, rng, sched))
    return GroupedLearner(groups, subs, source.fork("learner/top"), horizon=T)
