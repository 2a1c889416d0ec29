"""Interval regret over dyadic meta-experts with Squint weighting."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import kernels
from .core import ProtocolError, is_power_of_two, log2_int
from .hedger import SquintPrior, squint_prior


class DyadicBlock(NamedTuple):
    """Block (a, b) spans days [2^a (b-1) + 1, 2^a b]."""

    level: int
    index: int

    @property
    def start(self) -> int:
        return (self.index - 1 << self.level) + 1

    @property
    def end(self) -> int:
        return self.index << self.level

    @property
    def length(self) -> int:
        return 1 << self.level

    def contains(self, t: int) -> bool:
        return self.start <= t <= self.end


def effective_blocks(t: int, T: int) -> list[DyadicBlock]:
    """The block containing day t at every level 0..log2(T)-1 (level 0 alone when T = 1)."""
    if not is_power_of_two(T):
        raise ValueError("T must be a power of two")
    if not 1 <= t <= T:
        raise ValueError(f"day {t} outside [1, {T}]")
    return [DyadicBlock(a, ((t - 1) >> a) + 1) for a in range(max(1, log2_int(T)))]


def dyadic_decompose(t1: int, t2: int, T: int | None = None) -> list[DyadicBlock]:
    """Split [t1, t2] into aligned dyadic blocks, left to right, greedily largest-first."""
    if t1 < 1 or t2 < t1:
        raise ValueError(f"empty or invalid interval [{t1}, {t2}]")
    if T is not None and t2 > T:
        raise ValueError(f"interval end {t2} beyond horizon {T}")
    blocks = []
    cur = t1
    while cur <= t2:
        a = 0
        while (cur - 1) % (1 << (a + 1)) == 0 and cur + (1 << (a + 1)) - 1 <= t2:
            a += 1
        blocks.append(DyadicBlock(a, ((cur - 1) >> a) + 1))
        cur += 1 << a
    return blocks


class IntervalRegret:
    """Squint-weighted choice among the effective dyadic blocks over `size` slots.

    Each effective block runs its own MWU (restarted when the block opens,
    eta = sqrt(ln size / block length)). A block is sampled in proportion to
    its Squint weight and its MWU proposal is played. Non-effective blocks are
    charged the expected loss, i.e. v = 0, so they are never stored.

    Works on local slots: :meth:`act` returns a slot in [0, size) and
    :meth:`observe` takes the slot losses.
    """

    def __init__(self, size: int, horizon: int, rng: np.random.Generator,
                 prior: SquintPrior | None = None):
        prior = prior or squint_prior()
        self.core = kernels.IntervalCore(size, horizon, np.asarray(prior.eta), prior.logscale)
        self.rng = rng
        self.size = size
        self.horizon = horizon
        self.levels = self.core.levels

    @property
    def day(self) -> int:
        """Days observed so far."""
        return self.core.t

    def effective(self) -> list[DyadicBlock]:
        return effective_blocks(self.core.t + 1, self.horizon)

    def act(self) -> int:
        try:
            return self.core.act(self.rng.random(self.levels + 1))
        except RuntimeError as exc:
            raise ProtocolError(str(exc)) from exc

    def observe(self, slot_losses) -> float:
        """Update with the day's slot losses; returns the imputed expected loss."""
        try:
            return self.core.observe(np.asarray(slot_losses, dtype=float))
        except RuntimeError as exc:
            raise ProtocolError(str(exc)) from exc

    def memory_words(self) -> int:
        # per effective block: MWU cumulative losses plus the two Squint sums; one day counter
        return self.levels * (self.size + 2) + 1


class IntervalRegretLearner:
    """IntervalRegret over an explicit expert list, for direct play."""

    def __init__(self, experts, horizon: int, rng: np.random.Generator,
                 prior: SquintPrior | None = None):
        self.experts = np.asarray(experts, dtype=np.int64)
        self.inner = IntervalRegret(self.experts.size, horizon, rng, prior)

    def act(self) -> int:
        return int(self.experts[self.inner.act()])

    def observe(self, losses) -> None:
        self.inner.observe(np.asarray(losses)[self.experts])

    def memory_words(self) -> int:
        return self.inner.memory_words() + self.experts.size


def interval_regret_step(state: IntervalRegret, slot_losses) -> int:
    slot = state.act()
    state.observe(slot_losses)
    return slot
