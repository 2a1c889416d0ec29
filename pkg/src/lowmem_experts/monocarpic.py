"""Experts that wake once and die: lifetime buckets with an interval-regret meta layer."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import ABSTAIN, ProtocolError, pw
from .interval import IntervalRegret

log = logging.getLogger(__name__)


@dataclass
class MonocarpicMember:
    key: object
    expert: int
    birth: int
    death: int | None = None

    @property
    def alive(self) -> bool:
        return self.death is None


def _next_pow2(x: int) -> int:
    return 1 << max(0, int(x) - 1).bit_length()


class MonocarpicExpert:
    """Bucketed learner over experts with one contiguous lifetime each.

    Members are identified by a hashable ``key`` (the same expert id may come
    back under a new key, which is a new member). New members enter bucket 1;
    after day t, buckets 1..pw(t) each pour into the next one. Bucket l has its
    own IntervalRegret with horizon 2^(l-1), rebuilt every 2^(l-1) days on the
    then-current members, and a top IntervalRegret with horizon T picks which
    bucket to follow.

    Day order: :meth:`admit` for new members, :meth:`act`, :meth:`observe`,
    :meth:`kill` for members that died, :meth:`migrate`.
    """

    def __init__(self, T: int, rng: np.random.Generator):
        self.T = int(T)
        self.horizon = _next_pow2(self.T)
        self.L = max(1, self.horizon.bit_length() - 1)
        self.rng = rng
        self.members: dict = {}
        self.buckets: list[list] = [[] for _ in range(self.L + 1)]  # index 0 unused
        self.where: dict = {}
        self.top = IntervalRegret(self.L, self.horizon, rng)
        self.day = 0
        self._exp: list[IntervalRegret | None] = [None] * (self.L + 1)
        self._ids: list[np.ndarray] = [np.empty(0, dtype=np.int64)] * (self.L + 1)
        self._dead: list[np.ndarray] = [np.empty(0, dtype=bool)] * (self.L + 1)
        self._pos: list[dict] = [{} for _ in range(self.L + 1)]
        self._proposals = [ABSTAIN] * (self.L + 1)
        self._phase = "act"

    # -- membership ---------------------------------------------------------

    def admit(self, key, expert: int) -> None:
        if key in self.members:
            raise ValueError(f"member {key!r} was already admitted; monocarpic experts wake once")
        self.members[key] = MonocarpicMember(key, int(expert), self.day + 1)
        self.buckets[1].append(key)
        self.where[key] = 1

    def kill(self, key) -> None:
        m = self.members[key]
        if not m.alive:
            return
        m.death = self.day
        lvl = self.where.get(key)
        if lvl is not None:
            pos = self._pos[lvl].get(key)
            if pos is not None:
                self._dead[lvl][pos] = True

    def alive_keys(self) -> list:
        return [k for k, m in self.members.items() if m.alive]

    def bucket_of(self, key) -> int | None:
        return self.where.get(key)

    def migrate(self) -> None:
        """End-of-day bucket update for the day just observed."""
        if self._phase != "migrate":
            raise ProtocolError("migrate must follow observe")
        t = self.day
        for lvl in range(1, min(pw(t), self.L - 1) + 1):
            self.buckets[lvl + 1].extend(self.buckets[lvl])
            self.buckets[lvl] = []
            self._purge(lvl + 1)
        self._purge(1)
        self._phase = "act"

    def _purge(self, lvl: int) -> None:
        keep = []
        for k in self.buckets[lvl]:
            if self.members[k].alive:
                keep.append(k)
                self.where[k] = lvl
            else:
                # dead members leave for good once their bucket is updated
                self.where.pop(k, None)
                del self.members[k]
        self.buckets[lvl] = keep

    # -- play ---------------------------------------------------------------

    def _rebuild(self, lvl: int) -> None:
        keys = self.buckets[lvl]
        self._pos[lvl] = {k: i for i, k in enumerate(keys)}
        self._ids[lvl] = np.array([self.members[k].expert for k in keys], dtype=np.int64)
        self._dead[lvl] = np.array([not self.members[k].alive for k in keys], dtype=bool)
        self._exp[lvl] = IntervalRegret(len(keys), 1 << (lvl - 1), self.rng) if keys else None

    def act(self) -> int:
        if self._phase != "act":
            raise ProtocolError("act called out of order")
        t = self.day + 1
        if t > self.horizon:
            raise ProtocolError("monocarpic expert ran past its horizon")
        for lvl in range(1, self.L + 1):
            if (t - 1) % (1 << (lvl - 1)) == 0:
                self._rebuild(lvl)
        for lvl in range(1, self.L + 1):
            exp = self._exp[lvl]
            self._proposals[lvl] = ABSTAIN if exp is None else int(exp.act())
        self._chosen = self.top.act() + 1
        self._phase = "observe"
        if self._proposals[self._chosen] == ABSTAIN:
            # empty bucket picked: follow the heaviest non-empty one instead
            probs = self.top.core.probs
            live = [lvl for lvl in range(1, self.L + 1) if self._proposals[lvl] != ABSTAIN]
            if not live:
                log.debug("day %d: no members, abstaining", t)
                return ABSTAIN
            self._chosen = max(live, key=lambda lvl: probs[lvl - 1])
        slot = self._proposals[self._chosen]
        return int(self._ids[self._chosen][slot])

    def observe(self, losses) -> None:
        if self._phase != "observe":
            raise ProtocolError("observe called before act")
        losses = np.asarray(losses, dtype=float)
        meta = np.ones(self.L)
        for lvl in range(1, self.L + 1):
            exp = self._exp[lvl]
            if exp is None:
                continue
            slot_losses = losses[self._ids[lvl]]
            slot_losses[self._dead[lvl]] = 1.0
            meta[lvl - 1] = slot_losses[self._proposals[lvl]]
            exp.observe(slot_losses)
        self.top.observe(meta)
        self.day += 1
        self._phase = "migrate"

    def end_day(self, losses) -> None:
        self.observe(losses)
        self.migrate()

    def memory_words(self) -> int:
        # key, expert id, birth day per stored member; the IntervalRegret states
        words = 3 * len(self.members) + self.top.memory_words()
        for exp in self._exp:
            if exp is not None:
                words += exp.memory_words()
        return words


def me_admit(state: MonocarpicExpert, expert: int, key=None) -> MonocarpicExpert:
    state.admit(expert if key is None else key, expert)
    return state


def me_migrate(state: MonocarpicExpert) -> MonocarpicExpert:
    state.migrate()
    return state


def me_step(state: MonocarpicExpert, losses) -> int:
    """One full day without deaths: act, observe, migrate."""
    action = state.act()
    state.end_day(losses)
    return action
