"""Shared data model: days, regret accounting, memory metering, seeded randomness."""

from __future__ import annotations

import logging
import math
import zlib
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

log = logging.getLogger(__name__)

ABSTAIN = -1


class ConfigError(ValueError):
    """Raised when a game configuration violates a validation rule."""


class ProtocolError(RuntimeError):
    """Raised when the act/observe day protocol is violated."""


class MeterError(RuntimeError):
    """A discharge would take the meter below zero: an accounting bug."""


def pw(t: int) -> int:
    """Largest k such that t is a multiple of 2**k."""
    t = int(t)
    if t < 1:
        raise ValueError(f"pw is defined for t >= 1, got {t}")
    return (t & -t).bit_length() - 1


def is_power_of_two(x: int) -> bool:
    return x >= 1 and (x & (x - 1)) == 0


def log2_int(x: int) -> int:
    if not is_power_of_two(x):
        raise ValueError(f"{x} is not a power of two")
    return x.bit_length() - 1


@dataclass(frozen=True)
class DayLoss:
    day: int
    losses: np.ndarray

    @classmethod
    def checked(cls, day: int, losses, n: int | None = None) -> "DayLoss":
        """Validate a loss vector; out-of-range values are clamped with a warning."""
        arr = np.asarray(losses, dtype=float)
        if arr.ndim != 1 or (n is not None and arr.shape[0] != n):
            raise ValueError(f"day {day}: expected {n} losses, got shape {arr.shape}")
        lo, hi = arr.min(initial=0.0), arr.max(initial=0.0)
        if lo >= 0.0 and hi <= 1.0:
            return cls(day, arr)
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"day {day}: non-finite loss")
        if lo < 0.0 or hi > 1.0:
            log.warning("day %d: losses outside [0, 1] clamped", day)
            arr = np.clip(arr, 0.0, 1.0)
        return cls(day, arr)


class RegretLedger:
    """Harness-side regret bookkeeping.

    The per-expert cumulative losses live here so regret can be reported; they
    are not part of any learner's memory.
    """

    def __init__(self, n: int):
        self.n = n
        self.day = 0
        self.cum_alg_loss = 0.0
        self.cum_loss_per_expert = np.zeros(n)

    @property
    def best_expert_loss(self) -> float:
        return float(self.cum_loss_per_expert.min()) if self.n else 0.0

    @property
    def regret(self) -> float:
        return self.cum_alg_loss - self.best_expert_loss

    def record(self, day: DayLoss, action: int) -> float:
        """Charge the day's loss for `action`; returns that loss.

        ABSTAIN is charged loss 1.
        """
        if day.day != self.day + 1:
            raise ProtocolError(f"out-of-order day {day.day}, expected {self.day + 1}")
        if action != ABSTAIN and not 0 <= action < self.n:
            raise ValueError(f"unknown action {action}")
        loss = 1.0 if action == ABSTAIN else float(day.losses[action])
        self.cum_alg_loss += loss
        self.cum_loss_per_expert += day.losses
        self.day = day.day
        return loss


class MemoryMeter:
    """Word counter with a peak and a per-label charge log.

    One word is one stored scalar.
    """

    def __init__(self):
        self.current_words = 0
        self.peak_words = 0
        self.by_label: dict[str, int] = {}

    def charge(self, words: int, label: str = "") -> "MemoryMeter":
        if words < 0:
            raise ValueError("cannot charge a negative number of words")
        self.current_words += words
        self.by_label[label] = self.by_label.get(label, 0) + words
        self.peak_words = max(self.peak_words, self.current_words)
        return self

    def discharge(self, words: int, label: str = "") -> "MemoryMeter":
        if words < 0:
            raise ValueError("cannot discharge a negative number of words")
        held = self.by_label.get(label, 0)
        if words > held or words > self.current_words:
            raise MeterError(f"discharge of {words} words under label {label!r} holding {held}")
        self.current_words -= words
        self.by_label[label] = held - words
        return self

    def set_level(self, words: int, label: str = "") -> "MemoryMeter":
        """Charge or discharge the difference so `label` holds exactly `words`."""
        held = self.by_label.get(label, 0)
        if words > held:
            self.charge(words - held, label)
        elif words < held:
            self.discharge(held - words, label)
        return self

    def release_all(self) -> None:
        for label, held in list(self.by_label.items()):
            if held:
                self.discharge(held, label)

    @property
    def balanced(self) -> bool:
        return self.current_words == 0 and not any(self.by_label.values())


class RandomnessSource:
    """Root seed plus labelled, reproducible forks.

    Forking with the same (seed, label) always yields the same stream; the
    label is hashed into the SeedSequence entropy so distinct labels give
    independent streams.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF

    def fork(self, label: str) -> np.random.Generator:
        key = [zlib.crc32(part.encode()) for part in label.split("/")]
        return np.random.default_rng(np.random.SeedSequence([self.seed, *key]))


def child_rng(rng: np.random.Generator) -> np.random.Generator:
    """Independent child stream, deterministic given the parent's state."""
    return np.random.default_rng(rng.integers(0, 2**63))


@dataclass
class GameConfig:
    n: int
    T: int
    algo: str = "mwu"
    adversary: str = "iid"
    epsilon: float | None = None
    space_budget: int | None = None
    groups: int | None = None
    seed: int = 0
    mode: str = "desk"
    constants: dict = field(default_factory=dict)
    adversary_params: dict = field(default_factory=dict)

    def validate(self) -> "GameConfig":
        if self.n < 1 or self.T < 1:
            raise ConfigError("n and T must be positive")
        if self.mode not in ("desk", "paper"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.algo in ("oblivious-full", "grouped-oblivious"):
            if not (is_power_of_two(self.n) and is_power_of_two(self.T)):
                raise ConfigError("oblivious algorithm needs n and T powers of two")
            if self.T < 2 * self.n:
                raise ConfigError("oblivious algorithm needs T >= 2n")
        if self.algo in ("adaptive", "grouped-adaptive"):
            eps = self.epsilon
            if eps is None or not 0 < eps < 1:
                raise ConfigError("adaptive algorithm needs epsilon in (0, 1)")
            k = -math.log2(eps)
            if abs(k - round(k)) > 1e-12:
                raise ConfigError(f"epsilon must be a power of 1/2, got {eps}")
            epoch = round(1 / eps**2)
            if self.T % epoch:
                raise ConfigError(f"1/epsilon^2 = {epoch} must divide T = {self.T}")
        if self.algo == "baseline":
            B = self.constants.get("B")
            if B is not None and self.T % int(B):
                raise ConfigError("epoch length B must divide T")
        if self.groups is not None and not 1 <= self.groups <= self.n:
            raise ConfigError("groups must lie in [1, n]")
        return self


def regret_of(loss_table: np.ndarray, actions: Iterable[int]) -> float:
    """Offline regret from a full (T, n) loss table; ABSTAIN costs 1."""
    table = np.asarray(loss_table, dtype=float)
    alg = sum(1.0 if a == ABSTAIN else table[t, a] for t, a in enumerate(actions))
    return alg - table.sum(axis=0).min()
