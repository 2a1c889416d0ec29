"""Loss streams: oblivious synthetic generators and the two lower-bound adversaries.

Every stream exposes ``reveal(day, history, p=None)``. ``history`` is the tuple
of actions committed on days 1..day-1; only the strong adversary also receives
``p``, the learner's current distribution.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import ABSTAIN, ConfigError

log = logging.getLogger(__name__)


class LossStream:
    kind = "oblivious"
    needs_distribution = False

    def __init__(self, n: int, rng: np.random.Generator):
        self.n = n
        self.rng = rng

    def reveal(self, day: int, history: tuple, p=None) -> np.ndarray:
        raise NotImplementedError


class IidStream(LossStream):
    """i.i.d. losses: Uniform[0, 1], or Bernoulli(q) when ``q`` is given."""

    def __init__(self, n: int, rng: np.random.Generator, q: float | None = None):
        super().__init__(n, rng)
        self.q = q

    def reveal(self, day, history, p=None):
        u = self.rng.random(self.n)
        return u if self.q is None else (u < self.q).astype(float)


class PlantedGap(LossStream):
    """Stationary means: ``mean`` for everyone, ``mean - gap`` for ``best``,
    plus independent uniform noise of half-width ``noise``; clipped to [0, 1]."""

    def __init__(self, n: int, rng: np.random.Generator, gap: float = 0.2, best: int = 0,
                 mean: float = 0.5, noise: float = 0.3):
        super().__init__(n, rng)
        self.mu = np.full(n, float(mean))
        self.mu[best] -= gap
        self.noise = noise

    def reveal(self, day, history, p=None):
        x = self.mu + self.noise * (2.0 * self.rng.random(self.n) - 1.0)
        return np.clip(x, 0.0, 1.0)


class TwoPhase(LossStream):
    """Bernoulli losses whose best expert switches at ``switch``.

    Expert a has mean ``low`` before the switch and ``high`` after; expert b
    the reverse; every other expert has mean ``high`` throughout.
    """

    def __init__(self, n: int, T: int, rng: np.random.Generator, a: int = 0, b: int = 1,
                 low: float = 0.25, high: float = 0.75, switch: int | None = None):
        super().__init__(n, rng)
        if n < 2:
            raise ConfigError("two-phase stream needs n >= 2")
        self.switch = T // 2 if switch is None else switch
        self.first = np.full(n, float(high))
        self.first[a] = low
        self.second = np.full(n, float(high))
        self.second[b] = low

    def means(self, day: int) -> np.ndarray:
        return self.first if day <= self.switch else self.second

    def reveal(self, day, history, p=None):
        return (self.rng.random(self.n) < self.means(day)).astype(float)


def two_phase_best_loss(T: int, switch: int, low: float, high: float) -> float:
    """Expected loss of the best fixed expert on the two-phase stream."""
    return min(low * switch + high * (T - switch), high * switch + low * (T - switch))


# --- set-disjointness adversary -------------------------------------------------

def choose_block_size(n: int, eps: float) -> int:
    """Nearest M to eps * sqrt(n) with M = 1 (mod 3), M >= 4 and M | n (ties: smaller)."""
    target = eps * math.sqrt(n)
    valid = [m for m in range(4, n + 1, 3) if n % m == 0]
    if not valid:
        raise ConfigError(f"no block size M = 1 (mod 3), M >= 4 divides n = {n}")
    return min(valid, key=lambda m: (abs(m - target), m))


@dataclass
class DisjointnessInstance:
    M: int
    N: int
    x_a: np.ndarray  # (N, M) in {0, 1}
    x_b: np.ndarray
    star: np.ndarray  # intersecting coordinate per block

    @property
    def special(self) -> np.ndarray:
        """Expert ids of the intersecting coordinates."""
        return np.arange(self.N) * self.M + self.star


def sample_disjointness(n: int, eps: float, rng: np.random.Generator, M: int | None = None) -> DisjointnessInstance:
    M = choose_block_size(n, eps) if M is None else M
    if M < 4 or M % 3 != 1 or n % M:
        raise ConfigError(f"invalid block size {M} for n = {n}")
    N = n // M
    k = (M - 1) // 3
    pattern_a = np.array([1] + [0] * k + [1] * k + [0] * k)
    pattern_b = np.array([1] + [0] * k + [0] * k + [1] * k)
    x_a = np.empty((N, M), dtype=np.int8)
    x_b = np.empty((N, M), dtype=np.int8)
    star = np.empty(N, dtype=np.int64)
    for alpha in range(N):
        perm = rng.permutation(M)
        x_a[alpha, perm] = pattern_a
        x_b[alpha, perm] = pattern_b
        star[alpha] = perm[0]
    return DisjointnessInstance(M, N, x_a, x_b, star)


class DisjointnessAdversary(LossStream):
    """Adaptive adversary built from N independent set-disjointness blocks.

    Days are grouped into epochs of max(1, N // 10) days. With probability
    1 - eps^2 a day is all zeros. Otherwise one fair coin picks side A or B:
    blocks the learner has played in this epoch (on earlier days) get 1/2
    everywhere, the others get 1 - x_side. ``eps`` is the effective value
    M / sqrt(n).
    """

    kind = "adaptive"

    def __init__(self, n: int, eps: float, rng: np.random.Generator, M: int | None = None):
        super().__init__(n, rng)
        self.instance = sample_disjointness(n, eps, rng, M)
        self.M, self.N = self.instance.M, self.instance.N
        self.eps = self.M / math.sqrt(n)
        if abs(self.eps - eps) > 1e-12:
            log.info("disjointness: M = %d, effective eps = %.4f (asked %.4f)", self.M, self.eps, eps)
        self.epoch_length = max(1, self.N // 10)
        self.loss_a = (1.0 - self.instance.x_a).reshape(-1)
        self.loss_b = (1.0 - self.instance.x_b).reshape(-1)

    def played_blocks(self, day: int, history: tuple) -> set:
        start = (day - 1) // self.epoch_length * self.epoch_length + 1
        return {a // self.M for a in history[start - 1:day - 1] if a != ABSTAIN}

    def reveal(self, day, history, p=None):
        hot, side = self.rng.random(2)
        if hot >= self.eps**2:
            return np.zeros(self.n)
        x = (self.loss_a if side < 0.5 else self.loss_b).copy()
        for blk in self.played_blocks(day, history):
            x[blk * self.M:(blk + 1) * self.M] = 0.5
        return x


# --- strong adaptive adversary ---------------------------------------------------

class StrongAdversary(LossStream):
    """Sees the learner's current distribution p.

    A fixed random set I of 10S special experts; the 2S special experts with the
    largest p (ties to lower id) get loss 1, the other special experts 0, and
    everyone outside I gets 1.
    """

    kind = "strong"
    needs_distribution = True

    def __init__(self, n: int, S: int, rng: np.random.Generator):
        super().__init__(n, rng)
        if S < 1 or 10 * S > n:
            raise ConfigError(f"strong adversary needs 1 <= S and 10S <= n, got S = {S}, n = {n}")
        self.S = S
        self.special = np.sort(rng.choice(n, size=10 * S, replace=False))

    def reveal(self, day, history, p=None):
        if p is None:
            raise ValueError("strong adversary needs the learner's distribution")
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n,) or p.min() < -1e-12 or abs(p.sum() - 1.0) > 1e-6:
            raise ValueError("p is not a distribution over the experts")
        x = np.ones(self.n)
        sub = p[self.special]
        order = np.lexsort((self.special, -sub))  # by -p, then id
        x[self.special[order[2 * self.S:]]] = 0.0
        return x


def point_mass(n: int, action: int) -> np.ndarray:
    """The distribution of a learner that only reports its action (uniform on abstain)."""
    if action == ABSTAIN:
        return np.full(n, 1.0 / n)
    p = np.zeros(n)
    p[action] = 1.0
    return p


def make_stream(kind: str, n: int, T: int, rng: np.random.Generator, **params) -> LossStream:
    if kind == "iid":
        return IidStream(n, rng, **params)
    if kind == "planted":
        return PlantedGap(n, rng, **params)
    if kind == "two-phase":
        return TwoPhase(n, T, rng, **params)
    if kind == "disjointness":
        eps = params.pop("eps")
        return DisjointnessAdversary(n, eps, rng, **params)
    if kind == "strong":
        return StrongAdversary(n, params.pop("S"), rng)
    raise ConfigError(f"unknown adversary {kind!r}")
