"""Full-feedback hedging primitives: MWU, Squint weights, and the grouping wrapper."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expi

from . import kernels
from .core import ABSTAIN, ProtocolError


def default_eta(k: int, horizon: int, delta: float | None = None) -> float:
    """sqrt(ln(k / delta) / horizon), with delta = 1 / (k * horizon) by default."""
    if k < 1 or horizon < 1:
        raise ValueError("need k >= 1 and horizon >= 1")
    if delta is None:
        delta = 1.0 / (k * horizon)
    return math.sqrt(math.log(k / delta) / horizon)


def mwu_distribution(cum_loss, eta: float) -> np.ndarray:
    """p(i) proportional to exp(-eta * cum_loss(i)), max-shifted."""
    cum = np.asarray(cum_loss, dtype=float)
    if cum.size == 0:
        raise ValueError("empty expert set")
    return np.asarray(kernels.mwu_probs(cum, eta))


class Mwu:
    """Multiplicative weights over a fixed expert set.

    ``experts`` maps local slots to the ids that are played; losses passed to
    :meth:`observe` are indexed by those ids. Ties in sampling go to the
    lowest slot.
    """

    def __init__(self, experts, rng: np.random.Generator, eta: float | None = None,
                 horizon: int | None = None):
        self.experts = np.asarray(experts, dtype=np.int64)
        if self.experts.size == 0:
            raise ValueError("empty expert set")
        if eta is None:
            if horizon is None:
                raise ValueError("give eta or a horizon")
            eta = default_eta(self.experts.size, horizon)
        self.eta = float(eta)
        self.cum_loss = np.zeros(self.experts.size)
        self.rng = rng
        self._pending = False

    def distribution(self) -> np.ndarray:
        return mwu_distribution(self.cum_loss, self.eta)

    def act(self) -> int:
        if self._pending:
            raise ProtocolError("act called twice in one day")
        self._pending = True
        return int(self.experts[kernels.mwu_sample(self.cum_loss, self.eta, self.rng.random())])

    def observe(self, losses) -> None:
        if not self._pending:
            raise ProtocolError("observe called before act")
        self.cum_loss += np.asarray(losses)[self.experts]
        self._pending = False

    def step(self, losses) -> int:
        action = self.act()
        self.observe(losses)
        return action

    def memory_words(self) -> int:
        # id + cumulative loss per expert, plus eta
        return 2 * self.experts.size + 1


def mwu_step(state: Mwu, losses) -> int:
    """Sample from the pre-update distribution, then charge every expert."""
    return state.step(losses)


# --- Squint ------------------------------------------------------------------

def _prior_cdf(x):
    # mass of (0, x] under gamma(eta) proportional to 1 / (eta ln^2 eta) on (0, 1/2]
    return math.log(2.0) / math.log(1.0 / x)


def _prior_eta_integral(lo, hi):
    # integral over (lo, hi] of eta * gamma(eta); antiderivative of 1/ln^2 is li(x) - x/ln x
    def F(x):
        if x <= 0.0:
            return 0.0
        return expi(math.log(x)) - x / math.log(x)
    return math.log(2.0) * (F(hi) - F(lo))


@dataclass(frozen=True)
class SquintPrior:
    """Discretised learning-rate prior for Squint.

    ``points`` cells split [eta_min, 1/2] geometrically; each cell carries its
    exact prior mass and is represented by the prior mean of eta within it.
    The remaining mass below eta_min forms one more point.
    """

    eta: tuple
    mass: tuple

    @property
    def logscale(self) -> np.ndarray:
        return np.log(np.asarray(self.mass)) + np.log(np.asarray(self.eta))

    @property
    def fresh_weight(self) -> float:
        """E[eta]: the weight of a meta-expert with empty history."""
        return float(np.dot(self.mass, self.eta))


@lru_cache(maxsize=None)
def squint_prior(points: int = 40, eta_min: float = 2.0 ** -12) -> SquintPrior:
    if points < 1 or not 0 < eta_min < 0.5:
        raise ValueError("need points >= 1 and 0 < eta_min < 1/2")
    edges = np.geomspace(0.5, eta_min, points + 1)
    etas, masses = [], []
    for hi, lo in zip(edges[:-1], edges[1:]):
        m = _prior_cdf(hi) - _prior_cdf(lo)
        masses.append(m)
        etas.append(_prior_eta_integral(lo, hi) / m)
    tail = _prior_cdf(eta_min)
    masses.append(tail)
    etas.append(_prior_eta_integral(0.0, eta_min) / tail)
    total = sum(masses)
    return SquintPrior(tuple(etas), tuple(m / total for m in masses))


def squint_weight(sum_v: float, sum_v2: float, prior: SquintPrior | None = None) -> float:
    """sum_j mass_j * eta_j * exp(eta_j * sum_v - eta_j^2 * sum_v2)."""
    prior = prior or squint_prior()
    return math.exp(kernels.squint_logweight(sum_v, sum_v2, np.asarray(prior.eta), prior.logscale))


@dataclass
class SquintAccumulator:
    sum_v: float = 0.0
    sum_v2: float = 0.0
    count: int = 0

    def update(self, v: float) -> None:
        self.sum_v += v
        self.sum_v2 += v * v
        self.count += 1

    def weight(self, prior: SquintPrior | None = None) -> float:
        return squint_weight(self.sum_v, self.sum_v2, prior)


# --- grouping ----------------------------------------------------------------

def group_partition(n: int, G: int) -> list[np.ndarray]:
    """Split [n] into G contiguous groups whose sizes differ by at most one."""
    if not 1 <= G <= n:
        raise ValueError(f"G must lie in [1, {n}], got {G}")
    return [np.asarray(g, dtype=np.int64) for g in np.array_split(np.arange(n), G)]


class GroupedLearner:
    """MWU over meta-experts, one per expert group.

    Each sub-learner sees its group's slice of the loss vector with local ids
    0..len(group)-1; a meta-expert's loss is the realized loss of its
    sub-learner's action (1 for an abstention).
    """

    def __init__(self, groups, sub_learners, top_rng: np.random.Generator, horizon: int,
                 eta: float | None = None):
        if len(groups) != len(sub_learners) or not groups:
            raise ValueError("need one sub-learner per group")
        self.groups = [np.asarray(g, dtype=np.int64) for g in groups]
        self.subs = list(sub_learners)
        self.top = Mwu(np.arange(len(self.groups)), top_rng, eta=eta, horizon=horizon)
        self._actions: list[int] = []

    def act(self) -> int:
        self._actions = []
        for g, sub in zip(self.groups, self.subs):
            a = sub.act()
            self._actions.append(ABSTAIN if a == ABSTAIN else int(g[a]))
        return self._actions[self.top.act()]

    def observe(self, losses) -> None:
        losses = np.asarray(losses)
        meta = np.array([1.0 if a == ABSTAIN else losses[a] for a in self._actions])
        for g, sub in zip(self.groups, self.subs):
            sub.observe(losses[g])
        self.top.observe(meta)

    def memory_words(self) -> int:
        # sub-learners, the top MWU, and one boundary per group
        return sum(s.memory_words() for s in self.subs) + self.top.memory_words() + len(self.groups) + 1


def grouped_learner_step(learner: GroupedLearner, losses) -> int:
    action = learner.act()
    learner.observe(losses)
    return action
