"""Game loop, learner and adversary factories, traces, CSV output and seed sweeps."""

from __future__ import annotations

import dataclasses
import io
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .adaptive import Adaptive, AdaptiveSchedule, grouped_adaptive
from .adversaries import make_stream, point_mass
from .core import (ConfigError, DayLoss, GameConfig, MemoryMeter, RandomnessSource,
                   RegretLedger, is_power_of_two)
from .hedger import Mwu
from .interval import IntervalRegretLearner
from .monocarpic import _next_pow2
from .oblivious import DESK_MAX_THREADS, ObliviousFull, grouped_oblivious
from .pool import Baseline, PoolConstants

CSV_COLUMNS = ("day", "action", "alg_loss", "best_cum", "regret", "mem_words")
CSV_SCHEMA_VERSION = 1

ALGOS = ("mwu", "squint-hedge", "baseline", "oblivious-full", "grouped-oblivious",
         "adaptive", "grouped-adaptive")
ADVERSARIES = ("iid", "planted", "two-phase", "disjointness", "strong")

_POOL_KEYS = {"p_sample", "size_threshold", "pool_cap", "K_iters"}
_ADAPTIVE_KEYS = {"c_N", "c_adm"}


def default_epoch_length(n: int, T: int) -> int:
    """Largest divisor of T not above (T/n)^(2/3), which balances nB against T/sqrt(B)."""
    B = max(1, int((T / n) ** (2 / 3)))
    while T % B:
        B -= 1
    return B


def resolve_groups(cfg: GameConfig) -> int:
    if cfg.groups is not None:
        return cfg.groups
    if cfg.space_budget is None:
        return 1
    n, T, S = cfg.n, cfg.T, cfg.space_budget
    if cfg.algo == "grouped-oblivious":
        unit = int(cfg.constants.get("group_unit", math.ceil(math.log2(n * T)) ** 2))
        G = max(1, min(n, S // unit))
        return 1 << (G.bit_length() - 1)  # power of two keeps group sizes powers of two
    if cfg.algo == "grouped-adaptive":
        if n / S <= T <= S:
            return max(1, min(n, math.ceil(S / T)))
        return 1
    return 1


def validate(cfg: GameConfig) -> GameConfig:
    """GameConfig.validate plus the factory-level checks."""
    cfg.validate()
    if cfg.algo not in ALGOS:
        raise ConfigError(f"unknown algorithm {cfg.algo!r}")
    if cfg.adversary not in ADVERSARIES:
        raise ConfigError(f"unknown adversary {cfg.adversary!r}")
    if cfg.algo == "grouped-oblivious":
        G = resolve_groups(cfg)
        if cfg.n % G or not is_power_of_two(cfg.n // G) or cfg.T < 2 * (cfg.n // G):
            raise ConfigError(f"{G} groups must split n = {cfg.n} into power-of-two groups with T >= 2 n/G")
    if cfg.adversary == "disjointness" and cfg.epsilon is None:
        raise ConfigError("the disjointness adversary needs --epsilon")
    return cfg


def make_learner(cfg: GameConfig, source: RandomnessSource):
    n, T = cfg.n, cfg.T
    rng = source.fork("learner")
    consts = cfg.constants
    pool_over = {k: v for k, v in consts.items() if k in _POOL_KEYS}
    if "K_iters" in pool_over:
        pool_over["K_iters"] = int(pool_over["K_iters"])
    pool_consts = PoolConstants.for_mode(cfg.mode, n, T, **pool_over)
    ad_over = {k: float(v) for k, v in consts.items() if k in _ADAPTIVE_KEYS}
    max_threads = int(consts.get("max_threads", DESK_MAX_THREADS)) if cfg.mode == "desk" else None
    if cfg.algo == "mwu":
        return Mwu(np.arange(n), rng, horizon=T)
    if cfg.algo == "squint-hedge":
        return IntervalRegretLearner(np.arange(n), _next_pow2(T), rng)
    if cfg.algo == "baseline":
        B = int(consts.get("B", default_epoch_length(n, T)))
        return Baseline(n, T, B, rng, pool_consts)
    if cfg.algo == "oblivious-full":
        return ObliviousFull(n, T, rng, pool_consts, max_threads)
    if cfg.algo == "grouped-oblivious":
        return grouped_oblivious(n, T, resolve_groups(cfg), source, pool_consts, max_threads)
    if cfg.algo == "adaptive":
        return Adaptive(n, T, cfg.epsilon, rng, AdaptiveSchedule.for_mode(cfg.mode, n, T, cfg.epsilon, **ad_over))
    if cfg.algo == "grouped-adaptive":
        return grouped_adaptive(n, T, cfg.epsilon, resolve_groups(cfg), source, cfg.mode, **ad_over)
    raise ConfigError(f"unknown algorithm {cfg.algo!r}")


def make_adversary(cfg: GameConfig, source: RandomnessSource):
    params = dict(cfg.adversary_params)
    if cfg.adversary == "disjointness":
        params.setdefault("eps", cfg.epsilon)
    if cfg.adversary == "strong":
        params.setdefault("S", cfg.space_budget or max(1, cfg.n // 20))
    return make_stream(cfg.adversary, cfg.n, cfg.T, source.fork("adversary"), **params)


class ActionHistory(Sequence):
    """Read-only view of the actions committed so far."""

    def __init__(self, actions: list):
        self._a = actions

    def __len__(self):
        return len(self._a)

    def __getitem__(self, i):
        return self._a[i]


@dataclass
class GameTrace:
    config: GameConfig
    actions: np.ndarray
    alg_loss: np.ndarray
    best_cum: np.ndarray
    regret: np.ndarray
    mem_words: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return int(self.actions.size)

    @property
    def final_regret(self) -> float:
        return float(self.regret[-1])

    @property
    def peak_memory(self) -> int:
        return int(self.mem_words.max(initial=0))

    def rows(self, stride: int = 1):
        for d in range(self.T):
            day = d + 1
            if day % stride == 0 or day == self.T:
                yield (day, int(self.actions[d]), float(self.alg_loss[d]), float(self.best_cum[d]),
                       float(self.regret[d]), int(self.mem_words[d]))

    def to_csv(self, stream=None, stride: int = 1) -> str | None:
        """Write the trace; returns the text when no stream is given."""
        out = io.StringIO() if stream is None else stream
        out.write(",".join(CSV_COLUMNS) + "\n")
        for day, a, loss, best, reg, mem in self.rows(stride):
            out.write(f"{day},{a},{loss:.6f},{best:.6f},{reg:.6f},{mem}\n")
        return out.getvalue() if stream is None else None


def play(learner, adversary, n: int, T: int, meter: MemoryMeter | None = None):
    """Run the day loop; returns (actions, alg_loss, best_cum, regret, mem_words).

    The learner commits its action before the adversary is called. Adaptive
    adversaries get only the past actions; the strong one also gets the
    learner's current distribution (a point mass when it exposes none).
    """
    meter = meter or MemoryMeter()
    ledger = RegretLedger(n)
    actions = np.empty(T, dtype=np.int64)
    alg_loss = np.empty(T)
    best = np.empty(T)
    regret = np.empty(T)
    mem = np.empty(T, dtype=np.int64)
    history: list[int] = []
    view = ActionHistory(history)
    want_p = adversary.needs_distribution
    has_p = hasattr(learner, "distribution")
    for d in range(T):
        day = d + 1
        a = learner.act()
        p = None
        if want_p:
            p = _full_distribution(learner, n) if has_p else point_mass(n, a)
        x = DayLoss.checked(day, adversary.reveal(day, view, p), n)
        alg_loss[d] = ledger.record(x, a)
        learner.observe(x.losses)
        history.append(a)
        meter.set_level(learner.memory_words(), "learner")
        actions[d] = a
        best[d] = ledger.best_expert_loss
        regret[d] = ledger.regret
        mem[d] = meter.current_words
    meter.release_all()
    return actions, alg_loss, best, regret, mem


def _full_distribution(learner, n: int) -> np.ndarray:
    p = np.zeros(n)
    np.add.at(p, learner.experts, learner.distribution())
    return p


def run_game(cfg: GameConfig) -> GameTrace:
    validate(cfg)
    source = RandomnessSource(cfg.seed)
    learner = make_learner(cfg, source)
    adversary = make_adversary(cfg, source)
    meter = MemoryMeter()
    cols = play(learner, adversary, cfg.n, cfg.T, meter)
    meta = {"seed": cfg.seed, "peak_words": meter.peak_words, "schema": CSV_SCHEMA_VERSION}
    if hasattr(adversary, "eps"):
        meta["effective_eps"] = adversary.eps
    if cfg.algo in ("grouped-oblivious", "grouped-adaptive"):
        meta["groups"] = resolve_groups(cfg)
    return GameTrace(cfg, *cols, meta=meta)


def _summary_row(cfg: GameConfig) -> tuple:
    tr = run_game(cfg)
    return tr.final_regret, tr.peak_memory, float(tr.alg_loss.mean())


def run_suite(configs, parallelism: int = 1) -> list[dict]:
    """Median and quantile regret and peak memory per configuration (seeds pooled)."""
    configs = list(configs)
    if parallelism > 1:
        with ProcessPoolExecutor(parallelism) as ex:
            results = list(ex.map(_summary_row, configs))
    else:
        results = [_summary_row(c) for c in configs]
    groups: dict = {}
    for cfg, res in zip(configs, results):
        key = dataclasses.replace(cfg, seed=0)
        groups.setdefault(repr(key), (key, []))[1].append((cfg.seed, *res))
    table = []
    for key, rows in groups.values():
        reg = np.array([r[1] for r in rows])
        table.append({
            "algo": key.algo, "adversary": key.adversary, "n": key.n, "T": key.T,
            "seeds": [r[0] for r in rows],
            "median_regret": float(np.median(reg)),
            "q10_regret": float(np.quantile(reg, 0.1)),
            "q90_regret": float(np.quantile(reg, 0.9)),
            "median_peak_words": float(np.median([r[2] for r in rows])),
            "mean_avg_loss": float(np.mean([r[3] for r in rows])),
        })
    return table
