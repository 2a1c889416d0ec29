"""Pool of sampled experts with loss snapshots, the cover test, Merge, and Baseline."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import ABSTAIN, ProtocolError, pw
from .hedger import Mwu

log = logging.getLogger(__name__)

INF = math.inf
NOW = None  # boundary marker: the current cumulative loss


@dataclass(frozen=True)
class PoolConstants:
    p_sample: float
    size_threshold: float
    pool_cap: float
    K_iters: int

    @classmethod
    def desk(cls, **overrides) -> "PoolConstants":
        base = dict(p_sample=0.25, size_threshold=8, pool_cap=24, K_iters=16)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def paper(cls, n: int, T: int, **overrides) -> "PoolConstants":
        lg = math.log2(n * T)
        base = dict(p_sample=1 / lg**4, size_threshold=lg**5, pool_cap=2 * lg**9,
                    K_iters=int(math.ceil(16 * lg)))
        base.update(overrides)
        return cls(**base)

    @classmethod
    def for_mode(cls, mode: str, n: int, T: int, **overrides) -> "PoolConstants":
        if mode == "paper":
            return cls.paper(n, T, **overrides)
        return cls.desk(**overrides)


class SnapshotTable:
    """Pool entries and their pairwise loss snapshots.

    Each entry (a slot) holds its expert id, entry day and loss accumulated
    since entry. When the first entry of a given day arrives, the running loss
    of every live entry is frozen under that day; this is the snapshot
    C_i at E_j for every later entry j. Snapshots are dropped once no live
    entry has that entry day. One table may back several sub-pools.
    """

    def __init__(self, capacity: int = 64):
        self.expert = np.zeros(capacity, dtype=np.int64)
        self.entry = np.zeros(capacity, dtype=np.int64)
        self.cum = np.zeros(capacity)
        self.live = np.zeros(capacity, dtype=bool)
        self.snaps: dict[int, dict[int, float]] = {}
        self._free: list[int] = list(range(capacity - 1, -1, -1))
        self._day_count: dict[int, int] = {}
        self._n_live = 0
        self._cells = 0  # snapshot cells held
        self.day = 0  # days of losses applied so far

    def __len__(self) -> int:
        return self._n_live

    def _grow(self) -> None:
        old = self.expert.size
        new = 2 * old
        for name in ("expert", "entry", "cum", "live"):
            arr = getattr(self, name)
            grown = np.zeros(new, dtype=arr.dtype)
            grown[:old] = arr
            setattr(self, name, grown)
        self._free.extend(range(new - 1, old - 1, -1))

    def add(self, expert: int) -> int:
        """New entry for `expert`, entering at the start of the next day."""
        d = self.day + 1
        if not self._free:
            self._grow()
        slot = self._free.pop()
        if d not in self.snaps:
            live = np.flatnonzero(self.live)
            self.snaps[d] = dict(zip(live.tolist(), self.cum[live].tolist()))
            self._cells += live.size + 1
        self.expert[slot] = expert
        self.entry[slot] = d
        self.cum[slot] = 0.0
        self.live[slot] = True
        self.snaps[d][slot] = 0.0
        self._cells += 1
        self._n_live += 1
        self._day_count[d] = self._day_count.get(d, 0) + 1
        return slot

    def remove(self, slot: int) -> None:
        if not self.live[slot]:
            raise KeyError(f"slot {slot} is not live")
        self.live[slot] = False
        self._n_live -= 1
        for snap in self.snaps.values():
            if snap.pop(slot, None) is not None:
                self._cells -= 1
        d = int(self.entry[slot])
        self._day_count[d] -= 1
        if self._day_count[d] == 0:
            del self._day_count[d]
            self._cells -= len(self.snaps.pop(d)) + 1
        self._free.append(slot)

    def update(self, losses) -> None:
        live = self.live
        self.cum[live] += np.asarray(losses, dtype=float)[self.expert[live]]
        self.day += 1

    def at(self, slot: int, day) -> float:
        """Loss of `slot` from its entry up to the start of `day` (NOW: so far)."""
        if day is NOW:
            return float(self.cum[slot])
        if day == self.entry[slot]:
            return 0.0
        return self.snaps[day][slot]

    def words(self) -> int:
        # expert id, entry day, running loss per entry; one cell per snapshot plus its day
        return 3 * self._n_live + self._cells


# --- cover test ----------------------------------------------------------------

def segment_loss(table: SnapshotTable, i: int, j: int | None = None) -> float:
    """Loss of entry i from its entry until j enters (or until now when j is None).

    Infinite when j entered no later than i, since that interval is empty.
    """
    if j is None:
        return table.at(i, NOW)
    if table.entry[j] <= table.entry[i]:
        return INF
    return table.at(i, int(table.entry[j]))


def _segments(table: SnapshotTable, F, j: int):
    ej = int(table.entry[j])
    later = sorted({int(table.entry[f]) for f in F if table.entry[f] > ej})
    return [ej, *later, NOW]


def covering_benchmark(table: SnapshotTable, F, j: int) -> float:
    """Best piecewise loss of F over j's lifetime, cut at the entry days of F.

    On each segment only members of F that had already entered at its start
    are candidates; a segment with no candidate makes the benchmark infinite.
    """
    F = list(F)
    if not F:
        return INF
    bounds = _segments(table, F, j)
    entries = {f: int(table.entry[f]) for f in F}
    total = 0.0
    for a, b in zip(bounds[:-1], bounds[1:]):
        best = INF
        for f in F:
            if entries[f] <= a:
                v = table.at(f, b) - table.at(f, a)
                if v < best:
                    best = v
        if best == INF:
            return INF
        total += best
    return total


def is_covered(table: SnapshotTable, F, j: int) -> bool:
    return table.at(j, NOW) >= covering_benchmark(table, F, j) - 1.0


def estimate_size(Q, p: float, rng: np.random.Generator) -> int:
    return int((rng.random(len(Q)) < p).sum())


def sample_subset(Q, p: float, rng: np.random.Generator) -> list:
    Q = list(Q)
    keep = rng.random(len(Q)) < p
    return [q for q, k in zip(Q, keep) if k]


def filter_pool(table: SnapshotTable, F, Q) -> list:
    """Q minus every entry covered by F; all tests see the same Q."""
    F = list(F)
    if not F:
        return list(Q)
    return [q for q in Q if not is_covered(table, F, q)]


def merge(table: SnapshotTable, QA, QB, rng: np.random.Generator,
          constants: PoolConstants) -> list:
    """Shrink QA + QB by repeated sample-and-filter rounds; returns the survivors."""
    QC = list(QA) + list(QB)
    for _ in range(constants.K_iters):
        if estimate_size(QC, constants.p_sample, rng) <= constants.size_threshold:
            break
        F = sample_subset(QC, constants.p_sample, rng)
        inF = set(F)
        kept = set(filter_pool(table, F, QC))
        QC = [q for q in QC if q in inF or q in kept]
    return QC


def merge_into(table: SnapshotTable, QA, QB, rng, constants, on_evict=None) -> list:
    """merge() and drop the losers from the table."""
    out = merge(table, QA, QB, rng, constants)
    keep = set(out)
    for q in list(QA) + list(QB):
        if q not in keep:
            if on_evict is not None:
                on_evict(q)
            table.remove(q)
    return out


def sample_new(n: int, rng: np.random.Generator) -> np.ndarray:
    """Each of the n experts independently with probability 1/n."""
    return np.flatnonzero(rng.random(n) < 1.0 / n)


# --- Baseline --------------------------------------------------------------------

class Baseline:
    """Epoch learner over a pool with hierarchical merges.

    Each epoch of B days draws fresh experts into sub-pool 0, plays MWU over
    the whole pool, and at its end cascades merges up the sub-pools like a
    binary counter.
    """

    def __init__(self, n: int, T: int, B: int, rng: np.random.Generator,
                 constants: PoolConstants | None = None):
        if B < 1 or T % B:
            raise ValueError("epoch length B must divide T")
        self.n, self.T, self.B = n, T, B
        self.rng = rng
        self.constants = constants or PoolConstants.desk()
        self.table = SnapshotTable()
        epochs = T // B
        self.subpools: list[list[int]] = [[] for _ in range(epochs.bit_length() + 1)]
        self.day = 0
        self.epoch = 0
        self.mwu: Mwu | None = None
        self._slots = np.empty(0, dtype=np.int64)
        self.size_log: list[list[int]] = []

    def pool_slots(self) -> list[int]:
        return [s for sp in self.subpools for s in sp]

    def _epoch_start(self) -> None:
        self.epoch += 1
        for e in sample_new(self.n, self.rng):
            self.subpools[0].append(self.table.add(int(e)))
        self._slots = np.array(self.pool_slots(), dtype=np.int64)
        if self._slots.size:
            self.mwu = Mwu(self.table.expert[self._slots], self.rng, horizon=self.B)
        else:
            self.mwu = None
            log.debug("epoch %d: empty pool", self.epoch)

    def _epoch_end(self) -> None:
        for lvl in range(pw(self.epoch) + 1):
            self.subpools[lvl + 1] = merge_into(self.table, self.subpools[lvl + 1], self.subpools[lvl],
                                                self.rng, self.constants)
            self.subpools[lvl] = []
        self.size_log.append([len(sp) for sp in self.subpools])

    def act(self) -> int:
        if self.day >= self.T:
            raise ProtocolError("baseline ran past its horizon")
        if self.day % self.B == 0:
            self._epoch_start()
        return ABSTAIN if self.mwu is None else self.mwu.act()

    def observe(self, losses) -> None:
        self.table.update(losses)
        if self.mwu is not None:
            self.mwu.observe(losses)
        self.day += 1
        if self.day % self.B == 0:
            self._epoch_end()

    def memory_words(self) -> int:
        words = self.table.words() + sum(len(sp) for sp in self.subpools)
        if self.mwu is not None:
            words += self.mwu.memory_words()
        return words


def baseline_step(state: Baseline, losses) -> int:
    action = state.act()
    state.observe(losses)
    return action
