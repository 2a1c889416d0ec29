"""Pure-Python kernels; reference fallback for the compiled ``_core`` module.

Every routine performs the same floating point operations in the same order as
its Cython twin (scalar libm exp/log, sequential sums), so both backends
produce bit-identical traces.
"""

from math import exp, log, sqrt

BACKEND = "python"


def _floats(x):
    return x.tolist() if hasattr(x, "tolist") else list(x)


def sample_index(weights, u):
    """Inverse-CDF draw from unnormalised non-negative `weights`.

    The heaviest index (lowest id among ties) is laid out first, then the rest
    in id order, so a quantile of 0 always returns the argmax.
    """
    w = _floats(weights)
    n = len(w)
    k = 0
    total = 0.0
    for i in range(n):
        total += w[i]
        if w[i] > w[k]:
            k = i
    if not total > 0.0:
        return k
    target = u * total
    if target < w[k]:
        return k
    target -= w[k]
    acc = 0.0
    last = k
    for i in range(n):
        if i == k:
            continue
        if w[i] > 0.0:
            last = i
        acc += w[i]
        if target < acc:
            return i
    return last


def mwu_weights(cum, eta):
    """Unnormalised exp(-eta * (cum - min cum))."""
    c = _floats(cum)
    m = min(c)
    return [exp(-eta * (x - m)) for x in c]


def mwu_probs(cum, eta):
    w = mwu_weights(cum, eta)
    s = 0.0
    for x in w:
        s += x
    return [x / s for x in w]


def mwu_sample(cum, eta, u):
    return sample_index(mwu_weights(cum, eta), u)


def squint_logweight(sv, sv2, grid_eta, grid_logscale):
    """log of sum_j mass_j * eta_j * exp(eta_j * sv - eta_j^2 * sv2).

    `grid_logscale[j]` is log(mass_j * eta_j).
    """
    ge = _floats(grid_eta)
    gl = _floats(grid_logscale)
    terms = [gl[j] + ge[j] * sv - ge[j] * ge[j] * sv2 for j in range(len(ge))]
    m = max(terms)
    s = 0.0
    for x in terms:
        s += exp(x - m)
    return m + log(s)


class IntervalCore:
    """Dyadic interval meta-experts over a fixed set of `size` base experts.

    Level a holds the currently effective block of length 2**a: an embedded
    MWU (cumulative losses since the block opened) and the Squint sums of
    v = expected loss - block loss. Blocks reopen from scratch when they
    expire, which is exactly the lazy storage scheme: only effective blocks
    are ever materialised.
    """

    def __init__(self, size, horizon, grid_eta, grid_logscale):
        if size < 1:
            raise ValueError("IntervalCore needs at least one expert")
        if horizon < 1 or horizon & (horizon - 1):
            raise ValueError("horizon must be a power of two")
        self.size = int(size)
        self.horizon = int(horizon)
        self.levels = max(1, self.horizon.bit_length() - 1)
        self._ge = _floats(grid_eta)
        self._gl = _floats(grid_logscale)
        self.eta = [sqrt(log(self.size) / (1 << a)) for a in range(self.levels)]
        self._cum = [[0.0] * self.size for _ in range(self.levels)]
        self._sv = [0.0] * self.levels
        self._sv2 = [0.0] * self.levels
        self._prop = [0] * self.levels
        self._q = [0.0] * self.levels
        self.chosen_level = -1
        self.t = 0
        self._acted = False

    def act(self, uniforms):
        if self._acted:
            raise RuntimeError("act called twice without observe")
        if self.t >= self.horizon:
            raise RuntimeError("interval core exhausted its horizon")
        u = _floats(uniforms)
        L = self.levels
        for a in range(L):
            if self.t % (1 << a) == 0:
                row = self._cum[a]
                for i in range(self.size):
                    row[i] = 0.0
                self._sv[a] = 0.0
                self._sv2[a] = 0.0
        logw = [0.0] * L
        for a in range(L):
            self._prop[a] = mwu_sample(self._cum[a], self.eta[a], u[a])
            logw[a] = squint_logweight(self._sv[a], self._sv2[a], self._ge, self._gl)
        m = max(logw)
        w = [exp(x - m) for x in logw]
        s = 0.0
        for x in w:
            s += x
        for a in range(L):
            self._q[a] = w[a] / s
        self.chosen_level = sample_index(w, u[L])
        self._acted = True
        return self._prop[self.chosen_level]

    def observe(self, losses):
        if not self._acted:
            raise RuntimeError("observe called before act")
        x = _floats(losses)
        L = self.levels
        bar = 0.0
        for a in range(L):
            bar += self._q[a] * x[self._prop[a]]
        for a in range(L):
            v = bar - x[self._prop[a]]
            self._sv[a] += v
            self._sv2[a] += v * v
            row = self._cum[a]
            for i in range(self.size):
                row[i] += x[i]
        self.t += 1
        self._acted = False
        return bar

    @property
    def proposals(self):
        return list(self._prop)

    @property
    def probs(self):
        return list(self._q)

    @property
    def sv(self):
        return list(self._sv)

    @property
    def sv2(self):
        return list(self._sv2)

    @property
    def cum(self):
        return [list(r) for r in self._cum]
