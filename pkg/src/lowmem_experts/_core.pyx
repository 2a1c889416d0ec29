# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Mirrors ``_core_py`` operation for operation."""

import numpy as np
from libc.math cimport exp, log, sqrt

BACKEND = "cython"


cdef Py_ssize_t _sample(const double[::1] w, Py_ssize_t n, double u) noexcept nogil:
    cdef Py_ssize_t i, k = 0, last
    cdef double total = 0.0, target, acc = 0.0
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


cdef void _mwu_weights(const double[::1] cum, Py_ssize_t n, double eta, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i
    cdef double m = cum[0]
    for i in range(1, n):
        if cum[i] < m:
            m = cum[i]
    for i in range(n):
        out[i] = exp(-eta * (cum[i] - m))


cdef double _squint_logweight(double sv, double sv2, const double[::1] ge, const double[::1] gl,
                              double[::1] buf) noexcept nogil:
    cdef Py_ssize_t j, n = ge.shape[0]
    cdef double m, s = 0.0
    for j in range(n):
        buf[j] = gl[j] + ge[j] * sv - ge[j] * ge[j] * sv2
    m = buf[0]
    for j in range(1, n):
        if buf[j] > m:
            m = buf[j]
    for j in range(n):
        s += exp(buf[j] - m)
    return m + log(s)


def sample_index(weights, double u):
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    return int(_sample(w, w.shape[0], u))


def mwu_weights(cum, double eta):
    cdef const double[::1] c = np.ascontiguousarray(cum, dtype=np.float64)
    out = np.empty(c.shape[0])
    _mwu_weights(c, c.shape[0], eta, out)
    return out.tolist()


def mwu_probs(cum, double eta):
    w = mwu_weights(cum, eta)
    cdef double s = 0.0
    for x in w:
        s += x
    return [x / s for x in w]


def mwu_sample(cum, double eta, double u):
    cdef const double[::1] c = np.ascontiguousarray(cum, dtype=np.float64)
    cdef double[::1] w = np.empty(c.shape[0])
    _mwu_weights(c, c.shape[0], eta, w)
    return int(_sample(w, c.shape[0], u))


def squint_logweight(double sv, double sv2, grid_eta, grid_logscale):
    cdef const double[::1] ge = np.ascontiguousarray(grid_eta, dtype=np.float64)
    cdef const double[::1] gl = np.ascontiguousarray(grid_logscale, dtype=np.float64)
    cdef double[::1] buf = np.empty(ge.shape[0])
    return _squint_logweight(sv, sv2, ge, gl, buf)


cdef class IntervalCore:
    """Dyadic interval meta-experts over a fixed set of `size` base experts."""

    cdef public Py_ssize_t size, horizon, levels, t, chosen_level
    cdef bint _acted
    cdef double[::1] _ge, _gl, _eta, _sv, _sv2, _q, _wbuf, _lbuf, _gbuf
    cdef double[:, ::1] _cum
    cdef Py_ssize_t[::1] _prop

    def __init__(self, size, horizon, grid_eta, grid_logscale):
        if size < 1:
            raise ValueError("IntervalCore needs at least one expert")
        if horizon < 1 or horizon & (horizon - 1):
            raise ValueError("horizon must be a power of two")
        self.size = size
        self.horizon = horizon
        self.levels = max(1, int(horizon).bit_length() - 1)
        self._ge = np.array(grid_eta, dtype=np.float64)
        self._gl = np.array(grid_logscale, dtype=np.float64)
        self._eta = np.array([sqrt(log(<double>self.size) / (1 << a)) for a in range(self.levels)])
        self._cum = np.zeros((self.levels, self.size))
        self._sv = np.zeros(self.levels)
        self._sv2 = np.zeros(self.levels)
        self._q = np.zeros(self.levels)
        self._prop = np.zeros(self.levels, dtype=np.intp)
        self._wbuf = np.empty(self.size)
        self._lbuf = np.empty(self.levels)
        self._gbuf = np.empty(self._ge.shape[0])
        self.chosen_level = -1
        self.t = 0
        self._acted = False

    @property
    def eta(self):
        return list(self._eta)

    def act(self, uniforms):
        if self._acted:
            raise RuntimeError("act called twice without observe")
        if self.t >= self.horizon:
            raise RuntimeError("interval core exhausted its horizon")
        cdef const double[::1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
        if u.shape[0] < self.levels + 1:
            raise ValueError("need levels + 1 uniforms")
        self._act(u)
        return int(self._prop[self.chosen_level])

    cdef void _act(self, const double[::1] u) noexcept nogil:
        cdef Py_ssize_t a, i, L = self.levels
        cdef double m, s = 0.0
        for a in range(L):
            if self.t % (1 << a) == 0:
                for i in range(self.size):
                    self._cum[a, i] = 0.0
                self._sv[a] = 0.0
                self._sv2[a] = 0.0
        for a in range(L):
            _mwu_weights(self._cum[a], self.size, self._eta[a], self._wbuf)
            self._prop[a] = _sample(self._wbuf, self.size, u[a])
            self._lbuf[a] = _squint_logweight(self._sv[a], self._sv2[a], self._ge, self._gl, self._gbuf)
        m = self._lbuf[0]
        for a in range(1, L):
            if self._lbuf[a] > m:
                m = self._lbuf[a]
        for a in range(L):
            self._lbuf[a] = exp(self._lbuf[a] - m)
        for a in range(L):
            s += self._lbuf[a]
        for a in range(L):
            self._q[a] = self._lbuf[a] / s
        self.chosen_level = _sample(self._lbuf, L, u[L])
        self._acted = True

    def observe(self, losses):
        if not self._acted:
            raise RuntimeError("observe called before act")
        cdef const double[::1] x = np.ascontiguousarray(losses, dtype=np.float64)
        if x.shape[0] != self.size:
            raise ValueError("loss vector does not match the expert set")
        return self._observe(x)

    cdef double _observe(self, const double[::1] x) noexcept nogil:
        cdef Py_ssize_t a, i, L = self.levels
        cdef double bar = 0.0, v
        for a in range(L):
            bar += self._q[a] * x[self._prop[a]]
        for a in range(L):
            v = bar - x[self._prop[a]]
            self._sv[a] += v
            self._sv2[a] += v * v
            for i in range(self.size):
                self._cum[a, i] += x[i]
        self.t += 1
        self._acted = False
        return bar

    @property
    def proposals(self):
        return [int(p) for p in self._prop]

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
        return [list(self._cum[a]) for a in range(self.levels)]
