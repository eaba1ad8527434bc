"""Compiled hot-path kernels for the portfolio benchmark.

Strictly optional: when numba is unavailable every export is None and the
generic numpy operator path takes over. Parallel variants reduce into
per-thread buffers combined in thread order, so results are deterministic
for a fixed thread count (recorded in run metadata).
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit, prange, get_num_threads

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False
    njit = None
    prange = None
    get_num_threads = None


if HAVE_NUMBA:

    @njit(cache=True)
    def _spos(x, delta):
        if x <= 0.0:
            return 0.0
        if x <= delta:
            return x * x / (2.0 * delta)
        return x - delta / 2.0

    @njit(cache=True)
    def _spos_grad(x, delta):
        if x <= 0.0:
            return 0.0
        if x <= delta:
            return x / delta
        return 1.0

    @njit(cache=True, fastmath=True)
    def _grad_range(Phi, YY, Aall, Dvec, pen_weight, delta, w, bvec, lo, hi, out):
        d = Phi.shape[1]
        m = YY.shape[1]
        Nm = Aall.shape[0]
        N = Nm // m
        z = np.empty(Nm)
        dj = np.empty(Nm)
        s = np.empty(m)
        for k in range(lo, hi):
            phik = Phi[k]
            for c in range(Nm):
                acc = 0.0
                for l in range(d):
                    acc += Aall[c, l] * phik[l]
                z[c] = acc
            for j in range(m):
                tot = 0.0
                for i in range(N):
                    tot += z[i * m + j]
                s[j] = tot
            for i in range(N):
                r = -w[i]
                for j in range(m):
                    r += bvec[j] * z[i * m + j]
                budget_coef = pen_weight * 2.0 * _spos(r, delta) * _spos_grad(r, delta)
                for j in range(m):
                    c = i * m + j
                    t = -z[c]
                    pen = pen_weight * 2.0 * _spos(t, delta) * _spos_grad(t, delta)
                    dj[c] = -YY[k, j] + (z[c] + s[j]) * Dvec[j] - pen + budget_coef * bvec[j]
            for c in range(Nm):
                djc = dj[c]
                for l in range(d):
                    out[c, l] += djc * phik[l]

    @njit(cache=True, fastmath=True)
    def grad_serial(Phi, YY, Aall, Dvec, pen_weight, delta, w, bvec):
        out = np.zeros((Aall.shape[0], Phi.shape[1]))
        _grad_range(Phi, YY, Aall, Dvec, pen_weight, delta, w, bvec, 0, Phi.shape[0], out)
        return out / Phi.shape[0]

    @njit(cache=True, parallel=True, fastmath=True)
    def grad_parallel(Phi, YY, Aall, Dvec, pen_weight, delta, w, bvec, nthreads):
        n = Phi.shape[0]
        acc = np.zeros((nthreads, Aall.shape[0], Phi.shape[1]))
        for t in prange(nthreads):
            lo = t * n // nthreads
            hi = (t + 1) * n // nthreads
            _grad_range(Phi, YY, Aall, Dvec, pen_weight, delta, w, bvec, lo, hi, acc[t])
        out = np.zeros((Aall.shape[0], Phi.shape[1]))
        for t in range(nthreads):
            out += acc[t]
        return out / n

    @njit(cache=True, fastmath=True)
    def _cvar_range(Phi, YY, Ai, zeta, inv1ma, delta, lo, hi, gA):
        # returns (sum of smoothed tail terms, sum of tail slopes); gA accumulates
        d = Phi.shape[1]
        m = YY.shape[1]
        s_acc = 0.0
        sp_acc = 0.0
        z = np.empty(m)
        for k in range(lo, hi):
            phik = Phi[k]
            u = -zeta
            for c in range(m):
                acc = 0.0
                for l in range(d):
                    acc += Ai[c, l] * phik[l]
                z[c] = acc
                u -= YY[k, c] * acc
            s_acc += _spos(u, delta)
            sp = _spos_grad(u, delta)
            if sp != 0.0:
                sp_acc += sp
                coef = inv1ma * sp
                for c in range(m):
                    yc = -YY[k, c] * coef
                    for l in range(d):
                        gA[c, l] += yc * phik[l]
        return s_acc, sp_acc

    @njit(cache=True, fastmath=True)
    def cvar_serial(Phi, YY, Ai, zeta, inv1ma, gamma, delta):
        n = Phi.shape[0]
        gA = np.zeros_like(Ai)
        s_acc, sp_acc = _cvar_range(Phi, YY, Ai, zeta, inv1ma, delta, 0, n, gA)
        h = zeta + inv1ma * s_acc / n - gamma
        gz = 1.0 - inv1ma * sp_acc / n
        return h, gA / n, gz

    @njit(cache=True, parallel=True, fastmath=True)
    def cvar_parallel(Phi, YY, Ai, zeta, inv1ma, gamma, delta, nthreads):
        n = Phi.shape[0]
        gAs = np.zeros((nthreads, Ai.shape[0], Ai.shape[1]))
        partial = np.zeros((nthreads, 2))
        for t in prange(nthreads):
            lo = t * n // nthreads
            hi = (t + 1) * n // nthreads
            s_acc, sp_acc = _cvar_range(Phi, YY, Ai, zeta, inv1ma, delta, lo, hi, gAs[t])
            partial[t, 0] = s_acc
            partial[t, 1] = sp_acc
        gA = np.zeros_like(Ai)
        s_acc = 0.0
        sp_acc = 0.0
        for t in range(nthreads):
            gA += gAs[t]
            s_acc += partial[t, 0]
            sp_acc += partial[t, 1]
        h = zeta + inv1ma * s_acc / n - gamma
        gz = 1.0 - inv1ma * sp_acc / n
        return h, gA / n, gz

else:  # pragma: no cover
    grad_serial = None
    grad_parallel = None
    cvar_serial = None
    cvar_parallel = None
