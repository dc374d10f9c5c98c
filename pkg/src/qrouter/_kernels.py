"""Compiled fixed-step explicit Runge-Kutta loops.

Both loops work in the interaction picture of the on-site drive, where only
the dressed bonds ``K[i, i+1] = u[i]`` remain (index i <-> i+1). The caller
tabulates ``u`` for every RK stage of every step in one carrier period:
``table[j % m, stage, i]`` is used at step j. The Butcher tableau (a, b) is
passed in, so RK4 and the 8th-order scheme share one code path.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _rhs_pure(d, u, out):
    n = d.shape[0]
    for i in range(n):
        acc = 0j
        if i + 1 < n:
            acc += u[i] * d[i + 1]
        if i > 0:
            acc += np.conj(u[i - 1]) * d[i - 1]
        out[i] = -1j * acc


@njit(cache=True)
def rk_pure(d, table, dt, nsteps, stride, a, b, out_d):
    """Advance ``d`` in place; record after every ``stride`` steps and after the last."""
    n = d.shape[0]
    m = table.shape[0]
    s = b.shape[0]
    k = np.empty((s, n), np.complex128)
    tmp = np.empty(n, np.complex128)
    rec = 0
    for j in range(nsteps):
        row = j % m
        for st in range(s):
            for i in range(n):
                tmp[i] = d[i]
            for q in range(st):
                w = dt * a[st, q]
                if w != 0.0:
                    for i in range(n):
                        tmp[i] += w * k[q, i]
            _rhs_pure(tmp, table[row, st], k[st])
        for st in range(s):
            w = dt * b[st]
            if w != 0.0:
                for i in range(n):
                    d[i] += w * k[st, i]
        if (j + 1) % stride == 0 or j == nsteps - 1:
            for i in range(n):
                out_d[rec, i] = d[i]
            rec += 1
    return rec


@njit(cache=True)
def _rhs_lindblad(r, u, damp, out):
    # upper triangle of -i[K, r] - damp*r, mirrored into the lower one
    n = r.shape[0]
    for p in range(n):
        for q in range(p, n):
            acc = 0j
            if p + 1 < n:
                acc += u[p] * r[p + 1, q]
            if p > 0:
                acc += np.conj(u[p - 1]) * r[p - 1, q]
            if q + 1 < n:
                acc -= r[p, q + 1] * np.conj(u[q])
            if q > 0:
                acc -= r[p, q - 1] * u[q - 1]
            val = -1j * acc - damp[p, q] * r[p, q]
            if q == p:
                out[p, p] = val.real
            else:
                out[p, q] = val
                out[q, p] = np.conj(val)


@njit(cache=True)
def rk_lindblad(r, table, damp, dt, nsteps, stride, a, b, out_diag, out_row0):
    """Density-matrix analogue of :func:`rk_pure`; records populations and row 0."""
    n = r.shape[0]
    m = table.shape[0]
    s = b.shape[0]
    k = np.empty((s, n, n), np.complex128)
    tmp = np.empty((n, n), np.complex128)
    rec = 0
    for j in range(nsteps):
        row = j % m
        for st in range(s):
            for p in range(n):
                for q in range(n):
                    tmp[p, q] = r[p, q]
            for mm in range(st):
                w = dt * a[st, mm]
                if w != 0.0:
                    for p in range(n):
                        for q in range(n):
                            tmp[p, q] += w * k[mm, p, q]
            _rhs_lindblad(tmp, table[row, st], damp, k[st])
        for st in range(s):
            w = dt * b[st]
            if w != 0.0:
                for p in range(n):
                    for q in range(n):
                        r[p, q] += w * k[st, p, q]
        # exact Hermiticity: the lower triangle mirrors the upper one
        for p in range(n):
            r[p, p] = r[p, p].real
            for q in range(p + 1, n):
                r[q, p] = np.conj(r[p, q])
        if (j + 1) % stride == 0 or j == nsteps - 1:
            for i in range(n):
                out_diag[rec, i] = r[i, i].real
                out_row0[rec, i] = r[0, i]
            rec += 1
    return rec
