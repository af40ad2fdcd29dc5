"""Flooding sum-product kernels for the IRA graph.

Both implementations share one signature and update the message state in
place::

    bp_run(intr, lpar, chk, c2v, c2pl, c2pr, max_iter) -> (iterations, converged)

``intr``  intrinsic LLR of each information bit (all repetition copies summed)
``lpar``  channel LLR of each accumulator parity bit
``chk``   (M, alpha) information-node indices per check, ``-1`` padded
``c2v``   (M, alpha) check-to-information messages
``c2pl``  check ``j`` to parity ``j-1`` (entry 0 unused)
``c2pr``  check ``j`` to parity ``j``

LLRs are ``log P(0)/P(1)`` and every message is clamped to +-LLR_CLAMP.
The loop stops early once the hard decisions satisfy every check.
"""
from __future__ import annotations

import numpy as np

from ._accel import HAVE_NUMBA, njit

LLR_CLAMP = 30.0
_TMAX = np.tanh(LLR_CLAMP / 2.0)


def bp_run_numpy(intr, lpar, chk, c2v, c2pl, c2pr, max_iter):
    m, a = chk.shape
    k = intr.shape[0]
    valid = chk >= 0
    idx = np.where(valid, chk, 0)
    flat_idx = idx[valid]
    t = np.empty((m, a + 2))
    pre = np.ones((m, a + 3))
    suf = np.ones((m, a + 3))
    for it in range(1, max_iter + 1):
        tot = intr + np.bincount(flat_idx, weights=c2v[valid], minlength=k)
        v2c = np.clip(tot[idx] - c2v, -LLR_CLAMP, LLR_CLAMP)
        t[:, :a] = np.where(valid, np.tanh(0.5 * v2c), 1.0)
        left = np.empty(m)
        left[1:] = lpar[:-1] + c2pr[:-1]
        right = lpar.copy()
        right[:-1] += c2pl[1:]
        t[:, a] = np.tanh(0.5 * np.clip(left, -LLR_CLAMP, LLR_CLAMP))
        t[0, a] = 1.0
        t[:, a + 1] = np.tanh(0.5 * np.clip(right, -LLR_CLAMP, LLR_CLAMP))
        np.cumprod(t, axis=1, out=pre[:, 1:a + 3])
        np.cumprod(t[:, ::-1], axis=1, out=suf[:, 1:a + 3])
        ext = pre[:, :a + 2] * suf[:, a + 1::-1]
        out = 2.0 * np.arctanh(np.clip(ext, -_TMAX, _TMAX))
        c2v[:] = np.where(valid, out[:, :a], 0.0)
        c2pl[:] = out[:, a]
        c2pl[0] = 0.0
        c2pr[:] = out[:, a + 1]
        # syndrome of the a-posteriori hard decisions
        app = intr + np.bincount(flat_idx, weights=c2v[valid], minlength=k)
        app_p = lpar + c2pr
        app_p[:-1] += c2pl[1:]
        hi = (app < 0).astype(np.int64)
        hp = (app_p < 0).astype(np.int64)
        s = np.where(valid, hi[idx], 0).sum(axis=1) + hp
        s[1:] += hp[:-1]
        if not np.any(s & 1):
            return it, True
    return max_iter, False


@njit
def _th(x):
    # tanh(x / 2) with the clamp applied
    x = min(max(x, -LLR_CLAMP), LLR_CLAMP)
    z = np.exp(-x)
    return (1.0 - z) / (1.0 + z)


@njit
def bp_run_numba(intr, lpar, chk, c2v, c2pl, c2pr, max_iter):
    m, a = chk.shape
    k = intr.shape[0]
    tot = np.empty(k)
    t = np.empty(a + 2)
    pre = np.empty(a + 3)
    suf = np.empty(a + 3)
    tmax = np.tanh(LLR_CLAMP / 2.0)
    app_p = np.empty(m)
    c2pr_old_prev = 0.0
    for it in range(1, max_iter + 1):
        for i in range(k):
            tot[i] = intr[i]
        for j in range(m):
            for s in range(a):
                v = chk[j, s]
                if v >= 0:
                    tot[v] += c2v[j, s]
        for j in range(m):
            # gather incoming messages (old state), then overwrite
            for s in range(a):
                v = chk[j, s]
                if v >= 0:
                    t[s] = _th(tot[v] - c2v[j, s])
                else:
                    t[s] = 1.0
            if j == 0:
                t[a] = 1.0
            else:
                t[a] = _th(lpar[j - 1] + c2pr_old_prev)
            x = lpar[j]
            if j + 1 < m:
                x += c2pl[j + 1]
            t[a + 1] = _th(x)
            c2pr_old_prev = c2pr[j]
            pre[0] = 1.0
            suf[a + 2] = 1.0
            for s in range(a + 2):
                pre[s + 1] = pre[s] * t[s]
            for s in range(a + 1, -1, -1):
                suf[s] = suf[s + 1] * t[s]
            for s in range(a + 2):
                e = pre[s] * suf[s + 1]
                e = min(max(e, -tmax), tmax)
                o = np.log((1.0 + e) / (1.0 - e))
                if s < a:
                    c2v[j, s] = o if chk[j, s] >= 0 else 0.0
                elif s == a:
                    c2pl[j] = o if j > 0 else 0.0
                else:
                    c2pr[j] = o
        # syndrome
        for i in range(k):
            tot[i] = intr[i]
        for j in range(m):
            for s in range(a):
                v = chk[j, s]
                if v >= 0:
                    tot[v] += c2v[j, s]
        for j in range(m):
            app_p[j] = lpar[j] + c2pr[j]
            if j + 1 < m:
                app_p[j] += c2pl[j + 1]
        ok = True
        for j in range(m):
            par = 1 if app_p[j] < 0 else 0
            if j > 0 and app_p[j - 1] < 0:
                par += 1
            for s in range(a):
                v = chk[j, s]
                if v >= 0 and tot[v] < 0:
                    par += 1
            if par & 1:
                ok = False
                break
        if ok:
            return it, True
    return max_iter, False


def bp_run(intr, lpar, chk, c2v, c2pl, c2pr, max_iter):
    """Dispatch to the numba kernel when available."""
    if HAVE_NUMBA:
        return bp_run_numba(intr, lpar, chk, c2v, c2pl, c2pr, max_iter)
    return bp_run_numpy(intr, lpar, chk, c2v, c2pl, c2pr, max_iter)
