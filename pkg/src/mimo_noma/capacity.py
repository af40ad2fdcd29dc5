"""Capacity region of the MIMO-NOMA multiple-access channel.

User indices are 0-based in the Python API.  All rates are in bits per
channel use.  For a user subset ``S`` the region constraint is

    R_S <= log2 det(I + sigma^-2 H'_S^H H'_S)

and the dominant face is the part of the boundary where the sum constraint
is tight.  Its vertices are the SIC points (one per decoding order).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

MAX_EXHAUSTIVE_USERS = 20


@dataclass(frozen=True)
class ExtremePoint:
    """Maximal extreme point for decoding order ``order``.

    ``order[-1]`` is decoded last (interference free); ``order[0]`` is
    decoded first against all other users.
    """

    order: tuple
    rates: np.ndarray


def _logdet2_psd_plus_identity(gram: np.ndarray) -> float:
    """``log2 det(I + gram)`` for a Hermitian PSD ``gram``."""
    sign, ld = np.linalg.slogdet(np.eye(gram.shape[0]) + gram)
    if sign.real <= 0:
        raise np.linalg.LinAlgError("I + gram is not positive definite")
    return float(ld / np.log(2.0))


def _gram(hprime, noise_var) -> np.ndarray:
    hprime = np.atleast_2d(np.asarray(hprime))
    return (hprime.conj().T @ hprime) / noise_var


def subset_rate_bound(hprime, noise_var: float, s) -> float:
    """Mutual-information bound ``log2|I + sigma^-2 H'_S^H H'_S|`` for subset ``s``."""
    idx = sorted(set(int(i) for i in s))
    hprime = np.atleast_2d(np.asarray(hprime))
    if not idx:
        raise ValueError("user subset must be non-empty")
    if idx[0] < 0 or idx[-1] >= hprime.shape[1]:
        raise ValueError(f"user index out of range for {hprime.shape[1]} users")
    hs = hprime[:, idx]
    return _logdet2_psd_plus_identity((hs.conj().T @ hs) / noise_var)


def sum_capacity(hprime, noise_var: float) -> float:
    """Sum capacity, evaluated on the smaller of the two Gram matrices."""
    hprime = np.atleast_2d(np.asarray(hprime))
    n_r, n_u = hprime.shape
    if n_r < n_u:
        g = (hprime @ hprime.conj().T) / noise_var
    else:
        g = (hprime.conj().T @ hprime) / noise_var
    return _logdet2_psd_plus_identity(g)


def _check_order(order, n_u):
    order = tuple(int(k) for k in order)
    if sorted(order) != list(range(n_u)):
        raise ValueError(f"order {order} is not a permutation of 0..{n_u - 1}")
    return order


def maximal_extreme_point(hprime, noise_var: float, order) -> ExtremePoint:
    """SIC corner point for the given decoding order.

    User ``order[j]`` sees users ``order[j+1:]`` as interference, so its rate
    is ``C(order[j:]) - C(order[j+1:])``.
    """
    hprime = np.atleast_2d(np.asarray(hprime))
    n_u = hprime.shape[1]
    order = _check_order(order, n_u)
    g = _gram(hprime, noise_var)
    rates = np.zeros(n_u)
    tail = 0.0
    for j in range(n_u - 1, -1, -1):
        idx = list(order[j:])
        c = _logdet2_psd_plus_identity(g[np.ix_(idx, idx)])
        rates[order[j]] = c - tail
        tail = c
    return ExtremePoint(order=order, rates=rates)


def all_extreme_points(hprime, noise_var: float) -> list:
    n_u = np.atleast_2d(np.asarray(hprime)).shape[1]
    return [maximal_extreme_point(hprime, noise_var, p) for p in itertools.permutations(range(n_u))]


def subset_bounds(hprime, noise_var: float) -> np.ndarray:
    """Bounds for every subset, indexed by bitmask (entry 0 is the empty set).

    Subsets of equal size are evaluated in one batched ``slogdet`` call.
    """
    hprime = np.atleast_2d(np.asarray(hprime))
    n_u = hprime.shape[1]
    if n_u > MAX_EXHAUSTIVE_USERS:
        raise ValueError(
            f"{n_u} users exceed the exhaustive limit of {MAX_EXHAUSTIVE_USERS}; "
            "check membership on sampled subsets instead")
    g = _gram(hprime, noise_var)
    out = np.zeros(1 << n_u)
    for k in range(1, n_u + 1):
        combos = np.array(list(itertools.combinations(range(n_u), k)))
        masks = np.sum(1 << combos, axis=1)
        for start in range(0, len(combos), 20000):
            c = combos[start:start + 20000]
            sub = g[c[:, :, None], c[:, None, :]] + np.eye(k)
            _, ld = np.linalg.slogdet(sub)
            out[masks[start:start + 20000]] = ld / np.log(2.0)
    return out


def _subset_sums(r: np.ndarray) -> np.ndarray:
    n = len(r)
    sums = np.zeros(1 << n)
    for i in range(n):
        bit = 1 << i
        sums[bit:2 * bit] = sums[:bit] + r[i]
    return sums


def in_region(hprime, noise_var: float, r, tol: float = 1e-9) -> bool:
    """True iff ``r`` is non-negative and satisfies every subset constraint."""
    r = np.asarray(r, dtype=float)
    n_u = np.atleast_2d(np.asarray(hprime)).shape[1]
    if r.shape != (n_u,):
        raise ValueError(f"rate vector must have length {n_u}")
    if np.any(r < -tol) or not np.all(np.isfinite(r)):
        return False
    bounds = subset_bounds(hprime, noise_var)
    return bool(np.all(_subset_sums(r)[1:] <= bounds[1:] + tol))


def on_dominant_face(hprime, noise_var: float, r, tol: float = 1e-9) -> bool:
    r = np.asarray(r, dtype=float)
    return abs(r.sum() - sum_capacity(hprime, noise_var)) <= tol and in_region(hprime, noise_var, r, tol)


def _greedy_vertex(g: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Vertex of the dominant face minimising ``<weights, x>``.

    The user with the smallest weight is decoded last and receives its
    interference-free rate; this is the greedy rule for polymatroids.
    """
    n = len(weights)
    seq = np.argsort(weights, kind="stable")
    x = np.zeros(n)
    prev = 0.0
    for k in range(1, n + 1):
        idx = seq[:k]
        c = _logdet2_psd_plus_identity(g[np.ix_(idx, idx)])
        x[seq[k - 1]] = c - prev
        prev = c
    return x


def _affine_min_norm(points: np.ndarray):
    """Coefficients of the min-norm point in the affine hull of ``points`` rows."""
    m = points.shape[0]
    gram = points @ points.T
    kkt = np.zeros((m + 1, m + 1))
    kkt[:m, :m] = gram
    kkt[:m, m] = 1.0
    kkt[m, :m] = 1.0
    rhs = np.zeros(m + 1)
    rhs[m] = 1.0
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:m]


def project_to_dominant_face(hprime, noise_var: float, r, tol: float = 1e-12,
                             max_iter: int = 1000) -> np.ndarray:
    """Euclidean projection of ``r`` onto the dominant face.

    Uses Wolfe's minimum-norm-point method on the face shifted by ``-r``.
    The linear minimisation oracle over the face is the greedy (SIC) vertex,
    so no subset enumeration is needed.
    """
    hprime = np.atleast_2d(np.asarray(hprime))
    r = np.asarray(r, dtype=float)
    n_u = hprime.shape[1]
    if r.shape != (n_u,):
        raise ValueError(f"rate vector must have length {n_u}")
    g = _gram(hprime, noise_var)

    def oracle(c):
        return _greedy_vertex(g, c) - r

    scale = max(1.0, float(np.abs(r).max()), sum_capacity(hprime, noise_var))
    pts = oracle(-r)[None, :]
    lam = np.ones(1)
    x = pts[0].copy()
    for _ in range(max_iter):
        q = oracle(x)
        if x @ x - x @ q <= tol * scale * scale:
            break
        if np.any(np.all(np.abs(pts - q) <= 1e-14 * scale, axis=1)):
            break
        pts = np.vstack([pts, q])
        lam = np.append(lam, 0.0)
        while True:
            alpha = _affine_min_norm(pts)
            if np.all(alpha > 1e-14):
                lam = alpha
                x = lam @ pts
                break
            neg = alpha <= 1e-14
            denom = lam[neg] - alpha[neg]
            theta = np.min(np.where(denom > 0, lam[neg] / np.where(denom > 0, denom, 1.0), 1.0))
            lam = theta * alpha + (1.0 - theta) * lam
            keep = lam > 1e-14
            pts, lam = pts[keep], lam[keep]
            lam = lam / lam.sum()
            x = lam @ pts
    return x + r


def lift_to_dominant_face(hprime, noise_var: float, r, tol: float = 1e-12, hold=None) -> np.ndarray:
    """Raise an in-region point onto the dominant face without lowering any rate.

    All unsaturated users are raised by a common amount until some subset
    constraint becomes tight; users in a tight subset are then frozen.  The
    result dominates ``r`` componentwise and has sum rate equal to the sum
    capacity.  Users flagged in the boolean mask ``hold`` are not raised, in
    which case the result may stop short of the face.
    """
    r = np.asarray(r, dtype=float).copy()
    n_u = len(r)
    bounds = subset_bounds(hprime, noise_var)
    masks = np.arange(1 << n_u)
    free = (1 << n_u) - 1
    if hold is not None:
        for i in np.flatnonzero(np.asarray(hold, dtype=bool)):
            free &= ~(1 << int(i))
    for _ in range(n_u + 1):
        if free == 0:
            break
        slack = bounds - _subset_sums(r)
        nfree = np.array([bin(m & free).count("1") for m in masks])
        ok = nfree > 0
        t = np.min(slack[ok] / nfree[ok])
        t = max(t, 0.0)
        for i in range(n_u):
            if free >> i & 1:
                r[i] += t
        slack = bounds - _subset_sums(r)
        tight = masks[(slack <= tol * max(1.0, bounds[-1])) & ok]
        for m in tight:
            free &= ~int(m)
    return r
