"""Coordinate search for the transfer-constraint parameters ``gamma``.

Given a target rate vector, find ``gamma`` such that the iterative LMMSE
rates ``R_i(gamma)`` hit the target.  Each coordinate is solved by bisection
on ``log gamma_i`` (``R_i`` is increasing in ``gamma_i`` and decreasing in
the others), with a damping step whenever a coordinate update would make the
overall L1 error worse.

Targets are first moved onto the dominant face: points outside the region
are projected, points strictly inside are lifted.  If the loop stalls, the
users still short of their target are backed off by ``delta`` and the freed
rate is handed to the others.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import capacity
from .rates import user_rate_closed_form

log = logging.getLogger(__name__)


class NoCrossingError(ValueError):
    """The target rate is not attained for any ``gamma_i`` inside the bounds."""

    def __init__(self, i, target, bounds, bracket_rates):
        self.i, self.target, self.bounds, self.bracket_rates = i, target, bounds, bracket_rates
        super().__init__(
            f"user {i}: target {target:.6g} outside [{bracket_rates[0]:.6g}, {bracket_rates[1]:.6g}] "
            f"attained at gamma_i in [{bounds[0]:.3g}, {bounds[1]:.3g}]")


class SearchDidNotConverge(RuntimeError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


@dataclass(frozen=True)
class SearchConfig:
    eps: float = 1e-2
    delta: float = 1e-3
    n_max: int = 200
    gamma_bounds: tuple = (1e-9, 1e9)
    max_backoffs: int = 50
    bisect_iter: int = 50
    max_halvings: int = 30
    random_start: int | None = None

    def __post_init__(self):
        if not (self.eps > 0 and self.delta > 0):
            raise ValueError("eps and delta must be positive")
        lo, hi = self.gamma_bounds
        if not (0 < lo < hi):
            raise ValueError("gamma_bounds must satisfy 0 < lo < hi")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")


@dataclass
class SearchResult:
    gamma: np.ndarray
    achieved: np.ndarray
    iterations: int
    converged: bool
    adjusted_target: np.ndarray
    backoffs: int = 0
    trace: list = field(default_factory=list)

    @property
    def error(self) -> float:
        return float(np.abs(self.achieved - self.adjusted_target).sum())


def solve_gamma_i(hprime, noise_var: float, gamma, i: int, target_ri: float,
                  bounds=(1e-9, 1e9), tol: float | None = None, max_iter: int = 50) -> float:
    """Return ``gamma_i`` such that ``R_i`` equals ``target_ri`` with the other entries held.

    ``gamma`` is the full current vector; entry ``i`` is the starting value.
    The default tolerance is ``1e-3 / N_u``.
    """
    g = np.array(gamma, dtype=float)
    n_u = g.size
    tol = 1e-3 / n_u if tol is None else tol

    def rate(log_gi):
        g[i] = np.exp(log_gi)
        return user_rate_closed_form(hprime, noise_var, g, i)

    current = float(gamma[i])
    if abs(rate(np.log(current)) - target_ri) <= tol:
        return current
    lo, hi = np.log(bounds[0]), np.log(bounds[1])
    r_lo, r_hi = rate(lo), rate(hi)
    if not (r_lo - tol <= target_ri <= r_hi + tol):
        raise NoCrossingError(i, target_ri, bounds, (r_lo, r_hi))
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r = rate(mid)
        if abs(r - target_ri) <= tol:
            break
        if r < target_ri:
            lo = mid
        else:
            hi = mid
    return float(np.exp(mid))


def prepare_target(hprime, noise_var: float, target) -> np.ndarray:
    """Move ``target`` onto the dominant face (projection or lift)."""
    target = np.asarray(target, dtype=float)
    if not capacity.in_region(hprime, noise_var, target):
        return capacity.project_to_dominant_face(hprime, noise_var, target)
    if not capacity.on_dominant_face(hprime, noise_var, target, tol=1e-9):
        return capacity.lift_to_dominant_face(hprime, noise_var, target)
    return target


def _back_off(hprime, noise_var, target, achieved, delta):
    short = achieved < target
    if not short.any():
        short = np.abs(achieved - target) == np.abs(achieved - target).max()
    lowered = np.where(short, np.maximum(target - delta, 0.0), target)
    out = capacity.lift_to_dominant_face(hprime, noise_var, lowered, hold=short)
    if not capacity.on_dominant_face(hprime, noise_var, out, tol=1e-9):
        out = capacity.lift_to_dominant_face(hprime, noise_var, lowered)
    return out


def find_gamma(hprime, noise_var: float, target, cfg: SearchConfig = SearchConfig()) -> SearchResult:
    """Search ``gamma`` so that the achieved rates match ``target`` within ``cfg.eps`` (L1)."""
    hprime = np.atleast_2d(np.asarray(hprime))
    n_u = hprime.shape[1]
    target = np.asarray(target, dtype=float)
    if target.shape != (n_u,):
        raise ValueError(f"target must have {n_u} entries")
    goal = prepare_target(hprime, noise_var, target)
    lo_b, hi_b = cfg.gamma_bounds
    if cfg.random_start is None:
        g = np.ones(n_u)
    else:
        g = np.exp(np.random.default_rng(cfg.random_start).uniform(-1.0, 1.0, n_u))
        g /= g[0]
    tol = cfg.eps / (10.0 * n_u)

    def l1(gv):
        return float(np.abs(user_rate_closed_form(hprime, noise_var, gv) - goal).sum())

    trace = []
    err = l1(g)
    total_iter = 0
    backoffs = 0
    while True:
        it = 0
        while err > cfg.eps and it < cfg.n_max:
            for i in range(n_u):
                try:
                    gi = solve_gamma_i(hprime, noise_var, g, i, goal[i], cfg.gamma_bounds, tol, cfg.bisect_iter)
                except NoCrossingError as exc:
                    gi = lo_b if goal[i] < exc.bracket_rates[0] else hi_b
                cand = g.copy()
                cand[i] = gi
                cerr = l1(cand)
                halvings = 0
                while cerr > err and halvings < cfg.max_halvings:
                    cand[i] = 0.5 * (g[i] + cand[i])
                    cerr = l1(cand)
                    halvings += 1
                if cerr <= err:
                    g, err = cand, cerr
            g = np.clip(g / g[0], lo_b, hi_b)
            err = l1(g)
            it += 1
            total_iter += 1
            trace.append((total_iter, err, g.copy()))
        if err <= cfg.eps:
            achieved = user_rate_closed_form(hprime, noise_var, g)
            return SearchResult(g, achieved, total_iter, True, goal, backoffs, trace)
        if backoffs >= cfg.max_backoffs:
            raise SearchDidNotConverge(
                f"L1 error {err:.3g} > eps={cfg.eps} after {total_iter} sweeps and {backoffs} back-offs",
                trace)
        achieved = user_rate_closed_form(hprime, noise_var, g)
        goal = _back_off(hprime, noise_var, goal, achieved, cfg.delta)
        backoffs += 1
        log.info("back-off %d: new target %s", backoffs, goal)
        err = l1(g)
