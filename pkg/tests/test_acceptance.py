"""Acceptance suite.

Each test prints one line ``[n] PASS|FAIL <detail>`` and asserts the same
condition, so ``pytest -s tests/test_acceptance.py`` doubles as a report.
The long Monte Carlo items (threshold reproduction and coded BER) are
marked ``slow`` but are part of the default run.
"""
import itertools
import time

import numpy as np
import pytest
from scipy import stats

from mimo_noma import capacity as cap
from mimo_noma import detector as det
from mimo_noma import gamma_search as gs
from mimo_noma import rates
from mimo_noma.coding import exit as ex
from mimo_noma.coding.ensemble import BUILTIN_PROFILES
from mimo_noma.model import EXAMPLE_2X2_CHANNEL, EXAMPLE_2X3_CHANNEL, EXAMPLE_3X3_CHANNEL, sample_iid_gaussian_channel
from mimo_noma.sim import SimConfig, ber_sweep


def report(n, ok, detail):
    print(f"\n[{n}] {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


def test_01_rates_sum_to_capacity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    shapes = [(2, 2), (3, 2), (4, 8), (8, 8), (16, 8)]
    worst_sum = worst_num = 0.0
    for k in range(100):
        n_u, n_r = shapes[k % len(shapes)]
        h = sample_iid_gaussian_channel(n_r, n_u, seed=rng.integers(1 << 62))
        s2 = float(10 ** rng.uniform(-1, 1))
        g = 10 ** rng.uniform(-2, 2, n_u)
        closed = rates.user_rate_closed_form(h, s2, g)
        worst_sum = max(worst_sum, abs(closed.sum() - cap.sum_capacity(h, s2)))
        worst_num = max(worst_num, np.abs(rates.user_rate_numeric(h, s2, g) - closed).max())
    dt = time.perf_counter() - t0
    report(1, worst_sum <= 1e-9 and worst_num <= 1e-5 and dt <= 60,
           f"max |sum R - C| = {worst_sum:.2e} (<= 1e-9), max |numeric - closed| = {worst_num:.2e} (<= 1e-5), "
           f"{dt:.1f} s")


def test_02_gamma_ratio_limit_hits_corner_points():
    rng = np.random.default_rng(202)
    worst = 0.0
    count = 0
    for n_u in (2, 3, 4):
        for n_r in (1, 2, 4):
            h = sample_iid_gaussian_channel(n_r, n_u, seed=rng.integers(1 << 62))
            for order in itertools.permutations(range(n_u)):
                got = rates.extreme_point_limit(h, 1.0, order, ratio=1e6)
                ref = cap.maximal_extreme_point(h, 1.0, order).rates
                worst = max(worst, np.abs(got - ref).max())
                count += 1
    report(2, worst <= 1e-3, f"{count} orders, max deviation {worst:.2e} bits (<= 1e-3)")


def test_03_two_user_region_sweep():
    s2 = 0.5
    h = EXAMPLE_2X2_CHANNEL
    c = cap.sum_capacity(h, s2)
    grid = np.logspace(-7, 7, 200)
    sweep = np.array([rates.user_rate_closed_form(h, s2, [1.0, g2]) for g2 in grid])
    closed = np.array([rates.two_user_rates_closed(h, s2, g2) for g2 in grid])
    sum_err = np.abs(sweep.sum(axis=1) - c).max()
    inside = all(cap.in_region(h, s2, r, tol=1e-9) for r in sweep)
    # small gamma_2: user 1 decoded last; large gamma_2: user 2 decoded last
    e_lo = cap.maximal_extreme_point(h, s2, (1, 0)).rates
    e_hi = cap.maximal_extreme_point(h, s2, (0, 1)).rates
    end_err = max(np.abs(sweep[0] - e_lo).max(), np.abs(sweep[-1] - e_hi).max())
    cf_err = np.abs(closed - sweep).max()
    report(3, sum_err <= 1e-6 and inside and end_err <= 1e-3 and cf_err <= 1e-8,
           f"sum err {sum_err:.1e}, in_region {inside}, endpoint err {end_err:.1e}, "
           f"two-user closed form err {cf_err:.1e}")


def test_04_rates_monotone_in_gamma():
    rng = np.random.default_rng(404)
    grid = np.logspace(-3, 3, 30)
    violations = 0
    worst = 0.0
    for _ in range(20):
        h = sample_iid_gaussian_channel(int(rng.integers(1, 5)), 3, seed=rng.integers(1 << 62))
        base = 10 ** rng.uniform(-1, 1, 3)
        for k in range(3):
            curve = []
            for val in grid:
                g = base.copy()
                g[k] = val
                curve.append(rates.user_rate_closed_form(h, 1.0, g))
            d = np.diff(np.array(curve), axis=0)
            own = -d[:, k]  # should be <= 0
            others = np.delete(d, k, axis=1)  # should be <= 0
            bad = np.concatenate([own, others.ravel()])
            violations += int(np.sum(bad > 1e-10))
            worst = max(worst, float(bad.max()))
    report(4, violations == 0, f"{violations} violations over 20 channels x 3 users x 30 points "
                               f"(largest wrong-way step {max(worst, 0.0):.1e})")


def test_05_gamma_search_success_rate():
    rng = np.random.default_rng(505)
    ok = 0
    details = []
    for _ in range(20):
        h = sample_iid_gaussian_channel(int(rng.integers(2, 5)), 3, seed=rng.integers(1 << 62))
        pts = np.array([e.rates for e in cap.all_extreme_points(h, 1.0)])
        target = rng.dirichlet(np.ones(len(pts))) @ pts
        try:
            res = gs.find_gamma(h, 1.0, target, gs.SearchConfig(eps=1e-2, n_max=50))
            err = float(np.abs(res.achieved - target).sum())
            good = res.converged and err <= 1e-2 and res.iterations <= 50
        except gs.SearchDidNotConverge:
            good, err = False, float("nan")
        ok += good
        details.append(err)
    report(5, ok >= 19, f"{ok}/20 converged (>= 95%), worst L1 error {np.nanmax(details):.1e}")


def test_06_detector_output_is_gaussian():
    h = sample_iid_gaussian_channel(8, 8, seed=606)
    res = det.gaussianity_probe(h, 0.5, 0.3, 100_000, seed=7, prior="gaussian")
    rel = res.relative_error.max()
    kurt = np.abs(res.excess_kurtosis).max()
    report(6, rel <= 0.02 and kurt < 0.1, f"max |Var/(1/phi) - 1| = {rel:.4f} (<= 0.02), max |kurtosis| = "
                                          f"{kurt:.4f} (< 0.1)")


def test_07_special_cases_match_general_detector():
    rng = np.random.default_rng(707)
    worst = 0.0
    for _ in range(50):
        n_u = int(rng.integers(2, 6))
        h = sample_iid_gaussian_channel(1, n_u, seed=rng.integers(1 << 62))
        x = rng.choice([-1.0, 1.0], (n_u, 32))
        prior = det.PriorState(rng.uniform(0, 1, n_u)[:, None] * x, rng.uniform(0.05, 1.0, n_u))
        y = h @ x + 0.3 * rng.standard_normal((1, 32))
        s2 = float(rng.uniform(0.1, 2.0))
        a = det.miso_ese(h, s2, prior, y)
        b = det.lmmse_extrinsic(det.lmmse_posterior(h, s2, prior, y), prior)
        worst = max(worst, np.abs(a.u - b.u).max(), np.abs(1 / a.rho - 1 / b.rho).max())
    for _ in range(50):
        n_r = int(rng.integers(1, 9))
        h = sample_iid_gaussian_channel(n_r, 1, seed=rng.integers(1 << 62))
        y = h @ rng.choice([-1.0, 1.0], (1, 32)) + 0.3 * rng.standard_normal((n_r, 32))
        s2 = float(rng.uniform(0.1, 2.0))
        u, v = det.simo_mrc(h, s2, y)
        pri = det.PriorState.uninformed(1, 32)
        b = det.lmmse_extrinsic(det.lmmse_posterior(h, s2, pri, y), pri)
        worst = max(worst, np.abs(u - b.u[0]).max(), abs(v - 1 / b.rho[0]))
    report(7, worst <= 1e-10, f"max deviation {worst:.1e} over 50 single-antenna-receiver and 50 "
                              f"single-user instances (<= 1e-10)")


def _exit_threshold(p):
    # EXIT-function recursion; feedback variances E[1 - tanh^2(L/2)] by Monte Carlo, 2e5 samples per point
    return ex.find_threshold(p.ensemble, p.n_u, p.n_r, method="ga", vmap="mc", mc_samples=200_000, seed=0,
                             bracket=(p.threshold_db - 2.0, p.threshold_db + 2.0), tol_db=0.01)


@pytest.mark.slow
@pytest.mark.parametrize("beta", [0.5, 3.0])
def test_08_threshold_reproduction(beta):
    p = BUILTIN_PROFILES[beta]
    t0 = time.perf_counter()
    th = _exit_threshold(p)
    dt = time.perf_counter() - t0
    report(8, abs(th - p.threshold_db) <= 0.3 and dt <= 1800,
           f"beta={beta}: EXIT threshold {th:.2f} dB vs {p.threshold_db} dB (+-0.3), {dt:.0f} s")


def _outage_probability(n_r, r_u, s2):
    # real channel, single-user bound: 0.5 log2(1 + |h|^2/s2) < R_u
    return stats.chi2.cdf((2.0 ** (2.0 * r_u) - 1.0) * s2, df=n_r)


@pytest.mark.slow
def test_09_coded_ber_near_threshold():
    p = BUILTIN_PROFILES[1.0]
    t0 = time.perf_counter()
    th = _exit_threshold(p)
    grid = (th + 0.5, th + 1.0, th + 1.5)
    cfg = SimConfig(ensemble=p.ensemble, n_u=p.n_u, n_r=p.n_r, ebn0_db=grid, n=8192, max_outer=300,
                    inner_iter=1, trials=8, max_errors=10**9, seed=9, channel_model="equal_power")
    curve = ber_sweep(cfg)
    ber = curve.ber
    bits = np.array([pt.bits for pt in curve.points])
    errs = np.array([pt.errors for pt in curve.points])
    # monotone within Monte Carlo error: each step may rise by at most 3 binomial sigmas
    sig = np.sqrt(np.maximum(errs, 1)) / bits
    monotone = all(ber[k + 1] <= ber[k] + 3 * (sig[k] + sig[k + 1]) for k in range(len(ber) - 1))
    s2 = float(ex.ebn0_to_noise_var(th + 1.5, cfg.r_u))
    p_out = _outage_probability(p.n_r, cfg.r_u, s2)
    dt = time.perf_counter() - t0
    print(f"\n    info: unnormalised IID fading would put each user in outage with probability {p_out:.3f} "
          f"at {th + 1.5:.2f} dB")
    detail = ", ".join(f"{db:.2f} dB: {b:.2e} ({e}/{n})" for db, b, e, n in zip(grid, ber, errs, bits))
    report(9, ber[-1] <= 1e-3 and monotone and dt <= 7200,
           f"threshold {th:.2f} dB; BER {detail}; monotone {monotone}; {dt:.0f} s")


def test_10_three_user_grids_on_dominant_face():
    s2 = 0.5
    worst_sum = 0.0
    inside = True
    grid = np.logspace(-3, 3, 25)
    for h in (EXAMPLE_2X3_CHANNEL, EXAMPLE_3X3_CHANNEL):
        c = cap.sum_capacity(h, s2)
        for g2, g3 in itertools.product(grid, grid):
            r = rates.user_rate_closed_form(h, s2, [1.0, g2, g3])
            worst_sum = max(worst_sum, abs(r.sum() - c))
            inside &= cap.in_region(h, s2, r, tol=1e-9)
    report(10, worst_sum <= 1e-3 and inside, f"2 channels x 625 grid points: max |sum - C| = {worst_sum:.1e}, "
                                             f"in_region {inside}")
