"""EXIT analysis of the LMMSE detector coupled with IRA decoders.

The detector output of a large IID system is treated as an AWGN channel
with variance ``v_e`` (real BPSK, channel LLR ``2 u / v_e`` with variance
``4 / v_e``).  The decoder side is tracked either with the Gaussian
approximation on the code ensemble (``method="ga"``) or by running the
sum-product decoder on a sampled code (``method="mc"``).  The message fed
back to the detector is the average ``1 - tanh^2(L/2)`` of the decoder's
extrinsic LLRs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize
from scipy.interpolate import PchipInterpolator

from .decoder import DecoderState, app_decode
from .ensemble import CodeEnsemble
from .graph import build_code, encode

_GH_X, _GH_W = np.polynomial.hermite_e.hermegauss(200)
_GH_W = _GH_W / np.sqrt(2.0 * np.pi)
_SIGMA_MAX = 200.0


class ThresholdBracketError(ValueError):
    pass


@dataclass(frozen=True)
class ExitPoint:
    v_in: float
    v_out: float
    i_a: float
    i_e: float


@dataclass
class Trajectory:
    ebn0_db: float
    noise_var: float
    points: list = field(default_factory=list)
    converged: bool = False

    @property
    def variances(self) -> np.ndarray:
        return np.array([p.v_out for p in self.points])


# -- J function -----------------------------------------------------------------


def j_function(sigma):
    """Mutual information between a bit and an LLR ``N(sigma^2/2, sigma^2)``."""
    s = np.asarray(sigma, dtype=float)
    if np.any(s < 0):
        raise ValueError("sigma must be non-negative")
    flat = np.atleast_1d(s).ravel()
    out = np.zeros_like(flat)
    m = flat > 1e-10
    ss = flat[m][:, None]
    llr = 0.5 * ss * ss + ss * _GH_X[None, :]
    out[m] = 1.0 - (np.logaddexp(0.0, -llr) / np.log(2.0)) @ _GH_W
    out = np.clip(out, 0.0, 1.0)
    return out.reshape(s.shape) if s.ndim else float(out[0])


def j_inverse(i):
    """Inverse of :func:`j_function` by bracketed root finding."""
    arr = np.asarray(i, dtype=float)
    if np.any(arr < 0) or np.any(arr >= 1):
        raise ValueError("mutual information must lie in [0, 1)")
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    for n, val in enumerate(flat):
        if val == 0.0:
            out[n] = 0.0
            continue
        hi = 1.0
        while j_function(hi) < val:
            hi *= 2.0
            if hi > 1e4:
                raise ValueError(f"J^-1({val}) exceeds the representable range")
        out[n] = optimize.brentq(lambda x: j_function(x) - val, 0.0, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    return out.reshape(arr.shape) if arr.ndim else float(out[0])


@lru_cache(maxsize=1)
def _j_inverse_table():
    sg = np.concatenate([[0.0], np.geomspace(1e-4, _SIGMA_MAX, 6000)])
    ig = j_function(sg)
    keep = np.concatenate([[True], np.diff(ig) > 1e-15])
    return PchipInterpolator(ig[keep], sg[keep]), float(ig[keep][-1])


def _j_inv_fast(i):
    interp, top = _j_inverse_table()
    return interp(np.clip(i, 0.0, top))


# -- variances -----------------------------------------------------------------


def extrinsic_variance(llr) -> float:
    """Empirical ``E[1 - tanh^2(L/2)]`` of an LLR block."""
    llr = np.asarray(llr, dtype=float)
    if llr.size == 0:
        raise ValueError("empty LLR block")
    th = np.tanh(0.5 * llr)
    return float(np.clip(np.mean(1.0 - th * th), 0.0, 1.0))


def gaussian_llr_variance(sigma):
    """``E[1 - tanh^2(L/2)]`` for consistent ``L ~ N(sigma^2/2, sigma^2)``, by quadrature."""
    s = np.atleast_1d(np.asarray(sigma, dtype=float))
    llr = 0.5 * s[:, None] ** 2 + s[:, None] * _GH_X[None, :]
    v = (1.0 - np.tanh(0.5 * llr) ** 2) @ _GH_W
    return v if np.ndim(sigma) else float(v[0])


class VarianceMap:
    """Monte Carlo map ``sigma -> E[1 - tanh^2(L/2)]`` for consistent Gaussian LLRs.

    One set of ``n_samples`` normal draws is reused for every ``sigma``
    (common random numbers), and the result is tabulated and interpolated
    in ``log sigma``.
    """

    def __init__(self, n_samples: int = 200_000, seed=0, grid_size: int = 600):
        z = np.random.default_rng(seed).standard_normal(int(n_samples))
        self.sigma = np.geomspace(1e-3, _SIGMA_MAX, grid_size)
        vals = np.empty(grid_size)
        for n, s in enumerate(self.sigma):
            vals[n] = np.mean(1.0 - np.tanh(0.25 * s * s + 0.5 * s * z) ** 2)
        self.values = np.minimum.accumulate(np.clip(vals, 0.0, 1.0))
        self.n_samples = int(n_samples)
        self.seed = seed

    def __call__(self, sigma):
        s = np.asarray(sigma, dtype=float)
        v = np.interp(np.log(np.maximum(s, 1e-300)), np.log(self.sigma), self.values, left=1.0, right=0.0)
        return v if s.ndim else float(v)


def detector_transfer_large_system(v, snr, n_u: int, n_r: int, return_posterior: bool = False):
    """Large-system LMMSE extrinsic variance for IID Gaussian channels.

    ``snr = v / sigma_n^2``.  With ``a = 1/snr`` and ``b = a + N_r - N_u`` the
    posterior variance is ``v_hat = v (sqrt(b^2 + 4 N_u a) - b) / (2 N_u)``
    and the extrinsic variance ``v_e = (1/v_hat - 1/v)^-1``.
    """
    v = float(v)
    if not (0.0 < v <= 1.0):
        raise ValueError("v must lie in (0, 1]")
    if snr <= 0:
        raise ValueError("snr must be positive")
    a = 1.0 / snr
    b = a + n_r - n_u
    disc = np.sqrt(b * b + 4.0 * n_u * a)
    # numerically stable form of (disc - b)
    diff = 4.0 * n_u * a / (disc + b) if b > 0 else disc - b
    v_hat = v * diff / (2.0 * n_u)
    v_e = 1.0 / (1.0 / v_hat - 1.0 / v)
    return (v_e, v_hat) if return_posterior else v_e


def ebn0_to_noise_var(ebn0_db, r_u: float, p_u: float = 1.0):
    if r_u <= 0 or p_u <= 0:
        raise ValueError("r_u and p_u must be positive")
    return p_u / (2.0 * r_u * 10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0))


def noise_var_to_ebn0(noise_var, r_u: float, p_u: float = 1.0):
    if r_u <= 0 or p_u <= 0:
        raise ValueError("r_u and p_u must be positive")
    return 10.0 * np.log10(p_u / (2.0 * r_u * np.asarray(noise_var, dtype=float)))


# -- Gaussian-approximation trajectory ----------------------------------------------


def _ga_decoder_step(ens: CodeEnsemble, state, ch_var_llr: float, inner: int):
    """One or more GA flooding iterations on the ensemble.

    ``state`` holds the check-to-information and check-to-parity mutual
    informations.  Returns the new state and the average mutual
    information of the decoder's extrinsic output over transmitted bits.
    """
    d = ens.degrees.astype(float)
    lam = ens.edge_fractions
    node = ens.node_fractions
    q, al = ens.q, ens.alpha
    i_ci, i_cp = state
    for _ in range(inner):
        i_vi = float(np.sum(lam * _jf((d - 1.0) * _j_inv_fast(i_ci) ** 2 + q * ch_var_llr)))
        i_vp = float(_jf(_j_inv_fast(i_cp) ** 2 + ch_var_llr))
        a_i = _j_inv_fast(1.0 - i_vi) ** 2
        a_p = _j_inv_fast(1.0 - i_vp) ** 2
        i_ci = 1.0 - float(_jf((al - 1.0) * a_i + 2.0 * a_p))
        i_cp = 1.0 - float(_jf(al * a_i + a_p))
    m_over_k = ens.mean_degree / al
    w_info = q / (q + m_over_k)
    var_info = d * _j_inv_fast(i_ci) ** 2 + (q - 1.0) * ch_var_llr
    var_par = 2.0 * _j_inv_fast(i_cp) ** 2
    i_e = w_info * float(np.sum(node * _jf(var_info))) + (1.0 - w_info) * float(_jf(var_par))
    return (i_ci, i_cp), i_e


def _jf(var):
    return j_function(np.sqrt(np.maximum(var, 0.0)))


@lru_cache(maxsize=4)
def _default_vmap(n_samples: int, seed: int):
    return VarianceMap(n_samples=n_samples, seed=seed)


def ga_trajectory(ens: CodeEnsemble, n_u: int, n_r: int, noise_var: float, max_steps: int = 1000,
                  v_stop: float = 1e-4, inner: int = 1, vmap="mc", mc_samples: int = 200_000,
                  seed: int = 0, r_u: float | None = None) -> Trajectory:
    """Detector/decoder variance recursion on the ensemble (Gaussian approximation).

    ``vmap`` converts decoder mutual information to the variance fed back
    to the detector: ``"mc"`` (Monte Carlo table), ``"quad"`` (quadrature) or
    any callable ``sigma -> v``.
    """
    if vmap == "mc":
        vm = _default_vmap(int(mc_samples), int(seed))
    elif vmap == "quad":
        vm = gaussian_llr_variance
    else:
        vm = vmap
    r_u = ens.rate_u if r_u is None else r_u
    traj = Trajectory(ebn0_db=float(noise_var_to_ebn0(noise_var, r_u)), noise_var=noise_var)
    v = 1.0
    state = (0.0, 0.0)
    for _ in range(max_steps):
        v_e = detector_transfer_large_system(v, v / noise_var, n_u, n_r)
        ch = 4.0 / v_e
        state, i_e = _ga_decoder_step(ens, state, ch, inner)
        v_new = float(vm(float(_j_inv_fast(i_e)))) if i_e < 1.0 else 0.0
        traj.points.append(ExitPoint(v_in=v, v_out=v_new, i_a=float(j_function(np.sqrt(ch))), i_e=i_e))
        v = max(v_new, 1e-300)
        if v <= v_stop:
            traj.converged = True
            break
    return traj


# -- Monte Carlo with the actual decoder ------------------------------------------------


def _mutual_info_from_llr(llr, bits) -> float:
    s = 1.0 - 2.0 * np.asarray(bits, dtype=float)
    return float(1.0 - np.mean(np.logaddexp(0.0, -s * llr)) / np.log(2.0))


def decoder_exit_trace(ens: CodeEnsemble, v_grid, seed=0, n_bits: int = 200_000, max_iter: int = 50):
    """Open-loop decoder transfer: AWGN of variance ``v_in`` in, extrinsic variance out."""
    rng = np.random.default_rng(seed)
    graph = build_code(ens, seed=rng.integers(2**63), n=n_bits)
    info = rng.integers(0, 2, graph.k)
    x = 1.0 - 2.0 * encode(graph, info)
    z = rng.standard_normal(graph.n_bits)
    out = []
    for v_in in np.atleast_1d(v_grid):
        v_in = float(v_in)
        if v_in <= 0.0:
            llr = 30.0 * x
            i_a = 1.0
        else:
            llr = 2.0 * (x + np.sqrt(v_in) * z) / v_in
            i_a = float(j_function(np.sqrt(4.0 / v_in)))
        res = app_decode(graph, llr, max_iter=max_iter)
        bits = (x < 0).astype(np.uint8)
        out.append(ExitPoint(v_in=v_in, v_out=extrinsic_variance(res.extrinsic), i_a=i_a,
                             i_e=_mutual_info_from_llr(res.extrinsic, bits)))
    return out


def mc_trajectory(ens: CodeEnsemble, n_u: int, n_r: int, noise_var: float, seed=0, n_bits: int = 200_000,
                  max_steps: int = 1000, v_stop: float = 1e-4, inner: int = 1,
                  r_u: float | None = None, graph=None) -> Trajectory:
    """Closed-loop variance recursion with the sum-product decoder in the loop.

    The detector is the large-system transfer; its output is modelled as
    ``u = x + sqrt(v_e) z`` with one fixed noise draw ``z``.
    """
    rng = np.random.default_rng(seed)
    if graph is None:
        graph = build_code(ens, seed=rng.integers(2**63), n=n_bits)
    else:
        rng.integers(2**63)
    info = rng.integers(0, 2, graph.k)
    cw = encode(graph, info)
    x = 1.0 - 2.0 * cw
    z = rng.standard_normal(graph.n_bits)
    r_u = ens.rate_u if r_u is None else r_u
    traj = Trajectory(ebn0_db=float(noise_var_to_ebn0(noise_var, r_u)), noise_var=noise_var)
    state = DecoderState.fresh(graph)
    v = 1.0
    for _ in range(max_steps):
        v_e = detector_transfer_large_system(v, v / noise_var, n_u, n_r)
        llr = 2.0 * (x + np.sqrt(v_e) * z) / v_e
        res = app_decode(graph, llr, max_iter=inner, state=state)
        v_new = 0.0 if res.converged else extrinsic_variance(res.extrinsic)
        traj.points.append(ExitPoint(v_in=v, v_out=v_new, i_a=float(j_function(np.sqrt(4.0 / v_e))),
                                     i_e=_mutual_info_from_llr(res.extrinsic, cw)))
        v = max(v_new, 1e-300)
        if v <= v_stop or res.converged:
            traj.converged = True
            break
    return traj


def exit_trajectory(ens, n_u, n_r, ebn0_db, method="ga", r_u=None, **kw) -> Trajectory:
    r_u = ens.rate_u if r_u is None else r_u
    s2 = float(ebn0_to_noise_var(ebn0_db, r_u))
    if method == "ga":
        t = ga_trajectory(ens, n_u, n_r, s2, r_u=r_u, **kw)
    elif method == "mc":
        t = mc_trajectory(ens, n_u, n_r, s2, r_u=r_u, **kw)
    else:
        raise ValueError("method must be 'ga' or 'mc'")
    t.ebn0_db = float(ebn0_db)
    return t


def find_threshold(ens: CodeEnsemble, n_u: int, n_r: int, r_u: float | None = None, tol_db: float = 0.01,
                   bracket=(-20.0, 5.0), method: str = "ga", **kw) -> float:
    """Smallest Eb/N0 (dB) whose EXIT trajectory reaches ``v <= 1e-4``.

    Bisection over Eb/N0; ``kw`` is forwarded to the trajectory routine.
    """
    if tol_db <= 0:
        raise ValueError("tol_db must be positive")
    if method == "mc":
        # one sampled code for every bisection step keeps the search monotone
        kw.setdefault("graph", build_code(ens, seed=np.random.default_rng(kw.get("seed", 0)).integers(2**63),
                                          n=kw.get("n_bits", 200_000)))
    lo, hi = map(float, bracket)

    def is_open(db):
        return exit_trajectory(ens, n_u, n_r, db, method=method, r_u=r_u, **kw).converged

    if not is_open(hi):
        raise ThresholdBracketError(f"tunnel closed at upper bracket {hi} dB")
    if is_open(lo):
        raise ThresholdBracketError(f"tunnel already open at lower bracket {lo} dB")
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if is_open(mid):
            hi = mid
        else:
            lo = mid
    return hi
