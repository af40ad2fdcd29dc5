"""Extrinsic LMMSE multi-user detector and its SINR-variance transfer function.

Symbol blocks are arrays of shape ``(N_u, N)`` (users by time slots);
received blocks are ``(N_r, N)``.  Everything here works for both complex
and real-valued models; only the meaning of ``noise_var`` changes (total
complex variance vs. per-real-dimension variance).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy import stats

VAR_FLOOR = 1e-12


class NoExtrinsicInformation(ArithmeticError):
    """The detector added no information for some user (``vpost == vbar``)."""


@dataclass(frozen=True)
class PriorState:
    """A-priori means ``xbar`` (N_u x N) and per-user variances ``vbar``."""

    xbar: np.ndarray
    vbar: np.ndarray

    def __post_init__(self):
        vbar = np.atleast_1d(np.asarray(self.vbar, dtype=float))
        xbar = np.asarray(self.xbar)
        if xbar.ndim == 1:
            xbar = xbar[:, None]
        if xbar.shape[0] != vbar.shape[0]:
            raise ValueError("xbar rows must match the number of variances")
        if np.any(vbar <= 0) or np.any(vbar > 1 + 1e-12) or not np.all(np.isfinite(vbar)):
            raise ValueError("prior variances must lie in (0, 1]")
        object.__setattr__(self, "xbar", xbar)
        object.__setattr__(self, "vbar", vbar)

    @classmethod
    def uninformed(cls, n_u: int, n: int, dtype=float) -> "PriorState":
        """First-iteration priors: zero means and unit variances."""
        return cls(np.zeros((n_u, n), dtype=dtype), np.ones(n_u))


@dataclass(frozen=True)
class PosteriorState:
    """Posterior means and variances.

    ``shift = xhat - xbar`` and ``drop = vbar - vpost`` are optional; when
    the detector supplies them (computed from the residual, not by
    subtraction) the extrinsic step keeps full relative accuracy for users
    that gain very little from the observation.
    """

    xhat: np.ndarray
    vpost: np.ndarray
    shift: np.ndarray | None = None
    drop: np.ndarray | None = None


@dataclass(frozen=True)
class ExtrinsicState:
    """Extrinsic means ``u`` and SINRs ``rho`` (``u = x + n*``, ``Var n* = 1/rho``)."""

    u: np.ndarray
    rho: np.ndarray


def clamp_variances(v) -> np.ndarray:
    return np.clip(np.asarray(v, dtype=float), VAR_FLOOR, 1.0)


def _route(n_r, n_u, route):
    if route == "auto":
        return "nr" if n_r < n_u else "nu"
    if route not in ("nu", "nr"):
        raise ValueError("route must be 'auto', 'nu' or 'nr'")
    return route


def _variance_drop(hprime, noise_var, v, route):
    """``v - vpost`` computed directly (no subtraction of nearly equal terms)."""
    n_r, n_u = hprime.shape
    if _route(n_r, n_u, route) == "nu":
        gram = (hprime.conj().T @ hprime) / noise_var
        cho = sla.cho_factor(gram + np.diag(1.0 / v), lower=True)
        drop = np.real(np.diag(sla.cho_solve(cho, gram))) * v
    else:
        # matrix inversion lemma: V H^H (s2 I + H V H^H)^-1 H V
        hv = hprime * v[None, :]
        cho = sla.cho_factor(noise_var * np.eye(n_r) + hv @ hprime.conj().T, lower=True)
        drop = np.real(np.sum(hv.conj() * sla.cho_solve(cho, hv), axis=0))
    return np.clip(drop, 0.0, v)


def posterior_variances(hprime, noise_var: float, vbar, route: str = "auto") -> np.ndarray:
    """Diagonal of ``(sigma^-2 H'^H H' + V^-1)^-1`` without any symbol data."""
    hprime = np.atleast_2d(np.asarray(hprime))
    v = clamp_variances(vbar)
    return v - _variance_drop(hprime, noise_var, v, route)


def lmmse_posterior(hprime, noise_var: float, prior: PriorState, y, route: str = "auto") -> PosteriorState:
    """A-posteriori LMMSE estimate given Gaussian priors and observations ``y``.

    ``route='nu'`` inverts the ``N_u x N_u`` information matrix; ``'nr'``
    goes through the ``N_r x N_r`` covariance of ``y`` (cheaper when
    ``N_r < N_u``).  ``'auto'`` picks the smaller one.
    """
    hprime = np.atleast_2d(np.asarray(hprime))
    y = np.asarray(y)
    if y.ndim == 1:
        y = y[:, None]
    n_r, n_u = hprime.shape
    if y.shape[0] != n_r:
        raise ValueError(f"y has {y.shape[0]} rows, expected {n_r}")
    v = clamp_variances(prior.vbar)
    xbar = prior.xbar
    resid = y - hprime @ xbar
    if _route(n_r, n_u, route) == "nu":
        gram = (hprime.conj().T @ hprime) / noise_var
        cho = sla.cho_factor(gram + np.diag(1.0 / v), lower=True)
        shift = sla.cho_solve(cho, (hprime.conj().T @ resid) / noise_var)
        # v - vpost = diag(A^-1 G) v, free of cancellation
        drop = np.real(np.diag(sla.cho_solve(cho, gram))) * v
    else:
        hv = hprime * v[None, :]
        sig = noise_var * np.eye(n_r) + hv @ hprime.conj().T
        cho = sla.cho_factor(sig, lower=True)
        shift = hv.conj().T @ sla.cho_solve(cho, resid)
        drop = np.real(np.sum(hv.conj() * sla.cho_solve(cho, hv), axis=0))
    drop = np.clip(drop, 0.0, v)
    return PosteriorState(xhat=xbar + shift, vpost=v - drop, shift=shift, drop=drop)


def lmmse_extrinsic(posterior: PosteriorState, prior: PriorState, strict: bool = True) -> ExtrinsicState:
    """Remove the prior from the posterior by Gaussian message division.

    ``phi_i = 1/vpost_i - 1/vbar_i`` and
    ``u_i = (xhat_i/vpost_i - xbar_i/vbar_i) / phi_i``.

    With ``strict=False`` users without extrinsic information get
    ``rho = 0`` and ``u = 0`` instead of raising.
    """
    v = clamp_variances(prior.vbar)
    vpost = np.asarray(posterior.vpost, dtype=float)
    if posterior.drop is not None:
        drop = np.asarray(posterior.drop, dtype=float)
        shift = posterior.shift
    else:
        drop = v - vpost
        shift = posterior.xhat - prior.xbar
    dead = ~(drop > 0) | ~(vpost > 0)
    if np.any(dead) and strict:
        raise NoExtrinsicInformation(f"no extrinsic information for users {np.flatnonzero(dead).tolist()}")
    safe_drop = np.where(dead, 1.0, drop)
    safe_post = np.where(dead, 1.0, vpost)
    # phi = 1/vpost - 1/v and u = (xhat/vpost - xbar/v)/phi, rearranged around the drop
    phi = np.where(dead, 0.0, safe_drop / (v * safe_post))
    u = prior.xbar + shift * (v / safe_drop)[:, None]
    if np.any(dead):
        u = np.where(dead[:, None], 0.0, u)
    return ExtrinsicState(u=u, rho=phi)


def combine_messages(ext: ExtrinsicState, prior: PriorState) -> PosteriorState:
    """Gaussian product of the extrinsic message ``(u, 1/rho)`` and the prior."""
    v = clamp_variances(prior.vbar)
    prec = ext.rho + 1.0 / v
    xhat = (ext.u * ext.rho[:, None] + prior.xbar / v[:, None]) / prec[:, None]
    return PosteriorState(xhat=xhat, vpost=1.0 / prec)


def phi_transfer(hprime, noise_var: float, vbar, route: str = "auto", return_flags: bool = False):
    """Extrinsic SINRs ``phi_i(vbar)`` for all users (variances only).

    Users whose column is identically zero get ``phi = 0``; with
    ``return_flags=True`` a boolean mask of those users is returned too.
    """
    hprime = np.atleast_2d(np.asarray(hprime))
    v = clamp_variances(vbar)
    zero_col = ~np.any(hprime != 0, axis=0)
    drop = _variance_drop(hprime, noise_var, v, route)
    phi = np.where(zero_col, 0.0, drop / (v * (v - drop)))
    if return_flags:
        return phi, zero_col
    return phi


def symmetric_phi(h, w: float, noise_var: float, v: float) -> float:
    """Common extrinsic SINR of a symmetric system with shared variance ``v``.

    Uses the normalised trace of the posterior covariance, which equals
    every user's posterior variance when all users are statistically alike.
    """
    h = np.atleast_2d(np.asarray(h))
    n_u = h.shape[1]
    a = (w * w / noise_var) * (h.conj().T @ h) + np.eye(n_u) / v
    vhat = np.real(np.trace(np.linalg.inv(a))) / n_u
    return float(1.0 / vhat - 1.0 / v)


def miso_ese(hprime, noise_var: float, prior: PriorState, y) -> ExtrinsicState:
    """Single-antenna receiver: the elementary signal estimator of IDMA.

    ``u_t = diag(A)^-1 (h'^H y_t - offdiag(A) xbar_t)`` with ``A = h'^H h'`` and
    ``1/rho_i = (sum_{k != i} |h_k|^2 v_k + sigma^2) / |h_i|^2``.
    """
    hprime = np.atleast_2d(np.asarray(hprime))
    if hprime.shape[0] != 1:
        raise ValueError("MISO ESE requires a single receive antenna")
    h = hprime[0]
    y = np.atleast_2d(np.asarray(y))
    v = clamp_variances(prior.vbar)
    a = np.outer(h.conj(), h)
    diag = np.real(np.diag(a))
    omega = a - np.diag(np.diag(a))
    u = ((h.conj()[:, None] * y) - omega @ prior.xbar) / diag[:, None]
    total = np.sum(diag * v) + noise_var
    rho = diag / (total - diag * v)
    return ExtrinsicState(u=u, rho=rho)


def simo_mrc(hprime, noise_var: float, y):
    """Single-user receiver: maximal ratio combining.

    Returns ``(u, v)`` with ``u_t = h'^H y_t / ||h'||^2`` and
    ``v = sigma^2 / ||h'||^2`` (the extrinsic variance).
    """
    h = np.asarray(hprime)
    if h.ndim == 2:
        if h.shape[1] != 1:
            raise ValueError("SIMO MRC requires a single user")
        h = h[:, 0]
    energy = float(np.real(np.vdot(h, h)))
    if energy == 0.0:
        raise ValueError("zero channel vector")
    y = np.asarray(y)
    if y.ndim == 1:
        y = y[:, None]
    u = (h.conj() @ y) / energy
    return u, noise_var / energy


@dataclass(frozen=True)
class ProbeResult:
    """Empirical statistics of the extrinsic residual ``u_i - x_i``."""

    phi: np.ndarray
    residual_var: np.ndarray
    predicted_var: np.ndarray
    excess_kurtosis: np.ndarray
    correlation: np.ndarray

    @property
    def relative_error(self) -> np.ndarray:
        return np.abs(self.residual_var / self.predicted_var - 1.0)


def _qpsk(rng, shape):
    return (rng.choice([-1.0, 1.0], size=shape) + 1j * rng.choice([-1.0, 1.0], size=shape)) / np.sqrt(2.0)


def gaussianity_probe(hprime, noise_var: float, vbar, n_samples: int, seed=None,
                      prior: str = "gaussian") -> ProbeResult:
    """Monte Carlo check that the detector output looks like an AWGN observation.

    Symbols are QPSK.  With ``prior='gaussian'`` the a-priori means are
    ``xbar = x + sqrt(v) e`` with ``e ~ CN(0, 1)`` so that ``x - xbar`` is
    Gaussian with variance ``v``; ``prior='discrete'`` instead uses the
    soft-symbol mean of a QPSK symbol observed through a BPSK-like AWGN
    prior channel of matching variance (mismatched to the Gaussian model).
    Excess kurtosis is the complex one, ``E|z|^4 / (E|z|^2)^2 - 2``.
    """
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 1e4")
    hprime = np.atleast_2d(np.asarray(hprime))
    n_r, n_u = hprime.shape
    v = clamp_variances(np.broadcast_to(np.asarray(vbar, dtype=float), (n_u,)))
    rng = np.random.default_rng(seed)
    x = _qpsk(rng, (n_u, n_samples))
    if prior == "gaussian":
        e = (rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)) / np.sqrt(2.0)
        xbar = x + np.sqrt(v)[:, None] * e
    elif prior == "discrete":
        xbar = np.empty_like(x)
        for i in range(n_u):
            xbar[i] = _discrete_soft_mean(rng, x[i], v[i])
        v = clamp_variances(np.mean(np.abs(x - xbar) ** 2, axis=1))
    else:
        raise ValueError("prior must be 'gaussian' or 'discrete'")
    y = hprime @ x + np.sqrt(noise_var / 2.0) * (
        rng.standard_normal((n_r, n_samples)) + 1j * rng.standard_normal((n_r, n_samples)))
    pri = PriorState(xbar, v)
    post = lmmse_posterior(hprime, noise_var, pri, y)
    ext = lmmse_extrinsic(post, pri)
    z = ext.u - x
    m2 = np.mean(np.abs(z) ** 2, axis=1)
    m4 = np.mean(np.abs(z) ** 4, axis=1)
    corr = np.abs(np.mean(z * x.conj(), axis=1)) / np.sqrt(m2 * np.mean(np.abs(x) ** 2, axis=1))
    return ProbeResult(phi=ext.rho, residual_var=m2, predicted_var=1.0 / ext.rho,
                       excess_kurtosis=m4 / m2 ** 2 - 2.0, correlation=corr)


def _soft_qpsk_mmse(snr: float) -> float:
    z = stats.norm.ppf((np.arange(4000) + 0.5) / 4000)
    return float(np.mean(1.0 - np.tanh(snr + np.sqrt(snr) * z) ** 2))


def _discrete_soft_mean(rng, x, v):
    """Posterior mean of QPSK symbols seen through an AWGN prior channel.

    The per-dimension SNR is chosen so that the expected MSE equals ``v``.
    """
    from scipy.optimize import brentq

    if v >= 1.0 - 1e-9:
        return np.zeros_like(x)
    snr = brentq(lambda s: _soft_qpsk_mmse(s) - v, 1e-9, 1e3)
    a = 1.0 / np.sqrt(2.0)
    noise = a / np.sqrt(snr)
    obs_re = x.real + noise * rng.standard_normal(x.shape)
    obs_im = x.imag + noise * rng.standard_normal(x.shape)
    return a * (np.tanh(snr * obs_re / a) + 1j * np.tanh(snr * obs_im / a))
