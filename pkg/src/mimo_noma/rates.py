"""Achievable rates of iterative LMMSE detection under a transfer constraint.

The transfer constraint ``gamma_i (1/v_i - 1) = gamma_j (1/v_j - 1)`` ties
every user's input variance to a single track parameterised by ``v_1``.
Along that track the posterior covariance is

    V(v_1) = (sigma^-2 H'^H H' + I + (1/v_1 - 1) Lambda_gamma^-1)^-1

(with ``gamma_1 = 1``) and user ``i`` achieves

    R_i = int_{v_1=1}^{0} [v_1 - V_ii(v_1)/gamma_i] d(1/v_1) - log gamma_i.

Rates are reported in bits.  ``gamma`` is invariant to common scaling;
functions accept any positive vector and normalise internally.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

LN2 = np.log(2.0)


class TailConvergenceError(ArithmeticError):
    """The analytic tail of the rate integral is not in its asymptotic regime."""


def normalize_gamma(gamma) -> np.ndarray:
    """Validate ``gamma`` and rescale it so that ``gamma[0] == 1``."""
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    if g.ndim != 1 or g.size == 0:
        raise ValueError("gamma must be a non-empty vector")
    if np.any(~np.isfinite(g)) or np.any(g <= 0):
        raise ValueError("gamma entries must be finite and strictly positive")
    return g / g[0]


def _info_matrix(hprime, noise_var):
    hprime = np.atleast_2d(np.asarray(hprime))
    return np.eye(hprime.shape[1]) + (hprime.conj().T @ hprime) / noise_var


def _check_gamma(hprime, gamma):
    g = normalize_gamma(gamma)
    n_u = np.atleast_2d(np.asarray(hprime)).shape[1]
    if g.shape != (n_u,):
        raise ValueError(f"gamma must have {n_u} entries, got {g.shape[0]}")
    return g


# -- variance tracks ------------------------------------------------------------


def track_variances(gamma, v1: float) -> np.ndarray:
    """Per-user variances on the constrained track: ``1/v_i = 1 + (1/v_1 - 1)/gamma_i``."""
    if not (0.0 < v1 <= 1.0):
        raise ValueError(f"v1 must lie in (0, 1], got {v1}")
    g = normalize_gamma(gamma)
    return 1.0 / (1.0 + (1.0 / v1 - 1.0) / g)


@dataclass(frozen=True)
class VarianceTrack:
    v1: np.ndarray
    variances: np.ndarray  # shape (len(v1), N_u)


def variance_track(gamma, v1_grid) -> VarianceTrack:
    v1 = np.asarray(v1_grid, dtype=float)
    return VarianceTrack(v1=v1, variances=np.array([track_variances(gamma, v) for v in v1]))


def posterior_cov_on_track(hprime, noise_var: float, gamma, v1: float) -> np.ndarray:
    """Diagonal of the posterior covariance when the inputs sit at ``v1`` on the track."""
    if not (0.0 < v1 <= 1.0):
        raise ValueError(f"v1 must lie in (0, 1], got {v1}")
    g = _check_gamma(hprime, gamma)
    b = _info_matrix(hprime, noise_var)
    a = b + np.diag((1.0 / v1 - 1.0) / g)
    return np.real(np.diag(np.linalg.inv(a)))


# -- rates ---------------------------------------------------------------------


def _scaled_factor_svd(hprime, noise_var, g):
    """Left singular vectors and squared singular values of ``Lambda^{1/2} L``.

    ``L`` is the Cholesky factor of ``I + sigma^-2 H'^H H'`` so the result is
    the eigensystem of ``Lambda^{1/2} B Lambda^{1/2}``.  Working with the
    row-scaled factor keeps relative accuracy when ``gamma`` spans many
    orders of magnitude, where a symmetric eigensolver on the scaled matrix
    loses the small eigenvalues.
    """
    b = _info_matrix(hprime, noise_var)
    chol = np.linalg.cholesky(b)
    x = np.sqrt(g)[:, None] * chol
    perm = np.argsort(-g, kind="stable")
    u, s, _ = np.linalg.svd(x[perm])
    uu = np.empty_like(u)
    uu[perm] = u
    return uu, s * s


def user_rate_closed_form(hprime, noise_var: float, gamma, i=None):
    """Closed-form rate(s) ``R_i = sum_j |U_ij|^2 log2 lambda_j - log2 gamma_i``.

    Returns the full rate vector when ``i`` is None.
    """
    g = _check_gamma(hprime, gamma)
    u, lam = _scaled_factor_svd(hprime, noise_var, g)
    rates = (np.abs(u) ** 2) @ np.log2(lam) - np.log2(g)
    return rates if i is None else float(rates[i])


def user_rates(hprime, noise_var: float, gamma, method: str = "closed", **kw) -> np.ndarray:
    if method == "closed":
        return user_rate_closed_form(hprime, noise_var, gamma)
    if method == "numeric":
        return user_rate_numeric(hprime, noise_var, gamma, **kw)
    raise ValueError("method must be 'closed' or 'numeric'")


@dataclass(frozen=True)
class QuadratureSpec:
    """Settings for the numeric rate integral.

    The integral is taken over ``s = 1/v_1`` on ``[1, s_max]``, where
    ``s_max`` is scaled up when the information matrix is large so the
    two-term tail expansion stays accurate.
    """

    s_max: float = 1e6
    epsabs: float = 1e-11
    epsrel: float = 1e-11


def user_rate_numeric(hprime, noise_var: float, gamma, i=None, quad: QuadratureSpec = QuadratureSpec()):
    """Rate(s) from the integral representation, by adaptive quadrature.

    Substituting ``s = 1/v_1`` and ``t = log s`` the integrand becomes
    ``(1/s - [(A + (s-1) I)^-1]_ii) s`` with ``A = Lambda^{1/2} B Lambda^{1/2}``;
    it decays like ``s^-1`` in ``t``.  Beyond ``s_max`` the tail
    ``m1/S - m2/(2 S^2)`` with ``m_k = [(A - I)^k]_ii`` is added.
    """
    g = _check_gamma(hprime, gamma)
    b = _info_matrix(hprime, noise_var)
    n_u = len(g)
    ginv = 1.0 / g
    sq = np.sqrt(g)
    a_minus_i = sq[:, None] * b * sq[None, :] - np.eye(n_u)
    norm = float(np.max(np.sum(np.abs(a_minus_i), axis=1)))
    s_max = quad.s_max * max(1.0, norm)

    def integrand(t):
        s = np.exp(t)
        m = b + (s - 1.0) * np.diag(ginv)
        vdiag = np.real(np.diag(np.linalg.inv(m)))
        return (1.0 / s - ginv * vdiag) * s

    t_hi = np.log(s_max)
    diag_pts = np.log(np.clip(np.real(np.diag(a_minus_i)) + 1.0, 1.0 + 1e-9, s_max / 2))
    pts = sorted(set(float(p) for p in diag_pts if 0.0 < p < t_hi))
    body, err = integrate.quad_vec(integrand, 0.0, t_hi, epsabs=quad.epsabs, epsrel=quad.epsrel,
                                   points=pts or None, limit=2000)
    m1 = np.real(np.diag(a_minus_i))
    m2 = np.real(np.diag(a_minus_i @ a_minus_i))
    first = m1 / s_max
    second = m2 / (2.0 * s_max * s_max)
    if np.any(np.abs(second) > 1e-3 * np.maximum(np.abs(first), 1e-300)):
        raise TailConvergenceError(
            f"tail not asymptotic at s_max={s_max:.3g}: first-order {first}, second-order {second}")
    if np.any(err > 1e-6):
        raise TailConvergenceError(f"quadrature error estimate too large: {err}")
    nats = body + first - second
    rates = nats / LN2 - np.log2(g)
    return rates if i is None else float(rates[i])


def two_user_rates_closed(hprime, noise_var: float, gamma2: float):
    """Two-user rates for ``gamma = (1, gamma2)`` in closed form.

    With ``A = sigma^-2 H'^H H' + I`` and
    ``eta = sqrt(a22^2 g^2 + 2 (2 |a12|^2 - a11 a22) g + a11^2)``::

        R1 = 1/2 log(g |A|) + (a22 g - a11)/(2 eta) log((a22 g + a11 - eta)/(a22 g + a11 + eta))
        R2 = 1/2 log(|A|/g) - (a22 g - a11)/(2 eta) log((a22 g + a11 - eta)/(a22 g + a11 + eta))

    The second line uses the same log argument as the first, which makes
    ``R1 + R2 = log|A|`` (the printed version has an identically-one
    fraction there).
    """
    hprime = np.atleast_2d(np.asarray(hprime))
    if hprime.shape[1] != 2:
        raise ValueError("two_user_rates_closed needs exactly two users")
    if not gamma2 > 0:
        raise ValueError("gamma2 must be positive")
    a = _info_matrix(hprime, noise_var)
    a11, a22 = float(np.real(a[0, 0])), float(np.real(a[1, 1]))
    a12sq = float(np.abs(a[0, 1]) ** 2)
    det = a11 * a22 - a12sq
    gm = float(gamma2)
    trace = a22 * gm + a11
    eta = np.sqrt(max(a22 * a22 * gm * gm + 2.0 * (2.0 * a12sq - a11 * a22) * gm + a11 * a11, 0.0))
    if eta <= 1e-12 * trace:
        # repeated eigenvalue: A_gamma is a multiple of the identity
        return float(np.log2(a11)), float(np.log2(det) - np.log2(a11))
    # trace - eta without cancellation
    lo = 4.0 * gm * det / (trace + eta)
    coef = (a22 * gm - a11) / (2.0 * eta)
    ratio = np.log2(lo / (trace + eta))
    r1 = 0.5 * np.log2(gm * det) + coef * ratio
    r2 = 0.5 * np.log2(det / gm) - coef * ratio
    return float(r1), float(r2)


def extreme_point_limit(hprime, noise_var: float, order, ratio: float = 1e6) -> np.ndarray:
    """Rates with geometric ``gamma`` along ``order`` (``order[-1]`` largest).

    As ``ratio`` grows the rate vector approaches the SIC corner for that
    decoding order.
    """
    n_u = np.atleast_2d(np.asarray(hprime)).shape[1]
    order = tuple(int(k) for k in order)
    if sorted(order) != list(range(n_u)):
        raise ValueError(f"order {order} is not a permutation of 0..{n_u - 1}")
    g = np.empty(n_u)
    for j, k in enumerate(order):
        g[k] = float(ratio) ** j
    return user_rate_closed_form(hprime, noise_var, g)


# -- matched decoder curves -------------------------------------------------------


@dataclass(frozen=True)
class MatchedDecoderCurve:
    """Decoder transfer curve ``psi_i(rho)`` matched to the detector on the track.

    ``rho``/``psi`` sample the middle branch (``rho`` ascending); below
    ``phi_one`` the curve is 1, from ``phi_zero`` on it is 0.
    """

    rho: np.ndarray
    psi: np.ndarray
    phi_one: float
    phi_zero: float

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = np.interp(rho, self.rho, self.psi) if len(self.rho) else np.zeros_like(rho)
        out = np.where(rho < self.phi_one, 1.0, out)
        return np.where(rho >= self.phi_zero, 0.0, out)

    @classmethod
    def zero(cls) -> "MatchedDecoderCurve":
        """The curve of a code carrying no information (``psi = 0`` for ``rho > 0``)."""
        return cls(rho=np.zeros(0), psi=np.zeros(0), phi_one=0.0, phi_zero=0.0)


def matched_psi(hprime, noise_var: float, gamma, i: int, grid=None) -> MatchedDecoderCurve:
    """Sample the matched curve of user ``i`` along the transfer-constrained track.

    ``grid`` is a descending array of ``v_1`` values in ``(0, 1]``; by default
    ``1/v_1`` is log-spaced on ``[1, 1e9]``.
    """
    hprime = np.atleast_2d(np.asarray(hprime))
    g = _check_gamma(hprime, gamma)
    if grid is None:
        grid = 1.0 / np.logspace(0.0, 9.0, 4001)
    grid = np.asarray(grid, dtype=float)
    b = _info_matrix(hprime, noise_var)
    rho = np.empty(len(grid))
    psi = np.empty(len(grid))
    for k, v1 in enumerate(grid):
        v = 1.0 / (1.0 + (1.0 / v1 - 1.0) / g)
        vpost = np.real(np.diag(np.linalg.inv(b + np.diag(1.0 / v - 1.0))))
        rho[k] = 1.0 / vpost[i] - 1.0 / v[i]
        psi[k] = v[i]
    phi_one = float(1.0 / np.real(np.linalg.inv(b)[i, i]) - 1.0)
    phi_zero = float(np.real(np.vdot(hprime[:, i], hprime[:, i])) / noise_var)
    order = np.argsort(rho, kind="stable")
    return MatchedDecoderCurve(rho=rho[order], psi=psi[order], phi_one=phi_one, phi_zero=phi_zero)


def rate_from_psi(curve: MatchedDecoderCurve) -> float:
    """Area rate ``int_0^inf (rho + 1/psi(rho))^-1 drho`` in bits."""
    nats = np.log1p(curve.phi_one)
    if len(curve.rho) and curve.phi_zero > curve.phi_one:
        rho = np.concatenate([[curve.phi_one], curve.rho, [curve.phi_zero]])
        psi = np.concatenate([[1.0], curve.psi, [0.0]])
        keep = (rho >= curve.phi_one) & (rho <= curve.phi_zero)
        rho, psi = rho[keep], psi[keep]
        rho, idx = np.unique(rho, return_index=True)
        psi = psi[idx]
        f = psi / (1.0 + rho * psi)
        nats += integrate.simpson(f, x=rho)
    return float(nats / LN2)
