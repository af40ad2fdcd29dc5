"""System model for uplink MIMO-NOMA.

``y_t = H K_x^{1/2} x_t + n_t = H' x_t + n_t`` with ``N_r`` receive antennas,
``N_u`` single-antenna users, per-user powers ``w_i**2`` and noise variance
``sigma_n**2``.

Conventions used throughout the package:

* rates are in bits (log base 2);
* ``CN(0, s2)`` splits the variance ``s2`` equally between real and
  imaginary parts;
* the noise variance of the published example channels is read as the
  complex (total) variance.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ChannelFormatError(ValueError):
    """Raised when a channel text file cannot be parsed."""


@dataclass(frozen=True)
class ChannelInstance:
    """A channel matrix together with user powers and noise variance.

    Parameters
    ----------
    h : array_like, shape (N_r, N_u)
        Channel gains (complex or real).
    powers : array_like, shape (N_u,), optional
        Per-user transmit powers ``w_i**2``; all ones by default.
    noise_var : float
        Noise variance ``sigma_n**2``.
    """

    h: np.ndarray
    powers: np.ndarray = field(default=None)
    noise_var: float = 1.0

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h))
        if h.ndim != 2 or h.shape[0] < 1 or h.shape[1] < 1:
            raise ValueError(f"channel must be a non-empty 2-D matrix, got shape {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("channel contains non-finite entries")
        powers = np.ones(h.shape[1]) if self.powers is None else np.asarray(self.powers, dtype=float)
        if powers.shape != (h.shape[1],):
            raise ValueError(f"expected {h.shape[1]} powers, got shape {powers.shape}")
        if np.any(powers <= 0) or not np.all(np.isfinite(powers)):
            raise ValueError("powers must be finite and strictly positive")
        if not (self.noise_var > 0 and np.isfinite(self.noise_var)):
            raise ValueError("noise_var must be finite and strictly positive")
        h = h.copy()
        h.setflags(write=False)
        powers = powers.copy()
        powers.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "noise_var", float(self.noise_var))

    @property
    def n_r(self) -> int:
        return self.h.shape[0]

    @property
    def n_u(self) -> int:
        return self.h.shape[1]

    @property
    def hprime(self) -> np.ndarray:
        return equivalent_channel(self)


@dataclass(frozen=True)
class SymbolBlock:
    """Transmitted symbols ``x`` (N_u x N) and received block ``y`` (N_r x N)."""

    x: np.ndarray
    y: np.ndarray


def equivalent_channel(ch: ChannelInstance) -> np.ndarray:
    """Return ``H' = H K_x^{1/2}``, i.e. column ``i`` scaled by ``w_i``."""
    return ch.h * np.sqrt(ch.powers)[None, :]


def sample_iid_gaussian_channel(n_r: int, n_u: int, seed=None, real: bool = False) -> np.ndarray:
    """Draw an ``n_r x n_u`` matrix with IID unit-variance Gaussian entries.

    Entries are circularly-symmetric ``CN(0, 1)`` unless ``real`` is set, in
    which case they are ``N(0, 1)``.  ``seed`` may be anything accepted by
    :func:`numpy.random.default_rng`.
    """
    if n_r < 1 or n_u < 1:
        raise ValueError("n_r and n_u must be >= 1")
    rng = np.random.default_rng(seed)
    if real:
        return rng.standard_normal((n_r, n_u))
    return (rng.standard_normal((n_r, n_u)) + 1j * rng.standard_normal((n_r, n_u))) / np.sqrt(2.0)


def awgn_observe(hprime, x, noise_var: float, seed=None, real: bool = False) -> np.ndarray:
    """Return ``y = H' x + n`` with ``n`` IID ``CN(0, noise_var)`` per entry.

    With ``real=True`` the noise is ``N(0, noise_var)`` instead (real-valued
    model used for BPSK link simulation).
    """
    hprime = np.atleast_2d(np.asarray(hprime))
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[:, None]
    if hprime.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: H' is {hprime.shape}, x has {x.shape[0]} rows")
    if noise_var < 0:
        raise ValueError("noise_var must be non-negative")
    rng = np.random.default_rng(seed)
    shape = (hprime.shape[0], x.shape[1])
    if real:
        n = np.sqrt(noise_var) * rng.standard_normal(shape)
    else:
        n = np.sqrt(noise_var / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return hprime @ x + n


# -- plain-text channel format ------------------------------------------------
# One matrix row per line, whitespace separated entries written as "re+imJ".
# Blank lines and lines starting with '#' are ignored.


def format_complex(z: complex) -> str:
    z = complex(z)
    return f"{z.real!r}{z.imag:+.17g}J"


def dumps_channel(h) -> str:
    h = np.atleast_2d(np.asarray(h))
    return "\n".join(" ".join(format_complex(z) for z in row) for row in h) + "\n"


def loads_channel(text: str, source: str = "<string>") -> np.ndarray:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            row = [complex(tok.replace("i", "j")) for tok in line.replace(",", " ").split()]
        except ValueError as exc:
            raise ChannelFormatError(f"{source}:{lineno}: cannot parse entry ({exc})") from None
        if rows and len(row) != len(rows[0]):
            raise ChannelFormatError(
                f"{source}:{lineno}: expected {len(rows[0])} entries, found {len(row)}")
        rows.append(row)
    if not rows:
        raise ChannelFormatError(f"{source}: no matrix rows found")
    h = np.array(rows, dtype=complex)
    if np.all(h.imag == 0):
        return h.real.copy()
    return h


def write_channel(path, h) -> None:
    Path(path).write_text(dumps_channel(h))


def read_channel(path) -> np.ndarray:
    return loads_channel(Path(path).read_text(), source=str(path))


# Small real-valued example channels (rows: receive antennas, columns: users).
EXAMPLE_2X2_CHANNEL = np.array([[1.32, -1.31], [-1.43, 0.74]])
EXAMPLE_2X3_CHANNEL = np.array([[0.678, 0.603, 0.655], [0.557, 0.392, 0.171]])
EXAMPLE_3X3_CHANNEL = np.array([[1.95, 1.28, -2.53], [-0.31, -0.16, 2.22], [0.55, 1.08, -1.98]])
