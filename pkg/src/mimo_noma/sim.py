"""Iterative LMMSE receiver and Monte Carlo BER sweeps.

Link model: real BPSK (bit 0 -> +1), real ``N(0, 1)`` channel entries and
real noise of variance ``sigma_n^2`` per receive antenna, unit user power.
``Eb/N0 = P_u / (2 R_u sigma_n^2)``.

With IID block fading a user whose column energy falls below
``(2^{2 R_u} - 1) sigma_n^2`` is in outage whatever the receiver does.  The
``equal_power`` channel model rescales every column to energy ``N_r``
(ideal received-power control), which is the regime the large-system
threshold analysis describes.

Every trial draws its randomness from ``SeedSequence(seed, spawn_key=(2,
point, trial))`` so serial and threaded runs agree bit for bit.  Codes and
interleavers are fixed per user for a whole sweep.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .coding.decoder import DecoderState, app_decode
from .coding.ensemble import CodeEnsemble
from .coding.exit import ebn0_to_noise_var, noise_var_to_ebn0
from .coding.graph import Interleaver, build_code, encode
from .detector import PriorState, clamp_variances, lmmse_extrinsic, lmmse_posterior

__all__ = ["SimConfig", "BerPoint", "BerCurve", "ReceiverResult", "ebn0_to_noise_var", "noise_var_to_ebn0",
           "iterative_receiver", "ber_sweep", "build_users", "run_trial"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    ensemble: CodeEnsemble
    n_u: int
    n_r: int
    ebn0_db: tuple
    n: int = 8192
    max_outer: int = 100
    inner_iter: int = 1
    trials: int = 100
    max_errors: int = 200
    seed: int = 0
    channel: tuple | None = None  # fixed channel rows; fresh IID draw per block when None
    channel_model: str = "iid"  # or "equal_power": columns rescaled to |h_i|^2 = N_r
    p_u: float = 1.0

    def __post_init__(self):
        grid = tuple(float(x) for x in np.atleast_1d(self.ebn0_db))
        object.__setattr__(self, "ebn0_db", grid)
        if len(grid) == 0 or any(b < a for a, b in zip(grid, grid[1:])):
            raise ValueError("ebn0_db grid must be non-empty and sorted ascending")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if min(self.n_u, self.n_r, self.n, self.max_outer, self.inner_iter, self.max_errors) < 1:
            raise ValueError("counts must be positive")
        if self.channel_model not in ("iid", "equal_power"):
            raise ValueError("channel_model must be 'iid' or 'equal_power'")
        if self.channel is not None:
            h = np.asarray(self.channel, dtype=float)
            if h.shape != (self.n_r, self.n_u):
                raise ValueError(f"fixed channel must be {self.n_r}x{self.n_u}")
            object.__setattr__(self, "channel", tuple(map(tuple, h)))

    @property
    def r_u(self) -> float:
        return self.ensemble.rate_u


@dataclass(frozen=True)
class BerPoint:
    ebn0_db: float
    errors: int
    bits: int
    block_errors: int
    blocks: int
    mean_outer: float

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else float("nan")

    @property
    def bler(self) -> float:
        return self.block_errors / self.blocks if self.blocks else float("nan")


@dataclass
class BerCurve:
    config: SimConfig
    points: list = field(default_factory=list)

    @property
    def ber(self) -> np.ndarray:
        return np.array([p.ber for p in self.points])

    def rows(self):
        for p in self.points:
            yield {**asdict(p), "ber": p.ber}


@dataclass
class ReceiverResult:
    bits: list  # decoded information bits per user
    iterations: int
    converged: np.ndarray  # per user, all checks satisfied


def iterative_receiver(hprime, noise_var: float, y, graphs, interleavers, max_outer: int = 100,
                       inner_iter: int = 1, hook=None) -> ReceiverResult:
    """Turbo loop between the LMMSE detector and the per-user decoders.

    Only extrinsic quantities cross the loop: the detector sees the means
    ``tanh(L/2)`` and mean variance of the decoders' extrinsic LLRs, and each
    decoder sees ``2 rho u`` built from the detector's extrinsic output.
    ``hook(it, prior, ext, dec_llr)`` is called every outer iteration.
    """
    hprime = np.atleast_2d(np.asarray(hprime, dtype=float))
    y = np.asarray(y, dtype=float)
    n_u = hprime.shape[1]
    n = y.shape[1]
    if len(graphs) != n_u or len(interleavers) != n_u:
        raise ValueError("need one graph and one interleaver per user")
    for g in graphs:
        if g.n_bits != n:
            raise ValueError(f"code length {g.n_bits} does not match block length {n}")
    prior = PriorState.uninformed(n_u, n)
    states = [DecoderState.fresh(g) for g in graphs]
    hard = [np.zeros(g.k, dtype=np.uint8) for g in graphs]
    done = np.zeros(n_u, dtype=bool)
    it = 0
    for it in range(1, max_outer + 1):
        post = lmmse_posterior(hprime, noise_var, prior, y)
        ext = lmmse_extrinsic(post, prior, strict=False)
        xbar = np.empty((n_u, n))
        vbar = np.empty(n_u)
        dec_llr = np.empty((n_u, n))
        for i in range(n_u):
            ch = interleavers[i].inverse(2.0 * ext.rho[i] * ext.u[i])
            res = app_decode(graphs[i], ch, max_iter=inner_iter, state=states[i])
            hard[i] = res.hard
            done[i] = res.converged
            dec_llr[i] = interleavers[i].forward(res.extrinsic)
            xbar[i] = np.tanh(0.5 * dec_llr[i])
            vbar[i] = np.mean(1.0 - xbar[i] ** 2)
        if hook is not None:
            hook(it, prior, ext, dec_llr)
        if done.all():
            break
        prior = PriorState(xbar, clamp_variances(vbar))
    return ReceiverResult(bits=hard, iterations=it, converged=done.copy())


def build_users(cfg: SimConfig):
    """Per-user code graphs and interleavers, fixed for the sweep."""
    graphs = []
    inters = []
    for i in range(cfg.n_u):
        gseed = np.random.SeedSequence(cfg.seed, spawn_key=(0, i))
        graphs.append(build_code(cfg.ensemble, seed=gseed, n=cfg.n))
        inters.append(Interleaver(graphs[-1].n_bits, np.random.SeedSequence(cfg.seed, spawn_key=(1, i))))
    return graphs, inters


def run_trial(cfg: SimConfig, graphs, inters, point: int, trial: int):
    """One block: returns (bit errors, info bits, user-block errors, outer iterations)."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(2, point, trial)))
    s2 = float(ebn0_to_noise_var(cfg.ebn0_db[point], cfg.r_u, cfg.p_u))
    n = graphs[0].n_bits
    info = [rng.integers(0, 2, g.k, dtype=np.uint8) for g in graphs]
    x = np.stack([inters[i].forward(1.0 - 2.0 * encode(graphs[i], info[i])) for i in range(cfg.n_u)])
    if cfg.channel is None:
        h = rng.standard_normal((cfg.n_r, cfg.n_u))
        if cfg.channel_model == "equal_power":
            h *= np.sqrt(cfg.n_r) / np.linalg.norm(h, axis=0)
    else:
        h = np.asarray(cfg.channel)
    h = h * np.sqrt(cfg.p_u)
    y = h @ x + np.sqrt(s2) * rng.standard_normal((cfg.n_r, n))
    res = iterative_receiver(h, s2, y, graphs, inters, cfg.max_outer, cfg.inner_iter)
    errs = [int(np.count_nonzero(res.bits[i] != info[i])) for i in range(cfg.n_u)]
    return sum(errs), sum(g.k for g in graphs), sum(e > 0 for e in errs), res.iterations


def ber_sweep(cfg: SimConfig, threads: int = 1, progress=None) -> BerCurve:
    """BER per grid point; stops a point early after ``max_errors`` bit errors.

    Trials are evaluated in batches but accounted strictly in trial order,
    so the stopping index (and hence the curve) does not depend on
    ``threads``.
    """
    graphs, inters = build_users(cfg)
    curve = BerCurve(config=cfg)
    batch = max(1, int(threads))
    pool = ThreadPoolExecutor(max_workers=batch) if batch > 1 else None
    try:
        for p, db in enumerate(cfg.ebn0_db):
            errors = bits = blk = blocks = outer = 0
            t = 0
            stop = False
            while t < cfg.trials and not stop:
                idx = range(t, min(t + batch, cfg.trials))
                if pool is None:
                    results = [run_trial(cfg, graphs, inters, p, j) for j in idx]
                else:
                    results = list(pool.map(lambda j: run_trial(cfg, graphs, inters, p, j), idx))
                for e, b, be, it in results:
                    errors += e
                    bits += b
                    blk += be
                    blocks += cfg.n_u
                    outer += it
                    t += 1
                    if errors >= cfg.max_errors:
                        stop = True
                        break
            pt = BerPoint(ebn0_db=db, errors=errors, bits=bits, block_errors=blk, blocks=blocks,
                          mean_outer=outer / max(t, 1))
            curve.points.append(pt)
            log.info("Eb/N0 %.2f dB: BER %.3e (%d/%d)", db, pt.ber, errors, bits)
            if progress is not None:
                progress(pt)
    finally:
        if pool is not None:
            pool.shutdown()
    return curve
