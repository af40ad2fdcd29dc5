"""A-posteriori-probability decoding of repetition-aided IRA codes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import CodeGraph
from .kernels import LLR_CLAMP, bp_run


@dataclass
class DecoderState:
    """Check-to-variable messages, kept between calls for warm starts."""

    c2v: np.ndarray
    c2pl: np.ndarray
    c2pr: np.ndarray

    @classmethod
    def fresh(cls, graph: CodeGraph) -> "DecoderState":
        return cls(np.zeros((graph.m, graph.alpha)), np.zeros(graph.m), np.zeros(graph.m))


@dataclass
class DecodeResult:
    extrinsic: np.ndarray  # per codeword bit, channel LLR of that bit excluded
    hard: np.ndarray  # information bits
    converged: bool
    iterations: int
    state: DecoderState


def app_decode(graph: CodeGraph, llr, max_iter: int = 250, state: DecoderState | None = None) -> DecodeResult:
    """Run sum-product decoding on channel LLRs (codeword order).

    Pass the ``state`` of a previous call to continue from its messages, as
    done inside the iterative receiver.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    llr = np.clip(np.asarray(llr, dtype=float), -LLR_CLAMP, LLR_CLAMP)
    if llr.shape != (graph.n_bits,):
        raise ValueError(f"expected {graph.n_bits} LLRs, got shape {llr.shape}")
    k, q = graph.k, graph.q
    copies = llr[:q * k].reshape(q, k)
    intr = copies.sum(axis=0)
    lpar = np.ascontiguousarray(llr[q * k:])
    st = DecoderState.fresh(graph) if state is None else state
    chk = np.ascontiguousarray(graph.chk)
    iters, ok = bp_run(intr, lpar, chk, st.c2v, st.c2pl, st.c2pr, int(max_iter))

    valid = chk >= 0
    from_checks = np.bincount(chk[valid], weights=st.c2v[valid], minlength=k)
    app_info = intr + from_checks
    ext_info = (app_info[None, :] - copies).ravel()
    ext_par = st.c2pr.copy()
    ext_par[:-1] += st.c2pl[1:]
    ext = np.clip(np.concatenate([ext_info, ext_par]), -LLR_CLAMP, LLR_CLAMP)
    hard = (app_info < 0).astype(np.uint8)
    return DecodeResult(extrinsic=ext, hard=hard, converged=bool(ok), iterations=int(iters), state=st)
