"""Graph sampling, encoding and interleaving for repetition-aided IRA codes.

Codeword layout (length ``q K + M``): ``q`` consecutive copies of the ``K``
information bits followed by the ``M`` accumulator parity bits.  Check ``j``
joins up to ``alpha`` information bits with parities ``p_{j-1}`` and ``p_j``,
so ``p_j = p_{j-1} xor (xor of its information bits)``.

Check-to-information adjacency is stored as an ``(M, alpha)`` array padded
with ``-1`` (only the last check can be short).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .ensemble import CodeEnsemble, ProfileError


@dataclass(frozen=True)
class CodeGraph:
    k: int
    m: int
    q: int
    alpha: int
    info_degree: np.ndarray
    chk: np.ndarray
    four_cycles: int = 0

    @property
    def n_bits(self) -> int:
        return self.q * self.k + self.m

    @property
    def rate(self) -> float:
        return self.k / self.n_bits

    @property
    def n_edges(self) -> int:
        return int(self.info_degree.sum())

    @property
    def edge_var(self) -> np.ndarray:
        flat = self.chk.ravel()
        return flat[flat >= 0]

    @property
    def edge_check(self) -> np.ndarray:
        rows = np.repeat(np.arange(self.m), self.alpha)
        return rows[self.chk.ravel() >= 0]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.array([self.k, self.m, self.q, self.alpha], dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.chk, dtype=np.int64).tobytes())
        return h.hexdigest()


def _largest_remainder(target: np.ndarray, total: int) -> np.ndarray:
    base = np.floor(target).astype(np.int64)
    short = total - int(base.sum())
    order = np.argsort(-(target - base), kind="stable")
    base[order[:short]] += 1
    return base


def _in_check_duplicates(chk: np.ndarray) -> np.ndarray:
    """Flat positions holding a repeat of a variable already in the same check."""
    s = np.sort(np.where(chk < 0, -np.arange(1, chk.shape[1] + 1)[None, :], chk), axis=1)
    bad_rows = np.flatnonzero(np.any((s[:, 1:] == s[:, :-1]) & (s[:, 1:] >= 0), axis=1))
    out = []
    for r in bad_rows:
        seen = set()
        for c in range(chk.shape[1]):
            v = chk[r, c]
            if v >= 0 and v in seen:
                out.append(r * chk.shape[1] + c)
            seen.add(v)
    return np.array(out, dtype=np.int64)


def _short_cycle_positions(chk: np.ndarray, k: int) -> np.ndarray:
    """Flat positions closing a 4-cycle.

    Two kinds are tracked: an information pair sharing two checks, and one
    information bit attached to adjacent checks (closed through the shared
    accumulator parity).
    """
    m, alpha = chk.shape
    pos = []
    valid = chk >= 0
    rows = np.repeat(np.arange(m), alpha).reshape(m, alpha)
    # adjacent checks
    key = chk.astype(np.int64) * (m + 1) + rows
    here = key[valid]
    nxt = (chk.astype(np.int64) * (m + 1) + rows + 1)[valid]
    hit = np.isin(nxt, here)
    pos.append(np.flatnonzero(valid.ravel())[hit])
    # repeated pairs
    for a in range(alpha):
        for b in range(a + 1, alpha):
            ok = valid[:, a] & valid[:, b]
            lo = np.minimum(chk[:, a], chk[:, b]).astype(np.int64)
            hi = np.maximum(chk[:, a], chk[:, b]).astype(np.int64)
            pk = np.where(ok, lo * k + hi, -1 - np.arange(m))
            _, first, counts = np.unique(pk, return_index=True, return_counts=True)
            dup = np.ones(m, dtype=bool)
            dup[first] = False
            dup &= ok
            pos.append(np.flatnonzero(dup) * alpha + b)
    if not pos:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.concatenate(pos))


def _swap_out(flat: np.ndarray, positions: np.ndarray, alpha: int, rng, avoid_dup: bool) -> None:
    live = np.flatnonzero(flat >= 0)
    for p in positions:
        for _ in range(50):
            t = live[rng.integers(len(live))]
            if t // alpha == p // alpha:
                continue
            rp, rt = p // alpha, t // alpha
            a, b = flat[p], flat[t]
            row_p = flat[rp * alpha:(rp + 1) * alpha]
            row_t = flat[rt * alpha:(rt + 1) * alpha]
            if avoid_dup and (b in row_p or a in row_t):
                continue
            flat[p], flat[t] = b, a
            break


def build_code(ens: CodeEnsemble, seed=None, n: int | None = None, cycle_passes: int = 30) -> CodeGraph:
    """Sample a code from the ensemble.

    ``K = round(N / (q + dbar / alpha))`` information bits, node counts per
    degree by largest-remainder rounding, ``M = ceil(E / alpha)`` checks.
    Sockets are permuted at random; repeated edges into one check are always
    removed, 4-cycles are removed on a best-effort basis.
    """
    n = ens.n if n is None else int(n)
    rng = np.random.default_rng(seed)
    k = int(round(n / (ens.q + ens.mean_degree / ens.alpha)))
    if k < 1:
        raise ProfileError(f"length {n} too short for this ensemble")
    counts = _largest_remainder(k * ens.node_fractions, k)
    deg = np.repeat(ens.degrees, counts)
    e = int(deg.sum())
    m = -(-e // ens.alpha)
    if deg.max() > m:
        raise ProfileError(f"degree {deg.max()} exceeds the {m} available checks at length {n}")
    sockets = np.repeat(np.arange(k), deg)[rng.permutation(e)]
    flat = np.full(m * ens.alpha, -1, dtype=np.int64)
    flat[:e] = sockets
    for _ in range(200):
        bad = _in_check_duplicates(flat.reshape(m, ens.alpha))
        if len(bad) == 0:
            break
        _swap_out(flat, bad, ens.alpha, rng, avoid_dup=True)
    else:
        raise ProfileError("could not remove repeated edges; profile too dense for this length")
    best = None
    for _ in range(cycle_passes):
        cyc = _short_cycle_positions(flat.reshape(m, ens.alpha), k)
        if best is None or len(cyc) < best[0]:
            best = (len(cyc), flat.copy())
        if len(cyc) == 0:
            break
        _swap_out(flat, cyc, ens.alpha, rng, avoid_dup=True)
    cyc = _short_cycle_positions(flat.reshape(m, ens.alpha), k)
    if len(cyc) > best[0]:
        flat = best[1]
        cyc = _short_cycle_positions(flat.reshape(m, ens.alpha), k)
    chk = flat.reshape(m, ens.alpha)
    chk.setflags(write=False)
    deg.setflags(write=False)
    return CodeGraph(k=k, m=m, q=ens.q, alpha=ens.alpha, info_degree=deg, chk=chk, four_cycles=len(cyc))


def _check_xor(graph: CodeGraph, info: np.ndarray) -> np.ndarray:
    padded = np.where(graph.chk >= 0, info[np.maximum(graph.chk, 0)], 0)
    return np.bitwise_xor.reduce(padded, axis=1)


def encode(graph: CodeGraph, info) -> np.ndarray:
    info = np.asarray(info).astype(np.uint8).ravel()
    if info.shape != (graph.k,):
        raise ValueError(f"expected {graph.k} information bits, got {info.size}")
    if np.any(info > 1):
        raise ValueError("information bits must be 0/1")
    s = _check_xor(graph, info)
    parity = (np.cumsum(s, dtype=np.int64) & 1).astype(np.uint8)
    return np.concatenate([np.tile(info, graph.q), parity])


def parity_check_matrix(graph: CodeGraph) -> sparse.csr_matrix:
    """Sparse parity-check matrix including the repetition equalities."""
    k, m, q = graph.k, graph.m, graph.q
    rows = [graph.edge_check, np.arange(m), np.arange(1, m)]
    cols = [graph.edge_var, q * k + np.arange(m), q * k + np.arange(m - 1)]
    for r in range(1, q):
        eq = m + (r - 1) * k + np.arange(k)
        rows += [eq, eq]
        cols += [np.arange(k), r * k + np.arange(k)]
    r_all = np.concatenate(rows)
    c_all = np.concatenate(cols)
    h = sparse.csr_matrix((np.ones(len(r_all), dtype=np.uint8), (r_all, c_all)),
                          shape=(m + (q - 1) * k, graph.n_bits))
    return h


def syndrome(graph: CodeGraph, bits) -> np.ndarray:
    bits = np.asarray(bits).astype(np.int64).ravel()
    if bits.shape != (graph.n_bits,):
        raise ValueError(f"expected {graph.n_bits} bits")
    return (parity_check_matrix(graph) @ bits) & 1


# -- interleaving ----------------------------------------------------------------


@dataclass(frozen=True)
class Interleaver:
    """Uniform random permutation of ``n`` positions drawn from ``seed``."""

    n: int
    seed: object = None

    def __post_init__(self):
        perm = np.random.default_rng(self.seed).permutation(self.n)
        perm.setflags(write=False)
        object.__setattr__(self, "_perm", perm)

    @property
    def perm(self) -> np.ndarray:
        return self._perm

    def forward(self, block):
        block = np.asarray(block)
        if block.shape[-1] != self.n:
            raise ValueError(f"block length {block.shape[-1]} != {self.n}")
        return block[..., self.perm]

    def inverse(self, block):
        block = np.asarray(block)
        if block.shape[-1] != self.n:
            raise ValueError(f"block length {block.shape[-1]} != {self.n}")
        out = np.empty_like(block)
        out[..., self.perm] = block
        return out


def interleave(seed, block):
    block = np.asarray(block)
    return Interleaver(block.shape[-1], seed).forward(block)


def deinterleave(seed, block):
    block = np.asarray(block)
    return Interleaver(block.shape[-1], seed).inverse(block)
