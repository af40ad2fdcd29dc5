"""Repetition-aided IRA code ensembles and their text configuration format.

An ensemble is described by the edge-perspective degree distribution
``lambda_d`` of the information nodes, the repetition factor ``q`` (each
information bit is transmitted ``q`` times) and the grouping factor ``alpha``
(information edges combined per accumulator check).  With average
information-node degree ``dbar = 1 / sum(lambda_d / d)`` the design rate is
``1 / (q + dbar / alpha)``.

Config files hold one ``key = value`` pair per line; ``lambda`` is repeated,
one ``degree fraction`` pair per line::

    name = beta-0.5
    n_u = 8
    n_r = 16
    q = 1
    alpha = 2
    lambda = 3 0.087105
    lambda = 10 0.138217
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class ProfileError(ValueError):
    """Invalid ensemble or profile configuration."""


@dataclass(frozen=True)
class CodeEnsemble:
    lam: dict
    q: int = 1
    alpha: int = 2
    rate_u: float = 0.1
    n: int = 40000

    def __post_init__(self):
        if not self.lam:
            raise ProfileError("degree profile lambda is empty")
        lam = {int(d): float(f) for d, f in self.lam.items()}
        if any(d < 1 for d in lam) or any(f < 0 for f in lam.values()):
            raise ProfileError("degrees must be >= 1 and fractions non-negative")
        if abs(sum(lam.values()) - 1.0) > 1e-6 + 1e-12:
            raise ProfileError(f"edge fractions sum to {sum(lam.values()):.8f}, expected 1")
        if int(self.q) != self.q or self.q < 1 or int(self.alpha) != self.alpha or self.alpha < 1:
            raise ProfileError("q and alpha must be positive integers")
        if self.n < 2 or not (0 < self.rate_u < 1):
            raise ProfileError("need n >= 2 and 0 < rate_u < 1")
        object.__setattr__(self, "lam", dict(sorted(lam.items())))
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "alpha", int(self.alpha))

    @property
    def degrees(self) -> np.ndarray:
        return np.array(list(self.lam), dtype=np.int64)

    @property
    def edge_fractions(self) -> np.ndarray:
        f = np.array(list(self.lam.values()))
        return f / f.sum()

    @property
    def node_fractions(self) -> np.ndarray:
        x = self.edge_fractions / self.degrees
        return x / x.sum()

    @property
    def mean_degree(self) -> float:
        return float(1.0 / np.sum(self.edge_fractions / self.degrees))

    @property
    def design_rate(self) -> float:
        return 1.0 / (self.q + self.mean_degree / self.alpha)

    def with_length(self, n: int) -> "CodeEnsemble":
        return replace(self, n=int(n))


@dataclass(frozen=True)
class Profile:
    """An ensemble together with the system it was optimised for."""

    ensemble: CodeEnsemble
    n_u: int
    n_r: int
    name: str = ""
    threshold_db: float | None = None
    shannon_db: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def beta(self) -> float:
        return self.n_u / self.n_r


_INT_KEYS = {"n_u", "n_r", "q", "alpha", "n"}
_FLOAT_KEYS = {"rate_u", "threshold_db", "shannon_db", "beta"}


def loads_profile(text: str, source: str = "<string>") -> Profile:
    vals: dict = {}
    lam: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ProfileError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key == "lambda":
                d, f = value.split()
                if int(d) in lam:
                    raise ProfileError(f"{source}:{lineno}: degree {d} given twice")
                lam[int(d)] = float(f)
            elif key in _INT_KEYS:
                vals[key] = int(value)
            elif key in _FLOAT_KEYS:
                vals[key] = float(value)
            elif key == "name":
                vals[key] = value
            else:
                raise ProfileError(f"{source}:{lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ProfileError):
                raise
            raise ProfileError(f"{source}:{lineno}: bad value for {key!r}: {value!r}") from None
    if not lam:
        raise ProfileError(f"{source}: no 'lambda' entries")
    for key in ("n_u", "n_r"):
        if key not in vals:
            raise ProfileError(f"{source}: missing {key!r}")
    ens = CodeEnsemble(lam=lam, q=vals.get("q", 1), alpha=vals.get("alpha", 2),
                       rate_u=vals.get("rate_u", 0.1), n=vals.get("n", 40000))
    if "beta" in vals and abs(vals["beta"] - vals["n_u"] / vals["n_r"]) > 1e-9:
        raise ProfileError(f"{source}: beta inconsistent with n_u/n_r")
    return Profile(ensemble=ens, n_u=vals["n_u"], n_r=vals["n_r"], name=vals.get("name", ""),
                   threshold_db=vals.get("threshold_db"), shannon_db=vals.get("shannon_db"))


def load_profile(path) -> Profile:
    return loads_profile(Path(path).read_text(), source=str(path))


def dumps_profile(p: Profile) -> str:
    e = p.ensemble
    lines = [f"name = {p.name}"] if p.name else []
    lines += [f"n_u = {p.n_u}", f"n_r = {p.n_r}", f"rate_u = {e.rate_u!r}", f"n = {e.n}",
              f"q = {e.q}", f"alpha = {e.alpha}"]
    lines += [f"lambda = {d} {f!r}" for d, f in e.lam.items()]
    if p.threshold_db is not None:
        lines.append(f"threshold_db = {p.threshold_db!r}")
    if p.shannon_db is not None:
        lines.append(f"shannon_db = {p.shannon_db!r}")
    return "\n".join(lines) + "\n"


def _p(name, n_u, n_r, q, alpha, lam, thr, sl):
    return Profile(CodeEnsemble(lam=lam, q=q, alpha=alpha), n_u, n_r, name, thr, sl)


# Optimised profiles for loads 0.5, 1, 2 and 3 (R_u = 0.1, N = 4e4).
BUILTIN_PROFILES = {
    0.5: _p("beta-0.5", 8, 16, 1, 2, {3: 0.087105, 10: 0.138217, 30: 0.207022, 80: 0.068682, 100: 0.498975},
            -13.14, -13.16),
    1.0: _p("beta-1", 16, 16, 2, 2, {3: 0.1016, 10: 0.138386, 30: 0.262982, 80: 0.114347, 100: 0.382685},
            -12.95, -13.03),
    2.0: _p("beta-2", 16, 8, 2, 2, {3: 0.107994, 10: 0.129009, 30: 0.219708, 80: 0.141601, 100: 0.401687},
            -9.66, -9.70),
    3.0: _p("beta-3", 24, 8, 2, 2, {3: 0.116863, 10: 0.127289, 30: 0.159387, 80: 0.234121, 100: 0.36234},
            -9.35, -9.38),
}

# Baselines: an IRA code designed for the multiple-access channel (rate 0.08)
# and a single-user IRA code.
MAC_IRA = CodeEnsemble(lam={2: 0.063021, 3: 0.228288, 10: 0.111951, 30: 0.226877, 50: 0.369864},
                       q=5, alpha=1, rate_u=0.08)
SU_IRA = CodeEnsemble(lam={3: 0.085867, 10: 0.132226, 30: 0.198883, 80: 0.276011, 100: 0.307013},
                      q=1, alpha=2)
