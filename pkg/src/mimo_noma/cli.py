"""Command-line interface: ``mimo-noma <command> [options]``.

Every command writes its CSV/text outputs plus ``manifest.json`` into
``--out-dir``.  ``mimo-noma replay manifest.json`` re-runs a recorded command
and, with ``--verify``, checks the outputs hash-for-hash.

Exit status: 0 success, 2 invalid input, 3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import logging
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import capacity, gamma_search, rates
from .coding import exit as exitmod
from .coding.ensemble import BUILTIN_PROFILES, Profile, ProfileError, load_profile
from .model import read_channel

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 2, 3
log = logging.getLogger("mimo_noma")


class CliError(ValueError):
    pass


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover
        return "unknown"


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _floats(text: str):
    try:
        vals = [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise CliError(f"cannot parse number list {text!r}") from None
    if not vals or not all(np.isfinite(vals)):
        raise CliError(f"invalid number list {text!r}")
    return vals


def _channel(args):
    h = read_channel(args.channel)
    if not args.noise_var > 0:
        raise CliError("--noise-var must be positive")
    return h, args.noise_var


def _profile(args) -> Profile:
    if args.profile:
        return load_profile(args.profile)
    if args.beta is None:
        raise CliError("give --profile FILE or --beta")
    try:
        return BUILTIN_PROFILES[float(args.beta)]
    except KeyError:
        raise CliError(f"no built-in profile for beta={args.beta}; choose from {sorted(BUILTIN_PROFILES)}") from None


# -- commands ---------------------------------------------------------------------


def cmd_capacity(args, out: Path):
    h, s2 = _channel(args)
    n_u = h.shape[1]
    bounds = capacity.subset_bounds(h, s2)
    rows = []
    for mask in range(1, 1 << n_u):
        users = " ".join(str(i) for i in range(n_u) if mask >> i & 1)
        rows.append((users, bounds[mask]))
    _write_csv(out / "subsets.csv", ["users", "bound_bits"], rows)
    ext = [(" ".join(map(str, p.order)), *p.rates, p.rates.sum()) for p in capacity.all_extreme_points(h, s2)]
    _write_csv(out / "extreme_points.csv", ["order", *[f"R{i}" for i in range(n_u)], "sum"], ext)
    _write_csv(out / "summary.csv", ["quantity", "value"], [("sum_capacity", capacity.sum_capacity(h, s2))])
    return ["subsets.csv", "extreme_points.csv", "summary.csv"]


def _gamma_points(args, n_u):
    base = np.ones(n_u)
    points = []
    for g in args.gamma or []:
        v = np.array(_floats(g))
        if v.shape != (n_u,):
            raise CliError(f"--gamma needs {n_u} values, got {v.size}")
        if np.any(v <= 0):
            raise CliError("gamma values must be positive")
        points.append(v)
    if args.sweep:
        if len(points) > 1:
            raise CliError("--sweep takes at most one --gamma base point")
        if points:
            base = points.pop()
        axes = []
        for spec in args.sweep:
            try:
                user, lo, hi, count = spec.split(":")
                user, lo, hi, count = int(user), float(lo), float(hi), int(count)
            except ValueError:
                raise CliError(f"--sweep expects USER:LO:HI:COUNT, got {spec!r}") from None
            if not (0 <= user < n_u) or lo <= 0 or hi <= 0 or count < 1:
                raise CliError(f"bad sweep {spec!r}")
            axes.append((user, np.geomspace(lo, hi, count)))
        for combo in itertools.product(*[a[1] for a in axes]):
            g = base.copy()
            for (user, _), val in zip(axes, combo):
                g[user] = val
            points.append(g)
    if not points:
        points = [base]
    return points


def cmd_rates(args, out: Path):
    h, s2 = _channel(args)
    n_u = h.shape[1]
    rows = []
    for g in _gamma_points(args, n_u):
        if args.method == "numeric":
            r = rates.user_rate_numeric(h, s2, g)
        else:
            r = rates.user_rate_closed_form(h, s2, g)
        rows.append((*g, *r, r.sum()))
    _write_csv(out / "rates.csv", [*[f"gamma{i}" for i in range(n_u)], *[f"R{i}" for i in range(n_u)], "sum"], rows)
    return ["rates.csv"]


def cmd_track(args, out: Path):
    h, s2 = _channel(args)
    n_u = h.shape[1]
    g = _gamma_points(args, n_u)[0]
    v1 = 1.0 / np.logspace(0.0, args.decades, args.points)
    rows = []
    for v in v1:
        vi = rates.track_variances(g, v)
        vp = rates.posterior_cov_on_track(h, s2, g, v)
        rows.append((v, *vi, *vp))
    _write_csv(out / "track.csv", ["v1", *[f"v{i}" for i in range(n_u)], *[f"vpost{i}" for i in range(n_u)]], rows)
    return ["track.csv"]


def cmd_gamma_search(args, out: Path):
    h, s2 = _channel(args)
    target = np.array(_floats(args.target))
    if target.shape != (h.shape[1],):
        raise CliError(f"--target needs {h.shape[1]} rates")
    tol = args.tolerance if args.tolerance is not None else 1e-2
    cfg = gamma_search.SearchConfig(eps=tol, delta=args.delta, n_max=args.n_max,
                                    random_start=args.random_start)
    res = gamma_search.find_gamma(h, s2, target, cfg)
    projected = not capacity.in_region(h, s2, target)
    lines = [
        f"converged: {res.converged}",
        f"iterations: {res.iterations}",
        f"backoffs: {res.backoffs}",
        f"target_projected: {projected}",
        "target: " + " ".join(_fmt(x) for x in target),
        "adjusted_target: " + " ".join(_fmt(x) for x in res.adjusted_target),
        "gamma: " + " ".join(_fmt(x) for x in res.gamma),
        "achieved: " + " ".join(_fmt(x) for x in res.achieved),
        f"l1_error: {_fmt(res.error)}",
    ]
    (out / "result.txt").write_text("\n".join(lines) + "\n")
    _write_csv(out / "trace.csv", ["iteration", "l1_error", *[f"gamma{i}" for i in range(h.shape[1])]],
               [(it, err, *g) for it, err, g in res.trace])
    return ["result.txt", "trace.csv"]


def cmd_exit(args, out: Path):
    p = _profile(args)
    kw = {"seed": args.seed}
    if args.method == "mc":
        kw["n_bits"] = args.n_bits
    t = exitmod.exit_trajectory(p.ensemble, p.n_u, p.n_r, args.ebn0, method=args.method, **kw)
    _write_csv(out / "exit.csv", ["step", "v_in", "v_out", "i_a", "i_e"],
               [(n, pt.v_in, pt.v_out, pt.i_a, pt.i_e) for n, pt in enumerate(t.points)])
    _write_csv(out / "summary.csv", ["quantity", "value"],
               [("ebn0_db", args.ebn0), ("noise_var", t.noise_var), ("converged", t.converged),
                ("steps", len(t.points))])
    return ["exit.csv", "summary.csv"]


def cmd_threshold(args, out: Path):
    p = _profile(args)
    tol = args.tolerance if args.tolerance is not None else 0.01
    kw = {"seed": args.seed}
    if args.method == "mc":
        kw["n_bits"] = args.n_bits
    th = exitmod.find_threshold(p.ensemble, p.n_u, p.n_r, tol_db=tol, bracket=(args.lo, args.hi),
                                method=args.method, **kw)
    rows = [("threshold_db", th), ("reference_db", p.threshold_db if p.threshold_db is not None else ""),
            ("design_rate", p.ensemble.design_rate), ("method", args.method)]
    _write_csv(out / "threshold.csv", ["quantity", "value"], rows)
    return ["threshold.csv"]


def cmd_ber(args, out: Path):
    from .sim import SimConfig, ber_sweep

    p = _profile(args)
    cfg = SimConfig(ensemble=p.ensemble, n_u=p.n_u, n_r=p.n_r, ebn0_db=tuple(_floats(args.ebn0)), n=args.n,
                    max_outer=args.max_outer, inner_iter=args.inner_iter, trials=args.trials,
                    max_errors=args.max_errors, seed=args.seed, channel_model=args.channel_model)
    curve = ber_sweep(cfg, threads=args.threads)
    _write_csv(out / "ber.csv", ["ebn0_db", "ber", "errors", "bits", "block_errors", "blocks", "mean_outer"],
               [(pt.ebn0_db, pt.ber, pt.errors, pt.bits, pt.block_errors, pt.blocks, pt.mean_outer)
                for pt in curve.points])
    return ["ber.csv"]


COMMANDS = {
    "capacity": cmd_capacity,
    "rates": cmd_rates,
    "track": cmd_track,
    "gamma-search": cmd_gamma_search,
    "exit": cmd_exit,
    "threshold": cmd_threshold,
    "ber": cmd_ber,
}


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--out-dir", default=".", help="directory for outputs and manifest")
    common.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo trials")
    common.add_argument("--tolerance", type=float, default=None,
                        help="search tolerance (gamma-search: L1 rate error; threshold: dB)")
    common.add_argument("-v", "--verbose", action="store_true")

    chan = argparse.ArgumentParser(add_help=False)
    chan.add_argument("--channel", required=True, help="channel matrix text file")
    chan.add_argument("--noise-var", type=float, required=True)

    gam = argparse.ArgumentParser(add_help=False)
    gam.add_argument("--gamma", action="append", help="comma separated gamma vector (repeatable)")
    gam.add_argument("--sweep", action="append", metavar="USER:LO:HI:COUNT",
                     help="log-spaced sweep of gamma[USER]; several sweeps form a grid")

    prof = argparse.ArgumentParser(add_help=False)
    prof.add_argument("--profile", help="code profile config file")
    prof.add_argument("--beta", type=float, help="built-in profile for load 0.5, 1, 2 or 3")

    ap = argparse.ArgumentParser(prog="mimo-noma", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("capacity", parents=[common, chan], help="subset bounds and SIC corner points")
    p = sub.add_parser("rates", parents=[common, chan, gam], help="iterative LMMSE rates for gamma points")
    p.add_argument("--method", choices=["closed", "numeric"], default="closed")
    p = sub.add_parser("track", parents=[common, chan, gam], help="variance track for one gamma")
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--decades", type=float, default=6.0, help="v1 runs from 1 down to 10^-decades")
    p = sub.add_parser("gamma-search", parents=[common, chan], help="find gamma for a target rate vector")
    p.add_argument("--target", required=True, help="comma separated target rates (bits)")
    p.add_argument("--delta", type=float, default=1e-3)
    p.add_argument("--n-max", type=int, default=200)
    p.add_argument("--random-start", type=int, default=None, help="seed for a random initial gamma")
    for name, hlp in (("exit", "EXIT trajectory at one Eb/N0"), ("threshold", "EXIT threshold by bisection")):
        p = sub.add_parser(name, parents=[common, prof], help=hlp)
        p.add_argument("--method", choices=["ga", "mc"], default="ga")
        p.add_argument("--n-bits", type=int, default=200_000, help="code length for --method mc")
        if name == "exit":
            p.add_argument("--ebn0", type=float, required=True)
        else:
            p.add_argument("--lo", type=float, default=-20.0)
            p.add_argument("--hi", type=float, default=5.0)
    p = sub.add_parser("ber", parents=[common, prof], help="Monte Carlo BER sweep")
    p.add_argument("--ebn0", required=True, help="comma separated Eb/N0 grid in dB")
    p.add_argument("--n", type=int, default=8192)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--max-outer", type=int, default=100)
    p.add_argument("--inner-iter", type=int, default=1)
    p.add_argument("--max-errors", type=int, default=200)
    p.add_argument("--channel-model", choices=["iid", "equal_power"], default="iid")
    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out-dir", default=None, help="output directory (default: the manifest's)")
    p.add_argument("--verify", action="store_true", help="compare output hashes with the manifest")
    return ap


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _run(argv) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the usage message
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "replay":
        return _replay(args)
    if args.threads < 1:
        raise CliError("--threads must be >= 1")
    if args.tolerance is not None and not args.tolerance > 0:
        raise CliError("--tolerance must be positive")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = COMMANDS[args.command](args, out)
    config = {k: v for k, v in vars(args).items() if k not in ("out_dir",)}
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "config": config,
        "seed": args.seed,
        "version": _version(),
        "outputs": {f: _sha256(out / f) for f in files},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _replay(args) -> int:
    path = Path(args.manifest)
    try:
        man = json.loads(path.read_text())
        argv = list(man["argv"])
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot read manifest {path}: {exc}") from None
    out = Path(args.out_dir) if args.out_dir else path.parent
    # drop any recorded --out-dir and point at the replay directory
    cleaned = []
    skip = False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--out-dir":
            skip = True
            continue
        if tok.startswith("--out-dir="):
            continue
        cleaned.append(tok)
    code = _run(cleaned + ["--out-dir", str(out)])
    if code == EXIT_OK and args.verify:
        bad = [f for f, digest in man.get("outputs", {}).items() if _sha256(out / f) != digest]
        if bad:
            print(f"replay mismatch in {', '.join(bad)}", file=sys.stderr)
            return 1
        print("replay verified: " + ", ".join(man.get("outputs", {})))
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return _run(argv)
    except (gamma_search.SearchDidNotConverge, rates.TailConvergenceError,
            exitmod.ThresholdBracketError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (CliError, ProfileError, ValueError, FileNotFoundError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
