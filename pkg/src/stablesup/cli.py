"""Command-line interface.

Exit codes: 0 on success, 1 when a check fails, 2 on usage or domain errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from contextlib import contextmanager
from typing import Optional, Sequence

import numpy as np

from . import bounds, density, oracles, verify
from .chi_approx import check_kappa, default_kappa, simulate_joint
from .errors import StableSupError
from .stable_core import validate_params
from .streams import fresh_seed, map_blocks

DEFAULTS = {
    "alpha": 1.5,
    "rho": 0.5,
    "T": 1.0,
    "kappa": None,
    "n0": density.DEFAULT_N0,
    "J": density.DEFAULT_J,
    "N": 100_000,
    "orders": "1,1",
    "grid": "0.1:4:20,0.1:4:20",
    "coords": "plus-minus",
    "kernel": "indicator",
    "level": 40,
    "seed": None,
    "workers": 1,
    "out": "-",
    "suite": None,
    "alpha_prime": None,
    "with_bounds": False,
    "timing": False,
}

_TYPES = {
    "alpha": float, "rho": float, "T": float, "kappa": float, "n0": int, "J": int,
    "N": int, "level": int, "seed": int, "workers": int, "alpha_prime": float,
}
_BOOLS = {"with_bounds", "timing"}


class UsageError(Exception):
    pass


def load_config(path: str) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{ln}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            k = k.replace("-", "_")
            if k not in DEFAULTS:
                raise UsageError(f"{path}:{ln}: unknown key {k!r}")
            try:
                if k in _BOOLS:
                    out[k] = v.lower() in ("1", "true", "yes", "on")
                else:
                    out[k] = _TYPES.get(k, str)(v)
            except ValueError as exc:
                raise UsageError(f"{path}:{ln}: {exc}") from None
    return out


def parse_orders(s: str) -> tuple[int, int]:
    try:
        a, b = (int(t) for t in s.split(","))
    except ValueError:
        raise UsageError(f"orders must look like '1,1', got {s!r}") from None
    if a < 1 or b < 1:
        raise UsageError("orders must be >= 1")
    return a, b


def _axis(spec: str) -> np.ndarray:
    parts = spec.split(":")
    log = parts[0] == "log"
    if log:
        parts = parts[1:]
    if len(parts) != 3:
        raise UsageError(f"grid axis must be [log:]lo:hi:n, got {spec!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"bad grid axis {spec!r}") from None
    if n < 1 or not hi > lo or (log and lo <= 0):
        raise UsageError(f"bad grid axis {spec!r}")
    # cell midpoints, arithmetic or geometric
    edges = np.geomspace(lo, hi, n + 1) if log else np.linspace(lo, hi, n + 1)
    return np.sqrt(edges[:-1] * edges[1:]) if log else 0.5 * (edges[:-1] + edges[1:])


def parse_grid(spec: str) -> tuple[np.ndarray, np.ndarray]:
    """``"lo:hi:n,lo:hi:n"`` to the list of points, first axis slowest."""
    axes = spec.split(",")
    if len(axes) != 2:
        raise UsageError("grid needs two comma-separated axes")
    a, b = _axis(axes[0]), _axis(axes[1])
    pts = np.array([(u, v) for u in a for v in b], dtype=float)
    return pts, np.array([a.size, b.size])


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model and run options")
    g.add_argument("--alpha", type=float)
    g.add_argument("--rho", type=float)
    g.add_argument("--T", type=float)
    g.add_argument("--kappa", type=float, help="truncation ratio; default minimal admissible + 0.01")
    g.add_argument("--n0", type=int)
    g.add_argument("--J", type=int)
    g.add_argument("--N", type=int, help="Monte Carlo sample size")
    g.add_argument("--orders", help="derivative orders 'a,b'")
    g.add_argument("--grid", help="'[log:]lo:hi:n,[log:]lo:hi:n' (cell midpoints)")
    g.add_argument("--coords", choices=("plus-minus", "x-sup"))
    g.add_argument("--kernel", choices=density.KERNELS)
    g.add_argument("--level", type=int, help="truncation level for 'sample'")
    g.add_argument("--alpha-prime", dest="alpha_prime", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--out", help="output path, '-' for stdout")
    g.add_argument("--config", help="file of key=value lines; flags override it")

    ap = argparse.ArgumentParser(prog="stablesup", description="Supremum of a stable process: sampling, densities, bounds.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common], help="draw (X_T, sup X_T) at a fixed level")
    p = sub.add_parser("density-grid", parents=[common], help="multilevel density estimates on a grid")
    p.add_argument("--with-bounds", dest="with_bounds", action="store_true", default=None)
    sub.add_parser("bounds-grid", parents=[common], help="closed-form bounds on a grid")
    p = sub.add_parser("verify", parents=[common], help="run a suite of numerical checks")
    p.add_argument("--suite", choices=verify.SUITES)
    p.add_argument("--timing", action="store_true", default=None, help="record runtimes (output no longer reproducible)")
    sub.add_parser("rate-check", parents=[common], help="fit geometric decay rates")
    return ap


def resolve(ns: argparse.Namespace) -> dict:
    cfg = load_config(ns.config) if getattr(ns, "config", None) else {}
    opts = {}
    for k, d in DEFAULTS.items():
        v = getattr(ns, k, None)
        opts[k] = v if v is not None else cfg.get(k, d)
    if opts["seed"] is None:
        opts["seed"] = fresh_seed()
    if opts["workers"] < 1:
        raise UsageError("--workers must be >= 1")
    if opts["N"] < 0:
        raise UsageError("--N must be >= 0")
    return opts


@contextmanager
def _open_out(path: str):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _params(o):
    p = validate_params(o["alpha"], o["rho"], o["T"])
    kappa = default_kappa(p) if o["kappa"] is None else check_kappa(o["kappa"], p)
    return p, kappa


def _sample_block(rng, size, p, kappa, level):
    return simulate_joint(p, kappa, level, rng, size)


def cmd_sample(o) -> int:
    p, kappa = _params(o)
    if o["level"] < 1:
        raise UsageError("--level must be >= 1")
    blocks = map_blocks(_sample_block, o["N"], o["seed"], o["workers"], args=(p, kappa, o["level"]))
    with _open_out(o["out"]) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_T", "sup", "seed"])
        for xT, sup in blocks:
            w.writerows([density.fmt17(a), density.fmt17(b), o["seed"]] for a, b in zip(xT, sup))
    return 0


def cmd_density_grid(o) -> int:
    p, kappa = _params(o)
    if o["N"] < 2:
        raise UsageError("--N must be >= 2 for density estimates")
    orders = parse_orders(o["orders"])
    pts, _ = parse_grid(o["grid"])
    run = dict(n0=o["n0"], J=o["J"], N=o["N"], p=p, kappa=kappa, workers=o["workers"], seed=o["seed"], kernel=o["kernel"])
    extra = {}
    if o["coords"] == "plus-minus":
        ests = density.estimate_density(pts, orders, **run)
        pm = pts
    else:
        ests, pm = _xy_estimates(pts, orders, run)
        extra["x"] = [density.fmt17(x) for x, _ in pts]
        extra["y"] = [density.fmt17(y) for _, y in pts]
    if o["with_bounds"]:
        q = bounds.BoundQuery(p.alpha, p.rho, p.T, o["alpha_prime"], orders)
        extra["refl_bound"] = [density.fmt17(bounds.refl_bound(q, a, b)) for a, b in pm]
        extra["region"] = [bounds.classify_region(a - b, a, p.T, p.alpha, p.rho) for a, b in pm]
    with _open_out(o["out"]) as fh:
        density.write_density_csv(fh, ests, extra or None)
    return 0


def _xy_estimates(pts, orders, run):
    """Mixed (x, y) derivatives from the (x+, x-) orders they need."""
    n, m = orders
    if np.any(pts[:, 1] <= np.maximum(pts[:, 0], 0.0)):
        raise UsageError("x-sup grid points need y > max(x, 0)")
    pm = np.column_stack([pts[:, 1], pts[:, 1] - pts[:, 0]])
    need = density.xy_orders(n, m)
    per = {k: density.estimate_density(pm, k, **run) for k in need}
    out = []
    for j, (x, y) in enumerate(pts):
        vals = {k: per[k][j].value for k in need}
        # the estimates share noise; add stderrs (triangle inequality)
        ses = {k: per[k][j].stderr for k in need}
        v = density.to_xy_derivatives(vals, n, m, x, y)
        se = abs(density.to_xy_derivatives(ses, n, m, x, y))
        base = per[need[0]][j]
        out.append(density.DensityEstimate(
            point=tuple(pm[j]), orders=(n, m), value=v, stderr=se, samples=base.samples,
            n0=base.n0, J=base.J, params=base.params, kappa=base.kappa, kernel=base.kernel, seed=base.seed,
        ))
    return out, pm


def cmd_bounds_grid(o) -> int:
    orders = parse_orders(o["orders"])
    q = bounds.BoundQuery(o["alpha"], o["rho"], o["T"], o["alpha_prime"], orders)
    pts, _ = parse_grid(o["grid"])
    if o["coords"] == "plus-minus":
        pts = np.column_stack([pts[:, 0] - pts[:, 1], pts[:, 0]])
    with _open_out(o["out"]) as fh:
        density._write_csv(fh, bounds.BOUNDS_COLUMNS, bounds.bounds_rows(q, pts))
    return 0


def _dump(o, payload) -> None:
    with _open_out(o["out"]) as fh:
        fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_verify(o) -> int:
    if o["suite"] is None:
        raise UsageError("--suite is required")
    recs = verify.run_suite(o["suite"], o["seed"], o["workers"], bool(o["timing"]))
    with _open_out(o["out"]) as fh:
        fh.write(verify.report_json(o["suite"], o["seed"], recs))
    return 0 if verify.all_passed(recs) else 1


def cmd_rate_check(o) -> int:
    p, kappa = _params(o)
    orders = parse_orders(o["orders"])
    a1 = 0.8 * p.alpha if o["alpha_prime"] is None else o["alpha_prime"]
    N = o["N"]
    levels = range(o["n0"], o["n0"] + max(o["J"], 6))
    dec = density.decay_rate_check(orders, p, kappa, levels, N, o["seed"], a1, workers=o["workers"])
    inv = oracles.inverse_moment_rate_check(
        p, kappa, (0.3, 0.3, 1.0, 0, 0, 0), range(1, 11), N, o["seed"], workers=o["workers"]
    )
    inc = oracles.increment_rate_check(
        p, kappa, (0.3, 0.3, 1.0, 1.0), range(2, 12), N, o["seed"], workers=o["workers"]
    )
    checks = []
    for name, rep in (("multilevel_decay", dec), ("inverse_moment", inv), ("increment", inc)):
        checks.append({
            "name": name, "fitted_rate": _num(rep.fitted_rate), "ceiling": rep.ceiling,
            "passed": bool(rep.passed), "levels": list(rep.levels), "means": list(rep.means),
        })
    _dump(o, {"alpha": p.alpha, "rho": p.rho, "T": p.T, "kappa": kappa, "N": N, "seed": o["seed"], "checks": checks})
    return 0 if all(c["passed"] for c in checks) else 1


def _num(x):
    x = float(x)
    return x if np.isfinite(x) else str(x)


COMMANDS = {
    "sample": cmd_sample,
    "density-grid": cmd_density_grid,
    "bounds-grid": cmd_bounds_grid,
    "verify": cmd_verify,
    "rate-check": cmd_rate_check,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        opts = resolve(ns)
        return COMMANDS[ns.command](opts)
    except (UsageError, StableSupError, OSError) as exc:
        print(f"stablesup: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
