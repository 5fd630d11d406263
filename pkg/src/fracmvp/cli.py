"""Command-line interface: ``fracmvp <command> [options]``.

Exit codes: 0 success, 2 input error, 3 numerical-condition error,
4 statistical-quality error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import ConvergenceError, DomainError, IllConditionedError, StatisticalQualityError
from .gaps import estimate_gap_lower_bound, slab_blowup_experiment
from .geometry import Ball, domain_from_json, inradius_from_origin
from .harmonic import PoissonExtension, data_from_json, verify_mvp
from .kernels import frac_params
from .limits import ball_detect, boundary_profile, c_frak, find_touch_point
from .wos import WosConfig, wos_solve

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_STATS = 0, 2, 3, 4

FAMILIES = {
    "touch": "touch", "mollified-poisson-at-touch-point": "touch",
    "ladder": "ladder", "far-bump-ladder": "ladder",
    "lp": "lp", "lp-optimized-bounded": "lp",
}


@dataclass
class RunManifest:
    command: str
    params: dict
    domain_spec: object
    seed: int
    tool_version: str
    timestamp: str


def _manifest(args, domain_spec):
    return RunManifest(args.command, {"n": args.n, "s": args.s}, domain_spec, getattr(args, "seed", 0),
                       __version__, datetime.now(timezone.utc).isoformat(timespec="seconds"))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DomainError(f"malformed JSON in {path}: {exc}") from exc


def _floats(text, name):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise DomainError(f"--{name} must be a comma-separated list of numbers") from exc


def _emit(args, manifest, payload, rows=None):
    doc = {"manifest": asdict(manifest), "result": _plain(payload)}
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if rows is not None and args.csv:
        buf = io.StringIO()
        buf.write("# " + json.dumps(asdict(manifest), sort_keys=True) + "\n")
        w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()) if rows else [])
        w.writeheader()
        for r in rows:
            w.writerow(_plain(r))
        with open(args.csv, "w", newline="") as fh:
            fh.write(buf.getvalue())


def _setup(args):
    params = frac_params(args.n, args.s)
    spec = _read_json(args.domain) if getattr(args, "domain", None) else None
    dom = domain_from_json(spec, args.n) if spec is not None else None
    if dom is not None and dom.dim != args.n:
        raise DomainError(f"domain dimension {dom.dim} does not match --n {args.n}")
    return params, dom, spec


def _cfg(args):
    return WosConfig(n_paths=args.paths, seed=args.seed)


def cmd_mvp(args):
    params, dom, spec = _setup(args)
    if not isinstance(dom, Ball) or np.any(dom.c != 0):
        raise DomainError("mvp needs a ball centred at the origin as domain of harmonicity")
    g = data_from_json(_read_json(args.data))
    radii = _floats(args.radii, "radii")
    if any(r > dom.radius * (1 + 1e-12) or r <= 0 for r in radii):
        raise DomainError(f"radii must lie in (0, {dom.radius}]")
    u = PoissonExtension(params, dom.radius, g)
    rows = [{"r": r, "residual": verify_mvp(params, dom, u, r)} for r in radii]
    for row in rows:
        print(f"r = {row['r']:<8g} residual = {row['residual']:.3e}", file=sys.stderr)
    _emit(args, _manifest(args, spec), {"rows": rows, "tol": args.tol}, rows)
    return EXIT_OK if all(r["residual"] <= args.tol for r in rows) else EXIT_NUMERIC


def cmd_gap(args):
    params = frac_params(args.n, args.s)
    cfg = _cfg(args)
    if args.sweep_delta:
        deltas = _floats(args.sweep_delta, "sweep-delta")
        rows = slab_blowup_experiment(params, deltas, cfg)
        _emit(args, _manifest(args, {"type": "slab_complement", "deltas": deltas}), {"rows": rows}, rows)
        return EXIT_OK
    params, dom, spec = _setup(args)
    if dom is None:
        raise DomainError("--domain is required unless --sweep-delta is given")
    family = FAMILIES.get(args.family)
    if family is None:
        raise DomainError(f"unknown family {args.family!r}")
    rep = estimate_gap_lower_bound(args.kind, params, dom, family, cfg)
    _emit(args, _manifest(args, spec), rep.to_dict())
    return EXIT_OK


def cmd_wos(args):
    params, dom, spec = _setup(args)
    g = data_from_json(_read_json(args.data))
    x = np.array(_floats(args.point, "point")) if args.point else np.zeros(args.n)
    if x.shape != (args.n,):
        raise DomainError("--point has the wrong dimension")
    est = wos_solve(params, dom, g, x, _cfg(args)).check()
    _emit(args, _manifest(args, spec), {"point": x, **est.to_dict()})
    return EXIT_OK


def cmd_limit(args):
    params, dom, spec = _setup(args)
    p = np.array(_floats(args.point, "point")) if args.point else find_touch_point(dom)
    x0 = np.array(_floats(args.x0, "x0")) if args.x0 else np.zeros(args.n)
    if float(abs(dom.signed_dist(p))) > 1e-6:
        raise DomainError("--point must lie on the boundary")
    prof = boundary_profile(params, dom, x0, p, _floats(args.t_grid, "t-grid"), _cfg(args), variant=args.variant)
    _emit(args, _manifest(args, spec), prof.to_dict(), prof.rows())
    return EXIT_OK


def cmd_cfrak(args):
    params, dom, spec = _setup(args)
    val, err = c_frak(params, dom)
    _emit(args, _manifest(args, spec), {"c_frak": val, "error": err, "inradius": inradius_from_origin(dom)})
    return EXIT_OK


def cmd_detect(args):
    params, dom, spec = _setup(args)
    verdict = ball_detect(params, dom, _cfg(args))
    _emit(args, _manifest(args, spec), verdict.to_dict())
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="fracmvp", description="Fractional mean value experiments.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, domain=True, stochastic=True):
        p.add_argument("--n", type=int, default=2, help="dimension")
        p.add_argument("--s", type=float, default=0.5, help="fractional order in (0, 1)")
        if domain:
            p.add_argument("--domain", required=True, help="domain JSON file")
        if stochastic:
            p.add_argument("--paths", type=int, default=20000, help="Monte Carlo paths")
            p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="write JSON here instead of stdout")
        p.add_argument("--csv", help="also write a CSV table")

    p = sub.add_parser("mvp", help="check the mean value property of a Poisson extension")
    common(p, stochastic=False)
    p.add_argument("--data", required=True, help="exterior data JSON file")
    p.add_argument("--radii", required=True, help="comma-separated radii")
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_mvp)

    p = sub.add_parser("gap", help="lower bounds for the mean value gaps")
    common(p, domain=False)
    p.add_argument("--domain", help="domain JSON file")
    p.add_argument("--kind", choices=["G", "Gstar", "Gcal"], default="G")
    p.add_argument("--family", default="touch", help="touch | ladder | lp")
    p.add_argument("--sweep-delta", help="comma-separated slab widths (slab sweep)")
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("wos", help="walk-on-spheres solution at a point")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--point", help="comma-separated coordinates (default origin)")
    p.set_defaults(func=cmd_wos)

    p = sub.add_parser("limit", help="boundary profile of the Poisson kernel")
    common(p)
    p.add_argument("--point", help="boundary point (default: a touch point)")
    p.add_argument("--x0", help="interior pole (default origin)")
    p.add_argument("--t-grid", default="0.04,0.02,0.01")
    p.add_argument("--variant", choices=["normalized", "plain"], default="normalized")
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("cfrak", help="the constant c_frak of a domain")
    common(p, stochastic=False)
    p.set_defaults(func=cmd_cfrak)

    p = sub.add_parser("detect", help="ball-detection verdict")
    common(p)
    p.set_defaults(func=cmd_detect)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, IllConditionedError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except StatisticalQualityError as exc:
        print(f"statistical error: {exc}", file=sys.stderr)
        return EXIT_STATS


if __name__ == "__main__":
    sys.exit(main())
