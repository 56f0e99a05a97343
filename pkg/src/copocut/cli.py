"""Command-line entry point: ``copocut <verb> ...``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys

import numpy as np

from . import instances
from .benders import BendersAbort, BendersConfig, audit_cuts, run_benders, state_from_cuts
from .envelope import DEFAULT_TOL, EnvelopeSolver, search_convex_quadratic, solve_quadratic_dual
from .model import QuadraticCertificate, is_inf


def _points(values, dim):
    pts = []
    for text in values or ():
        p = np.array([float(t) for t in text.split(",")])
        if p.shape != (dim,):
            raise SystemExit(f"point {text!r} must have {dim} coordinates")
        pts.append(p)
    return pts


def _params(pairs):
    out = {}
    for item in pairs or ():
        key, _, val = item.partition("=")
        if not _:
            raise SystemExit(f"--param expects key=value, got {item!r}")
        out[key] = float(val)
    return out


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _table(rows, fmt):
    if fmt == "json":
        return json.dumps(rows, indent=1) + "\n"
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()


def _num(v):
    return "inf" if v is not None and is_inf(v) else v


def cert_to_dict(cert: QuadraticCertificate) -> dict:
    return {"lam": cert.lam.tolist(), "w": cert.w.tolist(), "W": cert.W.tolist(),
            "nu": cert.nu, "W_min_eig": float(np.linalg.eigvalsh(cert.W)[0])}


def cert_from_dict(d: dict, lp) -> QuadraticCertificate:
    return QuadraticCertificate(np.array(d["lam"], float), np.array(d["w"], float),
                                np.array(d["W"], float), lp.b)


# --------------------------------------------------------------------------
# verbs
# --------------------------------------------------------------------------

def cmd_generate(args):
    cfg = instances.GeneratorConfig(args.S, args.n, args.m, seed=args.seed,
                                    negate_blocks=args.negate_blocks)
    _emit(instances.dumps(instances.generate_instance(cfg)), args.out)
    return 0


def _config(args):
    return BendersConfig(eps=args.epsilon, tol=args.tol, max_iter=args.max_iter, jobs=args.jobs,
                         x_nonneg=getattr(args, "x_nonneg", False))


def cmd_solve(args):
    inst = instances.load(args.instance)
    progress = None
    if args.verbose:
        progress = lambda row: print(row, file=sys.stderr)  # noqa: E731
    try:
        rep = run_benders(inst, _config(args), progress=progress)
    except BendersAbort as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        if exc.report is None:
            return 2
        rep = exc.report
    _emit(rep.to_json() + "\n" if args.format == "json" else rep.to_csv(), args.out)
    return 0 if rep.status in ("converged", "budget", "time") else 2


def cmd_envelope(args):
    if args.instance:
        inst = instances.load(args.instance)
        A_i, F = inst.blocks[args.block]
        solver = EnvelopeSolver(A_i, F, tol=args.tol)
    else:
        fix = instances.fixture(args.fixture, **_params(args.param))
        solver = EnvelopeSolver(fix.objective, fix.ground, n_x=fix.n_x, tol=args.tol)
    rows = []
    for x in _points(args.point, solver.n_x):
        out = solver.evaluate(x, eps=args.epsilon, max_iter=args.max_iter)
        cert = out.certificate
        rows.append({"x": ",".join(repr(float(v)) for v in x), "status": out.status,
                     "value": out.value if out.status == "value" else "inf",
                     "alpha": None if cert is None else cert.alpha,
                     "w": None if cert is None else ",".join(repr(float(v)) for v in cert.w)})
    _emit(_table(rows, args.format), args.out)
    return 0


def cmd_quad_cut(args):
    fix = instances.fixture(args.fixture, **_params(args.param))
    lp = fix.program
    rows = []
    for x in _points(args.point, lp.n_x):
        if args.convex:
            env = EnvelopeSolver(fix.objective, fix.ground, n_x=lp.n_x, tol=args.tol).evaluate(x)
            if env.status != "value":
                raise SystemExit(f"envelope at {x} is not finite ({env.status})")
            x2 = _points([args.x2], lp.n_x)[0] if args.x2 else x
            cert = search_convex_quadratic(lp, x, env.value, x2, tol=args.tol,
                                           max_iter=args.max_iter)
        else:
            cert = solve_quadratic_dual(lp, x, tol=args.tol, max_iter=args.max_iter)
        row = cert_to_dict(cert)
        row["x"] = x.tolist()
        row["qhat_at_x"] = cert(x)
        rows.append(row)
    _emit(json.dumps(rows, indent=1) + "\n", args.out)
    return 0


def cmd_surface(args):
    fix = instances.fixture(args.fixture, **_params(args.param))
    k = args.grid
    if fix.n_x == 1:
        grid = np.linspace(args.lo, args.hi, k)[:, None]
    elif fix.n_x == 2:
        ax = np.linspace(args.lo, args.hi, k)
        grid = np.array([(a, b) for a in ax for b in ax])
    else:
        raise SystemExit("surface sampling needs a fixture with one or two first-stage variables")
    certs = []
    for path in args.certificate or ():
        with open(path) as fh:
            data = json.load(fh)
        for d in data if isinstance(data, list) else [data]:
            certs.append(cert_from_dict(d, fix.program))
    for x in _points(args.quad_at, fix.n_x):
        certs.append(solve_quadratic_dual(fix.program, x, tol=args.tol))
    rows = instances.sample_surface(fix, grid, envelope=not args.no_envelope, certificates=certs,
                                    phi_method=args.phi, tol=args.tol)
    if args.format == "json":
        doc = [{"x": list(x), "phi": _num(phi), "envelope": _num(env),
                "qhat": qs, "status": st} for x, phi, env, qs, st in rows]
        _emit(json.dumps(doc, indent=1) + "\n", args.out)
    else:
        _emit(instances.surface_csv(rows, fix.n_x, len(certs)), args.out)
    return 0


def cmd_audit(args):
    inst = instances.load(args.instance)
    if args.report:
        with open(args.report) as fh:
            state = state_from_cuts(json.load(fh)["cuts"], inst.S)
    else:
        state = run_benders(inst, _config(args)).state
    audit = audit_cuts(inst, state, n_points=args.points, tol=args.audit_tol, rng=args.seed)
    n_cuts = sum(map(len, state.opt_cuts)) + sum(map(len, state.feas_cuts))
    doc = {"ok": audit.ok, "cuts": n_cuts, "checks": audit.checked,
           "violations": [list(v) for v in audit.violations]}
    _emit(json.dumps(doc, indent=1) + "\n" if args.format == "json" else
          _table([{"ok": audit.ok, "cuts": n_cuts, "checks": audit.checked,
                   "violations": len(audit.violations)}], "csv"), args.out)
    return 0 if audit.ok else 1


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="copocut", description=__doc__)
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, fmt="csv"):
        sp.add_argument("--tol", type=float, default=DEFAULT_TOL)
        sp.add_argument("--max-iter", type=int, default=200)
        sp.add_argument("--out", default=None, help="output path (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default=fmt)

    def benders_flags(sp):
        sp.add_argument("--instance", required=True)
        sp.add_argument("--epsilon", type=float, default=0.05)
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--x-nonneg", action="store_true", help="keep x >= 0 in the master")

    g = sub.add_parser("generate", help="write a random block instance as JSON")
    g.add_argument("--S", type=int, default=4)
    g.add_argument("--n", type=int, default=4)
    g.add_argument("--m", type=int, default=3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--negate-blocks", action="store_true")
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run the Benders loop on an instance")
    benders_flags(s)
    common(s)
    s.set_defaults(max_iter=100)
    s.add_argument("--verbose", action="store_true")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("envelope", help="evaluate the convex envelope at points")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--instance")
    src.add_argument("--fixture", choices=sorted(instances.FIXTURES))
    e.add_argument("--block", type=int, default=0)
    e.add_argument("--param", action="append", help="fixture parameter key=value")
    e.add_argument("--point", action="append", required=True, help="comma separated x")
    e.add_argument("--epsilon", type=float, default=0.05)
    common(e)
    e.set_defaults(func=cmd_envelope)

    q = sub.add_parser("quad-cut", help="quadratic underestimator certificates for a fixture")
    q.add_argument("--fixture", required=True, choices=sorted(instances.FIXTURES))
    q.add_argument("--param", action="append")
    q.add_argument("--point", action="append", required=True)
    q.add_argument("--convex", action="store_true", help="search a convex certificate")
    q.add_argument("--x2", default=None, help="direction maximised in the convex search")
    common(q, fmt="json")
    q.set_defaults(func=cmd_quad_cut)

    f = sub.add_parser("surface", help="sample phi, the envelope and certificates on a grid")
    f.add_argument("--fixture", required=True, choices=sorted(instances.FIXTURES))
    f.add_argument("--param", action="append")
    f.add_argument("--grid", type=int, default=101, help="points per axis")
    f.add_argument("--lo", type=float, default=0.0)
    f.add_argument("--hi", type=float, default=1.0)
    f.add_argument("--phi", choices=("global", "closed"), default="global")
    f.add_argument("--certificate", action="append", help="JSON from quad-cut")
    f.add_argument("--quad-at", action="append", help="add the dual certificate tight at x")
    f.add_argument("--no-envelope", action="store_true")
    common(f)
    f.set_defaults(func=cmd_surface)

    a = sub.add_parser("audit-cuts", help="check pooled cuts at sampled feasible points")
    benders_flags(a)
    common(a, fmt="json")
    a.set_defaults(max_iter=100)
    a.add_argument("--report", help="JSON report from solve; runs the loop when omitted")
    a.add_argument("--points", type=int, default=200)
    a.add_argument("--audit-tol", type=float, default=1e-5)
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(func=cmd_audit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
