"""Command line front end.

Subcommands cover the main library entry points: rate evaluations,
kernel transforms, minimizing paths, path costs, path metrics, Monte
Carlo tail estimates, rate-curve sweeps, and a quick self test.

Exit codes: 0 success, 2 configuration problems (bad flags, unparsable
model or kernel strings), 3 domain errors, 4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import montecarlo as mc
from .cgf import parse_model
from .errors import DomainError, LdpkitError, NonConvergenceError
from .kernel_rate import (KernelRateProblem, e_f, e_f_grad, i_f_conjugate,
                          i_f_explicit, minimizer)
from .kernels import parse_kernel
from .metrics import rho_2, rho_2_prime, rho_star
from .paths import CadlagPath, random_path


def _fmt(v) -> str:
    """Twelve significant digits; shared by the csv and json writers."""
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    x = float(v)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def _json_value(v):
    if v is None or isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    x = float(v)
    if math.isfinite(x):
        return float(f"{x:.12g}")
    return x


def _emit(header, rows, fmt: str, out) -> None:
    if fmt == "json":
        payload = [{k: _json_value(v) for k, v in zip(header, row)}
                   for row in rows]
        out.write(json.dumps(payload, indent=2) + "\n")
    else:
        out.write(",".join(header) + "\n")
        for row in rows:
            out.write(",".join(_fmt(v) for v in row) + "\n")


def _open_out(args):
    if getattr(args, "out", None):
        return open(args.out, "w"), True
    return sys.stdout, False


def _load_path(fname: str) -> CadlagPath:
    with open(fname) as fh:
        return CadlagPath.from_text(fh.read())


# ----------------------------------------------------------------------
# Subcommand handlers
# ----------------------------------------------------------------------

def _cmd_rate(args, out) -> int:
    model = parse_model(args.model)
    kernel = parse_kernel(args.kernel)
    conj = i_f_conjugate(model, kernel, args.x)
    expl = i_f_explicit(model, kernel, args.x)
    header = ("x", "i_f_conjugate", "i_f_explicit", "branch", "lambda_star")
    rows = [(args.x, conj.value, expl.value, conj.branch, conj.lambda_star)]
    _emit(header, rows, args.format, out)
    return 0


def _cmd_ef(args, out) -> int:
    model = parse_model(args.model)
    kernel = parse_kernel(args.kernel)
    lam = args.lam
    val = e_f(model, kernel, lam)
    grad = e_f_grad(model, kernel, lam) if math.isfinite(val) else None
    _emit(("lam", "e_f", "e_f_grad"), [(lam, val, grad)], args.format, out)
    return 0


def _cmd_minimizer(args, out) -> int:
    model = parse_model(args.model)
    kernel = parse_kernel(args.kernel)
    path = minimizer(model, kernel, args.x, tol=args.tol)
    if args.format == "json":
        out.write(json.dumps(path.to_dict(), indent=2) + "\n")
    else:
        out.write(path.to_text())
    return 0


def _cmd_idcost(args, out) -> int:
    model = parse_model(args.model)
    path = _load_path(args.path)
    header = ("var", "sup_norm", "i_d")
    rows = [(path.var(), path.sup_norm(), path.i_d(model))]
    _emit(header, rows, args.format, out)
    return 0


def _cmd_metric(args, out) -> int:
    left = _load_path(args.left)
    right = _load_path(args.right)
    fn = {"rho2": rho_2, "rho2p": rho_2_prime, "rhostar": rho_star}[args.name]
    _emit((args.name,), [(fn(left, right),)], args.format, out)
    return 0


def _cmd_mc(args, out) -> int:
    model = parse_model(args.model)
    kernel = parse_kernel(args.kernel)
    est = mc.estimate_tail(model, kernel, args.n, args.a,
                           samples=args.samples, seed=args.seed)
    i_f = i_f_conjugate(model, kernel, args.a).value
    try:
        exact = -mc.exact_tail_oracle(model, kernel, args.n, args.a) / args.n
    except ValueError:
        exact = None
    header = ("n", "a", "rate_estimate", "std_error", "i_f", "exact_rate")
    rows = [(args.n, args.a, est.rate_estimate, est.std_error, i_f, exact)]
    _emit(header, rows, args.format, out)
    return 0


def _cmd_sweep(args, out) -> int:
    model = parse_model(args.model)
    kernel = parse_kernel(args.kernel)
    levels = [float(s) for s in args.levels.split(",") if s]
    n_list = [int(s) for s in args.n_list.split(",") if s]
    rows = mc.empirical_rate_curve(model, kernel, levels, n_list,
                                   samples=args.samples, seed=args.seed)
    header = ("n", "a", "rate_estimate", "std_error", "i_f", "exact_rate")
    _emit(header, rows, args.format, out)
    return 0


# ----------------------------------------------------------------------
# Self test
# ----------------------------------------------------------------------

def _selftest_checks():
    from .kernels import affine, constant, identity

    def gaussian_rate():
        model = parse_model("gaussian:mu=0,sigma=1")
        r = i_f_conjugate(model, identity(), 1.0)
        assert abs(r.value - 1.5) < 1e-9, r.value

    def cexp_zero():
        model = parse_model("cexp")
        r = i_f_conjugate(model, constant(1.0), 0.0)
        assert abs(r.value) < 1e-12, r.value

    def route_agreement():
        model = parse_model("gaussian:mu=0,sigma=1")
        kern = affine(0.5, 1.0)
        for x in (-1.0, -0.25, 0.0, 0.7, 2.0):
            c = i_f_conjugate(model, kern, x).value
            e = i_f_explicit(model, kern, x).value
            assert abs(c - e) < 1e-8, (x, c, e)

    def pairing_identity():
        model = parse_model("rademacher")
        kern = affine(0.0, 1.0)
        for seed in (0, 1, 2):
            ws = mc.sample_weighted_sum(model, kern, 64, seed)
            traj = mc.sample_traj(model, 64, seed)
            assert ws == traj.pair(kern), seed
            assert abs(traj.var() - 1.0) < 1e-12

    def var_split():
        for seed in range(4):
            p = random_path(1, 4, 3, seed)
            ac, jp = p.lebesgue_split()
            assert abs(p.var() - ac.var() - jp.var()) < 1e-12

    def metric_example():
        g = CadlagPath(dimension=1, grid=(0.0, 1.0), slopes=((0.0,),),
                       jumps=((0.0, 1.0),))
        h = CadlagPath(dimension=1, grid=(0.0, 1.0), slopes=((0.0,),),
                       jumps=((0.1, 1.0),))
        assert abs(rho_2_prime(g, h) - 0.1) < 1e-6
        assert abs(rho_2(g, h) - 1.0) < 1e-6

    def duality_touch():
        model = parse_model("gaussian:mu=0.3,sigma=2")
        for u in (-1.0, 0.2, 1.5):
            v = model.grad(u)
            assert abs(model.rate(v) - (u * v - model.k(u))) < 1e-10

    return [("gaussian identity rate", gaussian_rate),
            ("cexp flat kernel at zero", cexp_zero),
            ("conjugate vs explicit routes", route_agreement),
            ("pairing identity", pairing_identity),
            ("variation split", var_split),
            ("graph metric example", metric_example),
            ("pointwise duality", duality_touch)]


def _cmd_selftest(args, out) -> int:
    failures = 0
    for name, fn in _selftest_checks():
        try:
            fn()
        except Exception as err:    # report and keep going
            failures += 1
            out.write(f"FAIL {name}: {err}\n")
        else:
            out.write(f"ok   {name}\n")
    total = len(_selftest_checks())
    out.write(f"{total - failures}/{total} checks passed\n")
    return 0 if failures == 0 else 1


# ----------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ldpkit",
        description="rate functions, path costs and tail estimates "
                    "for kernel-weighted sums")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(p, model=True, kernel=True):
        if model:
            p.add_argument("--model", required=True,
                           help="model spec, e.g. gaussian:mu=0,sigma=1")
        if kernel:
            p.add_argument("--kernel", required=True,
                           help="kernel spec, e.g. affine:0,1 or const:1")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", help="write output to this file")

    p = sub.add_parser("rate", help="rate function value at a point")
    add_common(p)
    p.add_argument("--x", type=float, required=True)
    p.set_defaults(fn=_cmd_rate)

    p = sub.add_parser("ef", help="kernel transform value and slope")
    add_common(p)
    p.add_argument("--lam", type=float, required=True)
    p.set_defaults(fn=_cmd_ef)

    p = sub.add_parser("minimizer", help="optimal path for a level")
    add_common(p)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(fn=_cmd_minimizer)

    p = sub.add_parser("idcost", help="variation and action of a path file")
    add_common(p, kernel=False)
    p.add_argument("--path", required=True, help="path file to read")
    p.set_defaults(fn=_cmd_idcost)

    p = sub.add_parser("metric", help="distance between two path files")
    p.add_argument("name", choices=("rho2", "rho2p", "rhostar"))
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_metric)

    p = sub.add_parser("mc", help="importance-sampling tail estimate")
    add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_mc)

    p = sub.add_parser("sweep", help="rate curve over levels and sizes")
    add_common(p)
    p.add_argument("--levels", required=True, help="comma list of levels")
    p.add_argument("--n-list", required=True, help="comma list of sizes")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("selftest", help="run the built-in sanity checks")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_selftest)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    out, should_close = _open_out(args)
    try:
        return args.fn(args, out)
    except (ValueError, KeyError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except NonConvergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return 4
    except DomainError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except LdpkitError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    finally:
        if should_close:
            out.close()


if __name__ == "__main__":
    sys.exit(main())
