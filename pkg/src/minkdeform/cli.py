"""``minkdeform`` command line.

Exit codes: 0 ok, 1 a check failed, 2 bad input, 3 numerical failure.
"""

import argparse
import math
import os
import sys

import numpy as np

from . import analysis, config, deform, geometry
from . import phi as phis
from .errors import InputError, NumericError, DomainError, DivisionByNearZero
from .norms import angular_metric, mean_cartan, tensors, value

OK, CHECK_FAILED, INPUT_ERROR, NUMERIC_ERROR = 0, 1, 2, 3


def _fmt(x):
    return f"{x: .10g}"


def _table(M):
    M = np.atleast_2d(M)
    cells = [[_fmt(v) for v in row] for row in M]
    w = max(len(c) for row in cells for c in row)
    return "\n".join("  " + "  ".join(c.rjust(w) for c in row) for row in cells)


def _thresholds(items):
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise InputError(f"--threshold expects KEY=VAL, got {item!r}")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise InputError(f"threshold {key!r} is not a number") from None
    return out


def _load(args):
    if not args.config:
        raise InputError("this command needs --config PATH")
    cfg = config.load(args.config)
    if args.resolution is not None:
        cfg.resolution = args.resolution
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.thresholds.update(_thresholds(args.threshold))
    return cfg


def _phi_arg(text, arity):
    return phis.from_text(text, arity)


# --- commands -----------------------------------------------------------------

def cmd_eval(args):
    cfg = _load(args)
    F = cfg.norm()
    y = np.array(args.y, dtype=float)
    if y.shape != (cfg.dim,):
        raise InputError(f"expected {cfg.dim} coordinates, got {len(y)}")
    Fv, g, C = tensors(F, y)
    print(f"F = {float(value(F, y)):.15g}")
    print("g_y =")
    print(_table(g))
    print("C_y (slices C[i, :, :]) =")
    for i in range(cfg.dim):
        print(f" i={i + 1}")
        print(_table(C[i]))
    print("I_y =")
    print(_table(mean_cartan(F, y)))
    print("K_y =")
    print(_table(angular_metric(F, y)))
    return OK


def cmd_validate(args):
    cfg = _load(args)
    chain = cfg.chain()
    specs = cfg.specs()
    if not specs:
        print("no deformations configured; base norm is valid by construction")
        return OK
    passed = True
    for i, (F, spec) in enumerate(zip(chain[:-1], specs)):
        rep = deform.validity_check(F, spec, cfg.resolution, cfg.seed)
        print(f"step {i + 1}: phi = {spec.phi}")
        for line in rep.lines():
            print("  " + line)
        if rep.domain_failures:
            print(f"  domain: {rep.domain_failures} of {cfg.resolution} sampled directions lie "
                  "outside the domain (conic norm)")
        print("  result: " + ("PASS" if rep.passed else "FAIL"))
        passed &= rep.passed
    return OK if passed else CHECK_FAILED


def cmd_invert(args):
    if args.config:
        cfg = _load(args)
        chain = cfg.chain()
        spec = cfg.specs()[-1]
        F, Fbar = chain[-2], chain[-1]
        back = deform.apply(Fbar, deform.inverse_deformation(spec))
        y, _ = deform.indicatrix_points(F, cfg.resolution, cfg.seed)
        err = float(np.max(np.abs(back.values(y) / F.values(y) - 1.0)))
        print(f"inverse of phi = {spec.phi}")
        print(f"round trip over {len(y)} indicatrix samples: max rel error {err:.3e}")
        return OK if err < 1e-9 else CHECK_FAILED
    if not args.phi:
        raise InputError("give a phi or --config")
    arity = args.arity
    e = _phi_arg(args.phi, arity)
    t = np.array(args.t or [0.0] * e.arity, dtype=float)
    if len(t) != e.arity:
        raise InputError(f"phi has arity {e.arity}, got {len(t)} values")
    psi = deform.invert_spec(e)
    print(f"psi({', '.join(_fmt(v).strip() for v in t)}) = {float(psi(*t)):.15g}")
    return OK


def cmd_compose(args):
    e1 = _phi_arg(args.phi1, args.arity)
    e2 = _phi_arg(args.phi2, e1.arity)
    c = deform.compose(e1, e2)
    print(c)
    if args.at:
        s = np.array(args.at, dtype=float)
        print(f"value at {args.at}: {float(c(*s)):.15g}")
    return OK


def cmd_iterate(args):
    e = _phi_arg(args.phi, 1)
    pts = np.array(args.at or [0.5, 2.0], dtype=float)
    seq = deform.psi_sequence(e, args.k, pts)
    print("k  " + "  ".join(f"psi_k({v:g})".rjust(20) for v in pts) + "  exponent")
    for k, psi in enumerate(seq, start=1):
        logs = [math.log(v) / math.log(s) if s > 0 and s != 1 and v > 0 else float("nan")
                for v, s in zip(psi, pts)]
        expo = logs[0] if logs else float("nan")
        print(f"{k:<2} " + "  ".join(f"{v:20.12g}" for v in psi) + f"  {expo: .12g}")
    if args.config:
        cfg = _load(args)
        spec = cfg.specs()[0] if cfg.specs() else None
        if spec is None:
            raise InputError("--config needs a deformation whose 1-form is iterated")
        it = deform.iterate(cfg.base_norm(), spec.betas, e, args.k, cfg.resolution, cfg.seed)
        for j, rep in enumerate(it.reports, start=1):
            print(f"F_{j}: {'Minkowski norm' if rep.passed else 'NOT a Minkowski norm'}"
                  f" (min eigenvalue {rep.min_eigen:.4g})")
        return OK if it.first_invalid is None else CHECK_FAILED
    return OK


def cmd_classify(args):
    cfg = _load(args)
    r = analysis.classify_norm(cfg.norm(), cfg.resolution, cfg.seed, cfg.thresholds)
    print(f"kind          {r.kind}")
    print(f"metric type   {r.metric_type or '-'}")
    print(f"p fit         {r.p_fit:.10g}")
    print(f"residual      {r.residual_rel:.3e}")
    print(f"max |I|       {r.max_mean_cartan:.3e}")
    if r.randers_fit is not None and r.metric_type in ("randers", "kropina"):
        f = r.randers_fit
        print(f"quadric fit   a={f.a:.6g} beta={np.array2string(f.beta, precision=6)} "
              f"residual={f.residual:.2e}")
    return OK


def cmd_indicatrix(args):
    cfg = _load(args)
    F = cfg.norm()
    fmt = args.format or ("svg" if cfg.dim == 2 else "obj" if cfg.dim == 3 else "csv")
    s = geometry.indicatrix_sample(F, cfg.resolution, cfg.seed)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, f"indicatrix.{fmt}")
    geometry.export(s, fmt, path)
    err = geometry.level_residual(F, s)
    print(f"wrote {path}: {len(s)} points, {s.skipped} directions skipped, max |F-1| = {err:.2e}")
    ok = err < 1e-10 and (cfg.dim != 2 or geometry.is_convex(s.points))
    return OK if ok else CHECK_FAILED


def cmd_hausdorff(args):
    res = args.resolution or 2048
    seed = args.seed or 0
    samples = []
    for path in (args.a, args.b):
        cfg = config.load(path)
        samples.append(geometry.indicatrix_sample(cfg.norm(), res, seed))
    if samples[0].dim != samples[1].dim:
        raise InputError("configs live in different dimensions")
    print(f"d_H = {geometry.hausdorff(*samples):.12g}")
    return OK


def cmd_figures(args):
    out = args.out or "figures"
    sets = geometry.build_figures(out, args.resolution or 720)
    ok = True
    for fs in sets:
        worst = max(c.level_error for c in fs.curves)
        convex = all(c.convex for c in fs.curves)
        print(f"{fs.name}: {len(fs.curves)} curves, max |F-1| = {worst:.2e}, "
              f"convex = {'yes' if convex else 'NO'}")
        for path in fs.files:
            print(f"  {path}")
        ok &= fs.ok
    return OK if ok else CHECK_FAILED


# --- parser -----------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--resolution", type=int, metavar="N")
    common.add_argument("--seed", type=int, metavar="N")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--format", choices=["csv", "svg", "obj"])
    common.add_argument("--threshold", action="append", metavar="KEY=VAL")

    p = argparse.ArgumentParser(prog="minkdeform", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("eval", parents=[common], help="F, g, C, I, K at a point")
    s.add_argument("y", nargs="+", type=float)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("validate", parents=[common], help="positivity checks for each deformation")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("invert", parents=[common], help="inverse deformation psi")
    s.add_argument("phi", nargs="?")
    s.add_argument("t", nargs="*", type=float)
    s.add_argument("--arity", type=int)
    s.set_defaults(func=cmd_invert)

    s = sub.add_parser("compose", parents=[common], help="phi of the composed deformation")
    s.add_argument("phi1")
    s.add_argument("phi2")
    s.add_argument("--arity", type=int)
    s.add_argument("--at", nargs="+", type=float)
    s.set_defaults(func=cmd_compose)

    s = sub.add_parser("iterate", parents=[common], help="iterate one deformation k times")
    s.add_argument("phi")
    s.add_argument("-k", type=int, default=4)
    s.add_argument("--at", nargs="+", type=float)
    s.set_defaults(func=cmd_iterate)

    s = sub.add_parser("classify", parents=[common], help="Euclidean / C-reducible / semi-C-reducible")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("indicatrix", parents=[common], help="sample and export the indicatrix")
    s.set_defaults(func=cmd_indicatrix)

    s = sub.add_parser("hausdorff", parents=[common], help="Hausdorff distance of two indicatrices")
    s.add_argument("a", metavar="CONFIG_A")
    s.add_argument("b", metavar="CONFIG_B")
    s.set_defaults(func=cmd_hausdorff)

    s = sub.add_parser("figures", parents=[common], help="regenerate the three figure families")
    s.set_defaults(func=cmd_figures)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return INPUT_ERROR if exc.code else OK
    try:
        return args.func(args)
    except np.linalg.LinAlgError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return NUMERIC_ERROR
    except (InputError, ValueError) as exc:
        if isinstance(exc, (DomainError, DivisionByNearZero)):
            print(f"numeric failure: {exc}", file=sys.stderr)
            return NUMERIC_ERROR
        print(f"input error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    except (NumericError, ZeroDivisionError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return NUMERIC_ERROR


if __name__ == "__main__":
    sys.exit(main())
