"""Command-line interface: ``msc <subcommand> ...``.

Results go to ``--out`` (or stdout). Failures print a JSON error object on
stderr and exit with a nonzero status.
"""

import argparse
import json
import sys

import numpy as np

from . import bench
from .bound import DiagonalBound, certify, diagonal_bound
from .imsc import ImscConfig, run_imsc
from .io import csv_text, json_text, load_json, read_matrix, read_vector, write_text
from .operators import operator_from_json
from .penalties import PenaltySpec, prox
from .solvers import ProblemSpec, check_optimality, select_lambda, solve_penalized_ls


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("UsageError", message, code=2)


def _fail(kind, message, code=1):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message)}) + "\n")
    sys.exit(code)


def _emit(text, out):
    if out:
        write_text(out, text)
    else:
        sys.stdout.write(text)


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


# -- problem loading --------------------------------------------------------


def _vector(value):
    if isinstance(value, str):
        return read_vector(value)
    return np.asarray(value, dtype=float)


def _load_problem(path):
    """Problem JSON: ``y`` (list or CSV path), ``operator``, ``lambda``
    (number, list or ``"auto"`` with ``sigma``), ``penalty``, ``a``, ``bound``."""
    spec = load_json(path)
    for key in ("y", "operator"):
        if key not in spec:
            raise CliError(f"problem is missing {key!r}")
    y = _vector(spec["y"])
    H = operator_from_json(spec["operator"])
    lam = spec.get("lambda", "auto")
    if lam == "auto":
        if "sigma" not in spec:
            raise CliError("lambda 'auto' needs sigma")
        lam = select_lambda(H, float(spec["sigma"]))
    else:
        lam = np.broadcast_to(_vector(lam), (H.shape[1],)).copy()
    return spec, y, H, lam


# -- subcommands ------------------------------------------------------------


def cmd_prox(args):
    if args.grid:
        lo, hi, num = args.grid.split(":")
        ys = np.linspace(float(lo), float(hi), int(num))
    elif args.y is not None:
        ys = np.asarray(_floats(args.y))
    else:
        raise CliError("give --y or --grid")
    xs = prox(PenaltySpec(args.kind, args.a), ys, args.lam)
    xs = np.atleast_1d(xs)
    if args.format == "csv":
        _emit(csv_text(["y", "x"], zip(ys.tolist(), xs.tolist())), args.out)
    else:
        _emit(json_text({"kind": args.kind, "lambda": args.lam, "a": args.a, "y": ys, "x": xs}), args.out)


def cmd_bound(args):
    G = read_matrix(args.gram)
    b = diagonal_bound(G, args.method, tol=args.tol)
    feasible, margin = certify(G, b.r)
    _emit(json_text(_bound_json(b, feasible)), args.out)


def _bound_json(b: DiagonalBound, feasible):
    return {"r": b.r, "margin": b.margin, "alpha_min": b.alpha_min, "method": b.method,
            "iterations": b.iterations, "feasible": feasible}


def cmd_solve(args):
    spec, y, H, lam = _load_problem(args.problem)
    pen = spec.get("penalty", "abs")
    a = spec.get("a", 0.0)
    a = _vector(a) if isinstance(a, (list, str)) else float(a)
    bound = spec.get("bound")
    prob = ProblemSpec(y, H, lam, PenaltySpec(pen), a=a, bound=None if bound is None else _vector(bound))
    rep = solve_penalized_ls(prob, max_iter=args.max_iter, rel_tol=args.rel_tol, assume_convex=args.assume_convex)
    _emit(json_text({
        "x": rep.x, "objective": rep.objective, "iterations": rep.iterations, "converged": rep.converged,
        "optimality_max_violation": rep.optimality_max_violation, "support": rep.support,
    }), args.out)
    if args.scatter:
        _, sc = check_optimality(prob, rep.x)
        write_text(args.scatter, csv_text(["x_times_a", "grad_over_lambda"], sc.tolist()))


def cmd_imsc(args):
    spec, y, H, lam = _load_problem(args.problem)
    conf = dict(spec.get("imsc", {}))
    if args.config:
        conf.update(load_json(args.config))
    for key in ("beta", "penalty", "bound_method", "max_outer", "support_eps"):
        v = getattr(args, key)
        if v is not None:
            conf[key] = v
    cfg = ImscConfig(**conf)
    x, trace = run_imsc(H, y, lam, cfg)
    payload = {"x": x, "support": np.flatnonzero(np.abs(x) > cfg.support_eps), "trace": trace.to_json(),
               "config": vars(cfg)}
    _emit(json_text(payload), args.out)
    if args.scatter:
        last = [it for it in trace.iterations if it.a is not None]
        if last:
            S = last[-1].support
            prob = ProblemSpec(y, H.subcolumns(S), lam[S], PenaltySpec(cfg.penalty), a=last[-1].a)
            _, sc = check_optimality(prob, x[S])
        else:
            _, sc = check_optimality(ProblemSpec(y, H, lam), x)
        write_text(args.scatter, csv_text(["x_times_a", "grad_over_lambda"], sc.tolist()))


def _bench_config(args):
    conf = load_json(args.config) if args.config else {}
    if args.seed is not None:
        conf["master_seed"] = args.seed
    if args.trials is not None:
        conf["trials"] = args.trials
    if args.algorithms:
        conf["algorithms"] = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    if getattr(args, "N", None) is not None:
        conf["N"] = args.N
    return bench.ExperimentConfig.from_dict(conf)


def cmd_bench(args):
    cfg = _bench_config(args)
    res = bench.run_benchmark(cfg)
    _emit(res.summary_csv(), args.out)
    if args.trials_csv:
        write_text(args.trials_csv, res.trials_csv())
    if args.json:
        write_text(args.json, json_text(res.to_json(timing=args.timing)))


def cmd_sweep(args):
    cfg = _bench_config(args)
    rows = bench.lambda_sweep(cfg, _floats(args.lambdas))
    _emit(bench.sweep_csv(rows), args.out)


def cmd_denoise(args):
    signal = read_vector(args.signal) if args.signal else bench.demo_signal()
    noisy, den, rmse = bench.denoise_demo(signal, args.sigma, args.kind, args.T, args.a, args.seed)
    if args.signal_out:
        write_text(args.signal_out, csv_text(["clean", "noisy", "denoised"], zip(signal, noisy, den)))
    T = 3.0 * args.sigma if args.T is None else args.T
    _emit(json_text({"kind": args.kind, "sigma": args.sigma, "T": T, "rmse": rmse}), args.out)


def build_parser():
    p = _Parser(prog="msc", description="Maximally sparse convex regularization tools.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("prox", help="evaluate a threshold function")
    s.add_argument("--kind", default="atan", choices=["abs", "log", "atan", "hard"])
    s.add_argument("--lam", type=float, required=True)
    s.add_argument("--a", type=float, default=0.0)
    s.add_argument("--y", help="comma-separated input values")
    s.add_argument("--grid", help="start:stop:num")
    s.add_argument("--format", choices=["json", "csv"], default="json")
    s.add_argument("--out")
    s.set_defaults(func=cmd_prox)

    s = sub.add_parser("bound", help="diagonal lower bound of a Gram matrix (CSV)")
    s.add_argument("--gram", required=True)
    s.add_argument("--method", choices=["sdp", "simple"], default="sdp")
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--out")
    s.set_defaults(func=cmd_bound)

    s = sub.add_parser("solve", help="solve one penalized least-squares problem")
    s.add_argument("--problem", required=True)
    s.add_argument("--max-iter", type=int, default=2000)
    s.add_argument("--rel-tol", type=float, default=1e-9)
    s.add_argument("--assume-convex", action="store_true")
    s.add_argument("--scatter", help="CSV path for the optimality scatter")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("imsc", help="run iterative MSC on one problem")
    s.add_argument("--problem", required=True)
    s.add_argument("--config")
    s.add_argument("--beta", type=float)
    s.add_argument("--penalty", choices=["log", "atan"])
    s.add_argument("--bound-method", dest="bound_method", choices=["sdp", "simple"])
    s.add_argument("--max-outer", dest="max_outer", type=int)
    s.add_argument("--support-eps", dest="support_eps", type=float)
    s.add_argument("--scatter")
    s.add_argument("--out")
    s.set_defaults(func=cmd_imsc)

    for name, func, helptext in (
        ("deconv-bench", cmd_bench, "multi-trial sparse deconvolution benchmark"),
        ("lambda-sweep", cmd_sweep, "benchmark errors over a grid of lambda values"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", help="ExperimentConfig JSON; flags override it")
        s.add_argument("--seed", type=int)
        s.add_argument("--trials", type=int)
        s.add_argument("--algorithms", help=f"comma-separated subset of {','.join(bench.ALGORITHMS)}")
        s.add_argument("--N", type=int)
        s.add_argument("--out", help="summary CSV path (default stdout)")
        if name == "deconv-bench":
            s.add_argument("--trials-csv", help="per-trial CSV path")
            s.add_argument("--json", help="full JSON report path")
            s.add_argument("--timing", action="store_true", help="include runtimes in the JSON report")
        else:
            s.add_argument("--lambdas", required=True, help="comma-separated lambda grid")
        s.set_defaults(func=func)

    s = sub.add_parser("denoise-demo", help="elementwise threshold denoising with an identity operator")
    s.add_argument("--signal", help="clean signal CSV (default: built-in spike signal)")
    s.add_argument("--sigma", type=float, default=0.4)
    s.add_argument("--kind", default="atan", choices=["soft", "abs", "hard", "log", "atan"])
    s.add_argument("--T", type=float)
    s.add_argument("--a", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--signal-out", help="CSV path for clean/noisy/denoised columns")
    s.add_argument("--out")
    s.set_defaults(func=cmd_denoise)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (CliError, ValueError, RuntimeError, OSError, KeyError, TypeError) as exc:
        _fail(type(exc).__name__, exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
