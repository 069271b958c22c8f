"""Command-line front end: ``minmaxnet {train,eval,bench,contraction}``.

Exit codes: 0 success, 1 runtime error, 2 usage error, 3 certification
failed (contraction only).
"""

import argparse
import csv
import itertools
import logging
import os
import sys

import numpy as np

from . import constraints as cons
from . import contraction
from . import trainer as tr
from .dataset import gen_corner, gen_polygon, gen_pyramid, load_csv
from .model import (
    KINDS, MAX, MIN, Network, Neuron, activation_pattern, augment, evaluate, load_network, save_network,
)
from .scenarios import SCENARIOS
from .topology import TopologySchedule, write_events

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_UNCERTIFIED = 0, 1, 2, 3
GENERATORS = ("pyramid", "polygon", "corner8")

log = logging.getLogger("minmaxnet")


class UsageError(Exception):
    pass


def _dataset(args):
    if args.data and args.gen:
        raise UsageError("give either --data or --gen, not both")
    if args.data:
        return load_csv(args.data)
    if args.gen == "pyramid":
        return gen_pyramid()
    if args.gen == "polygon":
        return gen_polygon()
    if args.gen == "corner8":
        return gen_corner(8, args.samples_per_region, seed=args.seed)
    raise UsageError("one of --data or --gen is required")


def _initial_network(args, ds):
    if args.model_in:
        net = load_network(args.model_in)
        if net.input_dim != ds.input_dim:
            raise ValueError(f"model expects {net.input_dim} inputs, data has {ds.input_dim}")
        return net
    kind = args.init_kind or (MAX if args.gen == "corner8" else MIN)
    scale = args.init_scale if args.init_scale is not None else (0.5 if args.gen == "corner8" else 0.0)
    rng = np.random.default_rng(args.seed)
    w = rng.uniform(-scale, scale, size=(1, ds.input_dim + 1)) if scale > 0 else np.zeros((1, ds.input_dim + 1))
    return Network(ds.input_dim, [Neuron(kind, w)])


def _alpha_policy(args):
    if args.alpha_policy:
        return args.alpha_policy
    return "spectral" if getattr(args, "gen", None) == "corner8" else "conservative"


def _out_path(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def cmd_train(args):
    ds = _dataset(args)
    net = _initial_network(args, ds)
    cfg = tr.TrainerConfig(
        alpha_scale=args.alpha_scale, alpha_policy=_alpha_policy(args), max_iters=args.iters,
        cost_tol=args.tol, eps_active=args.eps_active, eps_feasible=args.eps_feasible, seed=args.seed,
    )
    sch = None
    if not args.no_topology:
        sch = TopologySchedule(
            spawn_every=args.spawn_every, plateau_window=args.plateau_window,
            prune_value_tol=args.prune_value_tol, max_basic=args.max_basic,
        )
    st = tr.train(tr.TrainState(net), ds, cfg, sch)
    save_network(st.net, args.model_out or _out_path(args, "model.json"))
    tr.write_cost_trace(st, _out_path(args, "cost_trace.csv"))
    if sch is not None:
        write_events(sch.events, _out_path(args, "events.csv"))
    V = st.cost_trace[-1][1]
    print(f"final V: {V:.6e}")
    print(f"iterations: {st.iter}")
    print(f"basic neurons: {st.net.n_basic} "
          + " ".join(f"{nr.kind}:{nr.n_basic}" for nr in st.net.neurons))
    print(f"converged: {'yes' if st.converged else 'no'}")
    return EXIT_OK


def _parse_grid(spec, dim):
    """``lo:hi:n`` per axis, comma separated; a single axis is reused for all."""
    specs = [s for s in spec.split(",") if s.strip()]
    if not specs:
        raise UsageError("empty grid spec")
    if len(specs) == 1:
        specs = specs * dim
    if len(specs) != dim:
        raise UsageError(f"grid has {len(specs)} axes, model expects {dim}")
    axes = []
    for s in specs:
        try:
            lo, hi, n = s.split(":")
            lo, hi, n = float(lo), float(hi), int(n)
        except ValueError:
            raise UsageError(f"bad grid spec {s!r}, expected lo:hi:n") from None
        if n < 1:
            raise UsageError(f"grid spec {s!r} has no points")
        axes.append(np.linspace(lo, hi, n))
    return np.array(list(itertools.product(*axes)), dtype=np.float64).reshape(-1, dim)


def cmd_eval(args):
    net = load_network(args.model)
    if args.data and args.grid:
        raise UsageError("give either --data or --grid, not both")
    if args.data:
        ds = load_csv(args.data)
        if ds.input_dim != net.input_dim:
            raise ValueError(f"model expects {net.input_dim} inputs, data has {ds.input_dim}")
        X, y = ds.X, ds.y
    elif args.grid is not None:
        X, y = augment(_parse_grid(args.grid, net.input_dim)), None
    else:
        raise UsageError("one of --data or --grid is required")
    y_hat = evaluate(net, X)
    fh = open(args.out, "w", newline="") if args.out != "-" else sys.stdout
    try:
        w = csv.writer(fh)
        head = [f"x{i + 1}" for i in range(net.input_dim)] + ["y_hat"]
        w.writerow(head + (["y", "residual"] if y is not None else []))
        for m in range(len(X)):
            row = [repr(float(v)) for v in X[m, 1:]] + [repr(float(y_hat[m]))]
            if y is not None:
                row += [repr(float(y[m])), repr(float(y_hat[m] - y[m]))]
            w.writerow(row)
    finally:
        if fh is not sys.stdout:
            fh.close()
    if y is not None:
        print(f"V: {tr.cost(net, ds):.6e}", file=sys.stderr if args.out == "-" else sys.stdout)
    return EXIT_OK


def cmd_bench(args):
    fn = SCENARIOS[args.name]
    kw = {}
    if args.iters is not None and args.name in ("polygon", "corner8"):
        kw["max_iters"] = args.iters
    res = fn(**kw)
    for c in res.checks:
        print(c.line())
    print(f"{args.name}: {'PASS' if res.passed else 'FAIL'} ({res.seconds:.2f} s)")
    return EXIT_OK if res.passed else EXIT_RUNTIME


def cmd_contraction(args):
    net = load_network(args.model)
    ds = _dataset(args)
    if ds.input_dim != net.input_dim:
        raise ValueError(f"model expects {net.input_dim} inputs, data has {ds.input_dim}")
    cfg = tr.TrainerConfig(alpha_scale=args.alpha_scale, alpha_policy=_alpha_policy(args))
    alpha = tr.step_weights(net, ds, cfg)
    P = activation_pattern(net, ds.X)
    edges = cons.build_edge_constraints(net, ds.X, P)
    tight = np.flatnonzero(np.abs(edges.values(net.flat())) <= args.eps_active)
    normals = edges.rows(tight) if tight.size else None
    rep = contraction.certify_step(net, ds, P, normals, metric=args.metric, alpha=alpha)
    rep.save(args.out or _out_path(args, "contraction.json"))
    print(rep.to_json())
    return EXIT_OK if rep.contractive else EXIT_UNCERTIFIED


def _add_common(p, data=True):
    if data:
        p.add_argument("--data", help="CSV with header x1,...,xN,y[,alpha]")
        p.add_argument("--gen", choices=GENERATORS, help="built-in benchmark dataset")
        p.add_argument("--samples-per-region", type=int, default=30,
                       help="corner8 samples per dominating-coordinate region")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--alpha-scale", type=float, default=1.0)
    p.add_argument("--alpha-policy", choices=tr.ALPHA_POLICIES, default=None,
                   help="step weights (default: spectral for corner8, else conservative)")
    p.add_argument("--eps-active", type=float, default=cons.EPS_ACTIVE)
    p.add_argument("--eps-feasible", type=float, default=cons.EPS_FEASIBLE)


def build_parser():
    ap = argparse.ArgumentParser(prog="minmaxnet", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log topology events")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network")
    _add_common(p)
    p.add_argument("--model-in")
    p.add_argument("--model-out")
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-9, help="stop when V <= tol")
    p.add_argument("--spawn-every", type=int, default=100)
    p.add_argument("--plateau-window", type=int, default=25)
    p.add_argument("--prune-value-tol", type=float, default=1e-8)
    p.add_argument("--max-basic", type=int, default=64)
    p.add_argument("--no-topology", action="store_true", help="keep the initial structure")
    p.add_argument("--init-kind", choices=KINDS)
    p.add_argument("--init-scale", type=float, help="initial weights uniform in [-s, s]")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on data or a grid")
    p.add_argument("--model", required=True)
    p.add_argument("--data")
    p.add_argument("--grid", metavar="LO:HI:N[,LO:HI:N...]",
                   help="regular grid, e.g. --grid=-2:2:41 (one spec is reused per axis)")
    p.add_argument("--out", default="-", help="predictions CSV (default stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="run a benchmark scenario")
    p.add_argument("name", choices=sorted(SCENARIOS))
    p.add_argument("--iters", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("contraction", help="certify the step at a model")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--metric", choices=contraction.METRICS, default=contraction.IDENTITY)
    p.add_argument("--out")
    p.set_defaults(func=cmd_contraction)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"minmaxnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"minmaxnet: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
