"""Command-line front end.

Exit codes: 0 success (including findings such as alpha_hat >= 1), 1 usage
error, 2 infeasible input or violated precondition, 3 numeric tolerance
failure. Relative ``--output`` paths are resolved under
``$HYPERCOUPLE_OUTPUT_DIR`` when it is set; ``-`` reads input from stdin.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import analytics, chains, coupling, exact
from .hypergraph import (
    Hypergraph,
    HypergraphFormatError,
    complete_graph,
    cycle_graph,
    gen_blowup,
    gen_frozen,
    gen_random_uniform,
    parse_hypergraph,
    path_graph,
    serialize,
    validate,
)

OUTPUT_DIR_ENV = "HYPERCOUPLE_OUTPUT_DIR"

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- helpers ----------------------------------------------------------------------


def _number(text: str):
    """Parse ints and fractions exactly, everything else as float."""
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    if "/" in text:
        return Fraction(text)
    return float(text)


def _list(conv):
    def parse(text: str):
        try:
            return [conv(t) for t in text.split(",") if t.strip()]
        except (ValueError, ZeroDivisionError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return parse


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text()


def _load(path: str) -> Hypergraph:
    return parse_hypergraph(_read_text(path))


def _resolve_output(path: str | None) -> Path | None:
    if path is None or path == "-":
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _emit(text: str, path: str | None):
    out = _resolve_output(path)
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _dumps(obj) -> str:
    return json.dumps(obj, default=_jsonable, sort_keys=True, indent=2) + "\n"


def _config(args) -> dict:
    skip = {"func", "output", "format"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}


def _rows_csv(rows: list[dict], config: dict | None = None) -> str:
    buf = io.StringIO()
    if config is not None:
        buf.write(f"# config: {json.dumps(config, default=_jsonable, sort_keys=True)}\n")
    keys: list[str] = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _cell(r.get(k)) for k in keys})
    return buf.getvalue()


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (list, dict)):
        return json.dumps(v, default=_jsonable, sort_keys=True)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _report(args, payload: dict, rows: list[dict] | None = None):
    config = _config(args)
    if getattr(args, "format", "json") == "csv":
        _emit(_rows_csv(rows if rows is not None else [payload], config), args.output)
    else:
        _emit(_dumps({"config": config, **payload}), args.output)


def _seed(args) -> int:
    if args.seed is None:
        args.seed = int(np.random.SeedSequence().entropy % (2**63))
    return args.seed


def _params(args) -> chains.ChainParams:
    if args.kind == "indset":
        return chains.ChainParams.indset(args.lam)
    if args.q is None:
        raise UsageError("--q is required for the colouring chain")
    return chains.ChainParams.colouring(args.q)


# -- gen --------------------------------------------------------------------------


def cmd_gen(args) -> int:
    shortfall = None
    if args.generator == "frozen":
        H = gen_frozen(args.q, args.m)
    elif args.generator == "random":
        _seed(args)
        H = gen_random_uniform(args.n, args.m, args.delta, args.edges, seed=args.seed)
        shortfall = args.edges - len(H.edges)
    elif args.generator == "blowup":
        H, k = gen_blowup(_load(args.graph), args.m)
    else:
        make = {"complete": complete_graph, "path": path_graph, "cycle": cycle_graph}[args.shape]
        H = make(args.n)
    _emit(serialize(H), args.output)
    report = validate(H).to_dict()
    if shortfall is not None:
        report["edge_shortfall"] = shortfall
        report["seed"] = args.seed
    sys.stderr.write(json.dumps(report, sort_keys=True) + "\n")
    return EXIT_OK


# -- couple -----------------------------------------------------------------------


def cmd_couple(args) -> int:
    if args.replicates < 1:
        raise UsageError("--replicates must be at least 1")
    H = _load(args.input)
    params = _params(args)
    seed = _seed(args)
    policy = args.w if args.w is not None else args.policy
    stats = coupling.stopping_experiment(
        H, params, policy, args.replicates, seed=seed, t_max=args.t_max, jobs=args.jobs
    )
    summary = stats.summary()
    summary["kind"] = params.kind.value
    summary["max_degree"] = H.max_degree
    summary["n"] = H.n
    summary["one_over_n"] = 1.0 / H.n
    if params.kind is chains.Kind.INDSET:
        m = H.min_edge_size
        bound = analytics.indset_alpha_bound(m, params.lam, H.max_degree)
        summary["alpha_bound_2_delta_p1"] = float(bound.value)
    if args.format == "csv":
        _emit(f"# config: {json.dumps(_config(args), default=_jsonable, sort_keys=True)}\n" + stats.to_csv(), args.output)
    else:
        _emit(_dumps({"config": _config(args), **summary}), args.output)
    return EXIT_OK


# -- bounds ---------------------------------------------------------------------


def _sweep(**lists):
    keys = list(lists)
    for combo in itertools.product(*(lists[k] for k in keys)):
        yield dict(zip(keys, combo))


def cmd_bounds(args) -> int:
    rows: list[dict] = []
    failed = False
    what = args.what

    if what == "edge-process":
        for row in _sweep(m=args.m, lam=args.lam):
            try:
                if args.method == "solve":
                    table = analytics.edge_process_solve(row["m"], row["lam"])
                else:
                    table = analytics.edge_process_table(row["m"], row["lam"])
                for k, pk in enumerate(table.p, start=1):
                    rows.append({"m": row["m"], "lambda": row["lam"], "k": k, "p_k": pk, "p_k_float": float(pk)})
            except ValueError as exc:
                failed = True
                rows.append({"m": row["m"], "lambda": row["lam"], "error": str(exc)})
    elif what == "alpha":
        for row in _sweep(m=args.m, lam=args.lam, delta=args.delta):
            try:
                b = analytics.indset_alpha_bound(row["m"], row["lam"], row["delta"])
                rows.append({"m": row["m"], "lambda": row["lam"], "delta": row["delta"],
                             "two_delta_p1": b.value, "two_delta_p1_float": float(b.value), "rapid": b.rapid})
            except ValueError as exc:
                failed = True
                rows.append({**row, "error": str(exc)})
    elif what == "tau":
        rows, failed = _tau_rows(args)
    elif what == "beta-star":
        for method in args.method_list:
            rep = analytics.beta_star(method)
            rows.append(rep.to_dict())
    elif what == "integral":
        for row in _sweep(a=args.a, b=args.b, upper=args.upper):
            res = analytics.success_integral(row["a"], row["b"], row["upper"], tol=args.tol)
            rows.append({**row, "value": res.value, "abserr": res.abserr})
    elif what == "constants":
        for label, r in analytics.threshold_constants(args.ratio, args.upper[0]).items():
            rows.append({"constants": label, **r})
    elif what == "phi":
        for row in _sweep(d=args.d, t=args.t, q=args.q, delta=args.delta, M=args.M):
            try:
                val = analytics.phi(row["d"], row["t"], row["q"], row["delta"], row["M"])
                rows.append({**row, "phi": val, "phi1_pow_d": analytics.phi(1, row["t"], row["q"], row["delta"], row["M"]) ** row["d"]})
            except (ValueError, ZeroDivisionError) as exc:
                failed = True
                rows.append({**row, "error": str(exc)})

    _report(args, {"what": what, "rows": rows}, rows)
    return EXIT_INFEASIBLE if failed else EXIT_OK


def _tau_rows(args):
    rows, failed = [], False
    bound = args.bound
    try:
        if bound == "stopping":
            for row in _sweep(p=args.p, alpha=args.alpha, d1=args.d1, d2=args.d2, eps=args.eps):
                try:
                    rows.append(analytics.stopping_time_report(**row).to_dict())
                except ValueError as exc:
                    failed = True
                    rows.append({**row, "error": str(exc)})
        elif bound == "indset":
            for row in _sweep(n=args.n, lam=args.lam, delta=args.delta, eps=args.eps, m=args.m or [None]):
                try:
                    rep = analytics.indset_mixing_bound(row["n"], row["lam"], row["delta"], row["eps"], args.variant, row["m"])
                    rows.append(rep.to_dict())
                except ValueError as exc:
                    failed = True
                    rows.append({**row, "variant": args.variant, "error": str(exc)})
        else:
            for row in _sweep(n=args.n, q=args.q, delta=args.delta, m=args.m, eps=args.eps):
                try:
                    rows.append(analytics.colouring_path_bound(row["n"], row["q"], row["delta"], row["m"], row["eps"]).to_dict())
                except ValueError as exc:
                    failed = True
                    rows.append({**row, "error": str(exc)})
    except TypeError as exc:
        raise UsageError(f"missing parameter for the {bound} bound: {exc}") from None
    return rows, failed


# -- count, tv, sample, gamble -----------------------------------------------------


def cmd_count(args) -> int:
    what = args.what
    if what == "indsets":
        H = _load(args.input)
        prof = exact.count_independent_sets(H)
        payload = prof.to_dict(args.lam)
    elif what == "colourings":
        H = _load(args.input)
        payload = {"q": args.q, "count": exact.count_colourings(H, args.q)}
    elif what == "hardcore":
        G = _load(args.input)
        prof = exact.count_independent_sets(G)
        if not G.is_graph:
            raise ValueError("hard-core partition function needs a graph")
        payload = prof.to_dict(args.lam)
    elif what == "blowup":
        payload = exact.blowup_identity_check(_load(args.input), args.m).to_dict()
    elif what == "edge-covers":
        r = exact.edge_cover_count(args.m, args.mode)
        payload = {"m": r.m, "mode": args.mode, "M_m": r.covers, "fixed_vertex_uncovered": r.fixed_uncovered}
    else:
        r = exact.weak_edge_colouring_count(args.m, args.q, args.mode)
        payload = {"m": r.m, "q": r.q, "mode": args.mode, "M_m": r.weak, "M_prime_m": r.fixed_mono}
    _report(args, payload)
    return EXIT_OK


def cmd_tv(args) -> int:
    H = _load(args.input)
    params = _params(args)
    seed = _seed(args)
    rep = exact.stationary_tv(
        H, params, burn_in=args.burn_in, samples=args.samples, stride=args.stride, seed=seed, chains=args.chains
    )
    payload = rep.to_dict()
    if rep.support_size > 64:
        payload.pop("exact")
        payload.pop("empirical")
    payload["seed"] = seed
    _report(args, payload)
    return EXIT_OK


def cmd_sample(args) -> int:
    H = _load(args.input)
    params = _params(args)
    seed = _seed(args)
    X0 = chains.initial_state(H, params, seed)
    traj = chains.run_chain(H, params, X0, args.t, seed=seed, stride=args.stride)
    payload = traj.to_dict()
    payload["feasible"] = (
        chains.is_independent(H, traj.final_state)
        if params.kind is chains.Kind.INDSET
        else chains.is_proper(H, traj.final_state, params.q)
    )
    _report(args, payload)
    return EXIT_OK


def cmd_gamble(args) -> int:
    if args.replicates < 1:
        raise UsageError("--replicates must be at least 1")
    seed = _seed(args)
    tau = analytics.gambler_horizon(args.p, args.alpha, args.d1, args.d2, args.eps)
    t_max = args.t_max if args.t_max is not None else tau
    gp = coupling.GamblerParams(args.p, args.alpha, args.d2, t_max=t_max, replicates=args.replicates)
    res = coupling.gambler_game(gp, seed=seed)
    rows = [{"t": t, "mean_N": float(res.mean[t]), "se": float(res.se[t])} for t in range(t_max + 1)]
    payload = {"tau": tau, "target": args.eps / args.d1, "rows": rows}
    if tau <= t_max:
        payload["mean_N_at_tau"] = float(res.mean[tau])
    _report(args, payload, rows)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def _add_output(p):
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", "-o", help="output path (default stdout)")


def _add_chain(p):
    p.add_argument("--input", "-i", required=True, help="hypergraph file, or - for stdin")
    p.add_argument("--kind", choices=("indset", "colouring"), required=True)
    p.add_argument("--lambda", dest="lam", type=_number, default=1)
    p.add_argument("--q", type=int)
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hypercouple", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate a hypergraph file")
    gsub = gen.add_subparsers(dest="generator", required=True, parser_class=_Parser)
    g = gsub.add_parser("frozen")
    g.add_argument("--q", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g = gsub.add_parser("random")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--delta", type=int, required=True)
    g.add_argument("--edges", type=int, required=True)
    g.add_argument("--seed", type=int)
    g = gsub.add_parser("blowup")
    g.add_argument("--graph", required=True)
    g.add_argument("--m", type=int, required=True)
    g = gsub.add_parser("graph")
    g.add_argument("--shape", choices=("complete", "path", "cycle"), required=True)
    g.add_argument("--n", type=int, required=True)
    for g in gsub.choices.values():
        g.add_argument("--output", "-o")
        g.set_defaults(func=cmd_gen)

    p = sub.add_parser("couple", help="stopping-time coupling experiment")
    _add_chain(p)
    p.add_argument("--policy", choices=("adversarial", "random"), default="adversarial")
    p.add_argument("--w", type=int, help="fixed change vertex (overrides --policy)")
    p.add_argument("--replicates", type=int, default=10_000)
    p.add_argument("--t-max", type=int)
    p.add_argument("--jobs", type=int, default=1)
    _add_output(p)
    p.set_defaults(func=cmd_couple)

    b = sub.add_parser("bounds", help="closed-form calculators")
    bsub = b.add_subparsers(dest="what", required=True, parser_class=_Parser)
    x = bsub.add_parser("edge-process")
    x.add_argument("--m", type=_list(int), required=True)
    x.add_argument("--lambda", dest="lam", type=_list(_number), default=[1])
    x.add_argument("--method", choices=("closed", "solve"), default="closed")
    x = bsub.add_parser("alpha")
    x.add_argument("--m", type=_list(int), required=True)
    x.add_argument("--lambda", dest="lam", type=_list(_number), default=[1])
    x.add_argument("--delta", type=_list(int), required=True)
    x = bsub.add_parser("tau")
    x.add_argument("--bound", choices=("stopping", "indset", "colouring"), required=True)
    x.add_argument("--variant", choices=analytics.INDSET_VARIANTS, default="growth")
    for name in ("p", "alpha", "d1", "d2", "eps"):
        x.add_argument(f"--{name}", type=_list(float))
    x.add_argument("--n", type=_list(int))
    x.add_argument("--lambda", dest="lam", type=_list(_number))
    x.add_argument("--delta", type=_list(int))
    x.add_argument("--q", type=_list(int))
    x.add_argument("--m", type=_list(int))
    x = bsub.add_parser("beta-star")
    x.add_argument("--method", dest="method_list", type=_list(str), default=["integral", "series"])
    x = bsub.add_parser("integral")
    x.add_argument("--a", type=_list(float), required=True)
    x.add_argument("--b", type=_list(float), required=True)
    x.add_argument("--upper", type=_list(float), default=[math.inf])
    x.add_argument("--tol", type=float, default=1e-10)
    x = bsub.add_parser("constants")
    x.add_argument("--ratio", type=float, default=1.65)
    x.add_argument("--upper", type=_list(float), default=[20.0])
    x = bsub.add_parser("phi")
    x.add_argument("--d", type=_list(float), required=True)
    x.add_argument("--t", type=_list(float), required=True)
    x.add_argument("--q", type=_list(float), required=True)
    x.add_argument("--delta", type=_list(float), required=True)
    x.add_argument("--M", type=_list(float), required=True)
    for x in bsub.choices.values():
        _add_output(x)
        x.set_defaults(func=cmd_bounds)

    c = sub.add_parser("count", help="exact enumeration oracles")
    csub = c.add_subparsers(dest="what", required=True, parser_class=_Parser)
    x = csub.add_parser("indsets")
    x.add_argument("--input", "-i", required=True)
    x.add_argument("--lambda", dest="lam", type=_number)
    x = csub.add_parser("colourings")
    x.add_argument("--input", "-i", required=True)
    x.add_argument("--q", type=int, required=True)
    x = csub.add_parser("hardcore")
    x.add_argument("--input", "-i", required=True)
    x.add_argument("--lambda", dest="lam", type=_number, default=1)
    x = csub.add_parser("blowup")
    x.add_argument("--input", "-i", required=True, help="graph file")
    x.add_argument("--m", type=int, required=True)
    x = csub.add_parser("edge-covers")
    x.add_argument("--m", type=int, required=True)
    x.add_argument("--mode", choices=("formula", "brute"), default="formula")
    x = csub.add_parser("weak-colourings")
    x.add_argument("--m", type=int, required=True)
    x.add_argument("--q", type=int, required=True)
    x.add_argument("--mode", choices=("formula", "brute"), default="formula")
    for x in csub.choices.values():
        _add_output(x)
        x.set_defaults(func=cmd_count)

    p = sub.add_parser("tv", help="total variation of chain samples against the exact law")
    _add_chain(p)
    p.add_argument("--samples", type=int, default=10**6)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--chains", type=int, default=1000)
    _add_output(p)
    p.set_defaults(func=cmd_tv)

    p = sub.add_parser("sample", help="run one chain")
    _add_chain(p)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--stride", type=int)
    _add_output(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("gamble", help="simulate the branching game")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--d1", type=float, default=10)
    p.add_argument("--d2", type=int, default=2)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--replicates", type=int, default=100_000)
    p.add_argument("--t-max", type=int)
    p.add_argument("--seed", type=int)
    _add_output(p)
    p.set_defaults(func=cmd_gamble)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"hypercouple: usage error: {exc}\n")
        return EXIT_USAGE
    except (analytics.QuadratureError, analytics.SeriesConvergenceError) as exc:
        sys.stderr.write(f"hypercouple: numeric tolerance failure: {exc}\n")
        return EXIT_NUMERIC
    except (HypergraphFormatError, chains.InfeasibleStateError, exact.EnumerationLimitError, ValueError, OSError) as exc:
        sys.stderr.write(f"hypercouple: infeasible input: {exc}\n")
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
