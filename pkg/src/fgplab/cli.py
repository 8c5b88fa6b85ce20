"""Command line entry point ``fgplab``.

Exit codes: 0 success, 1 a violation or witness was found, 2 bad input,
3 numeric degeneracy.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import backtest as bt
from .calculus import constant_portfolio, counterexample_portfolio, generated_portfolio, market_portfolio
from .dynamics import Box, cycle_log_value, fernholz_decompose, find_violating_cycle, mcm_fuzz, read_path_csv
from .exceptions import FGPError, NumericDegeneracyError
from .generators import GENERATOR_KINDS, generator_from_spec
from .rearrangement import (
    distribution_from_spec,
    mass_interval,
    two_stock_portfolio,
    verify_1d_optimality,
)
from .transport import load_problem, solve_discrete, write_coupling_tsv

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_DEGENERATE = 0, 1, 2, 3


def _load_json(text):
    """Inline JSON, or the path of a JSON file. Returns (object, base directory)."""
    text = text.strip()
    if text.startswith(("{", "[")):
        return json.loads(text), None
    path = Path(text)
    with open(path) as fh:
        return json.load(fh), path.parent


def portfolio_from_spec(spec):
    """Build ``(PortfolioMap, n)`` from a JSON portfolio description.

    Accepted kinds: any generator kind (the generated portfolio), ``generated``
    with a nested ``generator``, ``market`` (needs ``n``), ``constant`` with
    ``weights``, ``counterexample`` with ``lambda``.
    """
    kind = spec.get("kind")
    if kind in GENERATOR_KINDS or kind == "generated":
        phi = generator_from_spec(spec["generator"] if kind == "generated" else spec)
        return generated_portfolio(phi), phi.n or spec.get("n")
    if kind == "market":
        return market_portfolio(), spec.get("n")
    if kind == "constant":
        w = np.asarray(spec["weights"], dtype=float)
        return constant_portfolio(w), w.size
    if kind == "counterexample":
        return counterexample_portfolio(spec.get("lambda", 0.5)), 3
    raise ValueError(f"unknown portfolio kind {kind!r}")


def _region(args, n):
    if args.region is None:
        if n is None:
            raise ValueError("portfolio spec needs an 'n' entry when no region is given")
        return Box.whole(n)
    spec, _ = _load_json(args.region)
    return Box(spec["lower"], spec["upper"])


def _fmt(x):
    return repr(float(x))


def cmd_backtest(args):
    if args.prices is None:
        series = bt.load_synthetic()
    else:
        series = bt.load_prices(args.prices)
    config = bt.BacktestConfig.load(args.config) if args.config else bt.BacktestConfig()
    samples = config.q_spec.get("samples_file")
    if samples and args.config and not Path(samples).is_absolute():
        # sample files are named relative to the config file
        config.q_spec = dict(config.q_spec, samples_file=str(Path(args.config).parent / samples))
    report = bt.run_backtest(series, config)
    bt.emit_plot_data(report, args.out)
    print(json.dumps(report.summary(), sort_keys=True))
    return EXIT_OK


def cmd_solve_1d(args):
    p_spec, p_dir = _load_json(args.p)
    q_spec, q_dir = _load_json(args.q)
    P = distribution_from_spec(p_spec, base_dir=p_dir)
    Q = distribution_from_spec(q_spec, base_dir=q_dir)
    if args.grid < 2:
        raise ValueError("--grid must be at least 2")
    curve = two_stock_portfolio(P, Q)
    lo, hi = mass_interval(P, 0.999)
    theta = np.linspace(lo, hi, args.grid)
    shift = np.asarray(curve.transport(theta), dtype=float) * np.ones_like(theta)
    mu1 = 1.0 / (1.0 + np.exp(-theta))
    pi1 = curve.pi1(mu1)
    with open(args.out, "w") as fh:
        fh.write("theta\tF\tmu1\tpi1\n")
        for row in zip(theta, shift, mu1, pi1):
            fh.write("\t".join(_fmt(x) for x in row) + "\n")
    summary = {"grid": args.grid}
    if curve.affine is not None:
        summary.update(slope=curve.affine.slope, intercept=curve.affine.intercept,
                       alpha=curve.affine.alpha, c=curve.affine.c)
    rep = verify_1d_optimality(P, Q, args.verify)
    summary.update(monotone_optimal=rep.monotone_optimal, unique=rep.unique, margin=rep.margin)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK if rep.monotone_optimal else EXIT_VIOLATION


def cmd_solve_discrete(args):
    P, Q, kind = load_problem(args.problem)
    coupling = solve_discrete(P, Q, kind)
    write_coupling_tsv(args.out, coupling)
    print(json.dumps({"cost": kind.value, "value": coupling.value, "entries": len(coupling.entries)}))
    return EXIT_OK


def cmd_mcm_check(args):
    spec, _ = _load_json(args.portfolio)
    pi, n = portfolio_from_spec(spec)
    region = _region(args, n)
    rep = mcm_fuzz(pi, region=region, trials=args.trials, cycle_len=args.max_len,
                   delta=args.delta, seed=args.seed)
    out = {"trials": rep.trials, "min_log_value": rep.min_log_value, "violations": rep.violations,
           "witness": None if rep.witness is None else rep.witness.tolist()}
    print(json.dumps(out))
    return EXIT_OK if rep.ok else EXIT_VIOLATION


def cmd_find_cycle(args):
    spec, _ = _load_json(args.portfolio)
    pi, n = portfolio_from_spec(spec)
    region = _region(args, n)
    cycle = find_violating_cycle(pi, region=region, budget=args.budget, seed=args.seed)
    if cycle is None:
        print(json.dumps({"cycle": None}))
        return EXIT_OK
    print(json.dumps({"cycle": cycle.tolist(), "log_value": cycle_log_value(pi, cycle)}))
    return EXIT_VIOLATION


def cmd_decompose(args):
    spec, _ = _load_json(args.generator)
    phi = generator_from_spec(spec)
    path = read_path_csv(args.path)
    dec = fernholz_decompose(phi, path)
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        out.write("t\tlogV\tphi_term\tdrift\n")
        for t, row in enumerate(zip(dec.logV, dec.phi_term, dec.drift)):
            out.write(f"{t}\t" + "\t".join(_fmt(x) for x in row) + "\n")
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="fgplab", description="Portfolio maps, cycles and transport.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("backtest", help="fit on a training window and backtest a two-stock portfolio")
    p.add_argument("--prices", help="price CSV (date,p1,...,pn); the bundled synthetic series if omitted")
    p.add_argument("--config", help="JSON with train, test, q_spec, initial_caps, sd_denominator")
    p.add_argument("--out", required=True, help="output directory for TSV files")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("solve-1d", help="monotone transport between two laws on the line")
    p.add_argument("--p", required=True, help="source law, inline JSON or file")
    p.add_argument("--q", required=True, help="target law, inline JSON or file")
    p.add_argument("--grid", type=int, default=201, help="number of evaluation points")
    p.add_argument("--verify", type=int, default=6, help="atoms for the brute-force optimality check (<= 8)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve_1d)

    p = sub.add_parser("solve-discrete", help="exact optimal coupling of discrete measures")
    p.add_argument("--problem", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve_discrete)

    for name, helptext in (("mcm-check", "random cycle search for value losses"),
                           ("find-cycle", "local search for a value-losing cycle")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--portfolio", required=True, help="portfolio JSON, inline or file")
        p.add_argument("--region", help='box JSON {"lower": [...], "upper": [...]}')
        p.add_argument("--seed", type=int, default=0)
        if name == "mcm-check":
            p.add_argument("--trials", type=int, default=10000)
            p.add_argument("--delta", type=float)
            p.add_argument("--max-len", type=int, default=6)
            p.set_defaults(func=cmd_mcm_check)
        else:
            p.add_argument("--budget", type=int, default=100000)
            p.set_defaults(func=cmd_find_cycle)

    p = sub.add_parser("decompose", help="split log relative value into generator and drift terms")
    p.add_argument("--generator", required=True)
    p.add_argument("--path", required=True, help="CSV with header w1,...,wn")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decompose)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericDegeneracyError as exc:
        print(f"fgplab: numeric degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (FGPError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"fgplab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
