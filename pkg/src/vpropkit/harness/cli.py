"""Command line: ``vpropkit fit | plot | oracle``."""

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from ..errors import VpropError
from .config import load_config
from .oracles import SUITES, run_suite
from .plot import METRICS, render_svg_plot
from .runner import run_experiment
from .trace import read_trace_csv, write_trace_csv


def _build_parser():
    p = argparse.ArgumentParser(prog="vpropkit", description="Gaussian variational optimizers and experiment harness")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="run the algorithms of a config and write a trace CSV")
    fit.add_argument("--config", required=True, help="TOML file, or the name of a shipped config")
    fit.add_argument("--out", help="output directory (overrides the config)")
    fit.add_argument("--seed", type=int, help="run this single seed (overrides the config)")
    fit.add_argument("--passes", type=int, help="number of data passes (overrides the config)")
    fit.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    fit.add_argument("--plot", action="store_true", help="also render ELBO and log-loss SVGs")

    plot = sub.add_parser("plot", help="render a trace CSV as an SVG")
    plot.add_argument("--trace", required=True)
    plot.add_argument("--metric", required=True, choices=sorted(METRICS))
    plot.add_argument("--out", required=True)

    orc = sub.add_parser("oracle", help="print brute-force reference values")
    orc.add_argument("--suite", required=True, choices=["all", *SUITES])
    orc.add_argument("--seed", type=int, default=0)
    return p


def _fit(args):
    cfg = load_config(args.config)
    overrides = {}
    if args.out is not None:
        overrides["output"] = args.out
    if args.seed is not None:
        if args.seed < 0:
            raise ValueError("--seed must be >= 0")
        overrides["seeds"] = (args.seed,)
    if args.passes is not None:
        if args.passes < 1:
            raise ValueError("--passes must be >= 1")
        overrides["passes"] = args.passes
    cfg = dataclasses.replace(cfg, **overrides)
    records = run_experiment(cfg, jobs=args.jobs)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    path = write_trace_csv(records, out / f"{cfg.name}.csv")
    for r in records:
        if r.note:
            print(f"warning: {r.run_id}: {r.note}", file=sys.stderr)
    print(path)
    if args.plot:
        for metric in METRICS:
            try:
                print(render_svg_plot(records, metric, out / f"{cfg.name}_{metric}.svg"))
            except ValueError as err:
                print(f"warning: no {metric} plot: {err}", file=sys.stderr)
    return 0


def _plot(args):
    records = read_trace_csv(args.trace)
    print(render_svg_plot(records, args.metric, args.out))
    return 0


def _oracle(args):
    results = run_suite(args.suite, args.seed)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handler = {"fit": _fit, "plot": _plot, "oracle": _oracle}[args.command]
    try:
        return handler(args)
    except (VpropError, ValueError, KeyError, OSError) as err:
        msg = str(err).strip().splitlines()[0] if str(err).strip() else type(err).__name__
        print(f"vpropkit {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
