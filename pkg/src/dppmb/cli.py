"""Command-line entry point: run, sample, metrics, plot, make-prior."""

from __future__ import annotations

import argparse
import csv
import logging
import sys

from . import streams
from .agent import prior_corpus, train_prior
from .dpp import prepare, sample
from .harness import (
    BUDGET_MODES,
    PROFILES,
    VARIANTS,
    ConfigError,
    load_config,
    make_config,
    metrics_from_memory,
    metrics_row,
    parse_overrides,
    run_experiment,
)
from .kernels import read_kernel
from .oracle import OracleSpec, generate_spec
from .shaping import SHAPING_MODES, read_memory_csv

log = logging.getLogger("dppmb")


class UsageError(Exception):
    pass


def _key_value(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key.strip(), value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dppmb", description="Diverse mini-batch selection experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment and write a run directory")
    r.add_argument("--config", help="key = value config file")
    r.add_argument("--profile", choices=sorted(PROFILES), default="full")
    r.add_argument("--seed", type=int)
    r.add_argument("--variant", choices=VARIANTS)
    r.add_argument("--shaping", choices=SHAPING_MODES)
    r.add_argument("--budget-mode", choices=BUDGET_MODES)
    r.add_argument("--out", help="run directory (overrides out_dir)")
    r.add_argument("--prior-file", help="policy file to use as prior and initial policy")
    r.add_argument("--oracle-spec", help="oracle spec file")
    r.add_argument("--set", type=_key_value, action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key")

    s = sub.add_parser("sample", help="draw k-DPP subsets from a kernel dump")
    s.add_argument("--in", dest="inp", required=True, help="kernel file: N then N*N reals")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--draws", type=int, default=1)
    s.add_argument("--out", help="output file (default stdout)")

    m = sub.add_parser("metrics", help="recompute diversity metrics from a memory CSV")
    m.add_argument("--in", dest="inp", required=True)
    m.add_argument("--threshold-d", type=float, default=0.7)
    m.add_argument("--every", type=int, default=250)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--last-step", type=int, help="final step to report (default: last memory step)")
    m.add_argument("--reseeds", type=int, default=1)
    m.add_argument("--out", help="output CSV (default stdout)")

    pl = sub.add_parser("plot", help="render CSV columns as an SVG line chart")
    pl.add_argument("--in", dest="inp", action="append", required=True, help="CSV file; repeat for series")
    pl.add_argument("--out", required=True)
    pl.add_argument("--x", default="step")
    pl.add_argument("--y", help="column to plot (default: inferred from the first CSV)")
    pl.add_argument("--label", action="append", default=[], help="series label per --in")

    mp = sub.add_parser("make-prior", help="train a count prior on the synthetic corpus")
    mp.add_argument("--out", required=True, help="policy file to write")
    mp.add_argument("--oracle-spec", help="oracle spec file (default: built-in spec)")
    mp.add_argument("--spec-seed", type=int, help="generate a fresh oracle spec from this seed")
    mp.add_argument("--spec-out", help="also write the oracle spec used")
    mp.add_argument("--corpus-size", type=int, default=2000)
    mp.add_argument("--smoothing", type=float, default=0.01)
    mp.add_argument("--context", type=int, default=2)
    return p


def _cmd_run(args) -> int:
    overrides = parse_overrides(dict(args.set))
    for flag, key in (("seed", "seed"), ("variant", "variant"), ("shaping", "shaping"),
                      ("budget_mode", "budget_mode"), ("out", "out_dir"),
                      ("prior_file", "prior_file"), ("oracle_spec", "oracle_spec")):
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
    if args.config:
        config = load_config(args.config, args.profile, **overrides)
    else:
        config = make_config(args.profile, **overrides)
    out = run_experiment(config)
    print(out)
    return 0


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def _cmd_sample(args) -> int:
    if args.draws < 1:
        raise UsageError("--draws must be positive")
    sampler = prepare(read_kernel(args.inp), args.k)
    fh = _open_out(args.out)
    try:
        for d in range(args.draws):
            subset = sample(sampler, streams.stream(args.seed, streams.SELECTION, d))
            fh.write(" ".join(str(i) for i in subset) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def _cmd_metrics(args) -> int:
    if args.every < 1:
        raise UsageError("--every must be positive")
    entries = read_memory_csv(args.inp)
    reports = metrics_from_memory(entries, args.threshold_d, args.every, args.seed,
                                  args.last_step, args.reseeds)
    fh = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "n_actives", "n_scaffolds", "diverse_actives", "picker_seed"])
        w.writerows(metrics_row(rep, args.seed) for rep in reports)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def _cmd_plot(args) -> int:
    from .plotting import plot_csvs

    plot_csvs(args.inp, args.out, x=args.x, y=args.y, labels=args.label or None)
    return 0


def _cmd_make_prior(args) -> int:
    if args.oracle_spec and args.spec_seed is not None:
        raise UsageError("--oracle-spec and --spec-seed are mutually exclusive")
    if args.oracle_spec:
        spec = OracleSpec.load(args.oracle_spec)
    elif args.spec_seed is not None:
        spec = generate_spec(args.spec_seed)
    else:
        spec = OracleSpec.default()
    prior = train_prior(prior_corpus(spec, n=args.corpus_size), args.smoothing, args.context, spec.alphabet)
    prior.save(args.out)
    if args.spec_out:
        spec.save(args.spec_out)
    return 0


COMMANDS = {
    "run": _cmd_run,
    "sample": _cmd_sample,
    "metrics": _cmd_metrics,
    "plot": _cmd_plot,
    "make-prior": _cmd_make_prior,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"dppmb {args.command}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"dppmb {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
