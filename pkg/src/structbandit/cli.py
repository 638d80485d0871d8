"""Command line front end.

Four subcommands: `run` executes the experiment described by a config
file and writes the CSV, `lowerbound` prints each instance's regret
constant and rate profile, `validate` runs one named invariant suite,
and `dump-program` prints the assembled conic program dimensions plus a
solve summary for each instance (debugging aid).
"""

import argparse
import sys

import numpy as np

from .harness import (GENERATORS, VALIDATE_SUITES, configure_logging,
                      instance_rates, load_config, run_to_csv, validate)
from .lowerbound import _DualBlocks, lower_bound_dual
from .structures import classify_arms


def _instances(config):
    gen = GENERATORS[config.structure]
    for iseed in config.instance_seeds:
        yield "%s-%d" % (config.structure, iseed), gen(iseed)


def cmd_run(args):
    config = load_config(args.config)
    rows = run_to_csv(config)
    print("wrote %d rows to %s" % (rows, config.output))
    return 0


def cmd_lowerbound(args):
    config = load_config(args.config)
    for name, (spec, P) in _instances(config):
        value, rates = instance_rates(spec, P)
        print("%s  C = %.6g" % (name, value))
        for x, rate in enumerate(rates):
            if rate > 1e-12:
                print("    arm %d  rate %.6g" % (x, rate))
    return 0


def cmd_validate(args):
    failures = 0
    for check, ok, detail in validate(args.suite, seed=args.seed):
        print("%s  %s (%s)" % ("PASS" if ok else "FAIL", check, detail))
        failures += 0 if ok else 1
    return 1 if failures else 0


def cmd_dump_program(args):
    config = load_config(args.config)
    for name, (spec, P) in _instances(config):
        part = classify_arms(spec, P)
        if not part.deceitful:
            print("%s  no deceitful arms, rate program is empty" % (name,))
            continue
        bl = _DualBlocks(spec, P, part)
        print("%s  vars %d  eq rows %d  ineq rows %d  cone triples %d  "
              "groups %d" % (name, bl.n, len(bl.b_eq), len(bl.b_in),
                             len(bl.triples), len(bl.groups)))
        res = lower_bound_dual(spec, P, 1e-4)
        rates = res.rates.rates
        print("    status %s  value %.6g  max rate %.6g"
              % (res.status, res.value, float(np.max(rates))))
    return 0


def main(argv=None):
    configure_logging()
    parser = argparse.ArgumentParser(
        prog="structbandit",
        description="Structured bandit experiments and diagnostics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the configured experiment")
    p.add_argument("config", help="experiment config file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("lowerbound",
                       help="print per-instance regret constants and rates")
    p.add_argument("config", help="experiment config file")
    p.set_defaults(func=cmd_lowerbound)

    p = sub.add_parser("validate", help="run one invariant suite")
    p.add_argument("suite", choices=sorted(VALIDATE_SUITES))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("dump-program",
                       help="print conic program dimensions per instance")
    p.add_argument("config", help="experiment config file")
    p.set_defaults(func=cmd_dump_program)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
