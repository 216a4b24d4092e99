"""Command line driver.

Exit status: 0 when every check passes, 1 when a check fails (the failing
checks are listed on stderr), 2 for configuration or usage errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, bundled_configs, load_config
from .pipeline import SCHEMA_VERSION, Run, StepError, write_report
from .verify import mutation, verify_suite

DEFAULT_CONFIG = {"build": "s3_constant_twist", "energy": "s3_constant_twist",
                  "twist": "s3_constant_twist", "dual": "s3_constant_twist",
                  "run": "s3_constant_twist", "lightcone": "h3_strip_lightcone"}


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help=f"TOML config file or bundled name ({', '.join(bundled_configs())})")
    common.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="override solution.seed")

    p = argparse.ArgumentParser(prog="lambdalab", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    helps = {"build": "build the solution and family, save them as grid containers",
             "energy": "energy report (plus seeded lift-gauge invariance on tori)",
             "twist": "twist the family; energies before/after and deg L",
             "dual": "dual-surface family; energies before/after and deg L",
             "lightcone": "frames, f^, connection checks and Willmore integrands (H3 patch)",
             "run": "run every step listed in the config's pipeline"}
    for name, h in helps.items():
        sub.add_parser(name, parents=[common], help=h)
    v = sub.add_parser("verify", parents=[common], help="run the verification suite")
    v.add_argument("--level", choices=("fast", "full"), default="fast")
    v.add_argument("--mutate", choices=("s3-sign",),
                   help="negative control: deliberately break the build")
    return p


def _fail(rows):
    bad = [r for r in rows if not r.passed]
    for r in bad:
        print(f"FAILED: {r.label} = {r.value:.3g} (tol {r.tol:.3g})", file=sys.stderr)
    return 1 if bad else 0


def _verify(args):
    import contextlib

    ctx = mutation(args.mutate) if args.mutate else contextlib.nullcontext()
    with ctx:
        results = verify_suite(args.level, echo=print)
    report = {"schema_version": SCHEMA_VERSION, "command": "verify", "level": args.level,
              "mutation": args.mutate, "criteria": [r.to_dict() for r in results],
              "pass": all(r.passed for r in results)}
    write_report(report, args.out)
    # wall-clock times vary between runs, so they live outside report.json
    Path(args.out, "timings.json").write_text(
        json.dumps({str(r.number): round(r.seconds, 3) for r in results}, indent=2) + "\n")
    failed = [r for r in results if not r.passed]
    for r in failed:
        print(f"FAILED: criterion {r.number} ({r.title})", file=sys.stderr)
    return 1 if failed else 0


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "verify":
        return _verify(args)
    try:
        cfg = load_config(args.config or DEFAULT_CONFIG[args.command])
        if args.seed is not None:
            cfg.solution["seed"] = args.seed
        steps = cfg.steps if args.command == "run" else [args.command]
        run = Run(cfg, args.out, args.command)
        report = run.execute(steps)
    except (ConfigError, StepError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    path = write_report(report, args.out)
    for r in run.rows:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.label}: {r.value:.3g} (tol {r.tol:.3g})")
    print(f"report written to {path}")
    return _fail(run.rows)


if __name__ == "__main__":
    sys.exit(main())
