"""Command line entry point: ``omd-lab {run,certify,verify} <config>``."""

from __future__ import annotations

import argparse
import sys

from .errors import OmdLabError
from .experiments import (certificates_csv, certify_experiment, parse_config, run_experiment,
                          verify_experiment)

EXIT_IO = 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="omd-lab",
                                description="Online mirror descent with Bregman regularizers.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run every regularizer arm and write CSV outputs"),
                        ("certify", "print beta, lambda, gamma, R and M per regularizer"),
                        ("verify", "run the per-step inequality checks")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="flat key = value config file")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", help="override output_dir")
        sp.add_argument("--full-scale", action="store_true", default=None,
                        help="use the full-size Poisson problem (m = 1500)")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = parse_config(args.config).with_overrides(
            seed=args.seed, output_dir=args.out, full_scale=args.full_scale)
        if args.command == "run":
            res = run_experiment(cfg)
            print(f"wrote {cfg.output_dir}")
            for name in res.ranking():
                verdicts = res.reports[name].verdicts()
                status = ("PASS" if all(verdicts.values()) else "FAIL") if verdicts else "n/a"
                print(f"{name:<5} final cost {res.curves[name][-1]:.6g}  bounds {status}")
        elif args.command == "certify":
            sys.stdout.write(certificates_csv(certify_experiment(cfg)))
        else:
            results = verify_experiment(cfg)
            for r in results:
                print(r.line())
            failed = sum(not r.passed for r in results)
            print(f"{len(results) - failed} passed, {failed} failed")
            return 1 if failed else 0
    except OmdLabError as exc:
        print(f"omd-lab: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"omd-lab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
