"""Command line entry point: ``griffith-beam <experiment> --config <path>``."""

from __future__ import annotations

import argparse
import logging
import sys

from .harness import KINDS, load_config, run_experiment


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="griffith-beam", description="Thin-beam fracture experiments.")
    ap.add_argument("experiment", choices=KINDS)
    ap.add_argument("--config", required=True, help="TOML configuration file")
    ap.add_argument("--out", default=None, help="output directory (overrides experiment.out)")
    ap.add_argument("--seed", type=int, default=None, help="RNG seed for solver restarts")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, kind=args.experiment, seed=args.seed, out=args.out)
        result = run_experiment(cfg, cfg.out)
    except Exception as exc:  # noqa: BLE001 - any failure maps to exit code 1
        logging.getLogger("griffith_beam").error("%s: %s", type(exc).__name__, exc)
        return 1
    for name, ok in result.checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"{'PASS' if result.passed else 'FAIL'}  {cfg.kind} -> {cfg.out} (config {cfg.hash})")
    return 0 if result.passed else 2


if __name__ == "__main__":
    sys.exit(main())
