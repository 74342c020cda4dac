"""``lipband`` command line.

    lipband risk --quick --out results/risk
    lipband transfer --config transfer.yaml --threads 4

Exit status is 0 when every check of the experiment passes, 1 when one fails
and 2 on a usage or configuration error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import yaml

from .experiments import EXPERIMENTS, ExperimentConfig, make_config, run

log = logging.getLogger("lipband")


def _threads(arg: int | None) -> int:
    env = os.environ.get("LIPBAND_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise SystemExit(f"LIPBAND_THREADS must be an integer, got {env!r}")
        return max(1, n)
    return max(1, arg or 1)


def _load(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected a mapping at top level")
    doc.pop("name", None)
    return doc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lipband", description="Lipschitz bandit experiments")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="YAML file with ExperimentConfig fields")
    ap.add_argument("--seed", type=int, help="base seed")
    ap.add_argument("--seeds", type=int, help="number of seeds (risk experiment)")
    ap.add_argument("--out", help="output directory (default results/<experiment>)")
    ap.add_argument("--threads", type=int, default=1, help="worker processes; LIPBAND_THREADS overrides")
    ap.add_argument("--quick", action="store_true", help="reduced horizon / seed profile")
    ap.add_argument("--plot", action="store_true", help="also render SVG charts (needs matplotlib)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args) -> ExperimentConfig:
    over = _load(args.config)
    for key in ("seed", "seeds", "out"):
        val = getattr(args, key)
        if val is not None:
            over[key] = val
    over.setdefault("out", str(Path("results") / args.experiment))
    return make_config(args.experiment, over, quick=args.quick)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
    except (ValueError, TypeError, OSError, yaml.YAMLError) as exc:
        print(f"lipband: configuration error: {exc}", file=sys.stderr)
        return 2
    workers = _threads(args.threads)
    log.info("%s: config %s, %d worker(s), output in %s", cfg.name, cfg.hash(), workers, cfg.out)
    res = run(cfg, workers=workers, plot=args.plot)
    for name, (ok, detail) in res.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return 0 if res.passed else 1


if __name__ == "__main__":
    sys.exit(main())
