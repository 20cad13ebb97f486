"""Command line: ``fedtrans run <config>`` and ``fedtrans describe <config>``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .experiment import describe_config, load_config, run_experiment


def _load(args):
    cfg = load_config(args.config, {"output_dir": args.output_dir, "replications": args.replications})
    if args.seed is not None:
        cfg.root_seed, cfg.seeds = args.seed, None
    cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fedtrans", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (("run", "run an experiment and write reports"),
                       ("describe", "print the resolved configuration")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="JSON experiment config")
        p.add_argument("--output-dir", default=None)
        p.add_argument("--seed", type=int, default=None, help="root seed (replaces any seed list)")
        p.add_argument("--replications", type=int, default=None)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
    except (OSError, ValueError, TypeError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    if args.command == "describe":
        print(json.dumps(describe_config(cfg), indent=2, sort_keys=True))
        return 0
    res = run_experiment(cfg)
    summary = res["summary"]["summary"]
    for method in cfg.methods:
        s = summary.get(method, {})
        auc, mse = s.get("auc", {}), s.get("mse", {})
        print(f"{method:12s} auc={auc.get('mean', float('nan')):.4f} mse={mse.get('mean', float('nan')):.3e} "
              f"failures={s.get('failures', 0)}")
    print(f"reports written to {res['output_dir']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
