"""Command-line entry point: run one game per seed and write CSV traces."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .core import ConfigError, GameConfig
from .harness import ADVERSARIES, ALGOS, run_game, run_suite, validate


def _parse_constants(items):
    consts, adv = {}, {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--constants expects KEY=VAL, got {item!r}")
        try:
            num = float(val)
            value = int(num) if num.is_integer() and "." not in val and "e" not in val.lower() else num
        except ValueError:
            value = val
        if key.startswith("adv."):
            adv[key[4:]] = value
        else:
            consts[key] = value
    return consts, adv


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lowmem-experts", description=__doc__)
    ap.add_argument("--algo", choices=ALGOS, default="mwu")
    ap.add_argument("--adversary", choices=ADVERSARIES, default="iid")
    ap.add_argument("--n", type=int, default=32)
    ap.add_argument("--T", type=int, default=1024)
    ap.add_argument("--epsilon", type=float)
    ap.add_argument("--space-budget", type=int)
    ap.add_argument("--groups", type=int)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds from --seed")
    ap.add_argument("--mode", choices=("desk", "paper"), default="desk")
    ap.add_argument("--constants", nargs="*", metavar="KEY=VAL",
                    help="constant overrides; prefix adv. for adversary parameters")
    ap.add_argument("--out", type=Path, help="CSV path (one seed) or directory (several seeds)")
    ap.add_argument("--trace-stride", type=int, default=1)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        consts, adv = _parse_constants(args.constants)
        if args.trace_stride < 1 or args.seeds < 1:
            raise ConfigError("--trace-stride and --seeds must be positive")
        configs = [validate(GameConfig(
            n=args.n, T=args.T, algo=args.algo, adversary=args.adversary, epsilon=args.epsilon,
            space_budget=args.space_budget, groups=args.groups, seed=args.seed + k, mode=args.mode,
            constants=dict(consts), adversary_params=dict(adv))) for k in range(args.seeds)]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if len(configs) == 1:
        trace = run_game(configs[0])
        if args.out is None:
            trace.to_csv(sys.stdout, args.trace_stride)
        else:
            with open(args.out, "w", newline="\n") as fh:
                trace.to_csv(fh, args.trace_stride)
        return 0

    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        for cfg in configs:
            trace = run_game(cfg)
            with open(args.out / f"seed{cfg.seed}.csv", "w", newline="\n") as fh:
                trace.to_csv(fh, args.trace_stride)
    for row in run_suite(configs):
        print(json.dumps(row))
    return 0


if __name__ == "__main__":
    sys.exit(main())
