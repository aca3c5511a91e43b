"""Command-line entry point: ``adaptivefl {run,count-params,selftest}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, parse_config
from .federation import Simulation
from .metrics import emit_metrics
from .pruning import load_shape_spec, param_count, vgg16_shape

log = logging.getLogger("adaptivefl")


def cmd_run(args: argparse.Namespace) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed, train=replace(cfg.train, seed=args.seed))
    out_dir = args.out or cfg.out_dir
    if out_dir is None:
        raise ConfigError("out_dir", "no output directory (set out_dir or pass --out)")
    cfg = replace(cfg, out_dir=str(out_dir))

    sim = Simulation(cfg.scenario, cfg.model, cfg.pool, cfg.train, cfg.seed, cfg.load_dataset())
    records = []
    for _ in range(cfg.scenario.rounds):
        rec = sim.step()
        records.append(rec)
        log.info("round %d  acc_full=%.4f  waste=%.4f", rec.round, rec.acc_full, rec.waste_rate)
    if not records:
        print("0 rounds requested; nothing written")
        return 0
    csv_path, log_path = emit_metrics(records, out_dir)
    (Path(out_dir) / "config.yaml").write_text(cfg.dump())
    last = records[-1]
    print(
        f"{cfg.scenario.strategy}: {len(records)} rounds, acc_full={last.acc_full:.4f} "
        f"acc_avg={last.acc_avg:.4f} waste_rate={last.waste_rate:.4f}"
    )
    print(f"wrote {csv_path} and {log_path}")
    return 0


def cmd_count_params(args: argparse.Namespace) -> int:
    shape = load_shape_spec(args.shape) if args.shape else vgg16_shape()
    full = param_count(shape)
    n = param_count(shape, args.rw, args.start_layer)
    print(f"params={n} full={full} ratio={n / full:.4f}")
    return 0


def cmd_selftest(args: argparse.Namespace) -> int:
    from .selftest import run_selftest

    return 0 if run_selftest() else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptivefl",
        description="Heterogeneous federated learning simulator with width-pruned sub-models.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log every round")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a YAML config")
    run.add_argument("--config", required=True, help="experiment config file (YAML)")
    run.add_argument("--out", help="output directory (overrides out_dir in the config)")
    run.add_argument("--seed", type=int, help="seed (overrides the config's seed)")
    run.set_defaults(func=cmd_run)

    cnt = sub.add_parser("count-params", help="weight count of a pruned layer stack")
    cnt.add_argument("--shape", help="shape file (default: bundled VGG16)")
    cnt.add_argument("--rw", type=float, default=1.0, help="width ratio r_w in (0, 1]")
    cnt.add_argument(
        "--start-layer", type=int, default=None, help="last unpruned layer I (default: all layers)"
    )
    cnt.set_defaults(func=cmd_count_params)

    st = sub.add_parser("selftest", help="run the built-in invariant checks")
    st.set_defaults(func=cmd_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s"
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
