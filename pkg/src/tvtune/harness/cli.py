"""tvtune command line.

    tvtune train --config run.cfg --seed 0 --out runs/a
    tvtune sweep --model runs/a/actor.txt --grid mu=0.4:0.1:0.7 --out sweep.csv
    tvtune generalize --model runs/a/actor.txt --out gen/
    tvtune ga-tune --scenario mu=0.4,v0=100 --out ga.csv
    tvtune eval --model runs/a/actor.txt --scenario mu=0.5,v0=110 --out trace.csv

Set TVTUNE_LOG (DEBUG, INFO, WARNING, ...) to change log verbosity.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from ..errors import ConfigError, TrainingAborted, TvtuneError, UsageError
from . import commands
from .config import RunConfig, load_config

log = logging.getLogger("tvtune")


def _setup_logging():
    level = os.environ.get("TVTUNE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tvtune", description="Torque-vectoring weight tuning")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value run configuration")
        sp.add_argument("--seed", type=int, help="global seed (overrides run.seed)")

    t = sub.add_parser("train", help="train the DDPG tuner")
    common(t)
    t.add_argument("--out", help="output directory")
    t.add_argument("--episodes", type=int, help="override ddpg.episodes")

    s = sub.add_parser("sweep", help="evaluate tuners over a (mu, v0) grid")
    common(s)
    s.add_argument("--model", help="trained actor file")
    s.add_argument("--grid", action="append", default=[],
                   help="axis=start:step:stop or axis=a,b,c; axes mu and v0 (km/h)")
    s.add_argument("--tuners", default=",".join(commands.TUNERS))
    s.add_argument("--out", help="CSV file (default: stdout)")

    g = sub.add_parser("generalize", help="step steer on mu=0.3 at 80 km/h")
    common(g)
    g.add_argument("--model", help="trained actor file")
    g.add_argument("--tuners", default=",".join(commands.TUNERS))
    g.add_argument("--out", help="output directory (default: summary to stdout)")

    e = sub.add_parser("eval", help="one traced episode on one scenario")
    common(e)
    e.add_argument("--model", help="trained actor file")
    e.add_argument("--tuner", default="ddpg", choices=("ddpg", "manual"))
    e.add_argument("--scenario", default="mu=0.4,v0=100", help="mu=0.4,v0=100")
    e.add_argument("--out", help="trace CSV file (default: stdout)")

    a = sub.add_parser("ga-tune", help="tune constant weights with the genetic algorithm")
    common(a)
    a.add_argument("--scenario", required=True, help="mu=0.4,v0=100")
    a.add_argument("--out", help="CSV file (default: stdout)")
    return p


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "model", None):
        cfg.model = args.model
    if getattr(args, "out", None):
        cfg.out = args.out
    return cfg


def _tuners(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = _run_config(args)
        if args.command == "train":
            commands.cmd_train(cfg, episodes=args.episodes)
        elif args.command == "sweep":
            rows = commands.cmd_sweep(cfg, commands.parse_grid(args.grid),
                                      _tuners(args.tuners), args.out)
            if not args.out:
                sys.stdout.write(commands.csvio.dumps(commands.csvio.SWEEP, rows))
        elif args.command == "generalize":
            rows, _ = commands.cmd_generalize(cfg, _tuners(args.tuners), out_dir=args.out)
            if not args.out:
                sys.stdout.write(commands.csvio.dumps(commands.csvio.GENERALIZE, rows))
        elif args.command == "eval":
            _, rows = commands.cmd_eval(cfg, commands.parse_scenario(args.scenario),
                                        args.tuner, args.out)
            if not args.out:
                sys.stdout.write(commands.csvio.dumps(commands.csvio.TRACE, rows))
        elif args.command == "ga-tune":
            _, rows = commands.cmd_ga_tune(cfg, commands.parse_scenario(args.scenario), args.out)
            if not args.out:
                sys.stdout.write(commands.csvio.dumps(commands.csvio.GA_TRACE, rows))
    except (ConfigError, UsageError) as exc:
        log.error("%s", exc)
        return 2
    except TrainingAborted as exc:
        log.error("training aborted: %s", exc)
        return 3
    except TvtuneError as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
