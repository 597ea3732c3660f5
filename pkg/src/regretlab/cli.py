"""Command-line entry points: train, eval, report, print-config.

Exit codes: 0 success, 1 user error (bad flags, config, or paths),
2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback

from .config import load_config
from .errors import ConfigError, RegretLabError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regretlab",
                                     description="Regret-aware skill discovery laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run staged training")
    p_train.add_argument("--config", default=None, help="JSON config file (defaults if omitted)")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--mode", choices=("rsd", "uniform-baseline"), default=None)
    p_train.add_argument("--out", default="runs", help="base directory for run folders")
    p_train.add_argument("--name", default=None, help="run folder name prefix")
    p_train.add_argument("--resume", default=None, metavar="RUN_DIR",
                         help="continue from the last checkpoint in RUN_DIR")
    p_train.add_argument("--force", action="store_true",
                         help="resume even if the config hash differs")
    p_train.add_argument("--max-stages", type=int, default=None,
                         help="stop after this many stages (checkpoint stays resumable)")
    p_train.add_argument("--quiet", action="store_true")
    p_train.add_argument("overrides", nargs="*", metavar="key=value")

    p_eval = sub.add_parser("eval", help="evaluate a saved checkpoint")
    p_eval.add_argument("--ckpt", required=True)
    p_eval.add_argument("--what", choices=("coverage", "zeroshot", "all"), default="all")
    p_eval.add_argument("--goal-mode", choices=("rsd", "metra-f", "metra-d"), default="rsd")
    p_eval.add_argument("--out", default=None, help="output directory (default: run's eval/)")

    p_report = sub.add_parser("report", help="render figures for a run directory")
    p_report.add_argument("--run-dir", required=True)
    p_report.add_argument("--ckpt", default=None, help="also render a trajectory map from this checkpoint")
    p_report.add_argument("--dpi", type=int, default=120)

    p_print = sub.add_parser("print-config", help="print the resolved configuration")
    p_print.add_argument("--config", default=None)
    p_print.add_argument("overrides", nargs="*", metavar="key=value")
    return parser


def _resolve_config(args) -> "RunConfig":
    overrides = list(getattr(args, "overrides", []))
    cfg = load_config(args.config, overrides)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "mode", None) is not None:
        cfg.mode = args.mode
    cfg.validate()
    return cfg


def cmd_train(args) -> int:
    from . import runner

    log = None if args.quiet else runner.stderr_log
    if args.resume:
        run_dir = args.resume
        with open(f"{run_dir}/config.json") as fh:
            doc = json.load(fh)
        from .config import from_dict

        cfg = from_dict(doc, source="config.json")
        if args.seed is not None:
            cfg.seed = args.seed
        runner.train_run(cfg, run_dir, max_stages=args.max_stages, resume=True,
                         force=args.force, log=log)
    else:
        cfg = _resolve_config(args)
        run_dir = runner.create_run_dir(cfg, args.out, args.name)
        if log:
            log(f"run directory: {run_dir}")
        runner.train_run(cfg, run_dir, max_stages=args.max_stages, log=log)
    print(run_dir)
    return 0


def cmd_eval(args) -> int:
    from . import runner

    results = runner.eval_checkpoint(args.ckpt, what=args.what, goal_mode=args.goal_mode,
                                     out_dir=args.out)
    print(json.dumps({k: v for k, v in results.items() if k in ("coverage", "zeroshot", "json_path", "csv_path")},
                     indent=2))
    return 0


def cmd_report(args) -> int:
    from . import figures

    paths = figures.render_run_report(args.run_dir, ckpt_path=args.ckpt, dpi=args.dpi)
    for p in paths:
        print(p)
    return 0


def cmd_print_config(args) -> int:
    cfg = _resolve_config(args)
    print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "report": cmd_report,
    "print-config": cmd_print_config,
}


def main(argv: list | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RegretLabError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
