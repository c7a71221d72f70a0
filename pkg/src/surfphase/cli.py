"""Command line: ``surfphase run|sweep|props|resume``."""

from __future__ import annotations

import os

# single-threaded math libraries keep runs bitwise reproducible
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402

from . import app  # noqa: E402
from .harness import operator_property_harness  # noqa: E402
from .io import ConfigError, parse_config_text, read_config_file  # noqa: E402
from .linsolve import SolverError  # noqa: E402
from .rng import DEFAULT_SEED  # noqa: E402


def _load_config(path: str, overrides: list[str]) -> app.RunConfig:
    values = read_config_file(path)
    values.update(parse_config_text("\n".join(overrides)))
    return app.RunConfig.from_mapping(values)


def _cmd_run(args) -> int:
    cfg = _load_config(args.config, args.set)
    summary = app.execute(cfg, max_steps=args.max_steps)
    state = "stopped" if not summary.completed else "finished"
    print(f"{state} at step {summary.steps} (t={summary.final.time:.6g}); output in {summary.output_dir}")
    return app.EXIT_OK


def _cmd_resume(args) -> int:
    summary = app.resume(args.checkpoint, max_steps=args.max_steps)
    state = "stopped" if not summary.completed else "finished"
    print(f"{state} at step {summary.steps} (t={summary.final.time:.6g}); output in {summary.output_dir}")
    return app.EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config, args.set)
    rows = app.execute_sweep(cfg)
    print(f"{'dt':>12s}  {cfg.kind.value:>12s}  order")
    for r in rows:
        order = "" if r.observed_order is None else f"{r.observed_order:.2f}"
        print(f"{r.dt:12.6g}  {r.error_l2:12.4e}  {order}")
    return app.EXIT_OK


def _cmd_props(args) -> int:
    report = operator_property_harness(sizes=tuple(args.sizes), trials=args.trials, seed=args.seed)
    for line in report.lines():
        print(line)
    return app.EXIT_OK if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="surfphase", description="Binary fluid-surfactant phase-field solver")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, helptext in (("run", _cmd_run, "run a configured experiment"), ("sweep", _cmd_sweep, "time-step convergence study")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="key = value configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        if name == "run":
            p.add_argument("--max-steps", type=int, default=None, help="stop after this many steps")
        p.set_defaults(func=fn)

    p = sub.add_parser("resume", help="continue a run from its checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--max-steps", type=int, default=None)
    p.set_defaults(func=_cmd_resume)

    p = sub.add_parser("props", help="operator symmetry/positivity harness")
    p.add_argument("--sizes", type=int, nargs="+", default=[16, 32])
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=lambda s: int(s, 0), default=DEFAULT_SEED)
    p.set_defaults(func=_cmd_props)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, SolverError, OSError) as exc:
        print(f"surfphase: {type(exc).__name__}: {exc}", file=sys.stderr)
        return app.exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
