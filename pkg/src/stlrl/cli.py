"""Command line entry point: ``stlrl {train,evaluate,monitor,inspect}``.

Exit codes: 0 success, 1 validation error, 2 runtime error, 3 the monitored
formula is not satisfied.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, load_config
from .experiment import (
    ArtifactError,
    build_problem,
    build_state_table,
    monitor,
    run_evaluate,
    run_train,
    summary_text,
    write_state_table,
)
from .stl import FormulaError, Signal, WindowError, parse_document
from .tau_mdp import MIXED, StateLimitError

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_UNSATISFIED = 0, 1, 2, 3

log = logging.getLogger("stlrl")


def _cmd_train(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    out = Path(args.out) if args.out else Path("runs") / cfg.name
    problem = build_problem(cfg)
    print(f"tau-MDP: {problem.mdp.n_states} states (tau={cfg.tau}, T={cfg.T}), "
          f"built in {problem.build_seconds:.2f}s")
    results = run_train(cfg, out, problem)
    for kind, res in results.items():
        sat = sum(r["satisfied"] for r in res.log[-50:])
        print(f"{kind}: {len(res.log)} episodes; satisfied in {sat} of the last "
              f"{min(50, len(res.log))}")
    print(f"artifacts written to {out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    reports = run_evaluate(cfg, Path(args.artifacts), args.rollouts)
    for rep in reports.values():
        print(summary_text(rep))
        print()
    return EXIT_OK


def _cmd_monitor(args) -> int:
    aliases = load_config(args.config).aliases() if args.config else {}
    sig = Signal.from_csv(Path(args.signal))
    src = Path(args.formula)
    text = src.read_text() if src.is_file() else args.formula
    phi = parse_document(text, sig.dim, aliases=aliases)
    sat, rob = monitor(phi, sig)
    print(f"satisfied: {'true' if sat else 'false'}")
    print(f"robustness: {rob!r}")
    return EXIT_OK if sat else EXIT_UNSATISFIED


def _cmd_inspect(args) -> int:
    cfg = load_config(args.config)
    table = build_state_table(cfg)
    out = Path(args.out) if args.out else Path(f"{cfg.name}_states.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_state_table(table, out)
    counts = table.counts()
    print(f"{table.mdp.n_states} tau-states (tau={cfg.tau}); "
          + ", ".join(f"{k}={v}" for k, v in counts.items()))
    if counts[MIXED]:
        print(f"warning: {counts[MIXED]} MIXED states; the partition does not decide the inner formula",
              file=sys.stderr)
    print(f"state table written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stlrl", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train Q-tables for the configured objectives")
    t.add_argument("--config", required=True, help="config file or bundled name (cs1, cs2)")
    t.add_argument("--seed", type=int, help="override [learning] seed")
    t.add_argument("--out", help="output directory (default runs/<config name>)")
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("evaluate", help="greedy Monte-Carlo evaluation of trained policies")
    e.add_argument("--config", required=True)
    e.add_argument("--artifacts", required=True, help="directory written by train")
    e.add_argument("--rollouts", type=int, help="override [evaluation] rollouts")
    e.set_defaults(func=_cmd_evaluate)

    m = sub.add_parser("monitor", help="check a signal CSV against a formula")
    m.add_argument("--formula", required=True, help="formula text or a formula file")
    m.add_argument("--signal", required=True, help="CSV with header t,x,y,...")
    m.add_argument("--config", help="bind region labels from this config as aliases")
    m.set_defaults(func=_cmd_monitor)

    i = sub.add_parser("inspect", help="dump the tau-state table with classes and distances")
    i.add_argument("--config", required=True)
    i.add_argument("--out", help="CSV path (default <config name>_states.csv)")
    i.set_defaults(func=_cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        # the gamma=1 / constant-alpha warning is expected for the bundled configs
        logging.getLogger("stlrl.qlearning").setLevel(logging.ERROR)
    try:
        return args.func(args)
    except (ConfigError, FormulaError, WindowError, ArtifactError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (StateLimitError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
