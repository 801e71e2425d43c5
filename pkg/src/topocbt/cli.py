"""Command-line front end.

Subcommands: run, betti, compare, fit, recover.  Invalid input exits
nonzero after printing one machine-parsable ``error: ...`` line on
stderr.  TOPOCBT_LOG sets the logging level (debug/info/warning).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .chain import ChainError
from .engine import TopoCbtEngine
from .harness import compare_protocols, complexity_fit, fit_ops, measure_grid, run_scenario, betti_report
from .scenario import ScenarioError, load_scenario
from .simplicial import read_complex
from .topology import write_tagged
from .wal import WalFormatError, WriteAheadLog


def _setup_logging() -> None:
    level = os.environ.get("TOPOCBT_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _cmd_run(args: argparse.Namespace) -> int:
    scenario, _ = load_scenario(args.scenario)
    report = run_scenario(scenario, args.seed, protocol_override=args.protocol)
    csv_text = report.to_csv()
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    if args.wal:
        report.wal.write(args.wal)
    problems = report.invariant_failures()
    for problem in problems:
        print(f"error: invariant: {problem}", file=sys.stderr)
    return 1 if problems else 0


def _cmd_betti(args: argparse.Namespace) -> int:
    if args.complex:
        complex_ = read_complex(args.complex)
        print("betti:", " ".join(map(str, complex_.betti_numbers())))
        return 0
    if not args.scenario:
        return _fail("betti needs --scenario or --complex")
    scenario, _ = load_scenario(args.scenario)
    betti, tagged = betti_report(scenario, args.at)
    print("betti:", " ".join(map(str, betti)))
    if args.out:
        write_tagged(tagged, args.out, args.out + ".tags")
        print(f"complex written to {args.out}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    directory = Path(args.scenario_dir)
    if not directory.is_dir():
        return _fail(f"not a directory: {args.scenario_dir}")
    files = sorted(directory.glob("*.scenario"))
    if not files:
        return _fail(f"no .scenario files in {args.scenario_dir}")
    scenarios = [load_scenario(str(f))[0] for f in files]
    seeds = [int(s) for s in args.seeds.split(",")]
    table = compare_protocols(scenarios, seeds)
    csv_text = table.to_csv()
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    for protocol, flags in table.pattern().items():
        print(f"# {protocol}: partial_commit={flags['partial_commit']} blocked={flags['blocked']}",
              file=sys.stderr)
    return 0


def _cmd_fit(args: argparse.Namespace) -> int:
    try:
        nmax, mmax = (int(tok) for tok in args.grid.split(","))
    except ValueError:
        return _fail(f"--grid must be 'nmax,mmax', got {args.grid!r}")
    if nmax < 3 or mmax < 2:
        return _fail("grid too small for a meaningful fit")
    main_points = measure_grid("topocbt", range(2, nmax + 1), range(1, mmax + 1))
    verdict = complexity_fit(main_points)
    a, b, c = verdict.main_fit.coefficients
    print(f"topocbt fit: {a:.3f}*n^2 + {b:.3f}*n*m + {c:.3f}  "
          f"residual_ratio={verdict.main_fit.residual_ratio:.4f}  "
          f"{'PASS' if verdict.passed else 'FAIL'}")
    swap_points = measure_grid("ac2s", range(2, nmax + 1), range(1, mmax + 1))
    swap_quad = fit_ops(swap_points, "mn2_1")
    swap_main = fit_ops(swap_points, "n2_nm_1")
    better = swap_quad.residual_ratio < swap_main.residual_ratio
    print(f"ac2s fit: m*n^2 ratio={swap_quad.residual_ratio:.4f} vs "
          f"n^2+nm ratio={swap_main.residual_ratio:.4f}  "
          f"{'m*n^2 fits better' if better else 'UNEXPECTED'}")
    return 0 if verdict.passed and better else 1


def _cmd_recover(args: argparse.Namespace) -> int:
    scenario, _ = load_scenario(args.scenario)
    wal = WriteAheadLog.read(args.wal)
    federation = scenario.build_federation()
    # rebuild the crashed state: every logged undo whose block landed
    # before the crash is re-applied (the log is assumed complete up to
    # the crash point), then recovery compensates it all
    from .wal import WalKind

    for rec in wal.records:
        if rec.kind is not WalKind.UNDO:
            continue
        chain = federation.chain(rec.block_ref.chain)
        if not chain.has_block(rec.block_ref):
            chain.append_block(rec.block_ref.branch, rec.updates)
    print(f"digest before recovery: {federation.state_digest()}")
    engine = TopoCbtEngine(federation, wal)
    report = engine.recover()
    print(f"digest after recovery:  {federation.state_digest()}")
    print(f"rolled back: {list(report.rolled_back)}; "
          f"rollback completed: {list(report.recompleted)}; "
          f"committed untouched: {list(report.committed_untouched)}; "
          f"locks cleared: {report.locks_cleared}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topocbt",
                                     description="cross-chain transaction simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario")
    p_run.add_argument("--scenario", required=True, help="file path or built-in name (car-trading)")
    p_run.add_argument("--seed", type=int, default=1)
    p_run.add_argument("--protocol", choices=["topocbt", "ac2s", "ac3wn"],
                       help="override the protocol declared per transaction")
    p_run.add_argument("--out", help="write the CSV report here instead of stdout")
    p_run.add_argument("--wal", help="also write the binary write-ahead log here")
    p_run.set_defaults(func=_cmd_run)

    p_betti = sub.add_parser("betti", help="topology report")
    p_betti.add_argument("--scenario")
    p_betti.add_argument("--at", type=int, default=0, help="transactions executed before the build")
    p_betti.add_argument("--complex", help="read a complex file instead of building one")
    p_betti.add_argument("--out", help="write the built complex (plus .tags sidecar)")
    p_betti.set_defaults(func=_cmd_betti)

    p_cmp = sub.add_parser("compare", help="run scenarios under all protocols")
    p_cmp.add_argument("--scenario-dir", required=True)
    p_cmp.add_argument("--seeds", default="1")
    p_cmp.add_argument("--out")
    p_cmp.set_defaults(func=_cmd_compare)

    p_fit = sub.add_parser("fit", help="complexity fit over an (n, m) grid")
    p_fit.add_argument("--grid", default="6,4", help="nmax,mmax")
    p_fit.set_defaults(func=_cmd_fit)

    p_rec = sub.add_parser("recover", help="replay a write-ahead log and roll back")
    p_rec.add_argument("--wal", required=True)
    p_rec.add_argument("--scenario", required=True)
    p_rec.set_defaults(func=_cmd_recover)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ChainError, WalFormatError, ValueError, OSError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
