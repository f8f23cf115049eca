"""Command line entry point: ``python -m scexec {mine,validate,bench,check}``.

Every flag can also be supplied through an ``SCEXEC_<FLAG>`` environment
variable (for example ``SCEXEC_THREADS=4``); explicit flags win.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from . import checker, harness
from .block import BlockFormatError, BlockIntegrityError, read_block, write_block
from .contracts import BENCHMARKS, generate_workload
from .graph import GraphError
from .history import History
from .miner import MinerConfig, mine_concurrent, mine_serial
from .stm import BTO, MVTO
from .validator import validate_decentralized, validate_fork_join, validate_serial

ENV_PREFIX = "SCEXEC_"

PROTOCOLS = {"bto": BTO, "mvto": MVTO}
VALIDATORS = ("serial", "decentralized", "forkjoin")


def write_state(state):
    return "".join(f"STATE {k} {state[k]}\n" for k in sorted(state))


def read_state(text):
    state = {}
    for ln in text.splitlines():
        if not ln.strip():
            continue
        tag, key, value = ln.split()
        if tag != "STATE":
            raise ValueError(f"bad state line {ln!r}")
        state[key] = int(value)
    return state


def _env_defaults(parser):
    """Pull defaults for every optional flag from the environment."""
    for action in parser._actions:
        if not action.option_strings or action.dest == "help":
            continue
        raw = os.environ.get(ENV_PREFIX + action.dest.upper())
        if raw is None:
            continue
        if action.type is not None:
            raw = action.type(raw)
        elif isinstance(action.const, bool):
            raw = raw.lower() in ("1", "true", "yes", "on")
        action.default = raw


def _out(args, text):
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_mine(args):
    w = generate_workload(args.contract, args.aus, args.objects, seed=args.seed)
    if args.serial:
        block, history = mine_serial(w)
    else:
        cfg = MinerConfig(args.threads, PROTOCOLS[args.protocol], yield_steps=args.yield_steps)
        block, history = mine_concurrent(cfg, w)
    _out(args, write_block(block))
    if args.out:
        Path(args.out + ".genesis").write_text(write_state(w.initial_state))
    if args.history:
        Path(args.history).write_text(history.dumps())
    print(f"mined {len(block.aus)} AUs, aborts={block.meta['aborts']}, hash={block.hash}",
          file=sys.stderr)
    return 0


def cmd_validate(args):
    path = Path(args.block)
    try:
        block = read_block(path.read_text())
    except (BlockFormatError, BlockIntegrityError, GraphError) as exc:
        print(f"REJECT parse: {exc}", file=sys.stderr)
        return 1
    genesis = Path(args.genesis) if args.genesis else Path(str(path) + ".genesis")
    initial = read_state(genesis.read_text()) if genesis.exists() else None
    modes = VALIDATORS if args.validator == "all" else (args.validator,)
    report = []
    for mode in modes:
        if mode == "serial":
            v = validate_serial(block, initial)
        elif mode == "decentralized":
            v = validate_decentralized(block, args.threads, initial, debug=args.debug)
        else:
            v = validate_fork_join(block, args.threads, initial, debug=args.debug)
        report.append(dict(mode=mode, verdict="Accept" if v.accepted else "Reject",
                           reason=v.reason, timeMs=round(v.elapsed * 1e3, 4),
                           diff={k: list(d) for k, d in v.diff.items()}))
    if args.format == "json":
        text = json.dumps(report, indent=1) + "\n"
    else:
        text = "mode,verdict,timeMs,reason,diffKeys\n" + "".join(
            f"{r['mode']},{r['verdict']},{r['timeMs']},{r['reason']},"
            f"{' '.join(sorted(r['diff']))}\n" for r in report)
    _out(args, text)
    return 0 if all(r["verdict"] == "Accept" for r in report) else 1


def cmd_bench(args):
    params = harness.BenchParams(
        workload=args.workload, contract=args.contract, reps=args.reps, seed=args.seed,
        threads=args.threads, aus=args.aus, objects=args.objects,
        clamp_threads=args.clamp, yield_steps=args.yield_steps, dump_dir=args.dump_dir)
    if args.protocol != "both":
        params.protocols = (PROTOCOLS[args.protocol],)
    if args.validator == "serial":
        params.validators = ()
    elif args.validator != "all":
        params.validators = (args.validator,)
    try:
        rows = harness.run_benchmark(params)
    except harness.BenchmarkFailure as exc:
        print(f"benchmark failed: {exc}", file=sys.stderr)
        return 2
    _out(args, harness.emit_results(rows, fmt=args.format))
    print(harness.emit_speedup_table(rows), file=sys.stderr, end="")
    return 0


def cmd_check(args):
    h = History.loads(Path(args.history).read_text())
    oracles = ("csr", "mvsr", "opacity") if args.oracle == "all" else (args.oracle,)
    ok = True
    for name in oracles:
        try:
            if name == "csr":
                res = checker.is_csr(h)
            elif name == "mvsr":
                res = checker.is_mvsr(h)
            else:
                res = checker.is_opaque(h)
        except checker.CapacityError as exc:
            print(f"{name}: skipped ({exc})")
            continue
        ok &= res
        print(f"{name}: {'pass' if res else 'FAIL'}")
    if args.block:
        block = read_block(Path(args.block).read_text())
        res = checker.bg_matches_history(block.graph(), h,
                                         transitive=args.protocol == "mvto")
        ok &= res
        print(f"bg: {'pass' if res else 'FAIL'}")
    return 0 if ok else 1


def build_parser():
    p = argparse.ArgumentParser(prog="scexec", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, protocols=("bto", "mvto")):
        sp.add_argument("--contract", default="coin", choices=[*BENCHMARKS, "arith"])
        sp.add_argument("--protocol", default=protocols[0], choices=list(protocols))
        sp.add_argument("--threads", type=int, default=8)
        sp.add_argument("--aus", type=int, default=100)
        sp.add_argument("--objects", type=int, default=40)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None)
        sp.add_argument("--format", default="csv", choices=["csv", "json"])
        sp.add_argument("--yield-steps", action="store_true",
                        help="yield the GIL before every STM access")

    sp = sub.add_parser("mine", help="mine a block from a generated workload")
    common(sp)
    sp.add_argument("--serial", action="store_true")
    sp.add_argument("--history", default=None, help="also write the STM history here")
    sp.set_defaults(func=cmd_mine)

    sp = sub.add_parser("validate", help="validate a block file")
    common(sp)
    sp.add_argument("block")
    sp.add_argument("--genesis", default=None)
    sp.add_argument("--validator", default="all", choices=[*VALIDATORS, "all"])
    sp.add_argument("--debug", action="store_true")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("bench", help="run a benchmark grid")
    common(sp, protocols=("both", "bto", "mvto"))
    sp.set_defaults(contract="mixed", threads=None, aus=None, objects=None)
    sp.add_argument("--workload", default="w1", choices=[*harness.GRIDS, "custom"])
    sp.add_argument("--validator", default="all", choices=[*VALIDATORS, "all"])
    sp.add_argument("--reps", type=int, default=10)
    sp.add_argument("--clamp", action="store_true", help="clamp threads to the core count")
    sp.add_argument("--dump-dir", default=None)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("check", help="run the history oracles")
    sp.add_argument("history")
    sp.add_argument("--oracle", default="all", choices=["csr", "mvsr", "opacity", "all"])
    sp.add_argument("--block", default=None, help="also compare this block's graph")
    sp.add_argument("--protocol", default="bto", choices=["bto", "mvto"])
    sp.set_defaults(func=cmd_check)

    for sp in sub.choices.values():
        _env_defaults(sp)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)
