"""Benchmark grids, timing and result emission."""

import csv
import io
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checker
from .block import write_block
from .contracts import canonical_contract, generate_workload
from .miner import MinerConfig, mine_concurrent, mine_serial
from .stm import BTO, MVTO
from .validator import validate_decentralized, validate_fork_join, validate_serial

COLUMNS = ["contract", "workload", "protocol", "role", "mode", "threads", "aus",
           "objects", "meanTimeMs", "speedup", "aborts", "retries", "oversubscribed"]

VALIDATOR_MODES = ("decentralized", "forkjoin")

# (varied parameter, values, fixed threads/aus/objects)
GRIDS = {
    "w1": ("aus", list(range(50, 401, 50)), dict(threads=50, objects=40)),
    "w2": ("threads", list(range(10, 61, 10)), dict(aus=400, objects=40)),
    "w3": ("objects", list(range(10, 61, 10)), dict(threads=50, aus=400)),
}


class BenchmarkFailure(RuntimeError):
    pass


@dataclass
class BenchParams:
    workload: str = "w1"  # w1 | w2 | w3 | custom
    contract: str = "mixed"
    protocols: tuple = (BTO, MVTO)
    validators: tuple = VALIDATOR_MODES
    reps: int = 10
    seed: int = 0
    threads: int = None  # overrides the grid's thread count
    aus: int = None
    objects: int = None
    clamp_threads: bool = False
    yield_steps: bool = False
    check: bool = True
    dump_dir: str = None
    extra: dict = field(default_factory=dict)


def grid_points(params):
    """Yield dicts with threads/aus/objects for every point of the grid."""
    fixed = dict(threads=8, aus=100, objects=40)
    if params.workload == "custom":
        points = [dict(fixed)]
    else:
        try:
            vary, values, base = GRIDS[params.workload]
        except KeyError:
            raise ValueError(f"unknown workload grid {params.workload!r}") from None
        points = [{**fixed, **base, vary: v} for v in values]
    for p in points:
        for name in ("threads", "aus", "objects"):
            override = getattr(params, name)
            if override is not None and not (params.workload in GRIDS
                                              and GRIDS[params.workload][0] == name):
                p[name] = override
        yield p


def _dump(params, tag, block, history):
    if not params.dump_dir:
        return
    out = Path(params.dump_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{tag}.block").write_text(write_block(block))
    if history is not None:
        (out / f"{tag}.history").write_text(history.dumps())


def _require(ok, params, tag, block, history, what):
    if not ok:
        _dump(params, tag, block, history)
        raise BenchmarkFailure(f"{tag}: {what}")


def run_point(params, point, rep_seed):
    """One repetition at one grid point; returns raw timings and counters."""
    cores = os.cpu_count() or 1
    threads = min(point["threads"], cores) if params.clamp_threads else point["threads"]
    w = generate_workload(params.contract, point["aus"], point["objects"], seed=rep_seed)
    out = {"threads": threads}

    t0 = time.perf_counter()
    serial_block, _ = mine_serial(w, record=False)
    out[("miner", "serial", "-")] = time.perf_counter() - t0

    for proto in params.protocols:
        cfg = MinerConfig(threads, proto, yield_steps=params.yield_steps)
        t0 = time.perf_counter()
        block, history = mine_concurrent(cfg, w, record=params.check)
        out[("miner", "concurrent", proto)] = time.perf_counter() - t0
        out[("aborts", proto)] = block.meta["aborts"]
        tag = f"{params.contract}-{proto}-{point['aus']}x{threads}-{rep_seed}"
        if params.check:
            g = block.graph()
            _require(checker.bg_matches_history(g, history, transitive=proto == MVTO),
                     params, tag, block, history, "block graph does not match history")
            if proto == BTO:
                _require(checker.is_csr(history), params, tag, block, history,
                         "history is not conflict-serializable")

        v = validate_serial(block, w.initial_state)
        _require(v.accepted, params, tag, block, history, f"serial validator rejected: {v.diff}")
        out[("validator", "serial", proto)] = v.elapsed
        for mode in params.validators:
            if mode == "decentralized":
                v = validate_decentralized(block, threads, w.initial_state)
            elif mode == "forkjoin":
                v = validate_fork_join(block, threads, w.initial_state)
            else:
                raise ValueError(f"unknown validator mode {mode!r}")
            _require(v.accepted, params, tag, block, history,
                     f"{mode} validator rejected ({v.reason}): {v.diff}")
            out[("validator", mode, proto)] = v.elapsed
    out["serial_state"] = serial_block.final_state
    return out


def run_benchmark(params):
    """Time serial and concurrent miners and validators over a grid.

    Every validation must accept; any rejection or oracle failure raises
    :class:`BenchmarkFailure` after dumping the offending artifacts.
    """
    params.contract = canonical_contract(params.contract)
    cores = os.cpu_count() or 1
    rows = []
    for point in grid_points(params):
        samples = [run_point(params, point, params.seed + r) for r in range(params.reps)]
        threads = samples[0]["threads"]

        def mean_ms(key):
            return float(np.mean([s[key] for s in samples])) * 1e3

        def row(protocol, role, mode, ms, speedup, aborts=0):
            return dict(contract=params.contract, workload=params.workload,
                        protocol=protocol, role=role, mode=mode, threads=threads,
                        aus=point["aus"], objects=point["objects"],
                        meanTimeMs=round(ms, 4), speedup=round(speedup, 4),
                        aborts=aborts, retries=aborts, oversubscribed=threads > cores)

        serial_miner = mean_ms(("miner", "serial", "-"))
        rows.append(row("-", "miner", "serial", serial_miner, 1.0))
        for proto in params.protocols:
            ms = mean_ms(("miner", "concurrent", proto))
            aborts = float(np.mean([s[("aborts", proto)] for s in samples]))
            rows.append(row(proto, "miner", "concurrent", ms, serial_miner / ms, aborts))
            serial_val = mean_ms(("validator", "serial", proto))
            rows.append(row(proto, "validator", "serial", serial_val, 1.0))
            for mode in params.validators:
                ms = mean_ms(("validator", mode, proto))
                rows.append(row(proto, "validator", mode, ms, serial_val / ms))
    return rows


def emit_results(rows, path=None, fmt="csv"):
    """Write rows as CSV or JSON with the fixed column order; returns the text."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({c: r.get(c) for c in COLUMNS})
        text = buf.getvalue()
    elif fmt == "json":
        text = json.dumps([{c: r.get(c) for c in COLUMNS} for r in rows], indent=1) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def load_results(text, fmt="csv"):
    if fmt == "json":
        return json.loads(text)
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        rows.append(dict(r, threads=int(r["threads"]), aus=int(r["aus"]),
                         objects=int(r["objects"]), meanTimeMs=float(r["meanTimeMs"]),
                         speedup=float(r["speedup"]), aborts=float(r["aborts"]),
                         retries=float(r["retries"]),
                         oversubscribed=r["oversubscribed"] == "True"))
    return rows


TABLE_ROWS = [
    ("BTO Miner", BTO, "miner", "concurrent"),
    ("MVTO Miner", MVTO, "miner", "concurrent"),
    ("BTO Decentralized Validator", BTO, "validator", "decentralized"),
    ("MVTO Decentralized Validator", MVTO, "validator", "decentralized"),
    ("BTO Fork-join Validator", BTO, "validator", "forkjoin"),
    ("MVTO Fork-join Validator", MVTO, "validator", "forkjoin"),
]


def speedup_table(rows):
    """{row label: {(contract, workload): mean speedup over grid points}}."""
    table = {}
    for label, proto, role, mode in TABLE_ROWS:
        cells = {}
        for r in rows:
            if (r["protocol"], r["role"], r["mode"]) == (proto, role, mode):
                cells.setdefault((r["contract"], r["workload"]), []).append(float(r["speedup"]))
        table[label] = {k: float(np.mean(v)) for k, v in cells.items()}
    return table


def emit_speedup_table(rows):
    """Plain-text speedup table: one line per miner/validator kind, one
    column per (contract, workload)."""
    table = speedup_table(rows)
    cols = sorted({k for cells in table.values() for k in cells})
    width = max(len(label) for label, *_ in TABLE_ROWS)
    head = " " * width + "".join(f" {c[0][:8]:>8}/{c[1]:<3}" for c in cols)
    lines = [head]
    for label, *_ in TABLE_ROWS:
        cells = table[label]
        vals = "".join(f" {cells[c]:>12.2f}" if c in cells else f" {'-':>12}" for c in cols)
        lines.append(f"{label:<{width}}{vals}")
    return "\n".join(lines) + "\n"
