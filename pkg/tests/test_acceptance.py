"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v``; the summary
lines are written straight to the terminal.
"""

import itertools
import os
import random
import statistics
import time

import pytest

from graphcheck import SeqGraph, linearizable, run_concurrent
from histories import random_programs, random_schedule
from scexec import checker
from scexec.contracts import BENCHMARKS, COIN, MIXED, figure_workload, generate_workload
from scexec.miner import MinerConfig, mine_concurrent, mine_serial
from scexec.stm import BTO, MVTO
from scexec.validator import validate_decentralized, validate_fork_join, validate_serial


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
    return emit


def bg_violations(block, history, protocol, verdict=None):
    """Graph integrity problems of one mined block; empty when sound."""
    g = block.graph()
    problems = []
    if not checker.bg_matches_history(g, history, transitive=protocol == MVTO):
        problems.append("graph does not match history conflicts")
    if any(a >= b for a, b in g.edge_set()):
        problems.append("edge against timestamp order")
    if verdict is not None:
        n = len(block.aus)
        if not verdict.claims == verdict.vertices == len(verdict.order) == n:
            problems.append(f"claims {verdict.claims}, vertices {verdict.vertices}, "
                            f"executed {len(verdict.order)}, AUs {n}")
    return problems


# criterion 5 aggregates the integrity checks made while running 1 and 3
INTEGRITY = {"runs": 0, "violations": []}


def test_criterion_1_miner_validator_determinism(report):
    combos = list(itertools.product((BTO, MVTO), BENCHMARKS, (2, 4, 8),
                                    ("decentralized", "forkjoin")))
    runs, failures = 1008, []
    started = time.perf_counter()
    for i in range(runs):
        protocol, contract, threads, mode = combos[i % len(combos)]
        w = generate_workload(contract, 40, 12, seed=i)
        block, h = mine_concurrent(MinerConfig(threads, protocol, yield_steps=True), w)
        if mode == "decentralized":
            v = validate_decentralized(block, threads, w.initial_state, debug=True)
        else:
            v = validate_fork_join(block, threads, w.initial_state, debug=True)
        if not v.accepted:
            failures.append((i, protocol, contract, threads, mode, v.reason))
        INTEGRITY["runs"] += 1
        INTEGRITY["violations"] += [(1, i, p) for p in bg_violations(block, h, protocol, v)]
    elapsed = time.perf_counter() - started
    report(1, not failures, f"{runs} runs over {len(combos)} configurations, "
           f"{len(failures)} rejections, {elapsed:.1f}s")
    assert not failures, failures[:5]


def test_criterion_2_figure_negative_control(report):
    w = figure_workload()
    block, _ = mine_serial(w)
    miner_fs = block.final_state["arith.0"]
    replays = [validate_serial(block, w.initial_state),
               validate_decentralized(block, 2, w.initial_state),
               validate_fork_join(block, 2, w.initial_state)]
    graph_fs = [v.state["arith.0"] for v in replays]
    reverse = validate_serial(block, w.initial_state, order=[1, 0])
    ok = (miner_fs == 20 and graph_fs == [20, 20, 20] and all(replays)
          and reverse.state["arith.0"] == 10 and not reverse.accepted)
    report(2, ok, f"miner FS={miner_fs}, graph replays FS={graph_fs}, "
           f"reverse replay FS={reverse.state['arith.0']} "
           f"{'Reject' if not reverse.accepted else 'Accept'}")
    assert ok


def test_criterion_3_csr_campaign(report):
    rng = random.Random(3)
    bad, largest = [], 0
    started = time.perf_counter()
    for i in range(1000):
        contract = BENCHMARKS[i % len(BENCHMARKS)]
        w = generate_workload(contract, rng.randint(5, 40), rng.randint(3, 12), seed=i)
        block, h = mine_concurrent(MinerConfig(8, BTO, yield_steps=True), w)
        n = len(h.transactions())
        largest = max(largest, n)
        if n > 50 or not checker.is_csr(h):
            bad.append((i, n))
        INTEGRITY["runs"] += 1
        INTEGRITY["violations"] += [(3, i, p) for p in bg_violations(block, h, BTO)]
    elapsed = time.perf_counter() - started
    ok = not bad and elapsed < 120
    report(3, ok, f"1000 BTO histories, up to {largest} txns, {len(bad)} not CSR, "
           f"{elapsed:.1f}s")
    assert ok, bad[:5]


def test_criterion_4_mvsr_and_opacity_campaigns(report):
    started = time.perf_counter()
    rng = random.Random(4)
    mvsr_bad = []
    for i in range(500):
        contract = BENCHMARKS[i % len(BENCHMARKS)]
        w = generate_workload(contract, rng.randint(2, 8), rng.randint(2, 6), seed=i)
        _, h = mine_concurrent(MinerConfig(8, MVTO, yield_steps=True), w)
        assert len(h.committed()) <= 8
        if not checker.is_mvsr(h, w.initial_state):
            mvsr_bad.append(i)

    opaque_bad, with_aborts = [], 0
    keys = ["x", "y", "z"]
    for i in range(500):
        protocol = (BTO, MVTO)[i % 2]
        progs = random_programs(rng, rng.randint(2, 5), keys)
        h = random_schedule(protocol, progs, keys, seed=i, max_txns=6, user_abort=0.25)
        txns = h.completed().transactions()
        assert len(txns) <= 6
        with_aborts += any(t.status == "aborted" for t in txns.values())
        if not checker.is_opaque(h, dict.fromkeys(keys, 0)):
            opaque_bad.append(i)
    elapsed = time.perf_counter() - started
    ok = not mvsr_bad and not opaque_bad and elapsed < 180
    report(4, ok, f"500 MVTO histories MVSR with {len(mvsr_bad)} failures; 500 histories "
           f"({with_aborts} with aborts) opaque with {len(opaque_bad)} failures; "
           f"{elapsed:.1f}s")
    assert ok, (mvsr_bad[:5], opaque_bad[:5])


def test_criterion_5_block_graph_integrity(report):
    if INTEGRITY["runs"] == 0:
        # run on its own: produce a campaign of its own
        for i in range(200):
            protocol = (BTO, MVTO)[i % 2]
            w = generate_workload(BENCHMARKS[i % 4], 40, 12, seed=i)
            block, h = mine_concurrent(MinerConfig(8, protocol, yield_steps=True), w)
            v = validate_decentralized(block, 8, w.initial_state)
            INTEGRITY["runs"] += 1
            INTEGRITY["violations"] += [(5, i, p) for p in bg_violations(block, h, protocol, v)]
    bad = INTEGRITY["violations"]
    report(5, not bad, f"{INTEGRITY['runs']} mined blocks checked, {len(bad)} violations")
    assert not bad, bad[:5]


def test_criterion_6_graph_stress_and_linearizability(report):
    rng = random.Random(6)
    programs = []
    for _ in range(8):
        mine, ops = [], []
        for _ in range(10_000):
            if len(mine) < 2 or rng.random() < 0.4:
                v = rng.randint(1, 150)
                mine.append(v)
                ops.append(("v", v, None))
            else:
                a, b = rng.sample(mine, 2)
                ops.append(("v", a, None) if a == b else ("e", min(a, b), max(a, b)))
        programs.append(ops)
    g, log = run_concurrent(programs)
    seq = SeqGraph()
    for ops in programs:
        for op in ops:
            seq.apply(op)
    stress_ok = (len(log) == 80_000 and set(g.au_map()) == seq.vertices
                 and g.edge_set() == seq.edges and g.in_counts() == seq.in_counts())

    lin_bad = 0
    n_inst = 300
    for _ in range(n_inst):
        progs = []
        for _ in range(rng.randint(2, 4)):
            ops = []
            for _ in range(rng.randint(1, 6)):
                if rng.random() < 0.5:
                    ops.append(("v", rng.randint(1, 4), None))
                else:
                    a, b = sorted(rng.sample(range(1, 5), 2))
                    ops.append(("e", a, b))
            progs.append(ops)
        sg, slog = run_concurrent(progs)
        lin_bad += not linearizable(sg, slog)
    ok = stress_ok and lin_bad == 0
    report(6, ok, f"8x10k stress {'matches' if stress_ok else 'differs from'} the "
           f"sequential oracle; {n_inst - lin_bad}/{n_inst} small runs linearizable")
    assert ok


def test_criterion_7_abort_reduction(report):
    aborts = {BTO: [], MVTO: []}
    for seed in range(100):
        w = generate_workload(COIN, 400, 40, seed=seed, read_ratio=0.9)
        for protocol in (BTO, MVTO):
            block, _ = mine_concurrent(MinerConfig(8, protocol, yield_steps=True), w,
                                       record=False)
            aborts[protocol].append(block.meta["aborts"])
    med = {p: statistics.median(v) for p, v in aborts.items()}
    ok = med[MVTO] <= med[BTO]
    report(7, ok, f"median aborts over 100 runs: BTO {med[BTO]}, MVTO {med[MVTO]}")
    assert ok


def test_criterion_8_speedup(report):
    threads, reps = 8, 10
    times = {k: [] for k in ("serial miner", "BTO miner", "MVTO miner", "serial validator",
                             "decentralized", "forkjoin")}
    for rep in range(reps):
        w = generate_workload(MIXED, 400, 40, seed=rep)
        t0 = time.perf_counter()
        mine_serial(w, record=False)
        times["serial miner"].append(time.perf_counter() - t0)
        for protocol in (BTO, MVTO):
            t0 = time.perf_counter()
            block, _ = mine_concurrent(MinerConfig(threads, protocol), w, record=False)
            times[f"{protocol} miner"].append(time.perf_counter() - t0)
        for name, fn in (("serial validator", lambda: validate_serial(block, w.initial_state)),
                         ("decentralized",
                          lambda: validate_decentralized(block, threads, w.initial_state)),
                         ("forkjoin", lambda: validate_fork_join(block, threads,
                                                                 w.initial_state))):
            v = fn()
            assert v.accepted
            times[name].append(v.elapsed)
    med = {k: statistics.median(v) for k, v in times.items()}
    miner = {p: med["serial miner"] / med[f"{p} miner"] for p in (BTO, MVTO)}
    dec = med["serial validator"] / med["decentralized"]
    fj = med["serial validator"] / med["forkjoin"]
    ok = min(miner.values()) >= 1.5 and dec >= 3.0 and med["decentralized"] < med["forkjoin"]
    report(8, ok, f"{os.cpu_count()} hardware threads; miner speedup BTO {miner[BTO]:.2f}x, "
           f"MVTO {miner[MVTO]:.2f}x (need 1.5x); decentralized {dec:.2f}x (need 3x); "
           f"fork-join {fj:.2f}x")
    assert min(miner.values()) >= 1.5
    assert dec >= 3.0
    assert med["decentralized"] < med["forkjoin"]
