import itertools

import pytest

from scexec import checker
from scexec.block import GENESIS_HASH
from scexec.contracts import (BENCHMARKS, COIN, Workload, arith_layout, coin_key,
                              figure_workload, generate_workload, run_serial)
from scexec.miner import MinerConfig, RetryLimitExceeded, mine_concurrent, mine_serial
from scexec.stm import BTO, MVTO, ConfigurationError


def test_empty_workload():
    w = Workload([], {"x": 3})
    block, history = mine_serial(w)
    assert block.final_state == {"x": 3}
    assert block.graph().edge_set() == set() and len(history) == 0


def test_figure_pair_serial():
    block, _ = mine_serial(figure_workload())
    assert block.final_state == {"arith.0": 20}
    assert block.graph().edge_set() == {(1, 2)}


def test_serial_is_deterministic():
    w = generate_workload("mixed", 80, 12, seed=3)
    a, _ = mine_serial(w)
    b, _ = mine_serial(w)
    assert a == b and a.hash == b.hash


def test_serial_graph_matches_history():
    w = generate_workload("mixed", 80, 12, seed=3)
    block, h = mine_serial(w)
    assert checker.bg_matches_history(block.graph(), h)


@pytest.mark.parametrize("protocol", [BTO, MVTO])
def test_one_thread_equals_serial(protocol):
    w = generate_workload("mixed", 60, 10, seed=4)
    serial, _ = mine_serial(w)
    block, _ = mine_concurrent(MinerConfig(1, protocol), w)
    assert block.final_state == serial.final_state
    assert block.outcomes == serial.outcomes
    assert block.meta["aborts"] == 0


@pytest.mark.parametrize("protocol", [BTO, MVTO])
def test_figure_pair_two_threads(protocol):
    # x ends at 20 or 10 depending on commit order; the edge follows timestamps
    serial_orders = {}
    w = figure_workload()
    for order in itertools.permutations(w.aus):
        state = dict(w.initial_state)
        run_serial(order, state)
        serial_orders[tuple(au.au_id for au in order)] = state["arith.0"]
    for _ in range(30):
        block, h = mine_concurrent(MinerConfig(2, protocol, yield_steps=True), w)
        ts_of = block.meta["committed_ts"]
        order = tuple(sorted(ts_of, key=ts_of.get))
        assert block.final_state["arith.0"] == serial_orders[order]
        assert block.graph().edge_set() == {(min(ts_of.values()), max(ts_of.values()))}


@pytest.mark.parametrize("protocol", [BTO, MVTO])
def test_coin_conservation_concurrent(protocol):
    w = generate_workload(COIN, 50, 10, seed=5)
    block, _ = mine_concurrent(MinerConfig(8, protocol, yield_steps=True), w)
    total = sum(w.initial_state.values())
    assert sum(block.final_state[coin_key(i)] for i in range(10)) == total


@pytest.mark.parametrize("protocol, contract", list(itertools.product([BTO, MVTO], BENCHMARKS)))
def test_concurrent_block_properties(protocol, contract):
    w = generate_workload(contract, 60, 12, seed=8)
    block, h = mine_concurrent(MinerConfig(8, protocol, yield_steps=True), w)
    g = block.graph()
    # completion: one vertex per AU, keyed by its final committed timestamp
    assert sorted(g.au_map().values()) == [au.au_id for au in w.aus]
    assert {v: k for k, v in g.au_map().items()} == block.meta["committed_ts"]
    assert all(a < b for a, b in g.edge_set())
    assert h.is_well_formed()
    assert checker.bg_matches_history(g, h, transitive=protocol == MVTO)
    if protocol == BTO:
        assert checker.is_csr(h)
    assert checker.reads_follow_protocol(h, protocol, w.initial_state)
    assert checker.final_state_from_history(h, w.initial_state) == block.final_state
    # replaying in graph order from genesis reproduces the claimed state
    state = dict(w.initial_state)
    by_id = {au.au_id: au for au in w.aus}
    outcomes = run_serial([by_id[v.au_id] for v in g.vertices()], state)
    assert state == block.final_state and outcomes == block.outcomes
    aborted = sum(1 for t in h.transactions().values() if t.status == "aborted")
    assert aborted == block.meta["aborts"]


def test_retry_cap(monkeypatch):
    from scexec import miner

    def always_abort(au, ctx):
        ctx.stm._fail(ctx.txn)

    monkeypatch.setattr(miner, "execute", always_abort)
    w = generate_workload(COIN, 3, 4, seed=0)
    with pytest.raises(RetryLimitExceeded):
        mine_concurrent(MinerConfig(2, BTO, max_retries=3), w)


def test_worker_errors_surface():
    w = Workload(figure_workload().aus, arith_layout(0) | {"y": 0})
    with pytest.raises(ConfigurationError):
        mine_concurrent(MinerConfig(2, BTO), w)


@pytest.mark.parametrize("kwargs", [dict(n_threads=0), dict(protocol="OCC"),
                                    dict(max_retries=-1)])
def test_config_validation(kwargs):
    with pytest.raises(ConfigurationError):
        MinerConfig(**kwargs)


def test_prev_hash_is_carried():
    w = generate_workload(COIN, 5, 4, seed=0)
    block, _ = mine_concurrent(MinerConfig(2, BTO), w, prev_hash="ab" * 32)
    assert block.prev_hash == "ab" * 32
    assert mine_serial(w)[0].prev_hash == GENESIS_HASH
