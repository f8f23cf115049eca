"""Serial and concurrent miners that turn a workload into a sealed Block."""

import threading
import time
from dataclasses import dataclass

from .atomic import AtomicInteger
from .block import GENESIS_HASH, Block
from .contracts import StateContext, execute
from .graph import BlockGraph
from .history import BEGIN, COMMIT, READ, WRITE, History
from .stm import BTO, PROTOCOLS, AbortError, ConfigurationError, stm_init


class RetryLimitExceeded(RuntimeError):
    pass


@dataclass
class MinerConfig:
    n_threads: int = 4
    protocol: str = BTO
    max_retries: int = 0  # 0 = unbounded
    # sleep(0) before every shared access; lets the GIL hand over between
    # steps so that small runs actually interleave
    yield_steps: bool = False

    def __post_init__(self):
        if self.n_threads < 1:
            raise ConfigurationError("n_threads must be >= 1")
        if self.protocol not in PROTOCOLS:
            raise ConfigurationError(f"unknown protocol {self.protocol!r}")
        if self.max_retries < 0:
            raise ConfigurationError("max_retries must be >= 0")


class StmContext:
    """Execution context routing an AU's reads and writes through one transaction."""

    __slots__ = ("stm", "txn", "yield_steps")

    def __init__(self, stm, txn, yield_steps=False):
        self.stm = stm
        self.txn = txn
        self.yield_steps = yield_steps

    def read(self, key):
        if self.yield_steps:
            time.sleep(0)
        return self.stm.read(self.txn, key)

    def write(self, key, value):
        if self.yield_steps:
            time.sleep(0)
        self.stm.write(self.txn, key, value)


class _SerialContext(StateContext):
    def __init__(self, state, ts, history, last_writer):
        super().__init__(state)
        self.ts = ts
        self.history = history
        self.last_writer = last_writer
        self.reads = set()
        self.writes = set()

    def read(self, key):
        value = super().read(key)
        if key not in self.writes and key not in self.reads:
            self.reads.add(key)
            if self.history is not None:
                self.history.record(self.ts, READ, key, value, self.last_writer.get(key, 0))
        return value

    def write(self, key, value):
        super().write(key, value)
        self.writes.add(key)
        if self.history is not None:
            self.history.record(self.ts, WRITE, key, value)


def serial_conflict_edges(footprints):
    """Edges (a, b), a < b, for every pair of units touching a common key
    where at least one of them writes it.  ``footprints``: ts -> (reads, writes)."""
    by_key = {}
    for ts in sorted(footprints):
        reads, writes = footprints[ts]
        for key in reads | writes:
            by_key.setdefault(key, []).append((ts, key in writes))
    edges = set()
    for accessors in by_key.values():
        for i, (a, a_writes) in enumerate(accessors):
            for b, b_writes in accessors[i + 1:]:
                if a_writes or b_writes:
                    edges.add((a, b))
    return edges


def mine_serial(workload, prev_hash=GENESIS_HASH, record=True):
    """Execute the units one by one in list order; unit k gets timestamp k+1."""
    history = History() if record else None
    state = dict(workload.initial_state)
    last_writer = {}
    outcomes, footprints = {}, {}
    for k, au in enumerate(workload.aus):
        ts = k + 1
        if history is not None:
            history.record(ts, BEGIN)
        ctx = _SerialContext(state, ts, history, last_writer)
        outcomes[au.au_id] = execute(au, ctx)
        if history is not None:
            history.record(ts, COMMIT)
        for key in ctx.writes:
            last_writer[key] = ts
        footprints[ts] = (ctx.reads, ctx.writes)
    graph = BlockGraph.bulk([(k + 1, au.au_id) for k, au in enumerate(workload.aus)],
                            serial_conflict_edges(footprints))
    block = Block(list(workload.aus), graph.serialize(), state, outcomes, prev_hash)
    block.meta.update(aborts=0, protocol="serial", threads=1)
    return block.seal(), history


def mine_concurrent(cfg, workload, prev_hash=GENESIS_HASH, record=True):
    """Run the workload on ``cfg.n_threads`` workers over a shared STM.

    Workers claim units through a shared atomic index, retry aborted units
    under fresh timestamps and insert every committed transaction, with its
    conflicts, into the shared block graph.
    """
    history = History() if record else None
    stm = stm_init(workload.keys, cfg.protocol, workload.initial_state, history)
    graph = BlockGraph()
    aus = workload.aus
    cursor = AtomicInteger(0)
    outcomes, committed_ts = {}, {}
    errors = []

    def worker():
        try:
            while True:
                k = cursor.get_and_increment()
                if k >= len(aus):
                    return
                au = aus[k]
                attempts = 0
                while True:
                    txn = stm.begin()
                    try:
                        outcome = execute(au, StmContext(stm, txn, cfg.yield_steps))
                        stm.try_commit(txn)
                        break
                    except AbortError:
                        attempts += 1
                        if cfg.max_retries and attempts > cfg.max_retries:
                            raise RetryLimitExceeded(
                                f"{au} aborted {attempts} times") from None
                    except BaseException:
                        if txn.status == "live":
                            stm.abort(txn)
                        raise
                outcomes[au.au_id] = outcome
                committed_ts[au.au_id] = txn.ts
                graph.build_from_conflicts(txn.ts, au.au_id, stm.get_conflicts(txn.ts))
        except BaseException as exc:  # surfaced to the caller after join
            errors.append(exc)

    threads = [threading.Thread(target=worker, name=f"miner-{t}")
               for t in range(cfg.n_threads)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    block = Block(list(aus), graph.serialize(), stm.snapshot(), outcomes, prev_hash)
    block.meta.update(aborts=stm.aborts.get(), protocol=cfg.protocol,
                      threads=cfg.n_threads, committed_ts=committed_ts)
    return block.seal(), history
