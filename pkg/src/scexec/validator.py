"""Block validation: serial, decentralized and fork-join replay.

Validators execute AUs directly on a plain state dict with no concurrency
control: the block graph orders every conflicting pair, so two units that
run at the same time never touch a common key with a write.  ``debug=True``
tags keys with their current users and rejects the block if that ever fails.
"""

import queue
import threading
import time
from collections import deque
from dataclasses import dataclass, field

from .contracts import StateContext, execute
from .graph import GraphError

DEFAULT_TIMEOUT = 30.0

MISSING = "<missing>"


@dataclass
class Verdict:
    accepted: bool
    diff: dict = field(default_factory=dict)
    reason: str = ""
    state: dict = field(default_factory=dict)
    outcomes: dict = field(default_factory=dict)
    order: list = field(default_factory=list)  # vertex ts in completion order
    claims: int = 0
    vertices: int = 0
    elapsed: float = 0.0

    def __bool__(self):
        return self.accepted


def compare_final_state(computed, claimed, computed_outcomes=None, claimed_outcomes=None):
    """Map of every disagreement; empty means the block is accepted.

    State entries are ``key: (computed, claimed)``; a key present on one side
    only shows :data:`MISSING` on the other.  Outcome mismatches appear under
    ``"outcome:<au_id>"``.
    """
    diff = {}
    for key in sorted(set(computed) | set(claimed)):
        a = computed.get(key, MISSING)
        b = claimed.get(key, MISSING)
        if a != b:
            diff[key] = (a, b)
    if computed_outcomes is not None or claimed_outcomes is not None:
        computed_outcomes = computed_outcomes or {}
        claimed_outcomes = claimed_outcomes or {}
        for au_id in sorted(set(computed_outcomes) | set(claimed_outcomes)):
            a = computed_outcomes.get(au_id, MISSING)
            b = claimed_outcomes.get(au_id, MISSING)
            if a != b:
                diff[f"outcome:{au_id}"] = (a, b)
    return diff


class ConcurrentConflictError(RuntimeError):
    pass


class _KeyOwners:
    """Debug-mode tracker of which running vertices touch which keys."""

    def __init__(self):
        self.lock = threading.Lock()
        self.readers = {}
        self.writer = {}
        self.touched = {}

    def read(self, me, key):
        with self.lock:
            w = self.writer.get(key)
            if w is not None and w != me:
                raise ConcurrentConflictError(f"{me} reads {key} while {w} writes it")
            self.readers.setdefault(key, set()).add(me)
            self.touched.setdefault(me, set()).add(key)

    def write(self, me, key):
        with self.lock:
            w = self.writer.get(key)
            others = self.readers.get(key, set()) - {me}
            if (w is not None and w != me) or others:
                raise ConcurrentConflictError(f"{me} writes {key} concurrently with {w or others}")
            self.writer[key] = me
            self.touched.setdefault(me, set()).add(key)

    def release(self, me):
        with self.lock:
            for key in self.touched.pop(me, ()):
                self.readers.get(key, set()).discard(me)
                if self.writer.get(key) == me:
                    del self.writer[key]


class _TaggedContext(StateContext):
    def __init__(self, state, owners, me):
        super().__init__(state)
        self.owners = owners
        self.me = me

    def read(self, key):
        self.owners.read(self.me, key)
        return super().read(key)

    def write(self, key, value):
        self.owners.write(self.me, key)
        super().write(key, value)


class _Replay:
    """State shared by the threads replaying one block."""

    def __init__(self, block, initial_state, graph, debug):
        self.block = block
        self.state = dict(_initial(block, initial_state))
        self.by_id = {au.au_id: au for au in block.aus}
        self.graph = graph
        self.outcomes = {}
        self.order = []
        self.owners = _KeyOwners() if debug else None
        self.errors = []

    def run(self, node):
        au = self.by_id[node.au_id]
        if self.owners is None:
            ctx = StateContext(self.state)
        else:
            ctx = _TaggedContext(self.state, self.owners, node.ts)
        try:
            self.outcomes[au.au_id] = execute(au, ctx)
        finally:
            if self.owners is not None:
                self.owners.release(node.ts)
        self.order.append(node.ts)

    def verdict(self, started, reason=""):
        g = self.graph
        v = Verdict(False, reason=reason, state=self.state, outcomes=self.outcomes,
                    order=list(self.order), claims=g.nc.get(), vertices=g.size.get(),
                    elapsed=time.perf_counter() - started)
        if self.errors:
            v.reason = v.reason or f"error: {self.errors[0]!r}"
        if v.reason:
            return v
        v.diff = compare_final_state(self.state, self.block.final_state,
                                     self.outcomes, self.block.outcomes)
        v.accepted = not v.diff
        v.reason = "" if v.accepted else "state"
        return v


def _initial(block, initial_state):
    if initial_state is None:
        return {k: 0 for k in block.final_state}
    return initial_state


def _prepare(block, initial_state, graph, debug):
    """Parse the graph and check it covers the AU list exactly once."""
    try:
        g = block.graph() if graph is None else graph
    except GraphError as exc:
        return None, f"parse: {exc}"
    ids = [v.au_id for v in g.vertices()]
    if sorted(ids, key=str) != sorted((au.au_id for au in block.aus), key=str):
        return None, "integrity: graph vertices do not match the AU list"
    return _Replay(block, initial_state, g, debug), ""


def _reject(reason, started):
    return Verdict(False, reason=reason, elapsed=time.perf_counter() - started)


def validate_serial(block, initial_state=None, order=None):
    """Replay in ascending timestamp order, a topological order of the graph.

    ``order`` (a list of AU ids) replaces the graph entirely; it exists for
    negative controls.
    """
    started = time.perf_counter()
    replay, err = _prepare(block, initial_state, None, False)
    if err:
        return _reject(err, started)
    ctx = StateContext(replay.state)
    if order is None:
        for node in replay.graph.vertices():
            replay.graph.search_local(node)
            replay.run(node)
    else:
        for au_id in order:
            replay.outcomes[au_id] = execute(replay.by_id[au_id], ctx)
    return replay.verdict(started)


def validate_decentralized(block, n_threads, initial_state=None, timeout=DEFAULT_TIMEOUT,
                           debug=False, graph=None):
    """Symmetric threads claim source vertices themselves.

    Each thread first drains its local cache of vertices it made ready,
    then scans the graph; it stops once every vertex has been claimed.
    """
    started = time.perf_counter()
    replay, err = _prepare(block, initial_state, graph, debug)
    if err:
        return _reject(err, started)
    g = replay.graph
    total = len(replay.by_id)
    deadline = time.monotonic() + timeout
    stalled = []

    def worker():
        cache = deque()
        try:
            while g.nc.get() < total:
                while cache:
                    node = g.search_local(cache.popleft())
                    if node is not None:
                        replay.run(node)
                        g.release(node, cache)
                node = g.search_global()
                if node is not None:
                    replay.run(node)
                    g.release(node, cache)
                elif time.monotonic() > deadline:
                    stalled.append(True)
                    return
                else:
                    time.sleep(0)
        except BaseException as exc:
            replay.errors.append(exc)
            stalled.append(True)

    threads = [threading.Thread(target=worker, name=f"validator-{t}")
               for t in range(max(1, n_threads))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if replay.errors:
        return replay.verdict(started)
    if stalled or len(replay.order) != total:
        return replay.verdict(started, "stalled")
    return replay.verdict(started)


def validate_fork_join(block, n_slaves, initial_state=None, timeout=DEFAULT_TIMEOUT,
                       debug=False, graph=None, queue_size=None):
    """A master hands ready vertices to slaves over a bounded queue and
    releases their out-edges when the slaves report completion."""
    started = time.perf_counter()
    replay, err = _prepare(block, initial_state, graph, debug)
    if err:
        return _reject(err, started)
    g = replay.graph
    total = len(replay.by_id)
    n_slaves = max(1, n_slaves)
    work = queue.Queue(maxsize=queue_size or 2 * n_slaves)
    done = queue.Queue()

    def slave():
        while True:
            node = work.get()
            if node is None:
                return
            try:
                replay.run(node)
            except BaseException as exc:
                replay.errors.append(exc)
            done.put(node)

    slaves = [threading.Thread(target=slave, name=f"slave-{t}") for t in range(n_slaves)]
    for t in slaves:
        t.start()

    reason = ""
    deadline = time.monotonic() + timeout
    ready = deque(v for v in g.vertices() if g.search_local(v) is not None)
    in_flight = finished = 0
    try:
        while finished < total:
            while ready:
                work.put(ready.popleft())
                in_flight += 1
            if in_flight == 0:
                reason = "integrity: no ready vertex and nothing in flight"
                break
            try:
                node = done.get(timeout=max(0.0, deadline - time.monotonic()))
            except queue.Empty:
                reason = "stalled"
                break
            in_flight -= 1
            finished += 1
            newly = []
            g.release(node, newly)
            ready.extend(v for v in newly if g.search_local(v) is not None)
    finally:
        for _ in slaves:
            work.put(None)
        for t in slaves:
            t.join()
    return replay.verdict(started, reason)

