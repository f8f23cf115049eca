"""Offline correctness oracles over recorded histories.

* :func:`conflict_graph` / :func:`is_csr` - conflict serializability
* :func:`is_mvsr` - multi-version view serializability, exhaustive search
* :func:`is_opaque` - opacity, exhaustive search over all transactions
* :func:`bg_matches_history` - block graph against recorded conflicts

The exhaustive checks only look at what the history recorded (read values,
read sources, write sets); they never re-run contract code.
"""

from graphlib import CycleError, TopologicalSorter

from .history import COMMIT, READ
from .stm import BTO, MVTO

MAX_MVSR_TXNS = 8
MAX_OPACITY_TXNS = 6


class CapacityError(ValueError):
    pass


def conflict_graph(h):
    """Adjacency ``{ts: set(successors)}`` over committed transactions.

    k -> m when k and m both write some x and k commits first; when k
    commits a write of x before m reads x; or when k reads x before m
    commits a write of x.
    """
    committed = h.committed()
    adj = {ts: set() for ts in committed}
    writers_of = {}
    for ts, t in committed.items():
        for key in t.writes:
            writers_of.setdefault(key, set()).add(ts)
    seen_writers = {}  # key -> committed writers so far
    seen_readers = {}  # key -> committed readers so far
    for ev in h:
        if ev.ts not in committed:
            continue
        if ev.op == READ:
            for k in seen_writers.get(ev.key, ()):
                if k != ev.ts:
                    adj[k].add(ev.ts)
            seen_readers.setdefault(ev.key, set()).add(ev.ts)
        elif ev.op == COMMIT:
            for key in committed[ev.ts].writes:
                for k in seen_writers.get(key, set()) | seen_readers.get(key, set()):
                    if k != ev.ts:
                        adj[k].add(ev.ts)
                seen_writers.setdefault(key, set()).add(ev.ts)
    return adj


def is_acyclic(adj):
    try:
        tuple(TopologicalSorter({n: set() for n in adj} | _reverse(adj)).static_order())
    except CycleError:
        return False
    return True


def _reverse(adj):
    preds = {}
    for a, succ in adj.items():
        for b in succ:
            preds.setdefault(b, set()).add(a)
    return preds


def is_csr(h):
    return is_acyclic(conflict_graph(h))


def conflict_pairs(h):
    """Unordered conflicting pairs as ``(low_ts, high_ts)`` tuples."""
    return {(min(a, b), max(a, b)) for a, succ in conflict_graph(h).items() for b in succ}


def _real_time_preds(txns):
    """ts -> set of transactions that finished before it started."""
    preds = {ts: set() for ts in txns}
    for a, ta in txns.items():
        if ta.status == "live":
            continue
        for b, tb in txns.items():
            if a != b and ta.last_seq < tb.first_seq:
                preds[b].add(a)
    return preds


def _serial_witness(txns, initial):
    """Order of ``txns`` in which every read is legal, or None.

    Each read must see the last *committed* writer placed before its
    transaction (the initial state if none); aborted transactions are
    placed but their writes stay invisible.  Real-time order is respected.
    """
    preds = _real_time_preds(txns)
    order, placed = [], set()
    last_writer = {}

    def legal(t):
        for _, key, value, src in t.reads:
            w = last_writer.get(key, 0)
            if src is not None and src != w:
                return False
            if w == 0:
                if initial is not None and initial.get(key, 0) != value:
                    return False
            elif txns[w].writes[key] != value:
                return False
        return True

    def dfs():
        if len(order) == len(txns):
            return True
        for ts in sorted(txns):
            t = txns[ts]
            if ts in placed or not preds[ts] <= placed or not legal(t):
                continue
            saved = {}
            if t.committed:
                for key in t.writes:
                    saved[key] = last_writer.get(key)
                    last_writer[key] = ts
            order.append(ts)
            placed.add(ts)
            if dfs():
                return True
            placed.discard(ts)
            order.pop()
            for key, prev in saved.items():
                if prev is None:
                    del last_writer[key]
                else:
                    last_writer[key] = prev
        return False

    return list(order) if dfs() else None


def mvsr_witness(h, initial=None, max_txns=MAX_MVSR_TXNS):
    txns = h.committed()
    if len(txns) > max_txns:
        raise CapacityError(f"{len(txns)} committed transactions exceed the cap of {max_txns}")
    return _serial_witness(txns, initial)


def is_mvsr(h, initial=None, max_txns=MAX_MVSR_TXNS):
    """Some serial order of the committed transactions preserves every
    read's source and value and respects real-time order."""
    return mvsr_witness(h, initial, max_txns) is not None


def opacity_witness(h, initial=None, max_txns=MAX_OPACITY_TXNS):
    txns = h.completed().transactions()
    if len(txns) > max_txns:
        raise CapacityError(f"{len(txns)} transactions exceed the cap of {max_txns}")
    return _serial_witness(txns, initial)


def is_opaque(h, initial=None, max_txns=MAX_OPACITY_TXNS):
    """Some t-sequential legal order of *all* transactions (live ones closed
    as aborted) respects real-time order."""
    return opacity_witness(h, initial, max_txns) is not None


def _reachable(edges):
    succ = {}
    for a, b in edges:
        succ.setdefault(a, set()).add(b)
    memo = {}

    def reach(a):
        if a not in memo:
            out = set()
            for b in succ.get(a, ()):
                out.add(b)
                out |= reach(b)
            memo[a] = out
        return memo[a]

    return reach


def bg_matches_history(g, h, transitive=False):
    """Vertices are exactly the committed transactions, every graph edge
    joins a conflicting pair, and every conflicting pair is joined by an
    edge lower -> higher timestamp (by a path when ``transitive``)."""
    committed = set(h.committed())
    if {v.ts for v in g.vertices()} != committed:
        return False
    edges = g.edge_set()
    pairs = conflict_pairs(h)
    if any(a >= b for a, b in edges) or not edges <= pairs:
        return False
    if not transitive:
        return pairs <= edges
    reach = _reachable(edges)
    return all(b in reach(a) for a, b in pairs)


def final_state_from_history(h, initial):
    """Apply the committed write sets in timestamp order to ``initial``."""
    state = dict(initial)
    committed = h.committed()
    for ts in sorted(committed):
        state.update(committed[ts].writes)
    return state


def reads_follow_protocol(h, protocol, initial):
    """Replay the log and check each read against the protocol's read rule.

    BTO reads return the newest committed value; MVTO reads return the
    committed version with the largest timestamp below the reader's.
    """
    txns = h.transactions()
    versions = {k: [(0, v)] for k, v in initial.items()}
    for ev in h:
        if ev.op == COMMIT:
            for key, value in txns[ev.ts].writes.items():
                versions.setdefault(key, [(0, initial.get(key, 0))]).append((ev.ts, value))
        elif ev.op == READ:
            vs = versions.get(ev.key, [(0, initial.get(ev.key, 0))])
            if protocol == BTO:
                expect = max(vs)
            elif protocol == MVTO:
                expect = max(v for v in vs if v[0] < ev.ts)
            else:
                raise ValueError(f"unknown protocol {protocol!r}")
            if (expect[1] != ev.value) or (ev.src is not None and ev.src != expect[0]):
                return False
    return True
