"""Concurrent append-only event log of transactional operations.

The log order is the order in which events were appended, and every append
happens inside the critical section of the operation it records, so the
sequence numbers linearize the operations.
"""

import threading
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

BEGIN = "BEGIN"
READ = "READ"
WRITE = "WRITE"
COMMIT = "COMMIT"
ABORT = "ABORT"

OPS = (BEGIN, READ, WRITE, COMMIT, ABORT)


class HistoryFormatError(ValueError):
    pass


class Event(NamedTuple):
    seq: int
    thread: int
    ts: int
    op: str
    key: Optional[str] = None
    value: Optional[int] = None
    # timestamp of the transaction whose write a READ returned, when known
    src: Optional[int] = None


@dataclass
class TxnView:
    """Per-transaction projection of a history."""

    ts: int
    first_seq: int
    last_seq: int = -1
    status: str = "live"  # live | committed | aborted
    commit_seq: Optional[int] = None
    reads: list = field(default_factory=list)  # (seq, key, value, src)
    writes: dict = field(default_factory=dict)  # key -> last buffered value

    @property
    def committed(self):
        return self.status == "committed"

    @property
    def write_set(self):
        return set(self.writes)


class History:
    def __init__(self, events=()):
        self._events = list(events)
        self.lock = threading.Lock()

    def __len__(self):
        return len(self._events)

    def __iter__(self):
        return iter(self._events)

    @property
    def events(self):
        return list(self._events)

    def record(self, ts, op, key=None, value=None, src=None):
        with self.lock:
            self._append_locked(ts, op, key, value, src)

    def _append_locked(self, ts, op, key=None, value=None, src=None):
        self._events.append(
            Event(len(self._events), threading.get_ident(), ts, op, key, value, src))

    def record_begin(self, counter):
        """Draw a timestamp from ``counter`` and log BEGIN in one step.

        Keeping both under the log lock guarantees that a transaction which
        starts after another one finished also has the larger timestamp.
        """
        with self.lock:
            ts = counter.get_and_increment()
            self._append_locked(ts, BEGIN)
        return ts

    # --- derived views -------------------------------------------------

    def transactions(self):
        """Map ts -> TxnView, in order of first appearance."""
        txns = {}
        for ev in self._events:
            view = txns.get(ev.ts)
            if view is None:
                view = txns[ev.ts] = TxnView(ev.ts, ev.seq)
            view.last_seq = ev.seq
            if ev.op == READ:
                view.reads.append((ev.seq, ev.key, ev.value, ev.src))
            elif ev.op == WRITE:
                view.writes[ev.key] = ev.value
            elif ev.op == COMMIT:
                view.status = "committed"
                view.commit_seq = ev.seq
            elif ev.op == ABORT:
                view.status = "aborted"
        return txns

    def committed(self):
        return {ts: t for ts, t in self.transactions().items() if t.committed}

    def completed(self):
        """Copy of this history with every live transaction closed by ABORT."""
        events = list(self._events)
        for ts, view in self.transactions().items():
            if view.status == "live":
                events.append(Event(len(events), 0, ts, ABORT))
        return History(events)

    def is_well_formed(self):
        state = {}
        for ev in self._events:
            cur = state.get(ev.ts)
            if cur is None:
                if ev.op != BEGIN:
                    return False
                state[ev.ts] = "live"
            elif cur != "live" or ev.op == BEGIN:
                return False
            elif ev.op in (COMMIT, ABORT):
                state[ev.ts] = ev.op
        return True

    # --- text format ---------------------------------------------------

    def dumps(self):
        lines = [f"HISTORY v1 {len(self._events)}"]
        for ev in self._events:
            parts = ["EV", str(ev.seq), str(ev.thread), str(ev.ts), ev.op]
            if ev.op == READ:
                parts += [ev.key, str(ev.value), "-" if ev.src is None else str(ev.src)]
            elif ev.op == WRITE:
                parts += [ev.key, str(ev.value)]
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise HistoryFormatError("empty history")
        head = lines[0].split()
        if len(head) != 3 or head[:2] != ["HISTORY", "v1"]:
            raise HistoryFormatError(f"bad header: {lines[0]!r}")
        events = []
        try:
            count = int(head[2])
            for ln in lines[1:]:
                parts = ln.split()
                if parts[0] != "EV" or parts[4] not in OPS:
                    raise HistoryFormatError(f"bad event line: {ln!r}")
                seq, thread, ts = int(parts[1]), int(parts[2]), int(parts[3])
                op = parts[4]
                key = value = src = None
                if op == READ:
                    key, value = parts[5], int(parts[6])
                    src = None if parts[7] == "-" else int(parts[7])
                elif op == WRITE:
                    key, value = parts[5], int(parts[6])
                events.append(Event(seq, thread, ts, op, key, value, src))
        except (IndexError, ValueError) as exc:
            raise HistoryFormatError(str(exc)) from exc
        if count != len(events):
            raise HistoryFormatError(f"header says {count} events, found {len(events)}")
        return cls(events)
