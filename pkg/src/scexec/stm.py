"""Optimistic software transactional memory: BTO and MVTO.

Both protocols share one transaction interface (``begin``, ``read``,
``write``, ``try_commit``, ``abort``) and record, for every committed
transaction, the set of committed transactions it conflicts with.  The block
graph builder consumes those sets through :meth:`Stm.get_conflicts`.

Reads that fail timestamp validation raise :class:`AbortError`; the caller
retries the whole atomic unit under a fresh ``begin``.
"""

import bisect
import threading

from .atomic import AtomicInteger
from .history import ABORT, COMMIT, READ, WRITE

BTO = "BTO"
MVTO = "MVTO"
PROTOCOLS = (BTO, MVTO)

LIVE = "live"
COMMITTED = "committed"
ABORTED = "aborted"

INT64_MIN = -(2 ** 63)
INT64_MAX = 2 ** 63 - 1


class ConfigurationError(ValueError):
    pass


class TransactionStateError(RuntimeError):
    pass


class AbortError(Exception):
    def __init__(self, ts, key=None):
        super().__init__(f"transaction {ts} aborted" + (f" on {key!r}" if key else ""))
        self.ts = ts
        self.key = key


class TxnDescriptor:
    __slots__ = ("ts", "read_set", "write_set", "status", "versions")

    def __init__(self, ts):
        self.ts = ts
        self.read_set = {}   # key -> value read
        self.write_set = {}  # key -> buffered value
        self.status = LIVE
        self.versions = {}   # MVTO: key -> VersionTuple the read came from

    def __repr__(self):
        return f"<Txn {self.ts} {self.status} r={len(self.read_set)} w={len(self.write_set)}>"


class SharedObjectBTO:
    __slots__ = ("key", "value", "lock", "max_read", "max_write", "read_list", "write_list")

    def __init__(self, key, value=0):
        self.key = key
        self.value = value
        self.lock = threading.Lock()
        self.max_read = 0
        self.max_write = 0
        self.read_list = set()
        self.write_list = set()


class VersionTuple:
    __slots__ = ("ts", "value", "max_read", "read_list")

    def __init__(self, ts, value):
        self.ts = ts
        self.value = value
        self.max_read = 0
        self.read_list = set()

    def __repr__(self):
        return f"<v{self.ts}={self.value} max_r={self.max_read} rl={sorted(self.read_list)}>"


class VersionedObjectMVTO:
    __slots__ = ("key", "lock", "versions", "_stamps")

    def __init__(self, key, value=0):
        self.key = key
        self.lock = threading.Lock()
        self.versions = [VersionTuple(0, value)]
        self._stamps = [0]

    def find(self, ts):
        """Version with the largest timestamp strictly below ``ts``."""
        return self.versions[bisect.bisect_left(self._stamps, ts) - 1]

    def successor(self, version):
        """Version right after ``version`` in timestamp order, or None."""
        pos = bisect.bisect_right(self._stamps, version.ts)
        return self.versions[pos] if pos < len(self.versions) else None

    def insert(self, version):
        pos = bisect.bisect_left(self._stamps, version.ts)
        self._stamps.insert(pos, version.ts)
        self.versions.insert(pos, version)

    @property
    def latest(self):
        return self.versions[-1]


def _check_value(v):
    if not isinstance(v, int) or not INT64_MIN <= v <= INT64_MAX:
        raise ValueError(f"value {v!r} is not a 64-bit signed integer")


class Stm:
    """Protocol-independent part: counter, descriptors, conflict store."""

    protocol = None

    def __init__(self, keys, initial=None, history=None):
        keys = list(keys)
        if not keys:
            raise ConfigurationError("at least one shared object is required")
        if len(set(keys)) != len(keys):
            raise ConfigurationError("duplicate object keys")
        initial = initial or {}
        unknown = set(initial) - set(keys)
        if unknown:
            raise ConfigurationError(f"initial values for undeclared keys {sorted(unknown)}")
        for v in initial.values():
            _check_value(v)
        self.objects = {k: self._make_object(k, initial.get(k, 0)) for k in keys}
        self.counter = AtomicInteger(1)
        self.history = history
        self.aborts = AtomicInteger(0)
        self._conflicts = {}
        self._conflicts_lock = threading.Lock()

    def _make_object(self, key, value):
        raise NotImplementedError

    @property
    def keys(self):
        return list(self.objects)

    def _obj(self, key):
        try:
            return self.objects[key]
        except KeyError:
            raise ConfigurationError(f"unknown shared object {key!r}") from None

    def _record(self, ts, op, key=None, value=None, src=None):
        if self.history is not None:
            self.history.record(ts, op, key, value, src)

    def begin(self):
        if self.history is not None:
            ts = self.history.record_begin(self.counter)
        else:
            ts = self.counter.get_and_increment()
        return TxnDescriptor(ts)

    def write(self, txn, key, value):
        self._require_live(txn)
        self._obj(key)
        _check_value(value)
        txn.write_set[key] = value
        self._record(txn.ts, WRITE, key, value)

    def read(self, txn, key):
        self._require_live(txn)
        if key in txn.write_set:
            return txn.write_set[key]
        if key in txn.read_set:
            return txn.read_set[key]
        return self._read_shared(txn, self._obj(key))

    def abort(self, txn):
        """Discard ``txn``'s local log.  Idempotent on aborted descriptors."""
        if txn.status == ABORTED:
            return
        if txn.status != LIVE:
            raise TransactionStateError(f"cannot abort {txn!r}")
        txn.status = ABORTED
        self.aborts.increment_and_get()
        self._record(txn.ts, ABORT)

    def _fail(self, txn, key=None):
        self.abort(txn)
        raise AbortError(txn.ts, key)

    def try_commit(self, txn):
        self._require_live(txn)
        conflicts = self._commit(txn)
        conflicts.discard(txn.ts)
        conflicts.discard(0)
        with self._conflicts_lock:
            self._conflicts[txn.ts] = frozenset(conflicts)
        txn.status = COMMITTED

    def get_conflicts(self, ts):
        try:
            return self._conflicts[ts]
        except KeyError:
            raise KeyError(f"transaction {ts} has not committed") from None

    def committed_timestamps(self):
        with self._conflicts_lock:
            return sorted(self._conflicts)

    def snapshot(self):
        """Current committed value of every object.  Call only when quiescent."""
        raise NotImplementedError

    @staticmethod
    def _require_live(txn):
        if txn.status != LIVE:
            raise TransactionStateError(f"{txn!r} is not live")

    def _read_shared(self, txn, obj):
        raise NotImplementedError

    def _commit(self, txn):
        raise NotImplementedError


class BtoStm(Stm):
    """Single-version basic timestamp ordering."""

    protocol = BTO

    def _make_object(self, key, value):
        return SharedObjectBTO(key, value)

    def _read_shared(self, txn, obj):
        i = txn.ts
        with obj.lock:
            if obj.max_write > i:
                stale = True
            else:
                stale = False
                if obj.max_read < i:
                    obj.max_read = i
                value = obj.value
                self._record(i, READ, obj.key, value, obj.max_write)
        if stale:
            self._fail(txn, obj.key)
        txn.read_set[obj.key] = value
        return value

    def _commit(self, txn):
        i = txn.ts
        held = []
        try:
            for key in sorted(txn.write_set):
                obj = self.objects[key]
                obj.lock.acquire()
                held.append(obj)
                if obj.max_write > i or obj.max_read > i:
                    break
            else:
                # validated: every write latch is held, so no reader can see
                # the new values before the commit event is logged
                self._record(i, COMMIT)
                conflicts = set()
                while held:
                    obj = held.pop(0)
                    obj.value = txn.write_set[obj.key]
                    obj.max_write = i
                    conflicts |= obj.read_list
                    conflicts |= obj.write_list
                    obj.write_list.add(i)
                    obj.lock.release()
                for key in sorted(txn.read_set):
                    obj = self.objects[key]
                    with obj.lock:
                        conflicts |= obj.write_list
                        obj.read_list.add(i)
                return conflicts
        finally:
            for obj in held:
                obj.lock.release()
        self._fail(txn)

    def snapshot(self):
        return {k: o.value for k, o in self.objects.items()}


class MvtoStm(Stm):
    """Multi-version timestamp ordering; reads never abort."""

    protocol = MVTO

    def _make_object(self, key, value):
        return VersionedObjectMVTO(key, value)

    def find(self, ts, key):
        return self._obj(key).find(ts)

    def check_version(self, ts, key):
        """False iff a transaction later than ``ts`` already read the version
        ``ts`` would overwrite.  Caller holds the object's latch."""
        return not ts < self._obj(key).find(ts).max_read

    def _read_shared(self, txn, obj):
        i = txn.ts
        with obj.lock:
            version = obj.find(i)
            if version.max_read < i:
                version.max_read = i
            self._record(i, READ, obj.key, version.value, version.ts)
        txn.read_set[obj.key] = version.value
        txn.versions[obj.key] = version
        return version.value

    def _commit(self, txn):
        i = txn.ts
        held = []
        predecessors = {}
        try:
            for key in sorted(txn.write_set):
                obj = self.objects[key]
                obj.lock.acquire()
                held.append(obj)
                if not self.check_version(i, key):
                    break
                predecessors[key] = obj.find(i)
            else:
                self._record(i, COMMIT)
                conflicts = set()
                while held:
                    obj = held.pop(0)
                    mine = VersionTuple(i, txn.write_set[obj.key])
                    obj.insert(mine)
                    prev = predecessors[obj.key]
                    if prev.read_list:
                        conflicts |= prev.read_list
                    else:
                        conflicts.add(prev.ts)
                    nxt = obj.successor(mine)
                    if nxt is not None:
                        conflicts.add(nxt.ts)
                    obj.lock.release()
                for key in sorted(txn.read_set):
                    obj = self.objects[key]
                    with obj.lock:
                        version = txn.versions[key]
                        version.read_list.add(i)
                        conflicts.add(version.ts)
                        nxt = obj.successor(version)
                        if nxt is not None:
                            conflicts.add(nxt.ts)
                return conflicts
        finally:
            for obj in held:
                obj.lock.release()
        self._fail(txn)

    def snapshot(self):
        return {k: o.latest.value for k, o in self.objects.items()}


def stm_init(keys, protocol=BTO, initial=None, history=None):
    """Create an STM over ``keys``; every object starts at 0 unless
    ``initial`` overrides it (both written by the initializing transaction)."""
    if protocol == BTO:
        return BtoStm(keys, initial, history)
    if protocol == MVTO:
        return MvtoStm(keys, initial, history)
    raise ConfigurationError(f"unknown protocol {protocol!r}")
