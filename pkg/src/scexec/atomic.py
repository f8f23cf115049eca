"""Atomic cells with compare-and-swap semantics.

CPython exposes no hardware CAS, so each cell serializes its own
read-modify-write with a private lock.  The lock is held for a handful of
bytecodes and never across user code, so algorithms built on these cells
keep their CAS-retry structure.
"""

import threading


class AtomicInteger:
    __slots__ = ("_value", "_lock")

    def __init__(self, value=0):
        self._value = value
        self._lock = threading.Lock()

    def get(self):
        return self._value

    def set(self, value):
        with self._lock:
            self._value = value

    def compare_and_set(self, expect, update):
        with self._lock:
            if self._value != expect:
                return False
            self._value = update
            return True

    def get_and_increment(self):
        with self._lock:
            value = self._value
            self._value = value + 1
            return value

    def increment_and_get(self):
        with self._lock:
            self._value += 1
            return self._value

    def decrement_and_get(self):
        with self._lock:
            self._value -= 1
            return self._value

    def __repr__(self):
        return f"AtomicInteger({self._value})"


class AtomicReference:
    """Reference cell; CAS compares by identity."""

    __slots__ = ("_ref", "_lock")

    def __init__(self, ref=None):
        self._ref = ref
        self._lock = threading.Lock()

    def get(self):
        return self._ref

    def set(self, ref):
        with self._lock:
            self._ref = ref

    def compare_and_set(self, expect, update):
        with self._lock:
            if self._ref is not expect:
                return False
            self._ref = update
            return True
