"""The lock-free block graph: concurrent inserts, then claim-driven replay."""
import threading
from collections import deque

from scexec import BlockGraph

g = BlockGraph()
conflicts = {1: set(), 2: {1}, 3: {1}, 4: {2, 3}, 5: set(), 6: {5, 4}}


def insert(items):
    for ts, cl in items:
        g.build_from_conflicts(ts, ts - 1, cl)


# four threads report commits in arbitrary order
items = list(conflicts.items())
threads = [threading.Thread(target=insert, args=(items[k::4],)) for k in range(4)]
for t in threads:
    t.start()
for t in threads:
    t.join()

print(g.serialize())
print("indegrees:", g.in_counts())

# validators claim indegree-zero vertices with CAS(0 -> -1) and release
# their successors when done
order = []
lock = threading.Lock()


def validate():
    cache = deque()
    while g.nc.get() < len(conflicts):
        node = g.search_local(cache.popleft()) if cache else g.search_global()
        if node is None:
            continue
        with lock:
            order.append(node.ts)
        g.release(node, cache)


threads = [threading.Thread(target=validate) for _ in range(3)]
for t in threads:
    t.start()
for t in threads:
    t.join()
print("execution order:", order, " claims:", g.nc.get())
