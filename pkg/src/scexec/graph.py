"""Lock-free block graph.

Vertices (one per committed transaction) sit in a singly linked list sorted
by timestamp between two sentinels; each vertex owns a sorted edge list
pointing at later-timestamp vertices.  Miner threads insert with CAS on the
predecessor's link; validator threads claim source vertices by CAS on the
indegree counter (0 -> -1).  Nodes are never unlinked, so traversals need no
reclamation scheme.
"""

from .atomic import AtomicInteger, AtomicReference

ADDED = "added"
ALREADY_PRESENT = "already-present"

HEAD_TS = float("-inf")
TAIL_TS = float("inf")

CLAIMED = -1


class GraphError(ValueError):
    pass


class MissingVertexError(GraphError):
    pass


class DirectionError(GraphError):
    pass


class GraphFormatError(GraphError):
    pass


class GraphIntegrityError(GraphError):
    pass


class EdgeNode:
    __slots__ = ("ts", "vref", "next")

    def __init__(self, ts, vref=None, nxt=None):
        self.ts = ts
        self.vref = vref
        self.next = AtomicReference(nxt)


class VertexNode:
    __slots__ = ("ts", "au_id", "in_count", "next", "edge_head")

    def __init__(self, ts, au_id=None, nxt=None):
        self.ts = ts
        self.au_id = au_id
        self.in_count = AtomicInteger(0)
        self.next = AtomicReference(nxt)
        tail = EdgeNode(TAIL_TS)
        self.edge_head = EdgeNode(HEAD_TS, nxt=tail)

    def edges(self):
        node = self.edge_head.next.get()
        while node.ts != TAIL_TS:
            yield node
            node = node.next.get()

    def __repr__(self):
        return f"<Vertex ts={self.ts} au={self.au_id} in={self.in_count.get()}>"


class BlockGraph:
    def __init__(self):
        self.tail = VertexNode(TAIL_TS)
        self.head = VertexNode(HEAD_TS, nxt=self.tail)
        self.size = AtomicInteger(0)
        self.nc = AtomicInteger(0)

    # --- miner side ----------------------------------------------------

    def _locate(self, start, ts):
        pred = start
        curr = pred.next.get()
        while curr.ts < ts:
            pred = curr
            curr = curr.next.get()
        return pred, curr

    def add_vertex(self, ts, au_id=None):
        if not ts >= 1:
            raise GraphError(f"vertex timestamp must be >= 1, got {ts}")
        pred = self.head
        while True:
            pred, curr = self._locate(pred, ts)
            if curr.ts == ts:
                # a conflicting committer may have created this vertex before
                # its owner got to it; only the owner knows the AU id
                if au_id is not None and curr.au_id is None:
                    curr.au_id = au_id
                return ALREADY_PRESENT
            node = VertexNode(ts, au_id, curr)
            if pred.next.compare_and_set(curr, node):
                self.size.increment_and_get()
                return ADDED
            # lost the race; resume from the same predecessor

    def find_vertex(self, ts):
        _, curr = self._locate(self.head, ts)
        return curr if curr.ts == ts else None

    def add_edge(self, from_ts, to_ts):
        if from_ts >= to_ts:
            raise DirectionError(f"edge {from_ts}->{to_ts} must go from lower to higher timestamp")
        src = self.find_vertex(from_ts)
        if src is None:
            raise MissingVertexError(f"no vertex {from_ts}")
        # the target sorts after the source, so search on from there
        _, dst = self._locate(src, to_ts)
        if dst.ts != to_ts:
            raise MissingVertexError(f"no vertex {to_ts}")
        pred = src.edge_head
        while True:
            pred, curr = self._locate(pred, to_ts)
            if curr.ts == to_ts:
                return ALREADY_PRESENT
            node = EdgeNode(to_ts, dst, curr)
            if pred.next.compare_and_set(curr, node):
                dst.in_count.increment_and_get()
                return ADDED

    def build_from_conflicts(self, ts, au_id, conflicts):
        """Add the vertex for committed ``ts`` and one edge per conflict,
        oriented from the lower to the higher timestamp."""
        self.add_vertex(ts, au_id)
        for other in conflicts:
            self.add_vertex(other)
            if other < ts:
                self.add_edge(other, ts)
            else:
                self.add_edge(ts, other)

    @classmethod
    def bulk(cls, vertices, edges):
        """Single-threaded construction from ``(ts, au_id)`` pairs and
        ``(from_ts, to_ts)`` edges; links nodes directly instead of searching
        the lists once per insertion."""
        g = cls()
        nodes = {}
        for ts, au_id in sorted(vertices, key=lambda v: v[0]):
            if not ts >= 1:
                raise GraphError(f"vertex timestamp must be >= 1, got {ts}")
            if ts in nodes:
                raise GraphFormatError(f"duplicate vertex {ts}")
            nodes[ts] = VertexNode(ts, au_id)
        out = {}
        for a, b in edges:
            if a >= b:
                raise DirectionError(f"edge {a}->{b} must go from lower to higher timestamp")
            if a not in nodes or b not in nodes:
                raise MissingVertexError(f"edge {a}->{b} has no endpoint vertex")
            out.setdefault(a, set()).add(b)
        # push to the front in descending order so both lists end up ascending
        for ts in sorted(nodes, reverse=True):
            v = nodes[ts]
            v.next.set(g.head.next.get())
            g.head.next.set(v)
            for b in sorted(out.get(ts, ()), reverse=True):
                v.edge_head.next.set(EdgeNode(b, nodes[b], v.edge_head.next.get()))
                nodes[b].in_count.increment_and_get()
        g.size.set(len(nodes))
        return g

    # --- validator side ------------------------------------------------

    def search_local(self, node):
        """Claim a vertex taken from a thread's cache list, or return None."""
        if node.in_count.compare_and_set(0, CLAIMED):
            self.nc.increment_and_get()
            return node
        return None

    def search_global(self):
        node = self.head.next.get()
        while node is not self.tail:
            if node.in_count.compare_and_set(0, CLAIMED):
                self.nc.increment_and_get()
                return node
            node = node.next.get()
        return None

    @staticmethod
    def dec_in_count(cursor, cache):
        """Release one outgoing edge of a finished vertex.

        ``cursor`` is the claimed vertex on the first call and the edge node
        returned by the previous call afterwards; returns None once the edge
        list is exhausted.  Targets whose indegree drops to zero go to
        ``cache``.
        """
        edge = cursor.edge_head.next.get() if isinstance(cursor, VertexNode) else cursor
        if edge.ts == TAIL_TS:
            return None
        left = edge.vref.in_count.decrement_and_get()
        if left < 0:
            raise GraphIntegrityError(f"indegree of vertex {edge.ts} went negative")
        if left == 0:
            cache.append(edge.vref)
        nxt = edge.next.get()
        return None if nxt.ts == TAIL_TS else nxt

    def release(self, node, cache):
        """Run :meth:`dec_in_count` over every outgoing edge of ``node``."""
        cursor = self.dec_in_count(node, cache)
        while cursor is not None:
            cursor = self.dec_in_count(cursor, cache)

    # --- inspection (quiescent use only) -------------------------------

    def vertices(self):
        node = self.head.next.get()
        while node is not self.tail:
            yield node
            node = node.next.get()

    def __len__(self):
        return sum(1 for _ in self.vertices())

    def edge_set(self):
        return {(v.ts, e.ts) for v in self.vertices() for e in v.edges()}

    def au_map(self):
        return {v.ts: v.au_id for v in self.vertices()}

    def in_counts(self):
        return {v.ts: v.in_count.get() for v in self.vertices()}

    def check_invariants(self):
        """Sortedness, edge direction and indegree bookkeeping; raises on breach."""
        prev = HEAD_TS
        indeg = {}
        for v in self.vertices():
            if not v.ts > prev:
                raise GraphIntegrityError(f"vertex list not ascending at {v.ts}")
            prev = v.ts
            last = HEAD_TS
            for e in v.edges():
                if not e.ts > last:
                    raise GraphIntegrityError(f"edge list of {v.ts} not ascending at {e.ts}")
                if not e.ts > v.ts:
                    raise GraphIntegrityError(f"edge {v.ts}->{e.ts} points backwards")
                if e.vref.ts != e.ts:
                    raise GraphIntegrityError(f"edge {v.ts}->{e.ts} references vertex {e.vref.ts}")
                last = e.ts
                indeg[e.ts] = indeg.get(e.ts, 0) + 1
        for v in self.vertices():
            cnt = v.in_count.get()
            if cnt != CLAIMED and cnt > indeg.get(v.ts, 0):
                raise GraphIntegrityError(f"vertex {v.ts} indegree {cnt} exceeds edge count")

    def __eq__(self, other):
        if not isinstance(other, BlockGraph):
            return NotImplemented
        return self.au_map() == other.au_map() and self.edge_set() == other.edge_set()

    # --- canonical text form -------------------------------------------

    def serialize(self):
        self.check_invariants()
        verts = list(self.vertices())
        edges = sorted(self.edge_set())
        lines = [f"BG v1 {len(verts)} {len(edges)}"]
        for v in verts:
            lines.append(f"V {v.ts} {'-' if v.au_id is None else v.au_id}")
        lines += [f"E {a} {b}" for a, b in edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def deserialize(cls, text):
        lines = text.splitlines() if isinstance(text, str) else list(text)
        lines = [ln for ln in lines if ln.strip()]
        if not lines:
            raise GraphFormatError("empty graph text")
        head = lines[0].split()
        if len(head) != 4 or head[:2] != ["BG", "v1"]:
            raise GraphFormatError(f"bad graph header {lines[0]!r}")
        try:
            n_verts, n_edges = int(head[2]), int(head[3])
        except ValueError as exc:
            raise GraphFormatError(str(exc)) from exc
        body = lines[1:]
        if len(body) != n_verts + n_edges:
            raise GraphFormatError(
                f"header announces {n_verts}+{n_edges} lines, found {len(body)}")
        try:
            verts, edges = [], []
            for ln in body[:n_verts]:
                tag, ts, au = ln.split()
                if tag != "V":
                    raise GraphFormatError(f"expected vertex line, got {ln!r}")
                verts.append((int(ts), None if au == "-" else int(au)))
            for ln in body[n_verts:]:
                tag, a, b = ln.split()
                if tag != "E":
                    raise GraphFormatError(f"expected edge line, got {ln!r}")
                a, b = int(a), int(b)
                if a >= b:
                    raise GraphIntegrityError(f"edge {a}->{b} would allow a cycle")
                edges.append((a, b))
            g = cls.bulk(verts, edges)
        except MissingVertexError as exc:
            raise GraphFormatError(str(exc)) from exc
        except ValueError as exc:
            if isinstance(exc, GraphError):
                raise
            raise GraphFormatError(str(exc)) from exc
        return g
