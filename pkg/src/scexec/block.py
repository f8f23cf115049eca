"""Block container and its canonical, hash-sealed text format."""

import hashlib
from dataclasses import dataclass, field

from .contracts import FAILED, OK, AtomicUnit, method_exists
from .graph import BlockGraph, GraphError

GENESIS_HASH = "0" * 64


class BlockFormatError(ValueError):
    pass


class BlockIntegrityError(ValueError):
    pass


@dataclass
class Block:
    aus: list
    graph_text: str
    final_state: dict
    outcomes: dict
    prev_hash: str = GENESIS_HASH
    hash: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def graph(self):
        """Fresh graph instance; validators consume (claim) the copy they get."""
        return BlockGraph.deserialize(self.graph_text)

    def body(self):
        return _body(self)

    def seal(self):
        self.hash = compute_block_hash(self)
        return self


def _body(block):
    lines = ["BLOCK v1", f"PREV {block.prev_hash}", f"NAUS {len(block.aus)}"]
    for au in block.aus:
        params = " ".join(str(p) for p in au.params)
        outcome = block.outcomes.get(au.au_id, "-")
        lines.append(" ".join(x for x in ("AU", str(au.au_id), au.contract, au.method,
                                          params, outcome) if x))
    text = "\n".join(lines) + "\n" + block.graph_text
    text += "".join(f"STATE {k} {block.final_state[k]}\n" for k in sorted(block.final_state))
    return text


def compute_block_hash(block):
    """SHA-256 hex digest over the canonical block text without its HASH line."""
    return hashlib.sha256(_body(block).encode("utf-8")).hexdigest()


def write_block(block):
    return _body(block) + f"HASH {compute_block_hash(block)}\n"


def read_block(text, verify=True):
    lines = text.splitlines()
    if not lines or lines[0] != "BLOCK v1":
        raise BlockFormatError("missing 'BLOCK v1' header")
    try:
        tag, prev = lines[1].split()
        if tag != "PREV":
            raise BlockFormatError(f"expected PREV, got {lines[1]!r}")
        tag, n = lines[2].split()
        if tag != "NAUS":
            raise BlockFormatError(f"expected NAUS, got {lines[2]!r}")
        n = int(n)
        aus, outcomes = [], {}
        for ln in lines[3:3 + n]:
            parts = ln.split()
            if len(parts) < 5 or parts[0] != "AU":
                raise BlockFormatError(f"bad AU line {ln!r}")
            au_id, contract, method = int(parts[1]), parts[2], parts[3]
            params = tuple(int(p) for p in parts[4:-1])
            if not method_exists(contract, method, len(params)):
                raise BlockFormatError(f"unknown method in {ln!r}")
            if parts[-1] not in (OK, FAILED):
                raise BlockFormatError(f"bad outcome in {ln!r}")
            aus.append(AtomicUnit(au_id, contract, method, params))
            outcomes[au_id] = parts[-1]
        pos = 3 + n
        head = lines[pos].split()
        if head[:2] != ["BG", "v1"] or len(head) != 4:
            raise BlockFormatError(f"expected graph header, got {lines[pos]!r}")
        g_len = 1 + int(head[2]) + int(head[3])
        graph_text = "\n".join(lines[pos:pos + g_len]) + "\n"
        try:
            BlockGraph.deserialize(graph_text)
        except GraphError as exc:
            raise BlockFormatError(f"bad graph: {exc}") from exc
        pos += g_len
        state = {}
        while pos < len(lines) and lines[pos].startswith("STATE"):
            tag, key, value = lines[pos].split()
            if tag != "STATE":
                raise BlockFormatError(f"bad STATE line {lines[pos]!r}")
            state[key] = int(value)
            pos += 1
        if pos != len(lines) - 1:
            raise BlockFormatError(f"unexpected line {lines[pos]!r}")
        tag, digest = lines[pos].split()
        if tag != "HASH":
            raise BlockFormatError(f"expected HASH, got {lines[pos]!r}")
    except (IndexError, ValueError) as exc:
        if isinstance(exc, BlockFormatError):
            raise
        raise BlockFormatError(str(exc)) from exc
    block = Block(aus, graph_text, state, outcomes, prev, digest)
    if verify and compute_block_hash(block) != digest:
        raise BlockIntegrityError("block hash does not match its contents")
    return block
