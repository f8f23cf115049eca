"""Record STM histories and run the offline oracles on them."""
from scexec import (BTO, MVTO, History, MinerConfig, generate_workload, is_csr, is_mvsr,
                    is_opaque, mine_concurrent)
from scexec.checker import conflict_graph, mvsr_witness
from scexec.history import COMMIT, READ, WRITE, Event

# a small MVTO run is within reach of the exhaustive multi-version check
w = generate_workload("coin", 6, 3, seed=1)
_, h = mine_concurrent(MinerConfig(4, MVTO, yield_steps=True), w)
print("MVTO history:", len(h), "events,", len(h.committed()), "committed")
print("  serial witness:", mvsr_witness(h, w.initial_state))

# bigger BTO runs are checked through the conflict graph
w = generate_workload("mixed", 40, 8, seed=2)
_, h = mine_concurrent(MinerConfig(8, BTO, yield_steps=True), w)
print("BTO history:", len(h.committed()), "committed, conflict-serializable:", is_csr(h))

# a lost update cannot come out of the STM, so write the log by hand
raw = [(1, "BEGIN"), (2, "BEGIN"), (1, READ, "x", 0), (2, READ, "x", 0),
       (1, WRITE, "x", 1), (1, COMMIT), (2, WRITE, "x", 2), (2, COMMIT)]
lost = History([Event(i, 0, *e) for i, e in enumerate(raw)])
print("\nlost update")
print("  conflict graph:", {k: sorted(v) for k, v in conflict_graph(lost).items()})
print("  CSR:", is_csr(lost), " MVSR:", is_mvsr(lost, {"x": 0}))

# an aborted reader that saw x from T1 and y from T2 observed a state
# that never existed
raw = [(1, "BEGIN"), (2, "BEGIN"), (3, "BEGIN"), (1, WRITE, "x", 1), (1, WRITE, "y", 1),
       (1, COMMIT), (3, READ, "x", 1), (2, WRITE, "x", 2), (2, WRITE, "y", 2), (2, COMMIT),
       (3, READ, "y", 2), (3, "ABORT")]
torn = History([Event(i, 0, *e) for i, e in enumerate(raw)])
print("\ntorn snapshot in an aborted transaction")
print("  committed part MVSR:", is_mvsr(torn, {"x": 0, "y": 0}))
print("  opaque:", is_opaque(torn, {"x": 0, "y": 0}))
