"""Why validators need the block graph.

Two units touch the same counter: T1 adds 10, T2 doubles.  Run in list order
from x = 0 they give 20.  A validator that ignores the miner's dependency
graph and happens to run them the other way round ends up with 10.
"""
from scexec import figure_workload, mine_serial, validate_decentralized, validate_serial

w = figure_workload()
for au in w.aus:
    print(au)

block, _ = mine_serial(w)
print("miner final state:", block.final_state)
print("block graph edges:", sorted(block.graph().edge_set()))

# replaying along the graph reproduces the miner's result
v = validate_decentralized(block, 2, w.initial_state)
print("graph-driven replay:", v.state, "Accept" if v else "Reject")

# reverse order, graph ignored
v = validate_serial(block, w.initial_state, order=[1, 0])
print("reverse replay:", v.state, "Accept" if v else "Reject", v.diff)
