"""A cut-down W1 sweep: vary the batch size, emit CSV and the speedup table.

The full grids are available from the command line, e.g.
``python -m scexec bench --workload w2 --contract coin --out w2.csv``.
"""
import numpy as np

from scexec import BenchParams, emit_results, emit_speedup_table, run_benchmark

params = BenchParams(workload="w1", contract="auction", reps=2, threads=4, objects=20)
rows = run_benchmark(params)
print(emit_results(rows))
print(emit_speedup_table(rows))

miner = [r for r in rows if r["role"] == "miner" and r["mode"] == "concurrent"]
for protocol in ("BTO", "MVTO"):
    aborts = np.array([r["aborts"] for r in miner if r["protocol"] == protocol])
    print(f"{protocol} mean aborts per block: {aborts.mean():.2f}")
