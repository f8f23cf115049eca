"""Concurrent smart-contract execution: STM miners, a lock-free block graph,
graph-driven parallel validators and history oracles."""

from .block import Block, BlockFormatError, BlockIntegrityError, read_block, write_block
from .checker import (CapacityError, bg_matches_history, conflict_graph, is_csr, is_mvsr,
                      is_opaque)
from .contracts import AtomicUnit, Workload, figure_workload, generate_workload, run_serial
from .graph import BlockGraph
from .harness import BenchParams, emit_results, emit_speedup_table, run_benchmark
from .history import History
from .miner import MinerConfig, mine_concurrent, mine_serial
from .stm import BTO, MVTO, AbortError, stm_init
from .validator import Verdict, validate_decentralized, validate_fork_join, validate_serial

__all__ = [
    "AbortError", "AtomicUnit", "BTO", "BenchParams", "Block", "BlockFormatError",
    "BlockGraph", "BlockIntegrityError", "CapacityError", "History", "MVTO", "MinerConfig",
    "Verdict", "Workload", "bg_matches_history", "conflict_graph", "emit_results",
    "emit_speedup_table", "figure_workload", "generate_workload", "is_csr", "is_mvsr",
    "is_opaque", "mine_concurrent", "mine_serial", "read_block", "run_benchmark",
    "run_serial", "stm_init", "validate_decentralized", "validate_fork_join",
    "validate_serial", "write_block",
]
