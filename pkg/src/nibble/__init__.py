"""Semi-random nibble construction of K4^- free 3-graphs, with trajectory
oracle, event monitors and verification tools."""

from nibble.triples import rank, unrank, is_k4minus, k4minus_completions
from nibble.trajectory import TrajectoryTable, build_tables, psi, p_hat, verify_bounds
from nibble.config import RunConfig
from nibble.engine import ProcessState, init, step, run

__all__ = [
    "rank", "unrank", "is_k4minus", "k4minus_completions",
    "TrajectoryTable", "build_tables", "psi", "p_hat", "verify_bounds",
    "ProcessState", "RunConfig", "init", "step", "run",
]

__version__ = "0.1.0"
