"""proxysim: a deterministic simulator of tiled manycore grids running
task-based graph/sparse workloads, with proxy regions, proxy caches, and
selective cascading reduction trees."""

from .config import RunConfig, ConfigError, MODES
from .engine import GridEngine, NonProgressError
from .graphs import CsrGraph, Partition, generate_rmat, load_csr, write_csr

__all__ = ["RunConfig", "ConfigError", "MODES", "GridEngine",
           "NonProgressError", "CsrGraph", "Partition", "generate_rmat",
           "load_csr", "write_csr"]

__version__ = "0.1.0"
