"""Run configuration: every knob of one simulation, with full validation."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, asdict

from .geometry import is_pow2

MODES = ("no_proxy", "proxy_merge_owner", "proxy_always_cascade",
         "tascade_selective", "sync_merge", "sync_cascade")
TOPOLOGIES = ("mesh", "torus", "multichip_torus")
WORKLOAD_NAMES = ("bfs", "sssp", "wcc", "pagerank", "spmv", "histogram")

# capture policy of the cascading router, per execution mode
CAPTURE_MODE = {
    "no_proxy": "none",
    "proxy_merge_owner": "none",
    "proxy_always_cascade": "always",
    "tascade_selective": "selective",
    "sync_merge": "none",
    "sync_cascade": "always",
}

DESK_GRID_LIMIT = 128
DESK_RMAT_LIMIT = 18


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass
class RunConfig:
    workload: str = "bfs"
    mode: str = "tascade_selective"
    grid_width: int = 16
    grid_height: int = 16
    topology: str = "torus"
    chip_pane: int = 32

    # dataset: a CSR file, or an RMAT instance
    graph_path: str | None = None
    rmat_scale: int = 10
    rmat_edge_factor: int = 16
    rmat_seed: int = 1

    # proxy configuration; region_width 0 means "auto" via the sizing heuristic
    region_width: int = 0
    pcache_budget_elems: int = 0  # 0 means "auto" via the sizing formula
    pcache_max_elems: int = 16384
    sizing_ratio_c: int = 16

    # queues, costs, network
    iq_capacity: int = 64
    oq_capacity: int = 16
    router_buffer_flits: int = 8
    router_delay: int = 1
    link_latency: int = 1
    boundary_latency: int = 20
    task_cost: int = 5
    cost_per_emission: int = 1

    # workload parameters
    source_vertex: int = 0
    pagerank_epochs: int = 10
    seed: int = 0

    frequency_hz: float = 1.0e9
    energy_profile: str = "paper-like-7nm"
    heatmap_window: int = 0
    sample_window: int = 0
    max_cycles: int = 0
    watchdog_cycles: int = 100_000
    allow_large: bool = False

    def validate(self):
        """Collect every violated constraint (empty list when valid)."""
        errors = []
        if self.workload not in WORKLOAD_NAMES:
            errors.append(f"workload: unknown workload {self.workload!r}; "
                          f"expected one of {WORKLOAD_NAMES}")
        if self.mode not in MODES:
            errors.append(f"mode: unknown mode {self.mode!r}; "
                          f"expected one of {MODES}")
        if self.topology not in TOPOLOGIES:
            errors.append(f"topology: unknown topology {self.topology!r}; "
                          f"expected one of {TOPOLOGIES}")
        if not (is_pow2(self.grid_width) and is_pow2(self.grid_height)):
            errors.append(f"grid: dimensions must be powers of two, got "
                          f"{self.grid_width}x{self.grid_height}")
        elif not self.allow_large and (self.grid_width > DESK_GRID_LIMIT
                                       or self.grid_height > DESK_GRID_LIMIT):
            errors.append(f"grid: {self.grid_width}x{self.grid_height} exceeds the "
                          f"desk-scale limit {DESK_GRID_LIMIT}x{DESK_GRID_LIMIT}; "
                          f"pass allow_large/--large to override")
        if self.region_width:
            if not is_pow2(self.region_width):
                errors.append(f"region_width: must be a power of two or 0 for "
                              f"auto, got {self.region_width}")
            elif (is_pow2(self.grid_width) and is_pow2(self.grid_height)
                  and (self.grid_width % self.region_width
                       or self.grid_height % self.region_width)):
                errors.append(f"region_width: {self.region_width} does not divide "
                              f"grid {self.grid_width}x{self.grid_height}")
        if self.graph_path is None:
            if self.rmat_scale < 1:
                errors.append("rmat_scale: must be >= 1")
            elif self.rmat_scale > DESK_RMAT_LIMIT and not self.allow_large:
                errors.append(f"rmat_scale: {self.rmat_scale} exceeds the desk-scale "
                              f"limit {DESK_RMAT_LIMIT}; pass allow_large/--large")
            if self.rmat_edge_factor < 1:
                errors.append("rmat_edge_factor: must be >= 1")
        for name in ("chip_pane", "pcache_max_elems", "sizing_ratio_c",
                     "iq_capacity", "oq_capacity", "router_buffer_flits",
                     "router_delay", "link_latency", "task_cost",
                     "pagerank_epochs", "watchdog_cycles"):
            if getattr(self, name) < 1:
                errors.append(f"{name}: must be >= 1")
        for name in ("boundary_latency", "cost_per_emission", "heatmap_window",
                     "sample_window", "max_cycles", "pcache_budget_elems",
                     "source_vertex", "seed"):
            if getattr(self, name) < 0:
                errors.append(f"{name}: must be >= 0")
        if self.frequency_hz <= 0:
            errors.append("frequency_hz: must be positive")
        return errors

    def check(self):
        errors = self.validate()
        if errors:
            raise ConfigError(errors)
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError([f"{k}: unknown config key" for k in sorted(unknown)])
        return cls(**data)

    @property
    def proxies_on(self):
        return self.mode != "no_proxy"

    @property
    def sync_mode(self):
        return self.mode in ("sync_merge", "sync_cascade")

    @property
    def capture_mode(self):
        return CAPTURE_MODE[self.mode]

    def workload_params(self):
        return {"seed": self.seed, "source": self.source_vertex,
                "epochs": self.pagerank_epochs}
