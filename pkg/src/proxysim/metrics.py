"""Run counters, TEPS, the parameterized energy model, and activity heatmaps."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

WORD_BITS = 64
WORD_BYTES = 8


class MetricsLedger:
    """All counters for one run. Per-tile counters are numpy arrays indexed by
    tile id; message conservation is also tracked per channel."""

    PER_TILE = ("pu_active_cycles", "router_active_cycles", "iq_peak",
                "tasks_executed", "pcache_hits", "pcache_misses",
                "pcache_evictions", "updates_filtered", "updates_coalesced",
                "sram_word_accesses")
    GLOBAL = ("messages_injected", "messages_delivered", "messages_captured",
              "captured_filtered", "captured_repropagated", "captured_coalesced",
              "flit_hops", "boundary_flit_hops", "total_cycles", "in_flight",
              "seeds_injected", "edges_traversed")

    def __init__(self, num_tiles, num_channels):
        self.num_tiles = num_tiles
        self.num_channels = num_channels
        for name in self.PER_TILE:
            setattr(self, name, np.zeros(num_tiles, dtype=np.int64))
        for name in self.GLOBAL:
            setattr(self, name, 0)
        self.injected_by_channel = [0] * num_channels
        self.delivered_by_channel = [0] * num_channels
        self.captured_by_channel = [0] * num_channels

    def conservation_ok(self):
        """injected == delivered + captured + in-flight, per channel and total."""
        in_flight_total = self.in_flight
        if self.messages_injected != (self.messages_delivered
                                      + self.messages_captured + in_flight_total):
            return False
        # per-channel in-flight is not tracked separately; the channel split
        # must at least never exceed injections
        for ch in range(self.num_channels):
            if self.delivered_by_channel[ch] + self.captured_by_channel[ch] \
                    > self.injected_by_channel[ch]:
                return False
        return True

    def totals(self):
        out = {name: int(getattr(self, name).sum()) for name in self.PER_TILE}
        out.update({name: int(getattr(self, name)) for name in self.GLOBAL})
        out["injected_by_channel"] = list(self.injected_by_channel)
        out["delivered_by_channel"] = list(self.delivered_by_channel)
        out["captured_by_channel"] = list(self.captured_by_channel)
        return out


@dataclass
class EnergyModel:
    """pJ coefficients for the four tracked activity classes. Only the
    chip-boundary figure is a published value; the rest are placeholders that
    must be calibrated for absolute claims."""

    pu_pj_per_cycle: float = 1.0
    sram_pj_per_byte: float = 0.2
    noc_pj_per_flit_hop: float = 0.15
    boundary_pj_per_bit: float = 1.17

    def __post_init__(self):
        for v in (self.pu_pj_per_cycle, self.sram_pj_per_byte,
                  self.noc_pj_per_flit_hop, self.boundary_pj_per_bit):
            if v < 0:
                raise ValueError("energy coefficients must be non-negative")


ENERGY_PROFILES = {
    "paper-like-7nm": EnergyModel(1.0, 0.2, 0.15, 1.17),
    "zero": EnergyModel(0.0, 0.0, 0.0, 0.0),
}


def compute_teps(edges_traversed, cycles, freq_hz=1e9):
    """Traversed edges per second: E_t / (cycles / frequency)."""
    if cycles <= 0:
        raise ValueError("TEPS undefined for zero cycles")
    return edges_traversed / (cycles / freq_hz)


def compute_energy(ledger: MetricsLedger, model: EnergyModel):
    """Linear counters x coefficients; per-category picojoules plus total."""
    pu = float(ledger.pu_active_cycles.sum()) * model.pu_pj_per_cycle
    sram = float(ledger.sram_word_accesses.sum()) * WORD_BYTES * model.sram_pj_per_byte
    noc = float(ledger.flit_hops) * model.noc_pj_per_flit_hop
    boundary = float(ledger.boundary_flit_hops) * WORD_BITS * model.boundary_pj_per_bit
    total = pu + sram + noc + boundary
    return {"pu_pj": pu, "sram_pj": sram, "noc_pj": noc,
            "boundary_pj": boundary, "total_pj": total,
            "total_joules": total * 1e-12}


class HeatmapRecorder:
    """Per-window grids of PU-active and router-active cycle counts.

    PU active means the PU was executing a task that cycle; router active
    means the router moved at least one flit that cycle.
    """

    def __init__(self, grid_width, grid_height, window):
        if window <= 0:
            raise ValueError("window must be positive")
        self.gw = grid_width
        self.gh = grid_height
        self.window = window
        self.frames_pu = []
        self.frames_router = []
        self._pu = np.zeros(grid_width * grid_height, dtype=np.int64)
        self._rt = np.zeros(grid_width * grid_height, dtype=np.int64)
        self._next_edge = window
        self._open = False

    def add_pu_span(self, tile_id, start, cost):
        """Attribute a [start, start+cost) busy span across window boundaries."""
        self._open = True
        end = start + cost
        while start < end:
            while start >= self._next_edge:
                self._roll()
            take = min(end, self._next_edge) - start
            self._pu[tile_id] += take
            start += take

    def add_router_active(self, tile_id, cycle):
        self._open = True
        while cycle >= self._next_edge:
            self._roll()
        self._rt[tile_id] += 1

    def _roll(self):
        self.frames_pu.append(self._pu.reshape(self.gh, self.gw).copy())
        self.frames_router.append(self._rt.reshape(self.gh, self.gw).copy())
        self._pu[:] = 0
        self._rt[:] = 0
        self._next_edge += self.window

    def finish(self, total_cycles):
        """Close out frames so frame count == ceil(total_cycles / window)."""
        want = max(0, -(-total_cycles // self.window))
        while len(self.frames_pu) < want:
            self._roll()
        if self._open and len(self.frames_pu) == 0:
            self._roll()
        return np.array(self.frames_pu), np.array(self.frames_router)


def write_pgm(path, grid, scale):
    """ASCII portable graymap, 0..255, grid scaled by 1/scale."""
    arr = np.clip(np.rint(grid * (255.0 / scale)), 0, 255).astype(int)
    with open(path, "w") as f:
        f.write(f"P2\n{arr.shape[1]} {arr.shape[0]}\n255\n")
        for row in arr:
            f.write(" ".join(str(v) for v in row) + "\n")


def export_heatmap_frames(frames_pu, frames_router, window, out_dir, render_png=True):
    """Write one PGM + CSV (and optionally PNG) per window per metric.
    Values are active-cycle fractions of the window. Returns written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, frames in (("pu_active", frames_pu), ("router_active", frames_router)):
        for i, frame in enumerate(frames):
            base = os.path.join(out_dir, f"heatmap_{name}_frame_{i:04d}")
            write_pgm(base + ".pgm", frame, window)
            with open(base + ".csv", "w", newline="") as f:
                wr = csv.writer(f)
                for row in frame:
                    wr.writerow([f"{v / window:.6f}" for v in row])
            written.extend([base + ".pgm", base + ".csv"])
            if render_png:
                written.append(_render_png(base + ".png", frame, window, name, i))
    return written


def _render_png(path, frame, window, name, index):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4, 4))
    im = ax.imshow(frame / window, vmin=0.0, vmax=1.0, cmap="inferno")
    ax.set_title(f"{name} frame {index}")
    ax.set_xticks([])
    ax.set_yticks([])
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return path
