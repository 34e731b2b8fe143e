"""Per-tile state: PU, task-scheduling unit, input/output queues, scratchpad."""

from __future__ import annotations

from collections import deque


class SimulatorBug(RuntimeError):
    """A handler addressed an element its tile neither owns nor proxies."""


class TaskDescriptor:
    """Static description of one task type bound to one channel.

    oq_needs lists (channel, slots) the TSU must reserve before scheduling,
    which covers the propagation slot of cache-touching tasks and makes
    handler commits atomic without rollback.
    """

    __slots__ = ("name", "channel", "handler", "cost", "oq_needs",
                 "touches_pcache")

    def __init__(self, name, channel, handler, cost, oq_needs=(),
                 touches_pcache=False):
        self.name = name
        self.channel = channel
        self.handler = handler
        self.cost = cost
        self.oq_needs = tuple(oq_needs)
        self.touches_pcache = touches_pcache


class Tile:
    """One tile's mutable state; owned and stepped by the grid engine."""

    __slots__ = ("id", "x", "y", "iqs", "iq_occ", "iq_total", "oqs", "oq_occ",
                 "oq_total", "iq_cap", "oq_cap", "busy_until", "pcache",
                 "seed_iter", "pending_seed", "vlo", "vhi", "elo", "ehi",
                 "row_chunk", "col_chunk", "wt_chunk", "reduce_chunk",
                 "aux_chunk")

    def __init__(self, tile_id, x, y, num_channels, iq_cap, oq_cap):
        self.id = tile_id
        self.x = x
        self.y = y
        self.iqs = [deque() for _ in range(num_channels)]
        self.iq_occ = [0] * num_channels
        self.iq_total = 0
        self.oqs = [deque() for _ in range(num_channels)]
        self.oq_occ = [0] * num_channels
        self.oq_total = 0
        self.iq_cap = iq_cap
        self.oq_cap = oq_cap
        self.busy_until = 0
        self.pcache = None
        self.seed_iter = None
        self.pending_seed = None
        # dataset chunks; filled by the workload setup
        self.vlo = self.vhi = self.elo = self.ehi = 0
        self.row_chunk = None
        self.col_chunk = None
        self.wt_chunk = None
        self.reduce_chunk = None
        self.aux_chunk = None

    def local_vertex(self, g):
        i = g - self.vlo
        if i < 0 or g >= self.vhi:
            raise SimulatorBug(f"tile {self.id} asked for vertex {g} outside "
                               f"its chunk [{self.vlo},{self.vhi})")
        return i

    def local_edge(self, e):
        i = e - self.elo
        if i < 0 or e >= self.ehi:
            raise SimulatorBug(f"tile {self.id} asked for edge {e} outside "
                               f"its chunk [{self.elo},{self.ehi})")
        return i


def tsu_schedule(tile: Tile, tasks):
    """Pick the runnable task: non-empty IQ with the highest occupancy, ties
    to the lowest channel id. A channel is runnable only when its task's OQ
    reservations fit, so a proxy task with a full propagation OQ stalls.
    Returns the channel id or -1."""
    best = -1
    best_occ = 0
    iq_occ = tile.iq_occ
    oq_occ = tile.oq_occ
    cap = tile.oq_cap
    for ch in range(len(iq_occ)):
        occ = iq_occ[ch]
        if occ <= best_occ:
            continue
        task = tasks[ch]
        if task is None:
            continue
        ok = True
        for need_ch, n in task.oq_needs:
            if cap - oq_occ[need_ch] < n:
                ok = False
                break
        if ok:
            best = ch
            best_occ = occ
    return best
