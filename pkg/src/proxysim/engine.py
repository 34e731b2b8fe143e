"""The grid engine: builds the tile grid for one run config and steps it
cycle by cycle until quiescence.

Per-cycle order: network arrivals and router moves, then every runnable tile
(seed intake, TSU dispatch or idle cache flush, OQ drain), then the
end-of-cycle snapshot of the registered congestion/IQ flags. The whole
evolution is a pure function of (config, seed): no randomness, insertion-
ordered containers only. Tiles and routers are stepped through wake events
(PU completion, queue insertions, freed buffer space), which is
observationally identical to stepping everything every cycle; cycles with no
scheduled event are skipped in one jump.

Sync modes run a BSP-style phase machine: cache propagation is held until
the grid drains (everything idle except dirty caches), then a flush/merge
phase self-invalidates the caches toward the owners; owner re-spawns that
fire during a flush are deferred to the next compute phase.
"""

from __future__ import annotations

from . import apps
from .apps import CH_OWNER, CH_PROXY, NUM_CHANNELS
from .config import RunConfig
from .geometry import (GridGeometry, ProxyFractionMap, SizingInputs,
                       next_pow2, p_cache_size, w_min)
from .graphs import CsrGraph, Partition, generate_rmat, load_csr
from .metrics import HeatmapRecorder, MetricsLedger
from .noc import Message, Noc
from .pcache import ProxyCache, ProxyCacheConfig, WRITE_BACK
from .tile import SimulatorBug, Tile, tsu_schedule


class NonProgressError(RuntimeError):
    """Global non-progress watchdog fired; carries queue diagnostics."""


def resolve_geometry(cfg: RunConfig, num_reduce_elems):
    """Pick the region width: explicit, or the sizing heuristic clamped to
    the grid (no_proxy runs get a placeholder region covering the grid)."""
    gmin = min(cfg.grid_width, cfg.grid_height)
    if not cfg.proxies_on:
        w = gmin
    elif cfg.region_width:
        w = cfg.region_width
    else:
        inputs = SizingInputs(max(1, num_reduce_elems), cfg.pcache_max_elems,
                              cfg.sizing_ratio_c)
        w = min(max(16, w_min(inputs)), gmin)
    return GridGeometry(cfg.grid_width, cfg.grid_height, w)


def resolve_pcache_capacity(cfg: RunConfig, num_reduce_elems, fraction_len):
    if cfg.pcache_budget_elems:
        cap = cfg.pcache_budget_elems
    else:
        inputs = SizingInputs(max(1, num_reduce_elems), cfg.pcache_max_elems,
                              cfg.sizing_ratio_c)
        cap = p_cache_size(inputs)
    return max(1, min(cap, fraction_len))


def load_dataset(cfg: RunConfig) -> CsrGraph:
    if cfg.graph_path is not None:
        return load_csr(cfg.graph_path)
    return generate_rmat(cfg.rmat_scale, cfg.rmat_edge_factor, cfg.rmat_seed)


class GridEngine:
    def __init__(self, cfg: RunConfig, graph: CsrGraph | None = None):
        cfg.check()
        self.config = cfg
        if graph is None:
            graph = load_dataset(cfg)
        self.workload = apps.build_workload(cfg.workload, graph,
                                            cfg.workload_params())
        run_graph = self.workload.graph
        v = run_graph.num_vertices
        e = run_graph.num_edges
        self.num_tiles = cfg.grid_width * cfg.grid_height
        self.gw = cfg.grid_width
        self.gh = cfg.grid_height
        self.geom = resolve_geometry(cfg, v)
        self.region_w = self.geom.region_width
        self.proxies_on = cfg.proxies_on
        self.sync_mode = cfg.sync_mode

        self.part_v = Partition(v, self.num_tiles)
        self.part_e = Partition(max(1, e), self.num_tiles)
        self.v_chunk = self.part_v.chunk_size
        self.e_chunk = self.part_e.chunk_size

        self.nch = NUM_CHANNELS
        self.iq_cap = cfg.iq_capacity
        self.oq_cap = cfg.oq_capacity
        self.cost_per_emission = cfg.cost_per_emission
        self.tasks = self.workload.task_table(cfg.task_cost)
        self.respawn_channel = apps.CH_EXPAND

        self.ledger = MetricsLedger(self.num_tiles, self.nch)
        self.recorder = (HeatmapRecorder(self.gw, self.gh, cfg.heatmap_window)
                         if cfg.heatmap_window else None)

        self.noc = Noc(self.geom, cfg.topology, self.nch, self.ledger,
                       buffer_flits=cfg.router_buffer_flits,
                       router_delay=cfg.router_delay,
                       link_latency=cfg.link_latency,
                       chip_pane=cfg.chip_pane,
                       boundary_latency=cfg.boundary_latency,
                       capture_mode=cfg.capture_mode,
                       capture_channels=(CH_OWNER,) if self.proxies_on else (),
                       proxy_channel=CH_PROXY)
        self.noc.sink = self
        self.noc.recorder = self.recorder

        self._build_tiles(run_graph)

        # holds the write-back propagation in sync modes until the barrier
        self.flush_allowed = not self.sync_mode
        self.defer_respawns = False
        self.deferred = []
        self.dirty_tiles = set()

        self.cycle = 0
        self.max_busy = 0
        self.iq_total = 0
        self.oq_total = 0
        self.tile_wakes = {}
        self._flag_touch = set()
        self._progress = False
        self.last_progress = 0
        self.x_vector = getattr(self.workload, "x", None)

        self.samples = []
        self._next_sample = cfg.sample_window if cfg.sample_window else 0

        self.seeds_remaining = 0
        self.reseed()

    # -- construction -------------------------------------------------------

    def _build_tiles(self, g: CsrGraph):
        cfg = self.config
        wl = self.workload
        ro = g.row_offsets.tolist()
        ci = g.col_indices.tolist()
        wt = g.weights.tolist() if g.weights is not None else None
        fraction_len = self.geom.num_regions * self.v_chunk
        capacity = resolve_pcache_capacity(cfg, g.num_vertices, fraction_len)
        self.pcache_capacity = capacity
        policy = WRITE_BACK if self.sync_mode else wl.policy

        self.tiles = []
        for tid in range(self.num_tiles):
            x, y = tid % self.gw, tid // self.gw
            t = Tile(tid, x, y, self.nch, self.iq_cap, self.oq_cap)
            t.vlo, t.vhi = self.part_v.range_of(tid)
            t.elo, t.ehi = self.part_e.range_of(tid)
            t.row_chunk = ro[t.vlo:t.vhi + 1]
            t.col_chunk = ci[t.elo:t.ehi]
            t.wt_chunk = wt[t.elo:t.ehi] if wt is not None else None
            t.reduce_chunk = wl.init_reduce_chunk(t.vlo, t.vhi)
            t.aux_chunk = wl.init_aux_chunk(t.vlo, t.vhi)
            if self.proxies_on:
                fmap = ProxyFractionMap(self.geom, self.part_v, x, y)
                pcfg = ProxyCacheConfig(
                    local_fraction_len=max(1, fmap.fraction_len),
                    capacity=min(capacity, max(1, fmap.fraction_len)),
                    policy=policy,
                    propagate_channel=CH_OWNER,
                    default_value=wl.default_value,
                    reduce_op=wl.reduce_op)
                t.pcache = ProxyCache(pcfg, fmap)
            self.tiles.append(t)

    def reseed(self):
        wl = self.workload
        self.seeds_remaining += wl.seed_count(self)
        for t in self.tiles:
            it = wl.make_seed_iter(self, t)
            if it is not None:
                t.seed_iter = it
                self.wake_tile(t.id, self.cycle)

    # -- wake scheduling ------------------------------------------------------

    def wake_tile(self, tid, cyc):
        d = self.tile_wakes.get(cyc)
        if d is None:
            self.tile_wakes[cyc] = {tid: True}
        else:
            d[tid] = True

    # -- emission helpers ----------------------------------------------------

    def emit_reduce(self, t, g, val):
        """Reduce-task emission: toward the in-region proxy when proxies are
        on (or straight to the owner when the owner is in this region)."""
        tid = g // self.v_chunk
        ox = tid % self.gw
        oy = tid // self.gw
        if self.proxies_on:
            w = self.region_w
            px = t.x - t.x % w + ox % w
            py = t.y - t.y % w + oy % w
            if px != ox or py != oy:
                return (CH_PROXY, g, (val,), px, py)
        return (CH_OWNER, g, (val,), ox, oy)

    def owner_xy(self, g):
        tid = g // self.v_chunk
        return tid % self.gw, tid // self.gw

    # -- network sink --------------------------------------------------------

    def deliver(self, rid, msg):
        t = self.tiles[rid]
        ch = msg.channel
        if t.iq_occ[ch] >= self.iq_cap:
            return False
        self._iq_put(t, ch, msg)
        led = self.ledger
        led.messages_delivered += 1
        led.delivered_by_channel[ch] += 1
        led.in_flight -= 1
        self.wake_tile(rid, self.cycle)
        self._progress = True
        return True

    def capture(self, rid, msg):
        t = self.tiles[rid]
        if t.iq_occ[CH_PROXY] >= self.iq_cap:
            return False
        self._iq_put(t, CH_PROXY, msg)
        led = self.ledger
        led.messages_captured += 1
        led.captured_by_channel[msg.channel] += 1
        led.in_flight -= 1
        self.wake_tile(rid, self.cycle)
        self._progress = True
        return True

    def _iq_put(self, t, ch, msg):
        t.iqs[ch].append(msg)
        t.iq_occ[ch] += 1
        t.iq_total += 1
        self.iq_total += 1
        led = self.ledger
        if t.iq_total > led.iq_peak[t.id]:
            led.iq_peak[t.id] = t.iq_total
        if ch == CH_PROXY:
            self._flag_touch.add(t.id)

    def _local_delivery(self, t, ch, msg):
        """Source == destination: straight from OQ/seed into the own IQ."""
        if t.iq_occ[ch] >= self.iq_cap:
            return False
        self._iq_put(t, ch, msg)
        led = self.ledger
        led.messages_injected += 1
        led.injected_by_channel[ch] += 1
        led.messages_delivered += 1
        led.delivered_by_channel[ch] += 1
        return True

    def _iq_spill(self, t, em):
        """Self-addressed task emission: enqueued directly into the own IQ,
        never touching the OQ or the network. May exceed the nominal IQ
        capacity (the staging spills into the scratchpad), which keeps the
        respawn/continuation path from closing a backpressure cycle."""
        ch, g, payload, dx, dy = em
        self._iq_put(t, ch, Message(ch, g, payload, dx, dy, t.id))
        led = self.ledger
        led.messages_injected += 1
        led.injected_by_channel[ch] += 1
        led.messages_delivered += 1
        led.delivered_by_channel[ch] += 1

    # -- cycle stepping --------------------------------------------------------

    def step(self):
        cyc = self.cycle
        moved = self.noc.advance_cycle(cyc)
        to_step = self.tile_wakes.pop(cyc, None)
        if to_step:
            tiles = self.tiles
            for tid in to_step:
                self._step_tile(tiles[tid], cyc)
        self.noc.end_cycle()
        if self._flag_touch:
            half = self.iq_cap // 2
            flags = self.noc.iq_lt_half_prev
            tiles = self.tiles
            for tid in self._flag_touch:
                flags[tid] = 1 if tiles[tid].iq_occ[CH_PROXY] < half else 0
            self._flag_touch.clear()
        if moved or self._progress:
            self.last_progress = cyc
            self._progress = False
        self.cycle = cyc + 1
        return moved

    def _step_tile(self, t, cyc):
        tid = t.id
        led = self.ledger
        prog = False

        if t.pending_seed is not None or t.seed_iter is not None:
            msg = t.pending_seed
            if msg is None:
                msg = next(t.seed_iter, None)
                if msg is None:
                    t.seed_iter = None
            if msg is not None:
                placed = False
                if msg.dest_x == t.x and msg.dest_y == t.y:
                    placed = self._local_delivery(t, msg.channel, msg)
                elif t.oq_occ[msg.channel] < self.oq_cap:
                    t.oqs[msg.channel].append(msg)
                    t.oq_occ[msg.channel] += 1
                    t.oq_total += 1
                    self.oq_total += 1
                    placed = True
                if placed:
                    t.pending_seed = None
                    self.seeds_remaining -= 1
                    led.seeds_injected += 1
                    self._progress = True
                    prog = True
                else:
                    t.pending_seed = msg

        if t.busy_until <= cyc:
            ch = tsu_schedule(t, self.tasks)
            if ch >= 0:
                msg = t.iqs[ch].popleft()
                t.iq_occ[ch] -= 1
                t.iq_total -= 1
                self.iq_total -= 1
                if ch == CH_PROXY:
                    self._flag_touch.add(tid)
                self.noc.wake_local(tid, cyc + 1)
                task = self.tasks[ch]
                emissions = task.handler(self, t, msg)
                for em in emissions:
                    if self.defer_respawns and em[0] == self.respawn_channel:
                        self.deferred.append((tid, em))
                    elif em[3] == t.x and em[4] == t.y:
                        self._iq_spill(t, em)
                    else:
                        self._push_oq(t, em)
                cost = task.cost + self.cost_per_emission * len(emissions)
                t.busy_until = cyc + cost
                if t.busy_until > self.max_busy:
                    self.max_busy = t.busy_until
                led.pu_active_cycles[tid] += cost
                led.tasks_executed[tid] += 1
                if self.recorder is not None:
                    self.recorder.add_pu_span(tid, cyc, cost)
                if task.touches_pcache:
                    if t.pcache.dirty_count:
                        self.dirty_tiles.add(tid)
                    else:
                        self.dirty_tiles.discard(tid)
                self._progress = True
                prog = True
            elif (t.pcache is not None and t.pcache.dirty_count
                  and self.flush_allowed and t.oq_total == 0):
                # idle self-invalidation: one dirty line per cycle
                em = t.pcache.flush_one()
                if em is not None:
                    g, val = em
                    ox, oy = self.owner_xy(g)
                    self._push_oq(t, (CH_OWNER, g, (val,), ox, oy))
                    self._progress = True
                    prog = True
                if t.pcache.dirty_count == 0:
                    self.dirty_tiles.discard(tid)

        if t.oq_total:
            for ch in range(self.nch):
                dq = t.oqs[ch]
                if not dq:
                    continue
                msg = dq[0]
                if msg.dest_x == t.x and msg.dest_y == t.y:
                    if not self._local_delivery(t, ch, msg):
                        continue
                elif not self.noc.inject(tid, msg, cyc):
                    continue
                dq.popleft()
                t.oq_occ[ch] -= 1
                t.oq_total -= 1
                self.oq_total -= 1
                self._progress = True
                prog = True

        # re-arm: a tile that made progress retries next cycle (intake,
        # drain and flush are once-per-cycle); a busy PU wakes at completion;
        # a fully stalled tile is woken by the event that unblocks it
        # (queue insertion, popped IQ entry, freed router buffer)
        if t.busy_until > cyc:
            if t.iq_total or (self.flush_allowed and t.pcache is not None
                              and t.pcache.dirty_count):
                self.wake_tile(tid, t.busy_until)
            if prog and (t.oq_total or t.pending_seed is not None
                         or t.seed_iter is not None):
                self.wake_tile(tid, cyc + 1)
        elif prog and (t.iq_total or t.oq_total or t.pending_seed is not None
                       or t.seed_iter is not None
                       or (self.flush_allowed and t.pcache is not None
                           and t.pcache.dirty_count)):
            self.wake_tile(tid, cyc + 1)

    def _push_oq(self, t, em):
        ch, g, payload, dx, dy = em
        if t.oq_occ[ch] >= self.oq_cap:
            raise SimulatorBug(f"OQ overflow on tile {t.id} channel {ch}; "
                               f"the TSU reservation contract was violated")
        t.oqs[ch].append(Message(ch, g, payload, dx, dy, t.id))
        t.oq_occ[ch] += 1
        t.oq_total += 1
        self.oq_total += 1

    # -- quiescence and the run loop ------------------------------------------

    def drained(self):
        """Everything idle and empty, dirty caches aside."""
        return (self.seeds_remaining == 0 and self.iq_total == 0
                and self.oq_total == 0 and self.ledger.in_flight == 0
                and self.cycle >= self.max_busy)

    def detect_quiescence(self):
        """Queues empty, nothing in flight, PUs idle, caches clean."""
        return self.drained() and not self.dirty_tiles

    def _seed_deferred(self):
        per_tile = {}
        for tid, em in self.deferred:
            per_tile.setdefault(tid, []).append(em)
        self.deferred.clear()
        for tid, ems in per_tile.items():
            t = self.tiles[tid]
            msgs = [Message(ch, g, payload, dx, dy, tid)
                    for ch, g, payload, dx, dy in ems]
            t.seed_iter = iter(msgs)
            self.seeds_remaining += len(msgs)
            self.wake_tile(tid, self.cycle)

    def _take_sample(self):
        led = self.ledger
        self.samples.append({
            "cycle": self.cycle,
            "messages_injected": led.messages_injected,
            "messages_delivered": led.messages_delivered,
            "messages_captured": led.messages_captured,
            "flit_hops": led.flit_hops,
            "boundary_flit_hops": led.boundary_flit_hops,
            "in_flight": led.in_flight,
            "tasks_executed": int(led.tasks_executed.sum()),
        })

    def run(self, on_cycle=None):
        """Step to completion (all epochs/phases); returns total cycles.
        on_cycle, when given, is called with the engine after every stepped
        cycle (invariant checks in tests)."""
        cfg = self.config
        wl = self.workload
        watchdog = cfg.watchdog_cycles
        sample_w = cfg.sample_window
        noc = self.noc
        while True:
            if sample_w:
                while self.cycle >= self._next_sample:
                    self._take_sample()
                    self._next_sample += sample_w
            if self.drained():
                if self.dirty_tiles:
                    if not self.flush_allowed:
                        # sync barrier reached: merge phase begins
                        self.flush_allowed = True
                        self.defer_respawns = True
                        for tid in self.dirty_tiles:
                            self.wake_tile(tid, self.cycle)
                        self.last_progress = self.cycle
                else:
                    if self.sync_mode:
                        self.flush_allowed = False
                        self.defer_respawns = False
                    if self.deferred:
                        self._seed_deferred()
                        self.last_progress = self.cycle
                    elif wl.on_quiescence(self):
                        break
                    else:
                        self.last_progress = self.cycle
            if cfg.max_cycles and self.cycle >= cfg.max_cycles:
                raise NonProgressError(f"max_cycles={cfg.max_cycles} reached at "
                                       f"cycle {self.cycle}")
            cyc = self.cycle
            if (on_cycle is None and cyc not in noc.arrivals
                    and cyc not in noc.wakes and cyc not in self.tile_wakes):
                # nothing scheduled this cycle: jump to the next event
                nxt = noc.next_event()
                if self.tile_wakes:
                    tn = min(self.tile_wakes)
                    nxt = tn if nxt is None else min(nxt, tn)
                if nxt is None:
                    if self.cycle < self.max_busy:
                        # only silent PU completions remain
                        self.cycle = self.max_busy
                        continue
                    raise NonProgressError(
                        "no scheduled events but the grid is not quiescent; "
                        f"state:\n{self.queue_diagnostics()}")
                if nxt <= cyc:
                    raise AssertionError("stale wake event")
                self.cycle = nxt
                continue
            self.step()
            if on_cycle is not None:
                on_cycle(self)
            if self.cycle - self.last_progress > watchdog:
                raise NonProgressError(
                    f"no progress for {watchdog} cycles at cycle {self.cycle}; "
                    f"queue state:\n{self.queue_diagnostics()}")
        self.ledger.total_cycles = self.cycle
        self._take_sample()
        self._collect_pcache_stats()
        return self.cycle

    def _collect_pcache_stats(self):
        led = self.ledger
        for t in self.tiles:
            c = t.pcache
            if c is None:
                continue
            led.pcache_hits[t.id] = c.hits
            led.pcache_misses[t.id] = c.misses
            led.pcache_evictions[t.id] = c.evictions
            led.updates_filtered[t.id] = c.updates_filtered
            led.updates_coalesced[t.id] = c.updates_coalesced

    def queue_diagnostics(self):
        lines = [f"iq_total={self.iq_total} oq_total={self.oq_total} "
                 f"in_flight={self.ledger.in_flight} "
                 f"seeds={self.seeds_remaining} dirty={len(self.dirty_tiles)} "
                 f"cycle={self.cycle} max_busy={self.max_busy}"]
        shown = 0
        for t in self.tiles:
            if t.iq_total or t.oq_total:
                lines.append(f"tile {t.id}: iq={t.iq_occ} oq={t.oq_occ} "
                             f"busy_until={t.busy_until}")
                shown += 1
                if shown >= 12:
                    break
        lines.append(self.noc.queue_diagnostics())
        return "\n".join(lines)

    # -- results ---------------------------------------------------------------

    def results(self):
        return self.workload.results(self)

    def frontier_edges(self, results=None):
        if results is None:
            results = self.results()
        return self.workload.e_t(self, results)
