"""Task decompositions of the six workloads over the data-local model.

Channel layout (one IQ/OQ and one task type per channel):
  0 expand  - per-vertex fetch of the edge range (or per-element read)
  1 walk    - self-continuing per-edge/per-nonzero task; one element per
              invocation, re-invoking itself for the next edge index
  2 reduce  - owner-side reduction task; the only capture-eligible channel
  3 proxy   - proxy-side reduction twin operating on the P-cache

Every handler is a pure transition of (tile-local state, message) into
emissions; emission tuples are (channel, dest_index, payload, dest_x, dest_y).
"""

from __future__ import annotations

import numpy as np

from . import oracle
from .graphs import Partition, attach_random_weights, symmetrize
from .noc import Message
from .pcache import INF32, INF64, WRITE_BACK, WRITE_THROUGH
from .tile import TaskDescriptor

CH_EXPAND = 0
CH_WALK = 1
CH_OWNER = 2
CH_PROXY = 3
NUM_CHANNELS = 4

FP_ONE = oracle.FP_ONE
PR_DAMPING_FP = oracle.PR_DAMPING_FP


# -- shared handler pieces ---------------------------------------------------


def _expand_range(eng, t, v, payload_word, carried):
    """Emit the walk task for vertex v's edge range, if any."""
    i = t.local_vertex(v)
    rb = t.row_chunk[i]
    re_ = t.row_chunk[i + 1]
    eng.ledger.sram_word_accesses[t.id] += 2
    if rb == re_:
        return ()
    tid = rb // eng.e_chunk
    return ((CH_WALK, rb, (re_, carried), tid % eng.gw, tid // eng.gw),)


def _walk_continue(eng, e_next, re_, carried):
    tid = e_next // eng.e_chunk
    return (CH_WALK, e_next, (re_, carried), tid % eng.gw, tid // eng.gw)


def proxy_reduce_handler(eng, t, msg):
    """The proxy twin of the reduce task: reduce into the P-cache and
    propagate per the write policy; at most one emission per invocation."""
    updated, emission = t.pcache.update(msg.dest_index, msg.payload[0])
    eng.ledger.sram_word_accesses[t.id] += 2
    led = eng.ledger
    if msg.was_captured:
        if emission is not None:
            led.captured_repropagated += 1
        elif updated:
            led.captured_coalesced += 1
        else:
            led.captured_filtered += 1
    if emission is None:
        return ()
    g, val = emission
    tid = g // eng.v_chunk
    return ((CH_OWNER, g, (val,), tid % eng.gw, tid // eng.gw),)


# -- min-reduction graph traversals (SSSP / BFS / WCC) -----------------------
#
# The owner reduce task re-spawns the expand task on improvement, but at most
# one expand per vertex is pending at a time (a pending bit in the scratchpad,
# aux_chunk); the expand reads the current value locally when it runs, so
# consecutive improvements coalesce into one re-exploration.


def sssp_expand(eng, t, msg):
    v = msg.dest_index
    i = t.local_vertex(v)
    t.aux_chunk[i] = 0
    return _expand_range(eng, t, v, None, t.reduce_chunk[i])


def sssp_walk(eng, t, msg):
    e = msg.dest_index
    re_, d = msg.payload
    i = t.local_edge(e)
    nd = d + t.wt_chunk[i]
    eng.ledger.sram_word_accesses[t.id] += 2
    out = [eng.emit_reduce(t, t.col_chunk[i], nd)]
    if e + 1 < re_:
        out.append(_walk_continue(eng, e + 1, re_, d))
    return out


def sssp_owner(eng, t, msg):
    g = msg.dest_index
    val = msg.payload[0]
    i = t.local_vertex(g)
    eng.ledger.sram_word_accesses[t.id] += 1
    if val < t.reduce_chunk[i]:
        t.reduce_chunk[i] = val
        eng.ledger.sram_word_accesses[t.id] += 1
        if not t.aux_chunk[i]:
            t.aux_chunk[i] = 1
            return ((CH_EXPAND, g, (), t.x, t.y),)
    return ()


def bfs_expand(eng, t, msg):
    # carried word packs (level of v, parent=v) for the downstream relax
    v = msg.dest_index
    i = t.local_vertex(v)
    t.aux_chunk[i] = 0
    lvl = t.reduce_chunk[i] >> 32
    return _expand_range(eng, t, v, None, (lvl << 32) | v)


def bfs_walk(eng, t, msg):
    e = msg.dest_index
    re_, lvlv = msg.payload
    i = t.local_edge(e)
    eng.ledger.sram_word_accesses[t.id] += 1
    # candidate for u: level+1 in the high half, parent id in the low half
    cand = (((lvlv >> 32) + 1) << 32) | (lvlv & 0xFFFFFFFF)
    out = [eng.emit_reduce(t, t.col_chunk[i], cand)]
    if e + 1 < re_:
        out.append(_walk_continue(eng, e + 1, re_, lvlv))
    return out


def bfs_owner(eng, t, msg):
    g = msg.dest_index
    val = msg.payload[0]
    i = t.local_vertex(g)
    cur = t.reduce_chunk[i]
    eng.ledger.sram_word_accesses[t.id] += 1
    if val < cur:
        t.reduce_chunk[i] = val
        eng.ledger.sram_word_accesses[t.id] += 1
        if (val >> 32) < (cur >> 32) and not t.aux_chunk[i]:
            # level improved: re-explore; parent-only improvements only store
            t.aux_chunk[i] = 1
            return ((CH_EXPAND, g, (), t.x, t.y),)
    return ()


wcc_expand = sssp_expand  # label read locally, same pending-bit coalescing


def wcc_walk(eng, t, msg):
    e = msg.dest_index
    re_, label = msg.payload
    i = t.local_edge(e)
    eng.ledger.sram_word_accesses[t.id] += 1
    out = [eng.emit_reduce(t, t.col_chunk[i], label)]
    if e + 1 < re_:
        out.append(_walk_continue(eng, e + 1, re_, label))
    return out


wcc_owner = sssp_owner  # identical min-and-respawn semantics over labels


# -- add-reduction workloads (PageRank / SPMV / Histogram) --------------------


def pagerank_expand(eng, t, msg):
    v = msg.dest_index
    i = t.local_vertex(v)
    rank_v = t.aux_chunk[i]
    rb = t.row_chunk[i]
    re_ = t.row_chunk[i + 1]
    eng.ledger.sram_word_accesses[t.id] += 2
    deg = re_ - rb
    if deg == 0:
        return ()
    contrib = rank_v // deg
    tid = rb // eng.e_chunk
    return ((CH_WALK, rb, (re_, contrib), tid % eng.gw, tid // eng.gw),)


def pagerank_walk(eng, t, msg):
    e = msg.dest_index
    re_, contrib = msg.payload
    i = t.local_edge(e)
    eng.ledger.sram_word_accesses[t.id] += 1
    out = [eng.emit_reduce(t, t.col_chunk[i], contrib)]
    if e + 1 < re_:
        out.append(_walk_continue(eng, e + 1, re_, contrib))
    return out


def add_owner(eng, t, msg):
    i = t.local_vertex(msg.dest_index)
    t.reduce_chunk[i] += msg.payload[0]
    eng.ledger.sram_word_accesses[t.id] += 2
    return ()


def spmv_walk(eng, t, msg):
    e = msg.dest_index
    re_, row = msg.payload
    i = t.local_edge(e)
    eng.ledger.sram_word_accesses[t.id] += 3
    contrib = t.wt_chunk[i] * eng.x_vector[t.col_chunk[i]]
    out = [eng.emit_reduce(t, row, contrib)]
    if e + 1 < re_:
        out.append(_walk_continue(eng, e + 1, re_, row))
    return out


def histogram_read(eng, t, msg):
    i = t.local_edge(msg.dest_index)
    eng.ledger.sram_word_accesses[t.id] += 1
    return (eng.emit_reduce(t, t.col_chunk[i], msg.payload[0]),)


# -- workload definitions ------------------------------------------------------


class Workload:
    """Everything the engine needs to run one application: task table,
    reduction policy, per-tile dataset slices, seeds, and the oracle."""

    name = ""
    reduce_op = "min"
    policy = WRITE_THROUGH
    default_value = INF32
    respawns = True
    result_name = "result"

    def __init__(self, graph, params):
        self.params = params
        self.graph = self.prepare(graph)
        self.epochs_total = 1
        self.epoch = 0

    def prepare(self, graph):
        return graph

    def e_t(self, engine, results):
        return self.graph.num_edges

    # hooks with shared defaults ------------------------------------------

    def task_table(self, cost):
        # the owner reduce task reserves no OQ slots: its re-spawn is always
        # tile-local (vertex arrays are co-partitioned), which keeps the
        # channel dependency chain acyclic and the protocol deadlock-free
        return [
            TaskDescriptor("expand", CH_EXPAND, self.expand_handler, cost,
                           ((CH_WALK, 1),)),
            TaskDescriptor("walk", CH_WALK, self.walk_handler, cost,
                           ((CH_WALK, 1), (CH_OWNER, 1), (CH_PROXY, 1))),
            TaskDescriptor("reduce", CH_OWNER, self.owner_handler, cost, ()),
            TaskDescriptor("proxy", CH_PROXY, proxy_reduce_handler, cost,
                           ((CH_OWNER, 1),), touches_pcache=True),
        ]

    def init_reduce_chunk(self, lo, hi):
        return [self.default_value] * (hi - lo)

    def init_aux_chunk(self, lo, hi):
        return None

    def on_quiescence(self, engine):
        """Called at full quiescence; return True when the run is complete."""
        return True

    def results(self, engine):
        vals = []
        for t in engine.tiles:
            vals.extend(t.reduce_chunk)
        return {self.result_name: vals}

    def seed_count(self, engine):
        raise NotImplementedError

    def make_seed_iter(self, engine, tile):
        raise NotImplementedError

    def oracle_results(self):
        raise NotImplementedError


def _self_seed(channel, g, payload, tile):
    m = Message(channel, g, payload, tile.x, tile.y, tile.id)
    return m


class SsspWorkload(Workload):
    name = "sssp"
    expand_handler = staticmethod(sssp_expand)
    walk_handler = staticmethod(sssp_walk)
    owner_handler = staticmethod(sssp_owner)
    result_name = "dist"

    def init_aux_chunk(self, lo, hi):
        return [0] * (hi - lo)  # pending re-exploration bits

    def prepare(self, graph):
        if graph.weights is None:
            graph = attach_random_weights(graph, self.params.get("seed", 0))
        self.source = self.params.get("source", 0)
        return graph

    def init_reduce_chunk(self, lo, hi):
        chunk = [INF32] * (hi - lo)
        if lo <= self.source < hi:
            chunk[self.source - lo] = 0
        return chunk

    def seed_count(self, engine):
        return 1 if self.graph.num_vertices else 0

    def make_seed_iter(self, engine, tile):
        if not (tile.vlo <= self.source < tile.vhi):
            return None
        return iter([_self_seed(CH_EXPAND, self.source, (), tile)])

    def e_t(self, engine, results):
        ro = self.graph.row_offsets.astype(np.int64)
        deg = np.diff(ro)
        visited = np.array(results[self.result_name]) < INF32
        return int(deg[visited].sum())

    def oracle_results(self):
        return {"dist": oracle.sssp_dijkstra(self.graph, self.graph.weights,
                                             self.source)}


class BfsWorkload(Workload):
    name = "bfs"
    default_value = INF64
    expand_handler = staticmethod(bfs_expand)
    walk_handler = staticmethod(bfs_walk)
    owner_handler = staticmethod(bfs_owner)
    result_name = "level"

    def init_aux_chunk(self, lo, hi):
        return [0] * (hi - lo)

    def prepare(self, graph):
        self.source = self.params.get("source", 0)
        return graph

    def init_reduce_chunk(self, lo, hi):
        chunk = [INF64] * (hi - lo)
        if lo <= self.source < hi:
            chunk[self.source - lo] = self.source  # (level 0, parent = self)
        return chunk

    def seed_count(self, engine):
        return 1 if self.graph.num_vertices else 0

    def make_seed_iter(self, engine, tile):
        if not (tile.vlo <= self.source < tile.vhi):
            return None
        return iter([_self_seed(CH_EXPAND, self.source, (), tile)])

    def e_t(self, engine, results):
        ro = self.graph.row_offsets.astype(np.int64)
        deg = np.diff(ro)
        visited = np.array(results[self.result_name], dtype=np.uint64) < INF64
        return int(deg[visited].sum())

    def oracle_results(self):
        return {"level": oracle.bfs_levels(self.graph, self.source)}


class WccWorkload(Workload):
    name = "wcc"
    expand_handler = staticmethod(wcc_expand)
    walk_handler = staticmethod(wcc_walk)
    owner_handler = staticmethod(wcc_owner)
    result_name = "label"

    def prepare(self, graph):
        # weak connectivity on a directed CSR needs both directions
        self.original = graph
        return symmetrize(graph)

    def init_reduce_chunk(self, lo, hi):
        return list(range(lo, hi))

    def init_aux_chunk(self, lo, hi):
        return [0] * (hi - lo)

    def seed_count(self, engine):
        return self.graph.num_vertices

    def make_seed_iter(self, engine, tile):
        if tile.vlo >= tile.vhi:
            return None
        return (_self_seed(CH_EXPAND, v, (), tile)
                for v in range(tile.vlo, tile.vhi))

    def oracle_results(self):
        return {"label": oracle.wcc_labels(self.original)}


class PagerankWorkload(Workload):
    name = "pagerank"
    reduce_op = "add"
    policy = WRITE_BACK
    default_value = 0
    respawns = False
    result_name = "rank"

    def prepare(self, graph):
        self.epochs_total = self.params.get("epochs", 10)
        self.damping_fp = self.params.get("damping_fp", PR_DAMPING_FP)
        return graph

    def init_reduce_chunk(self, lo, hi):
        return [0] * (hi - lo)  # next-rank accumulator

    def init_aux_chunk(self, lo, hi):
        return [FP_ONE] * (hi - lo)  # current ranks, mean-one normalized

    expand_handler = staticmethod(pagerank_expand)
    walk_handler = staticmethod(pagerank_walk)
    owner_handler = staticmethod(add_owner)

    def seed_count(self, engine):
        return self.graph.num_vertices

    def make_seed_iter(self, engine, tile):
        if tile.vlo >= tile.vhi:
            return None

        return (_self_seed(CH_EXPAND, v, (), tile)
                for v in range(tile.vlo, tile.vhi))

    def on_quiescence(self, engine):
        base = FP_ONE - self.damping_fp
        d = self.damping_fp
        for t in engine.tiles:
            acc = t.reduce_chunk
            aux = t.aux_chunk
            for i in range(len(acc)):
                aux[i] = base + ((d * acc[i]) >> 16)
                acc[i] = 0
        self.epoch += 1
        if self.epoch >= self.epochs_total:
            return True
        engine.reseed()
        return False

    def results(self, engine):
        vals = []
        for t in engine.tiles:
            vals.extend(t.aux_chunk)
        return {"rank": vals}

    def e_t(self, engine, results):
        return self.graph.num_edges * self.epochs_total

    def oracle_results(self):
        return {"rank": oracle.pagerank_fixed_point(
            self.graph, self.epochs_total, self.damping_fp)}


class SpmvWorkload(Workload):
    name = "spmv"
    reduce_op = "add"
    policy = WRITE_BACK
    default_value = 0
    respawns = False
    result_name = "y"

    def prepare(self, graph):
        if graph.weights is None:
            graph = attach_random_weights(graph, self.params.get("seed", 0))
        rng = np.random.default_rng(self.params.get("seed", 0) + 1)
        self.x = [int(v) for v in
                  rng.integers(0, 1 << 16, size=graph.num_vertices)]
        return graph

    def init_reduce_chunk(self, lo, hi):
        return [0] * (hi - lo)

    # rows are seeded directly as walk tasks over their edge ranges
    expand_handler = None
    walk_handler = staticmethod(spmv_walk)
    owner_handler = staticmethod(add_owner)

    def task_table(self, cost):
        table = super().task_table(cost)
        table[CH_EXPAND] = None
        return table

    def seed_count(self, engine):
        ro = self.graph.row_offsets.astype(np.int64)
        return int((np.diff(ro) > 0).sum())

    def make_seed_iter(self, engine, tile):
        if tile.vlo >= tile.vhi:
            return None

        def gen():
            row = tile.row_chunk
            for i in range(tile.vhi - tile.vlo):
                rb, re_ = row[i], row[i + 1]
                if rb == re_:
                    continue
                tid = rb // engine.e_chunk
                yield Message(CH_WALK, rb, (re_, tile.vlo + i),
                              tid % engine.gw, tid // engine.gw, tile.id)
        return gen()

    def oracle_results(self):
        return {"y": oracle.spmv_integer(self.graph, self.graph.weights, self.x)}


class HistogramWorkload(Workload):
    name = "histogram"
    reduce_op = "add"
    policy = WRITE_BACK
    default_value = 0
    respawns = False
    result_name = "counts"

    # the input array is the column-index stream; bins = vertex ids, so the
    # counts array is the in-degree histogram
    expand_handler = staticmethod(histogram_read)
    walk_handler = None
    owner_handler = staticmethod(add_owner)

    def task_table(self, cost):
        return [
            TaskDescriptor("read", CH_EXPAND, histogram_read, cost,
                           ((CH_OWNER, 1), (CH_PROXY, 1))),
            None,
            TaskDescriptor("reduce", CH_OWNER, add_owner, cost, ()),
            TaskDescriptor("proxy", CH_PROXY, proxy_reduce_handler, cost,
                           ((CH_OWNER, 1),), touches_pcache=True),
        ]

    def init_reduce_chunk(self, lo, hi):
        return [0] * (hi - lo)

    def seed_count(self, engine):
        return self.graph.num_edges

    def make_seed_iter(self, engine, tile):
        if tile.elo >= tile.ehi:
            return None
        return (_self_seed(CH_EXPAND, e, (1,), tile)
                for e in range(tile.elo, tile.ehi))

    def oracle_results(self):
        return {"counts": oracle.histogram_counts(self.graph.col_indices,
                                                  self.graph.num_vertices)}


WORKLOADS = {
    "sssp": SsspWorkload,
    "bfs": BfsWorkload,
    "wcc": WccWorkload,
    "pagerank": PagerankWorkload,
    "spmv": SpmvWorkload,
    "histogram": HistogramWorkload,
}


def build_workload(name, graph, params) -> Workload:
    try:
        cls = WORKLOADS[name]
    except KeyError:
        raise ValueError(f"unknown workload {name!r}; choose from "
                         f"{sorted(WORKLOADS)}") from None
    return cls(graph, params)
