"""Direct-mapped proxy cache: one data element per line, default on miss,
write-through filtering or write-back coalescing, idle self-invalidation.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

WRITE_THROUGH = "write_through"
WRITE_BACK = "write_back"

# Miss sentinel for minimization: max value of a 32-bit data word. BFS packs
# (level, parent) into one 64-bit word, so its sentinel fills both halves.
INF32 = 0xFFFFFFFF
INF64 = 0xFFFFFFFFFFFFFFFF


def reduce_min(a, b):
    return b if b < a else a


def reduce_add(a, b):
    return a + b


REDUCE_OPS = {"min": reduce_min, "add": reduce_add}


@dataclass
class ProxyCacheConfig:
    """The five software-visible registers, per reduction array.

    local_fraction_len is the tile's share of the region's proxy array
    (reduction_elems / W^2 for full regions); capacity must not exceed it.
    """

    local_fraction_len: int
    capacity: int
    policy: str
    propagate_channel: int
    default_value: int
    reduce_op: str = "min"

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        if self.capacity > self.local_fraction_len:
            raise ValueError("capacity exceeds local proxy fraction")
        if self.policy not in (WRITE_THROUGH, WRITE_BACK):
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.reduce_op not in REDUCE_OPS and not callable(self.reduce_op):
            raise ValueError(f"unknown reduce op {self.reduce_op!r}")


class ProxyCache:
    """Per-tile cache over the tile's local proxy-array fraction.

    Line index = local_offset mod capacity, tag = local_offset div capacity.
    Write-through never holds dirty lines; write-back lines are dirty from
    allocation until eviction or self-invalidation.
    """

    __slots__ = ("cfg", "fmap", "capacity", "valid", "dirty", "tag", "value",
                 "op", "dirty_count", "_dirty_heap", "_in_heap", "hits",
                 "misses", "evictions", "updates_attempted", "updates_filtered",
                 "updates_coalesced", "emissions")

    def __init__(self, cfg: ProxyCacheConfig, fraction_map):
        self.cfg = cfg
        self.fmap = fraction_map
        cap = cfg.capacity
        self.capacity = cap
        self.valid = [False] * cap
        self.dirty = [False] * cap
        self.tag = [0] * cap
        self.value = [0] * cap
        self.op = REDUCE_OPS.get(cfg.reduce_op, cfg.reduce_op)
        self.dirty_count = 0
        # lazy min-heap of dirty line indices, one entry per index at most
        self._dirty_heap = []
        self._in_heap = [False] * cap
        self.hits = 0
        self.misses = 0
        self.evictions = 0
        self.updates_attempted = 0
        self.updates_filtered = 0
        self.updates_coalesced = 0
        self.emissions = 0

    def _slot(self, g):
        off = self.fmap.local_offset(g)
        return off % self.capacity, off // self.capacity

    def read(self, g):
        """Stored value on hit, the configured default on miss (no allocate)."""
        idx, tag = self._slot(g)
        if self.valid[idx] and self.tag[idx] == tag:
            self.hits += 1
            return self.value[idx]
        self.misses += 1
        return self.cfg.default_value

    def update(self, g, new_value):
        """Reduce new_value into the line for g.

        Returns (updated, emission) where emission is an (element, value) pair
        to propagate toward that element's owner, or None.

        Write-through: store and emit only if the reduction improves on the
        current (or default) value; otherwise filter.
        Write-back: coalesce into the line; a tag conflict first evicts and
        emits the old line, then allocates the new one. Conflict-free updates
        never emit.
        """
        self.updates_attempted += 1
        idx, tag = self._slot(g)
        hit = self.valid[idx] and self.tag[idx] == tag
        if hit:
            self.hits += 1
            current = self.value[idx]
        else:
            self.misses += 1
            current = self.cfg.default_value

        if self.cfg.policy == WRITE_THROUGH:
            merged = self.op(current, new_value)
            if merged == current:
                self.updates_filtered += 1
                return False, None
            # allocate on improving store; a conflicting line is clean and is
            # silently replaced
            self.valid[idx] = True
            self.tag[idx] = tag
            self.value[idx] = merged
            self.emissions += 1
            return True, (g, merged)

        # write-back
        emission = None
        if hit:
            merged = self.op(current, new_value)
            if merged == current:
                self.updates_filtered += 1
                return False, None
            self.value[idx] = merged
            self.updates_coalesced += 1
            return True, None
        if self.valid[idx]:
            # tag conflict: evict-and-emit the old element, then allocate
            old_off = self.tag[idx] * self.capacity + idx
            old_g = self.fmap.element_at(old_off)
            emission = (old_g, self.value[idx])
            self.evictions += 1
            self.emissions += 1
            if self.dirty[idx]:
                self.dirty[idx] = False
                self.dirty_count -= 1
        self.valid[idx] = True
        self.tag[idx] = tag
        self.value[idx] = self.op(self.cfg.default_value, new_value)
        if not self.dirty[idx]:
            self.dirty[idx] = True
            self.dirty_count += 1
            if not self._in_heap[idx]:
                self._in_heap[idx] = True
                heapq.heappush(self._dirty_heap, idx)
        self.updates_coalesced += 1
        return True, emission

    def flush_one(self):
        """Self-invalidate the lowest-index dirty line; returns its
        (element, value) emission or None if clean. Write-back only."""
        if self.cfg.policy != WRITE_BACK or self.dirty_count == 0:
            return None
        heap = self._dirty_heap
        while heap:
            idx = heapq.heappop(heap)
            self._in_heap[idx] = False
            if not self.dirty[idx]:
                continue
            off = self.tag[idx] * self.capacity + idx
            g = self.fmap.element_at(off)
            out = (g, self.value[idx])
            self.valid[idx] = False
            self.dirty[idx] = False
            self.dirty_count -= 1
            self.evictions += 1
            self.emissions += 1
            return out
        return None

    def valid_count(self):
        return sum(self.valid)
