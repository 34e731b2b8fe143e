"""Tile-grid address arithmetic: owner tiles, proxy placement, cache sizing.

Everything here is pure integer math over row-major tile grids with square,
power-of-two proxy regions. No simulator state is touched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def is_pow2(n):
    return n > 0 and (n & (n - 1)) == 0


def next_pow2(n):
    """Smallest power of two >= n (n >= 1)."""
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


@dataclass(frozen=True)
class GridGeometry:
    """Grid dimensions plus the proxy-region width W.

    W must divide both grid dimensions so regions tile the grid exactly;
    all three values are powers of two so region masks stay bitwise.
    """

    grid_width: int
    grid_height: int
    region_width: int

    def __post_init__(self):
        gw, gh, w = self.grid_width, self.grid_height, self.region_width
        if not (is_pow2(gw) and is_pow2(gh)):
            raise ValueError(f"grid dims must be powers of two, got {gw}x{gh}")
        if not is_pow2(w):
            raise ValueError(f"region width must be a power of two, got {w}")
        if gw % w or gh % w:
            raise ValueError(f"region width {w} must divide grid {gw}x{gh}")

    @property
    def num_tiles(self):
        return self.grid_width * self.grid_height

    @property
    def regions_x(self):
        return self.grid_width // self.region_width

    @property
    def regions_y(self):
        return self.grid_height // self.region_width

    @property
    def num_regions(self):
        return self.regions_x * self.regions_y

    def tile_id(self, x, y):
        return y * self.grid_width + x

    def tile_xy(self, tile_id):
        return tile_id % self.grid_width, tile_id // self.grid_width

    def region_origin(self, x, y):
        w = self.region_width
        return (x // w) * w, (y // w) * w

    def region_index(self, x, y):
        w = self.region_width
        return (y // w) * self.regions_x + (x // w)


@dataclass(frozen=True)
class SizingInputs:
    """Inputs to the region/cache sizing heuristic.

    reduction_elems: total element count of the reduction array.
    cache_budget_max: largest per-tile cache capacity (elements) allowed.
    footprint_ratio: maximum desired ratio between a tile's local proxy
        fraction and the cache dedicated to it.
    """

    reduction_elems: int
    cache_budget_max: int
    footprint_ratio: int

    def __post_init__(self):
        if self.reduction_elems <= 0 or self.cache_budget_max <= 0 or self.footprint_ratio <= 0:
            raise ValueError("sizing inputs must be strictly positive")


def w_min(inputs: SizingInputs) -> int:
    """Smallest configurable region width: next power of two of
    sqrt(reduction_elems / (cache_budget_max * footprint_ratio)), floored at 1.

    Exact integer arithmetic: the result is the smallest power of two W with
    W^2 * cache_budget_max * footprint_ratio >= reduction_elems.
    """
    denom = inputs.cache_budget_max * inputs.footprint_ratio
    ratio_ceil = -(-inputs.reduction_elems // denom)
    s = math.isqrt(ratio_ceil)
    if s * s < ratio_ceil:
        s += 1
    return next_pow2(max(1, s))


def p_cache_size(inputs: SizingInputs, w_selected=None) -> int:
    """Per-tile cache capacity in elements:
    min(reduction_elems / max(16, w_min)^2, cache_budget_max).

    The divisor uses max(16, w_min) regardless of the selected region width;
    w_selected is only validated against the lower bound when given.
    """
    wm = w_min(inputs)
    if w_selected is not None and w_selected < wm:
        raise ValueError(f"selected region width {w_selected} below minimum {wm}")
    divisor = max(16, wm) ** 2
    return min(inputs.reduction_elems // divisor, inputs.cache_budget_max)


def pcache_tag_bits(local_fraction_elems, cache_capacity_elems):
    """Tag width: log2(local_fraction_elems / cache_capacity_elems)."""
    if not (is_pow2(local_fraction_elems) and is_pow2(cache_capacity_elems)):
        raise ValueError("tag sizing requires power-of-two fraction and capacity")
    if cache_capacity_elems > local_fraction_elems:
        raise ValueError("cache capacity exceeds local fraction")
    return (local_fraction_elems // cache_capacity_elems).bit_length() - 1


def owner_tile(global_index, partition, geom: GridGeometry):
    """Coordinates of the tile owning a global array index."""
    if global_index < 0 or global_index >= partition.array_len:
        raise IndexError(f"index {global_index} out of range {partition.array_len}")
    tid = global_index // partition.chunk_size
    return geom.tile_xy(tid)


def proxy_tile(global_index, source_xy, geom: GridGeometry, partition):
    """The tile in the source tile's region at the owner's intra-region coords."""
    ox, oy = owner_tile(global_index, partition, geom)
    w = geom.region_width
    rx0, ry0 = geom.region_origin(*source_xy)
    return rx0 + ox % w, ry0 + oy % w


class ProxyFractionMap:
    """Bijection between a tile's proxied global indices and its local proxy
    array offsets.

    A tile at intra-region coords (x mod W, y mod W) is proxy for every element
    whose owner tile has the same intra-region coords. Owner chunks of the
    congruent tiles are laid out in region-index order, so
    local_offset = region_index(owner) * chunk_size + (g mod chunk_size).
    """

    def __init__(self, geom: GridGeometry, partition, tile_x, tile_y):
        self.geom = geom
        self.partition = partition
        w = geom.region_width
        self.in_x = tile_x % w
        self.in_y = tile_y % w
        self.fraction_len = geom.num_regions * partition.chunk_size

    def is_proxied(self, g):
        ox, oy = owner_tile(g, self.partition, self.geom)
        w = self.geom.region_width
        return ox % w == self.in_x and oy % w == self.in_y

    def local_offset(self, g):
        part = self.partition
        tid = g // part.chunk_size
        ox, oy = self.geom.tile_xy(tid)
        w = self.geom.region_width
        if ox % w != self.in_x or oy % w != self.in_y:
            raise IndexError(f"index {g} not proxied by tile at intra-region "
                             f"({self.in_x},{self.in_y})")
        k = self.geom.region_index(ox, oy)
        return k * part.chunk_size + g % part.chunk_size

    def element_at(self, off):
        part = self.partition
        k, r = divmod(off, part.chunk_size)
        geom = self.geom
        w = geom.region_width
        ry, rx = divmod(k, geom.regions_x)
        ox = rx * w + self.in_x
        oy = ry * w + self.in_y
        g = geom.tile_id(ox, oy) * part.chunk_size + r
        if g >= part.array_len:
            raise IndexError(f"local offset {off} maps past array end")
        return g
