"""CSR datasets: binary file IO, RMAT generation, edge-list import, partitioning."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"CSR1"
HEADER = struct.Struct("<4sQQQ")
FLAG_WEIGHTS = 1

# Graph500 RMAT quadrant probabilities.
RMAT_PROBS = (0.57, 0.19, 0.19, 0.05)


class CsrError(ValueError):
    pass


class MalformedHeaderError(CsrError):
    pass


class OffsetMonotonicityError(CsrError):
    pass


class ColumnRangeError(CsrError):
    pass


@dataclass
class CsrGraph:
    num_vertices: int
    num_edges: int
    row_offsets: np.ndarray  # (V+1,) uint64
    col_indices: np.ndarray  # (E,) uint64
    weights: np.ndarray | None = None  # (E,) uint32

    def validate(self):
        v, e = self.num_vertices, self.num_edges
        ro = self.row_offsets
        if len(ro) != v + 1:
            raise MalformedHeaderError(f"row_offsets length {len(ro)} != V+1 ({v + 1})")
        if v >= 0 and (len(ro) == 0 or ro[0] != 0):
            raise OffsetMonotonicityError("row_offsets[0] must be 0")
        if ro[-1] != e:
            raise OffsetMonotonicityError(f"row_offsets[V]={ro[-1]} != E={e}")
        if len(ro) > 1:
            diffs = np.diff(ro.astype(np.int64))
            if (diffs < 0).any():
                bad = int(np.argmax(diffs < 0)) + 1
                raise OffsetMonotonicityError(
                    f"row_offsets[{bad}]={ro[bad]} < row_offsets[{bad - 1}]={ro[bad - 1]}")
        if len(self.col_indices) != e:
            raise MalformedHeaderError(f"col_indices length {len(self.col_indices)} != E ({e})")
        if e and int(self.col_indices.max()) >= v:
            bad = int(np.argmax(self.col_indices >= v))
            raise ColumnRangeError(f"col_indices[{bad}]={self.col_indices[bad]} >= V ({v})")
        if self.weights is not None and len(self.weights) != e:
            raise MalformedHeaderError(f"weights length {len(self.weights)} != E ({e})")
        return self

    def out_degree(self, v):
        return int(self.row_offsets[v + 1] - self.row_offsets[v])


def load_csr(path) -> CsrGraph:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < HEADER.size:
        raise MalformedHeaderError(f"{path}: file shorter than header")
    magic, v, e, flags = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MalformedHeaderError(f"{path}: bad magic {magic!r}")
    has_w = bool(flags & FLAG_WEIGHTS)
    need = HEADER.size + 8 * (v + 1) + 8 * e + (4 * e if has_w else 0)
    if len(data) != need:
        raise MalformedHeaderError(f"{path}: size {len(data)} != expected {need}")
    off = HEADER.size
    ro = np.frombuffer(data, dtype="<u8", count=v + 1, offset=off).copy()
    off += 8 * (v + 1)
    ci = np.frombuffer(data, dtype="<u8", count=e, offset=off).copy()
    off += 8 * e
    wt = np.frombuffer(data, dtype="<u4", count=e, offset=off).copy() if has_w else None
    return CsrGraph(v, e, ro, ci, wt).validate()


def write_csr(graph: CsrGraph, path):
    graph.validate()
    flags = FLAG_WEIGHTS if graph.weights is not None else 0
    with open(path, "wb") as f:
        f.write(HEADER.pack(MAGIC, graph.num_vertices, graph.num_edges, flags))
        f.write(graph.row_offsets.astype("<u8").tobytes())
        f.write(graph.col_indices.astype("<u8").tobytes())
        if graph.weights is not None:
            f.write(graph.weights.astype("<u4").tobytes())


def from_edges(src, dst, num_vertices, weights=None) -> CsrGraph:
    """Build CSR from parallel edge arrays; edge order within a row is kept."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    e = len(src)
    counts = np.bincount(src, minlength=num_vertices) if e else np.zeros(num_vertices, np.int64)
    ro = np.zeros(num_vertices + 1, dtype="<u8")
    np.cumsum(counts, out=ro[1:])
    order = np.argsort(src, kind="stable")
    ci = dst[order].astype("<u8")
    wt = None
    if weights is not None:
        wt = np.asarray(weights)[order].astype("<u4")
    return CsrGraph(num_vertices, e, ro, ci, wt).validate()


def load_edge_list(path, num_vertices=None) -> CsrGraph:
    """Text import convenience: one 'src dst [weight]' triple per line."""
    src, dst, wts = [], [], []
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            src.append(int(parts[0]))
            dst.append(int(parts[1]))
            if len(parts) > 2:
                wts.append(int(parts[2]))
    if wts and len(wts) != len(src):
        raise CsrError("edge list mixes weighted and unweighted lines")
    if num_vertices is None:
        num_vertices = max(max(src, default=-1), max(dst, default=-1)) + 1
    return from_edges(src, dst, num_vertices, wts if wts else None)


def generate_rmat(scale, edge_factor=16, seed=0, probs=RMAT_PROBS) -> CsrGraph:
    """Recursive-matrix random graph: V = 2^scale, E = edge_factor * V.

    Deterministic for a fixed seed. Self-loops and duplicate edges are kept,
    matching raw generator output. No vertex permutation is applied, so low
    vertex ids are the heavy hubs.
    """
    if scale < 1:
        raise ValueError("scale must be >= 1")
    if edge_factor < 1:
        raise ValueError("edge_factor must be >= 1")
    a, b, c, _ = probs
    v = 1 << scale
    e = edge_factor * v
    rng = np.random.default_rng(seed)
    src = np.zeros(e, dtype=np.int64)
    dst = np.zeros(e, dtype=np.int64)
    for bit in range(scale):
        r = rng.random(e)
        src |= (r >= a + b).astype(np.int64) << bit
        dst |= (((r >= a) & (r < a + b)) | (r >= a + b + c)).astype(np.int64) << bit
    return from_edges(src, dst, v)


def attach_random_weights(graph: CsrGraph, seed, lo=1, hi=255) -> CsrGraph:
    """Seeded uniform integer weights in [lo, hi] for unweighted inputs."""
    rng = np.random.default_rng(seed)
    wt = rng.integers(lo, hi + 1, size=graph.num_edges, dtype=np.uint32)
    return CsrGraph(graph.num_vertices, graph.num_edges,
                    graph.row_offsets, graph.col_indices, wt.astype("<u4"))


def symmetrize(graph: CsrGraph) -> CsrGraph:
    """Add the reverse of every edge (duplicates kept); weights mirrored."""
    ro64 = graph.row_offsets.astype(np.int64)
    src = np.repeat(np.arange(graph.num_vertices, dtype=np.int64), np.diff(ro64))
    dst = graph.col_indices.astype(np.int64)
    s2 = np.concatenate([src, dst])
    d2 = np.concatenate([dst, src])
    w2 = None
    if graph.weights is not None:
        w2 = np.concatenate([graph.weights, graph.weights])
    return from_edges(s2, d2, graph.num_vertices, w2)


@dataclass(frozen=True)
class Partition:
    """Equal-chunk split of a linear array over row-major tile ids."""

    array_len: int
    num_tiles: int

    def __post_init__(self):
        if self.num_tiles < 1:
            raise ValueError("num_tiles must be >= 1")

    @property
    def chunk_size(self):
        # ceil division; the last tile may own a short (or empty) chunk
        return max(1, -(-self.array_len // self.num_tiles))

    def owner_of(self, g):
        if g < 0 or g >= self.array_len:
            raise IndexError(f"index {g} out of range {self.array_len}")
        return g // self.chunk_size

    def range_of(self, tile_id):
        lo = min(tile_id * self.chunk_size, self.array_len)
        hi = min(lo + self.chunk_size, self.array_len)
        return lo, hi

    def chunk_len(self, tile_id):
        lo, hi = self.range_of(tile_id)
        return hi - lo
