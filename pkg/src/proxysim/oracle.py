"""Sequential reference implementations of the six workloads.

These are the oracles the simulator results are compared against: classic
single-threaded algorithms (Dijkstra, BFS layers, union-find, fixed-point
power iteration, row-wise SpMV, counting) over the same integer arithmetic
the distributed runs use, so equality checks are exact.
"""

from __future__ import annotations

import heapq

from .pcache import INF32, INF64

FP_ONE = 1 << 16
PR_DAMPING_FP = 55706  # round(0.85 * 65536)


def sssp_dijkstra(graph, weights, source=0):
    """Exact shortest distances; unreachable vertices keep the 32-bit max."""
    v = graph.num_vertices
    dist = [INF32] * v
    if v == 0:
        return dist
    dist[source] = 0
    ro = graph.row_offsets
    ci = graph.col_indices
    pq = [(0, source)]
    while pq:
        d, u = heapq.heappop(pq)
        if d > dist[u]:
            continue
        for e in range(int(ro[u]), int(ro[u + 1])):
            w = int(weights[e])
            t = int(ci[e])
            nd = d + w
            if nd < dist[t]:
                dist[t] = nd
                heapq.heappush(pq, (nd, t))
    return dist


def bfs_levels(graph, source=0):
    """Packed (level << 32) | parent words; the parent is the lowest
    predecessor id among minimum-level ones; unreached = 64-bit max."""
    v = graph.num_vertices
    packed = [INF64] * v
    if v == 0:
        return packed
    ro = graph.row_offsets
    ci = graph.col_indices
    level = [None] * v
    level[source] = 0
    packed[source] = source  # (0 << 32) | source
    frontier = [source]
    depth = 0
    while frontier:
        nxt = []
        for u in frontier:
            for e in range(int(ro[u]), int(ro[u + 1])):
                t = int(ci[e])
                if level[t] is None:
                    level[t] = depth + 1
                    nxt.append(t)
                cand = ((depth + 1) << 32) | u
                if level[t] == depth + 1 and cand < packed[t]:
                    packed[t] = cand
        frontier = nxt
        depth += 1
    return packed


def wcc_labels(graph):
    """Per-vertex minimum vertex id of its weakly connected component,
    via union-find over the stored edges (direction ignored)."""
    v = graph.num_vertices
    parent = list(range(v))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    ro = graph.row_offsets
    ci = graph.col_indices
    for u in range(v):
        for e in range(int(ro[u]), int(ro[u + 1])):
            a, b = find(u), find(int(ci[e]))
            if a != b:
                parent[max(a, b)] = min(a, b)
    labels = [0] * v
    mins = {}
    for u in range(v):
        r = find(u)
        if r not in mins or u < mins[r]:
            mins[r] = u
    for u in range(v):
        labels[u] = mins[find(u)]
    return labels


def pagerank_fixed_point(graph, epochs, damping_fp=PR_DAMPING_FP):
    """Q16.16 power iteration, ranks normalized to mean one.

    Per epoch: contribution of v = rank[v] // outdeg(v) (integer floor);
    rank'[u] = (ONE - damping_fp) + ((damping_fp * sum_in) >> 16).
    Dangling vertices contribute nothing.
    """
    v = graph.num_vertices
    ro = graph.row_offsets
    ci = graph.col_indices
    rank = [FP_ONE] * v
    base = FP_ONE - damping_fp
    for _ in range(epochs):
        acc = [0] * v
        for u in range(v):
            deg = int(ro[u + 1]) - int(ro[u])
            if deg == 0:
                continue
            c = rank[u] // deg
            for e in range(int(ro[u]), int(ro[u + 1])):
                acc[int(ci[e])] += c
        rank = [base + ((damping_fp * s) >> 16) for s in acc]
    return rank


def spmv_integer(graph, weights, x):
    """y = A x over the CSR matrix with integer values."""
    v = graph.num_vertices
    ro = graph.row_offsets
    ci = graph.col_indices
    y = [0] * v
    for r in range(v):
        s = 0
        for e in range(int(ro[r]), int(ro[r + 1])):
            s += int(weights[e]) * x[int(ci[e])]
        y[r] = s
    return y


def histogram_counts(values, num_bins):
    counts = [0] * num_bins
    for b in values:
        counts[int(b)] += 1
    return counts
