"""Constructors for the benchmark graph families used by the test manifests.

The named instances are association-scheme graphs (Hamming and Johnson
families) as circulated in the theta-function / clique benchmark sets.  They
are vertex-transitive, which gives their partition SDPs closed-form values:
any feasible X can be symmetrized into the adjacency algebra, so the optimum
places all mass on the lambda_2(L) eigenspace and

    <L, X> / 2 = n * lambda_2(L) / 2,

provided the eigenspace is large enough to absorb the spectral cap (its
multiplicity is at least k - 1), which holds for every instance below.
These reference values are what the bench manifests assert against.
"""

from __future__ import annotations

import itertools

import numpy as np

from .graph_io import Graph, make_graph


def hamming_distance_graph(d, dists):
    """Graph on binary d-vectors joining words whose Hamming distance is in ``dists``."""
    n = 1 << d
    dists = frozenset(dists)
    edges = []
    for x in range(n):
        for y in range(x + 1, n):
            if bin(x ^ y).count("1") in dists:
                edges.append((x, y))
    return make_graph(n, edges)


def johnson_graph(v, k, intersections):
    """Graph on k-subsets of [v] joining sets whose intersection size is in
    ``intersections``."""
    verts = list(itertools.combinations(range(v), k))
    sets = [frozenset(s) for s in verts]
    inter = frozenset(intersections)
    n = len(verts)
    edges = []
    for a in range(n):
        for b in range(a + 1, n):
            if len(sets[a] & sets[b]) in inter:
                edges.append((a, b))
    return make_graph(n, edges)


def complete_graph(n):
    return make_graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def path_graph(n):
    return make_graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n):
    return make_graph(n, [(i, (i + 1) % n) for i in range(n)])


def disjoint_cliques(sizes):
    """Union of complete graphs; the balanced-cut SDP value is zero when the
    component sizes admit a balanced split."""
    edges = []
    offset = 0
    for s in sizes:
        edges.extend((offset + i, offset + j) for i in range(s) for j in range(i + 1, s))
        offset += s
    return make_graph(offset, edges)


def gnp_graph(n, p, seed):
    """Erdos-Renyi G(n, p); resamples once if a draw comes out edgeless."""
    rng = np.random.default_rng(seed)
    for _ in range(2):
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        if edges:
            return make_graph(n, edges)
    return path_graph(n)


# name -> (builder, reference f = n * lambda_2 / 2 for bisection)
BENCHMARKS = {
    "hamming6-2": (lambda: hamming_distance_graph(6, {1}), 64.0),
    "hamming8-2": (lambda: hamming_distance_graph(8, {1}), 256.0),
    "hamming-6-4": (lambda: hamming_distance_graph(6, {1, 2, 3}), 1024.0),
    "hamming-8-4": (lambda: hamming_distance_graph(8, {1, 2, 3}), 7424.0),
    "hamming-9-8": (lambda: hamming_distance_graph(9, {8}), 0.0),
    "johnson8-4-4": (lambda: johnson_graph(8, 4, {3}), 280.0),
    "johnson16-2-4": (lambda: johnson_graph(16, 2, {1}), 960.0),
}

# instances whose k = 5 equipartition value coincides with the bisection value
# (lambda_2 multiplicity >= 4, see the module docstring)
EQUIPART5_REFERENCE = {
    "hamming-6-4": 1024.0,
    "johnson8-4-4": 280.0,
    "hamming8-2": 256.0,
}


def build_benchmark(name) -> Graph:
    if name not in BENCHMARKS:
        raise KeyError(f"unknown benchmark instance {name!r}; known: {sorted(BENCHMARKS)}")
    return BENCHMARKS[name][0]()
