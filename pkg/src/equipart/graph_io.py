"""Graph ingestion, validation, and Laplacian construction.

Two file formats are supported:

* ``edge-list``: optional comment lines starting with ``%`` or ``#``; the
  first non-comment line is ``n m``; then m lines ``i j [w]`` with 0-based
  endpoints and an optional positive weight (default 1).
* ``matrix-market``: ``coordinate pattern symmetric`` or ``coordinate real
  symmetric`` headers, 1-based indices, one triangle stored.

Duplicate edges (in either orientation) and self-loops are rejected rather
than merged, so a parsed :class:`Graph` is always a simple weighted graph.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class GraphFormatError(ValueError):
    """Raised on malformed graph files; carries the offending line number."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc += f"{path}"
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line


@dataclass(frozen=True)
class Graph:
    """Simple undirected weighted graph on vertices 0..n-1.

    ``edges`` is a sorted tuple of (i, j, w) with i < j and w > 0.
    ``header_m`` records the edge count claimed by the source file, which for
    some distributed benchmark files differs from the true edge count.
    """

    n: int
    edges: tuple = field(default_factory=tuple)
    header_m: int | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"graph needs at least 2 vertices, got n={self.n}")

    @property
    def m(self):
        return len(self.edges)


def _canonical_edges(raw_edges, n, path=None, lines=None):
    """Validate, deduplicate-check, and sort a list of (i, j, w) triples."""
    seen = {}
    out = []
    for idx, (i, j, w) in enumerate(raw_edges):
        line = lines[idx] if lines is not None else None
        if i == j:
            raise GraphFormatError(f"self-loop at vertex {i}", path, line)
        if not (0 <= i < n and 0 <= j < n):
            raise GraphFormatError(f"vertex index out of range: ({i}, {j}) with n={n}", path, line)
        if not (w > 0):
            raise GraphFormatError(f"non-positive weight {w} on edge ({i}, {j})", path, line)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GraphFormatError(f"duplicate edge ({i}, {j}); first seen on line {seen[key]}", path, line)
        seen[key] = line
        out.append((key[0], key[1], float(w)))
    out.sort()
    return tuple(out)


def make_graph(n, edges):
    """Build a validated Graph from 0-based (i, j) or (i, j, w) pairs."""
    raw = [(e[0], e[1], e[2] if len(e) > 2 else 1.0) for e in edges]
    return Graph(n=n, edges=_canonical_edges(raw, n))


def _parse_edge_list(text, path):
    header = None
    raw, lines = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "%#":
            continue
        parts = s.split()
        if header is None:
            if len(parts) != 2:
                raise GraphFormatError(f"expected header 'n m', got {s!r}", path, lineno)
            try:
                header = (int(parts[0]), int(parts[1]))
            except ValueError:
                raise GraphFormatError(f"non-integer header {s!r}", path, lineno) from None
            continue
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"expected 'i j [w]', got {s!r}", path, lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise GraphFormatError(f"could not parse edge line {s!r}", path, lineno) from None
        raw.append((i, j, w))
        lines.append(lineno)
    if header is None:
        raise GraphFormatError("empty file: no 'n m' header found", path)
    n, m = header
    if len(raw) != m:
        raise GraphFormatError(f"header declares m={m} edges but file has {len(raw)}", path)
    return Graph(n=n, edges=_canonical_edges(raw, n, path, lines), header_m=m)


def _parse_matrix_market(text, path):
    it = iter(enumerate(text.splitlines(), start=1))
    try:
        lineno, first = next(it)
    except StopIteration:
        raise GraphFormatError("empty file", path) from None
    tokens = first.lower().split()
    if len(tokens) != 5 or tokens[0] not in ("%%matrixmarket",):
        raise GraphFormatError("missing '%%MatrixMarket matrix coordinate ...' banner", path, 1)
    _, obj, fmt, value_type, symmetry = tokens
    if obj != "matrix" or fmt != "coordinate":
        raise GraphFormatError(f"unsupported MatrixMarket object/format: {obj} {fmt}", path, 1)
    if symmetry != "symmetric" or value_type not in ("pattern", "real"):
        raise GraphFormatError(
            f"only 'coordinate pattern symmetric' and 'coordinate real symmetric' are accepted, got '{value_type} {symmetry}'",
            path,
            1,
        )
    pattern = value_type == "pattern"

    size = None
    raw, lines = [], []
    for lineno, line in it:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if size is None:
            if len(parts) != 3:
                raise GraphFormatError(f"expected size line 'n n m', got {s!r}", path, lineno)
            try:
                rows, cols, m = int(parts[0]), int(parts[1]), int(parts[2])
            except ValueError:
                raise GraphFormatError(f"non-integer size line {s!r}", path, lineno) from None
            if rows != cols:
                raise GraphFormatError(f"adjacency matrix must be square, got {rows}x{cols}", path, lineno)
            size = (rows, m)
            continue
        want = 2 if pattern else 3
        if len(parts) != want:
            raise GraphFormatError(f"expected {want} fields per entry, got {s!r}", path, lineno)
        try:
            i, j = int(parts[0]) - 1, int(parts[1]) - 1
            w = float(parts[2]) if not pattern else 1.0
        except ValueError:
            raise GraphFormatError(f"could not parse entry {s!r}", path, lineno) from None
        raw.append((i, j, w))
        lines.append(lineno)
    if size is None:
        raise GraphFormatError("missing size line", path)
    n, m = size
    if len(raw) != m:
        raise GraphFormatError(f"size line declares {m} entries but file has {len(raw)}", path)
    return Graph(n=n, edges=_canonical_edges(raw, n, path, lines), header_m=m)


def load_graph(path, fmt=None):
    """Load a graph file.

    Parameters
    ----------
    path : str or Path
    fmt : {"edge-list", "matrix-market", None}
        With None the format is inferred from the extension (.mtx / .mm means
        Matrix Market, anything else edge list).
    """
    if fmt is None:
        ext = os.path.splitext(str(path))[1].lower()
        fmt = "matrix-market" if ext in (".mtx", ".mm") else "edge-list"
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if fmt == "edge-list":
        return _parse_edge_list(text, str(path))
    if fmt == "matrix-market":
        return _parse_matrix_market(text, str(path))
    raise ValueError(f"unknown graph format {fmt!r}")


def save_graph(path, g, fmt="edge-list"):
    """Write a graph in the canonical edge-list or Matrix Market form."""
    lines = []
    if fmt == "edge-list":
        lines.append(f"{g.n} {g.m}")
        for i, j, w in g.edges:
            lines.append(f"{i} {j}" if w == 1.0 else f"{i} {j} {w!r}")
    elif fmt == "matrix-market":
        weighted = any(w != 1.0 for _, _, w in g.edges)
        kind = "real" if weighted else "pattern"
        lines.append(f"%%MatrixMarket matrix coordinate {kind} symmetric")
        lines.append(f"{g.n} {g.n} {g.m}")
        for i, j, w in g.edges:
            # store the lower triangle, 1-based
            entry = f"{j + 1} {i + 1}"
            if weighted:
                entry += f" {w!r}"
            lines.append(entry)
    else:
        raise ValueError(f"unknown graph format {fmt!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def laplacian(g):
    """Sparse CSR graph Laplacian L = D - A of a validated Graph."""
    if g.m == 0:
        return sp.csr_matrix((g.n, g.n))
    e = np.asarray(g.edges, dtype=float)
    i = e[:, 0].astype(int)
    j = e[:, 1].astype(int)
    w = e[:, 2]
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([j, i, i, j])
    vals = np.concatenate([-w, -w, w, w])
    return sp.coo_matrix((vals, (rows, cols)), shape=(g.n, g.n)).tocsr()


def laplacian_apply(L, X):
    """Return L @ X for a dense vector or n x r block X."""
    X = np.asarray(X)
    if X.shape[0] != L.shape[1]:
        raise ValueError(f"shape mismatch: L is {L.shape}, X is {X.shape}")
    return L @ X
