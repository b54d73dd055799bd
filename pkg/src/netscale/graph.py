"""Undirected multigraph container, edge-list ingestion and basic traversal."""

from __future__ import annotations

import gzip
import hashlib
import io
import logging
import struct
from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import ParseError

log = logging.getLogger(__name__)

__all__ = [
    "Graph",
    "DegreeStats",
    "parse_edge_list",
    "read_edge_list",
    "degree_stats",
    "is_connected",
    "connected_components",
    "largest_component",
    "induced_subgraph",
    "save_graph",
    "load_graph",
    "graph_to_bytes",
    "graph_from_bytes",
    "graph_hash",
]

GRAPH_MAGIC = b"NSGR"
GRAPH_VERSION = 1
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected multigraph without self-loops.

    ``edges`` is an ``(m, 2)`` int32 array; parallel edges are separate rows.
    The CSR adjacency (``indptr``/``indices``) lists one endpoint per incident
    edge, so a vertex appears ``k`` times in a neighbor's list when the two are
    joined by ``k`` parallel edges. Arrays are read-only.
    """

    n: int
    edges: np.ndarray
    labels: tuple | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        edges = np.ascontiguousarray(np.asarray(self.edges, dtype=np.int32).reshape(-1, 2))
        n = int(self.n)
        if n < 0:
            raise ValueError("vertex count must be non-negative")
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self-loops are not allowed")
        edges.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", edges)

        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        order = np.argsort(src, kind="stable")
        degree = np.bincount(src, minlength=n).astype(np.int64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(degree, out=indptr[1:])
        indices = dst[order].astype(np.int32)
        for a in (degree, indptr, indices):
            a.setflags(write=False)
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)

    @classmethod
    def from_edges(cls, edges: Iterable[Sequence[int]], n: int | None = None) -> Graph:
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        arr = arr.reshape(-1, 2)
        if n is None:
            n = int(arr.max()) + 1 if arr.size else 0
        return cls(n, arr)

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    @cached_property
    def simple_degree(self) -> np.ndarray:
        """Degrees in the simple projection (parallel edges collapsed)."""
        return np.diff(self.simple_csr().indptr)

    def simple_csr(self) -> sparse.csr_matrix:
        """Binary adjacency of the simple projection as a sparse matrix."""
        a = sparse.csr_matrix(
            (np.ones(2 * self.m, dtype=np.int8), (np.r_[self.edges[:, 0], self.edges[:, 1]],
                                                  np.r_[self.edges[:, 1], self.edges[:, 0]])),
            shape=(self.n, self.n),
        )
        a.sum_duplicates()
        a.data[:] = 1
        return a

    def dense_simple(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.uint8)
        a[self.edges[:, 0], self.edges[:, 1]] = 1
        a[self.edges[:, 1], self.edges[:, 0]] = 1
        return a

    def edge_multiset(self) -> list[tuple[int, int]]:
        """Sorted list of edges with each pair written (min, max)."""
        lo = np.minimum(self.edges[:, 0], self.edges[:, 1])
        hi = np.maximum(self.edges[:, 0], self.edges[:, 1])
        return sorted(zip(lo.tolist(), hi.tolist()))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class DegreeStats:
    n: int
    m: int
    avg_degree: float
    avg_sq_degree: float
    degree_histogram: dict[int, int]


def _iter_lines(text: str | Iterable[str]) -> Iterable[str]:
    if isinstance(text, str):
        return io.StringIO(text)
    return text


def parse_edge_list(text: str | Iterable[str], dedupe: bool = True) -> Graph:
    """Parse a whitespace-separated edge list.

    Vertex tokens are renumbered densely in order of first appearance; the
    original tokens are kept in ``Graph.labels``. Lines starting with ``#``
    (and blank lines) are skipped, self-loops are dropped. With ``dedupe``
    repeated undirected pairs collapse to a single edge. Ingestion counts are
    recorded in ``Graph.info``.
    """
    ids: dict[str, int] = {}
    pairs: list[tuple[int, int]] = []
    self_loops = 0
    for lineno, line in enumerate(_iter_lines(text), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        if len(tok) != 2:
            raise ParseError(f"expected 2 vertex tokens, found {len(tok)}", lineno)
        a, b = tok
        if a == b:
            self_loops += 1
            continue
        u = ids.setdefault(a, len(ids))
        v = ids.setdefault(b, len(ids))
        pairs.append((u, v))
    if not pairs:
        raise ParseError("edge list contains no edges")
    if self_loops:
        log.warning("dropped %d self-loop line(s)", self_loops)

    arr = np.asarray(pairs, dtype=np.int64)
    raw_m = len(arr)
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    keys = lo * len(ids) + hi
    _, first = np.unique(keys, return_index=True)
    duplicates = raw_m - len(first)
    if duplicates:
        directed = np.unique(arr[:, 0] * len(ids) + arr[:, 1]).size
        if directed == raw_m:
            log.warning("input lists %d reciprocal pair(s); treating it as undirected", duplicates)
    if dedupe:
        arr = arr[np.sort(first)]

    info = {
        "raw_edges": raw_m,
        "self_loops_dropped": self_loops,
        "duplicate_edges": int(duplicates),
        "deduplicated": bool(dedupe),
    }
    return Graph(len(ids), arr, labels=tuple(ids), info=info)


def read_edge_list(path: str | Path, dedupe: bool = True) -> Graph:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt", encoding="utf-8") as fh:
        g = parse_edge_list(fh, dedupe=dedupe)
    g.info["source"] = str(path)
    return g


def degree_stats(g: Graph) -> DegreeStats:
    if g.n < 1:
        raise ValueError("graph has no vertices")
    d = g.degree
    values, counts = np.unique(d, return_counts=True)
    return DegreeStats(
        n=g.n,
        m=g.m,
        avg_degree=2.0 * g.m / g.n,
        avg_sq_degree=float(np.mean(d.astype(np.float64) ** 2)),
        degree_histogram={int(k): int(c) for k, c in zip(values, counts)},
    )


def is_connected(g: Graph) -> bool:
    """True when BFS from vertex 0 reaches every vertex."""
    if g.n < 1:
        raise ValueError("graph has no vertices")
    seen = np.zeros(g.n, dtype=bool)
    seen[0] = True
    reached = 1
    queue = deque([0])
    indptr, indices = g.indptr, g.indices
    while queue:
        v = queue.popleft()
        for w in indices[indptr[v] : indptr[v + 1]].tolist():
            if not seen[w]:
                seen[w] = True
                reached += 1
                queue.append(w)
    return reached == g.n


def connected_components(g: Graph) -> tuple[int, np.ndarray]:
    from scipy.sparse.csgraph import connected_components as _cc

    return _cc(g.simple_csr(), directed=False)


def largest_component(g: Graph) -> Graph:
    count, labels = connected_components(g)
    if count == 1:
        return g
    biggest = np.argmax(np.bincount(labels))
    return induced_subgraph(g, np.flatnonzero(labels == biggest))


def induced_subgraph(g: Graph, vertices: Sequence[int]) -> Graph:
    """Subgraph on ``vertices``, renumbered by position in the sequence.

    Parallel edges keep their multiplicity.
    """
    vs = np.asarray(vertices, dtype=np.int64).reshape(-1)
    if vs.size and (vs.min() < 0 or vs.max() >= g.n):
        raise ValueError("vertex out of range")
    pos = np.full(g.n, -1, dtype=np.int64)
    pos[vs] = np.arange(vs.size)
    if np.count_nonzero(pos >= 0) != vs.size:
        raise ValueError("duplicate vertex in selection")
    a = pos[g.edges[:, 0]]
    b = pos[g.edges[:, 1]]
    keep = (a >= 0) & (b >= 0)
    return Graph(int(vs.size), np.stack([a[keep], b[keep]], axis=1))


def graph_to_bytes(g: Graph) -> bytes:
    return _HEADER.pack(GRAPH_MAGIC, GRAPH_VERSION, g.n, g.m) + g.edges.astype("<u4").tobytes()


def graph_from_bytes(data: bytes) -> Graph:
    if len(data) < _HEADER.size:
        raise ParseError("truncated graph record")
    magic, version, n, m = _HEADER.unpack_from(data)
    if magic != GRAPH_MAGIC:
        raise ParseError("not a graph record (bad magic)")
    if version != GRAPH_VERSION:
        raise ParseError(f"unsupported graph record version {version}")
    body = data[_HEADER.size :]
    if len(body) != 8 * m:
        raise ParseError(f"graph record body has {len(body)} bytes, expected {8 * m}")
    edges = np.frombuffer(body, dtype="<u4").reshape(m, 2).astype(np.int64)
    return Graph(n, edges)


def save_graph(g: Graph, path: str | Path) -> None:
    Path(path).write_bytes(graph_to_bytes(g))


def load_graph(path: str | Path) -> Graph:
    return graph_from_bytes(Path(path).read_bytes())


def graph_hash(g: Graph) -> str:
    return hashlib.blake2b(graph_to_bytes(g), digest_size=16).hexdigest()
