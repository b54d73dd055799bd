"""Signature images and classical features of sampled subgraphs.

Everything here works on the simple projection: parallel edges collapse to a
single adjacency.
"""

from __future__ import annotations

import csv
from collections.abc import Sequence
from dataclasses import astuple, dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .graph import Graph
from .sampler import SubgraphSample

__all__ = [
    "FEATURE_NAMES",
    "SignatureImage",
    "FeatureVector",
    "MeanSignature",
    "canonical_order",
    "signature_image",
    "signature_stack",
    "clustering_coefficient",
    "avg_neighbor_degree",
    "feature_vector",
    "feature_matrix",
    "mean_signature",
    "write_pgm",
    "write_feature_csv",
]

FEATURE_NAMES = ("C", "r", "connected", "density", "maxdeg", "comps")
_CHUNK = 2048


@dataclass(frozen=True, eq=False)
class SignatureImage:
    kappa: int
    pixels: np.ndarray

    def key(self) -> bytes:
        """Packed upper-triangle bits, used as an equivalence-class key."""
        iu = np.triu_indices(self.kappa, k=1)
        return np.packbits(self.pixels[iu]).tobytes()


@dataclass(frozen=True)
class FeatureVector:
    clustering_C: float
    neighbor_degree_r: float
    connected: int
    edge_density: float
    max_degree_norm: float
    component_count_norm: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


@dataclass(frozen=True, eq=False)
class MeanSignature:
    kappa: int
    pixels: np.ndarray


def canonical_order(s: SubgraphSample) -> np.ndarray:
    """Vertex positions (in visit order) sorted by degree-preferring BFS.

    The root is the highest-degree vertex, earliest visited on ties. Each
    dequeued vertex enqueues its unseen neighbors by descending degree, again
    breaking ties by visit order.
    """
    order = _kernels.canonical_order(s.simple)
    if order[0] < 0:
        raise ValueError("canonical ordering needs a connected subgraph")
    return order


def signature_image(s: SubgraphSample) -> SignatureImage:
    order = canonical_order(s)
    return SignatureImage(s.kappa, s.simple[np.ix_(order, order)])


def signature_stack(samples: Sequence[SubgraphSample]) -> np.ndarray:
    """Canonical images of ``samples`` as an ``(S, k, k)`` uint8 array."""
    simple = _simple_stack(samples)
    out = np.empty_like(simple)
    bad = _kernels.signature_batch(simple, out)
    if bad >= 0:
        raise ValueError(f"sample {bad} is disconnected; canonical ordering undefined")
    return out


def _simple_stack(samples: Sequence[SubgraphSample]) -> np.ndarray:
    kappas = {s.kappa for s in samples}
    if len(kappas) != 1:
        raise ValueError(f"samples mix subgraph sizes {sorted(kappas)}")
    return np.stack([s.counts for s in samples]).astype(bool).view(np.uint8)


def clustering_coefficient(g: Graph) -> float:
    """Mean over vertices of the fraction of neighbor pairs that are adjacent."""
    if g.n < 1:
        raise ValueError("graph has no vertices")
    a = g.simple_csr().astype(np.float64)
    deg = np.asarray(a.sum(axis=1)).ravel()
    tri = np.asarray((a @ a).multiply(a).sum(axis=1)).ravel() / 2.0
    pairs = deg * (deg - 1) / 2.0
    local = np.divide(tri, pairs, out=np.zeros_like(tri), where=deg >= 2)
    return float(local.mean())


def avg_neighbor_degree(g: Graph) -> float:
    """Mean over non-isolated vertices of the average degree of their neighbors."""
    if g.n < 1:
        raise ValueError("graph has no vertices")
    a = g.simple_csr().astype(np.float64)
    deg = np.asarray(a.sum(axis=1)).ravel()
    active = deg > 0
    if not active.any():
        return 0.0
    nb = a @ deg
    return float(np.mean(nb[active] / deg[active]))


def _features_from_simple(simple: np.ndarray) -> np.ndarray:
    """Feature rows for a stack of simple adjacency matrices."""
    S, k, _ = simple.shape
    out = np.empty((S, len(FEATURE_NAMES)), dtype=np.float64)
    comps = _kernels.component_counts(simple)
    for lo in range(0, S, _CHUNK):
        a = simple[lo : lo + _CHUNK].astype(np.float64)
        deg = a.sum(axis=2)
        tri = np.einsum("sij,sij->si", a @ a, a) / 2.0
        pairs = deg * (deg - 1) / 2.0
        local = np.divide(tri, pairs, out=np.zeros_like(tri), where=deg >= 2)
        nb = np.einsum("sij,sj->si", a, deg)
        active = deg > 0
        ratio = np.divide(nb, deg, out=np.zeros_like(nb), where=active)
        n_active = active.sum(axis=1)
        r = np.divide(ratio.sum(axis=1), n_active, out=np.zeros(len(a)), where=n_active > 0)
        sl = slice(lo, lo + len(a))
        out[sl, 0] = local.mean(axis=1)
        out[sl, 1] = r
        out[sl, 3] = deg.sum(axis=1) / (k * (k - 1))
        out[sl, 4] = deg.max(axis=1) / (k - 1)
    out[:, 2] = comps == 1
    out[:, 5] = comps / k
    return out


def feature_matrix(samples: Sequence[SubgraphSample]) -> np.ndarray:
    """Rows of ``FEATURE_NAMES`` columns, one per sample."""
    if not samples:
        return np.empty((0, len(FEATURE_NAMES)))
    return _features_from_simple(_simple_stack(samples))


def feature_vector(s: SubgraphSample) -> FeatureVector:
    row = _features_from_simple(s.simple[None])[0]
    return FeatureVector(
        clustering_C=float(row[0]),
        neighbor_degree_r=float(row[1]),
        connected=int(row[2]),
        edge_density=float(row[3]),
        max_degree_norm=float(row[4]),
        component_count_norm=float(row[5]),
    )


def mean_signature(images: Sequence[SignatureImage] | np.ndarray) -> MeanSignature:
    """Per-pixel mean of equally sized signature images."""
    if isinstance(images, np.ndarray):
        stack = images
    else:
        if not images:
            raise ValueError("no images to average")
        kappas = {im.kappa for im in images}
        if len(kappas) != 1:
            raise ValueError(f"images mix subgraph sizes {sorted(kappas)}")
        stack = np.stack([im.pixels for im in images])
    if stack.shape[0] == 0:
        raise ValueError("no images to average")
    return MeanSignature(int(stack.shape[1]), stack.mean(axis=0, dtype=np.float64))


def write_pgm(sig: MeanSignature, path: str | Path, comments: Sequence[str] = ()) -> None:
    """8-bit binary PGM; edges render dark (pixel = 255 * (1 - mean))."""
    gray = np.rint(255.0 * (1.0 - sig.pixels)).astype(np.uint8)
    notes = "".join(f"# {c}\n" for c in comments)
    header = f"P5\n{notes}{sig.kappa} {sig.kappa}\n255\n".encode("ascii")
    Path(path).write_bytes(header + gray.tobytes())


def write_feature_csv(samples: Sequence[SubgraphSample], path: str | Path) -> None:
    x = feature_matrix(samples)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("label",) + FEATURE_NAMES)
        for s, row in zip(samples, x):
            w.writerow([s.label, *(f"{v:.10g}" for v in row)])

