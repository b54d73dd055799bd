"""Random-walk subgraph sampling and labeled train/test datasets."""

from __future__ import annotations

import struct
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import BinaryIO

import numpy as np

from . import _kernels
from .errors import ParseError, SamplerError
from .graph import Graph
from .seeding import derive_seeds32, kernel_seed

__all__ = [
    "ORIGINAL",
    "PERTURBED",
    "SubgraphSample",
    "LabeledDataset",
    "sample_subgraph",
    "sample_many",
    "build_dataset",
    "write_samples",
    "read_samples",
]

ORIGINAL = 1
PERTURBED = -1


@dataclass(frozen=True, eq=False)
class SubgraphSample:
    """A walk-induced subgraph.

    ``vertices`` holds the source vertex ids in first-visit order and
    ``counts[i, j]`` the number of source edges between ``vertices[i]`` and
    ``vertices[j]``.
    """

    vertices: np.ndarray
    counts: np.ndarray
    label: int = ORIGINAL
    walk_steps: int = 0

    @property
    def kappa(self) -> int:
        return int(self.vertices.shape[0])

    @cached_property
    def simple(self) -> np.ndarray:
        return (self.counts > 0).astype(np.uint8)

    @cached_property
    def subgraph(self) -> Graph:
        iu, ju = np.triu_indices(self.kappa, k=1)
        mult = self.counts[iu, ju].astype(np.int64)
        edges = np.repeat(np.stack([iu, ju], axis=1), mult, axis=0)
        return Graph(self.kappa, edges)


@dataclass
class LabeledDataset:
    train: list[SubgraphSample]
    test: list[SubgraphSample]
    kappa: int
    class_counts: dict[str, dict[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.class_counts:
            self.class_counts = {
                "train": _count_labels(self.train),
                "test": _count_labels(self.test),
            }


def _count_labels(samples: Iterable[SubgraphSample]) -> dict[int, int]:
    out = {ORIGINAL: 0, PERTURBED: 0}
    for s in samples:
        out[s.label] += 1
    return out


def _check_kappa(g: Graph, kappa: int) -> None:
    if not 2 <= kappa <= g.n:
        raise ValueError(f"kappa must lie in [2, n={g.n}], got {kappa}")
    if g.m == 0:
        raise SamplerError("graph has no edges")


def _walk(g: Graph, kappa: int, seeds: np.ndarray):
    starts = np.flatnonzero(g.degree > 0)
    count = seeds.shape[0]
    vertices = np.empty((count, kappa), dtype=np.int64)
    counts = np.zeros((count, kappa, kappa), dtype=np.uint16)
    steps = np.zeros(count, dtype=np.int64)
    failed = _kernels.walk_batch(
        g.indptr, g.indices, starts, kappa, seeds, vertices, counts, steps
    )
    if failed >= 0:
        raise SamplerError(
            f"no component of size {kappa} reachable: {_kernels.MAX_RESTARTS} "
            f"consecutive restarts failed"
        )
    return vertices, counts, steps


def sample_many(g: Graph, kappa: int, seeds: np.ndarray, label: int = ORIGINAL) -> list[SubgraphSample]:
    """One walk sample per 32-bit seed."""
    _check_kappa(g, kappa)
    vertices, counts, steps = _walk(g, kappa, np.asarray(seeds, dtype=np.uint32))
    return [
        SubgraphSample(vertices[i], counts[i], label, int(steps[i]))
        for i in range(vertices.shape[0])
    ]


def sample_subgraph(g: Graph, kappa: int, seed: int, label: int = ORIGINAL) -> SubgraphSample:
    """Walk from a uniform non-isolated vertex until ``kappa`` distinct vertices are seen.

    Each step follows a uniformly chosen incident edge (parallel edges count
    separately). A walk that has not finished after ``100 * kappa`` steps is
    restarted from a fresh start vertex.
    """
    return sample_many(g, kappa, np.array([kernel_seed(seed)], dtype=np.uint32), label)[0]


def build_dataset(
    g0: Graph,
    gd: Graph,
    kappa: int,
    samples_per_class: int,
    train_fraction: float = 0.5,
    seed: int = 0,
) -> LabeledDataset:
    """Independent walk samples from both graphs, split per class into train/test."""
    if samples_per_class < 1:
        raise ValueError("samples_per_class must be positive")
    if not 0.0 <= train_fraction <= 1.0:
        raise ValueError("train_fraction must lie in [0, 1]")
    n_train = int(np.floor(train_fraction * samples_per_class))
    train: list[SubgraphSample] = []
    test: list[SubgraphSample] = []
    for g, label, name in ((g0, ORIGINAL, "original"), (gd, PERTURBED, "perturbed")):
        seeds = derive_seeds32(seed, "sample", label, count=samples_per_class)
        try:
            samples = sample_many(g, kappa, seeds, label)
        except (SamplerError, ValueError) as exc:
            raise type(exc)(f"{name} graph: {exc}") from exc
        train.extend(samples[:n_train])
        test.extend(samples[n_train:])
    return LabeledDataset(train, test, kappa)


# Sample stream: per record a little-endian u32 byte length, then
# i8 label, u16 kappa, u32 edge count, kappa x u32 vertices, edge count x (u16, u16).
_REC = struct.Struct("<bHI")


def _encode(s: SubgraphSample) -> bytes:
    e = s.subgraph.edges.astype("<u2")
    body = _REC.pack(s.label, s.kappa, e.shape[0]) + s.vertices.astype("<u4").tobytes() + e.tobytes()
    return struct.pack("<I", len(body)) + body


def write_samples(stream: BinaryIO, samples: Iterable[SubgraphSample]) -> int:
    written = 0
    for s in samples:
        stream.write(_encode(s))
        written += 1
    return written


def read_samples(stream: BinaryIO) -> Iterator[SubgraphSample]:
    while True:
        head = stream.read(4)
        if not head:
            return
        if len(head) < 4:
            raise ParseError("truncated sample record length")
        (size,) = struct.unpack("<I", head)
        body = stream.read(size)
        if len(body) != size:
            raise ParseError("truncated sample record")
        label, kappa, m = _REC.unpack_from(body)
        off = _REC.size
        vertices = np.frombuffer(body, "<u4", kappa, off).astype(np.int64)
        off += 4 * kappa
        edges = np.frombuffer(body, "<u2", 2 * m, off).reshape(m, 2).astype(np.int64)
        counts = np.zeros((kappa, kappa), dtype=np.uint16)
        np.add.at(counts, (edges[:, 0], edges[:, 1]), 1)
        np.add.at(counts, (edges[:, 1], edges[:, 0]), 1)
        yield SubgraphSample(vertices, counts, int(label), 0)


def split_by_label(samples: Sequence[SubgraphSample]) -> dict[int, list[SubgraphSample]]:
    out: dict[int, list[SubgraphSample]] = {ORIGINAL: [], PERTURBED: []}
    for s in samples:
        out[s.label].append(s)
    return out
