"""Exact and Monte-Carlo reference quantities.

Empirical subgraph distributions keyed by canonical signature, the Bayes
accuracy between two such distributions, and the random-tree randomization
demo whose connectivity classifier needs no training.
"""

from __future__ import annotations

import csv
import hashlib
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import MixingError
from .graph import Graph
from .perturb import DEFAULT_INFINITY_MULTIPLIER
from .sampler import sample_many
from .seeding import derive_seed, derive_seeds32, kernel_seed

__all__ = [
    "EmpiricalDistribution",
    "empirical_distribution",
    "bayes_accuracy",
    "random_tree",
    "TreeDemoResult",
    "tree_demo",
    "tree_demo_curve",
    "write_curve_csv",
    "write_distribution_csv",
]

_CHUNK = 50_000


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Relative frequencies of canonical signature images of size ``kappa``."""

    kappa: int
    counts: dict[bytes, int]
    total: int

    def prob(self, key: bytes) -> float:
        return self.counts.get(key, 0) / self.total

    def probabilities(self) -> dict[bytes, float]:
        return {k: c / self.total for k, c in self.counts.items()}

    @property
    def support_size(self) -> int:
        return len(self.counts)


def empirical_distribution(g: Graph, kappa: int, samples: int, seed: int = 0) -> EmpiricalDistribution:
    """Walk-sample ``samples`` subgraphs and tally their canonical images."""
    if samples < 1:
        raise ValueError("need at least one sample")
    iu = np.triu_indices(kappa, k=1)
    counts: dict[bytes, int] = {}
    for lo in range(0, samples, _CHUNK):
        n = min(_CHUNK, samples - lo)
        seeds = derive_seeds32(seed, "oracle", lo, count=n)
        batch = sample_many(g, kappa, seeds)
        simple = np.stack([s.counts for s in batch]).astype(bool).view(np.uint8)
        images = np.empty_like(simple)
        bad = _kernels.signature_batch(simple, images)
        if bad >= 0:
            raise ValueError("walk sample is disconnected")
        packed = np.packbits(images[:, iu[0], iu[1]], axis=1)
        rows, freq = np.unique(packed, axis=0, return_counts=True)
        for row, c in zip(rows, freq):
            key = row.tobytes()
            counts[key] = counts.get(key, 0) + int(c)
    return EmpiricalDistribution(kappa, counts, samples)


def bayes_accuracy(p0: EmpiricalDistribution, p1: EmpiricalDistribution) -> float:
    """Half the sum over signatures of the larger of the two probabilities."""
    if p0.kappa != p1.kappa:
        raise ValueError(f"distributions have different subgraph sizes {p0.kappa} and {p1.kappa}")
    keys = p0.counts.keys() | p1.counts.keys()
    return 0.5 * math.fsum(max(p0.prob(k), p1.prob(k)) for k in keys)


def random_tree(t: int, seed: int) -> Graph:
    """Uniform labeled tree on ``t`` vertices via a random Prufer sequence."""
    if t < 2:
        raise ValueError("a tree needs at least two vertices")
    return Graph(t, _kernels.random_tree_edges(t, kernel_seed(seed)))


@dataclass(frozen=True)
class TreeDemoResult:
    t: int
    trials: int
    accuracy: float
    connected_fraction: float
    stderr: float


def tree_demo(
    t: int,
    trials: int,
    infinity_multiplier: int = DEFAULT_INFINITY_MULTIPLIER,
    seed: int = 0,
) -> TreeDemoResult:
    """Fully randomize random trees and classify by connectivity.

    An original tree is always connected and so always labeled correctly; a
    randomized copy is labeled correctly when it fell apart. With ``f`` the
    fraction of randomized copies still connected the accuracy is ``1 - f/2``.
    """
    if t < 2:
        raise ValueError("a tree needs at least two vertices")
    if trials < 1:
        raise ValueError("need at least one trial")
    connected, failed = _kernels.tree_demo_batch(t, trials, infinity_multiplier, kernel_seed(seed))
    if failed >= 0:
        target = infinity_multiplier * (t - 1)
        raise MixingError(target, 0, _kernels.SWAP_ATTEMPT_FACTOR * target)
    f = connected / trials
    return TreeDemoResult(
        t=t,
        trials=trials,
        accuracy=1.0 - f / 2.0,
        connected_fraction=f,
        stderr=0.5 * math.sqrt(f * (1.0 - f) / trials),
    )


def tree_demo_curve(
    sizes: Sequence[int],
    trials: int,
    infinity_multiplier: int = DEFAULT_INFINITY_MULTIPLIER,
    seed: int = 0,
) -> list[TreeDemoResult]:
    return [tree_demo(t, trials, infinity_multiplier, derive_seed(seed, "tree", t)) for t in sizes]


def _write_header(fh, header: Mapping[str, object] | None) -> None:
    for key in sorted(header or {}):
        fh.write(f"# {key}={header[key]}\n")


def write_curve_csv(
    results: Sequence[TreeDemoResult], path: str | Path, header: Mapping[str, object] | None = None
) -> None:
    with open(path, "w", newline="") as fh:
        _write_header(fh, header)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "trials", "accuracy", "connected_fraction", "stderr"))
        for r in results:
            w.writerow((r.t, r.trials, repr(r.accuracy), repr(r.connected_fraction), repr(r.stderr)))


def write_distribution_csv(
    dist: EmpiricalDistribution, path: str | Path, header: Mapping[str, object] | None = None
) -> None:
    """One row per signature: a short hash of its key, the key in hex, and its probability."""
    rows = sorted(dist.counts.items(), key=lambda kv: (-kv[1], kv[0]))
    with open(path, "w", newline="") as fh:
        _write_header(fh, header)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("key_hash", "key_hex", "probability"))
        for key, c in rows:
            w.writerow((hashlib.blake2b(key, digest_size=8).hexdigest(), key.hex(), repr(c / dist.total)))
