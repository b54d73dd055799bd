"""Content-addressed on-disk cache of parsed and perturbed graphs."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict
from pathlib import Path

from .graph import Graph, graph_hash, graph_to_bytes, load_graph, read_edge_list
from .perturb import PerturbationSpec, SwapOutcome, perturb

log = logging.getLogger(__name__)

__all__ = ["GraphCache", "atomic_write"]


def atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + f".{os.getpid()}.tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


class GraphCache:
    """Graphs stored as binary records under ``root/graphs``.

    Source graphs are keyed by the hash of their record; perturbed copies by
    (source hash, delta, swap count, multiplier, seed). Calling the cache
    like a function makes it a drop-in perturbation routine for the estimator.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.dir = self.root / "graphs"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0
        self._hash_memo: dict[int, tuple[Graph, str]] = {}

    def _hash(self, g: Graph) -> str:
        memo = self._hash_memo.get(id(g))
        if memo is not None and memo[0] is g:
            return memo[1]
        h = graph_hash(g)
        self._hash_memo[id(g)] = (g, h)
        return h

    def source_path(self, g: Graph) -> Path:
        return self.dir / f"{self._hash(g)}.nsg"

    def add_source(self, path: str | Path, dedupe: bool = True) -> tuple[Graph, Path]:
        g = read_edge_list(path, dedupe=dedupe)
        out = self.source_path(g)
        if not out.exists():
            atomic_write(out, graph_to_bytes(g))
        return g, out

    def perturbed_path(self, g: Graph, spec: PerturbationSpec, seed: int) -> Path:
        name = f"{self._hash(g)}-d{spec.label}-s{spec.swap_count}-q{spec.infinity_multiplier}-{seed:016x}.nsg"
        return self.dir / name

    def perturbed(self, g: Graph, spec: PerturbationSpec, seed: int) -> tuple[Graph, SwapOutcome, bool]:
        """Return (graph, outcome, cache_hit)."""
        path = self.perturbed_path(g, spec, seed)
        meta = path.with_suffix(".json")
        if path.exists() and meta.exists():
            self.hits += 1
            outcome = SwapOutcome(**json.loads(meta.read_text()))
            return load_graph(path), outcome, True
        self.misses += 1
        gd, outcome = perturb(g, spec, seed)
        atomic_write(path, graph_to_bytes(gd))
        atomic_write(meta, json.dumps(asdict(outcome)).encode())
        log.info("perturbed %s: %d swaps in %d attempts", spec, outcome.succeeded, outcome.attempted)
        return gd, outcome, False

    def __call__(self, g: Graph, spec: PerturbationSpec, seed: int) -> Graph:
        return self.perturbed(g, spec, seed)[0]
