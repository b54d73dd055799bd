"""Degree-preserving randomization by edge swaps."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass


from . import _kernels
from .errors import MixingError
from .graph import Graph
from .seeding import kernel_seed

__all__ = [
    "DEFAULT_INFINITY_MULTIPLIER",
    "PerturbationSpec",
    "SwapOutcome",
    "edge_swap",
    "perturb",
    "delta_grid",
    "parse_delta",
]

DEFAULT_INFINITY_MULTIPLIER = 20


@dataclass(frozen=True)
class PerturbationSpec:
    """How far to randomize: a fraction of the edge count, or ``math.inf``.

    ``swap_count`` is the number of successful swaps to perform. For the
    infinite limit it is ``infinity_multiplier * m``.
    """

    delta: float
    swap_count: int
    infinity_multiplier: int = DEFAULT_INFINITY_MULTIPLIER

    def __post_init__(self):
        if self.delta < 0 or math.isnan(self.delta):
            raise ValueError(f"delta must be a non-negative fraction or inf, got {self.delta}")
        if self.swap_count < 0:
            raise ValueError("swap_count must be non-negative")
        if self.infinity_multiplier < 1:
            raise ValueError("infinity multiplier must be at least 1")

    @classmethod
    def fraction(cls, delta: float, m: int, infinity_multiplier: int = DEFAULT_INFINITY_MULTIPLIER):
        if math.isinf(delta):
            return cls.infinity(m, infinity_multiplier)
        if delta < 0:
            raise ValueError(f"negative perturbation fraction {delta}")
        # round() first so 0.3 * 756 = 226.79999... does not become 227.00000001
        return cls(float(delta), math.ceil(round(delta * m, 9)), infinity_multiplier)

    @classmethod
    def infinity(cls, m: int, infinity_multiplier: int = DEFAULT_INFINITY_MULTIPLIER):
        return cls(math.inf, infinity_multiplier * m, infinity_multiplier)

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.delta)

    @property
    def label(self) -> str:
        """CSV encoding: ``inf`` or the fraction in shortest decimal form."""
        return "inf" if self.is_infinite else repr(float(self.delta))

    def __str__(self) -> str:
        if self.is_infinite:
            return f"inf(Q={self.infinity_multiplier})"
        return f"{100 * self.delta:g}%"


@dataclass(frozen=True)
class SwapOutcome:
    attempted: int
    succeeded: int
    rejected_shared_vertex: int


def parse_delta(text: str) -> float:
    """Parse ``10%``, ``0.1`` or ``inf``."""
    t = text.strip().lower()
    if t in ("inf", "infinity", "∞"):
        return math.inf
    if t.endswith("%"):
        value = float(t[:-1]) / 100.0
    else:
        value = float(t)
    if value < 0:
        raise ValueError(f"negative perturbation {text!r}")
    return value


def edge_swap(g: Graph, e1: int, e2: int, orientation: tuple[bool, bool] = (False, False)) -> Graph | None:
    """Rewire edges ``e1=(u,v)`` and ``e2=(x,y)`` into ``(u,x), (v,y)``.

    ``orientation[i]`` reverses the endpoints of the i-th edge first. Returns
    ``None`` when the four endpoints are not distinct (the swap is rejected).
    """
    if e1 == e2:
        raise ValueError("edge_swap needs two different edges")
    u, v = g.edges[e1]
    x, y = g.edges[e2]
    if orientation[0]:
        u, v = v, u
    if orientation[1]:
        x, y = y, x
    if len({int(u), int(v), int(x), int(y)}) < 4:
        return None
    edges = g.edges.copy()
    edges[e1] = (u, x)
    edges[e2] = (v, y)
    return Graph(g.n, edges)


def perturb(g: Graph, spec: PerturbationSpec, seed: int) -> tuple[Graph, SwapOutcome]:
    """Perform ``spec.swap_count`` successful random swaps on a copy of ``g``.

    Each attempt draws an ordered pair of distinct edges uniformly and flips
    each edge's orientation with a fair coin; attempts sharing a vertex are
    rejected and redrawn. Raises :class:`MixingError` if the swap budget is not
    met within ``100 * swap_count`` attempts.
    """
    target = int(spec.swap_count)
    if target == 0:
        return g, SwapOutcome(0, 0, 0)
    if g.m < 2:
        raise ValueError("perturbation needs at least two edges")
    edges = g.edges.copy()
    attempted, succeeded = _kernels.swap_chain(
        edges, target, _kernels.SWAP_ATTEMPT_FACTOR * target, kernel_seed(seed)
    )
    if succeeded < target:
        raise MixingError(target, succeeded, attempted)
    return Graph(g.n, edges), SwapOutcome(attempted, succeeded, attempted - succeeded)


def delta_grid(
    m: int,
    fractions: Sequence[float],
    include_infinity: bool = True,
    infinity_multiplier: int = DEFAULT_INFINITY_MULTIPLIER,
) -> list[PerturbationSpec]:
    specs = []
    for f in fractions:
        if f < 0:
            raise ValueError(f"negative perturbation fraction {f}")
        specs.append(PerturbationSpec.fraction(f, m, infinity_multiplier))
    if include_infinity:
        specs.append(PerturbationSpec.infinity(m, infinity_multiplier))
    return specs
