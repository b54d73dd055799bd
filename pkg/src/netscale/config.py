"""Run configuration: defaults, flat ``key = value`` files and grid parsing."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .classify import CLASSIFIER_KINDS, EstimatorConfig
from .perturb import DEFAULT_INFINITY_MULTIPLIER, PerturbationSpec, parse_delta

__all__ = ["RunConfig", "ConfigError", "parse_int_grid", "parse_delta_grid", "load_config_file"]


class ConfigError(ValueError):
    """Bad configuration value; the CLI maps it to a usage error."""


def parse_int_grid(text: str) -> tuple[int, ...]:
    """``4..64``, ``4..64:4`` or ``4,8,16`` (items may mix both forms)."""
    out: list[int] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            if ".." in item:
                span, _, step = item.partition(":")
                lo, hi = (int(x) for x in span.split(".."))
                out.extend(range(lo, hi + 1, int(step) if step else 1))
            else:
                out.append(int(item))
        except ValueError as exc:
            raise ConfigError(f"bad integer grid item {item!r}") from exc
    if not out:
        raise ConfigError(f"empty grid {text!r}")
    return tuple(sorted(set(out)))


def parse_delta_grid(text: str) -> tuple[float, ...]:
    try:
        vals = [parse_delta(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not vals:
        raise ConfigError(f"empty perturbation grid {text!r}")
    return tuple(sorted(set(vals)))


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


@dataclass(frozen=True)
class RunConfig:
    input: str | None = None
    network_id: str | None = None
    kappa_grid: tuple[int, ...] = tuple(range(4, 65))
    delta_grid: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, math.inf)
    taus: tuple[float, ...] = (0.7, 0.9, 0.95)
    classifier: str = "joint_feature_bayes"
    single_feature: str = "C"
    bins: int = 20
    samples: int = 10_000
    train_fraction: float = 0.5
    repeats: int = 10
    infinity_multiplier: int = DEFAULT_INFINITY_MULTIPLIER
    seed: int = 0
    cache_dir: str = ".netscale-cache"
    out_dir: str = "netscale-out"
    jobs: int = 1
    pair_fraction: float = 0.1
    bfs_sources: int = 10
    cluster_size: float | None = None
    dedupe: bool = True

    def __post_init__(self):
        if self.classifier not in CLASSIFIER_KINDS:
            raise ConfigError(f"unknown classifier {self.classifier!r}; choose from {', '.join(CLASSIFIER_KINDS)}")
        if self.single_feature not in ("C", "r"):
            raise ConfigError("single_feature must be C or r")
        for name in ("samples", "repeats", "infinity_multiplier", "jobs", "bins"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie strictly between 0 and 1")
        if any(not 0.5 < t < 1.0 for t in self.taus):
            raise ConfigError("thresholds must lie in (0.5, 1)")
        if min(self.kappa_grid) < 2:
            raise ConfigError("subgraph sizes must be at least 2")

    def estimator(self) -> EstimatorConfig:
        return EstimatorConfig(
            classifier=self.classifier,
            samples_per_class=self.samples,
            train_fraction=self.train_fraction,
            repeats=self.repeats,
            bins=self.bins,
            single_feature=self.single_feature,
        )

    def specs(self, m: int) -> list[PerturbationSpec]:
        return [PerturbationSpec.fraction(d, m, self.infinity_multiplier) for d in self.delta_grid]

    def snapshot(self) -> dict[str, str]:
        """Flat string view, written at the top of every output file.

        ``jobs`` is left out: results do not depend on it.
        """
        return {f.name: _render(getattr(self, f.name)) for f in fields(self) if f.name != "jobs"}

    def with_overrides(self, **values) -> RunConfig:
        values = {k: v for k, v in values.items() if v is not None}
        try:
            return replace(self, **values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _render(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_render(x) for x in v)
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return "" if v is None else str(v)


_PARSERS = {
    "kappa_grid": parse_int_grid,
    "delta_grid": parse_delta_grid,
    "taus": _float_list,
    "bins": int,
    "samples": int,
    "train_fraction": float,
    "repeats": int,
    "infinity_multiplier": int,
    "seed": int,
    "jobs": int,
    "pair_fraction": float,
    "bfs_sources": int,
    "cluster_size": float,
    "dedupe": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
}


def parse_value(key: str, text: str):
    names = {f.name for f in fields(RunConfig)}
    if key not in names:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        return _PARSERS.get(key, str)(text.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc


def load_config_file(path: str | Path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for no, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{no}: expected key = value")
        values[key.strip()] = parse_value(key.strip(), value)
    return values
