"""Scans over (kappa, delta), intrinsic scale and related summary measures."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .classify import AccuracyEstimate, EstimatorConfig, PerturbFn, estimate_delta
from .graph import Graph, graph_hash, largest_component
from .perturb import PerturbationSpec

log = logging.getLogger(__name__)

__all__ = [
    "CellFailure",
    "ScanResult",
    "AuxMeasures",
    "ScaleReport",
    "run_scan",
    "intrinsic_scale",
    "robustness",
    "robustness_from_accuracy",
    "resilience",
    "accuracy_gap",
    "aux_measures",
    "pearson",
    "build_report",
    "measure_correlations",
    "render_report",
    "render_scale_table",
    "write_scan_csv",
    "read_scan_csv",
    "SCAN_CSV_HEADER",
]

SCAN_CSV_HEADER = (
    "network", "kappa", "delta", "repeat_count", "accuracy_mean", "accuracy_std", "classifier", "seed",
)
BEYOND_GRID = "*"
ROBUSTNESS_DELTA = 0.1


@dataclass(frozen=True)
class CellFailure:
    kappa: int
    delta: PerturbationSpec
    message: str


@dataclass
class ScanResult:
    network_id: str
    kappa_grid: list[int]
    delta_grid: list[PerturbationSpec]
    grid: dict[tuple[int, str], AccuracyEstimate | CellFailure]
    config: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.kappa_grid, self.kappa_grid[1:])):
            raise ValueError("kappa grid must be strictly increasing")

    def cell(self, kappa: int, delta: PerturbationSpec) -> AccuracyEstimate | CellFailure | None:
        return self.grid.get((kappa, delta.label))

    def column(self, delta: PerturbationSpec) -> list[tuple[int, AccuracyEstimate]]:
        """Successful cells of one delta column, in kappa order."""
        out = []
        for k in self.kappa_grid:
            c = self.grid.get((k, delta.label))
            if isinstance(c, AccuracyEstimate):
                out.append((k, c))
        return out

    def find_delta(self, delta: float) -> PerturbationSpec | None:
        for spec in self.delta_grid:
            if spec.delta == delta or (math.isinf(delta) and spec.is_infinite):
                return spec
        return None

    @property
    def failed_cells(self) -> list[CellFailure]:
        return [c for c in self.grid.values() if isinstance(c, CellFailure)]


def _cell_key(ghash: str, kappa: int, spec: PerturbationSpec, config: EstimatorConfig, seed: int) -> str:
    import hashlib

    payload = json.dumps(
        [ghash, kappa, spec.label, spec.swap_count, spec.infinity_multiplier, asdict(config), seed],
        sort_keys=True,
    )
    return hashlib.blake2b(payload.encode(), digest_size=16).hexdigest()


def _estimate_to_json(e: AccuracyEstimate) -> dict:
    d = asdict(e)
    d["delta"] = {"delta": e.delta.label, "swap_count": e.delta.swap_count,
                  "infinity_multiplier": e.delta.infinity_multiplier}
    return d


def _estimate_from_json(d: dict) -> AccuracyEstimate:
    spec = d["delta"]
    d = dict(d)
    d["delta"] = PerturbationSpec(float(spec["delta"]), spec["swap_count"], spec["infinity_multiplier"])
    d["accuracies"] = tuple(d["accuracies"])
    return AccuracyEstimate(**d)


def _run_cell(args):
    g, kappa, spec, config, seed, perturb_fn = args
    try:
        return estimate_delta(g, kappa, spec, config, seed, perturb_fn)
    except Exception as exc:  # noqa: BLE001 - recorded per cell, scan continues
        return CellFailure(kappa, spec, f"{type(exc).__name__}: {exc}")


def run_scan(
    g: Graph,
    kappa_grid: Sequence[int],
    delta_grid: Sequence[PerturbationSpec],
    config: EstimatorConfig | None = None,
    seed: int = 0,
    network_id: str = "network",
    cache_dir: str | Path | None = None,
    jobs: int = 1,
    perturb_fn: PerturbFn | None = None,
    on_cell: Callable[[AccuracyEstimate | CellFailure], None] | None = None,
) -> ScanResult:
    """Estimate every (kappa, delta) cell.

    Finished cells are stored under ``cache_dir/cells`` and reused on the next
    run. Failures are recorded as :class:`CellFailure` and do not stop the
    scan. With ``jobs > 1`` cells run in worker processes; results are
    identical to the sequential run because each cell derives its own seeds.
    """
    config = config or EstimatorConfig()
    kappa_grid = sorted(set(int(k) for k in kappa_grid))
    if not kappa_grid or not delta_grid:
        raise ValueError("scan grids must be non-empty")
    ghash = graph_hash(g)
    cell_dir = Path(cache_dir) / "cells" if cache_dir is not None else None
    if cell_dir is not None:
        cell_dir.mkdir(parents=True, exist_ok=True)

    grid: dict[tuple[int, str], AccuracyEstimate | CellFailure] = {}
    todo = []
    for spec in delta_grid:
        for k in kappa_grid:
            if cell_dir is not None:
                path = cell_dir / f"{_cell_key(ghash, k, spec, config, seed)}.json"
                if path.exists():
                    grid[(k, spec.label)] = _estimate_from_json(json.loads(path.read_text()))
                    continue
            todo.append((k, spec))

    def record(k, spec, result):
        grid[(k, spec.label)] = result
        if isinstance(result, AccuracyEstimate) and cell_dir is not None:
            path = cell_dir / f"{_cell_key(ghash, k, spec, config, seed)}.json"
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(_estimate_to_json(result), sort_keys=True))
            tmp.replace(path)
        if isinstance(result, CellFailure):
            log.warning("cell kappa=%d delta=%s failed: %s", k, spec, result.message)
        if on_cell is not None:
            on_cell(result)

    if jobs > 1 and len(todo) > 1:
        # workers never touch the disk; this process is the only writer
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            tasks = [(g, k, spec, config, seed, None) for k, spec in todo]
            for (k, spec), result in zip(todo, pool.map(_run_cell, tasks)):
                record(k, spec, result)
    else:
        for k, spec in todo:
            record(k, spec, _run_cell((g, k, spec, config, seed, perturb_fn)))

    snapshot = asdict(config)
    snapshot.update(seed=seed, m=g.m, n=g.n, graph_hash=ghash,
                    infinity_multiplier=delta_grid[0].infinity_multiplier)
    return ScanResult(network_id, kappa_grid, list(delta_grid), grid, snapshot, seed)


def intrinsic_scale(scan: ScanResult, tau: float, delta: PerturbationSpec) -> int | None:
    """Smallest grid kappa whose mean accuracy reaches ``tau``; None when beyond the grid."""
    if not 0.5 < tau < 1.0:
        raise ValueError(f"threshold must lie in (0.5, 1), got {tau}")
    if delta.label not in {s.label for s in scan.delta_grid}:
        raise KeyError(f"delta {delta} not in scan")
    for k, est in scan.column(delta):
        if est.accuracy_mean >= tau:
            return k
    return None


def robustness_from_accuracy(accuracy: float) -> float | None:
    """``-ln(accuracy - 1/2)``; None when the accuracy is at or below chance."""
    if accuracy <= 0.5:
        return None
    return -math.log(accuracy - 0.5)


def robustness(scan: ScanResult, kappa: int) -> float | None:
    spec = scan.find_delta(ROBUSTNESS_DELTA)
    if spec is None:
        raise KeyError("scan has no 10% perturbation column")
    est = scan.cell(kappa, spec)
    if not isinstance(est, AccuracyEstimate):
        raise KeyError(f"no estimate for kappa={kappa} at 10%")
    return robustness_from_accuracy(est.accuracy_mean)


def resilience(g: Graph) -> float:
    """Mean squared degree over mean degree."""
    if g.m < 1:
        raise ValueError("resilience is undefined for an edgeless graph")
    d = g.degree.astype(np.float64)
    return float(np.mean(d * d) / np.mean(d))


def accuracy_gap(scan: ScanResult) -> float:
    """One minus the best fully-randomized accuracy over all kappa."""
    spec = scan.find_delta(math.inf)
    if spec is None:
        raise KeyError("scan has no infinite perturbation column")
    col = scan.column(spec)
    if not col:
        raise ValueError("infinite perturbation column has no successful cells")
    return 1.0 - max(e.accuracy_mean for _, e in col)


@dataclass(frozen=True)
class AuxMeasures:
    avg_degree: float
    avg_path_length: float
    diameter_est: int
    cluster_size: float | None = None
    pairs_sampled: int = 0
    component_fraction: float = 1.0
    diameter_is_lower_bound: bool = True


def aux_measures(
    g: Graph,
    pair_fraction: float = 0.1,
    bfs_sources: int = 10,
    seed: int = 0,
    cluster_size: float | None = None,
) -> AuxMeasures:
    """Average degree, sampled shortest-path length and a double-sweep diameter bound.

    Path measures use the largest connected component. Pairs are sampled as
    all pairs whose first vertex lies in a random ``pair_fraction`` of the
    component's vertices.
    """
    if not 0.0 < pair_fraction <= 1.0:
        raise ValueError("pair_fraction must lie in (0, 1]")
    lc = largest_component(g)
    if lc.n < 2:
        raise ValueError("pair sample is empty: largest component has a single vertex")
    rng = np.random.default_rng(seed)
    adj = lc.simple_csr()
    k = max(1, math.ceil(pair_fraction * lc.n))
    sources = np.sort(rng.choice(lc.n, size=k, replace=False))
    total = 0.0
    count = 0
    far = 0
    step = max(1, 2_000_000 // lc.n)
    for lo in range(0, k, step):
        d = shortest_path(adj, unweighted=True, indices=sources[lo : lo + step])
        total += float(d.sum())
        count += d.shape[0] * (lc.n - 1)
        far = max(far, int(d.max()))
    diameter = far
    for _ in range(bfs_sources):
        start = int(rng.integers(lc.n))
        d = shortest_path(adj, unweighted=True, indices=[start])[0]
        u = int(np.argmax(d))
        d = shortest_path(adj, unweighted=True, indices=[u])[0]
        diameter = max(diameter, int(d.max()))
    return AuxMeasures(
        avg_degree=2.0 * g.m / g.n,
        avg_path_length=total / count,
        diameter_est=diameter,
        cluster_size=cluster_size,
        pairs_sampled=count,
        component_fraction=lc.n / g.n,
    )


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two sequences of equal length")
    if len(x) < 2:
        raise ValueError("pearson needs at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("pearson is undefined for a constant sequence")
    return float(np.clip((dx @ dy) / (sx * sy), -1.0, 1.0))


@dataclass
class ScaleReport:
    network_id: str
    classifier: str
    taus: tuple[float, ...]
    kappa_star: dict[tuple[float, str], int | None]
    robustness_gamma: dict[int, float | None]
    resilience_beta: float | None
    accuracy_gap: float | None
    aux: AuxMeasures | None = None
    correlations: dict[str, float] = field(default_factory=dict)
    failed_cells: list[str] = field(default_factory=list)
    config: dict = field(default_factory=dict)


def build_report(
    scan: ScanResult,
    g: Graph | None = None,
    taus: Sequence[float] = (0.7, 0.9, 0.95),
    aux: AuxMeasures | None = None,
) -> ScaleReport:
    kstar = {}
    for tau in taus:
        for spec in scan.delta_grid:
            kstar[(tau, spec.label)] = intrinsic_scale(scan, tau, spec)
    gamma: dict[int, float | None] = {}
    ten = scan.find_delta(ROBUSTNESS_DELTA)
    if ten is not None:
        for k, est in scan.column(ten):
            gamma[k] = robustness_from_accuracy(est.accuracy_mean)
    gap = None
    inf_spec = scan.find_delta(math.inf)
    if inf_spec is not None and scan.column(inf_spec):
        gap = accuracy_gap(scan)
    classifiers = sorted({e.classifier_kind for e in scan.grid.values() if isinstance(e, AccuracyEstimate)})
    return ScaleReport(
        network_id=scan.network_id,
        classifier=",".join(classifiers),
        taus=tuple(taus),
        kappa_star=kstar,
        robustness_gamma=gamma,
        resilience_beta=resilience(g) if g is not None and g.m else None,
        accuracy_gap=gap,
        aux=aux,
        failed_cells=[f"kappa={c.kappa} delta={c.delta.label}: {c.message}" for c in scan.failed_cells],
        config=dict(scan.config),
    )


def measure_correlations(reports: Sequence[ScaleReport], tau: float = 0.95) -> dict[str, float]:
    """Pearson correlation of kappa*(tau, inf) with each auxiliary measure across networks.

    Networks whose kappa* is beyond the grid, or that lack a measure, are left
    out of that measure's correlation.
    """
    rows = []
    for r in reports:
        k = r.kappa_star.get((tau, "inf"))
        if k is not None:
            rows.append((k, r))
    out = {}
    getters = {
        "cluster_size": lambda r: r.aux.cluster_size if r.aux else None,
        "avg_degree": lambda r: r.aux.avg_degree if r.aux else None,
        "avg_path_length": lambda r: r.aux.avg_path_length if r.aux else None,
        "diameter": lambda r: r.aux.diameter_est if r.aux else None,
        "accuracy_gap": lambda r: r.accuracy_gap,
        "resilience_beta": lambda r: r.resilience_beta,
    }
    for name, get in getters.items():
        pts = [(k, get(r)) for k, r in rows if get(r) is not None]
        if len(pts) < 2:
            continue
        xs, ys = zip(*pts)
        try:
            out[name] = pearson(xs, ys)
        except ValueError:
            continue
    for r in reports:
        r.correlations = dict(out)
    return out


def _fmt(v) -> str:
    if v is None:
        return BEYOND_GRID
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_report(report: ScaleReport) -> str:
    """Key-value text with a fixed key order; identical input gives identical bytes."""
    lines = [f"network = {report.network_id}", f"classifier = {report.classifier}"]
    for key in sorted(report.config):
        lines.append(f"config.{key} = {report.config[key]}")
    for (tau, delta), k in sorted(report.kappa_star.items(), key=lambda kv: (kv[0][0], _delta_order(kv[0][1]))):
        lines.append(f"kappa_star[tau={tau!r},delta={delta}] = {_fmt(k)}")
    for k in sorted(report.robustness_gamma):
        g = report.robustness_gamma[k]
        lines.append(f"robustness_gamma[kappa={k}] = {'at-or-below-chance' if g is None else repr(g)}")
    lines.append(f"resilience_beta = {'n/a' if report.resilience_beta is None else repr(report.resilience_beta)}")
    lines.append(f"accuracy_gap = {'n/a' if report.accuracy_gap is None else repr(report.accuracy_gap)}")
    if report.aux is not None:
        for key, value in asdict(report.aux).items():
            lines.append(f"aux.{key} = {'n/a' if value is None else value!r}")
    for name in sorted(report.correlations):
        lines.append(f"correlation[{name}] = {report.correlations[name]!r}")
    for msg in report.failed_cells:
        lines.append(f"failed_cell = {msg}")
    return "\n".join(lines) + "\n"


def _delta_order(label: str) -> float:
    return math.inf if label == "inf" else float(label)


def _delta_heading(label: str) -> str:
    return "inf" if label == "inf" else f"{100 * float(label):g}%"


def render_scale_table(reports: Sequence[ScaleReport]) -> str:
    """kappa* table: one row per network, columns grouped by tau then delta; '*' beyond grid."""
    if not reports:
        return ""
    taus = reports[0].taus
    deltas = sorted({d for r in reports for (_, d) in r.kappa_star}, key=_delta_order)
    head1 = ["kappa*(tau)"] + [f"tau={t:g}" for t in taus for _ in deltas]
    head2 = [""] + [_delta_heading(d) for _ in taus for d in deltas]
    rows = [head1, head2]
    for r in reports:
        rows.append([r.network_id] + [_fmt(r.kappa_star.get((t, d))) for t in taus for d in deltas])
    widths = [max(len(row[i]) for row in rows) for i in range(len(head1))]
    out = io.StringIO()
    for row in rows:
        out.write(" | ".join(cell.rjust(w) for cell, w in zip(row, widths)).rstrip() + "\n")
    return out.getvalue()


def write_scan_csv(scan: ScanResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        for key in sorted(scan.config):
            fh.write(f"# {key}={scan.config[key]}\n")
        for c in scan.failed_cells:
            fh.write(f"# failed kappa={c.kappa} delta={c.delta.label}: {c.message}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCAN_CSV_HEADER)
        for spec in scan.delta_grid:
            for k in scan.kappa_grid:
                c = scan.cell(k, spec)
                if isinstance(c, AccuracyEstimate):
                    w.writerow([scan.network_id, k, spec.label, c.repeats, repr(c.accuracy_mean),
                                repr(c.accuracy_std), c.classifier_kind, scan.seed])
                else:
                    w.writerow([scan.network_id, k, spec.label, 0, "nan", "nan",
                                scan.config.get("classifier", ""), scan.seed])


def read_scan_csv(path: str | Path) -> ScanResult:
    """Load a scan CSV written by :func:`write_scan_csv`; rows with ``nan`` become failures."""
    config: dict[str, str] = {}
    body = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("# failed "):
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                config[key] = value
            else:
                body.append(line)
    reader = csv.DictReader(body)
    if tuple(reader.fieldnames or ()) != SCAN_CSV_HEADER:
        raise ValueError(f"unexpected scan CSV header {reader.fieldnames}")
    m = int(config.get("m", 0))
    q = int(config.get("infinity_multiplier", 20))
    grid: dict = {}
    specs: dict[str, PerturbationSpec] = {}
    kappas = set()
    network = "network"
    seed = 0
    for row in reader:
        network = row["network"]
        seed = int(row["seed"])
        label = row["delta"]
        spec = specs.setdefault(label, PerturbationSpec.fraction(float(label), m, q))
        k = int(row["kappa"])
        kappas.add(k)
        mean = float(row["accuracy_mean"])
        if math.isnan(mean):
            grid[(k, label)] = CellFailure(k, spec, "failed")
        else:
            grid[(k, label)] = AccuracyEstimate(
                kappa=k, delta=spec, accuracy_mean=mean, accuracy_std=float(row["accuracy_std"]),
                repeats=int(row["repeat_count"]), test_size=0, classifier_kind=row["classifier"], seed=seed,
            )
    delta_grid = sorted(specs.values(), key=lambda s: s.delta)
    return ScanResult(network, sorted(kappas), delta_grid, grid, config, seed)
