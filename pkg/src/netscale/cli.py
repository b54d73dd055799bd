"""``netscale`` command-line driver.

Exit codes: 0 success, 1 compute failure (or a scan with more than 10% failed
cells), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from . import oracle, scale
from .cache import GraphCache
from .classify import CLASSIFIER_KINDS, estimate_delta, perturbation_seed
from .config import ConfigError, RunConfig, load_config_file, parse_delta_grid, parse_int_grid
from .errors import NetscaleError
from .features import mean_signature, signature_stack, write_pgm
from .graph import read_edge_list
from .perturb import PerturbationSpec, parse_delta
from .sampler import ORIGINAL, build_dataset, split_by_label
from .seeding import derive_seed

log = logging.getLogger("netscale")

SCAN_SUCCESS_FRACTION = 0.9


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _add_global_flags(p: argparse.ArgumentParser) -> None:
    # SUPPRESS keeps a flag given before the subcommand from being reset by the
    # subparser's default
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="flat key = value config file")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--cache-dir", dest="cache_dir", default=S)
    p.add_argument("--out-dir", dest="out_dir", default=S)
    p.add_argument("--classifier", choices=CLASSIFIER_KINDS, default=S)
    p.add_argument("--single-feature", dest="single_feature", choices=("C", "r"), default=S)
    p.add_argument("--samples", type=int, default=S, help="samples per class")
    p.add_argument("--repeats", type=int, default=S)
    p.add_argument("--train-fraction", dest="train_fraction", type=float, default=S)
    p.add_argument("--infinity-multiplier", dest="infinity_multiplier", type=int, default=S)
    p.add_argument("--jobs", type=int, default=S)
    p.add_argument("--kappa-grid", dest="kappa_grid", type=parse_int_grid, default=S, help="e.g. 4..64 or 4,8,16")
    p.add_argument("--delta-grid", dest="delta_grid", type=parse_delta_grid, default=S, help="e.g. 10%%,50%%,inf")
    p.add_argument("--taus", type=_float_list, default=S)
    p.add_argument("-v", "--verbose", action="count", default=S)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netscale", description="Intrinsic-scale estimation for networks.", allow_abbrev=False
    )
    _add_global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text, allow_abbrev=False)
        _add_global_flags(p)
        return p

    p = command("perturb", "cache degree-preserving perturbations of a graph")
    p.add_argument("input", nargs="?")
    p.add_argument("--delta", action="append", help="perturbation (10%%, 0.1, inf); repeatable")

    p = command("eval", "estimate the test accuracy at one (kappa, delta)")
    p.add_argument("input", nargs="?")
    p.add_argument("--kappa", type=int, required=True)
    p.add_argument("--delta", required=True)
    p.add_argument("--csv", help="CSV to append to (default OUT_DIR/eval.csv)")
    p.add_argument("--pgm", action="store_true", help="also write mean signature images")

    p = command("scan", "estimate every grid cell and write CSV plus report")
    p.add_argument("input", nargs="?")
    p.add_argument("--network-id", dest="network_id")

    p = command("report", "summarize one or more scan CSVs")
    p.add_argument("scans", nargs="+")
    p.add_argument("--graph", action="append", default=[], metavar="NETWORK=PATH",
                   help="edge list for resilience and path measures")
    p.add_argument("--cluster-size", dest="cluster_sizes", action="append", default=[], metavar="NETWORK=VALUE")
    p.add_argument("--corr-tau", type=float, default=0.95)

    p = command("tree-demo", "random-tree connectivity demo")
    p.add_argument("--t", type=int, action="append", help="tree size; repeatable")
    p.add_argument("--t-min", type=int, default=5)
    p.add_argument("--t-max", type=int, default=20)
    p.add_argument("--trials", type=int, default=100_000)

    p = command("oracle", "Bayes accuracy from empirical subgraph distributions")
    p.add_argument("input", nargs="?")
    p.add_argument("--kappa", type=int, required=True)
    p.add_argument("--delta", required=True)
    p.add_argument("--oracle-samples", type=int, default=1_000_000)
    return parser


_CONFIG_KEYS = (
    "seed", "cache_dir", "out_dir", "classifier", "single_feature", "samples", "repeats",
    "train_fraction", "infinity_multiplier", "jobs", "kappa_grid", "delta_grid", "taus",
)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for key in _CONFIG_KEYS:
        if hasattr(args, key):
            values[key] = getattr(args, key)
    if getattr(args, "input", None):
        values["input"] = args.input
    if getattr(args, "network_id", None):
        values["network_id"] = args.network_id
    return RunConfig().with_overrides(**values)


def _header(cfg: RunConfig, command: str) -> dict[str, str]:
    snap = cfg.snapshot()
    snap["command"] = command
    return snap


def _network_id(cfg: RunConfig) -> str:
    if cfg.network_id:
        return cfg.network_id
    name = Path(cfg.input).name
    for suffix in (".gz", ".txt", ".edges", ".csv"):
        name = name.removesuffix(suffix)
    return name or "network"


def _load_input(cfg: RunConfig, cache: GraphCache):
    if not cfg.input:
        raise ConfigError("no input graph: pass a path or set input in the config file")
    g, path = cache.add_source(cfg.input, cfg.dedupe)
    log.info("loaded %s: n=%d m=%d (cached as %s)", cfg.input, g.n, g.m, path.name)
    return g


def _delta(text: str) -> float:
    try:
        return parse_delta(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _spec(cfg: RunConfig, d: float, m: int) -> PerturbationSpec:
    return PerturbationSpec.fraction(d, m, cfg.infinity_multiplier)


def cmd_perturb(cfg: RunConfig, args) -> int:
    deltas = [_delta(d) for d in args.delta or ()]
    cache = GraphCache(cfg.cache_dir)
    g = _load_input(cfg, cache)
    specs = [_spec(cfg, d, g.m) for d in deltas] if deltas else cfg.specs(g.m)
    for spec in specs:
        seed = perturbation_seed(cfg.seed, spec, 0)
        _, outcome, hit = cache.perturbed(g, spec, seed)
        print(
            f"delta={spec} swaps={outcome.succeeded} attempted={outcome.attempted} "
            f"rejected={outcome.rejected_shared_vertex} cache={'hit' if hit else 'miss'} "
            f"file={cache.perturbed_path(g, spec, seed)}"
        )
    return 0


def _append_eval_row(path: Path, cfg: RunConfig, network: str, est) -> None:
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        if new:
            for key, value in sorted(_header(cfg, "eval").items()):
                fh.write(f"# {key}={value}\n")
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(scale.SCAN_CSV_HEADER)
        w.writerow([network, est.kappa, est.delta.label, est.repeats, repr(est.accuracy_mean),
                    repr(est.accuracy_std), est.classifier_kind, est.seed])


def cmd_eval(cfg: RunConfig, args) -> int:
    delta = _delta(args.delta)
    cache = GraphCache(cfg.cache_dir)
    g = _load_input(cfg, cache)
    spec = _spec(cfg, delta, g.m)
    est = estimate_delta(g, args.kappa, spec, cfg.estimator(), cfg.seed, cache)
    print(
        f"kappa={est.kappa} delta={spec} classifier={est.classifier_kind} "
        f"accuracy_mean={est.accuracy_mean:.6f} accuracy_std={est.accuracy_std:.6f} "
        f"repeats={est.repeats} test_size={est.test_size}"
    )
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _append_eval_row(Path(args.csv) if args.csv else out / "eval.csv", cfg, _network_id(cfg), est)
    if args.pgm:
        gd = cache(g, spec, perturbation_seed(cfg.seed, spec, 0))
        ds = build_dataset(g, gd, args.kappa, cfg.samples, cfg.train_fraction,
                           derive_seed(cfg.seed, "dataset", args.kappa, spec.label, 0))
        notes = [f"{k}={v}" for k, v in sorted(_header(cfg, "eval").items())]
        for label, samples in split_by_label(ds.train + ds.test).items():
            name = "original" if label == ORIGINAL else "perturbed"
            path = out / f"mean_k{args.kappa}_d{spec.label}_{name}.pgm"
            write_pgm(mean_signature(signature_stack(samples)), path, notes)
            print(f"wrote {path}")
    return 0


def cmd_scan(cfg: RunConfig, args) -> int:
    cache = GraphCache(cfg.cache_dir)
    g = _load_input(cfg, cache)
    network = _network_id(cfg)
    kappas = [k for k in cfg.kappa_grid if k <= g.n]
    if len(kappas) < len(cfg.kappa_grid):
        log.warning("dropping subgraph sizes larger than n=%d", g.n)
    specs = cfg.specs(g.m)
    done = [0]
    total = len(kappas) * len(specs)

    def progress(result):
        done[0] += 1
        log.info("cell %d/%d done", done[0], total)

    scan = scale.run_scan(
        g, kappas, specs, cfg.estimator(), cfg.seed, network,
        cache_dir=cfg.cache_dir, jobs=cfg.jobs, perturb_fn=cache if cfg.jobs == 1 else None,
        on_cell=progress,
    )
    for key, value in _header(cfg, "scan").items():
        scan.config.setdefault(key, value)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{network}_scan.csv"
    scale.write_scan_csv(scan, csv_path)
    aux = scale.aux_measures(g, cfg.pair_fraction, cfg.bfs_sources, derive_seed(cfg.seed, "aux"), cfg.cluster_size)
    report = scale.build_report(scan, g, cfg.taus, aux)
    text = scale.render_report(report) + "\n" + scale.render_scale_table([report])
    (out / f"{network}_report.txt").write_text(text)
    sys.stdout.write(text)
    failed = len(scan.failed_cells)
    print(f"wrote {csv_path} ({total - failed}/{total} cells succeeded)")
    for c in scan.failed_cells:
        print(f"failed: kappa={c.kappa} delta={c.delta}: {c.message}", file=sys.stderr)
    return 0 if (total - failed) >= SCAN_SUCCESS_FRACTION * total else 1


def _pairs(items: Sequence[str], what: str) -> dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"{what} expects NETWORK=VALUE, got {item!r}")
        out[key] = value
    return out


def cmd_report(cfg: RunConfig, args) -> int:
    graphs = _pairs(args.graph, "--graph")
    try:
        clusters = {k: float(v) for k, v in _pairs(args.cluster_sizes, "--cluster-size").items()}
    except ValueError as exc:
        raise ConfigError(f"bad cluster size: {exc}") from exc
    reports = []
    for path in args.scans:
        scan = scale.read_scan_csv(path)
        g = None
        aux = None
        if scan.network_id in graphs:
            g = read_edge_list(graphs[scan.network_id], cfg.dedupe)
            aux = scale.aux_measures(g, cfg.pair_fraction, cfg.bfs_sources, derive_seed(cfg.seed, "aux"),
                                     clusters.get(scan.network_id))
        elif scan.network_id in clusters:
            log.warning("cluster size for %s ignored without --graph", scan.network_id)
        reports.append(scale.build_report(scan, g, cfg.taus, aux))
    if len(reports) > 1:
        scale.measure_correlations(reports, args.corr_tau)
    text = "".join(scale.render_report(r) + "\n" for r in reports) + scale.render_scale_table(reports)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_tree_demo(cfg: RunConfig, args) -> int:
    sizes = args.t or list(range(args.t_min, args.t_max + 1))
    if not sizes or min(sizes) < 2:
        raise ConfigError("tree sizes must be at least 2")
    results = oracle.tree_demo_curve(sizes, args.trials, cfg.infinity_multiplier, cfg.seed)
    for r in results:
        print(f"t={r.t} accuracy={r.accuracy:.6f} connected_fraction={r.connected_fraction:.6f} stderr={r.stderr:.6f}")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = _header(cfg, "tree-demo")
    header["trials"] = str(args.trials)
    oracle.write_curve_csv(results, out / "tree_demo.csv", header)
    print(f"wrote {out / 'tree_demo.csv'}")
    return 0


def cmd_oracle(cfg: RunConfig, args) -> int:
    delta = _delta(args.delta)
    cache = GraphCache(cfg.cache_dir)
    g = _load_input(cfg, cache)
    spec = _spec(cfg, delta, g.m)
    gd = cache(g, spec, perturbation_seed(cfg.seed, spec, 0))
    p0 = oracle.empirical_distribution(g, args.kappa, args.oracle_samples, derive_seed(cfg.seed, "oracle", 0))
    p1 = oracle.empirical_distribution(gd, args.kappa, args.oracle_samples, derive_seed(cfg.seed, "oracle", 1))
    acc = oracle.bayes_accuracy(p0, p1)
    print(f"kappa={args.kappa} delta={spec} bayes_accuracy={acc:.6f} "
          f"support_original={p0.support_size} support_perturbed={p1.support_size}")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = _header(cfg, "oracle")
    header.update(kappa=args.kappa, delta=spec.label, oracle_samples=args.oracle_samples, bayes_accuracy=repr(acc))
    for name, dist in (("original", p0), ("perturbed", p1)):
        oracle.write_distribution_csv(dist, out / f"distribution_k{args.kappa}_d{spec.label}_{name}.csv", header)
    return 0


COMMANDS = {
    "perturb": cmd_perturb,
    "eval": cmd_eval,
    "scan": cmd_scan,
    "report": cmd_report,
    "tree-demo": cmd_tree_demo,
    "oracle": cmd_oracle,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    verbosity = getattr(args, "verbose", 0) or 0
    logging.basicConfig(
        level=logging.DEBUG if verbosity > 1 else logging.INFO if verbosity else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"netscale: error: {exc}", file=sys.stderr)
        return 2
    except (NetscaleError, OSError, ValueError, KeyError) as exc:
        print(f"netscale: {args.command} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
