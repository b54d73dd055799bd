import gzip
import os
from pathlib import Path

import networkx as nx
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from netscale.graph import Graph
from netscale.sampler import ORIGINAL, SubgraphSample

settings.register_profile(
    "netscale",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("netscale")

REPO = Path(__file__).resolve().parents[1]


def graph_from_nx(G: nx.Graph) -> Graph:
    G = nx.convert_node_labels_to_integers(G)
    return Graph.from_edges(np.array(list(G.edges()), dtype=np.int64).reshape(-1, 2), n=G.number_of_nodes())


def sample_from_edges(edges, kappa=None, label=ORIGINAL) -> SubgraphSample:
    """A SubgraphSample whose visit order is 0..kappa-1."""
    edges = list(edges)
    if kappa is None:
        kappa = 1 + max(max(e) for e in edges)
    counts = np.zeros((kappa, kappa), dtype=np.uint16)
    for u, v in edges:
        counts[u, v] += 1
        counts[v, u] += 1
    return SubgraphSample(np.arange(kappa), counts, label)


def facebook_path() -> Path | None:
    env = os.environ.get("NETSCALE_FACEBOOK")
    candidates = [Path(env)] if env else []
    candidates += [REPO / "data" / "facebook_combined.txt", REPO / "data" / "facebook_combined.txt.gz"]
    for p in candidates:
        if p.is_file():
            return p
    return None


FACEBOOK_MISSING = (
    "Facebook ego-network edge list (SNAP facebook_combined.txt) not found; "
    "set NETSCALE_FACEBOOK or place it under data/"
)


@pytest.fixture(scope="session")
def facebook():
    """The Facebook graph, or a skip for unit examples that need it."""
    from netscale.graph import read_edge_list

    path = facebook_path()
    if path is None:
        pytest.skip(FACEBOOK_MISSING)
    return read_edge_list(path)


def write_edge_list(path: Path, G: nx.Graph, compress=False) -> Path:
    text = "".join(f"{u} {v}\n" for u, v in G.edges())
    if compress:
        with gzip.open(path, "wt") as fh:
            fh.write(text)
    else:
        path.write_text(text)
    return path


# acceptance summary: one line per criterion at the end of the run

_acceptance: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    number, title = crit
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance[number] = (title, "PASS" if report.passed else "FAIL")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        outcome.get_result().criterion = (marker.kwargs["criterion"], marker.kwargs["title"])


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, verdict = _acceptance[number]
        terminalreporter.write_line(f"criterion {number}: {verdict}  {title}")
