"""Subgraph classifiers and the test-accuracy estimator of distinguishability."""

from __future__ import annotations

import io
import math
import struct
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, TrainingError
from .features import FEATURE_NAMES, feature_matrix, signature_stack
from .graph import Graph
from .perturb import PerturbationSpec, perturb
from .sampler import ORIGINAL, PERTURBED, LabeledDataset, SubgraphSample, build_dataset
from .seeding import derive_seed

__all__ = [
    "CLASSIFIER_KINDS",
    "Classifier",
    "AccuracyEstimate",
    "EstimatorConfig",
    "train_histogram_bayes",
    "train_logistic",
    "train_image_mlp",
    "connectivity_classifier",
    "train_classifier",
    "evaluate",
    "estimate_delta",
]

CLASSIFIER_KINDS = (
    "single_feature_bayes",
    "joint_feature_bayes",
    "logistic",
    "image_mlp",
    "connectivity",
)

_MAGIC = b"NSCL"
_VERSION = 1
_COL = {name: i for i, name in enumerate(FEATURE_NAMES)}


def _labels(samples: Sequence[SubgraphSample]) -> np.ndarray:
    return np.fromiter((s.label for s in samples), dtype=np.int64, count=len(samples))


def _as_samples(data) -> Sequence[SubgraphSample]:
    return data.train if isinstance(data, LabeledDataset) else data


@dataclass(eq=False)
class Classifier:
    """A trained map from subgraph samples to +1 (original) / -1 (perturbed)."""

    kind: str
    params: dict[str, np.ndarray] = field(default_factory=dict)
    kappa: int | None = None

    def predict(self, samples: Sequence[SubgraphSample]) -> np.ndarray:
        if not samples:
            return np.empty(0, dtype=np.int64)
        if self.kind in ("single_feature_bayes", "joint_feature_bayes"):
            return self._predict_bayes(feature_matrix(samples))
        if self.kind == "logistic":
            return self._predict_logistic(feature_matrix(samples))
        if self.kind == "connectivity":
            return np.where(feature_matrix(samples)[:, _COL["connected"]] == 1, ORIGINAL, PERTURBED)
        if self.kind == "image_mlp":
            if any(s.kappa != self.kappa for s in samples):
                raise ValueError(f"image classifier was trained for kappa={self.kappa}")
            return self._predict_mlp(_pixels(samples))
        raise ValueError(f"unknown classifier kind {self.kind!r}")

    def _predict_bayes(self, x: np.ndarray) -> np.ndarray:
        cols = self.params["columns"]
        cell = np.zeros(len(x), dtype=np.int64)
        for i, c in enumerate(cols):
            edges = self.params[f"edges{i}"]
            cell = cell * (len(edges) - 1) + _bin(x[:, c], edges)
        return self.params["table"].reshape(-1)[cell].astype(np.int64)

    def _predict_logistic(self, x: np.ndarray) -> np.ndarray:
        z = (x[:, self.params["columns"]] - self.params["mean"]) / self.params["std"]
        score = z @ self.params["w"] + self.params["b"][0]
        return np.where(score >= 0, ORIGINAL, PERTURBED)

    def _predict_mlp(self, x: np.ndarray) -> np.ndarray:
        p = self.params
        h = np.maximum(x @ p["W1"] + p["b1"], 0.0)
        score = h @ p["W2"] + p["b2"][0]
        return np.where(score >= 0, ORIGINAL, PERTURBED)

    # versioned binary record: magic, u16 version, u16 kind length, kind,
    # i32 kappa (-1 when unset), then an npz archive of the parameter arrays
    def to_bytes(self) -> bytes:
        kind = self.kind.encode()
        buf = io.BytesIO()
        np.savez(buf, **self.params)
        head = _MAGIC + struct.pack("<HH", _VERSION, len(kind)) + kind
        head += struct.pack("<i", -1 if self.kappa is None else self.kappa)
        return head + buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> Classifier:
        if data[:4] != _MAGIC:
            raise ParseError("not a classifier record (bad magic)")
        version, klen = struct.unpack_from("<HH", data, 4)
        if version != _VERSION:
            raise ParseError(f"unsupported classifier record version {version}")
        kind = data[8 : 8 + klen].decode()
        (kappa,) = struct.unpack_from("<i", data, 8 + klen)
        with np.load(io.BytesIO(data[12 + klen :])) as npz:
            params = {k: npz[k] for k in npz.files}
        return cls(kind, params, None if kappa < 0 else kappa)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> Classifier:
        return cls.from_bytes(Path(path).read_bytes())


def _bin(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    nb = len(edges) - 1
    return np.clip(np.searchsorted(edges, values, side="right") - 1, 0, nb - 1)


def _require_both_classes(y: np.ndarray) -> None:
    for label in (ORIGINAL, PERTURBED):
        if not np.any(y == label):
            raise TrainingError(f"training set has no samples of class {label:+d}")


def _fit_bayes(x: np.ndarray, y: np.ndarray, features: Sequence[str], bins: int) -> Classifier:
    if bins < 2:
        raise ValueError("need at least two bins")
    _require_both_classes(y)
    cols = [_COL[f] for f in features]
    params: dict[str, np.ndarray] = {"columns": np.array(cols)}
    cell = np.zeros(len(x), dtype=np.int64)
    shape = []
    for i, (name, c) in enumerate(zip(features, cols)):
        if name == "C":
            edges = np.linspace(0.0, 1.0, bins + 1)
        else:
            edges = np.unique(np.quantile(x[:, c], np.linspace(0.0, 1.0, bins + 1)))
            if len(edges) < 2:
                edges = np.array([edges[0], edges[0] + 1.0])
        params[f"edges{i}"] = edges
        cell = cell * (len(edges) - 1) + _bin(x[:, c], edges)
        shape.append(len(edges) - 1)
    size = int(np.prod(shape))
    pos = np.bincount(cell[y == ORIGINAL], minlength=size) / np.count_nonzero(y == ORIGINAL)
    neg = np.bincount(cell[y == PERTURBED], minlength=size) / np.count_nonzero(y == PERTURBED)
    # empty and tied cells answer +1
    params["table"] = np.where(pos >= neg, ORIGINAL, PERTURBED).astype(np.int8).reshape(shape)
    kind = "single_feature_bayes" if len(cols) == 1 else "joint_feature_bayes"
    return Classifier(kind, params)


def train_histogram_bayes(train, features: Sequence[str] = ("C", "r"), bins: int = 20) -> Classifier:
    """Plug-in Bayes rule on a histogram of the chosen features.

    ``C`` uses uniform bins on [0, 1]; ``r`` uses quantile bins of the pooled
    training values. Each cell predicts the class with the larger empirical
    frequency.
    """
    samples = _as_samples(train)
    if not samples:
        raise TrainingError("empty training set")
    for f in features:
        if f not in ("C", "r"):
            raise ValueError(f"histogram Bayes supports features C and r, not {f!r}")
    return _fit_bayes(feature_matrix(samples), _labels(samples), tuple(features), bins)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _fit_logistic(x, y, learn_rate, epochs, l2) -> Classifier:
    _require_both_classes(y)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    keep = np.flatnonzero(std > 0)
    z = (x[:, keep] - mean[keep]) / std[keep]
    t = (y == ORIGINAL).astype(np.float64)
    w = np.zeros(len(keep))
    b = 0.0
    n = len(t)
    for epoch in range(epochs):
        s = z @ w + b
        p = _sigmoid(s)
        loss = np.mean(np.logaddexp(0.0, s) - t * s) + 0.5 * l2 * w @ w
        if not math.isfinite(loss):
            raise TrainingError(f"logistic loss became non-finite at epoch {epoch}")
        err = p - t
        w -= learn_rate * (z.T @ err / n + l2 * w)
        b -= learn_rate * err.mean()
    return Classifier(
        "logistic",
        {"columns": keep, "mean": mean[keep], "std": std[keep], "w": w, "b": np.array([b])},
    )


def train_logistic(train, learn_rate: float = 0.5, epochs: int = 500, l2: float = 1e-4) -> Classifier:
    """Full-batch gradient descent on L2-regularized log-loss over standardized features.

    Constant features are dropped.
    """
    samples = _as_samples(train)
    if not samples:
        raise TrainingError("empty training set")
    return _fit_logistic(feature_matrix(samples), _labels(samples), learn_rate, epochs, l2)


def _pixels(samples: Sequence[SubgraphSample]) -> np.ndarray:
    imgs = signature_stack(samples)
    return imgs.reshape(len(imgs), -1).astype(np.float64)


def _fit_mlp(x, y, kappa, hidden, learn_rate, epochs, batch, seed) -> Classifier:
    _require_both_classes(y)
    if hidden < 1:
        raise ValueError("hidden layer needs at least one unit")
    rng = np.random.default_rng(seed)
    d = x.shape[1]
    W1 = rng.normal(0.0, math.sqrt(2.0 / d), size=(d, hidden))
    b1 = np.zeros(hidden)
    W2 = rng.normal(0.0, math.sqrt(1.0 / hidden), size=hidden)
    b2 = np.zeros(1)
    params = [W1, b1, W2, b2]
    # Adam moments
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    t = (y == ORIGINAL).astype(np.float64)
    n = len(t)
    step = 0
    for epoch in range(epochs):
        perm = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch):
            idx = perm[lo : lo + batch]
            xb, tb = x[idx], t[idx]
            pre = xb @ W1 + b1
            h = np.maximum(pre, 0.0)
            s = h @ W2 + b2[0]
            total += float(np.sum(np.logaddexp(0.0, s) - tb * s))
            g_s = (_sigmoid(s) - tb) / len(idx)
            g_W2 = h.T @ g_s
            g_b2 = np.array([g_s.sum()])
            g_h = np.outer(g_s, W2) * (pre > 0)
            grads = [xb.T @ g_h, g_h.sum(axis=0), g_W2, g_b2]
            step += 1
            for p, g, a, v in zip(params, grads, m1, m2):
                a *= beta1
                a += (1 - beta1) * g
                v *= beta2
                v += (1 - beta2) * g * g
                p -= learn_rate * (a / (1 - beta1**step)) / (np.sqrt(v / (1 - beta2**step)) + eps)
        if not math.isfinite(total):
            raise TrainingError(f"image classifier loss became non-finite at epoch {epoch}")
    return Classifier("image_mlp", {"W1": W1, "b1": b1, "W2": W2, "b2": b2}, kappa)


def train_image_mlp(
    train,
    hidden: int = 64,
    learn_rate: float = 0.005,
    epochs: int = 20,
    batch: int = 64,
    seed: int = 0,
) -> Classifier:
    """One-hidden-layer ReLU network on the flattened canonical signature image."""
    samples = _as_samples(train)
    if not samples:
        raise TrainingError("empty training set")
    kappas = {s.kappa for s in samples}
    if len(kappas) != 1:
        raise ValueError("image classifier needs a single subgraph size")
    return _fit_mlp(_pixels(samples), _labels(samples), kappas.pop(), hidden, learn_rate, epochs, batch, seed)


def connectivity_classifier() -> Classifier:
    """Answers +1 exactly when the subgraph is connected."""
    return Classifier("connectivity")


def evaluate(c: Classifier, test: Sequence[SubgraphSample]) -> float:
    """Fraction of ``test`` whose predicted label matches the true label."""
    if not test:
        raise ValueError("empty test set")
    return float(np.mean(c.predict(test) == _labels(test)))


@dataclass(frozen=True)
class EstimatorConfig:
    classifier: str = "joint_feature_bayes"
    samples_per_class: int = 10_000
    train_fraction: float = 0.5
    repeats: int = 10
    bins: int = 20
    single_feature: str = "C"
    logistic_learn_rate: float = 0.5
    logistic_epochs: int = 500
    logistic_l2: float = 1e-4
    mlp_hidden: int = 64
    mlp_learn_rate: float = 0.005
    mlp_epochs: int = 20
    mlp_batch: int = 64

    def __post_init__(self):
        if self.classifier not in CLASSIFIER_KINDS:
            raise ValueError(f"unknown classifier {self.classifier!r}; choose from {CLASSIFIER_KINDS}")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")

    @property
    def tag(self) -> str:
        if self.classifier == "single_feature_bayes":
            return f"single_feature_bayes[{self.single_feature}]"
        return self.classifier


def train_classifier(config: EstimatorConfig, train: Sequence[SubgraphSample], seed: int = 0) -> Classifier:
    kind = config.classifier
    if kind == "single_feature_bayes":
        return train_histogram_bayes(train, (config.single_feature,), config.bins)
    if kind == "joint_feature_bayes":
        return train_histogram_bayes(train, ("C", "r"), config.bins)
    if kind == "logistic":
        return train_logistic(train, config.logistic_learn_rate, config.logistic_epochs, config.logistic_l2)
    if kind == "image_mlp":
        return train_image_mlp(
            train, config.mlp_hidden, config.mlp_learn_rate, config.mlp_epochs, config.mlp_batch,
            seed & 0xFFFFFFFF,
        )
    return connectivity_classifier()


@dataclass(frozen=True)
class AccuracyEstimate:
    """Repeat statistics of the test accuracy at one (kappa, delta) cell.

    Any trained classifier's accuracy bounds the Bayes-optimal accuracy from
    below, so this is a lower estimate.
    """

    kappa: int
    delta: PerturbationSpec
    accuracy_mean: float
    accuracy_std: float
    repeats: int
    test_size: int
    classifier_kind: str
    accuracies: tuple[float, ...] = ()
    seed: int = 0


PerturbFn = Callable[[Graph, PerturbationSpec, int], Graph]


def _default_perturb(g: Graph, spec: PerturbationSpec, seed: int) -> Graph:
    return perturb(g, spec, seed)[0]


def perturbation_seed(seed: int, spec: PerturbationSpec, repeat: int) -> int:
    """Seed of the perturbed copy used by ``repeat``; shared across subgraph sizes."""
    return derive_seed(seed, "perturb", spec.label, spec.swap_count, repeat)


def estimate_delta(
    g: Graph,
    kappa: int,
    spec: PerturbationSpec,
    config: EstimatorConfig | None = None,
    seed: int = 0,
    perturb_fn: PerturbFn | None = None,
) -> AccuracyEstimate:
    """Perturb, sample, train, test; averaged over ``config.repeats`` repeats.

    Any failing repeat aborts the estimate.
    """
    config = config or EstimatorConfig()
    perturb_fn = perturb_fn or _default_perturb
    accs = []
    test_size = 0
    for r in range(config.repeats):
        gd = perturb_fn(g, spec, perturbation_seed(seed, spec, r))
        ds = build_dataset(
            g, gd, kappa, config.samples_per_class, config.train_fraction,
            derive_seed(seed, "dataset", kappa, spec.label, r),
        )
        clf = train_classifier(config, ds.train, derive_seed(seed, "train", kappa, spec.label, r))
        accs.append(evaluate(clf, ds.test))
        test_size = len(ds.test)
    arr = np.array(accs)
    return AccuracyEstimate(
        kappa=kappa,
        delta=spec,
        accuracy_mean=float(arr.mean()),
        accuracy_std=float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
        repeats=config.repeats,
        test_size=test_size,
        classifier_kind=config.tag,
        accuracies=tuple(accs),
        seed=seed,
    )
