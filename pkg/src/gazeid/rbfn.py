"""Radial basis function network classifier.

Centers come from seeded k-means++ with Lloyd refinement, widths from the
mean distance to the two nearest other centers, and output weights from
ridge-regularized least squares onto one-hot class targets. Training is a
deterministic function of (data, config); models are immutable.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .features import FeatureMatrix
from .gaze_data import ValidationError

_MODEL_FORMAT_VERSION = 1
_WIDTH_FLOOR = 1e-6


@dataclass(frozen=True)
class RbfnConfig:
    k: int = 32
    seed: int = 0
    ridge_lambda: float = 1e-6
    kmeans_max_iters: int = 100

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.ridge_lambda < 0:
            raise ValidationError(f"ridge_lambda must be >= 0, got {self.ridge_lambda}")
        if self.kmeans_max_iters < 1:
            raise ValidationError(f"kmeans_max_iters must be >= 1, got {self.kmeans_max_iters}")


@dataclass(frozen=True, eq=False)
class RbfnModel:
    centers: np.ndarray  # (k, d)
    widths: np.ndarray  # (k,)
    weights: np.ndarray  # (k+1, C), bias row last
    classes: tuple[str, ...]
    config: RbfnConfig

    def __post_init__(self):
        if np.any(self.widths <= 0):
            raise ValidationError("widths must be strictly positive")
        if self.weights.shape != (self.centers.shape[0] + 1, len(self.classes)):
            raise ValidationError("weights shape must be (k+1, n_classes)")

    @property
    def n_features(self) -> int:
        return self.centers.shape[1]


def _sq_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, clipped at 0."""
    d2 = (
        np.sum(points**2, axis=1)[:, None]
        + np.sum(centers**2, axis=1)[None, :]
        - 2.0 * points @ centers.T
    )
    return np.maximum(d2, 0.0)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = _sq_distances(points, centers[:1])[:, 0]
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[j] = points[idx]
        d2 = np.minimum(d2, _sq_distances(points, centers[j : j + 1])[:, 0])
    return centers


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iters: int) -> np.ndarray:
    k = centers.shape[0]
    point_norms = np.sum(points**2, axis=1)[:, None]
    assignments = None
    for _ in range(max_iters):
        d2 = point_norms + np.sum(centers**2, axis=1)[None, :] - 2.0 * points @ centers.T
        new_assignments = np.argmin(d2, axis=1)
        if assignments is not None and np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        one_hot = assignments[:, None] == np.arange(k)[None, :]
        counts = one_hot.sum(axis=0)
        sums = one_hot.T.astype(np.float64) @ points
        occupied = counts > 0  # empty clusters keep their previous center
        centers[occupied] = sums[occupied] / counts[occupied, None]
    return centers


def _widths(centers: np.ndarray) -> np.ndarray:
    k = centers.shape[0]
    if k == 1:
        return np.ones(1)
    dist = np.sqrt(_sq_distances(centers, centers))
    np.fill_diagonal(dist, np.inf)
    nearest = np.sort(dist, axis=1)[:, : min(2, k - 1)]
    return np.maximum(nearest.mean(axis=1), _WIDTH_FLOOR)


def _design(features: np.ndarray, centers: np.ndarray, widths: np.ndarray) -> np.ndarray:
    activ = np.exp(-_sq_distances(features, centers) / (2.0 * widths**2))
    # Distant points underflow towards subnormal activations, which make the
    # downstream matmuls and solves crawl; they carry no information anyway.
    activ[activ < 1e-30] = 0.0
    return np.hstack([activ, np.ones((features.shape[0], 1))])


def rbfn_train(features, labels=None, cfg: RbfnConfig | None = None) -> RbfnModel:
    """Train an RBFN on z-scored feature rows.

    ``features`` may be a FeatureMatrix (labels taken from it) or a 2-d array
    with an explicit label sequence.
    """
    cfg = cfg or RbfnConfig()
    if isinstance(features, FeatureMatrix):
        if labels is None:
            labels = features.labels
        features = features.values
    features = np.ascontiguousarray(features, dtype=np.float64)
    if labels is None or len(labels) != features.shape[0]:
        raise ValidationError("one label per training row required")
    if not np.isfinite(features).all():
        raise ValidationError("training features must be finite")
    if features.shape[0] < cfg.k:
        raise ValidationError(
            f"k={cfg.k} exceeds the {features.shape[0]} training rows"
        )
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise ValidationError(f"need at least 2 classes, got {classes}")

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    initial = _kmeans_pp_init(features, cfg.k, rng)
    centers = _lloyd(features, initial, cfg.kmeans_max_iters)
    widths = _widths(centers)

    design = _design(features, centers, widths)
    index = {label: i for i, label in enumerate(classes)}
    targets = np.zeros((features.shape[0], len(classes)))
    targets[np.arange(features.shape[0]), [index[l] for l in labels]] = 1.0
    if cfg.ridge_lambda > 0:
        gram = design.T @ design + cfg.ridge_lambda * np.eye(design.shape[1])
        weights = np.linalg.solve(gram, design.T @ targets)
    else:
        weights = np.linalg.lstsq(design, targets, rcond=None)[0]
    return RbfnModel(
        centers=centers, widths=widths, weights=weights, classes=classes, config=cfg
    )


def predict_proba_batch(model: RbfnModel, features: np.ndarray) -> np.ndarray:
    """Per-row class probabilities: raw outputs clamped at 0 and normalized."""
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features.shape[1] != model.n_features:
        raise ValidationError(
            f"expected {model.n_features} features, got {features.shape[1]}"
        )
    raw = _design(features, model.centers, model.widths) @ model.weights
    clamped = np.maximum(raw, 0.0)
    sums = clamped.sum(axis=1, keepdims=True)
    uniform = np.full_like(clamped, 1.0 / clamped.shape[1])
    with np.errstate(invalid="ignore"):
        proba = np.where(sums > 0, clamped / np.where(sums > 0, sums, 1.0), uniform)
    return proba


def rbfn_predict_proba(model: RbfnModel, x) -> np.ndarray:
    """Probability vector over model.classes for a single feature vector."""
    return predict_proba_batch(model, x)[0]


def save_model(model: RbfnModel, path) -> None:
    """Serialize to JSON; floats round-trip losslessly via repr."""
    payload = {
        "format_version": _MODEL_FORMAT_VERSION,
        "config": asdict(model.config),
        "classes": list(model.classes),
        "centers": model.centers.tolist(),
        "widths": model.widths.tolist(),
        "weights": model.weights.tolist(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_model(path) -> RbfnModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    version = payload.get("format_version")
    if version != _MODEL_FORMAT_VERSION:
        raise ValidationError(f"unsupported model format version: {version}")
    return RbfnModel(
        centers=np.asarray(payload["centers"], dtype=np.float64),
        widths=np.asarray(payload["widths"], dtype=np.float64),
        weights=np.asarray(payload["weights"], dtype=np.float64),
        classes=tuple(payload["classes"]),
        config=RbfnConfig(**payload["config"]),
    )


def derive_seed(cfg: RbfnConfig, seed: int) -> RbfnConfig:
    """Config with the seed replaced; used to derive per-model seeds."""
    return replace(cfg, seed=seed)
