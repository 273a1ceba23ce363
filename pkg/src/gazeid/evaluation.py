"""Identification experiments: session scoring, score fusion, seed protocol,
and the derivative/fragment sweep harnesses.

The per-recording pipeline is smooth -> optional fragment cut -> IVT
segmentation -> feature extraction. Session S1 trains (z-score parameters and
both RBFN models are fit on S1 only), session S2 tests: each user's S2
segment probabilities are averaged per kind, fused 50/50, and the argmax
class is the prediction. Accuracy is 100 * correct / users.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .features import (
    DerivativeLevel,
    FeatureMatrix,
    ZScoreParams,
    concat_matrices,
    extract_features,
    zscore_apply,
    zscore_fit,
)
from .gaze_data import FRAGMENT_GRID_S, Dataset, Recording, ValidationError, cut_fragment
from .preprocess import SgConfig, smooth
from .rbfn import RbfnConfig, RbfnModel, predict_proba_batch, rbfn_train
from .segmentation import FIXATION, SACCADE, IvtConfig, ivt_segment

logger = logging.getLogger(__name__)

ANCHORS = ("start", "end")
DEFAULT_SEEDS = tuple(range(50))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an identification run depends on besides the dataset."""

    level: DerivativeLevel = DerivativeLevel.CRACKLE
    fragment: tuple[float, str] | None = None
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    ivt: IvtConfig = IvtConfig()
    sg: SgConfig = SgConfig()
    rbfn: RbfnConfig = RbfnConfig()

    def __post_init__(self):
        object.__setattr__(self, "level", DerivativeLevel(self.level))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ValidationError("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValidationError("seeds must be distinct")
        if self.fragment is not None:
            duration, anchor = self.fragment
            if anchor not in ANCHORS or not duration > 0:
                raise ValidationError(f"invalid fragment {self.fragment!r}")
            object.__setattr__(self, "fragment", (float(duration), anchor))


@dataclass(frozen=True)
class SessionScore:
    """Per-class probabilities of one test session and their fusion."""

    p_fix: np.ndarray
    p_sac: np.ndarray
    p_final: np.ndarray


@dataclass(frozen=True)
class ExperimentResult:
    """Per-seed accuracies (percent) with their mean and sample SD."""

    config: ExperimentConfig
    accuracies: tuple[float, ...]
    mean: float
    sd: float

    def __post_init__(self):
        accs = np.asarray(self.accuracies, dtype=np.float64)
        if np.any(accs < 0) or np.any(accs > 100):
            raise ValidationError("accuracies must lie in [0, 100]")
        mean = float(accs.mean())
        sd = float(accs.std(ddof=1)) if accs.size > 1 else 0.0
        if abs(mean - self.mean) > 1e-9 or abs(sd - self.sd) > 1e-9:
            raise ValidationError("mean/sd inconsistent with the accuracy list")

    @classmethod
    def from_accuracies(
        cls, config: ExperimentConfig, accuracies
    ) -> "ExperimentResult":
        accs = tuple(float(a) for a in accuracies)
        arr = np.asarray(accs)
        sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        return cls(config=config, accuracies=accs, mean=float(arr.mean()), sd=sd)


@dataclass(frozen=True)
class PreparedFeatures:
    """Seed-independent half of a run: z-scored train/test matrices."""

    classes: tuple[str, ...]
    fix_train: FeatureMatrix
    sac_train: FeatureMatrix
    fix_test: dict[str, np.ndarray]
    sac_test: dict[str, np.ndarray]
    zscore_fix: ZScoreParams
    zscore_sac: ZScoreParams
    level: DerivativeLevel


def _single_dataset_id(dataset: Dataset) -> str:
    ids = dataset.dataset_ids()
    if len(ids) != 1:
        raise ValidationError(
            f"identification runs on a single dataset_id; found {ids} "
            "(filter the dataset first)"
        )
    return ids[0]


def _process_recording(rec: Recording, cfg: ExperimentConfig):
    traj = smooth(rec.trajectory, cfg.sg)
    if cfg.fragment is not None:
        traj = cut_fragment(traj, cfg.fragment[0], cfg.fragment[1])
    seg = ivt_segment(traj, cfg.ivt)
    return extract_features(seg, cfg.level, user_id=rec.user_id)


def prepare_features(dataset: Dataset, cfg: ExperimentConfig) -> PreparedFeatures:
    """Run the seed-independent pipeline and z-score with S1 statistics."""
    _single_dataset_id(dataset)
    users = dataset.users()
    fix_train, sac_train = [], []
    fix_test, sac_test = {}, {}
    for rec in sorted(dataset.recordings, key=lambda r: r.key):
        fix, sac = _process_recording(rec, cfg)
        if rec.session_id == "S1":
            fix_train.append(fix)
            sac_train.append(sac)
        else:
            fix_test[rec.user_id] = fix.values
            sac_test[rec.user_id] = sac.values
    fix_matrix = concat_matrices(fix_train)
    sac_matrix = concat_matrices(sac_train)
    z_fix = zscore_fit(fix_matrix)
    z_sac = zscore_fit(sac_matrix)
    return PreparedFeatures(
        classes=tuple(users),
        fix_train=zscore_apply(z_fix, fix_matrix),
        sac_train=zscore_apply(z_sac, sac_matrix),
        fix_test={
            u: zscore_apply(z_fix, FeatureMatrix(m, ("",) * len(m), FIXATION, cfg.level)).values
            for u, m in fix_test.items()
        },
        sac_test={
            u: zscore_apply(z_sac, FeatureMatrix(m, ("",) * len(m), SACCADE, cfg.level)).values
            for u, m in sac_test.items()
        },
        zscore_fix=z_fix,
        zscore_sac=z_sac,
        level=cfg.level,
    )


def slice_level(prep: PreparedFeatures, level: DerivativeLevel) -> PreparedFeatures:
    """Column-prefix view of prepared features at a lower derivative level.

    Level-L features are by construction the first columns of the level-5
    matrices, and z-scoring is per-column, so slicing after preparation equals
    preparing at the lower level directly.
    """
    level = DerivativeLevel(level)
    if level > prep.level:
        raise ValidationError(f"cannot slice level {int(level)} from level {int(prep.level)}")
    if level == prep.level:
        return prep
    n = level.n_features

    def cut(matrix: FeatureMatrix) -> FeatureMatrix:
        return FeatureMatrix(matrix.values[:, :n], matrix.labels, matrix.kind, level)

    def cut_params(params: ZScoreParams) -> ZScoreParams:
        return ZScoreParams(params.mean[:n], params.std[:n], params.flagged[:n])

    return PreparedFeatures(
        classes=prep.classes,
        fix_train=cut(prep.fix_train),
        sac_train=cut(prep.sac_train),
        fix_test={u: m[:, :n] for u, m in prep.fix_test.items()},
        sac_test={u: m[:, :n] for u, m in prep.sac_test.items()},
        zscore_fix=cut_params(prep.zscore_fix),
        zscore_sac=cut_params(prep.zscore_sac),
        level=level,
    )


def session_score(model: RbfnModel, segment_rows) -> np.ndarray:
    """Mean class-probability vector over a session's segment rows.

    A session with zero segments of the required kind scores uniformly (with
    a logged warning) rather than failing the whole run.
    """
    if isinstance(segment_rows, FeatureMatrix):
        segment_rows = segment_rows.values
    segment_rows = np.asarray(segment_rows, dtype=np.float64)
    if segment_rows.shape[0] == 0:
        logger.warning("session has no segments of the required kind; scoring uniformly")
        return np.full(len(model.classes), 1.0 / len(model.classes))
    return predict_proba_batch(model, segment_rows).mean(axis=0)


def fuse(p_fix: np.ndarray, p_sac: np.ndarray) -> np.ndarray:
    """Equal-weight score fusion: 0.5 * p_fix + 0.5 * p_sac."""
    p_fix = np.asarray(p_fix, dtype=np.float64)
    p_sac = np.asarray(p_sac, dtype=np.float64)
    if p_fix.shape != p_sac.shape:
        raise ValidationError(
            f"probability vectors differ in length: {p_fix.shape} vs {p_sac.shape}"
        )
    return 0.5 * p_fix + 0.5 * p_sac


def train_models(
    prep: PreparedFeatures, rbfn_cfg: RbfnConfig, seed: int
) -> tuple[RbfnModel, RbfnModel]:
    """Fixation model uses the seed, saccade model uses seed + 1."""
    fix_model = rbfn_train(prep.fix_train, cfg=replace(rbfn_cfg, seed=seed))
    sac_model = rbfn_train(prep.sac_train, cfg=replace(rbfn_cfg, seed=seed + 1))
    return fix_model, sac_model


def score_sessions(
    prep: PreparedFeatures, fix_model: RbfnModel, sac_model: RbfnModel
) -> dict[str, SessionScore]:
    scores = {}
    for user in prep.classes:
        p_fix = session_score(fix_model, prep.fix_test.get(user, np.empty((0, 0))))
        p_sac = session_score(sac_model, prep.sac_test.get(user, np.empty((0, 0))))
        scores[user] = SessionScore(p_fix=p_fix, p_sac=p_sac, p_final=fuse(p_fix, p_sac))
    return scores


def identify_once(prep: PreparedFeatures, rbfn_cfg: RbfnConfig, seed: int) -> float:
    """One seeded train/test pass; returns accuracy in percent."""
    fix_model, sac_model = train_models(prep, rbfn_cfg, seed)
    scores = score_sessions(prep, fix_model, sac_model)
    correct = sum(
        1
        for user in prep.classes
        if prep.classes[int(np.argmax(scores[user].p_final))] == user
    )
    return 100.0 * correct / len(prep.classes)


def run_identification(dataset: Dataset, cfg: ExperimentConfig, seed: int) -> float:
    """Full pipeline for one seed; see the module docstring for the protocol."""
    return identify_once(prepare_features(dataset, cfg), cfg.rbfn, seed)


def effective_jobs(jobs: int | None) -> int:
    if jobs is not None:
        return max(1, int(jobs))
    env = os.environ.get("GAZE_IDENT_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _run_seeds(
    prep: PreparedFeatures, cfg: ExperimentConfig, jobs: int
) -> ExperimentResult:
    if jobs == 1 or len(cfg.seeds) == 1:
        accuracies = [identify_once(prep, cfg.rbfn, s) for s in cfg.seeds]
    else:
        accuracies = Parallel(n_jobs=jobs)(
            delayed(identify_once)(prep, cfg.rbfn, s) for s in cfg.seeds
        )
    return ExperimentResult.from_accuracies(cfg, accuracies)


def run_experiment(
    dataset: Dataset, cfg: ExperimentConfig, jobs: int | None = 1
) -> ExperimentResult:
    """Map run_identification over cfg.seeds; features are prepared once."""
    prep = prepare_features(dataset, cfg)
    return _run_seeds(prep, cfg, effective_jobs(jobs))


@dataclass(frozen=True)
class DerivativeSweepRow:
    level: DerivativeLevel
    n_features: int
    result: ExperimentResult


def derivative_sweep(
    dataset: Dataset, base_cfg: ExperimentConfig, jobs: int | None = 1
) -> list[DerivativeSweepRow]:
    """Run the seed protocol at every derivative level 0..5."""
    jobs = effective_jobs(jobs)
    prep_full = prepare_features(dataset, replace(base_cfg, level=DerivativeLevel.CRACKLE))
    rows = []
    for level in DerivativeLevel:
        cfg = replace(base_cfg, level=level)
        result = _run_seeds(slice_level(prep_full, level), cfg, jobs)
        rows.append(
            DerivativeSweepRow(level=level, n_features=level.n_features, result=result)
        )
    return rows


@dataclass(frozen=True)
class FragmentCell:
    duration_s: float
    anchor: str
    level: DerivativeLevel
    result: ExperimentResult


@dataclass(frozen=True)
class FragmentBest:
    duration_s: float
    anchor: str
    best_level: DerivativeLevel
    result: ExperimentResult


@dataclass(frozen=True)
class FragmentSweepResult:
    cells: tuple[FragmentCell, ...]
    best: tuple[FragmentBest, ...]


def fragment_sweep(
    dataset: Dataset,
    base_cfg: ExperimentConfig,
    durations=FRAGMENT_GRID_S,
    jobs: int | None = 1,
) -> FragmentSweepResult:
    """Full duration x anchor x level grid, plus the best level per cell.

    Fragments longer than a recording fall back to the whole recording, so a
    grid entry beyond every trajectory reproduces the full-trajectory result.
    Ties on mean accuracy resolve to the lowest level.
    """
    jobs = effective_jobs(jobs)
    cells = []
    best = []
    for duration in durations:
        for anchor in ANCHORS:
            fragment = (float(duration), anchor)
            prep_full = prepare_features(
                dataset,
                replace(base_cfg, level=DerivativeLevel.CRACKLE, fragment=fragment),
            )
            cell_results = []
            for level in DerivativeLevel:
                cfg = replace(base_cfg, level=level, fragment=fragment)
                result = _run_seeds(slice_level(prep_full, level), cfg, jobs)
                cell = FragmentCell(
                    duration_s=float(duration), anchor=anchor, level=level, result=result
                )
                cells.append(cell)
                cell_results.append(cell)
            winner = max(cell_results, key=lambda c: c.result.mean)
            best.append(
                FragmentBest(
                    duration_s=float(duration),
                    anchor=anchor,
                    best_level=winner.level,
                    result=winner.result,
                )
            )
    return FragmentSweepResult(cells=tuple(cells), best=tuple(best))


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """JSON-friendly view of a config (enums to ints, tuples to lists)."""
    raw = asdict(cfg)
    raw["level"] = int(cfg.level)
    raw["seeds"] = list(cfg.seeds)
    raw["fragment"] = list(cfg.fragment) if cfg.fragment else None
    return raw


def result_to_dict(result: ExperimentResult) -> dict:
    return {
        "config": config_to_dict(result.config),
        "accuracies": list(result.accuracies),
        "mean": result.mean,
        "sd": result.sd,
    }


def write_json(payload: dict, path) -> None:
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def write_derivative_csv(rows: list[DerivativeSweepRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["level", "n_features", "mean", "sd"])
        for row in rows:
            writer.writerow(
                [int(row.level), row.n_features, repr(row.result.mean), repr(row.result.sd)]
            )


def write_fragment_csv(sweep: FragmentSweepResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["duration", "anchor", "best_level", "mean", "sd"])
        for entry in sweep.best:
            writer.writerow(
                [
                    repr(entry.duration_s),
                    entry.anchor,
                    int(entry.best_level),
                    repr(entry.result.mean),
                    repr(entry.result.sd),
                ]
            )


def derivative_sweep_to_dict(rows: list[DerivativeSweepRow]) -> dict:
    return {
        "rows": [
            {
                "level": int(r.level),
                "label": r.level.label,
                "n_features": r.n_features,
                **result_to_dict(r.result),
            }
            for r in rows
        ]
    }


def fragment_sweep_to_dict(sweep: FragmentSweepResult) -> dict:
    return {
        "cells": [
            {
                "duration": c.duration_s,
                "anchor": c.anchor,
                "level": int(c.level),
                **result_to_dict(c.result),
            }
            for c in sweep.cells
        ],
        "best": [
            {
                "duration": b.duration_s,
                "anchor": b.anchor,
                "best_level": int(b.best_level),
                "mean": b.result.mean,
                "sd": b.result.sd,
            }
            for b in sweep.best
        ],
    }


def smooth_dataset(dataset: Dataset, sg: SgConfig | None = None) -> Dataset:
    """Smooth every recording; convenience for sweeps outside the main runner."""
    sg = sg or SgConfig()
    recordings = tuple(
        Recording(
            user_id=rec.user_id,
            dataset_id=rec.dataset_id,
            session_id=rec.session_id,
            trajectory=smooth(rec.trajectory, sg),
        )
        for rec in dataset.recordings
    )
    return Dataset(recordings=recordings, manifest=dict(dataset.manifest))
