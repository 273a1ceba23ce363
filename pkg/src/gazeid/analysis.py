"""Feature ranking by one-way ANOVA F-score and duration summaries.

Rankings group segment rows by user over merged sessions; a zero
within-group variance with nonzero between-group variance yields an infinite
(flagged) score that sorts above every finite one.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .features import FeatureMatrix, feature_names
from .gaze_data import Dataset, ValidationError
from .preprocess import SgConfig, smooth
from .segmentation import FIXATION, SACCADE, IvtConfig, ivt_segment


def anova_f(values, groups) -> float:
    """One-way ANOVA F: between-group mean square over within-group mean square.

    Conventions: 0 when both mean squares vanish, +inf when only the
    within-group one does.
    """
    values = np.asarray(values, dtype=np.float64)
    groups = np.asarray(groups)
    if values.ndim != 1 or values.shape != groups.shape:
        raise ValidationError("values and groups must be equal-length 1-d sequences")
    labels, inverse = np.unique(groups, return_inverse=True)
    n = values.size
    g = labels.size
    if g < 2:
        raise ValidationError(f"need at least 2 groups, got {g}")
    if n <= g:
        raise ValidationError(f"need more values ({n}) than groups ({g})")
    grand_mean = values.mean()
    ssb = 0.0
    ssw = 0.0
    for i in range(g):
        member = values[inverse == i]
        mean = member.mean()
        ssb += member.size * (mean - grand_mean) ** 2
        ssw += float(np.sum((member - mean) ** 2))
    ms_between = ssb / (g - 1)
    ms_within = ssw / (n - g)
    if ms_within == 0.0:
        return 0.0 if ms_between == 0.0 else math.inf
    return float(ms_between / ms_within)


@dataclass(frozen=True)
class FeatureRanking:
    """Descending (feature name, F-score) lists per segment kind."""

    fixation: tuple[tuple[str, float], ...]
    saccade: tuple[tuple[str, float], ...]


def _rank_matrix(matrix: FeatureMatrix, labels: Sequence[str]) -> tuple[tuple[str, float], ...]:
    names = feature_names(matrix.level)
    scored = [
        (name, anova_f(matrix.values[:, i], labels)) for i, name in enumerate(names)
    ]
    # Stable sort keeps original column order among ties; inf sorts first.
    return tuple(sorted(scored, key=lambda item: item[1], reverse=True))


def rank_features(
    fix_matrix: FeatureMatrix,
    sac_matrix: FeatureMatrix,
    labels: tuple[Sequence[str], Sequence[str]] | None = None,
) -> FeatureRanking:
    """Rank every column of both matrices; labels default to the matrices' own."""
    fix_labels, sac_labels = labels if labels is not None else (
        fix_matrix.labels,
        sac_matrix.labels,
    )
    return FeatureRanking(
        fixation=_rank_matrix(fix_matrix, fix_labels),
        saccade=_rank_matrix(sac_matrix, sac_labels),
    )


@dataclass(frozen=True)
class DurationSummaryRow:
    user: str
    mean_fix_s: float | None
    mean_sac_s: float | None


def duration_summary(
    dataset: Dataset,
    ivt: IvtConfig | None = None,
    sg: SgConfig | None = None,
) -> list[DurationSummaryRow]:
    """Per-user mean fixation and saccade durations over merged sessions.

    A user without segments of one kind gets None for that mean (written as
    an empty CSV field).
    """
    ivt = ivt or IvtConfig()
    sg = sg or SgConfig()
    multi = len(dataset.dataset_ids()) > 1
    durations: dict[str, dict[str, list[float]]] = {}
    for rec in sorted(dataset.recordings, key=lambda r: r.key):
        user = f"{rec.dataset_id}:{rec.user_id}" if multi else rec.user_id
        seg_traj = ivt_segment(smooth(rec.trajectory, sg), ivt)
        bucket = durations.setdefault(user, {FIXATION: [], SACCADE: []})
        for seg in seg_traj.segments:
            bucket[seg.kind].append(seg.duration_s)
    rows = []
    for user in sorted(durations):
        bucket = durations[user]
        rows.append(
            DurationSummaryRow(
                user=user,
                mean_fix_s=float(np.mean(bucket[FIXATION])) if bucket[FIXATION] else None,
                mean_sac_s=float(np.mean(bucket[SACCADE])) if bucket[SACCADE] else None,
            )
        )
    return rows


def write_ranking_csv(ranking: FeatureRanking, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank", "kind", "feature", "score"])
        for kind, entries in ((FIXATION, ranking.fixation), (SACCADE, ranking.saccade)):
            for rank, (name, score) in enumerate(entries, start=1):
                writer.writerow([rank, kind, name, "inf" if math.isinf(score) else repr(score)])


def write_duration_csv(rows: list[DurationSummaryRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["user", "mean_fix_s", "mean_sac_s"])
        for row in rows:
            writer.writerow(
                [
                    row.user,
                    "" if row.mean_fix_s is None else repr(row.mean_fix_s),
                    "" if row.mean_sac_s is None else repr(row.mean_sac_s),
                ]
            )
