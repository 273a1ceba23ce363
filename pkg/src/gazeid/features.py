"""Per-segment feature extraction and z-score normalization.

Each segment yields 15 position features followed by one 18-wide block per
derivative order (1=velocity ... 5=crackle). A block holds the M3S2K
statistics (mean, median, max, std, skewness, kurtosis) of three channels:
the angular derivative magnitude, the x derivative, and the y derivative.
Order-k x/y channels are k-fold forward differences of the segment samples;
the angular channel chains k-1 forward differences after the angular
velocity. Segments with fewer than k+1 samples get zeros for block k.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .gaze_data import ValidationError
from .segmentation import FIXATION, SACCADE, SegmentedTrajectory

N_POSITION_FEATURES = 15
N_PER_DERIVATIVE = 18

POSITION_FEATURE_NAMES = (
    "duration",
    "path_length",
    "skew_x",
    "skew_y",
    "kurtosis_x",
    "kurtosis_y",
    "std_x",
    "std_y",
    "ratio",
    "angle",
    "amplitude",
    "dispersion",
    "dist_to_previous",
    "angle_with_previous",
    "average_speed",
)
STAT_NAMES = ("mean", "median", "max", "std", "skew", "kurtosis")
DERIVATIVE_ORDER_NAMES = ("velocity", "acceleration", "jerk", "jounce", "crackle")


class DerivativeLevel(IntEnum):
    """Highest derivative order whose statistics are included."""

    POSITION = 0
    VELOCITY = 1
    ACCELERATION = 2
    JERK = 3
    JOUNCE = 4
    CRACKLE = 5

    @property
    def n_features(self) -> int:
        return N_POSITION_FEATURES + N_PER_DERIVATIVE * int(self)

    @property
    def label(self) -> str:
        return f"{self.name.capitalize()} ({int(self)})"


def feature_names(level: DerivativeLevel) -> tuple[str, ...]:
    """Ordered column names for the given level."""
    names = list(POSITION_FEATURE_NAMES)
    for order in range(1, int(level) + 1):
        base = DERIVATIVE_ORDER_NAMES[order - 1]
        for channel in (f"angular_{base}", f"{base}_x", f"{base}_y"):
            names.extend(f"{stat}_{channel}" for stat in STAT_NAMES)
    return tuple(names)


def forward_diff(signal, rate_hz: float) -> np.ndarray:
    """First forward difference scaled to a rate: d[i] = (s[i+1]-s[i])*rate."""
    signal = np.asarray(signal, dtype=np.float64)
    if signal.size < 2:
        raise ValidationError(f"forward_diff needs at least 2 samples, got {signal.size}")
    return np.diff(signal) * rate_hz


def m3s2k(values) -> np.ndarray:
    """Mean, median, max, sample std, skewness (g1), excess kurtosis (g2).

    Degenerate conventions: std is 0 for a single value, skewness is 0 below
    3 values, kurtosis is 0 below 4 values, and all three are 0 when the
    values are identical.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValidationError("m3s2k requires a non-empty 1-d sequence")
    n = v.size
    mean = float(v.mean())
    median = float(np.median(v))
    largest = float(v.max())
    if n == 1 or np.ptp(v) == 0.0:
        return np.array([mean, median, largest, 0.0, 0.0, 0.0])
    std = float(v.std(ddof=1))
    centered = v - mean
    m2 = float(np.mean(centered**2))
    skew = float(np.mean(centered**3)) / m2**1.5 if n >= 3 and m2 > 0 else 0.0
    kurt = float(np.mean(centered**4)) / (m2 * m2) - 3.0 if n >= 4 and m2 > 0 else 0.0
    return np.array([mean, median, largest, std, skew, kurt])


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Rows of per-segment feature vectors with one user label per row."""

    values: np.ndarray
    labels: tuple[str, ...]
    kind: str
    level: DerivativeLevel

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", tuple(self.labels))
        if values.ndim != 2 or values.shape[1] != self.level.n_features:
            raise ValidationError(
                f"expected {self.level.n_features} columns for level {int(self.level)}, "
                f"got shape {values.shape}"
            )
        if len(self.labels) != values.shape[0]:
            raise ValidationError("one label per row required")
        if values.size and not np.isfinite(values).all():
            raise ValidationError("feature matrix contains non-finite values")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


def concat_matrices(matrices: Sequence[FeatureMatrix]) -> FeatureMatrix:
    if not matrices:
        raise ValidationError("cannot concatenate zero matrices")
    kind, level = matrices[0].kind, matrices[0].level
    if any(m.kind != kind or m.level != level for m in matrices):
        raise ValidationError("matrices must share kind and level")
    return FeatureMatrix(
        values=np.vstack([m.values for m in matrices]),
        labels=tuple(label for m in matrices for label in m.labels),
        kind=kind,
        level=level,
    )


def _displacement_angle(dx: float, dy: float) -> float:
    """Orientation of a displacement in (-pi, pi], 0 for zero displacement."""
    if dx == 0.0 and dy == 0.0:
        return 0.0
    angle = float(np.arctan2(dy, dx))
    return np.pi if angle == -np.pi else angle


def _angle_between(u: np.ndarray, v: np.ndarray) -> float:
    """Absolute angle between two vectors in [0, pi], 0 if either is zero."""
    nu = float(np.hypot(u[0], u[1]))
    nv = float(np.hypot(v[0], v[1]))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    cos = (u[0] * v[0] + u[1] * v[1]) / (nu * nv)
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


def _segment_row(
    sx: np.ndarray,
    sy: np.ndarray,
    rate: float,
    duration: float,
    prev_centroid: np.ndarray | None,
    prev_disp: np.ndarray | None,
    level: DerivativeLevel,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    row = np.zeros(level.n_features)
    n = sx.size
    steps = np.hypot(np.diff(sx), np.diff(sy))
    path_length = float(steps.sum())
    stats_x = m3s2k(sx)
    stats_y = m3s2k(sy)
    disp = np.array([sx[-1] - sx[0], sy[-1] - sy[0]])
    centroid = np.array([sx.mean(), sy.mean()])

    row[0] = duration
    row[1] = path_length
    row[2] = stats_x[4]
    row[3] = stats_y[4]
    row[4] = stats_x[5]
    row[5] = stats_y[5]
    row[6] = stats_x[3]
    row[7] = stats_y[3]
    velocity = steps * rate
    row[8] = float(velocity.max()) / duration if velocity.size else 0.0
    row[9] = _displacement_angle(disp[0], disp[1])
    row[10] = float(np.hypot(disp[0], disp[1]))
    row[11] = float(np.ptp(sx) + np.ptp(sy))
    row[12] = (
        float(np.hypot(*(centroid - prev_centroid))) if prev_centroid is not None else 0.0
    )
    row[13] = _angle_between(prev_disp, disp) if prev_disp is not None else 0.0
    row[14] = path_length / duration

    col = N_POSITION_FEATURES
    dx = np.diff(sx) * rate
    dy = np.diff(sy) * rate
    angular = velocity
    for order in range(1, int(level) + 1):
        if n >= order + 1:
            row[col : col + 6] = m3s2k(angular)
            row[col + 6 : col + 12] = m3s2k(dx)
            row[col + 12 : col + 18] = m3s2k(dy)
        col += N_PER_DERIVATIVE
        if order < int(level) and n >= order + 2:
            dx = np.diff(dx) * rate
            dy = np.diff(dy) * rate
            angular = np.diff(angular) * rate
    return row, centroid, disp


def extract_features(
    seg_traj: SegmentedTrajectory,
    level: DerivativeLevel,
    user_id: str = "",
) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Feature matrices (fixations, saccades) for one segmented trajectory.

    Rows follow segment order; the previous-segment features (13, 14) look at
    the immediately preceding segment of either kind.
    """
    level = DerivativeLevel(level)
    traj = seg_traj.trajectory
    fix_rows: list[np.ndarray] = []
    sac_rows: list[np.ndarray] = []
    prev_centroid: np.ndarray | None = None
    prev_disp: np.ndarray | None = None
    for seg in seg_traj.segments:
        sx = traj.x[seg.start_idx : seg.end_idx]
        sy = traj.y[seg.start_idx : seg.end_idx]
        row, prev_centroid, prev_disp = _segment_row(
            sx, sy, traj.rate_hz, seg.duration_s, prev_centroid, prev_disp, level
        )
        (fix_rows if seg.kind == FIXATION else sac_rows).append(row)

    def build(rows: list[np.ndarray], kind: str) -> FeatureMatrix:
        values = np.vstack(rows) if rows else np.empty((0, level.n_features))
        return FeatureMatrix(
            values=values, labels=(user_id,) * len(rows), kind=kind, level=level
        )

    return build(fix_rows, FIXATION), build(sac_rows, SACCADE)


@dataclass(frozen=True, eq=False)
class ZScoreParams:
    """Per-column mean/std learned from training rows; constant columns flagged."""

    mean: np.ndarray
    std: np.ndarray
    flagged: np.ndarray

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]


def zscore_fit(train: FeatureMatrix) -> ZScoreParams:
    """Column means and sample stds from training rows only."""
    if train.n_rows == 0:
        raise ValidationError("zscore_fit requires a non-empty training matrix")
    values = train.values
    mean = values.mean(axis=0)
    flagged = np.ptp(values, axis=0) == 0.0
    std = np.where(flagged, 0.0, values.std(axis=0, ddof=1) if train.n_rows > 1 else 0.0)
    flagged = flagged | (std == 0.0)
    return ZScoreParams(mean=mean, std=np.where(flagged, 0.0, std), flagged=flagged)


def zscore_apply(params: ZScoreParams, matrix: FeatureMatrix) -> FeatureMatrix:
    """Map each value to (v - mean)/std; flagged columns map to 0."""
    if matrix.n_features != params.n_features:
        raise ValidationError(
            f"matrix has {matrix.n_features} columns, params expect {params.n_features}"
        )
    safe_std = np.where(params.flagged, 1.0, params.std)
    values = (matrix.values - params.mean) / safe_std
    values[:, params.flagged] = 0.0
    return FeatureMatrix(
        values=values, labels=matrix.labels, kind=matrix.kind, level=matrix.level
    )


def write_features_csv(
    rows: Iterable[tuple[str, str, str, np.ndarray]], level: DerivativeLevel, path
) -> None:
    """Dump feature rows as ``user,session,kind,f1..fN``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["user", "session", "kind"] + [f"f{i + 1}" for i in range(level.n_features)]
        )
        for user, session, kind, values in rows:
            writer.writerow([user, session, kind] + [repr(float(v)) for v in values])
