"""IVT segmentation of gaze trajectories into fixations and saccades.

Inter-sample intervals are labelled low/high against a velocity threshold;
maximal low runs lasting at least the minimum fixation duration become
fixations, everything else (high runs and short low runs) is merged into
maximal saccades. A sample belongs to the segment of the interval it starts;
the final sample joins the last segment.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .gaze_data import Dataset, Trajectory, ValidationError

FIXATION = "fixation"
SACCADE = "saccade"

#: Velocity-threshold grid (deg/s) of the fixation-count sweep.
DEFAULT_VT_GRID = tuple(float(v) for v in range(1, 151))


@dataclass(frozen=True)
class IvtConfig:
    """Velocity threshold (deg/s) and minimum fixation duration (s)."""

    vt_deg_per_s: float = 90.0
    mfd_s: float = 0.096

    def __post_init__(self):
        if not self.vt_deg_per_s > 0:
            raise ValidationError(f"vt_deg_per_s must be positive, got {self.vt_deg_per_s}")
        if not self.mfd_s > 0:
            raise ValidationError(f"mfd_s must be positive, got {self.mfd_s}")


@dataclass(frozen=True)
class Segment:
    """A classified run of samples, indexed [start_idx, end_idx)."""

    kind: str
    start_idx: int
    end_idx: int
    duration_s: float

    def __post_init__(self):
        if self.kind not in (FIXATION, SACCADE):
            raise ValidationError(f"segment kind must be fixation/saccade, got {self.kind!r}")
        if not self.start_idx < self.end_idx:
            raise ValidationError(f"empty segment [{self.start_idx}, {self.end_idx})")

    @property
    def n_samples(self) -> int:
        return self.end_idx - self.start_idx


@dataclass(frozen=True)
class SegmentedTrajectory:
    """Trajectory plus its ordered, gap-free segment cover."""

    trajectory: Trajectory
    config: IvtConfig
    segments: tuple[Segment, ...]

    def __post_init__(self):
        cursor = 0
        for seg in self.segments:
            if seg.start_idx != cursor:
                raise ValidationError(
                    f"segments must cover all samples without gaps or overlaps; "
                    f"expected start {cursor}, got {seg.start_idx}"
                )
            cursor = seg.end_idx
        if cursor != self.trajectory.n_samples:
            raise ValidationError(
                f"segments end at {cursor}, trajectory has {self.trajectory.n_samples} samples"
            )

    def fixations(self) -> tuple[Segment, ...]:
        return tuple(s for s in self.segments if s.kind == FIXATION)

    def saccades(self) -> tuple[Segment, ...]:
        return tuple(s for s in self.segments if s.kind == SACCADE)


def angular_velocity(traj: Trajectory) -> np.ndarray:
    """Forward-difference speed (deg/s) of each inter-sample interval."""
    return np.hypot(np.diff(traj.x), np.diff(traj.y)) * traj.rate_hz


def _low_runs(low: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Starts and (exclusive) ends of maximal equal-label runs."""
    change = np.flatnonzero(low[1:] != low[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [low.size]))
    return starts, ends


def ivt_segment(traj: Trajectory, cfg: IvtConfig | None = None) -> SegmentedTrajectory:
    """Segment a trajectory into fixations and saccades."""
    cfg = cfg or IvtConfig()
    velocity = angular_velocity(traj)
    low = velocity < cfg.vt_deg_per_s
    starts, ends = _low_runs(low)
    segments: list[list] = []  # [kind, start_interval, end_interval]
    for start, end in zip(starts, ends):
        is_fix = bool(low[start]) and (end - start) / traj.rate_hz >= cfg.mfd_s
        kind = FIXATION if is_fix else SACCADE
        if segments and kind == SACCADE and segments[-1][0] == SACCADE:
            segments[-1][2] = end
        else:
            segments.append([kind, int(start), int(end)])
    segments[-1][2] = traj.n_samples  # final sample joins the last segment
    rate = traj.rate_hz
    built = tuple(
        Segment(kind=kind, start_idx=s, end_idx=e, duration_s=(e - s) / rate)
        for kind, s, e in segments
    )
    return SegmentedTrajectory(trajectory=traj, config=cfg, segments=built)


def count_fixations(traj: Trajectory, vt_deg_per_s: float, mfd_s: float) -> int:
    """Number of fixation segments, without building the segment objects."""
    velocity = angular_velocity(traj)
    low = velocity < vt_deg_per_s
    starts, ends = _low_runs(low)
    lengths = ends - starts
    return int(np.sum(low[starts] & (lengths / traj.rate_hz >= mfd_s)))


def vt_sweep(
    dataset: Dataset,
    vt_values: Sequence[float] | None = None,
    mfd_s: float = 0.096,
) -> dict[float, float]:
    """Mean fixation count per velocity threshold.

    Counts are summed over each user's sessions, then averaged over users.
    Trajectories are segmented as given; smooth the dataset first to match
    the identification pipeline.
    """
    if not dataset.recordings:
        raise ValidationError("vt_sweep requires a non-empty dataset")
    vt_values = tuple(vt_values) if vt_values is not None else DEFAULT_VT_GRID
    user_keys = sorted({(r.dataset_id, r.user_id) for r in dataset.recordings})
    result: dict[float, float] = {}
    for vt in vt_values:
        per_user = {key: 0 for key in user_keys}
        for rec in dataset.recordings:
            per_user[(rec.dataset_id, rec.user_id)] += count_fixations(
                rec.trajectory, vt, mfd_s
            )
        result[float(vt)] = float(np.mean([per_user[key] for key in user_keys]))
    return result


def write_segments_csv(seg_traj: SegmentedTrajectory, path) -> None:
    """Dump segments as ``kind,start_idx,end_idx,duration_s`` rows."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "start_idx", "end_idx", "duration_s"])
        for seg in seg_traj.segments:
            writer.writerow([seg.kind, seg.start_idx, seg.end_idx, repr(seg.duration_s)])


def write_vt_sweep_csv(sweep: Mapping[float, float], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["vt", "mean_fixations"])
        for vt, count in sweep.items():
            writer.writerow([repr(float(vt)), repr(float(count))])
