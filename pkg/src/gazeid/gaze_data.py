"""Gaze recording data model, on-disk dataset format, fragment cutting, resampling.

Positions are degrees of visual angle throughout; every trajectory is
uniformly sampled. The on-disk layout is::

    <root>/manifest.json                      rate_hz, units ("deg"), source
    <root>/<dataset_id>/<user_id>/<session>.csv   header "t,x,y", one sample per row

The directory name ``ground_truth`` is reserved for synthetic event logs and
is skipped by the loader.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterator

import numpy as np
import pandas as pd
from scipy.signal import firwin, upfirdn

SESSION_IDS = ("S1", "S2")
CSV_HEADER = "t,x,y"
MANIFEST_NAME = "manifest.json"
GROUND_TRUTH_DIR = "ground_truth"

#: Fragment durations (seconds) used by the fragment sweep harness.
FRAGMENT_GRID_S = (60.0, 80.0, 100.0, 120.0, 130.0, 140.0, 150.0)

# Uniform-sampling tolerance, relative to the sample period.
_DT_RTOL = 1e-9
# Largest admissible numerator/denominator of a reduced resampling ratio.
_MAX_RESAMPLE_TERM = 64


class ValidationError(ValueError):
    """Raised when data violates the gaze dataset contract."""


def _readonly(values) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GazeSample:
    """One gaze observation: time in seconds, position in degrees."""

    t: float
    x: float
    y: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled 2-D gaze signal.

    Arrays are read-only after construction; operations return new objects.
    """

    rate_hz: float
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", _readonly(self.t))
        object.__setattr__(self, "x", _readonly(self.x))
        object.__setattr__(self, "y", _readonly(self.y))
        if not (np.isfinite(self.rate_hz) and self.rate_hz > 0):
            raise ValidationError(f"rate_hz must be positive, got {self.rate_hz}")
        n = self.t.shape[0]
        if self.t.ndim != 1 or self.x.shape != (n,) or self.y.shape != (n,):
            raise ValidationError("t, x, y must be 1-d arrays of equal length")
        if n < 2:
            raise ValidationError(f"trajectory needs at least 2 samples, got {n}")
        if not (np.isfinite(self.x).all() and np.isfinite(self.y).all() and np.isfinite(self.t).all()):
            raise ValidationError("trajectory contains non-finite values")
        if self.t[0] < 0:
            raise ValidationError(f"timestamps must be non-negative, first is {self.t[0]}")
        dt = np.diff(self.t)
        err = np.abs(dt * self.rate_hz - 1.0)
        worst = int(np.argmax(err))
        if err[worst] > _DT_RTOL:
            raise ValidationError(
                f"non-uniform sampling at sample {worst + 1}: "
                f"step {dt[worst]:.9g}s vs expected {1.0 / self.rate_hz:.9g}s"
            )

    @classmethod
    def from_xy(cls, x, y, rate_hz: float) -> "Trajectory":
        """Build a trajectory with timestamps 0, 1/rate, 2/rate, ..."""
        x = np.asarray(x, dtype=np.float64)
        return cls(rate_hz=rate_hz, t=np.arange(x.shape[0]) / rate_hz, x=x, y=y)

    @property
    def n_samples(self) -> int:
        return self.t.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.rate_hz

    def samples(self) -> Iterator[GazeSample]:
        for t, x, y in zip(self.t, self.x, self.y):
            yield GazeSample(float(t), float(x), float(y))


@dataclass(frozen=True)
class Recording:
    """One user's session within a dataset."""

    user_id: str
    dataset_id: str
    session_id: str
    trajectory: Trajectory

    def __post_init__(self):
        if not self.user_id or not self.dataset_id:
            raise ValidationError("user_id and dataset_id must be non-empty")
        if self.session_id not in SESSION_IDS:
            raise ValidationError(
                f"session_id must be one of {SESSION_IDS}, got {self.session_id!r}"
            )

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.dataset_id, self.user_id, self.session_id)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Validated collection of paired-session recordings."""

    recordings: tuple[Recording, ...]
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "recordings", tuple(self.recordings))
        seen = set()
        for rec in self.recordings:
            if rec.key in seen:
                raise ValidationError(f"duplicate recording {rec.key}")
            seen.add(rec.key)
        by_session: dict[str, dict[str, set[str]]] = {}
        for rec in self.recordings:
            by_session.setdefault(rec.dataset_id, {}).setdefault(rec.user_id, set()).add(
                rec.session_id
            )
        for dataset_id, users in sorted(by_session.items()):
            for user_id, sessions in sorted(users.items()):
                missing = set(SESSION_IDS) - sessions
                if missing:
                    raise ValidationError(
                        f"user {user_id!r} in dataset {dataset_id!r} has sessions "
                        f"{sorted(sessions)} but is missing {sorted(missing)}"
                    )
        rate = self.manifest.get("rate_hz")
        if rate is not None:
            for rec in self.recordings:
                if abs(rec.trajectory.rate_hz - rate) > _DT_RTOL * rate:
                    raise ValidationError(
                        f"recording {rec.key} has rate {rec.trajectory.rate_hz}Hz, "
                        f"manifest declares {rate}Hz"
                    )

    def dataset_ids(self) -> list[str]:
        return sorted({rec.dataset_id for rec in self.recordings})

    def users(self, dataset_id: str | None = None) -> list[str]:
        return sorted(
            {
                rec.user_id
                for rec in self.recordings
                if dataset_id is None or rec.dataset_id == dataset_id
            }
        )

    def get(self, dataset_id: str, user_id: str, session_id: str) -> Recording:
        for rec in self.recordings:
            if rec.key == (dataset_id, user_id, session_id):
                return rec
        raise KeyError((dataset_id, user_id, session_id))

    def filter(self, dataset_id: str) -> "Dataset":
        recs = tuple(r for r in self.recordings if r.dataset_id == dataset_id)
        if not recs:
            raise ValidationError(f"no recordings for dataset_id {dataset_id!r}")
        return Dataset(recordings=recs, manifest=dict(self.manifest))


def _read_trajectory_csv(path: Path, rate_hz: float) -> Trajectory:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
    if header != CSV_HEADER:
        raise ValidationError(
            f"{path}: line 1: expected header {CSV_HEADER!r}, got {header!r}"
        )
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except Exception as exc:
        raise ValidationError(f"{path}: malformed CSV: {exc}") from None
    columns = {}
    for name in ("t", "x", "y"):
        col = pd.to_numeric(frame[name], errors="coerce").to_numpy(dtype=np.float64)
        bad = np.flatnonzero(~np.isfinite(col))
        if bad.size:
            raise ValidationError(
                f"{path}: line {int(bad[0]) + 2}: non-numeric or non-finite "
                f"value in column {name!r}"
            )
        columns[name] = col
    try:
        return Trajectory(rate_hz=rate_hz, t=columns["t"], x=columns["x"], y=columns["y"])
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def _read_manifest(root: Path) -> dict:
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ValidationError(f"missing manifest: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{manifest_path}: unparseable JSON: {exc}") from None
    rate = manifest.get("rate_hz")
    if not isinstance(rate, (int, float)) or rate <= 0:
        raise ValidationError(f"{manifest_path}: rate_hz must be a positive number")
    if manifest.get("units") != "deg":
        raise ValidationError(
            f"{manifest_path}: units must be 'deg', got {manifest.get('units')!r}"
        )
    return manifest


def load_dataset(root_path) -> Dataset:
    """Load and validate a dataset directory.

    Raises :class:`ValidationError` naming the offending file (and line for
    malformed rows) on any contract violation.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise ValidationError(f"dataset root is not a directory: {root}")
    manifest = _read_manifest(root)
    rate = float(manifest["rate_hz"])
    recordings = []
    for dataset_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        if dataset_dir.name == GROUND_TRUTH_DIR:
            continue
        for user_dir in sorted(p for p in dataset_dir.iterdir() if p.is_dir()):
            for csv_path in sorted(user_dir.glob("*.csv")):
                session_id = csv_path.stem
                if session_id not in SESSION_IDS:
                    raise ValidationError(
                        f"{csv_path}: session file must be one of "
                        f"{[s + '.csv' for s in SESSION_IDS]}"
                    )
                recordings.append(
                    Recording(
                        user_id=user_dir.name,
                        dataset_id=dataset_dir.name,
                        session_id=session_id,
                        trajectory=_read_trajectory_csv(csv_path, rate),
                    )
                )
    if not recordings:
        raise ValidationError(f"no recordings found under {root}")
    return Dataset(recordings=tuple(recordings), manifest=manifest)


def cut_fragment(traj: Trajectory, duration_s: float, anchor: str) -> Trajectory:
    """Cut a contiguous fragment of the given duration from one end.

    The fragment keeps ``n = floor(duration * rate)`` samples (tolerant of
    float fuzz in the product) and re-bases timestamps to start at 0. If the
    request covers the whole trajectory it is returned re-based, unchanged.
    """
    if anchor not in ("start", "end"):
        raise ValidationError(f"anchor must be 'start' or 'end', got {anchor!r}")
    if not duration_s > 0:
        raise ValidationError(f"fragment duration must be positive, got {duration_s}")
    n = int(math.floor(duration_s * traj.rate_hz + 1e-9))
    if n >= traj.n_samples:
        sel = slice(None)
        n = traj.n_samples
    elif anchor == "start":
        sel = slice(0, n)
    else:
        sel = slice(traj.n_samples - n, None)
    if n < 2:
        raise ValidationError(
            f"fragment of {duration_s}s at {traj.rate_hz}Hz has fewer than 2 samples"
        )
    return Trajectory(
        rate_hz=traj.rate_hz,
        t=np.arange(n) / traj.rate_hz,
        x=traj.x[sel],
        y=traj.y[sel],
    )


def _resample_ratio(source_hz: float, target_hz: float) -> tuple[int, int]:
    ratio = Fraction(target_hz / source_hz).limit_denominator(_MAX_RESAMPLE_TERM)
    if ratio <= 0 or abs(float(ratio) * source_hz - target_hz) > 1e-9 * target_hz:
        raise ValidationError(
            f"rate ratio {target_hz}/{source_hz} does not reduce to a rational "
            f"with terms <= {_MAX_RESAMPLE_TERM}"
        )
    return ratio.numerator, ratio.denominator


def _resample_channel(signal: np.ndarray, up: int, down: int, taps: np.ndarray) -> np.ndarray:
    # The channel mean is removed before filtering and restored afterwards so
    # constant signals pass through exactly (the FIR stopband leaves ~1e-3
    # imaging ripple on raw DC otherwise).
    half = (taps.size - 1) // 2
    mean = signal.mean()
    pad = -(-(half + down) // up) + 1
    padded = np.pad(signal - mean, pad, mode="reflect")
    filtered = upfirdn(taps * up, padded, up=up, down=1)
    n_out = -(-signal.size * up // down)
    idx = pad * up + np.arange(n_out) * down + half
    return filtered[idx] + mean


def resample(traj: Trajectory, target_rate_hz: float) -> Trajectory:
    """Polyphase rational downsampling with an anti-aliasing FIR filter.

    Upsample by L, apply a Hamming windowed-sinc low-pass with cutoff
    min(pi/L, pi/M) and 8*max(L, M)+1 taps (zero-phase: the symmetric filter's
    group delay is compensated by index alignment), downsample by M.
    """
    if not target_rate_hz > 0:
        raise ValidationError(f"target rate must be positive, got {target_rate_hz}")
    if target_rate_hz > traj.rate_hz * (1 + _DT_RTOL):
        raise ValidationError(
            f"only downsampling is supported: {traj.rate_hz}Hz -> {target_rate_hz}Hz"
        )
    up, down = _resample_ratio(traj.rate_hz, target_rate_hz)
    if up == down:
        return Trajectory(rate_hz=target_rate_hz, t=traj.t, x=traj.x, y=traj.y)
    n_taps = 8 * max(up, down) + 1
    taps = firwin(n_taps, 1.0 / max(up, down))  # Hamming window is firwin's default
    half = (n_taps - 1) // 2
    pad = -(-(half + down) // up) + 1
    if pad >= traj.n_samples:
        raise ValidationError(
            f"trajectory too short to resample: {traj.n_samples} samples, "
            f"filter needs {pad + 1}"
        )
    x = _resample_channel(traj.x, up, down, taps)
    y = _resample_channel(traj.y, up, down, taps)
    t = traj.t[0] + np.arange(x.size) / target_rate_hz
    return Trajectory(rate_hz=target_rate_hz, t=t, x=x, y=y)


def resample_dataset(dataset: Dataset, target_rate_hz: float) -> Dataset:
    """Resample every recording; returns a dataset with an updated manifest."""
    recordings = tuple(
        Recording(
            user_id=rec.user_id,
            dataset_id=rec.dataset_id,
            session_id=rec.session_id,
            trajectory=resample(rec.trajectory, target_rate_hz),
        )
        for rec in dataset.recordings
    )
    manifest = dict(dataset.manifest)
    manifest["rate_hz"] = target_rate_hz
    return Dataset(recordings=recordings, manifest=manifest)
