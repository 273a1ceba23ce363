"""Seeded synthetic gaze generator with per-user behavioral signatures.

Each user gets a profile (typical fixation duration, fixation jitter,
saccade amplitude, and peak-velocity scale) drawn deterministically from the
dataset seed; profile values are stratified across users so every pair is
separated in every parameter. A session alternates fixations (a point plus
temporally smoothed Gaussian jitter) with minimum-jerk saccades whose
duration is set from the profile's peak-velocity scale. Both sessions share
the profile; they differ only through per-session RNG streams.

Alongside the trajectory the generator records the ground-truth event
sequence, written as ``ground_truth/<user>/<session>.csv`` next to the
dataset layout.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .gaze_data import (
    CSV_HEADER,
    GROUND_TRUTH_DIR,
    MANIFEST_NAME,
    SESSION_IDS,
    Dataset,
    Recording,
    Trajectory,
    ValidationError,
)
from .segmentation import FIXATION, SACCADE

PROFILE_RANGES = {
    "mean_fix_duration_s": (0.15, 0.6),
    "fix_jitter_deg": (0.01, 0.2),
    "mean_sac_amplitude_deg": (2.0, 15.0),
    "sac_peak_velocity_scale": (20.0, 60.0),
}

# Event-level variation (scaled by session_noise_scale) and physical floors.
_DURATION_SD_FRAC = 0.2
_AMPLITUDE_SD_FRAC = 0.2
_VPEAK_SD_FRAC = 0.08
_FIX_DURATION_MIN_S = 0.13  # above the 96 ms minimum fixation duration
_SAC_AMPLITUDE_MIN_DEG = 2.0
# Peak of the minimum-jerk velocity bell: max of 30*tau^2*(1-tau)^2 over [0,1].
_MINJERK_PEAK = 1.875
# Saccade peaks are floored well above VT=90 deg/s so smoothing cannot push
# them below the threshold (the Savitzky-Golay defaults attenuate the
# shortest bells by ~25%).
_VPEAK_FLOOR = 180.0
_VPEAK_CAP = 1000.0
_SAC_MIN_SAMPLES = 4
_JITTER_WINDOW_S = 0.08
_FIELD_HALF_DEG = 25.0
_START_HALF_DEG = 10.0
_PROFILE_TAG = 101
_SESSION_TAG = 202


@dataclass(frozen=True)
class UserProfile:
    """Behavioral signature of one synthetic user."""

    mean_fix_duration_s: float
    fix_jitter_deg: float
    mean_sac_amplitude_deg: float
    sac_peak_velocity_scale: float
    seed: int

    def __post_init__(self):
        for name, (low, high) in PROFILE_RANGES.items():
            value = getattr(self, name)
            if not (low <= value <= high):
                raise ValidationError(f"{name}={value} outside [{low}, {high}]")


@dataclass(frozen=True)
class SynthConfig:
    n_users: int
    duration_s: float
    rate_hz: float = 200.0
    seed: int = 0
    session_noise_scale: float = 1.0
    dataset_id: str = "SYN"

    def __post_init__(self):
        if self.n_users < 2:
            raise ValidationError(f"n_users must be >= 2, got {self.n_users}")
        if self.duration_s < 10:
            raise ValidationError(f"duration_s must be >= 10, got {self.duration_s}")
        if not self.rate_hz > 0:
            raise ValidationError(f"rate_hz must be positive, got {self.rate_hz}")
        if self.seed < 0:
            raise ValidationError(f"seed must be non-negative, got {self.seed}")
        if self.session_noise_scale < 0:
            raise ValidationError("session_noise_scale must be >= 0")


@dataclass(frozen=True)
class TruthEvent:
    kind: str
    start_t: float
    end_t: float


GroundTruth = dict[tuple[str, str], tuple[TruthEvent, ...]]


def _user_ids(n_users: int) -> list[str]:
    width = max(2, len(str(n_users)))
    return [f"u{i + 1:0{width}d}" for i in range(n_users)]


def draw_profiles(cfg: SynthConfig) -> list[UserProfile]:
    """Stratified profile draw: each parameter range is split into n_users
    bins assigned by a seeded permutation, so users never share a bin."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _PROFILE_TAG]))
    n = cfg.n_users
    columns = {}
    for name, (low, high) in PROFILE_RANGES.items():
        bins = rng.permutation(n)
        offsets = rng.uniform(0.0, 1.0, n)
        columns[name] = low + (bins + offsets) * (high - low) / n
    return [
        UserProfile(
            mean_fix_duration_s=float(columns["mean_fix_duration_s"][i]),
            fix_jitter_deg=float(columns["fix_jitter_deg"][i]),
            mean_sac_amplitude_deg=float(columns["mean_sac_amplitude_deg"][i]),
            sac_peak_velocity_scale=float(columns["sac_peak_velocity_scale"][i]),
            seed=int(rng.integers(0, 2**63 - 1)),
        )
        for i in range(n)
    ]


def _smoothed_jitter(rng: np.random.Generator, n: int, sigma: float, window: int) -> np.ndarray:
    """Zero-mean jitter with marginal std sigma but low sample-to-sample
    velocity (moving average of white noise over the window)."""
    raw = rng.standard_normal(n + window - 1) * (sigma * math.sqrt(window))
    return np.convolve(raw, np.ones(window) / window, mode="valid")


def _min_jerk_fractions(n: int) -> np.ndarray:
    tau = np.arange(1, n + 1) / (n + 1)
    return 10 * tau**3 - 15 * tau**4 + 6 * tau**5


def _clipped_normal(rng, mean: float, sd: float, low: float, high: float) -> float:
    return float(np.clip(rng.normal(mean, sd) if sd > 0 else mean, low, high))


def _saccade_target(rng, pos: np.ndarray, amplitude: float) -> np.ndarray:
    for _ in range(32):
        theta = rng.uniform(0.0, 2.0 * math.pi)
        target = pos + amplitude * np.array([math.cos(theta), math.sin(theta)])
        if np.all(np.abs(target) <= _FIELD_HALF_DEG):
            return target
    # Aim back toward the center when the position is boxed in.
    direction = -pos / max(float(np.hypot(pos[0], pos[1])), 1e-9)
    return pos + amplitude * direction


def _generate_session(
    profile: UserProfile, cfg: SynthConfig, user_idx: int, session_idx: int
) -> tuple[Trajectory, tuple[TruthEvent, ...]]:
    rng = np.random.default_rng(
        np.random.SeedSequence([cfg.seed, _SESSION_TAG, user_idx, session_idx])
    )
    rate = cfg.rate_hz
    n_total = int(round(cfg.duration_s * rate))
    window = max(2, int(round(_JITTER_WINDOW_S * rate)))
    noise = cfg.session_noise_scale

    fix_sd = _DURATION_SD_FRAC * profile.mean_fix_duration_s * noise
    amp_sd = _AMPLITUDE_SD_FRAC * profile.mean_sac_amplitude_deg * noise

    pos = rng.uniform(-_START_HALF_DEG, _START_HALF_DEG, 2)
    blocks_x: list[np.ndarray] = []
    blocks_y: list[np.ndarray] = []
    events: list[TruthEvent] = []
    cursor = 0
    while cursor < n_total:
        duration = _clipped_normal(
            rng,
            profile.mean_fix_duration_s,
            fix_sd,
            _FIX_DURATION_MIN_S,
            profile.mean_fix_duration_s + 3 * fix_sd + 1e-12,
        )
        n_fix = max(int(round(duration * rate)), int(math.ceil(_FIX_DURATION_MIN_S * rate)))
        blocks_x.append(pos[0] + _smoothed_jitter(rng, n_fix, profile.fix_jitter_deg, window))
        blocks_y.append(pos[1] + _smoothed_jitter(rng, n_fix, profile.fix_jitter_deg, window))
        events.append(TruthEvent(FIXATION, cursor / rate, (cursor + n_fix) / rate))
        cursor += n_fix
        if cursor >= n_total:
            break

        amplitude = _clipped_normal(
            rng,
            profile.mean_sac_amplitude_deg,
            amp_sd,
            _SAC_AMPLITUDE_MIN_DEG,
            profile.mean_sac_amplitude_deg + 3 * amp_sd + 1e-12,
        )
        target = _saccade_target(rng, pos, amplitude)
        v_peak = float(
            np.clip(
                profile.sac_peak_velocity_scale
                * amplitude
                * (rng.normal(1.0, _VPEAK_SD_FRAC * noise) if noise > 0 else 1.0),
                _VPEAK_FLOOR,
                _VPEAK_CAP,
            )
        )
        n_sac = max(int(round(_MINJERK_PEAK * amplitude / v_peak * rate)), _SAC_MIN_SAMPLES)
        fractions = _min_jerk_fractions(n_sac)
        blocks_x.append(pos[0] + (target[0] - pos[0]) * fractions)
        blocks_y.append(pos[1] + (target[1] - pos[1]) * fractions)
        events.append(TruthEvent(SACCADE, cursor / rate, (cursor + n_sac) / rate))
        cursor += n_sac
        pos = target

    x = np.concatenate(blocks_x)[:n_total]
    y = np.concatenate(blocks_y)[:n_total]
    end_t = n_total / rate
    trimmed = [e for e in events if e.start_t < end_t]
    if trimmed and trimmed[-1].end_t > end_t:
        last = trimmed[-1]
        trimmed[-1] = TruthEvent(last.kind, last.start_t, end_t)
    return Trajectory.from_xy(x, y, rate), tuple(trimmed)


def generate_with_truth(cfg: SynthConfig) -> tuple[Dataset, GroundTruth]:
    """Deterministic dataset plus the ground-truth event log per session."""
    profiles = draw_profiles(cfg)
    recordings = []
    truth: GroundTruth = {}
    for user_idx, (user_id, profile) in enumerate(zip(_user_ids(cfg.n_users), profiles)):
        for session_idx, session_id in enumerate(SESSION_IDS):
            traj, events = _generate_session(profile, cfg, user_idx, session_idx)
            recordings.append(
                Recording(
                    user_id=user_id,
                    dataset_id=cfg.dataset_id,
                    session_id=session_id,
                    trajectory=traj,
                )
            )
            truth[(user_id, session_id)] = events
    manifest = {
        "rate_hz": cfg.rate_hz,
        "units": "deg",
        "source": f"synthetic gaze generator (seed={cfg.seed}, n_users={cfg.n_users})",
    }
    return Dataset(recordings=tuple(recordings), manifest=manifest), truth


def generate(cfg: SynthConfig) -> Dataset:
    """Deterministic synthetic dataset; see generate_with_truth for event logs."""
    return generate_with_truth(cfg)[0]


def write_dataset(
    dataset: Dataset, root_path, truth: GroundTruth | None = None, force: bool = False
) -> None:
    """Write the dataset directory layout; the loader is its exact inverse.

    Refuses to write into an existing non-empty directory unless forced.
    """
    root = Path(root_path)
    if root.exists():
        if not root.is_dir():
            raise FileExistsError(f"{root} exists and is not a directory")
        if any(root.iterdir()) and not force:
            raise FileExistsError(
                f"refusing to write into non-empty directory {root} (use force)"
            )
    root.mkdir(parents=True, exist_ok=True)
    manifest = dict(dataset.manifest)
    rates = {rec.trajectory.rate_hz for rec in dataset.recordings}
    if "rate_hz" not in manifest:
        if len(rates) != 1:
            raise ValidationError(f"cannot infer manifest rate from rates {sorted(rates)}")
        manifest["rate_hz"] = rates.pop()
    manifest.setdefault("units", "deg")
    manifest.setdefault("source", "unspecified")
    (root / MANIFEST_NAME).write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    for rec in sorted(dataset.recordings, key=lambda r: r.key):
        rec_dir = root / rec.dataset_id / rec.user_id
        rec_dir.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(
            {"t": rec.trajectory.t, "x": rec.trajectory.x, "y": rec.trajectory.y}
        )
        frame.to_csv(rec_dir / f"{rec.session_id}.csv", index=False, lineterminator="\n")
    if truth is not None:
        write_ground_truth(truth, root)


def write_ground_truth(truth: GroundTruth, root_path) -> None:
    """Write ``ground_truth/<user>/<session>.csv`` event logs."""
    root = Path(root_path) / GROUND_TRUTH_DIR
    for (user_id, session_id), events in sorted(truth.items()):
        user_dir = root / user_id
        user_dir.mkdir(parents=True, exist_ok=True)
        with open(user_dir / f"{session_id}.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["kind", "start_t", "end_t"])
            for event in events:
                writer.writerow([event.kind, repr(event.start_t), repr(event.end_t)])
