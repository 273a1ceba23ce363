"""Savitzky-Golay noise reduction for gaze trajectories.

The x and y channels are smoothed independently with the central-point
least-squares polynomial weights; edges use mirror padding so the output
keeps the input length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaze_data import Trajectory, ValidationError


@dataclass(frozen=True)
class SgConfig:
    """Polynomial order and odd frame size of the smoother."""

    poly_order: int = 6
    frame_size: int = 15

    def __post_init__(self):
        if self.poly_order < 0:
            raise ValidationError(f"poly_order must be >= 0, got {self.poly_order}")
        if self.frame_size < 1 or self.frame_size % 2 == 0:
            raise ValidationError(f"frame_size must be odd and positive, got {self.frame_size}")
        if self.poly_order >= self.frame_size:
            raise ValidationError(
                f"poly_order ({self.poly_order}) must be < frame_size ({self.frame_size})"
            )


def savgol_coefficients(cfg: SgConfig) -> np.ndarray:
    """Central-point convolution weights of the least-squares smoother.

    The weights reproduce any polynomial of degree <= poly_order at the window
    center; they sum to 1 and are symmetric. Nodes are scaled to [-1, 1]
    before solving so the Vandermonde system stays well conditioned.
    """
    half = cfg.frame_size // 2
    nodes = np.arange(-half, half + 1) / max(half, 1)
    design = np.vander(nodes, cfg.poly_order + 1, increasing=True)
    weights = np.linalg.pinv(design)[0]
    # The exact weights are symmetric; fold out residual numeric asymmetry.
    return (weights + weights[::-1]) / 2


def smooth_signal(signal: np.ndarray, cfg: SgConfig) -> np.ndarray:
    """Smooth one channel; mirror-pads half a window at each edge."""
    signal = np.asarray(signal, dtype=np.float64)
    if signal.size < cfg.frame_size:
        raise ValidationError(
            f"signal of length {signal.size} is shorter than frame_size {cfg.frame_size}"
        )
    half = cfg.frame_size // 2
    padded = np.pad(signal, half, mode="reflect")
    return np.convolve(padded, savgol_coefficients(cfg), mode="valid")


def smooth(traj: Trajectory, cfg: SgConfig | None = None) -> Trajectory:
    """Smooth both position channels; timestamps and rate are unchanged."""
    cfg = cfg or SgConfig()
    return Trajectory(
        rate_hz=traj.rate_hz,
        t=traj.t,
        x=smooth_signal(traj.x, cfg),
        y=smooth_signal(traj.y, cfg),
    )
