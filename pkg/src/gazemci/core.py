"""Shared domain types and experiment constants.

All types here are immutable value objects; downstream stages produce
updated copies via ``dataclasses.replace`` instead of mutating.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

# Fixed-length contract for the recurrent path input.
TIME_STEPS = 107
N_CHANNELS = 6


class Group(str, enum.Enum):
    HC = "HC"
    MCI = "MCI"


class QcStatus(str, enum.Enum):
    RAW = "Raw"
    ACCEPTED = "Accepted"
    REJECTED_MISSING = "RejectedMissing"
    REJECTED_GAP = "RejectedGap"


@dataclass(frozen=True)
class ScreenGeometry:
    """Task display geometry: stimulus image centered on the screen."""

    width_px: int = 1600
    height_px: int = 900
    image_side_px: int = 700
    # Degree-to-pixel factor; assumes ~60 cm viewing distance on a 17" monitor.
    px_per_degree: float = 44.0

    def __post_init__(self) -> None:
        if self.image_side_px > min(self.width_px, self.height_px):
            raise ValueError("stimulus image does not fit inside the screen")
        if self.px_per_degree <= 0:
            raise ValueError("px_per_degree must be positive")

    @property
    def image_origin(self) -> tuple[float, float]:
        """Top-left corner of the centered stimulus, in screen pixels."""
        return (
            (self.width_px - self.image_side_px) / 2.0,
            (self.height_px - self.image_side_px) / 2.0,
        )

    def in_image(self, x: float, y: float) -> bool:
        x0, y0 = self.image_origin
        return x0 <= x <= x0 + self.image_side_px and y0 <= y <= y0 + self.image_side_px


@dataclass(frozen=True)
class GazeSample:
    """One binocular sample; ``valid=False`` marks device dropout."""

    t_ms: float
    gx_r: float
    gy_r: float
    gx_l: float
    gy_l: float
    pupil_r: float
    pupil_l: float
    valid: bool

    def cyclopean(self) -> tuple[float, float]:
        return ((self.gx_r + self.gx_l) / 2.0, (self.gy_r + self.gy_l) / 2.0)


@dataclass(frozen=True)
class TrialRecord:
    participant_id: str
    session_id: str
    trial_index: int
    image_id: str
    samples: tuple[GazeSample, ...]
    trial_correct: bool
    qc_status: QcStatus = QcStatus.RAW
    sampling_hz: float = 55.0

    def valid_samples(self) -> tuple[GazeSample, ...]:
        return tuple(s for s in self.samples if s.valid)


@dataclass(frozen=True)
class ParticipantLabel:
    participant_id: str
    label: Group
    overall_score: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.overall_score <= 1.0:
            raise ValueError("overall_score must be in [0, 1]")


@dataclass
class GazeTimeSeries:
    """Fixed 107x6 input for the recurrent path.

    Channel order: gx_r, gy_r, gx_l, gy_l, pupil_r, pupil_l.  Gaze channels
    are normalized by screen dimensions; pupil channels are z-scored per
    session.  ``mask[i]`` is False for zero-padded tail steps.
    """

    steps: np.ndarray
    mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.steps = np.asarray(self.steps, dtype=np.float32)
        if self.steps.shape != (TIME_STEPS, N_CHANNELS):
            raise ValueError(
                f"expected shape ({TIME_STEPS}, {N_CHANNELS}), got {self.steps.shape}"
            )
        if self.mask is None:
            self.mask = np.ones(TIME_STEPS, dtype=bool)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != (TIME_STEPS,):
            raise ValueError(f"mask must have shape ({TIME_STEPS},)")


def validate_trial(trial: TrialRecord, geom: ScreenGeometry) -> list[str]:
    """Report invariant violations; an empty list means the trial is clean."""
    violations: list[str] = []
    prev_t = -math.inf
    for i, s in enumerate(trial.samples):
        if s.t_ms < 0:
            violations.append(f"negative timestamp at index {i}")
        if s.t_ms <= prev_t:
            violations.append(f"non-increasing timestamp at index {i}")
        prev_t = s.t_ms
        channels = (s.gx_r, s.gy_r, s.gx_l, s.gy_l, s.pupil_r, s.pupil_l)
        finite = all(math.isfinite(c) for c in channels)
        if s.valid:
            if not finite:
                violations.append(f"valid sample with missing channel at index {i}")
            else:
                for x, y in ((s.gx_r, s.gy_r), (s.gx_l, s.gy_l)):
                    if not (0 <= x <= geom.width_px and 0 <= y <= geom.height_px):
                        violations.append("gaze out of screen bounds")
                        break
    return violations
