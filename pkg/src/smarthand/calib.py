"""Per-taxel contact thresholds from empty-hand frames.

Taxels never rest at exactly zero signal: readout noise and the rest
resistance of the film give each one a small idle distribution. The
threshold for a taxel is the highest value it assumed across a long
empty-hand recording, so a strictly larger value later can only mean
contact. Strict ">" guarantees zero false positives on the calibration
set itself.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BadMagicError, TruncatedFileError, ValidationError
from .frames import ADC_MAX, GRID, TAXELS, Recording, TactileFrame

THRESHOLD_MAGIC = b"STAGTH1\x00"
RECOMMENDED_CALIBRATION_FRAMES = 20_000


@dataclass(frozen=True)
class ThresholdMap:
    """Per-taxel contact thresholds, ADC counts in [0, 4095]."""

    thresholds: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.thresholds)
        if t.shape != (GRID, GRID):
            raise ValidationError(f"thresholds must be {GRID}x{GRID}, got {t.shape}")
        if not np.issubdtype(t.dtype, np.integer):
            raise ValidationError("thresholds must be integer ADC counts")
        if t.min() < 0 or t.max() > ADC_MAX:
            raise ValidationError("thresholds outside [0, 4095]")
        t = np.ascontiguousarray(t.astype(np.uint16))
        t.setflags(write=False)
        object.__setattr__(self, "thresholds", t)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ThresholdMap):
            return NotImplemented
        return np.array_equal(self.thresholds, other.thresholds)


def calibrate(empty_frames: Sequence[TactileFrame]) -> ThresholdMap:
    """Elementwise max over the given empty-hand frames.

    Warns when given fewer than 20,000 frames; short calibrations
    underestimate the idle tails and cause false contacts later.
    """
    if len(empty_frames) == 0:
        raise ValidationError("calibrate needs at least one frame")
    if len(empty_frames) < RECOMMENDED_CALIBRATION_FRAMES:
        warnings.warn(
            f"calibrating from {len(empty_frames)} frames; "
            f"{RECOMMENDED_CALIBRATION_FRAMES} or more recommended",
            stacklevel=2,
        )
    peak = empty_frames[0].values.copy()
    for f in empty_frames[1:]:
        np.maximum(peak, f.values, out=peak)
    return ThresholdMap(peak)


def is_contact(frame: TactileFrame, t: ThresholdMap) -> bool:
    """True iff any taxel strictly exceeds its threshold."""
    return bool(np.any(frame.values > t.thresholds))


def filter_contact(recording: Recording, t: ThresholdMap) -> Recording:
    """Keep only contact frames, original order; IMU stream untouched."""
    kept = tuple(f for f in recording.frames if is_contact(f, t))
    return Recording(recording.label, recording.session_id, kept, recording.imu)


def write_thresholds(t: ThresholdMap, path) -> None:
    with open(path, "wb") as fh:
        fh.write(THRESHOLD_MAGIC)
        fh.write(t.thresholds.astype("<u2").tobytes())


def read_thresholds(path) -> ThresholdMap:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(THRESHOLD_MAGIC):
        raise TruncatedFileError("file shorter than magic")
    if data[:8] != THRESHOLD_MAGIC:
        raise BadMagicError(f"expected {THRESHOLD_MAGIC!r}, got {data[:8]!r}")
    body = data[8:]
    if len(body) != TAXELS * 2:
        kind = TruncatedFileError if len(body) < TAXELS * 2 else ValidationError
        raise kind(f"threshold payload must be {TAXELS * 2} bytes, got {len(body)}")
    values = np.frombuffer(body, dtype="<u2").reshape(GRID, GRID)
    return ThresholdMap(values)
