"""Film-wear metrics across recording sessions and centroid-track slip detection.

Wear shows up as a shrinking response to the same touch; the degradation
report expresses each session's mean response relative to session 1.  Slip
shows up as a moving pressure centroid; speeds are least-squares slopes of
the centroid track over a short sliding window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calib import ThresholdMap, is_contact
from .errors import ValidationError
from .frames import GRID, Dataset
from .sensorsim.physics import ReadoutConfig

SLIP_WINDOW = 5
# px/frame separating hold jitter from actual motion at the 100 Hz scan rate
SLIP_SPEED_THRESHOLD = 0.5

_BASELINE = ReadoutConfig().baseline_exact


@dataclass
class DegradationReport:
    """Per-session response relative to session 1 (the fresh-film reference).

    relative_response maps session id to its factor; session 1 is exactly
    1.0.  class_averages optionally carries (session, class) -> 32x32 mean
    frames for the sessions/classes a report run asked for.
    """

    relative_response: dict[int, float]
    class_averages: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if 1 not in self.relative_response:
            raise ValidationError("reference session 1 missing from report")
        if self.relative_response[1] != 1.0:
            raise ValidationError("reference session must be exactly 1.0")
        if any(v <= 0 for v in self.relative_response.values()):
            raise ValidationError("relative responses must be positive")


@dataclass
class SlipReport:
    """Centroid track of one frame sequence plus the motion verdict.

    centroids are (x, y) in taxel units, x along columns; one row per
    contact frame, indexed by frame_indices into the input sequence.
    velocities holds one least-squares (vx, vy) slope per sliding window.
    speed and direction_deg are the medians across windows; direction 0
    degrees points toward higher column index, 90 toward higher row index.
    When fewer contact frames than one window exist, classification is
    "undefined" and speed/direction_deg are None.
    """

    window: int
    frame_indices: np.ndarray
    centroids: np.ndarray
    velocities: np.ndarray
    speed: float | None
    direction_deg: float | None
    classification: str

    @property
    def defined(self) -> bool:
        return self.classification != "undefined"


def _session_mean_response(recordings, thresholds: ThresholdMap) -> float | None:
    total = 0.0
    n = 0
    for rec in recordings:
        for f in rec.frames:
            if is_contact(f, thresholds):
                total += float(f.values.sum()) - GRID * GRID * _BASELINE
                n += 1
    return total / (n * GRID * GRID) if n else None


def relative_mean_response(
    dataset: Dataset, thresholds: ThresholdMap
) -> DegradationReport:
    """Mean contact-frame response of each session, relative to session 1.

    Response is the signal above the ADC rest level, averaged over every
    taxel of every contact frame; raw counts would fold the constant rest
    offset into the ratio.
    """
    if 1 not in dataset.sessions:
        raise ValidationError("degradation needs session 1 as the reference")
    means = {}
    for sid in sorted(dataset.sessions):
        m = _session_mean_response(dataset.sessions[sid], thresholds)
        if m is None:
            raise ValidationError(f"session {sid} has no contact frames")
        means[sid] = m
    ref = means[1]
    rel = {sid: m / ref for sid, m in means.items()}
    rel[1] = 1.0
    return DegradationReport(relative_response=rel)


def class_average_frame(
    dataset: Dataset, class_id: int, session: int, thresholds: ThresholdMap
) -> np.ndarray:
    """Elementwise mean, in raw counts, of a class's contact frames."""
    if session not in dataset.sessions:
        raise ValidationError(f"no session {session} in dataset")
    acc = np.zeros((GRID, GRID))
    n = 0
    seen = False
    for rec in dataset.sessions[session]:
        if rec.label != class_id:
            continue
        seen = True
        for f in rec.frames:
            if is_contact(f, thresholds):
                acc += f.values
                n += 1
    if not seen:
        raise ValidationError(f"no class {class_id} recordings in session {session}")
    if n == 0:
        raise ValidationError(
            f"class {class_id} has no contact frames in session {session}"
        )
    return acc / n


def _centroid_track(frames, thresholds: ThresholdMap):
    t_axis = np.arange(GRID, dtype=float)
    indices, cx, cy = [], [], []
    for i, f in enumerate(frames):
        mass = np.maximum(f.values.astype(np.float64) - thresholds.thresholds, 0.0)
        total = mass.sum()
        if total <= 0.0:
            continue
        indices.append(i)
        cx.append(float((mass.sum(axis=0) * t_axis).sum() / total))
        cy.append(float((mass.sum(axis=1) * t_axis).sum() / total))
    return np.array(indices), np.array(cx), np.array(cy)


def detect_slip(
    frames, thresholds: ThresholdMap, window: int = SLIP_WINDOW
) -> SlipReport:
    """Classify a frame sequence as static or slipping.

    Each sliding window of `window` consecutive contact frames yields one
    least-squares velocity; the median window speed decides.  Sequences
    with fewer contact frames than one window come back "undefined".
    """
    frames = list(frames)
    if window < 2:
        raise ValidationError(f"window must be >= 2, got {window}")
    if len(frames) < window:
        raise ValidationError(
            f"need at least window = {window} frames, got {len(frames)}"
        )
    idx, cx, cy = _centroid_track(frames, thresholds)
    track = np.column_stack([cx, cy]) if len(idx) else np.empty((0, 2))
    if len(idx) < window:
        return SlipReport(
            window=window,
            frame_indices=idx,
            centroids=track,
            velocities=np.empty((0, 2)),
            speed=None,
            direction_deg=None,
            classification="undefined",
        )
    vels = []
    for i in range(len(idx) - window + 1):
        t = idx[i : i + window].astype(float)
        vx = np.polyfit(t, cx[i : i + window], 1)[0]
        vy = np.polyfit(t, cy[i : i + window], 1)[0]
        vels.append((vx, vy))
    vels = np.array(vels)
    mvx = float(np.median(vels[:, 0]))
    mvy = float(np.median(vels[:, 1]))
    speed = math.hypot(mvx, mvy)
    return SlipReport(
        window=window,
        frame_indices=idx,
        centroids=track,
        velocities=vels,
        speed=speed,
        direction_deg=math.degrees(math.atan2(mvy, mvx)) % 360.0,
        classification="slipping" if speed > SLIP_SPEED_THRESHOLD else "static",
    )
