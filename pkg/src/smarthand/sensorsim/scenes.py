"""Stimulus generation: pressure maps the glove experiences over time.

Press scenes render a class-distinctive static footprint (with pose
jitter), slide scenes translate a profile at constant velocity, and
empty-hand scenes carry only sub-threshold pose stress. Pressures are
newtons per taxel; everything is deterministic given the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import ValidationError
from ..frames import GRID

# Minimum per-taxel pressure that counts as contact; footprint cells
# below it are treated as not touching at all.
CONTACT_PRESSURE_FLOOR = 0.2
# Empty-hand pose stress stays far below the contact floor and below the
# half-LSB point of the readout, so rest frames quantize to the baseline:
# with V_ref = 1.2, R_FB = 180, a taxel must stay above ~801 kOhm, i.e.
# below ~0.005 N, for its absolute signal to round down to the baseline.
EMPTY_HAND_MAX_PRESSURE = 0.005

DEFAULT_CLASS_NAMES: tuple[str, ...] = (
    "tennis_ball",
    "battery",
    "mug",
    "spray_can",
    "lotion_bottle",
    "scissors",
    "safety_glasses",
    "stapler",
    "spoon",
    "multimeter",
    "tape_roll",
    "clamp",
    "pen",
    "screwdriver",
    "eraser",
    "soda_can",
    "empty_hand",
)
EMPTY_HAND_CLASS = 16


@dataclass(frozen=True)
class _Shape:
    """One pressure primitive in footprint-local coordinates.

    kind: ellipse (semi-axes), bar (half-length, half-width capsule),
    or ring (mid radius, half thickness). peak is newtons at the crest.
    """

    kind: str
    center: tuple[float, float] = (0.0, 0.0)
    size: tuple[float, float] = (1.0, 1.0)
    angle_deg: float = 0.0
    peak: float = 1.0

    def pressure(self, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
        a = math.radians(self.angle_deg)
        dy = yy - self.center[0]
        dx = xx - self.center[1]
        u = math.cos(a) * dy + math.sin(a) * dx
        v = -math.sin(a) * dy + math.cos(a) * dx
        s0, s1 = self.size
        if self.kind == "ellipse":
            rho2 = (u / s0) ** 2 + (v / s1) ** 2
            prof = np.clip(1.0 - rho2, 0.0, 1.0)
        elif self.kind == "bar":
            along = np.clip(np.abs(u) - s0, 0.0, None)
            d2 = along**2 + v**2
            prof = np.clip(1.0 - d2 / s1**2, 0.0, 1.0)
        elif self.kind == "ring":
            r = np.sqrt(u**2 + v**2)
            prof = np.clip(1.0 - ((r - s0) / s1) ** 2, 0.0, 1.0)
        else:
            raise ValidationError(f"unknown shape kind {self.kind!r}")
        return self.peak * prof


# Footprint templates for the 16 object classes. Deliberately clustered:
# thin bars (pen / screwdriver / battery), rims (mug / spray_can / soda_can /
# tape_roll), and small ovals (lotion_bottle / eraser) stay mutually
# confusable the way similarly-gripped objects are.
_FOOTPRINTS: dict[int, tuple[_Shape, ...]] = {
    0: (_Shape("ellipse", (0, 0), (5.6, 5.6), 0, 4.2),),
    1: (_Shape("bar", (0, 0), (4.0, 1.7), 0, 3.0),),
    2: (
        _Shape("ring", (0, -1.5), (5.2, 1.6), 0, 3.4),
        _Shape("bar", (0, 5.4), (1.7, 1.1), 90, 2.0),
    ),
    3: (_Shape("ring", (0, 0), (4.3, 1.5), 0, 4.4),),
    4: (_Shape("ellipse", (0, 0), (6.0, 3.0), 12, 2.6),),
    5: (
        _Shape("bar", (0, -0.8), (6.0, 0.9), 14, 2.2),
        _Shape("bar", (0, 0.8), (6.0, 0.9), -14, 2.2),
    ),
    6: (
        _Shape("ellipse", (0, -4.4), (2.3, 3.0), 0, 1.9),
        _Shape("ellipse", (0, 4.4), (2.3, 3.0), 0, 1.9),
        _Shape("bar", (0, 0), (2.2, 0.8), 90, 1.4),
    ),
    7: (
        _Shape("bar", (0, 0), (4.6, 2.1), 0, 3.2),
        _Shape("ellipse", (-4.6, 0), (2.2, 2.4), 0, 3.6),
    ),
    8: (
        _Shape("ellipse", (-4.2, 0), (2.8, 2.1), 0, 2.2),
        _Shape("bar", (2.5, 0), (3.6, 0.9), 90, 1.7),
    ),
    9: (_Shape("bar", (0, 0), (3.4, 3.3), 0, 3.0),),
    10: (_Shape("ring", (0, 0), (5.4, 2.0), 0, 3.0),),
    11: (
        _Shape("bar", (0, -1.5), (4.8, 1.3), 90, 2.8),
        _Shape("bar", (3.4, 1.8), (3.2, 1.3), 0, 2.8),
    ),
    12: (_Shape("bar", (0, 0), (6.4, 0.8), 0, 1.9),),
    13: (
        _Shape("bar", (-2.4, 0), (4.4, 1.0), 0, 2.6),
        _Shape("ellipse", (4.6, 0), (2.6, 1.9), 0, 3.4),
    ),
    14: (_Shape("bar", (0, 0), (2.6, 1.9), 0, 2.3),),
    15: (_Shape("ring", (0, 0), (4.8, 1.3), 0, 4.0),),
}

SLIDE_PROFILES = ("point", "stripe_rows", "stripe_cols")


@dataclass(frozen=True)
class ForceScene:
    """Time-varying pressure stimulus.

    pressure(frame_index) returns the 32x32 newton map for that frame.
    class_id is the label simulate_recording stamps on the recording.
    """

    kind: str
    class_id: int
    n_frames: int
    _field: Callable[[int], np.ndarray]

    def pressure(self, frame_index: int) -> np.ndarray:
        if not 0 <= frame_index < self.n_frames:
            raise ValidationError(
                f"frame index {frame_index} outside [0, {self.n_frames})"
            )
        p = self._field(frame_index)
        if np.any(p < 0):
            raise ValidationError("scene produced negative pressure")
        return p


def _grid_coords(pose: tuple[float, float, float]) -> tuple[np.ndarray, np.ndarray]:
    """Taxel centers in footprint-local coordinates for a given pose."""
    dr, dc, theta_deg = pose
    yy, xx = np.mgrid[0:GRID, 0:GRID].astype(float)
    cy = (GRID - 1) / 2 + dr
    cx = (GRID - 1) / 2 + dc
    t = math.radians(theta_deg)
    dy = yy - cy
    dx = xx - cx
    return (
        math.cos(t) * dy + math.sin(t) * dx,
        -math.sin(t) * dy + math.cos(t) * dx,
    )


def render_footprint(
    class_id: int,
    pose: tuple[float, float, float] = (0.0, 0.0, 0.0),
    floor: float = CONTACT_PRESSURE_FLOOR,
) -> np.ndarray:
    """Static pressure map of one class footprint at the given pose.

    Taxels whose rendered pressure falls below the contact floor are not
    touching and read zero.
    """
    if class_id not in _FOOTPRINTS:
        raise ValidationError(f"no footprint for class {class_id}")
    yy, xx = _grid_coords(pose)
    p = np.max(np.stack([s.pressure(yy, xx) for s in _FOOTPRINTS[class_id]]), axis=0)
    return np.where(p >= floor, p, 0.0)


def _render_profile(profile: str, offset: tuple[float, float]) -> np.ndarray:
    dy, dx = offset
    if profile == "point":
        shape = _Shape("ellipse", (0, 0), (2.2, 2.2), 0, 3.2)
    elif profile == "stripe_rows":
        # long axis along rows: covers every row at a band of columns
        shape = _Shape("bar", (0, 0), (GRID * 2.0, 2.4), 90, 2.8)
    elif profile == "stripe_cols":
        shape = _Shape("bar", (0, 0), (GRID * 2.0, 2.4), 0, 2.8)
    else:
        raise ValidationError(
            f"unknown slide profile {profile!r}; use one of {SLIDE_PROFILES}"
        )
    yy, xx = np.mgrid[0:GRID, 0:GRID].astype(float)
    c = (GRID - 1) / 2
    p = shape.pressure(yy - c - dy, xx - c - dx)
    return np.where(p >= CONTACT_PRESSURE_FLOOR, p, 0.0)


def _smooth_field(rng: np.random.Generator) -> np.ndarray:
    """Low-frequency random field in [0, 1]: coarse noise, bilinear upsample."""
    coarse = rng.normal(size=(6, 6))
    pts = np.linspace(0, 5, GRID)
    i0 = np.clip(pts.astype(int), 0, 4)
    frac = pts - i0
    rows = (
        coarse[i0, :] * (1 - frac)[:, None] + coarse[i0 + 1, :] * frac[:, None]
    )
    field = rows[:, i0] * (1 - frac)[None, :] + rows[:, i0 + 1] * frac[None, :]
    field -= field.min()
    peak = field.max()
    return field / peak if peak > 0 else field


def generate_scene(
    kind: str,
    frames: int,
    seed: int,
    *,
    class_id: int | None = None,
    profile: str = "point",
    velocity: tuple[float, float] = (0.0, 2.0),
    base_pose: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> ForceScene:
    """Build a deterministic stimulus.

    kind "press": static footprint for class_id with pose jitter of
    +-2 px translation and +-10 deg rotation on top of base_pose.
    kind "slide": profile translated by `velocity` px/frame, centered
    mid-trajectory. kind "empty_hand": static sub-threshold pose stress.
    """
    if frames < 1:
        raise ValidationError("a scene needs at least one frame")
    rng = np.random.default_rng(seed)

    if kind == "press":
        if class_id is None or class_id not in _FOOTPRINTS:
            raise ValidationError(f"press needs an object class id, got {class_id}")
        pose = (
            base_pose[0] + rng.uniform(-2.0, 2.0),
            base_pose[1] + rng.uniform(-2.0, 2.0),
            base_pose[2] + rng.uniform(-10.0, 10.0),
        )
        static = render_footprint(class_id, pose)
        return ForceScene("press", class_id, frames, lambda t: static)

    if kind == "slide":
        if profile not in SLIDE_PROFILES:
            raise ValidationError(
                f"unknown slide profile {profile!r}; use one of {SLIDE_PROFILES}"
            )
        vy, vx = float(velocity[0]), float(velocity[1])
        cls = EMPTY_HAND_CLASS if class_id is None else class_id
        mid = (frames - 1) / 2.0

        def field(t: int) -> np.ndarray:
            return _render_profile(profile, ((t - mid) * vy, (t - mid) * vx))

        return ForceScene("slide", cls, frames, field)

    if kind == "empty_hand":
        amplitude = EMPTY_HAND_MAX_PRESSURE * rng.uniform(0.5, 1.0)
        static = _smooth_field(rng) * amplitude
        return ForceScene("empty_hand", EMPTY_HAND_CLASS, frames, lambda t: static)

    raise ValidationError(f"unknown scene kind {kind!r}")
