"""Active-crossing masks.

The glove routes electrodes over the palm and fingers, so only 548 of the
32x32 crossings carry sensing film; the rest are electrically present but
pinned at the rest resistance. A full-square control mask (all 1024) mirrors
the flat reference sensor used for degradation experiments.
"""

from __future__ import annotations

import numpy as np

from ..frames import GRID

HAND_ACTIVE_CELLS = 548


def _ellipse_margin(yy, xx, center, semi):
    cy, cx = center
    a, b = semi
    rho = np.sqrt(((yy - cy) / a) ** 2 + ((xx - cx) / b) ** 2)
    return (1.0 - rho) * min(a, b)


def _capsule_margin(yy, xx, p0, p1, radius):
    # distance from each cell to the segment p0-p1, as an inside margin
    p0 = np.asarray(p0, dtype=float)
    d = np.asarray(p1, dtype=float) - p0
    len2 = float(d @ d)
    py = yy - p0[0]
    px = xx - p0[1]
    t = np.clip((py * d[0] + px * d[1]) / len2, 0.0, 1.0) if len2 > 0 else 0.0
    dist = np.sqrt((py - t * d[0]) ** 2 + (px - t * d[1]) ** 2)
    return radius - dist


def hand_mask() -> np.ndarray:
    """Hand-shaped boolean mask with exactly 548 active crossings.

    Built from a palm ellipse, four finger capsules, and a thumb capsule;
    the 548 cells with the highest inside-margin are kept, ties broken by
    cell index, so the count is exact and the result deterministic.
    """
    yy, xx = np.mgrid[0:GRID, 0:GRID].astype(float)
    margins = [
        _ellipse_margin(yy, xx, center=(20.5, 15.0), semi=(8.2, 9.2)),  # palm
        _capsule_margin(yy, xx, (3.0, 6.5), (13.5, 8.5), 1.8),  # index
        _capsule_margin(yy, xx, (1.5, 12.0), (13.5, 13.0), 1.9),  # middle
        _capsule_margin(yy, xx, (2.5, 17.0), (13.5, 17.5), 1.8),  # ring
        _capsule_margin(yy, xx, (5.0, 22.0), (14.5, 21.5), 1.6),  # little
        _capsule_margin(yy, xx, (18.0, 24.0), (23.0, 29.0), 2.2),  # thumb
    ]
    score = np.max(np.stack(margins), axis=0).ravel()
    order = np.lexsort((np.arange(score.size), -score))
    mask = np.zeros(GRID * GRID, dtype=bool)
    mask[order[:HAND_ACTIVE_CELLS]] = True
    return mask.reshape(GRID, GRID)


def square_mask() -> np.ndarray:
    """Full-square control sensor: every crossing active."""
    return np.ones((GRID, GRID), dtype=bool)


def mask_by_name(name: str) -> np.ndarray:
    if name == "hand":
        return hand_mask()
    if name == "square":
        return square_mask()
    from ..errors import ValidationError

    raise ValidationError(f"unknown mask {name!r}; use 'hand' or 'square'")
