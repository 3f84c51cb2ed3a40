"""Shared fixtures and builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from smarthand.frames import (
    GRID,
    NUM_CLASSES,
    Dataset,
    ImuSample,
    Recording,
    TactileFrame,
)

CLASS_NAMES = tuple(f"class_{i:02d}" for i in range(NUM_CLASSES))


def random_frame(rng: np.random.Generator, t_us: int, hi: int = 4095) -> TactileFrame:
    return TactileFrame(rng.integers(0, hi + 1, size=(GRID, GRID)), t_us)


def random_imu(rng: np.random.Generator, t_us: int) -> ImuSample:
    return ImuSample(
        rng.integers(-32768, 32768, size=3),
        rng.integers(-32768, 32768, size=3),
        t_us,
    )


def random_recording(
    rng: np.random.Generator,
    label: int,
    session_id: int,
    n_frames: int,
    n_imu: int = 0,
) -> Recording:
    frames = tuple(random_frame(rng, 10_000 * i) for i in range(n_frames))
    imu = tuple(random_imu(rng, 10_000 * i) for i in range(n_imu))
    return Recording(label, session_id, frames, imu)


def random_dataset(
    seed: int, n_sessions: int, n_classes: int, frames_per_recording: int
) -> Dataset:
    rng = np.random.default_rng(seed)
    recs = [
        random_recording(
            rng, label, sid, frames_per_recording, n_imu=frames_per_recording
        )
        for sid in range(1, n_sessions + 1)
        for label in range(n_classes)
    ]
    return Dataset.from_recordings(CLASS_NAMES, recs)


@pytest.fixture
def class_names():
    return CLASS_NAMES
