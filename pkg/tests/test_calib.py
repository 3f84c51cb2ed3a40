"""Threshold calibration and contact detection."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from smarthand.calib import (
    ThresholdMap,
    calibrate,
    filter_contact,
    is_contact,
    read_thresholds,
    write_thresholds,
)
from smarthand.errors import BadMagicError, TruncatedFileError, ValidationError
from smarthand.frames import GRID, Recording, TactileFrame

from conftest import random_frame


def frame_of(values: np.ndarray, t: int = 0) -> TactileFrame:
    return TactileFrame(values.astype(np.int64), t)


def test_all_zero_frames_give_zero_thresholds():
    frames = [frame_of(np.zeros((GRID, GRID)), i) for i in range(3)]
    with pytest.warns(UserWarning):
        t = calibrate(frames)
    assert np.all(t.thresholds == 0)


def test_two_frames_give_elementwise_max():
    rng = np.random.default_rng(1)
    a = rng.integers(0, 100, size=(GRID, GRID))
    b = rng.integers(0, 100, size=(GRID, GRID))
    with pytest.warns(UserWarning):
        t = calibrate([frame_of(a, 0), frame_of(b, 1)])
    assert np.array_equal(t.thresholds, np.maximum(a, b))


def test_calibrate_matches_naive_loop_oracle():
    rng = np.random.default_rng(11)
    frames = [random_frame(rng, 10_000 * i, hi=60) for i in range(500)]
    with pytest.warns(UserWarning):
        t = calibrate(frames)
    expect = np.zeros((GRID, GRID), dtype=np.int64)
    for f in frames:
        for i in range(GRID):
            for j in range(GRID):
                expect[i, j] = max(expect[i, j], int(f.values[i, j]))
    assert np.array_equal(t.thresholds, expect)


def test_calibrate_rejects_empty():
    with pytest.raises(ValidationError):
        calibrate([])


def test_contact_is_strict_comparison():
    rng = np.random.default_rng(2)
    v = rng.integers(0, 4096, size=(GRID, GRID))
    t = ThresholdMap(v)
    assert not is_contact(frame_of(v), t)  # equality everywhere -> no contact
    bumped = v.copy()
    bumped[8, 8] = min(4095, v[8, 8] + 1)
    if bumped[8, 8] > v[8, 8]:
        assert is_contact(frame_of(bumped), t)


def test_one_nonzero_taxel_is_contact_on_zero_thresholds():
    t = ThresholdMap(np.zeros((GRID, GRID), dtype=np.uint16))
    v = np.zeros((GRID, GRID))
    v[0, 31] = 1
    assert is_contact(frame_of(v), t)


@settings(deadline=None, max_examples=50)
@given(
    arrays(np.uint16, (GRID, GRID), elements=st.integers(0, 4000)),
    arrays(np.uint16, (GRID, GRID), elements=st.integers(0, 95)),
    arrays(np.uint16, (GRID, GRID), elements=st.integers(0, 4000)),
)
def test_contact_monotonicity(base, delta, thresholds):
    """frame A >= frame B elementwise and contact(B) implies contact(A)."""
    t = ThresholdMap(thresholds)
    bigger = frame_of(base + delta)
    if is_contact(frame_of(base), t):
        assert is_contact(bigger, t)


@settings(deadline=None, max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_calibrate_idempotent_under_duplication(seed, n):
    rng = np.random.default_rng(seed)
    frames = [random_frame(rng, 10_000 * i) for i in range(n)]
    doubled = frames + [
        TactileFrame(f.values, f.timestamp_us + 10_000 * n) for f in frames
    ]
    with pytest.warns(UserWarning):
        assert calibrate(doubled) == calibrate(frames)


@settings(deadline=None, max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_adding_a_frame_never_decreases_thresholds(seed, n):
    rng = np.random.default_rng(seed)
    frames = [random_frame(rng, 10_000 * i) for i in range(n + 1)]
    with pytest.warns(UserWarning):
        before = calibrate(frames[:-1]).thresholds
        after = calibrate(frames).thresholds
    assert np.all(after.astype(int) >= before.astype(int))


def test_filter_contact_trivial_cases():
    zeros = ThresholdMap(np.full((GRID, GRID), 4095, dtype=np.uint16))
    rng = np.random.default_rng(4)
    frames = tuple(random_frame(rng, 10_000 * i, hi=4094) for i in range(10))
    rec = Recording(1, 1, frames)
    assert len(filter_contact(rec, zeros).frames) == 0

    tm = ThresholdMap(np.zeros((GRID, GRID), dtype=np.uint16))
    hot = tuple(random_frame(rng, 10_000 * i, hi=4095) for i in range(10))
    # all frames have some positive taxel with overwhelming probability;
    # force it so the case is exact
    hot = tuple(
        TactileFrame(np.maximum(f.values, 1), f.timestamp_us) for f in hot
    )
    rec = Recording(1, 1, hot)
    assert filter_contact(rec, tm) == rec


def test_filter_contact_count_matches_per_frame_oracle():
    rng = np.random.default_rng(5)
    thresholds = ThresholdMap(rng.integers(2000, 3000, size=(GRID, GRID)))
    frames = tuple(random_frame(rng, 10_000 * i, hi=3500) for i in range(200))
    rec = Recording(2, 1, frames)
    kept = filter_contact(rec, thresholds)
    expected = sum(is_contact(f, thresholds) for f in frames)
    assert len(kept.frames) == expected
    # order preserved
    ts = [f.timestamp_us for f in kept.frames]
    assert ts == sorted(ts)


def test_threshold_file_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    t = ThresholdMap(rng.integers(0, 4096, size=(GRID, GRID)))
    p = tmp_path / "t.stagth"
    write_thresholds(t, p)
    assert read_thresholds(p) == t
    assert p.read_bytes()[:8] == b"STAGTH1\x00"
    assert len(p.read_bytes()) == 8 + 2048


def test_threshold_file_error_kinds(tmp_path):
    rng = np.random.default_rng(7)
    t = ThresholdMap(rng.integers(0, 4096, size=(GRID, GRID)))
    p = tmp_path / "t.stagth"
    write_thresholds(t, p)
    raw = p.read_bytes()

    bad = tmp_path / "bad.stagth"
    bad.write_bytes(b"XTAGTH1\x00" + raw[8:])
    with pytest.raises(BadMagicError):
        read_thresholds(bad)

    short = tmp_path / "short.stagth"
    short.write_bytes(raw[:-10])
    with pytest.raises(TruncatedFileError):
        read_thresholds(short)
