import math

import numpy as np
import pytest

from conftest import CLASS_NAMES
from smarthand.analysis import (
    DegradationReport,
    SLIP_WINDOW,
    class_average_frame,
    detect_slip,
    relative_mean_response,
)
from smarthand.calib import ThresholdMap
from smarthand.errors import ValidationError
from smarthand.frames import GRID, Dataset, Recording, TactileFrame
from smarthand.sensorsim.acquire import SensorGrid, simulate_recording
from smarthand.sensorsim.physics import ReadoutConfig
from smarthand.sensorsim.scenes import generate_scene

T1500 = ThresholdMap(np.full((GRID, GRID), 1500, dtype=np.uint16))
QUIET = ReadoutConfig(noise_sigma=0.0)
FULL = SensorGrid.at_rest("square")


def _const_frame(value, t_us):
    return TactileFrame(np.full((GRID, GRID), value, dtype=np.uint16), t_us)


def _frames_from_values(value_maps):
    return tuple(
        TactileFrame(np.asarray(v, dtype=np.uint16), 10_000 * i)
        for i, v in enumerate(value_maps)
    )


# ---------------------------------------------------------------------------
# relative_mean_response

def test_identical_sessions_report_unity():
    frames = (_const_frame(1600, 0), _const_frame(1700, 10_000))
    ds = Dataset.from_recordings(
        CLASS_NAMES,
        [Recording(3, 1, frames), Recording(3, 2, frames)],
    )
    rep = relative_mean_response(ds, T1500)
    assert rep.relative_response == {1: 1.0, 2: 1.0}


def test_halved_signal_reports_one_half():
    # the rest level is 1489 + 1/11 counts, so a session of eleven frames
    # can hit exactly half the first session's mean signal with integer
    # counts: sum2 = sum1/2 + N*rest/2 and N*rest/2 = 11*1024*rest/2 is
    # an integer
    n = 11
    s1 = [_const_frame(1600, 10_000 * i) for i in range(n)]
    total2 = (n * 1024 * 1600) // 2 + 512 * 16380
    base, extra = divmod(total2, n * 1024)
    values = np.full(n * 1024, base, dtype=np.uint16)
    values[:extra] += 1
    s2 = _frames_from_values(values.reshape(n, GRID, GRID))
    assert min(f.values.min() for f in s2) > 1500  # all frames count as contact
    ds = Dataset.from_recordings(
        CLASS_NAMES, [Recording(3, 1, tuple(s1)), Recording(3, 2, s2)]
    )
    rep = relative_mean_response(ds, T1500)
    assert rep.relative_response[1] == 1.0
    assert abs(rep.relative_response[2] - 0.5) < 1e-9


def test_response_invariant_to_frame_order():
    rng = np.random.default_rng(50)
    maps = rng.integers(1480, 1700, size=(6, GRID, GRID))
    ds_fwd = Dataset.from_recordings(
        CLASS_NAMES,
        [
            Recording(3, 1, _frames_from_values(maps[:3])),
            Recording(3, 2, _frames_from_values(maps[3:])),
        ],
    )
    ds_rev = Dataset.from_recordings(
        CLASS_NAMES,
        [
            Recording(3, 1, _frames_from_values(maps[:3][::-1])),
            Recording(3, 2, _frames_from_values(maps[3:][::-1])),
        ],
    )
    a = relative_mean_response(ds_fwd, T1500)
    b = relative_mean_response(ds_rev, T1500)
    assert a.relative_response == b.relative_response


def test_session_without_contact_frames_errors():
    ds = Dataset.from_recordings(
        CLASS_NAMES,
        [
            Recording(3, 1, (_const_frame(1600, 0),)),
            Recording(3, 2, (_const_frame(1450, 0),)),
        ],
    )
    with pytest.raises(ValidationError, match="session 2"):
        relative_mean_response(ds, T1500)


def test_missing_reference_session_errors():
    ds = Dataset.from_recordings(CLASS_NAMES, [Recording(3, 2, (_const_frame(1600, 0),))])
    with pytest.raises(ValidationError):
        relative_mean_response(ds, T1500)


def test_report_type_validates_reference():
    with pytest.raises(ValidationError):
        DegradationReport(relative_response={2: 1.0})
    with pytest.raises(ValidationError):
        DegradationReport(relative_response={1: 0.99})
    with pytest.raises(ValidationError):
        DegradationReport(relative_response={1: 1.0, 2: 0.0})


FIG13_FACTORS = (1.0, 0.778, 0.635, 0.543, 0.457)


def _degradation_dataset(class_ids, factors, frames, seed0=900):
    """Same stimuli in every session; only film wear and noise differ."""
    recs = []
    for ci, class_id in enumerate(class_ids):
        scene = generate_scene("press", frames, 200 + ci, class_id=class_id)
        for sid, d in enumerate(factors, start=1):
            recs.append(
                simulate_recording(
                    scene,
                    FULL,
                    degradation=d,
                    session_id=sid,
                    noise_seed=seed0 + 100 * sid + ci,
                    with_imu=False,
                )
            )
    return Dataset.from_recordings(CLASS_NAMES, recs)


def test_simulated_wear_recovers_configured_factors():
    ds = _degradation_dataset((0, 3, 9, 13), FIG13_FACTORS, frames=100)
    rep = relative_mean_response(ds, T1500)
    assert rep.relative_response[1] == 1.0
    for sid, d in enumerate(FIG13_FACTORS, start=1):
        assert rep.relative_response[sid] == pytest.approx(d, rel=0.02)


# ---------------------------------------------------------------------------
# class_average_frame

def test_single_frame_average_is_that_frame():
    rng = np.random.default_rng(51)
    v = rng.integers(1490, 1700, size=(GRID, GRID))
    ds = Dataset.from_recordings(
        CLASS_NAMES, [Recording(5, 1, _frames_from_values([v]))]
    )
    avg = class_average_frame(ds, 5, 1, T1500)
    assert np.array_equal(avg, v.astype(float))


def test_two_frame_average_is_midpoint():
    a = np.full((GRID, GRID), 1600)
    b = np.full((GRID, GRID), 1700)
    ds = Dataset.from_recordings(
        CLASS_NAMES, [Recording(5, 1, _frames_from_values([a, b]))]
    )
    assert np.array_equal(class_average_frame(ds, 5, 1, T1500), np.full((GRID, GRID), 1650.0))


def test_average_skips_non_contact_frames():
    a = np.full((GRID, GRID), 1600)
    quiet = np.full((GRID, GRID), 1480)  # below every threshold: excluded
    ds = Dataset.from_recordings(
        CLASS_NAMES, [Recording(5, 1, _frames_from_values([a, quiet]))]
    )
    assert np.array_equal(class_average_frame(ds, 5, 1, T1500), a.astype(float))


def test_average_scales_with_signal():
    rng = np.random.default_rng(52)
    signal = rng.integers(20, 300, size=(3, GRID, GRID))
    plain = _frames_from_values(1489 + signal)
    doubled = _frames_from_values(1489 + 2 * signal)
    ds_a = Dataset.from_recordings(CLASS_NAMES, [Recording(5, 1, plain)])
    ds_b = Dataset.from_recordings(CLASS_NAMES, [Recording(5, 1, doubled)])
    avg_a = class_average_frame(ds_a, 5, 1, T1500)
    avg_b = class_average_frame(ds_b, 5, 1, T1500)
    assert np.allclose(avg_b - 1489.0, 2.0 * (avg_a - 1489.0), atol=1e-9)


def test_average_missing_class_or_session_errors():
    ds = Dataset.from_recordings(
        CLASS_NAMES, [Recording(5, 1, (_const_frame(1600, 0),))]
    )
    with pytest.raises(ValidationError):
        class_average_frame(ds, 6, 1, T1500)
    with pytest.raises(ValidationError):
        class_average_frame(ds, 5, 2, T1500)
    quiet = Dataset.from_recordings(
        CLASS_NAMES, [Recording(5, 1, (_const_frame(1450, 0),))]
    )
    with pytest.raises(ValidationError, match="contact"):
        class_average_frame(quiet, 5, 1, T1500)


FIG12_FACTORS = (1.0, 0.74, 0.69, 0.58, 0.45)


def test_class13_average_frames_track_wear():
    ds = _degradation_dataset((13,), FIG12_FACTORS, frames=100, seed0=3000)
    averages = [class_average_frame(ds, 13, sid, T1500) for sid in range(1, 6)]
    rest = ReadoutConfig().baseline_exact
    support = averages[0] - rest > 5.0
    ref = float((averages[0] - rest)[support].sum())
    for avg, d in zip(averages, FIG12_FACTORS):
        rel = float((avg - rest)[support].sum()) / ref
        assert rel == pytest.approx(d, rel=0.05)


# ---------------------------------------------------------------------------
# detect_slip

def _recording_frames(scene, cfg=QUIET, noise_seed=0):
    return simulate_recording(
        scene, FULL, cfg, noise_seed=noise_seed, with_imu=False
    ).frames


def test_static_press_without_noise_has_zero_speed():
    scene = generate_scene("press", 20, 60, class_id=0)
    rep = detect_slip(_recording_frames(scene), T1500)
    assert rep.classification == "static"
    assert rep.speed == 0.0


def test_static_press_with_noise_stays_static():
    scene = generate_scene("press", 40, 61, class_id=0)
    frames = simulate_recording(scene, FULL, noise_seed=7, with_imu=False).frames
    rep = detect_slip(frames, T1500)
    assert rep.classification == "static"
    assert rep.speed < 0.05


def test_point_slide_recovers_speed_and_direction():
    scene = generate_scene("slide", 11, 62, profile="point", velocity=(0.0, 2.0))
    rep = detect_slip(_recording_frames(scene), T1500)
    assert rep.classification == "slipping"
    assert abs(rep.speed - 2.0) <= 0.2
    assert min(rep.direction_deg, 360.0 - rep.direction_deg) <= 15.0


def test_diagonal_slide_direction():
    scene = generate_scene("slide", 13, 63, profile="point", velocity=(1.0, 1.0))
    rep = detect_slip(_recording_frames(scene), T1500)
    assert rep.classification == "slipping"
    assert rep.speed == pytest.approx(math.sqrt(2.0), abs=0.15)
    assert rep.direction_deg == pytest.approx(45.0, abs=15.0)


def test_direction_equivariant_under_rotation():
    scene = generate_scene("slide", 11, 64, profile="point", velocity=(0.0, 2.0))
    frames = _recording_frames(scene)
    rotated = [
        TactileFrame(np.rot90(f.values).copy(), f.timestamp_us) for f in frames
    ]
    a = detect_slip(frames, T1500)
    b = detect_slip(rotated, T1500)
    assert b.speed == pytest.approx(a.speed, abs=1e-9)
    assert b.direction_deg == pytest.approx((a.direction_deg - 90.0) % 360.0, abs=1e-6)


def test_full_width_stripe_along_own_axis_reads_static():
    # uniform along its length: the visible footprint never changes
    scene = generate_scene("slide", 11, 65, profile="stripe_rows", velocity=(2.0, 0.0))
    rep = detect_slip(_recording_frames(scene), T1500)
    assert rep.classification == "static"
    noisy = simulate_recording(scene, FULL, noise_seed=9, with_imu=False).frames
    assert detect_slip(noisy, T1500).classification == "static"


def test_too_few_contact_frames_is_undefined_not_error():
    rest = SensorGrid.at_rest("square")
    frames = [
        simulate_recording(
            generate_scene("empty_hand", 1, 66), rest, QUIET, with_imu=False
        ).frames[0]
        for _ in range(8)
    ]
    frames = [TactileFrame(f.values, 10_000 * i) for i, f in enumerate(frames)]
    rep = detect_slip(frames, T1500)
    assert rep.classification == "undefined"
    assert not rep.defined
    assert rep.speed is None and rep.direction_deg is None
    assert len(rep.velocities) == 0


def test_short_sequence_errors():
    frames = [_const_frame(1600, 10_000 * i) for i in range(3)]
    with pytest.raises(ValidationError):
        detect_slip(frames, T1500, window=SLIP_WINDOW)
    with pytest.raises(ValidationError):
        detect_slip([_const_frame(1600, 0)] * 6, T1500, window=1)


def test_centroid_of_known_mass_distribution():
    v = np.full((GRID, GRID), 1489, dtype=np.uint16)
    v[10, 20] = 1500 + 30  # mass 30
    v[10, 24] = 1500 + 10  # mass 10
    frames = [TactileFrame(v, 10_000 * i) for i in range(5)]
    rep = detect_slip(frames, T1500)
    assert rep.classification == "static"
    # weighted column: (30*20 + 10*24) / 40 = 21, row 10
    assert np.allclose(rep.centroids, [[21.0, 10.0]] * 5)
