"""Frame acquisition: scenes through the electronics into recordings.

scan_frame is the closed-form fast path for the isolation readout (each
crossing read independently); its agreement with the full circuit solve is
a tested invariant. Degradation models film aging as a multiplicative
factor on signal above the rest level, matching how relative response is
reported downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ..errors import BufferLimitError, ValidationError
from ..frames import (
    FRAME_PERIOD_US,
    GRID,
    Dataset,
    ImuSample,
    Recording,
    TactileFrame,
)
from .masks import mask_by_name
from .physics import (
    ForceParams,
    ReadoutConfig,
    adc_quantize,
    force_to_resistance,
    isolation_readout_voltage,
)
from .scenes import DEFAULT_CLASS_NAMES, EMPTY_HAND_CLASS, ForceScene, generate_scene

# Raw accelerometer count for 1 g at the +-2 g range of a 16-bit IMU.
IMU_COUNTS_PER_G = 16384
_IMU_ACCEL_NOISE = 40.0
_IMU_GYRO_NOISE = 25.0


@dataclass(frozen=True)
class SensorGrid:
    """Electrical state of the matrix for one frame.

    resistance: ohms per crossing; crossings outside active_mask carry no
    film and are pinned at the rest resistance by the builders.
    degradation: response scale in (0, 1], 1 = fresh film.
    """

    resistance: np.ndarray
    active_mask: np.ndarray
    degradation: float = 1.0

    def __post_init__(self):
        R = np.asarray(self.resistance, dtype=np.float64)
        mask = np.asarray(self.active_mask, dtype=bool)
        if R.shape != (GRID, GRID) or mask.shape != (GRID, GRID):
            raise ValidationError(f"grid arrays must be {GRID}x{GRID}")
        if not np.all(np.isfinite(R)) or np.any(R <= 0):
            raise ValidationError("resistances must be positive and finite")
        if not 0 < self.degradation <= 1:
            raise ValidationError("degradation must be in (0, 1]")
        R = np.ascontiguousarray(R)
        R.setflags(write=False)
        mask = np.ascontiguousarray(mask)
        mask.setflags(write=False)
        object.__setattr__(self, "resistance", R)
        object.__setattr__(self, "active_mask", mask)

    @property
    def active_cells(self) -> int:
        return int(self.active_mask.sum())

    @classmethod
    def at_rest(
        cls,
        mask: np.ndarray | str = "hand",
        params: ForceParams = ForceParams(),
        degradation: float = 1.0,
    ) -> "SensorGrid":
        mask = mask_by_name(mask) if isinstance(mask, str) else np.asarray(mask, bool)
        return cls(np.full((GRID, GRID), params.R_max), mask, degradation)

    @classmethod
    def from_pressure(
        cls,
        pressure: np.ndarray,
        mask: np.ndarray | str = "hand",
        params: ForceParams = ForceParams(),
        degradation: float = 1.0,
    ) -> "SensorGrid":
        mask = mask_by_name(mask) if isinstance(mask, str) else np.asarray(mask, bool)
        R = force_to_resistance(np.asarray(pressure, dtype=np.float64), params)
        return cls(np.where(mask, R, params.R_max), mask, degradation)


def _as_rng(rng_seed) -> np.random.Generator:
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return np.random.default_rng(rng_seed)


def scan_frame(
    grid: SensorGrid,
    cfg: ReadoutConfig = ReadoutConfig(),
    rng_seed=0,
    *,
    timestamp_us: int = 0,
) -> TactileFrame:
    """One full isolation scan of the matrix.

    Per crossing: closed-form readout voltage, signal above V_ref scaled
    by the grid's degradation, Gaussian noise added, then quantized.
    Deterministic for a given (grid, cfg, seed).
    """
    rng = _as_rng(rng_seed)
    v_iso = isolation_readout_voltage(grid.resistance, cfg)
    v = cfg.V_ref + grid.degradation * (v_iso - cfg.V_ref)
    if cfg.noise_sigma > 0:
        v = v + rng.normal(0.0, cfg.noise_sigma, size=v.shape)
    return TactileFrame(adc_quantize(v, cfg), timestamp_us)


def simulate_recording(
    scene: ForceScene,
    grid: SensorGrid,
    cfg: ReadoutConfig = ReadoutConfig(),
    degradation: float | None = None,
    *,
    force_params: ForceParams = ForceParams(),
    session_id: int = 1,
    label: int | None = None,
    noise_seed: int = 0,
    with_imu: bool = True,
) -> Recording:
    """Run a scene through the acquisition chain into one Recording.

    Timestamps advance at exactly 10,000 us (the 100 Hz scan clock); IMU
    samples are synthesized at the same rate with a small-noise gravity
    vector. The acquisition buffer holds at most 4096 frames.
    """
    n = scene.n_frames
    if n > 4096:
        raise BufferLimitError(f"{n} frames exceed the 4096-frame buffer")
    d = grid.degradation if degradation is None else degradation
    rng = np.random.default_rng(noise_seed)

    static_field = scene.kind in ("press", "empty_hand")
    frames = []
    signal = None
    for t in range(n):
        if signal is None or not static_field:
            p = scene.pressure(t)
            g = SensorGrid.from_pressure(p, grid.active_mask, force_params, d)
            v_iso = isolation_readout_voltage(g.resistance, cfg)
            signal = d * (v_iso - cfg.V_ref)
        v = cfg.V_ref + signal
        if cfg.noise_sigma > 0:
            v = v + rng.normal(0.0, cfg.noise_sigma, size=v.shape)
        frames.append(TactileFrame(adc_quantize(v, cfg), t * FRAME_PERIOD_US))

    imu = ()
    if with_imu:
        accel = np.zeros((n, 3))
        accel[:, 2] = IMU_COUNTS_PER_G
        accel = accel + rng.normal(0.0, _IMU_ACCEL_NOISE, size=(n, 3))
        gyro = rng.normal(0.0, _IMU_GYRO_NOISE, size=(n, 3))
        imu = tuple(
            ImuSample(
                np.clip(np.round(accel[t]), -32768, 32767).astype(np.int16),
                np.clip(np.round(gyro[t]), -32768, 32767).astype(np.int16),
                t * FRAME_PERIOD_US,
            )
            for t in range(n)
        )

    return Recording(
        scene.class_id if label is None else label, session_id, tuple(frames), imu
    )


@dataclass(frozen=True)
class SimulationPlan:
    """What a full data collection looks like.

    degradation: per-session response factors, oldest film last; None
    means every session is fresh. Sessions are numbered from 1.
    """

    sessions: int = 5
    degradation: tuple[float, ...] | None = None
    recordings_per_class: int = 1
    frames_per_recording: int = 4000
    seed: int = 0
    mask: str = "hand"
    session_pose_jitter: bool = True
    with_imu: bool = True

    def __post_init__(self):
        if self.sessions < 1 or self.recordings_per_class < 1:
            raise ValidationError("plan needs at least one session and recording")
        if self.frames_per_recording < 1:
            raise ValidationError("frames_per_recording must be positive")
        if self.degradation is not None:
            d = tuple(float(x) for x in self.degradation)
            if len(d) != self.sessions:
                raise ValidationError("need one degradation factor per session")
            if any(not 0 < x <= 1 for x in d):
                raise ValidationError("degradation factors must be in (0, 1]")
            object.__setattr__(self, "degradation", d)

    def session_degradation(self, session_id: int) -> float:
        if self.degradation is None:
            return 1.0
        return self.degradation[session_id - 1]

    @property
    def total_frames(self) -> int:
        return (
            self.sessions
            * len(DEFAULT_CLASS_NAMES)
            * self.recordings_per_class
            * self.frames_per_recording
        )


def _session_pose(plan: SimulationPlan, session_id: int) -> tuple[float, float, float]:
    """Per-session global pose offset: the glove is worn slightly
    differently each time it is put on."""
    if not plan.session_pose_jitter:
        return (0.0, 0.0, 0.0)
    rng = np.random.default_rng(
        np.random.SeedSequence((plan.seed, session_id, 0x5E55))
    )
    return (rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-15, 15))


def iter_plan_recordings(
    plan: SimulationPlan,
    cfg: ReadoutConfig = ReadoutConfig(),
    force_params: ForceParams = ForceParams(),
) -> Iterator[Recording]:
    """Generate the plan's recordings one at a time (sessions ascending)."""
    mask = mask_by_name(plan.mask)
    for session in range(1, plan.sessions + 1):
        d = plan.session_degradation(session)
        grid = SensorGrid.at_rest(mask, force_params, degradation=d)
        base_pose = _session_pose(plan, session)
        for class_id in range(len(DEFAULT_CLASS_NAMES)):
            for k in range(plan.recordings_per_class):
                ss = np.random.SeedSequence((plan.seed, session, class_id, k))
                scene_seed, noise_seed = (int(x) for x in ss.generate_state(2))
                if class_id == EMPTY_HAND_CLASS:
                    # The residual-tension field comes from how the glove sits
                    # on the hand, so it is fixed per session, not per take.
                    sess_ss = np.random.SeedSequence(
                        (plan.seed, session, EMPTY_HAND_CLASS)
                    )
                    scene = generate_scene(
                        "empty_hand",
                        plan.frames_per_recording,
                        int(sess_ss.generate_state(1)[0]),
                    )
                else:
                    scene = generate_scene(
                        "press",
                        plan.frames_per_recording,
                        scene_seed,
                        class_id=class_id,
                        base_pose=base_pose,
                    )
                yield simulate_recording(
                    scene,
                    grid,
                    cfg,
                    force_params=force_params,
                    session_id=session,
                    noise_seed=noise_seed,
                    with_imu=plan.with_imu,
                )


def generate_dataset(
    plan: SimulationPlan,
    cfg: ReadoutConfig = ReadoutConfig(),
    force_params: ForceParams = ForceParams(),
    class_names: Sequence[str] = DEFAULT_CLASS_NAMES,
) -> Dataset:
    """Materialize the whole plan in memory. For large plans prefer
    iter_plan_recordings with the streaming dataset writer."""
    return Dataset.from_recordings(
        class_names, list(iter_plan_recordings(plan, cfg, force_params))
    )
