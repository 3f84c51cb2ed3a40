"""Film law, readout stage, and ADC behavior."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smarthand.errors import ValidationError
from smarthand.sensorsim import (
    ForceParams,
    ReadoutConfig,
    SensorGrid,
    adc_quantize,
    force_to_resistance,
    hand_mask,
    isolation_readout_voltage,
    scan_frame,
    square_mask,
)

CFG = ReadoutConfig()
PARAMS = ForceParams()


# ------------------------------------------------------------ force law


def test_no_load_gives_R_max():
    assert force_to_resistance(0.0, PARAMS) == PARAMS.R_max


def test_heavy_load_approaches_R_min():
    # residual measured on the variable span: at F = 1e6*F_half only
    # a 1e-6 fraction of (R_max - R_min) remains
    R = force_to_resistance(1e6 * PARAMS.F_half, PARAMS)
    assert (R - PARAMS.R_min) / (PARAMS.R_max - PARAMS.R_min) < 1e-4


def test_half_force_gives_midpoint():
    R = force_to_resistance(PARAMS.F_half, PARAMS)
    assert R == pytest.approx((PARAMS.R_min + PARAMS.R_max) / 2, rel=1e-12)


def test_negative_force_rejected():
    with pytest.raises(ValidationError):
        force_to_resistance(-0.1, PARAMS)


@settings(deadline=None, max_examples=100)
@given(st.floats(0, 1e4), st.floats(min_value=1e-6, max_value=1e4))
def test_force_law_strictly_decreasing(f, df):
    assert force_to_resistance(f + df, PARAMS) < force_to_resistance(f, PARAMS)


def test_force_params_validation():
    with pytest.raises(ValidationError):
        ForceParams(R_min=10.0, R_max=5.0)
    with pytest.raises(ValidationError):
        ForceParams(F_half=0.0)


# ------------------------------------------------------------ readout stage


def test_gain_two_point():
    assert isolation_readout_voltage(CFG.R_FB, CFG) == pytest.approx(2.4, abs=1e-12)


def test_open_circuit_limit_is_V_ref():
    v = isolation_readout_voltage(1e9 * CFG.R_FB, CFG)
    assert abs(v - CFG.V_ref) / CFG.V_ref < 1e-3


def test_saturation_clamps_to_adc_ref():
    v = isolation_readout_voltage(CFG.R_FB / 2, CFG)
    assert v == 3.3  # unclamped value would be 3.6


def test_nonpositive_resistance_rejected():
    with pytest.raises(ValidationError):
        isolation_readout_voltage(0.0, CFG)


# ------------------------------------------------------------ quantizer


def test_quantizer_endpoints():
    assert adc_quantize(0.0, CFG) == 0
    assert adc_quantize(3.3, CFG) == 4095
    assert adc_quantize(-1.0, CFG) == 0
    assert adc_quantize(5.0, CFG) == 4095


def test_quantizer_rounds_half_up():
    # 1.65 V scales to exactly 2047.5 counts
    assert adc_quantize(1.65, CFG) == 2048
    for k in (10, 100, 3000):
        v = CFG.adc_ref * (k + 0.5) / CFG.adc_levels
        assert adc_quantize(v, CFG) == k + 1


def test_baseline_count():
    # 1.2/3.3 * 4095 = 1489.0909...
    assert CFG.baseline_count == 1489
    assert adc_quantize(CFG.V_ref, CFG) == 1489


def test_ten_bit_mode():
    cfg = ReadoutConfig(adc_bits=10)
    assert adc_quantize(3.3, cfg) == 1023
    with pytest.raises(ValidationError):
        ReadoutConfig(adc_bits=8)


def test_config_validation():
    with pytest.raises(ValidationError):
        ReadoutConfig(V_ref=3.3, adc_ref=3.3)
    with pytest.raises(ValidationError):
        ReadoutConfig(R_FB=0.0)
    with pytest.raises(ValidationError):
        ReadoutConfig(noise_sigma=-1e-3)


# ------------------------------------------------------------ frame scan


def quiet(cfg: ReadoutConfig = CFG) -> ReadoutConfig:
    return ReadoutConfig(
        V_ref=cfg.V_ref,
        R_FB=cfg.R_FB,
        adc_ref=cfg.adc_ref,
        adc_bits=cfg.adc_bits,
        noise_sigma=0.0,
        scan_rate=cfg.scan_rate,
    )


def test_rest_grid_scans_to_uniform_baseline():
    grid = SensorGrid.at_rest("hand", PARAMS)
    frame = scan_frame(grid, quiet(), rng_seed=0)
    assert np.all(frame.values == 1489)


def test_single_crossing_at_R_FB_hits_gain_two_count():
    R = np.full((32, 32), PARAMS.R_max)
    R[10, 20] = CFG.R_FB
    grid = SensorGrid(R, square_mask())
    frame = scan_frame(grid, quiet(), rng_seed=0)
    expect = adc_quantize(2 * CFG.V_ref, CFG)
    assert frame.values[10, 20] == expect == 2978
    others = np.delete(frame.values.ravel(), 10 * 32 + 20)
    assert np.all(others == 1489)


def test_degradation_halves_signal_within_one_lsb():
    rng = np.random.default_rng(13)
    R = 10 ** rng.uniform(3.3, 6.0, size=(32, 32))
    full = scan_frame(SensorGrid(R, square_mask(), 1.0), quiet(), rng_seed=0)
    half = scan_frame(SensorGrid(R, square_mask(), 0.5), quiet(), rng_seed=0)
    sig_full = full.values.astype(int) - 1489
    sig_half = half.values.astype(int) - 1489
    assert np.all(np.abs(sig_half - 0.5 * sig_full) <= 1.0)


def test_scan_is_deterministic_given_seed():
    grid = SensorGrid.at_rest("hand", PARAMS)
    a = scan_frame(grid, CFG, rng_seed=42)
    b = scan_frame(grid, CFG, rng_seed=42)
    assert np.array_equal(a.values, b.values)
    c = scan_frame(grid, CFG, rng_seed=43)
    assert not np.array_equal(a.values, c.values)


def test_more_force_never_lowers_the_count():
    forces = np.linspace(0, 20, 200)
    counts = []
    for f in forces:
        R = np.full((32, 32), PARAMS.R_max)
        R[5, 5] = force_to_resistance(f, PARAMS)
        frame = scan_frame(SensorGrid(R, square_mask()), quiet(), rng_seed=0)
        counts.append(int(frame.values[5, 5]))
    diffs = np.diff(counts)
    assert np.all(diffs >= 0)
    assert counts[-1] > counts[0]


def test_grid_validation():
    with pytest.raises(ValidationError):
        SensorGrid(np.full((32, 32), -1.0), square_mask())
    with pytest.raises(ValidationError):
        SensorGrid(np.full((32, 32), np.inf), square_mask())
    with pytest.raises(ValidationError):
        SensorGrid(np.full((32, 32), 1e3), square_mask(), degradation=0.0)
    with pytest.raises(ValidationError):
        SensorGrid(np.full((32, 32), 1e3), square_mask(), degradation=1.5)


# ------------------------------------------------------------ masks


def test_hand_mask_has_exactly_548_active_cells():
    m = hand_mask()
    assert m.shape == (32, 32) and m.dtype == bool
    assert int(m.sum()) == 548


def test_square_mask_has_all_1024():
    assert int(square_mask().sum()) == 1024


def test_hand_mask_deterministic():
    assert np.array_equal(hand_mask(), hand_mask())


def test_rest_grid_pins_masked_out_cells_at_R_max():
    grid = SensorGrid.from_pressure(
        np.full((32, 32), 5.0), hand_mask(), PARAMS
    )
    assert np.all(grid.resistance[~grid.active_mask] == PARAMS.R_max)
    assert np.all(grid.resistance[grid.active_mask] < PARAMS.R_max)
    assert grid.active_cells == 548
