"""Film physics and readout electronics.

The sensing film is a piezoresistive polymer: its resistance falls with
applied stress. Each electrode crossing is read by an inverting op-amp
stage whose positive input sits at V_ref, so the crossing sees a virtual
V_ref on both sides of the scan except along the one grounded row, and

    V_out = V_ref * (R_FB + R_FSR) / R_FSR

for the crossing being read (gain -R_FB/R_FSR with the V_ref offset
folded in). The ADC digitizes V_out against adc_ref.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..frames import TactileFrame


@dataclass(frozen=True)
class ForceParams:
    """Force-to-resistance law parameters.

    R(F) = R_min + (R_max - R_min) / (1 + F/F_half); strictly decreasing,
    R_max at rest, approaching R_min under heavy load. F_half is the force
    at which the variable part has dropped to half.
    """

    R_min: float = 1e3
    R_max: float = 1e6
    F_half: float = 0.02

    def __post_init__(self):
        if not (0 < self.R_min < self.R_max):
            raise ValidationError("need 0 < R_min < R_max")
        if self.F_half <= 0:
            raise ValidationError("F_half must be positive")


@dataclass(frozen=True)
class ReadoutConfig:
    """Electronics constants for one scan channel.

    V_ref: virtual-ground reference the op-amps hold electrodes at.
    R_FB: feedback resistor of the transimpedance stage.
    adc_ref: ADC full-scale voltage. adc_bits: 10 or 12.
    noise_sigma: additive Gaussian noise on the output voltage, volts.
    scan_rate: full-matrix frames per second.
    """

    V_ref: float = 1.2
    R_FB: float = 180.0
    adc_ref: float = 3.3
    adc_bits: int = 12
    noise_sigma: float = 0.002
    scan_rate: float = 100.0

    def __post_init__(self):
        if not self.V_ref < self.adc_ref:
            raise ValidationError("V_ref must be below adc_ref")
        if self.R_FB <= 0:
            raise ValidationError("R_FB must be positive")
        if self.adc_bits not in (10, 12):
            raise ValidationError("adc_bits must be 10 or 12")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be non-negative")
        if self.scan_rate <= 0:
            raise ValidationError("scan_rate must be positive")

    @property
    def adc_levels(self) -> int:
        return (1 << self.adc_bits) - 1

    @property
    def baseline_count(self) -> int:
        """ADC count of an untouched crossing (the rest value)."""
        return int(adc_quantize(self.V_ref, self))

    @property
    def baseline_exact(self) -> float:
        """Unquantized rest level in count units, for unbiased statistics."""
        return self.V_ref / self.adc_ref * self.adc_levels


def force_to_resistance(F, params: ForceParams = ForceParams()):
    """Crossing resistance in ohms for force F in newtons (scalar or array)."""
    F = np.asarray(F, dtype=np.float64)
    if np.any(F < 0):
        raise ValidationError("force must be non-negative")
    R = params.R_min + (params.R_max - params.R_min) / (1.0 + F / params.F_half)
    return float(R) if R.ndim == 0 else R


def isolation_readout_voltage(R_FSR, cfg: ReadoutConfig = ReadoutConfig()):
    """Output voltage for one crossing under the isolation scan.

    Clamped to [0, adc_ref]: the stage saturates at the rails.
    """
    R_FSR = np.asarray(R_FSR, dtype=np.float64)
    if np.any(R_FSR <= 0):
        raise ValidationError("R_FSR must be positive")
    v = cfg.V_ref * (cfg.R_FB + R_FSR) / R_FSR
    v = np.clip(v, 0.0, cfg.adc_ref)
    return float(v) if v.ndim == 0 else v


def adc_quantize(v, cfg: ReadoutConfig = ReadoutConfig()):
    """Half-up rounding ADC: round(clamp(v, 0, adc_ref)/adc_ref * levels)."""
    v = np.asarray(v, dtype=np.float64)
    scaled = np.clip(v, 0.0, cfg.adc_ref) / cfg.adc_ref * cfg.adc_levels
    counts = np.floor(scaled + 0.5).astype(np.int64)
    return int(counts) if counts.ndim == 0 else counts
