"""Physics and electronics simulator for the tactile matrix."""

from .acquire import (
    SensorGrid,
    SimulationPlan,
    generate_dataset,
    iter_plan_recordings,
    scan_frame,
    simulate_recording,
)
from .circuit import (
    DriveSpec,
    crosstalk_solve,
    effective_resistances,
    floating_scan_conductances,
    isolation_scan_via_nodal,
    nodal_oracle,
)
from .masks import HAND_ACTIVE_CELLS, hand_mask, mask_by_name, square_mask
from .physics import (
    ForceParams,
    ReadoutConfig,
    adc_quantize,
    force_to_resistance,
    isolation_readout_voltage,
)
from .scenes import (
    CONTACT_PRESSURE_FLOOR,
    DEFAULT_CLASS_NAMES,
    EMPTY_HAND_CLASS,
    EMPTY_HAND_MAX_PRESSURE,
    SLIDE_PROFILES,
    ForceScene,
    generate_scene,
    render_footprint,
)

__all__ = [
    "SensorGrid",
    "SimulationPlan",
    "generate_dataset",
    "iter_plan_recordings",
    "scan_frame",
    "simulate_recording",
    "DriveSpec",
    "crosstalk_solve",
    "effective_resistances",
    "floating_scan_conductances",
    "isolation_scan_via_nodal",
    "nodal_oracle",
    "HAND_ACTIVE_CELLS",
    "hand_mask",
    "mask_by_name",
    "square_mask",
    "ForceParams",
    "ReadoutConfig",
    "adc_quantize",
    "force_to_resistance",
    "isolation_readout_voltage",
    "CONTACT_PRESSURE_FLOOR",
    "DEFAULT_CLASS_NAMES",
    "EMPTY_HAND_CLASS",
    "EMPTY_HAND_MAX_PRESSURE",
    "SLIDE_PROFILES",
    "ForceScene",
    "generate_scene",
    "render_footprint",
]
