"""Simulated resistive tactile-glove pipeline.

Submodules:
    frames     dataset containers + binary serialization
    calib      contact thresholds from empty-hand frames
    sensorsim  film physics, readout circuit, scenes, frame synthesis
    nn         tensor layers, loss, optimizer (numpy, hand-rolled backprop)
    model      network assembly, cost profiling, single-frame inference
    evaluate   training loop, random and leave-one-session-out CV
    analysis   degradation factors, class averages, slip detection
    power      duty-cycled power and battery-life model
    report     JSON/CSV/PGM writers and matplotlib figure renderers
    config     run configuration (strict JSON)
    cli        command-line entry point
"""

__version__ = "0.1.0"
