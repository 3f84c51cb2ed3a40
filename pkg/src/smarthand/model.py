"""The tactile classifier: residual CNN over one 32x32 frame, 17 logits.

Stem conv (16 filters) -> maxpool -> residual block at 16 channels ->
residual block widening to 32 -> average pool -> dropout -> dense.
An optional IMU branch (6 -> 30 -> 3) concatenates onto the flattened
tactile features before the classifier.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .frames import NUM_CLASSES, TactileFrame
from .nn import (
    AvgPool2d,
    BatchNorm2d,
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    MaxPool2d,
    ReLU,
    Residual,
    cast_layers,
    run_backward,
    run_forward,
    softmax,
)
from .nn.serialize import load_params, save_params
from .sensorsim.physics import ReadoutConfig

INPUT_SIDE = 32
FLAT_WIDTH = 32 * 7 * 7
IMU_FEATURES = 3
IMU_INPUTS = 6
IMU_SCALE = 32768.0  # raw int16 accel/gyro counts to [-1, 1)


class ModelGraph:
    """Layer lists plus the wiring between them; training mode is mutable."""

    def __init__(self, tactile, dropout, classifier, imu_branch=None):
        self.tactile = list(tactile)
        self.dropout = dropout
        self.classifier = classifier
        self.imu_branch = list(imu_branch) if imu_branch else None

    @property
    def with_imu(self) -> bool:
        return self.imu_branch is not None

    def forward(self, x, imu=None, mode="train"):
        if (imu is not None) != self.with_imu:
            raise ValidationError(
                "imu input must be supplied exactly when the graph has the branch"
            )
        feat = run_forward(self.tactile, x, mode)
        feat = self.dropout.forward(feat, mode)
        if self.with_imu:
            side = run_forward(self.imu_branch, imu, mode)
            feat = np.concatenate([feat, side], axis=1)
        return self.classifier.forward(feat, mode)

    def backward(self, grad_logits):
        g = self.classifier.backward(grad_logits)
        if self.with_imu:
            g_feat, g_side = g[:, :FLAT_WIDTH], g[:, FLAT_WIDTH:]
            run_backward(self.imu_branch, g_side)
        else:
            g_feat = g
        g_feat = self.dropout.backward(g_feat)
        return run_backward(self.tactile, g_feat)

    def _layer_lists(self):
        lists = [self.tactile, [self.dropout]]
        if self.with_imu:
            lists.append(self.imu_branch)
        lists.append([self.classifier])
        return lists

    def all_layers(self):
        """Serialization/profile order: tactile, dropout, imu branch, classifier."""
        out = []
        for group in self._layer_lists():
            out.extend(group)
        return out

    def params(self):
        out = []
        for group in self._layer_lists():
            for layer in group:
                out.extend(layer.params())
        return out

    def grads(self):
        out = []
        for group in self._layer_lists():
            for layer in group:
                out.extend(layer.grads())
        return out

    def astype(self, dtype):
        """Deep copy with parameters and buffers cast (e.g. float32 inference)."""
        g = copy.deepcopy(self)
        for group in g._layer_lists():
            cast_layers(group, dtype)
        return g

    def save(self, path):
        save_params(path, self.all_layers())

    def load(self, path):
        load_params(path, self.all_layers())


def build_smarthand_net(with_imu: bool = False, seed: int = 0,
                        dropout_rate: float = 0.2) -> ModelGraph:
    """Deterministic build: same seed, bit-identical parameters."""
    rng = np.random.default_rng(seed)
    tactile = [
        Conv2d(1, 16, 3, stride=1, padding=1, rng=rng),
        BatchNorm2d(16),
        ReLU(),
        MaxPool2d(3, 2, 1),
        Residual(
            body=[
                Conv2d(16, 16, 3, stride=1, padding=1, rng=rng),
                BatchNorm2d(16),
                ReLU(),
                Conv2d(16, 16, 3, stride=1, padding=1, rng=rng),
                BatchNorm2d(16),
            ]
        ),
        Residual(
            body=[
                Conv2d(16, 32, 3, stride=1, padding=1, rng=rng),
                BatchNorm2d(32),
                ReLU(),
                Conv2d(32, 32, 3, stride=1, padding=1, rng=rng),
                BatchNorm2d(32),
            ],
            shortcut=[
                Conv2d(16, 32, 1, stride=1, padding=0, rng=rng),
                BatchNorm2d(32),
            ],
        ),
        AvgPool2d(3, 2, 0),
        Flatten(),
    ]
    drop_seed = int(np.random.SeedSequence((seed, 7919)).generate_state(1)[0])
    drop = Dropout(dropout_rate, seed=drop_seed)
    imu_branch = None
    width = FLAT_WIDTH
    if with_imu:
        imu_branch = [Dense(IMU_INPUTS, 30, rng=rng), ReLU(),
                      Dense(30, IMU_FEATURES, rng=rng)]
        width += IMU_FEATURES
    classifier = Dense(width, NUM_CLASSES, rng=rng)
    return ModelGraph(tactile, drop, classifier, imu_branch)


# ---------------------------------------------------------------------------
# profiling

@dataclass
class ProfileReport:
    macc_total: int
    param_count: int
    param_bytes_32bit: int
    peak_activation_bytes: int
    layers: list = field(default_factory=list)

    def to_json_dict(self):
        return {
            "macc_total": self.macc_total,
            "param_count": self.param_count,
            "param_bytes_32bit": self.param_bytes_32bit,
            "peak_activation_bytes": self.peak_activation_bytes,
            "layers": self.layers,
        }


def _conv_out(shape, layer):
    c, h, w = shape
    ho = (h + 2 * layer.pad - layer.k) // layer.s + 1
    wo = (w + 2 * layer.pad - layer.k) // layer.s + 1
    return ho, wo


def _leaf_entry(name, layer, in_shape):
    """(entry dict, out_shape); shapes are (C, H, W) or (F,) tuples."""
    kind = layer.kind
    if kind == "conv2d":
        ho, wo = _conv_out(in_shape, layer)
        out = (layer.c_out, ho, wo)
        macc = layer.k * layer.k * layer.c_in * layer.c_out * ho * wo
    elif kind == "dense":
        out = (layer.n_out,)
        macc = layer.n_in * layer.n_out
    elif kind in ("maxpool", "avgpool"):
        _, ho, wo = in_shape[0], *_conv_out(in_shape, layer)
        out = (in_shape[0], ho, wo)
        macc = 0
    elif kind == "flatten":
        out = (int(np.prod(in_shape)),)
        macc = 0
    else:  # batchnorm, relu, dropout keep their shape and cost no MACCs
        out = in_shape
        macc = 0
    params = sum(int(p.size) for p in layer.params())
    entry = {
        "name": name,
        "kind": kind,
        "out_shape": list(out),
        "macc": int(macc),
        "params": params,
    }
    return entry, out


def _walk(layers, in_shape, prefix, held, entries):
    shape = in_shape
    for i, layer in enumerate(layers):
        name = f"{prefix}{i:02d}_{layer.kind}"
        if isinstance(layer, Residual):
            block_in = shape
            body_out = _walk(layer.body, shape,
                             name + ".body.", held + _elems(shape), entries)
            if layer.shortcut:
                short_out = _walk(layer.shortcut, block_in,
                                  name + ".shortcut.",
                                  held + _elems(body_out), entries)
            else:
                short_out = block_in
            if body_out != short_out:
                raise ValidationError(
                    f"residual branches disagree: {body_out} vs {short_out}"
                )
            entries.append({
                "name": name, "kind": "residual_add",
                "out_shape": list(body_out), "macc": 0, "params": 0,
                "live_elems": 3 * _elems(body_out) + held,
            })
            shape = body_out
        else:
            entry, out = _leaf_entry(name, layer, shape)
            entry["live_elems"] = _elems(shape) + _elems(out) + held
            entries.append(entry)
            shape = out
    return shape


def _elems(shape):
    return int(np.prod(shape))


def profile_layers(layers, in_shape, prefix=""):
    """Entries and final shape for a plain layer list; shapes are (C, H, W)
    spatial or (F,) flat tuples."""
    entries: list = []
    out_shape = _walk(list(layers), tuple(in_shape), prefix, 0, entries)
    for e in entries:
        e.pop("live_elems", None)
    return entries, out_shape


def profile(g: ModelGraph) -> ProfileReport:
    """Static MACC/parameter/activation accounting at batch size 1."""
    entries: list = []
    shape = _walk(g.tactile, (1, INPUT_SIDE, INPUT_SIDE), "", 0, entries)
    shape = _walk([g.dropout], shape, "head.", 0, entries)
    if g.with_imu:
        imu_out = _walk(g.imu_branch, (IMU_INPUTS,), "imu.", _elems(shape), entries)
        shape = (shape[0] + imu_out[0],)
    _walk([g.classifier], shape, "head.", 0, entries)
    macc_total = sum(e["macc"] for e in entries)
    param_count = sum(e["params"] for e in entries)
    peak = 4 * max(e.pop("live_elems") for e in entries)
    return ProfileReport(
        macc_total=macc_total,
        param_count=param_count,
        param_bytes_32bit=4 * param_count,
        peak_activation_bytes=peak,
        layers=entries,
    )


# ---------------------------------------------------------------------------
# inference

_BASELINE = float(ReadoutConfig().baseline_count)


def normalize_frame(values) -> np.ndarray:
    """ADC counts to network input: (count - baseline) / 4095."""
    v = np.asarray(values, dtype=np.float64).reshape(INPUT_SIDE, INPUT_SIDE)
    return (v - _BASELINE) / 4095.0


def infer(g: ModelGraph, frame, imu=None) -> np.ndarray:
    """Class probabilities for one frame (plus IMU features if built so)."""
    values = frame.values if isinstance(frame, TactileFrame) else frame
    dtype = g.classifier.w.dtype
    x = normalize_frame(values).astype(dtype).reshape(1, 1, INPUT_SIDE, INPUT_SIDE)
    imu_in = None
    if imu is not None:
        imu_in = (np.asarray(imu, dtype=np.float64) / IMU_SCALE).astype(dtype)
        if imu_in.shape != (IMU_INPUTS,):
            raise ValidationError(
                f"expected {IMU_INPUTS} imu features, got shape {imu_in.shape}"
            )
        imu_in = imu_in.reshape(1, IMU_INPUTS)
    logits = g.forward(x, imu=imu_in, mode="eval")
    return softmax(logits)[0].astype(np.float64)
