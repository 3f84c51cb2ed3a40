"""Binary model-parameter files.

Layout, all little-endian:
  magic "STAGNN1\\0"
  u32 layer count
  per layer:
    u8 kind length, then the kind tag in ASCII
    u8 tensor count
    per tensor: u8 ndim, ndim x u32 dims, then float32 data

Only parameters and buffers are stored; the architecture comes from the
builder, and loading validates kinds and shapes against the built graph.
"""

import struct

import numpy as np

from ..errors import BadMagicError, TruncatedFileError, ValidationError
from .layers import flatten_layers

MODEL_MAGIC = b"STAGNN1\x00"


def save_params(path, layers):
    flat = flatten_layers(layers)
    blob = bytearray(MODEL_MAGIC)
    blob += struct.pack("<I", len(flat))
    for layer in flat:
        kind = layer.kind.encode("ascii")
        tensors = layer.state_tensors()
        blob += struct.pack("<BB", len(kind), len(tensors))
        blob += kind
        for t in tensors:
            t = np.asarray(t)
            blob += struct.pack("<B", t.ndim)
            blob += struct.pack(f"<{t.ndim}I", *t.shape)
            blob += t.astype("<f4").tobytes()
    with open(path, "wb") as f:
        f.write(bytes(blob))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise TruncatedFileError(
                f"model file ends at byte {len(self.data)}, "
                f"needed {self.pos + n}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_params(path, layers):
    """Fill an already-built graph's tensors from a parameter file.

    The file's layer kinds and tensor shapes must match the graph exactly;
    values are cast to each destination tensor's dtype.
    """
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != MODEL_MAGIC:
        raise BadMagicError(f"not a model parameter file: magic {data[:8]!r}")
    r = _Reader(data)
    r.pos = 8
    (count,) = r.unpack("<I")
    flat = flatten_layers(layers)
    if count != len(flat):
        raise ValidationError(
            f"model file has {count} layers, graph has {len(flat)}"
        )
    for idx, layer in enumerate(flat):
        klen, tcount = r.unpack("<BB")
        kind = r.take(klen).decode("ascii")
        if kind != layer.kind:
            raise ValidationError(
                f"layer {idx}: file says {kind!r}, graph has {layer.kind!r}"
            )
        tensors = layer.state_tensors()
        if tcount != len(tensors):
            raise ValidationError(
                f"layer {idx} ({kind}): file has {tcount} tensors, "
                f"graph has {len(tensors)}"
            )
        for t in tensors:
            (ndim,) = r.unpack("<B")
            dims = r.unpack(f"<{ndim}I") if ndim else ()
            if dims != t.shape:
                raise ValidationError(
                    f"layer {idx} ({kind}): tensor shape {dims} does not "
                    f"match graph shape {t.shape}"
                )
            n = int(np.prod(dims, dtype=np.int64)) if ndim else 1
            raw = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(dims)
            np.copyto(t, raw)
    if r.pos != len(data):
        raise ValidationError(
            f"{len(data) - r.pos} trailing bytes after model parameters"
        )
