"""Tactile dataset containers and their binary serialization.

A frame is the full 32x32 scan of the sensor matrix: row index is the
driven electrode, column index the sensed electrode. Values are raw ADC
counts (12 bit, stored as u16 on disk with the top bits zero). Frames are
grouped into recordings (one manipulation of one object), recordings into
sessions (one donning of the glove), sessions into a dataset.

File format (little-endian throughout):

    magic "STAGDS1\\0" (8 bytes)
    u16 class_count, then class_count x (u16 byte_len + UTF-8 name)
    u32 recording_count
    per recording:
        u8 session_id, u8 label, u32 frame_count, u32 imu_count
        frame_count x (1024 u16 values + u64 timestamp_us)
        imu_count x (3 i16 accel + 3 i16 gyro + u64 timestamp_us)
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import BadMagicError, TruncatedFileError, ValidationError

GRID: int = 32
TAXELS: int = GRID * GRID
ADC_MAX: int = 4095
NUM_CLASSES: int = 17
RECORDING_BUFFER_FRAMES: int = 4096
FRAME_PERIOD_US: int = 10_000  # 100 Hz scan clock

DATASET_MAGIC = b"STAGDS1\x00"

# On-disk record layouts, used for bulk (de)serialization.
_FRAME_DTYPE = np.dtype([("values", "<u2", (TAXELS,)), ("timestamp_us", "<u8")])
_IMU_DTYPE = np.dtype(
    [("accel", "<i2", (3,)), ("gyro", "<i2", (3,)), ("timestamp_us", "<u8")]
)


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TactileFrame:
    """One full scan of the 32x32 matrix.

    values: ADC counts, each in [0, 4095].
    timestamp_us: microseconds since recording start.
    """

    values: np.ndarray
    timestamp_us: int

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (GRID, GRID):
            raise ValidationError(f"frame must be {GRID}x{GRID}, got {v.shape}")
        if not np.issubdtype(v.dtype, np.integer):
            raise ValidationError("frame values must be integers")
        if v.size and (v.min() < 0 or v.max() > ADC_MAX):
            raise ValidationError("frame values outside [0, 4095]")
        object.__setattr__(self, "values", _as_readonly(v.astype(np.uint16)))
        if self.timestamp_us < 0:
            raise ValidationError("timestamp_us must be non-negative")
        object.__setattr__(self, "timestamp_us", int(self.timestamp_us))

    def __eq__(self, other) -> bool:
        if not isinstance(other, TactileFrame):
            return NotImplemented
        return self.timestamp_us == other.timestamp_us and np.array_equal(
            self.values, other.values
        )

    def __hash__(self):
        return hash((self.timestamp_us, self.values.tobytes()))


@dataclass(frozen=True)
class ImuSample:
    """One accelerometer + gyroscope reading, raw signed 16-bit counts."""

    accel: np.ndarray
    gyro: np.ndarray
    timestamp_us: int

    def __post_init__(self):
        for name in ("accel", "gyro"):
            a = np.asarray(getattr(self, name))
            if a.shape != (3,):
                raise ValidationError(f"{name} must have 3 components")
            if not np.issubdtype(a.dtype, np.integer):
                raise ValidationError(f"{name} must be integer counts")
            if a.min() < -32768 or a.max() > 32767:
                raise ValidationError(f"{name} outside signed 16-bit range")
            object.__setattr__(self, name, _as_readonly(a.astype(np.int16)))
        if self.timestamp_us < 0:
            raise ValidationError("timestamp_us must be non-negative")
        object.__setattr__(self, "timestamp_us", int(self.timestamp_us))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImuSample):
            return NotImplemented
        return (
            self.timestamp_us == other.timestamp_us
            and np.array_equal(self.accel, other.accel)
            and np.array_equal(self.gyro, other.gyro)
        )

    def __hash__(self):
        return hash((self.timestamp_us, self.accel.tobytes(), self.gyro.tobytes()))


@dataclass(frozen=True)
class Recording:
    """Frames + IMU stream for one manipulation of one object."""

    label: int
    session_id: int
    frames: tuple[TactileFrame, ...]
    imu: tuple[ImuSample, ...] = ()

    def __post_init__(self):
        if not 0 <= self.label < NUM_CLASSES:
            raise ValidationError(f"label must be in [0, {NUM_CLASSES - 1}]")
        if not 1 <= self.session_id <= 255:
            raise ValidationError("session_id must be in [1, 255]")
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "imu", tuple(self.imu))
        for seq, what in ((self.frames, "frame"), (self.imu, "IMU")):
            ts = [s.timestamp_us for s in seq]
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValidationError(f"{what} timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class Dataset:
    """All recordings of one data collection, grouped by session."""

    class_names: tuple[str, ...]
    sessions: Mapping[int, tuple[Recording, ...]]

    def __post_init__(self):
        names = tuple(str(n) for n in self.class_names)
        if len(names) != NUM_CLASSES or len(set(names)) != NUM_CLASSES:
            raise ValidationError(f"need exactly {NUM_CLASSES} distinct class names")
        object.__setattr__(self, "class_names", names)
        sessions = {int(k): tuple(v) for k, v in dict(self.sessions).items()}
        for sid, recs in sessions.items():
            for r in recs:
                if r.session_id != sid:
                    raise ValidationError(
                        f"recording with session_id {r.session_id} filed under {sid}"
                    )
        object.__setattr__(self, "sessions", sessions)

    @classmethod
    def from_recordings(
        cls, class_names: Sequence[str], recordings: Sequence[Recording]
    ) -> "Dataset":
        by_session: dict[int, list[Recording]] = {}
        for r in recordings:
            by_session.setdefault(r.session_id, []).append(r)
        return cls(tuple(class_names), {k: tuple(v) for k, v in by_session.items()})

    def recordings(self) -> Iterator[Recording]:
        """All recordings, session ids ascending (the on-disk order)."""
        for sid in sorted(self.sessions):
            yield from self.sessions[sid]

    @property
    def recording_count(self) -> int:
        return sum(len(v) for v in self.sessions.values())

    @property
    def frame_count(self) -> int:
        return sum(len(r) for r in self.recordings())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.class_names == other.class_names
            and sorted(self.sessions) == sorted(other.sessions)
            and all(self.sessions[k] == other.sessions[k] for k in self.sessions)
        )


def _recording_bytes(rec: Recording) -> bytes:
    chunks = [
        struct.pack("<BBII", rec.session_id, rec.label, len(rec.frames), len(rec.imu))
    ]
    if rec.frames:
        block = np.empty(len(rec.frames), dtype=_FRAME_DTYPE)
        for i, f in enumerate(rec.frames):
            block["values"][i] = f.values.reshape(-1)
            block["timestamp_us"][i] = f.timestamp_us
        chunks.append(block.tobytes())
    if rec.imu:
        block = np.empty(len(rec.imu), dtype=_IMU_DTYPE)
        for i, s in enumerate(rec.imu):
            block["accel"][i] = s.accel
            block["gyro"][i] = s.gyro
            block["timestamp_us"][i] = s.timestamp_us
        chunks.append(block.tobytes())
    return b"".join(chunks)


def _header_bytes(class_names: Sequence[str], recording_count: int) -> bytes:
    chunks = [DATASET_MAGIC, struct.pack("<H", len(class_names))]
    for name in class_names:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValidationError("class name too long")
        chunks.append(struct.pack("<H", len(raw)) + raw)
    chunks.append(struct.pack("<I", recording_count))
    return b"".join(chunks)


def write_dataset(dataset: Dataset, path) -> None:
    """Serialize a dataset; read_dataset(path) restores it bit-exactly."""
    with open(path, "wb") as fh:
        fh.write(_header_bytes(dataset.class_names, dataset.recording_count))
        for rec in dataset.recordings():
            fh.write(_recording_bytes(rec))


def stream_dataset(path, class_names: Sequence[str], recordings, count: int) -> int:
    """Write recordings from an iterator without holding them all in memory.

    The recording count goes in the header, so it must be known up front
    and match what the iterator yields. Returns total frames written.
    """
    names = tuple(str(n) for n in class_names)
    if len(names) != NUM_CLASSES or len(set(names)) != NUM_CLASSES:
        raise ValidationError(f"need exactly {NUM_CLASSES} distinct class names")
    written = 0
    frames_total = 0
    with open(path, "wb") as fh:
        fh.write(_header_bytes(names, count))
        for rec in recordings:
            if written == count:
                raise ValidationError(f"iterator yielded more than {count} recordings")
            fh.write(_recording_bytes(rec))
            written += 1
            frames_total += len(rec.frames)
    if written != count:
        raise ValidationError(f"header promised {count} recordings, got {written}")
    return frames_total


class _Cursor:
    """Sequential reader that raises TruncatedFileError on short reads."""

    def __init__(self, data: bytes):
        self.data = data
        self.off = 0

    def take(self, n: int) -> memoryview:
        if self.off + n > len(self.data):
            raise TruncatedFileError(
                f"needed {n} bytes at offset {self.off}, file has {len(self.data)}"
            )
        view = memoryview(self.data)[self.off : self.off + n]
        self.off += n
        return view

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    @property
    def exhausted(self) -> bool:
        return self.off == len(self.data)


def read_dataset(path) -> Dataset:
    """Parse and fully validate a dataset file.

    Raises BadMagicError / TruncatedFileError / ValidationError for the
    three failure kinds; never returns a partially-read dataset.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    cur = _Cursor(data)
    magic = bytes(cur.take(len(DATASET_MAGIC)))
    if magic != DATASET_MAGIC:
        raise BadMagicError(f"expected {DATASET_MAGIC!r}, got {magic!r}")
    (class_count,) = cur.unpack("<H")
    names = []
    for _ in range(class_count):
        (nlen,) = cur.unpack("<H")
        try:
            names.append(str(cur.take(nlen), "utf-8"))
        except UnicodeDecodeError as e:
            raise ValidationError(f"class name is not valid UTF-8: {e}") from None
    (recording_count,) = cur.unpack("<I")
    recordings = []
    for _ in range(recording_count):
        session_id, label, frame_count, imu_count = cur.unpack("<BBII")
        fblock = np.frombuffer(
            cur.take(frame_count * _FRAME_DTYPE.itemsize), dtype=_FRAME_DTYPE
        )
        if fblock.size and fblock["values"].max() > ADC_MAX:
            raise ValidationError("frame value above 4095 in file")
        frames = tuple(
            TactileFrame(
                fblock["values"][i].reshape(GRID, GRID),
                int(fblock["timestamp_us"][i]),
            )
            for i in range(frame_count)
        )
        iblock = np.frombuffer(
            cur.take(imu_count * _IMU_DTYPE.itemsize), dtype=_IMU_DTYPE
        )
        imu = tuple(
            ImuSample(
                iblock["accel"][i], iblock["gyro"][i], int(iblock["timestamp_us"][i])
            )
            for i in range(imu_count)
        )
        recordings.append(Recording(label, session_id, frames, imu))
    if not cur.exhausted:
        raise ValidationError(f"{len(data) - cur.off} trailing bytes after content")
    return Dataset.from_recordings(names, recordings)


def frame_stats(frames: Sequence[TactileFrame]) -> dict:
    """Summary over a frame sequence.

    mean: over all 1024*N values; max: single largest count;
    active_taxel_count: taxels whose maximum over the sequence is > 0.
    """
    if len(frames) == 0:
        raise ValidationError("frame_stats needs at least one frame")
    stack = np.stack([f.values for f in frames])
    peak = stack.max(axis=0)
    return {
        "mean": float(stack.mean()),
        "max": int(stack.max()),
        "active_taxel_count": int(np.count_nonzero(peak)),
    }


def synthesize_timestamps(n: int, period_us: int = FRAME_PERIOD_US) -> np.ndarray:
    """Timestamps 0, period, 2*period, ... as the acquisition clock would stamp."""
    return np.arange(n, dtype=np.uint64) * np.uint64(period_us)
