"""Dense float32 tensor container, channel slicing, statistics, and QTNS file I/O.

QTNS binary format v1 (little-endian): magic ``QTNS``, u32 version = 1,
u32 dtype code (0 = float32), u32 rank, rank x u64 extents, u32 channel-axis
hint, then the raw row-major float32 payload. Payload bytes must equal
product(extents) * 4 and every value must be finite.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError, FormatError

_MAGIC = b"QTNS"
_VERSION = 1
_DTYPE_F32 = 0


class Tensor:
    """Immutable-by-convention dense array of float32 values.

    ``channel_axis`` tags which axis holds output channels (default 0);
    per-channel quantization slices along it.
    """

    __slots__ = ("data", "channel_axis")

    def __init__(self, data, channel_axis: int = 0, _validated: bool = False):
        if _validated:
            arr = data
        else:
            arr = np.asarray(data, dtype=np.float32)
            if arr.ndim == 0:
                arr = arr.reshape(1)
            if not np.all(np.isfinite(arr)):
                raise DataError("tensor contains NaN or Inf")
        if arr.ndim == 0 or not (0 <= channel_axis < arr.ndim):
            raise ValueError(f"channel_axis {channel_axis} out of range for rank {arr.ndim}")
        self.data = arr
        self.channel_axis = channel_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def flat(self) -> np.ndarray:
        """Row-major flat float32 view (copies only if the data is a strided view)."""
        return np.ascontiguousarray(self.data).reshape(-1)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Tensor)
            and self.shape == other.shape
            and self.channel_axis == other.channel_axis
            and bool(np.array_equal(self.data, other.data))
        )

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, channel_axis={self.channel_axis})"


@dataclass(frozen=True)
class TensorStats:
    """Summary statistics of one tensor or channel view."""

    min: float
    max: float
    mean: float
    std: float
    absmax: float
    count: int


def stats(t: Tensor) -> TensorStats:
    """Exact min/max plus mean/std accumulated in double precision.

    Uses the population (divide-by-N) convention for std: the tensor is the
    full population the distribution fit models, not a sample from it.
    """
    arr = t.data if isinstance(t, Tensor) else np.asarray(t, dtype=np.float32)
    if arr.size == 0:
        raise ValueError("stats of an empty tensor")
    lo = float(arr.min())
    hi = float(arr.max())
    mean = float(arr.mean(dtype=np.float64))
    std = float(arr.std(dtype=np.float64))
    return TensorStats(lo, hi, mean, std, max(abs(lo), abs(hi)), int(arr.size))


def channel_views(t: Tensor, axis: int | None = None) -> list[Tensor]:
    """Non-overlapping views of ``t`` along ``axis`` (default: its channel axis).

    Concatenating the views along the axis reconstructs the tensor; each view
    keeps the row-major order of its elements.
    """
    if axis is None:
        axis = t.channel_axis
    if not (0 <= axis < t.data.ndim):
        raise ValueError(f"axis {axis} out of range for rank {t.data.ndim}")
    moved = np.moveaxis(t.data, axis, 0)
    out = []
    for i in range(moved.shape[0]):
        view = moved[i]
        if view.ndim == 0:
            view = view.reshape(1)
        out.append(Tensor(view, channel_axis=0, _validated=True))
    return out


def save_tensor(t: Tensor, path) -> None:
    """Write ``t`` to ``path`` in QTNS v1 format."""
    arr = np.ascontiguousarray(t.data, dtype="<f4")
    header = struct.pack(
        "<4sIII", _MAGIC, _VERSION, _DTYPE_F32, arr.ndim
    ) + struct.pack(f"<{arr.ndim}Q", *arr.shape) + struct.pack("<I", t.channel_axis)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())


def load_tensor(path) -> Tensor:
    """Read a QTNS v1 file; rejects malformed headers and non-finite payloads."""
    with open(path, "rb") as fh:
        raw = fh.read()
    rank, extents, axis, offset = _read_header(raw, expect_dtype=_DTYPE_F32)
    count = 1
    for e in extents:
        count *= e
    payload = raw[offset:]
    if len(payload) != count * 4:
        raise FormatError(
            f"payload is {len(payload)} bytes, expected {count * 4} for shape {extents}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(extents).astype(np.float32)
    if not np.all(np.isfinite(arr)):
        raise DataError("payload contains NaN or Inf")
    return Tensor(arr, channel_axis=axis, _validated=True)


def _read_header(raw: bytes, expect_dtype: int) -> tuple[int, tuple[int, ...], int, int]:
    """Parse the shared QTNS-style header; returns (rank, extents, axis, payload offset)."""
    if len(raw) < 16:
        raise FormatError("file shorter than the fixed header")
    magic, version, dtype, rank = struct.unpack_from("<4sIII", raw, 0)
    if magic != _MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise FormatError(f"unsupported version {version}")
    if dtype != expect_dtype:
        raise FormatError(f"unsupported dtype code {dtype}")
    if rank == 0 or rank > 32:
        raise FormatError(f"implausible rank {rank}")
    need = 16 + 8 * rank + 4
    if len(raw) < need:
        raise FormatError("header truncated")
    extents = struct.unpack_from(f"<{rank}Q", raw, 16)
    if any(e == 0 for e in extents):
        raise FormatError(f"zero extent in shape {extents}")
    (axis,) = struct.unpack_from("<I", raw, 16 + 8 * rank)
    if axis >= rank:
        raise FormatError(f"channel axis {axis} out of range for rank {rank}")
    return rank, tuple(int(e) for e in extents), int(axis), need
