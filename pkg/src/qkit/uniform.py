"""Affine uniform quantizer.

Codes live on a signed symmetric or unsigned asymmetric integer domain;
out-of-range reals clamp to the representable range, rounding is round half
to even, decode is scale * code + offset materialized as float32.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import DataError
from .tensor import Tensor

SYMMETRIC_SIGNED = "symmetric_signed"
ASYMMETRIC_UNSIGNED = "asymmetric_unsigned"

_SIGNEDNESS = (SYMMETRIC_SIGNED, ASYMMETRIC_UNSIGNED)


@dataclass(frozen=True)
class QuantParams:
    """Immutable affine mapping real <-> code for one quantized block."""

    bits: int
    range_low: float
    range_high: float
    scale: float
    offset: float
    signedness: str = SYMMETRIC_SIGNED

    @property
    def domain(self):
        """Inclusive (qmin, qmax) integer code bounds."""
        if self.signedness == SYMMETRIC_SIGNED:
            half = 1 << (self.bits - 1)
            return -half, half - 1
        return 0, (1 << self.bits) - 1


@dataclass(frozen=True)
class QuantizedTensor:
    """Codes plus the params needed to decode them.

    params is a single QuantParams/PwlqParams in per-layer mode or a tuple
    with one entry per channel along channel_axis. region_bits carries the
    piecewise region index per element (None for uniform codes).
    """

    codes: np.ndarray
    params: object
    shape: tuple
    region_bits: np.ndarray | None = None
    channel_axis: int = 0

    @property
    def per_channel(self):
        return isinstance(self.params, tuple)


def make_params(bits, range_low, range_high, signedness=SYMMETRIC_SIGNED):
    """Build affine params over [range_low, range_high].

    Symmetric-signed uses offset 0 (the range should straddle zero);
    asymmetric-unsigned anchors offset at range_low.
    """
    if bits < 1 or bits > 16:
        raise ValueError(f"bits must be in 1..16, got {bits}")
    if signedness not in _SIGNEDNESS:
        raise ValueError(f"unknown signedness {signedness!r}")
    range_low = float(range_low)
    range_high = float(range_high)
    if not (np.isfinite(range_low) and np.isfinite(range_high)):
        raise ValueError("range bounds must be finite")
    if range_low >= range_high:
        raise ValueError(
            f"range_low must be < range_high, got [{range_low}, {range_high}]"
        )
    levels = (1 << bits) - 1
    scale = (range_high - range_low) / levels
    offset = 0.0 if signedness == SYMMETRIC_SIGNED else range_low
    return QuantParams(bits, range_low, range_high, scale, offset, signedness)


def degenerate_params(bits, value=0.0, signedness=SYMMETRIC_SIGNED):
    """Params for a constant block: scale 1, every element encodes to code 0."""
    value = float(value)
    if signedness == SYMMETRIC_SIGNED and value != 0.0:
        raise ValueError("symmetric degenerate params require value 0")
    return QuantParams(bits, value, value, 1.0, value, signedness)


def error_constant(bits):
    """1 / (12 (2^b - 1)^2), the mean squared error per unit range squared."""
    if bits < 1:
        raise ValueError("bits must be >= 1")
    levels = (1 << bits) - 1
    return 1.0 / (12.0 * levels * levels)


def expected_uniform_error(bits, range_low, range_high):
    """Expected MSE of a b-bit uniform quantizer over the given range."""
    if bits < 2:
        raise ValueError("bits must be >= 2")
    if range_low >= range_high:
        raise ValueError("range_low must be < range_high")
    width = float(range_high) - float(range_low)
    return error_constant(bits) * width * width


def _as_array(r):
    if isinstance(r, Tensor):
        return r.data
    arr = np.asarray(r, dtype=np.float32)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if not np.all(np.isfinite(arr)):
        raise DataError("input contains non-finite values")
    return arr


def quantize_uniform(r, params):
    """Encode a real scalar, array, or Tensor to integer codes."""
    if not isinstance(params, QuantParams):
        raise TypeError("params must be QuantParams")
    arr = _as_array(r)
    qmin, qmax = params.domain
    if params.range_low == params.range_high:
        codes = np.zeros(arr.size, dtype=np.int32)
    else:
        codes = backend.encode_uniform(
            np.ascontiguousarray(arr.reshape(-1)),
            params.range_low,
            params.range_high,
            params.scale,
            params.offset,
            qmin,
            qmax,
        )
    return QuantizedTensor(codes.reshape(arr.shape), params, arr.shape)


def _check_domain(codes, params):
    qmin, qmax = params.domain
    if codes.size and (codes.min() < qmin or codes.max() > qmax):
        raise DataError(
            f"codes outside domain [{qmin}, {qmax}] for {params.bits}-bit "
            f"{params.signedness}"
        )


def dequantize_uniform(q):
    """Decode a uniform QuantizedTensor back to a float32 Tensor."""
    if q.per_channel:
        return _dequantize_uniform_channels(q)
    params = q.params
    if not isinstance(params, QuantParams):
        raise TypeError("dequantize_uniform needs uniform params")
    flat = np.ascontiguousarray(q.codes.reshape(-1).astype(np.int32, copy=False))
    _check_domain(flat, params)
    out = backend.decode_uniform(flat, params.scale, params.offset)
    return Tensor(out.reshape(q.shape), channel_axis=q.channel_axis, _validated=True)


def _dequantize_uniform_channels(q):
    moved = np.moveaxis(q.codes, q.channel_axis, 0)
    if len(q.params) != moved.shape[0]:
        raise ValueError("params count does not match channel extent")
    out = np.empty(moved.shape, dtype=np.float32)
    for i, p in enumerate(q.params):
        flat = np.ascontiguousarray(moved[i].reshape(-1).astype(np.int32, copy=False))
        _check_domain(flat, p)
        out[i] = backend.decode_uniform(flat, p.scale, p.offset).reshape(moved[i].shape)
    data = np.moveaxis(out, 0, q.channel_axis)
    return Tensor(
        np.ascontiguousarray(data), channel_axis=q.channel_axis, _validated=True
    )
