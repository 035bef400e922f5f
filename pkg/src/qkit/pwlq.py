"""Piecewise linear quantizer: breakpoints split the magnitude range.

A b-bit code spends one sign-and-region budget bit (stored separately as a
region index) and quantizes the magnitude within its region with a
(b-1)-bit asymmetric uniform quantizer. K breakpoints give K+1 regions;
region 0 is [0, p_1] (closed at the breakpoint), region i is (p_i, p_i+1].

Codes use a complement convention for negative inputs (code = -mag - 1) so
sign survives even when the magnitude code is 0, and every code fits the
signed b-1 bit byte range.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import DataError
from .tensor import Tensor
from .uniform import (
    ASYMMETRIC_UNSIGNED,
    QuantParams,
    QuantizedTensor,
    dequantize_uniform,
    make_params,
    quantize_uniform,
)

MAX_BREAKPOINTS = 3

PER_LAYER = "per_layer"
PER_CHANNEL = "per_channel"


@dataclass(frozen=True)
class PwlqParams:
    """Breakpoint layout plus the per-region affine magnitude mappings.

    shift is a decode-side additive term (0 until a bias correction is
    folded in); it applies after the sign is reattached.
    """

    bits: int
    m: float
    breakpoints: tuple
    region_params: tuple
    granularity: str = PER_LAYER
    shift: float = 0.0

    @property
    def n_regions(self):
        return len(self.breakpoints) + 1

    @property
    def magnitude_bits(self):
        return self.bits - 1


def make_pwlq_params(bits, m, breakpoints, granularity=PER_LAYER):
    """Validate the layout and derive per-region (b-1)-bit magnitude params."""
    if bits < 2 or bits > 8:
        raise ValueError(f"bits must be in 2..8, got {bits}")
    m = float(m)
    if not (np.isfinite(m) and m > 0):
        raise ValueError("m must be finite and positive")
    bps = tuple(float(p) for p in breakpoints)
    if not 1 <= len(bps) <= MAX_BREAKPOINTS:
        raise ValueError(f"need 1..{MAX_BREAKPOINTS} breakpoints, got {len(bps)}")
    if granularity not in (PER_LAYER, PER_CHANNEL):
        raise ValueError(f"unknown granularity {granularity!r}")
    edges = (0.0,) + bps + (m,)
    for lo, hi in zip(edges, edges[1:]):
        if not lo < hi:
            raise ValueError(
                f"breakpoints must increase strictly inside (0, {m}), got {bps}"
            )
    region_params = tuple(
        make_params(bits - 1, lo, hi, ASYMMETRIC_UNSIGNED)
        for lo, hi in zip(edges, edges[1:])
    )
    return PwlqParams(bits, m, bps, region_params, granularity)


def _edges_scales_offsets(params):
    edges = np.array((0.0,) + params.breakpoints + (params.m,), dtype=np.float64)
    scales = np.array([rp.scale for rp in params.region_params], dtype=np.float64)
    offsets = np.array([rp.offset for rp in params.region_params], dtype=np.float64)
    return edges, scales, offsets


def _as_array(r):
    if isinstance(r, Tensor):
        return r.data
    arr = np.asarray(r, dtype=np.float32)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if not np.all(np.isfinite(arr)):
        raise DataError("input contains non-finite values")
    return arr


def quantize_pwlq(t, params):
    """Encode to (codes, region indices); |r| beyond m clamps to m.

    params may be a tuple (one PwlqParams or QuantParams per channel along
    the input's channel axis) for per-channel mode.
    """
    if isinstance(params, tuple):
        return _quantize_channels(t, params)
    if not isinstance(params, PwlqParams):
        raise TypeError("params must be PwlqParams")
    arr = _as_array(t)
    edges, scales, _ = _edges_scales_offsets(params)
    mag_max = (1 << (params.bits - 1)) - 1
    codes, regions = backend.encode_pwlq(
        np.ascontiguousarray(arr.reshape(-1)), edges, scales, mag_max
    )
    axis = t.channel_axis if isinstance(t, Tensor) else 0
    return QuantizedTensor(
        codes.reshape(arr.shape),
        params,
        arr.shape,
        region_bits=regions.reshape(arr.shape),
        channel_axis=axis,
    )


def dequantize_pwlq(q):
    """Decode a piecewise QuantizedTensor to a float32 Tensor."""
    if q.per_channel:
        return _dequantize_channels(q)
    params = q.params
    if not isinstance(params, PwlqParams):
        raise TypeError("dequantize_pwlq needs piecewise params")
    if q.region_bits is None:
        raise DataError("piecewise codes require region indices")
    mag_max = (1 << (params.bits - 1)) - 1
    flat = np.ascontiguousarray(q.codes.reshape(-1).astype(np.int32, copy=False))
    regs = np.ascontiguousarray(q.region_bits.reshape(-1))
    if flat.size:
        mags = np.where(flat < 0, -flat - 1, flat)
        if mags.max() > mag_max or flat.min() < -mag_max - 1:
            raise DataError(f"codes outside the {params.bits - 1}-bit magnitude domain")
        if regs.max() >= params.n_regions:
            raise DataError("region index out of range")
    _, scales, offsets = _edges_scales_offsets(params)
    out = backend.decode_pwlq(flat, regs, scales, offsets, params.shift)
    return Tensor(out.reshape(q.shape), channel_axis=q.channel_axis, _validated=True)


def dequantize(q):
    """Decode any QuantizedTensor, dispatching on its params type."""
    params = q.params[0] if q.per_channel else q.params
    if isinstance(params, PwlqParams):
        return dequantize_pwlq(q)
    return dequantize_uniform(q)


def quantize_channels(t, params_list):
    """Per-channel encode: one params object (uniform or piecewise) per channel."""
    return _quantize_channels(t, tuple(params_list))


def _quantize_channels(t, params_list):
    arr = _as_array(t)
    axis = t.channel_axis if isinstance(t, Tensor) else 0
    moved = np.moveaxis(arr, axis, 0)
    if len(params_list) != moved.shape[0]:
        raise ValueError("params count does not match channel extent")
    codes = np.empty(moved.shape, dtype=np.int32)
    any_pwlq = any(isinstance(p, PwlqParams) for p in params_list)
    regions = np.zeros(moved.shape, dtype=np.uint8) if any_pwlq else None
    for i, p in enumerate(params_list):
        ch = Tensor(np.ascontiguousarray(moved[i]).reshape(moved[i].shape or (1,)),
                    _validated=True)
        if isinstance(p, PwlqParams):
            qi = quantize_pwlq(ch, p)
            regions[i] = qi.region_bits.reshape(moved[i].shape)
        else:
            qi = quantize_uniform(ch, p)
        codes[i] = qi.codes.reshape(moved[i].shape)
    codes = np.moveaxis(codes, 0, axis)
    if regions is not None:
        regions = np.moveaxis(regions, 0, axis)
        regions = np.ascontiguousarray(regions)
    return QuantizedTensor(
        np.ascontiguousarray(codes),
        tuple(params_list),
        arr.shape,
        region_bits=regions,
        channel_axis=axis,
    )


def _dequantize_channels(q):
    moved = np.moveaxis(q.codes, q.channel_axis, 0)
    regs = (
        np.moveaxis(q.region_bits, q.channel_axis, 0)
        if q.region_bits is not None
        else None
    )
    out = np.empty(moved.shape, dtype=np.float32)
    for i, p in enumerate(q.params):
        shape = moved[i].shape
        if isinstance(p, PwlqParams):
            sub = QuantizedTensor(
                moved[i], p, shape, region_bits=regs[i] if regs is not None else None
            )
            out[i] = dequantize_pwlq(sub).data.reshape(shape)
        else:
            sub = QuantizedTensor(moved[i], p, shape)
            out[i] = dequantize_uniform(sub).data.reshape(shape)
    data = np.moveaxis(out, 0, q.channel_axis)
    return Tensor(
        np.ascontiguousarray(data), channel_axis=q.channel_axis, _validated=True
    )


def empirical_mse(t, params):
    """Mean squared quantization error of the full encode/decode round trip."""
    arr = _as_array(t)
    if isinstance(params, tuple) or isinstance(params, PwlqParams):
        q = quantize_pwlq(t, params) if not isinstance(params, tuple) else _quantize_channels(t, params)
        dec = dequantize(q)
    elif isinstance(params, QuantParams):
        q = quantize_uniform(t, params)
        dec = dequantize_uniform(q)
    else:
        raise TypeError("params must be QuantParams, PwlqParams, or a tuple of them")
    d = dec.data.astype(np.float64).reshape(-1) - arr.astype(np.float64).reshape(-1)
    return float(d @ d) / arr.size


def code_sign(codes):
    """+1 where the stored code encodes a non-negative value, else -1."""
    return np.where(np.asarray(codes) < 0, -1, 1).astype(np.int32)


def code_magnitude(codes):
    """Magnitude index stored in a piecewise code (complement for negatives)."""
    codes = np.asarray(codes)
    return np.where(codes < 0, -codes - 1, codes).astype(np.int32)
