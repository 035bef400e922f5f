"""Per-channel bias measurement and decode-side correction folding.

Quantization shifts a channel's mean and shrinks its spread; both are
undone on the decode side only, so stored codes never change. The mean
error and the std ratio fold into the affine decode params: scale and
offset pick up the ratio, the offset (or the piecewise shift) absorbs the
mean. Folded params can leave the symmetric zero-offset convention; they
are decode recipes, not fresh quantization grids.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .pwlq import PwlqParams
from .tensor import Tensor, channel_views
from .uniform import QuantParams

MEAN_ONLY = "mean_only"
MEAN_AND_VARIANCE = "mean_and_variance"

_MODES = (MEAN_ONLY, MEAN_AND_VARIANCE)

_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class BiasCorrection:
    """Measured decode-side correction for one channel."""

    mean_error: float
    scale_ratio: float
    mode: str = MEAN_AND_VARIANCE


def measure_bias(original, dequantized, axis=None, mode=MEAN_AND_VARIANCE):
    """Per-channel mean error and std ratio of dequantized vs original.

    Returns one BiasCorrection per channel along ``axis``. A dequantized
    channel with (near-)zero spread keeps ratio 1: there is no variance to
    restore and division would explode.
    """
    if mode not in _MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if not isinstance(original, Tensor):
        original = Tensor(original)
    if not isinstance(dequantized, Tensor):
        dequantized = Tensor(dequantized)
    if original.shape != dequantized.shape:
        raise ValueError(
            f"shape mismatch: {original.shape} vs {dequantized.shape}"
        )
    if axis is None:
        axis = original.channel_axis
    out = []
    for ch_o, ch_q in zip(channel_views(original, axis), channel_views(dequantized, axis)):
        o = ch_o.data.astype(np.float64).reshape(-1)
        q = ch_q.data.astype(np.float64).reshape(-1)
        mu = float(np.mean(q - o))
        if mode == MEAN_AND_VARIANCE:
            sd_q = float(np.std(q))
            xi = float(np.std(o)) / sd_q if sd_q > _STD_FLOOR else 1.0
        else:
            xi = 1.0
        out.append(BiasCorrection(mu, xi, mode))
    return out


def apply_correction(params, bc):
    """Fold one channel's correction into its decode params.

    The corrected decode computes xi * (decoded - mean_error): uniform
    params scale both affine terms and shift the offset; piecewise params
    scale every region mapping and absorb the mean into the post-sign shift.
    """
    if not isinstance(bc, BiasCorrection):
        raise TypeError("bc must be a BiasCorrection")
    xi = 1.0 if bc.mode == MEAN_ONLY else bc.scale_ratio
    if not xi > 0:
        raise ValueError(f"scale ratio must be positive, got {xi}")
    mu = bc.mean_error
    if isinstance(params, QuantParams):
        return replace(
            params,
            range_low=xi * (params.range_low - mu),
            range_high=xi * (params.range_high - mu),
            scale=xi * params.scale,
            offset=xi * (params.offset - mu),
        )
    if isinstance(params, PwlqParams):
        regions = tuple(
            replace(
                rp,
                range_low=xi * rp.range_low,
                range_high=xi * rp.range_high,
                scale=xi * rp.scale,
                offset=xi * rp.offset,
            )
            for rp in params.region_params
        )
        return replace(
            params,
            region_params=regions,
            shift=xi * (params.shift - mu),
        )
    raise TypeError("params must be QuantParams or PwlqParams")
