"""Activation-range calibration from sample batches.

The range for an activation layer is estimated robustly: pool every element
seen, then take the median of the k smallest values as the lower bound and
the median of the k largest as the upper bound. Keeping only k order
statistics per side makes the pass streamable over any number of batches.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor
from .uniform import (
    ASYMMETRIC_UNSIGNED,
    degenerate_params,
    make_params,
    quantize_uniform,
)

DEFAULT_K = 10


@dataclass(frozen=True)
class CalibrationRange:
    """Estimated activation range plus how it was obtained."""

    min_bound: float
    max_bound: float
    k: int
    sample_count: int
    degraded: bool = False


def _smallest_k(current, arr, k):
    merged = np.concatenate([current, arr]) if current.size else arr
    if merged.size <= k:
        return np.sort(merged)
    return np.sort(np.partition(merged, k - 1)[:k])


def _as_flat(sample):
    arr = sample.data if isinstance(sample, Tensor) else np.asarray(sample, dtype=np.float32)
    return arr.reshape(-1).astype(np.float64)


def calibrate(samples, k=DEFAULT_K, per_sample=False):
    """Estimate a layer's activation range from a list of sample tensors.

    per_sample=True reduces each batch to its own min/max first and takes
    medians over those per-batch extrema instead of pooled elements. With
    fewer than k pooled values the estimate falls back to the global
    min/max and is flagged degraded.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    samples = list(samples)
    if not samples:
        raise ValueError("calibrate needs at least one sample")
    lo_pool = np.empty(0, dtype=np.float64)
    hi_pool = np.empty(0, dtype=np.float64)
    count = 0
    pooled = 0
    for s in samples:
        flat = _as_flat(s)
        if flat.size == 0:
            continue
        count += flat.size
        pooled += 1 if per_sample else flat.size
        if per_sample:
            lo_pool = _smallest_k(lo_pool, np.array([flat.min()]), k)
            hi_pool = -_smallest_k(-hi_pool, np.array([-flat.max()]), k)
        else:
            lo_pool = _smallest_k(lo_pool, flat, k)
            hi_pool = -_smallest_k(-hi_pool, -flat, k)
    if count == 0:
        raise ValueError("calibrate needs at least one element")
    if pooled < k:
        return CalibrationRange(
            float(lo_pool.min()), float(hi_pool.max()), k, count, degraded=True
        )
    return CalibrationRange(
        float(np.median(lo_pool)), float(np.median(hi_pool)), k, count
    )


def quantize_activations(t, crange, bits):
    """Quantize activations to the asymmetric-unsigned grid over the range.

    Values outside [min_bound, max_bound] clamp; a collapsed range (all
    activations equal) degenerates to a single code decoding to that value.
    """
    if not isinstance(crange, CalibrationRange):
        raise TypeError("crange must be a CalibrationRange")
    if crange.min_bound > crange.max_bound:
        raise ValueError("calibration range is inverted")
    if crange.min_bound == crange.max_bound:
        params = degenerate_params(bits, crange.min_bound, ASYMMETRIC_UNSIGNED)
    else:
        params = make_params(
            bits, crange.min_bound, crange.max_bound, ASYMMETRIC_UNSIGNED
        )
    return quantize_uniform(t, params)
