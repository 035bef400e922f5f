"""Integer-only inner-product datapath with constant folding.

A quantized dot product runs entirely on integer accumulators; the affine
params fold into a handful of floating-point constants applied once at the
end. The uniform path needs one accumulator and two constants (C0, C1).
The piecewise path routes each product by its weight's region index: per
region one product accumulator, plus per tail region one accumulator of
sign-weighted activation codes (the region offset contributes through the
weight's sign, which the stored code preserves even at magnitude 0). With
one breakpoint that is three accumulators and five constants (C2..C6).

Overflow is flagged against the worst case: the sum of absolute products
must fit the signed accumulator width even under adversarial sign patterns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import DataError
from .pwlq import PwlqParams
from .uniform import QuantParams, QuantizedTensor

_UNIFORM = "uniform"
_PWLQ = "pwlq"


@dataclass(frozen=True)
class DatapathConstants:
    """Folded floating-point constants plus the weight sums behind them.

    prod_scale[r] multiplies the region-r product accumulator, sign_scale[r]
    the region-r signed-activation accumulator (0 for the center region),
    const_term adds once. sum_w / sum_sigma are the weight-code sums the
    constants were folded from, kept so a change of activation params can be
    applied incrementally without re-reading the weights.
    """

    kind: str
    x_scale: float
    x_offset: float
    prod_scale: tuple
    sign_scale: tuple
    const_term: float
    sum_w: tuple
    sum_sigma: tuple

    @property
    def c0(self):
        return self.prod_scale[0] if self.kind == _UNIFORM else None

    @property
    def c1(self):
        return self.const_term if self.kind == _UNIFORM else None

    @property
    def c2(self):
        return self.prod_scale[0] if self._is_k1 else None

    @property
    def c3(self):
        if not self._is_k1:
            return None
        return self.x_offset * (self.prod_scale[0] / self.x_scale) * self.sum_w[0]

    @property
    def c4(self):
        return self.prod_scale[1] if self._is_k1 else None

    @property
    def c5(self):
        return self.sign_scale[1] if self._is_k1 else None

    @property
    def c6(self):
        if not self._is_k1:
            return None
        return self.const_term - self.c3

    @property
    def _is_k1(self):
        return self.kind == _PWLQ and len(self.prod_scale) == 2


@dataclass(frozen=True)
class DatapathTrace:
    """What one simulated inner product did, for cost accounting."""

    scheme: str
    length: int
    acc_bits: int
    mac_counts: tuple
    activation_sum_adds: int
    accumulators: tuple
    region_occupancy: tuple
    fp_constants: int
    fp_ops: int


@dataclass(frozen=True)
class OverheadReport:
    """Piecewise-vs-uniform hardware cost comparison for equal-length runs."""

    length: int
    k_regions: int
    extra_accumulators: int
    region_index_bits: int
    fp_constants_uniform: int
    fp_constants_pwlq: int
    extra_fp_constants: int
    extra_int_additions: int
    mac_uniform: int
    mac_pwlq: int
    mac_equal: bool


def _flat_codes(q, what):
    if not isinstance(q, QuantizedTensor):
        raise TypeError(f"{what} must be a QuantizedTensor")
    if q.per_channel:
        raise ValueError(f"{what} must be quantized per layer for the datapath")
    return np.ascontiguousarray(q.codes.reshape(-1).astype(np.int32, copy=False))


def _check_uniform_weights(params):
    if not isinstance(params, QuantParams):
        raise TypeError("weights are not uniform-quantized")
    if params.offset != 0.0:
        raise ValueError(
            "the uniform datapath folds no weight offset; quantize weights "
            "symmetrically"
        )


def _check_pwlq_weights(params):
    if not isinstance(params, PwlqParams):
        raise TypeError("weights are not piecewise-quantized")
    if params.shift != 0.0:
        raise ValueError(
            "folded decode corrections cannot run on the integer datapath"
        )
    if params.region_params[0].offset != 0.0:
        raise ValueError("center region must anchor at magnitude 0")


def _check_acts(params):
    if not isinstance(params, QuantParams):
        raise TypeError("activations are not uniform-quantized")


def make_constants_uniform(x_params, w_params, w_codes):
    """Fold C0 = s_x s_w and C1 = z_x s_w * sum(Wq)."""
    _check_acts(x_params)
    _check_uniform_weights(w_params)
    sum_w = int(np.asarray(w_codes, dtype=np.int64).sum())
    return DatapathConstants(
        kind=_UNIFORM,
        x_scale=x_params.scale,
        x_offset=x_params.offset,
        prod_scale=(x_params.scale * w_params.scale,),
        sign_scale=(),
        const_term=x_params.offset * w_params.scale * sum_w,
        sum_w=(sum_w,),
        sum_sigma=(),
    )


def make_constants_pwlq(x_params, w_params, w_codes, region_bits):
    """Fold the per-region constants (C2..C6 for a single breakpoint)."""
    _check_acts(x_params)
    _check_pwlq_weights(w_params)
    codes = np.asarray(w_codes, dtype=np.int64).reshape(-1)
    regs = np.asarray(region_bits).reshape(-1)
    if codes.shape != regs.shape:
        raise ValueError("weight codes and region indices differ in length")
    neg = codes < 0
    w_tilde = np.where(neg, codes + 1, codes)
    sigma = np.where(neg, -1, 1)
    n_regions = w_params.n_regions
    sum_w = []
    sum_sigma = []
    prod_scale = []
    sign_scale = []
    const = 0.0
    for r, rp in enumerate(w_params.region_params):
        msk = regs == r
        sw = int(w_tilde[msk].sum())
        ss = int(sigma[msk].sum())
        sum_w.append(sw)
        sum_sigma.append(ss)
        prod_scale.append(x_params.scale * rp.scale)
        sign_scale.append(x_params.scale * rp.offset)
        const += x_params.offset * (rp.scale * sw + rp.offset * ss)
    if len(sum_w) != n_regions:
        raise ValueError("region params and region count disagree")
    return DatapathConstants(
        kind=_PWLQ,
        x_scale=x_params.scale,
        x_offset=x_params.offset,
        prod_scale=tuple(prod_scale),
        sign_scale=tuple(sign_scale),
        const_term=const,
        sum_w=tuple(sum_w),
        sum_sigma=tuple(sum_sigma),
    )


def with_activation_params(consts, x_params):
    """Refold the constants for new activation params using the stored sums.

    Identical to rebuilding from the weight codes: the weights enter the
    constants only through sum_w / sum_sigma and the per-region scales.
    """
    _check_acts(x_params)
    w_scales = tuple(ps / consts.x_scale for ps in consts.prod_scale)
    w_offsets = tuple(ss / consts.x_scale for ss in consts.sign_scale)
    const = 0.0
    for sw, ss, wsc, woff in zip(consts.sum_w, consts.sum_sigma, w_scales, w_offsets):
        const += x_params.offset * (wsc * sw + woff * ss)
    if consts.kind == _UNIFORM:
        const = x_params.offset * w_scales[0] * consts.sum_w[0]
    return DatapathConstants(
        kind=consts.kind,
        x_scale=x_params.scale,
        x_offset=x_params.offset,
        prod_scale=tuple(x_params.scale * w for w in w_scales),
        sign_scale=tuple(x_params.scale * w for w in w_offsets),
        const_term=const,
        sum_w=consts.sum_w,
        sum_sigma=consts.sum_sigma,
    )


def _check_acc_bits(acc_bits):
    if not 2 <= acc_bits <= 64:
        raise ValueError("acc_bits must be in 2..64")
    return (1 << (acc_bits - 1)) - 1


def inner_product_uniform(xq, wq, consts=None, acc_bits=64):
    """Run the one-accumulator integer dot product; returns (value, trace)."""
    limit = _check_acc_bits(acc_bits)
    xf = _flat_codes(xq, "activations")
    wf = _flat_codes(wq, "weights")
    if xf.size != wf.size:
        raise ValueError(f"length mismatch: {xf.size} vs {wf.size}")
    _check_acts(xq.params)
    _check_uniform_weights(wq.params)
    if consts is None:
        consts = make_constants_uniform(xq.params, wq.params, wf)
    elif consts.kind != _UNIFORM:
        raise ValueError("constants were folded for a different datapath")
    acc, absacc = backend.accumulate_uniform(xf, wf)
    if absacc > limit:
        raise OverflowError(
            f"worst-case accumulator magnitude {absacc} exceeds "
            f"{acc_bits}-bit capacity"
        )
    value = consts.prod_scale[0] * acc + consts.const_term
    n = int(xf.size)
    trace = DatapathTrace(
        scheme=_UNIFORM,
        length=n,
        acc_bits=acc_bits,
        mac_counts=(n,),
        activation_sum_adds=0,
        accumulators=(acc,),
        region_occupancy=(1.0,),
        fp_constants=2,
        fp_ops=2,
    )
    return float(value), trace


def inner_product_pwlq(xq, wq, consts=None, acc_bits=64):
    """Run the region-routed integer datapath; returns (value, trace)."""
    limit = _check_acc_bits(acc_bits)
    xf = _flat_codes(xq, "activations")
    wf = _flat_codes(wq, "weights")
    if xf.size != wf.size:
        raise ValueError(f"length mismatch: {xf.size} vs {wf.size}")
    _check_acts(xq.params)
    _check_pwlq_weights(wq.params)
    if wq.region_bits is None:
        raise DataError("piecewise weights carry no region indices")
    regs = np.ascontiguousarray(wq.region_bits.reshape(-1))
    n_regions = wq.params.n_regions
    if consts is None:
        consts = make_constants_pwlq(xq.params, wq.params, wf, regs)
    elif consts.kind != _PWLQ or len(consts.prod_scale) != n_regions:
        raise ValueError("constants were folded for a different datapath")
    A, S, absA, absS, counts = backend.accumulate_pwlq(xf, wf, regs, n_regions)
    worst = max(int(absA.max()), int(absS[1:].max()) if n_regions > 1 else 0)
    if worst > limit:
        raise OverflowError(
            f"worst-case accumulator magnitude {worst} exceeds "
            f"{acc_bits}-bit capacity"
        )
    value = consts.const_term
    for r in range(n_regions):
        value += consts.prod_scale[r] * int(A[r])
        if r > 0:
            value += consts.sign_scale[r] * int(S[r])
    n = int(xf.size)
    k = n_regions - 1
    trace = DatapathTrace(
        scheme=_PWLQ,
        length=n,
        acc_bits=acc_bits,
        mac_counts=tuple(int(c) for c in counts),
        activation_sum_adds=int(counts[1:].sum()),
        accumulators=tuple(int(a) for a in A) + tuple(int(s) for s in S[1:]),
        region_occupancy=tuple(float(c) / n for c in counts) if n else (0.0,) * n_regions,
        fp_constants=3 * k + 2,
        fp_ops=5 * k + 2,
    )
    return float(value), trace


def reference_inner_product(xq, wq):
    """Double-precision dot product of the dequantized operands.

    The oracle the integer datapath must reproduce: decode both sides in
    float64 straight from codes and params, then accumulate in float64.
    """
    xf = _flat_codes(xq, "activations").astype(np.float64)
    _check_acts(xq.params)
    x_hat = xq.params.scale * xf + xq.params.offset
    wf = _flat_codes(wq, "weights").astype(np.float64)
    if isinstance(wq.params, PwlqParams):
        if wq.region_bits is None:
            raise DataError("piecewise weights carry no region indices")
        regs = wq.region_bits.reshape(-1)
        neg = wf < 0
        mag = np.where(neg, -wf - 1, wf)
        scales = np.array([rp.scale for rp in wq.params.region_params])
        offsets = np.array([rp.offset for rp in wq.params.region_params])
        val = scales[regs] * mag + offsets[regs]
        w_hat = np.where(neg, -val, val) + wq.params.shift
    else:
        w_hat = wq.params.scale * wf + wq.params.offset
    if x_hat.size != w_hat.size:
        raise ValueError(f"length mismatch: {x_hat.size} vs {w_hat.size}")
    return float(x_hat @ w_hat)


def uniform_reference_trace(n, acc_bits=64):
    """Structural uniform-path trace for an n-element workload.

    The uniform path's cost metadata depends only on the length, so overhead
    accounting against a piecewise run does not need actual uniform codes;
    the accumulator value is left at 0.
    """
    return DatapathTrace(
        scheme=_UNIFORM,
        length=int(n),
        acc_bits=acc_bits,
        mac_counts=(int(n),),
        activation_sum_adds=0,
        accumulators=(0,),
        region_occupancy=(1.0,),
        fp_constants=2,
        fp_ops=2,
    )


def overhead_report(trace_uniform, trace_pwlq):
    """Hardware cost of the piecewise path relative to uniform, same workload."""
    if trace_uniform.scheme != _UNIFORM or trace_pwlq.scheme != _PWLQ:
        raise ValueError("pass (uniform trace, piecewise trace) in that order")
    if trace_uniform.length != trace_pwlq.length:
        raise ValueError("traces cover different workload lengths")
    k_regions = len(trace_pwlq.mac_counts)
    mac_u = sum(trace_uniform.mac_counts)
    mac_p = sum(trace_pwlq.mac_counts)
    return OverheadReport(
        length=trace_pwlq.length,
        k_regions=k_regions,
        extra_accumulators=len(trace_pwlq.accumulators) - len(trace_uniform.accumulators),
        region_index_bits=math.ceil(math.log2(k_regions)),
        fp_constants_uniform=trace_uniform.fp_constants,
        fp_constants_pwlq=trace_pwlq.fp_constants,
        extra_fp_constants=trace_pwlq.fp_constants - trace_uniform.fp_constants,
        extra_int_additions=trace_pwlq.activation_sum_adds,
        mac_uniform=mac_u,
        mac_pwlq=mac_p,
        mac_equal=mac_u == mac_p,
    )
