"""Pure NumPy kernels: the fallback backend.

Signature-compatible with the compiled Cython module ``qkit._kernels``;
``qkit.backend`` picks whichever is importable. All array arguments are
C-contiguous 1-d; encode inputs are float32, code arrays are int32.

Decoded values are materialized as float32 everywhere (including inside the
MSE kernels) so both backends compute the exact same quantizer round trip.
"""
from __future__ import annotations

import numpy as np


def encode_uniform(x, r_l, r_u, s, z, qmin, qmax):
    """Affine encode: saturate(round_half_even((clamp(x) - z) / s))."""
    v = np.clip(x.astype(np.float64), r_l, r_u)
    q = np.rint((v - z) / s)
    np.clip(q, qmin, qmax, out=q)
    return q.astype(np.int32)


def decode_uniform(codes, s, z):
    return (s * codes.astype(np.float64) + z).astype(np.float32)


def mse_uniform(x, r_l, r_u, s, z, qmin, qmax):
    """Mean squared error of the uniform round trip against the raw input."""
    x64 = x.astype(np.float64)
    v = np.clip(x64, r_l, r_u)
    q = np.clip(np.rint((v - z) / s), qmin, qmax)
    dec = (s * q + z).astype(np.float32).astype(np.float64)
    d = dec - x64
    return float(d @ d) / x.size


def encode_pwlq(x, edges, scales, mag_max):
    """Piecewise encode of signed values against magnitude regions.

    edges = [0, p_1, ..., p_K, m]; region i covers (edges[i], edges[i+1]]
    with region 0 closed at 0. A magnitude equal to a breakpoint belongs to
    the lower region. Negative inputs store code -mag-1 so a zero-magnitude
    tail element keeps its sign (see decode_pwlq).
    """
    x64 = x.astype(np.float64)
    a = np.abs(x64)
    np.minimum(a, edges[-1], out=a)
    region = np.searchsorted(edges[1:-1], a, side="left").astype(np.uint8)
    mag = np.rint((a - edges[region]) / scales[region])
    np.clip(mag, 0, mag_max, out=mag)
    mag = mag.astype(np.int32)
    codes = np.where(x < 0, -mag - 1, mag).astype(np.int32)
    return codes, region


def decode_pwlq(codes, regions, scales, offsets, shift):
    """Invert encode_pwlq: sign * (scale[region] * mag + offset[region]) + shift."""
    neg = codes < 0
    mag = np.where(neg, -codes - 1, codes).astype(np.float64)
    val = scales[regions] * mag + offsets[regions]
    out = np.where(neg, -val, val) + shift
    return out.astype(np.float32)


def mse_curve_pwlq(a_sorted, m, mag_max, ps, num_threads=0):
    """MSE of the K=1 piecewise quantizer at each breakpoint candidate.

    a_sorted holds the float32 magnitudes |x| sorted ascending and clamped to
    m; the sign cancels in the squared error because decode reapplies it
    exactly. num_threads is accepted for signature parity and ignored here.
    """
    a64 = a_sorted.astype(np.float64)
    n = a64.size
    out = np.empty(len(ps), dtype=np.float64)
    for j, p in enumerate(ps):
        split = int(np.searchsorted(a64, p, side="right"))
        s1 = p / mag_max
        c = a64[:split]
        dec = (s1 * np.rint(c / s1)).astype(np.float32).astype(np.float64)
        e = dec - c
        acc = float(e @ e)
        if split < n:
            s2 = (m - p) / mag_max
            t = a64[split:]
            dec = (p + s2 * np.rint((t - p) / s2)).astype(np.float32).astype(np.float64)
            e = dec - t
            acc += float(e @ e)
        out[j] = acc / n
    return out


def accumulate_uniform(xq, wq):
    """Integer dot product plus the absolute-product sum used for overflow checks."""
    prod = xq.astype(np.int64) * wq.astype(np.int64)
    return int(prod.sum()), int(np.abs(prod).sum())


def accumulate_pwlq(xq, wc, regions, n_regions):
    """Region-routed accumulators for the piecewise integer datapath.

    Returns (A, S, absA, absS, counts), each length n_regions: A[r] sums
    Xq * w_tilde over region r where w_tilde is the signed weight magnitude,
    S[r] sums sign(w) * Xq, abs* track worst-case magnitudes, counts the
    region occupancy.
    """
    x64 = xq.astype(np.int64)
    neg = wc < 0
    wt = np.where(neg, wc + 1, wc).astype(np.int64)
    sg = np.where(neg, -1, 1).astype(np.int64)
    prod = x64 * wt
    sx = sg * x64
    A = np.zeros(n_regions, dtype=np.int64)
    S = np.zeros(n_regions, dtype=np.int64)
    absA = np.zeros(n_regions, dtype=np.int64)
    absS = np.zeros(n_regions, dtype=np.int64)
    counts = np.zeros(n_regions, dtype=np.int64)
    for r in range(n_regions):
        msk = regions == r
        A[r] = prod[msk].sum()
        absA[r] = np.abs(prod[msk]).sum()
        S[r] = sx[msk].sum()
        absS[r] = np.abs(x64[msk]).sum()
        counts[r] = int(msk.sum())
    return A, S, absA, absS, counts
