"""QTNQ container: quantized codes plus decode params in one file.

Layout v1 (little-endian), mirroring the QTNS header shape:

  magic "QTNQ" | u32 version=1 | u32 dtype=1 (int codes) | u32 rank |
  rank x u64 extents | u32 channel_axis |
  u32 scheme (0 uniform, 1 piecewise) | u32 signedness (0 sym, 1 asym) |
  u32 bits | u32 n_breakpoints | u32 granularity (0 layer, 1 channel) |
  u32 params_count | params blocks | codes (1 byte each) |
  packed region indices (piecewise only)

Each params block starts with a u32 tag (0 uniform, 1 piecewise); a
piecewise file may hold uniform blocks for degenerate (constant-zero)
channels. Uniform block: 4 f64 (range_low, range_high, scale, offset).
Piecewise block: u32 k, f64 m, k f64 breakpoints, (k+1) x 4 f64 region
params, f64 shift. Region indices pack little-endian bit-first, 1 bit per
element for one breakpoint, else 2.
"""
from __future__ import annotations

import struct

import numpy as np

from .errors import DataError, FormatError
from .pwlq import PER_CHANNEL, PER_LAYER, PwlqParams
from .uniform import (
    ASYMMETRIC_UNSIGNED,
    SYMMETRIC_SIGNED,
    QuantParams,
    QuantizedTensor,
)

_MAGIC = b"QTNQ"
_VERSION = 1
_DTYPE_CODES = 1

_SCHEME_UNIFORM = 0
_SCHEME_PWLQ = 1

_GRAN_LAYER = 0
_GRAN_CHANNEL = 1

_TAG_UNIFORM = 0
_TAG_PWLQ = 1


def _pack_uniform_block(p):
    return struct.pack("<I", _TAG_UNIFORM) + struct.pack(
        "<4d", p.range_low, p.range_high, p.scale, p.offset
    )


def _pack_pwlq_block(p):
    k = len(p.breakpoints)
    out = [struct.pack("<II", _TAG_PWLQ, k), struct.pack("<d", p.m)]
    out.append(struct.pack(f"<{k}d", *p.breakpoints))
    for rp in p.region_params:
        out.append(struct.pack("<4d", rp.range_low, rp.range_high, rp.scale, rp.offset))
    out.append(struct.pack("<d", p.shift))
    return b"".join(out)


def _pack_regions(regions, bits_per):
    flat = regions.reshape(-1).astype(np.uint8)
    if bits_per == 1:
        expanded = flat & 1
    else:
        expanded = np.empty(flat.size * 2, dtype=np.uint8)
        expanded[0::2] = flat & 1
        expanded[1::2] = (flat >> 1) & 1
    return np.packbits(expanded, bitorder="little").tobytes()


def _unpack_regions(raw, n, bits_per):
    need = (n * bits_per + 7) // 8
    if len(raw) != need:
        raise FormatError(f"region bitmap is {len(raw)} bytes, expected {need}")
    bits = np.unpackbits(
        np.frombuffer(raw, dtype=np.uint8), count=n * bits_per, bitorder="little"
    )
    if bits_per == 1:
        return bits.astype(np.uint8)
    return (bits[0::2] | (bits[1::2] << 1)).astype(np.uint8)


def save_quantized(q, path):
    """Write a QuantizedTensor (uniform or piecewise, any granularity)."""
    if not isinstance(q, QuantizedTensor):
        raise TypeError("q must be a QuantizedTensor")
    params_list = list(q.params) if q.per_channel else [q.params]
    any_pwlq = any(isinstance(p, PwlqParams) for p in params_list)
    scheme = _SCHEME_PWLQ if any_pwlq else _SCHEME_UNIFORM
    lead = next(p for p in params_list if not any_pwlq or isinstance(p, PwlqParams))
    bits = lead.bits
    if any(p.bits != bits for p in params_list):
        raise ValueError("mixed bit widths in one file are not supported")
    if any_pwlq:
        signedness = 0
        n_bp = max(len(p.breakpoints) for p in params_list if isinstance(p, PwlqParams))
        if q.region_bits is None:
            raise DataError("piecewise codes require region indices")
    else:
        signedness = 0 if lead.signedness == SYMMETRIC_SIGNED else 1
        if any(p.signedness != lead.signedness for p in params_list):
            raise ValueError("mixed signedness in one file is not supported")
        n_bp = 0
    arr = q.codes
    rank = arr.ndim
    gran = _GRAN_CHANNEL if q.per_channel else _GRAN_LAYER
    if q.per_channel and len(params_list) != arr.shape[q.channel_axis]:
        raise ValueError("params count does not match channel extent")
    header = (
        struct.pack("<4sIII", _MAGIC, _VERSION, _DTYPE_CODES, rank)
        + struct.pack(f"<{rank}Q", *arr.shape)
        + struct.pack("<I", q.channel_axis)
        + struct.pack(
            "<6I", scheme, signedness, bits, n_bp, gran, len(params_list)
        )
    )
    blocks = b"".join(
        _pack_pwlq_block(p) if isinstance(p, PwlqParams) else _pack_uniform_block(p)
        for p in params_list
    )
    codes = (arr.reshape(-1).astype(np.int64) & 0xFF).astype(np.uint8).tobytes()
    tail = b""
    if any_pwlq:
        bits_per = 1 if n_bp == 1 else 2
        tail = _pack_regions(q.region_bits, bits_per)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(blocks)
        fh.write(codes)
        fh.write(tail)


class _Reader:
    def __init__(self, raw):
        self.raw = raw
        self.pos = 0

    def take(self, fmt):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.raw):
            raise FormatError("file truncated")
        out = struct.unpack_from(fmt, self.raw, self.pos)
        self.pos += size
        return out

    def take_bytes(self, n):
        if self.pos + n > len(self.raw):
            raise FormatError("file truncated")
        out = self.raw[self.pos : self.pos + n]
        self.pos += n
        return out


def _read_uniform_block(rd, bits, signedness):
    r_l, r_u, scale, offset = rd.take("<4d")
    if not all(np.isfinite(v) for v in (r_l, r_u, scale, offset)):
        raise DataError("non-finite params")
    if scale <= 0:
        raise DataError(f"non-positive scale {scale}")
    return QuantParams(bits, r_l, r_u, scale, offset, signedness)


def _read_pwlq_block(rd, bits, granularity):
    (k,) = rd.take("<I")
    if not 1 <= k <= 3:
        raise FormatError(f"implausible breakpoint count {k}")
    (m,) = rd.take("<d")
    bps = rd.take(f"<{k}d")
    regions = []
    for _ in range(k + 1):
        r_l, r_u, scale, offset = rd.take("<4d")
        if scale <= 0 or not np.isfinite(scale):
            raise DataError(f"non-positive region scale {scale}")
        regions.append(
            QuantParams(bits - 1, r_l, r_u, scale, offset, ASYMMETRIC_UNSIGNED)
        )
    (shift,) = rd.take("<d")
    if not (np.isfinite(m) and m > 0):
        raise DataError(f"bad truncation bound {m}")
    if list(bps) != sorted(bps) or bps[0] <= 0 or bps[-1] >= m:
        raise DataError(f"breakpoints {bps} not strictly inside (0, {m})")
    return PwlqParams(
        bits, m, tuple(bps), tuple(regions), granularity=granularity, shift=shift
    )


def load_quantized(path):
    """Read a QTNQ file back into a QuantizedTensor, validating domains."""
    with open(path, "rb") as fh:
        raw = fh.read()
    rd = _Reader(raw)
    magic, version, dtype, rank = rd.take("<4sIII")
    if magic != _MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise FormatError(f"unsupported version {version}")
    if dtype != _DTYPE_CODES:
        raise FormatError(f"unsupported dtype code {dtype}")
    if rank == 0 or rank > 32:
        raise FormatError(f"implausible rank {rank}")
    extents = rd.take(f"<{rank}Q")
    if any(e == 0 for e in extents):
        raise FormatError(f"zero extent in shape {extents}")
    (axis,) = rd.take("<I")
    if axis >= rank:
        raise FormatError(f"channel axis {axis} out of range for rank {rank}")
    scheme, signedness, bits, n_bp, gran, n_params = rd.take("<6I")
    if scheme not in (_SCHEME_UNIFORM, _SCHEME_PWLQ):
        raise FormatError(f"unknown scheme {scheme}")
    if signedness not in (0, 1):
        raise FormatError(f"unknown signedness {signedness}")
    if not 2 <= bits <= 8:
        raise FormatError(f"bits {bits} outside 2..8")
    if gran not in (_GRAN_LAYER, _GRAN_CHANNEL):
        raise FormatError(f"unknown granularity {gran}")
    shape = tuple(int(e) for e in extents)
    count = 1
    for e in shape:
        count *= e
    if gran == _GRAN_LAYER and n_params != 1:
        raise FormatError(f"per-layer file with {n_params} params blocks")
    if gran == _GRAN_CHANNEL and n_params != shape[axis]:
        raise FormatError(
            f"{n_params} params blocks for channel extent {shape[axis]}"
        )
    sig_name = SYMMETRIC_SIGNED if signedness == 0 else ASYMMETRIC_UNSIGNED
    gran_name = PER_LAYER if gran == _GRAN_LAYER else PER_CHANNEL
    params_list = []
    for _ in range(n_params):
        (tag,) = rd.take("<I")
        if tag == _TAG_UNIFORM:
            params_list.append(_read_uniform_block(rd, bits, sig_name))
        elif tag == _TAG_PWLQ:
            if scheme != _SCHEME_PWLQ:
                raise FormatError("piecewise params block in a uniform file")
            params_list.append(_read_pwlq_block(rd, bits, gran_name))
        else:
            raise FormatError(f"unknown params tag {tag}")
    if scheme == _SCHEME_PWLQ and not any(
        isinstance(p, PwlqParams) for p in params_list
    ):
        raise FormatError("piecewise file without any piecewise params")
    code_bytes = rd.take_bytes(count)
    if scheme == _SCHEME_PWLQ or signedness == 0:
        codes = np.frombuffer(code_bytes, dtype=np.int8).astype(np.int32)
    else:
        codes = np.frombuffer(code_bytes, dtype=np.uint8).astype(np.int32)
    codes = codes.reshape(shape)
    region_bits = None
    if scheme == _SCHEME_PWLQ:
        bits_per = 1 if n_bp == 1 else 2
        region_bits = _unpack_regions(
            rd.take_bytes(len(raw) - rd.pos), count, bits_per
        ).reshape(shape)
    if rd.pos != len(raw):
        raise FormatError(f"{len(raw) - rd.pos} trailing bytes")
    q = QuantizedTensor(
        codes,
        params_list[0] if gran == _GRAN_LAYER else tuple(params_list),
        shape,
        region_bits=region_bits,
        channel_axis=int(axis),
    )
    _validate_domains(q)
    return q


def _validate_domains(q):
    params_list = q.params if q.per_channel else (q.params,)
    moved = np.moveaxis(q.codes, q.channel_axis, 0)
    regs = (
        np.moveaxis(q.region_bits, q.channel_axis, 0)
        if q.region_bits is not None
        else None
    )
    for i, p in enumerate(params_list):
        ch = moved if not q.per_channel else moved[i : i + 1]
        if isinstance(p, PwlqParams):
            mag_max = (1 << (p.bits - 1)) - 1
            mags = np.where(ch < 0, -ch - 1, ch)
            if mags.size and (mags.max() > mag_max or ch.min() < -mag_max - 1):
                raise DataError("codes outside the magnitude domain")
            r = regs if not q.per_channel else regs[i : i + 1]
            if r is not None and r.size and r.max() >= p.n_regions:
                raise DataError("region index out of range")
        else:
            qmin, qmax = p.domain
            if ch.size and (ch.min() < qmin or ch.max() > qmax):
                raise DataError(f"codes outside domain [{qmin}, {qmax}]")
