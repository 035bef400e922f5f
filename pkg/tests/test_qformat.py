import struct

import numpy as np
import pytest

from qkit import (
    ASYMMETRIC_UNSIGNED,
    DataError,
    FormatError,
    PER_CHANNEL,
    QuantizedTensor,
    Tensor,
    degenerate_params,
    dequantize,
    load_quantized,
    make_params,
    make_pwlq_params,
    quantize_channels,
    quantize_pwlq,
    quantize_uniform,
    save_quantized,
)


def _mutate(path, offset, payload):
    raw = bytearray(path.read_bytes())
    raw[offset : offset + len(payload)] = payload
    path.write_bytes(bytes(raw))


def _uniform_file(tmp_path, name="u.qtnq"):
    rng = np.random.default_rng(42)
    t = Tensor(rng.normal(0.0, 0.5, 16).astype(np.float32))
    q = quantize_uniform(t, make_params(4, -2.0, 2.0))
    path = tmp_path / name
    save_quantized(q, path)
    return q, path


def _pwlq_file(tmp_path, breakpoints=(0.9,), name="p.qtnq"):
    rng = np.random.default_rng(42)
    t = Tensor(rng.normal(0.0, 1.0, 16).astype(np.float32))
    q = quantize_pwlq(t, make_pwlq_params(4, 3.0, breakpoints))
    path = tmp_path / name
    save_quantized(q, path)
    return q, path


def assert_quantized_equal(a, b):
    np.testing.assert_array_equal(a.codes, b.codes)
    assert a.shape == b.shape
    assert a.channel_axis == b.channel_axis
    assert a.params == b.params
    if a.region_bits is None:
        assert b.region_bits is None
    else:
        np.testing.assert_array_equal(a.region_bits, b.region_bits)


class TestRoundTrip:
    def test_uniform_symmetric(self, tmp_path):
        q, path = _uniform_file(tmp_path)
        assert_quantized_equal(q, load_quantized(path))

    def test_uniform_asymmetric_high_codes(self, tmp_path):
        rng = np.random.default_rng(42)
        t = Tensor(rng.uniform(0.0, 2.0, 64).astype(np.float32))
        p = make_params(8, 0.0, 2.0, ASYMMETRIC_UNSIGNED)
        q = quantize_uniform(t, p)
        assert q.codes.max() > 127
        path = tmp_path / "asym.qtnq"
        save_quantized(q, path)
        back = load_quantized(path)
        assert_quantized_equal(q, back)

    def test_pwlq_single_breakpoint(self, tmp_path):
        q, path = _pwlq_file(tmp_path)
        back = load_quantized(path)
        assert_quantized_equal(q, back)
        np.testing.assert_array_equal(dequantize(q).data, dequantize(back).data)

    @pytest.mark.parametrize("bps", [(0.5, 1.4), (0.5, 1.1, 2.0)])
    def test_pwlq_multi_breakpoint(self, tmp_path, bps):
        q, path = _pwlq_file(tmp_path, breakpoints=bps)
        assert_quantized_equal(q, load_quantized(path))

    def test_per_channel_mixed(self, tmp_path):
        rng = np.random.default_rng(42)
        data = rng.normal(0.0, 1.0, (3, 8, 4)).astype(np.float32)
        data[:, 1] = 0.0
        t = Tensor(data, channel_axis=1)
        params = []
        for i in range(8):
            ch = data[:, i]
            if i == 1:
                params.append(degenerate_params(4))
            else:
                m = float(np.abs(ch).max())
                k = 2 if i % 3 == 0 else 1
                bps = (0.3 * m, 0.6 * m)[:k]
                params.append(make_pwlq_params(4, m, bps, PER_CHANNEL))
        q = quantize_channels(t, params)
        path = tmp_path / "mixed.qtnq"
        save_quantized(q, path)
        back = load_quantized(path)
        assert_quantized_equal(q, back)
        np.testing.assert_array_equal(dequantize(q).data, dequantize(back).data)

    def test_params_doubles_bit_exact(self, tmp_path):
        q, path = _pwlq_file(tmp_path)
        back = load_quantized(path)
        for rp_a, rp_b in zip(q.params.region_params, back.params.region_params):
            assert rp_a.scale.hex() == rp_b.scale.hex()
            assert rp_a.offset.hex() == rp_b.offset.hex()


class TestSaveValidation:
    def test_missing_region_bits(self):
        p = make_pwlq_params(4, 1.0, (0.5,))
        q = QuantizedTensor(np.zeros(4, dtype=np.int32), p, (4,))
        with pytest.raises(DataError):
            save_quantized(q, "/dev/null")

    def test_mixed_bit_widths(self, tmp_path):
        t = Tensor(np.zeros((2, 4), dtype=np.float32))
        q = quantize_channels(t, [make_params(4, -1.0, 1.0), make_params(6, -1.0, 1.0)])
        with pytest.raises(ValueError):
            save_quantized(q, tmp_path / "bad.qtnq")

    def test_mixed_signedness(self, tmp_path):
        t = Tensor(np.zeros((2, 4), dtype=np.float32))
        q = quantize_channels(
            t,
            [make_params(4, -1.0, 1.0), make_params(4, 0.0, 1.0, ASYMMETRIC_UNSIGNED)],
        )
        with pytest.raises(ValueError):
            save_quantized(q, tmp_path / "bad.qtnq")

    def test_rejects_non_quantized(self, tmp_path):
        with pytest.raises(TypeError):
            save_quantized(np.zeros(4), tmp_path / "bad.qtnq")


class TestLoadValidation:
    # rank-1, 16 elements: extents at byte 16, axis at 24, scheme block at 28,
    # bits at 36, params count at 48, first params block at 52

    def test_bad_magic(self, tmp_path):
        _, path = _uniform_file(tmp_path)
        _mutate(path, 0, b"QTNX")
        with pytest.raises(FormatError):
            load_quantized(path)

    def test_bad_version(self, tmp_path):
        _, path = _uniform_file(tmp_path)
        _mutate(path, 4, struct.pack("<I", 2))
        with pytest.raises(FormatError):
            load_quantized(path)

    def test_bad_dtype(self, tmp_path):
        _, path = _uniform_file(tmp_path)
        _mutate(path, 8, struct.pack("<I", 7))
        with pytest.raises(FormatError):
            load_quantized(path)

    def test_zero_extent(self, tmp_path):
        _, path = _uniform_file(tmp_path)
        _mutate(path, 16, struct.pack("<Q", 0))
        with pytest.raises(FormatError):
            load_quantized(path)

    def test_axis_out_of_range(self, tmp_path):
        _, path = _uniform_file(tmp_path)
        _mutate(path, 24, struct.pack("<I", 5))
        with pytest.raises(FormatError):
            load_quantized(path)

    def test_unknown_scheme(self, tmp_path):
        _, path = _uniform_file(tmp_path)
        _mutate(path, 28, struct.pack("<I", 9))
        with pytest.raises(FormatError):
            load_quantized(path)

    def test_bits_out_of_range(self, tmp_path):
        _, path = _uniform_file(tmp_path)
        _mutate(path, 36, struct.pack("<I", 77))
        with pytest.raises(FormatError):
            load_quantized(path)

    def test_params_count_mismatch(self, tmp_path):
        _, path = _uniform_file(tmp_path)
        _mutate(path, 48, struct.pack("<I", 3))
        with pytest.raises(FormatError):
            load_quantized(path)

    def test_truncated(self, tmp_path):
        _, path = _uniform_file(tmp_path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-1])
        with pytest.raises(FormatError):
            load_quantized(path)

    def test_trailing_bytes(self, tmp_path):
        _, path = _uniform_file(tmp_path)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(FormatError):
            load_quantized(path)

    def test_non_positive_scale(self, tmp_path):
        _, path = _uniform_file(tmp_path)
        # uniform block: tag at 52, then range_low/range_high/scale doubles
        _mutate(path, 52 + 4 + 16, struct.pack("<d", 0.0))
        with pytest.raises(DataError):
            load_quantized(path)

    def test_code_outside_domain(self, tmp_path):
        _, path = _uniform_file(tmp_path)
        # codes for the 4-bit symmetric file start right after the 36-byte block
        _mutate(path, 52 + 36, b"\x7f")
        with pytest.raises(DataError):
            load_quantized(path)

    def test_implausible_breakpoint_count(self, tmp_path):
        _, path = _pwlq_file(tmp_path)
        # pwlq block: tag at 52, k at 56
        _mutate(path, 56, struct.pack("<I", 7))
        with pytest.raises(FormatError):
            load_quantized(path)

    def test_unsorted_breakpoints(self, tmp_path):
        _, path = _pwlq_file(tmp_path, breakpoints=(0.5, 1.4))
        # breakpoints start after tag+k+m = 16 bytes into the block
        _mutate(path, 52 + 16, struct.pack("<d", 2.9))
        with pytest.raises(DataError):
            load_quantized(path)

    def test_region_index_out_of_range(self, tmp_path):
        q, path = _pwlq_file(tmp_path, breakpoints=(0.5, 1.4))
        raw = bytearray(path.read_bytes())
        raw[-1] = 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(DataError):
            load_quantized(path)

    def test_magnitude_out_of_domain(self, tmp_path):
        q, path = _pwlq_file(tmp_path)
        # 4-bit piecewise magnitudes live in [-8, 7]; 0x7f decodes to 127
        n_block = 4 + 4 + 8 + 8 + 2 * 32 + 8
        _mutate(path, 52 + n_block, b"\x7f")
        with pytest.raises(DataError):
            load_quantized(path)
