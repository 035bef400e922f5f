import numpy as np
import pytest

from qkit import (
    ASYMMETRIC_UNSIGNED,
    SYMMETRIC_SIGNED,
    DataError,
    Tensor,
    degenerate_params,
    dequantize_uniform,
    empirical_mse,
    error_constant,
    expected_uniform_error,
    make_params,
    quantize_uniform,
)


class TestMakeParams:
    def test_symmetric_scale_and_domain(self):
        p = make_params(4, -1.0, 1.0)
        np.testing.assert_allclose(p.scale, 2.0 / 15.0)
        assert p.offset == 0.0
        assert p.domain == (-8, 7)

    def test_asymmetric_offset_and_domain(self):
        p = make_params(4, 0.0, 1.875, ASYMMETRIC_UNSIGNED)
        assert p.scale == 0.125
        assert p.offset == 0.0
        assert p.domain == (0, 15)
        p2 = make_params(4, -0.5, 1.0, ASYMMETRIC_UNSIGNED)
        assert p2.offset == -0.5

    def test_validation(self):
        with pytest.raises(ValueError):
            make_params(0, -1.0, 1.0)
        with pytest.raises(ValueError):
            make_params(4, 1.0, 1.0)
        with pytest.raises(ValueError):
            make_params(4, 2.0, 1.0)
        with pytest.raises(ValueError):
            make_params(4, -1.0, 1.0, "middle_endian")
        with pytest.raises(ValueError):
            make_params(4, -np.inf, 1.0)


class TestRounding:
    def test_half_to_even_ties(self):
        # scale 1.875/15 = 0.125 is exactly representable, so 0.3125 and
        # 0.4375 sit exactly on code ties 2.5 and 3.5.
        p = make_params(4, 0.0, 1.875, ASYMMETRIC_UNSIGNED)
        q = quantize_uniform(np.array([0.3125, 0.4375], dtype=np.float32), p)
        np.testing.assert_array_equal(q.codes, [2, 4])

    def test_symmetric_tie_at_boundary(self):
        # scale 0.25: +/-1.875 maps to +/-7.5; half-even gives -8 and 8,
        # the positive side then saturates to 7.
        p = make_params(4, -1.875, 1.875)
        q = quantize_uniform(np.array([-5.0, 5.0], dtype=np.float32), p)
        np.testing.assert_array_equal(q.codes, [-8, 7])
        dec = dequantize_uniform(q).data
        np.testing.assert_allclose(dec, [-2.0, 1.75])

    def test_known_code(self):
        p = make_params(4, -1.0, 1.0)
        q = quantize_uniform(np.array([0.3], dtype=np.float32), p)
        assert q.codes[0] == 2
        np.testing.assert_allclose(
            dequantize_uniform(q).data[0], np.float32(4.0 / 15.0)
        )


class TestClampAndRoundTrip:
    def test_out_of_range_clamps(self):
        p = make_params(4, -1.0, 1.0)
        q = quantize_uniform(np.array([1.7, -1.7], dtype=np.float32), p)
        assert abs(q.codes[0]) <= 8 and abs(q.codes[1]) <= 8
        dec = dequantize_uniform(q).data
        assert abs(dec[0] - 1.0) <= p.scale / 2 + 1e-7
        assert abs(dec[1] + 1.0) <= p.scale / 2 + 1e-7

    def test_round_trip_bound(self):
        rng = np.random.default_rng(42)
        x = rng.uniform(-2.0, 2.0, 20000).astype(np.float32)
        p = make_params(6, -1.5, 1.5)
        dec = dequantize_uniform(quantize_uniform(x, p)).data
        clamped = np.clip(x, -1.5, 1.5)
        assert np.max(np.abs(dec - clamped)) <= p.scale / 2 + 1e-7

    def test_monotone_codes(self):
        rng = np.random.default_rng(42)
        x = np.sort(rng.normal(0.0, 1.0, 5000).astype(np.float32))
        p = make_params(5, -2.0, 2.0)
        codes = quantize_uniform(x, p).codes
        assert np.all(np.diff(codes) >= 0)

    def test_scalar_input(self):
        p = make_params(4, -1.0, 1.0)
        q = quantize_uniform(0.3, p)
        assert q.codes.shape == (1,)

    def test_codes_domain_validated_on_decode(self):
        p = make_params(4, -1.0, 1.0)
        q = quantize_uniform(np.zeros(3, dtype=np.float32), p)
        bad = q.codes.copy()
        bad[0] = 99
        with pytest.raises(DataError):
            dequantize_uniform(
                type(q)(bad, q.params, q.shape, channel_axis=q.channel_axis)
            )

    def test_non_finite_rejected(self):
        p = make_params(4, -1.0, 1.0)
        with pytest.raises(DataError):
            quantize_uniform(np.array([np.nan], dtype=np.float32), p)


class TestDegenerate:
    def test_all_zero_channel(self):
        p = degenerate_params(4)
        q = quantize_uniform(np.zeros(5, dtype=np.float32), p)
        np.testing.assert_array_equal(q.codes, 0)
        np.testing.assert_array_equal(dequantize_uniform(q).data, 0.0)

    def test_constant_value_asymmetric(self):
        p = degenerate_params(8, 2.5, ASYMMETRIC_UNSIGNED)
        q = quantize_uniform(np.full(4, 2.5, dtype=np.float32), p)
        np.testing.assert_array_equal(q.codes, 0)
        np.testing.assert_allclose(dequantize_uniform(q).data, 2.5)

    def test_symmetric_requires_zero(self):
        with pytest.raises(ValueError):
            degenerate_params(4, 1.0, SYMMETRIC_SIGNED)


class TestExpectedError:
    def test_formula_values(self):
        np.testing.assert_allclose(expected_uniform_error(4, -1.0, 1.0), 4.0 / 2700.0)
        # b=8 over a width-2 range: 4 / (12 * 255^2) = 4 / 780300.
        np.testing.assert_allclose(
            expected_uniform_error(8, -1.0, 1.0), 4.0 / 780300.0
        )

    def test_error_constant(self):
        assert error_constant(1) == 1.0 / 12.0
        np.testing.assert_allclose(error_constant(4), 1.0 / (12.0 * 225.0))

    def test_validation(self):
        with pytest.raises(ValueError):
            expected_uniform_error(1, -1.0, 1.0)
        with pytest.raises(ValueError):
            expected_uniform_error(4, 1.0, -1.0)

    def test_matches_empirical_on_uniform_data(self):
        # Uniformly distributed data inside the range: the analytic MSE
        # should match the measured one closely at moderate bit widths.
        rng = np.random.default_rng(42)
        x = rng.uniform(-1.0, 1.0, 400000).astype(np.float32)
        p = make_params(6, -1.0, 1.0)
        measured = empirical_mse(Tensor(x), p)
        expected = expected_uniform_error(6, -1.0, 1.0)
        np.testing.assert_allclose(measured, expected, rtol=0.02)
