import numpy as np
import pytest

from qkit import (
    DataError,
    FormatError,
    Tensor,
    channel_views,
    load_tensor,
    save_tensor,
    stats,
)


class TestTensor:
    def test_coerces_to_float32(self):
        t = Tensor([1.0, 2.0, 3.0])
        assert t.data.dtype == np.float32
        assert t.shape == (3,)
        assert t.size == 3

    def test_rejects_non_finite(self):
        with pytest.raises(DataError):
            Tensor([1.0, np.nan])
        with pytest.raises(DataError):
            Tensor([np.inf, 0.0])

    def test_channel_axis_bounds(self):
        Tensor(np.zeros((2, 3)), channel_axis=1)
        with pytest.raises(ValueError):
            Tensor(np.zeros((2, 3)), channel_axis=2)

    def test_scalar_becomes_rank_one(self):
        t = Tensor(5.0)
        assert t.shape == (1,)

    def test_flat_is_row_major(self):
        t = Tensor(np.arange(6, dtype=np.float32).reshape(2, 3))
        np.testing.assert_array_equal(t.flat(), np.arange(6, dtype=np.float32))

    def test_equality(self):
        a = Tensor([1.0, 2.0])
        assert a == Tensor([1.0, 2.0])
        assert a != Tensor([1.0, 3.0])


class TestStats:
    def test_known_values(self):
        s = stats(Tensor([-2.0, 2.0]))
        assert s.min == -2.0
        assert s.max == 2.0
        assert s.mean == 0.0
        assert s.std == 2.0  # population convention
        assert s.absmax == 2.0
        assert s.count == 2

    def test_absmax_from_negative_side(self):
        s = stats(Tensor([-3.0, 1.0]))
        assert s.absmax == 3.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            stats(Tensor(np.zeros((0,), dtype=np.float32), _validated=True))

    def test_double_accumulation(self):
        rng = np.random.default_rng(42)
        x = rng.normal(1e4, 1.0, 100000).astype(np.float32)
        s = stats(Tensor(x))
        np.testing.assert_allclose(s.std, np.std(x.astype(np.float64)), rtol=1e-9)


class TestChannelViews:
    def test_reconstructs_tensor(self):
        rng = np.random.default_rng(42)
        t = Tensor(rng.normal(size=(4, 3, 5)).astype(np.float32), channel_axis=1)
        views = channel_views(t)
        assert len(views) == 3
        rebuilt = np.stack([v.data for v in views], axis=1)
        np.testing.assert_array_equal(rebuilt, t.data)

    def test_explicit_axis(self):
        t = Tensor(np.arange(6, dtype=np.float32).reshape(2, 3))
        views = channel_views(t, axis=1)
        assert len(views) == 3
        np.testing.assert_array_equal(views[0].data, [0.0, 3.0])

    def test_rank_one_views(self):
        t = Tensor(np.arange(3, dtype=np.float32))
        views = channel_views(t)
        assert [v.shape for v in views] == [(1,), (1,), (1,)]

    def test_axis_out_of_range(self):
        with pytest.raises(ValueError):
            channel_views(Tensor([1.0]), axis=1)


class TestQtnsIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(42)
        t = Tensor(rng.normal(size=(3, 4)).astype(np.float32), channel_axis=1)
        p = tmp_path / "t.qtns"
        save_tensor(t, p)
        back = load_tensor(p)
        assert back == t
        assert back.channel_axis == 1

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.qtns"
        p.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(FormatError, match="magic"):
            load_tensor(p)

    def test_bad_version(self, tmp_path):
        t = Tensor([1.0])
        p = tmp_path / "t.qtns"
        save_tensor(t, p)
        raw = bytearray(p.read_bytes())
        raw[4] = 9
        p.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="version"):
            load_tensor(p)

    def test_truncated_header(self, tmp_path):
        p = tmp_path / "short.qtns"
        p.write_bytes(b"QTNS\x01\x00")
        with pytest.raises(FormatError):
            load_tensor(p)

    def test_payload_size_mismatch(self, tmp_path):
        t = Tensor([1.0, 2.0])
        p = tmp_path / "t.qtns"
        save_tensor(t, p)
        p.write_bytes(p.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(FormatError, match="payload"):
            load_tensor(p)

    def test_non_finite_payload(self, tmp_path):
        t = Tensor([1.0, 2.0])
        p = tmp_path / "t.qtns"
        save_tensor(t, p)
        raw = bytearray(p.read_bytes())
        raw[-4:] = np.array([np.nan], dtype="<f4").tobytes()
        p.write_bytes(bytes(raw))
        with pytest.raises(DataError):
            load_tensor(p)

    def test_zero_extent_rejected(self, tmp_path):
        t = Tensor([1.0])
        p = tmp_path / "t.qtns"
        save_tensor(t, p)
        raw = bytearray(p.read_bytes())
        raw[16:24] = (0).to_bytes(8, "little")
        p.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="extent"):
            load_tensor(p)

    def test_channel_axis_out_of_range(self, tmp_path):
        t = Tensor([1.0])
        p = tmp_path / "t.qtns"
        save_tensor(t, p)
        raw = bytearray(p.read_bytes())
        raw[24:28] = (3).to_bytes(4, "little")
        p.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="axis"):
            load_tensor(p)
