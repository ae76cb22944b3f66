import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from biomotion import imaging
from biomotion.imaging import FrameError


def raw(rgb, h=3, w=3):
    return np.tile(np.array(rgb, dtype=np.uint8), (h, w, 1))


def unit_frames(min_side=3, max_side=8):
    shape = st.tuples(st.integers(min_side, max_side), st.integers(min_side, max_side))
    return shape.flatmap(lambda s: arrays(np.float64, s, elements=st.floats(0, 1)))


class TestGrayscale:
    def test_white(self):
        assert np.array_equal(imaging.to_grayscale(raw((255, 255, 255))), np.ones((3, 3)))

    def test_red_channel(self):
        assert imaging.to_grayscale(raw((100, 0, 0)))[0, 0] == pytest.approx(29.9 / 255, abs=1e-12)

    def test_green_channel(self):
        assert imaging.to_grayscale(raw((0, 255, 0)))[0, 0] == pytest.approx(149.685 / 255, abs=1e-12)

    def test_rejects_bad_shapes(self):
        with pytest.raises(FrameError):
            imaging.to_grayscale(np.zeros((2, 5, 3), dtype=np.uint8))
        with pytest.raises(FrameError):
            imaging.to_grayscale(np.zeros((5, 5), dtype=np.uint8))

    @given(st.tuples(*[st.integers(0, 255)] * 3), st.integers(0, 2), st.integers(0, 255))
    def test_monotone_per_channel(self, rgb, ch, bump):
        lo = list(rgb)
        hi = list(rgb)
        hi[ch] = max(hi[ch], bump)
        assert imaging.to_grayscale(raw(hi))[0, 0] >= imaging.to_grayscale(raw(lo))[0, 0]


class TestResize:
    def test_same_size_identity(self):
        f = np.random.default_rng(0).random((5, 7))
        assert np.array_equal(imaging.resize(f, 7, 5), f)

    def test_uniform_preserved(self):
        out = imaging.resize(np.full((4, 6), 0.5), 11, 9)
        assert out.shape == (9, 11)
        assert np.allclose(out, 0.5)

    def test_checkerboard_corners(self):
        f = np.array([[0.0, 1.0], [1.0, 0.0]])
        out = imaging.resize(f, 4, 4)
        assert (out[0, 0], out[0, -1], out[-1, 0], out[-1, -1]) == (0.0, 1.0, 1.0, 0.0)

    def test_checkerboard_interior_weights(self):
        # output pixel 1 samples source coordinate 0.25 on both axes
        out = imaging.resize(np.array([[0.0, 1.0], [1.0, 0.0]]), 4, 4)
        expected = 0.75 * (0.75 * 0 + 0.25 * 1) + 0.25 * (0.75 * 1 + 0.25 * 0)
        assert out[1, 1] == pytest.approx(expected)

    @pytest.mark.parametrize("w,h", [(2, 5), (5, 2), (0, 0)])
    def test_too_small(self, w, h):
        with pytest.raises(FrameError):
            imaging.resize(np.zeros((4, 4)), w, h)

    @given(unit_frames(), st.integers(3, 12), st.integers(3, 12))
    def test_range_kept(self, f, w, h):
        out = imaging.resize(f, w, h)
        assert out.min() >= f.min() - 1e-12 and out.max() <= f.max() + 1e-12


class TestWhiten:
    def test_constant_sequence_gives_zero(self):
        frames = [np.full((4, 4), 0.3)] * 5
        model = imaging.whiten_fit(frames)
        assert np.allclose(imaging.whiten_transform(model, frames[0]), 0.0)
        assert np.array_equal(imaging.whiten_apply(model, frames[0]), np.zeros((4, 4)))

    def test_decorrelates_full_rank(self):
        # 64 pixels need well over 64 samples before every covariance
        # eigenvalue sits far above epsilon
        rng = np.random.default_rng(1)
        frames = list((rng.random((5000, 8, 8)) < 0.5).astype(float))
        eps = 1e-5
        model = imaging.whiten_fit(frames, eps)
        out = np.stack([imaging.whiten_transform(model, f).ravel() for f in frames])
        cov = np.cov(out, rowvar=False)
        off = cov - np.diag(np.diag(cov))
        assert np.abs(off).max() < 10 * eps

    def test_large_epsilon_scales_centred_input(self):
        rng = np.random.default_rng(2)
        frames = [rng.random((3, 3)) for _ in range(10)]
        model = imaging.whiten_fit(frames, epsilon=1e12)
        out = imaging.whiten_transform(model, frames[0])
        centred = frames[0] - model.mean.reshape(3, 3)
        assert np.allclose(out * 1e6, centred, rtol=1e-6, atol=1e-9)

    def test_rescaled_to_unit(self):
        rng = np.random.default_rng(3)
        frames = [rng.random((4, 4)) for _ in range(30)]
        out = imaging.whiten_apply(imaging.whiten_fit(frames), frames[3])
        assert out.min() == 0.0 and out.max() == 1.0

    def test_errors(self):
        with pytest.raises(FrameError):
            imaging.whiten_fit([np.zeros((3, 3))])
        with pytest.raises(FrameError):
            imaging.whiten_fit([np.zeros((3, 3)), np.zeros((4, 4))])
        with pytest.raises(FrameError):
            imaging.whiten_fit([np.zeros((3, 3))] * 2, epsilon=0)
        model = imaging.whiten_fit([np.zeros((3, 3)), np.ones((3, 3))])
        with pytest.raises(FrameError):
            imaging.whiten_apply(model, np.zeros((4, 4)))


class TestBoxFilter:
    def test_identity_window(self):
        f = np.random.default_rng(0).random((5, 5))
        assert np.array_equal(imaging.box_filter(f, 1, 1), f)

    def test_uniform_interior(self):
        out = imaging.box_filter(np.ones((6, 6)), 3, 3)
        assert np.allclose(out[1:-1, 1:-1], 1.0)
        # zero padding pulls the corner down to 4/9
        assert out[0, 0] == pytest.approx(4 / 9)

    def test_single_pixel(self):
        f = np.zeros((5, 5))
        f[2, 2] = 1.0
        out = imaging.box_filter(f, 3, 3)
        expected = np.zeros((5, 5))
        expected[1:4, 1:4] = 1 / 9
        assert np.allclose(out, expected, atol=1e-15)

    def test_rectangular_window(self):
        f = np.zeros((5, 5))
        f[2, 2] = 1.0
        out = imaging.box_filter(f, 5, 1)
        assert np.allclose(out[2], 0.2) and np.allclose(out[[0, 1, 3, 4]], 0)

    @pytest.mark.parametrize("u,v", [(2, 3), (3, 4), (0, 1)])
    def test_even_window(self, u, v):
        with pytest.raises(FrameError):
            imaging.box_filter(np.zeros((5, 5)), u, v)

    @given(unit_frames(), st.sampled_from([1, 3, 5]), st.sampled_from([1, 3, 5]))
    def test_range(self, f, u, v):
        out = imaging.box_filter(f, u, v)
        # zero padding may pull border values toward 0
        assert out.min() >= min(0.0, f.min()) and out.max() <= f.max()


class TestMedianFilter:
    def test_constant(self):
        f = np.full((5, 5), 0.4)
        assert np.array_equal(imaging.median_filter(f, 3), f)

    def test_salt_removed(self):
        f = np.zeros((5, 5))
        f[2, 2] = 1.0
        assert not imaging.median_filter(f, 3).any()

    def test_majority_window(self):
        f = np.array([[0, 0, 0], [0, 1, 1], [1, 1, 1]], dtype=float)
        assert imaging.median_filter(f, 3)[1, 1] == np.sort(f.ravel())[4] == 1.0

    def test_even(self):
        with pytest.raises(FrameError):
            imaging.median_filter(np.zeros((5, 5)), 4)
        with pytest.raises(FrameError):
            imaging.median_filter(np.zeros((5, 5)), 1)

    @given(unit_frames(), st.sampled_from([3, 5]))
    def test_range(self, f, k):
        out = imaging.median_filter(f, k)
        assert out.min() >= f.min() and out.max() <= f.max()


class TestDog:
    @pytest.mark.parametrize("size", [3, 5, 7])
    def test_zero_sum(self, size):
        assert abs(imaging.dog_kernel(size).sum()) < 1e-12

    def test_uniform_response(self):
        out = imaging.convolve_same(np.full((9, 9), 0.7), imaging.dog_kernel(3))
        assert np.abs(out[1:-1, 1:-1]).max() < 1e-9

    def test_rotation_symmetry(self):
        k = imaging.dog_kernel(5, 0.8)
        assert np.allclose(np.rot90(k), k, atol=1e-15)

    def test_centre_positive_surround_negative(self):
        k = imaging.dog_kernel(3)
        assert k[1, 1] > 0
        assert (np.delete(k.ravel(), 4) < 0).all()

    def test_step_edge(self):
        f = np.zeros((7, 8))
        f[:, 4:] = 1.0
        resp = np.abs(imaging.convolve_valid(f, imaging.dog_kernel(3)))
        # valid output column c is centred on input column c + 1
        best = resp.max(axis=0)
        assert set(np.flatnonzero(best == best.max()) + 1) <= {3, 4}

    @pytest.mark.parametrize("kw", [{"sigma_center": 0}, {"sigma_center": -1}, {"ratio": 0}, {"size": 4}])
    def test_errors(self, kw):
        with pytest.raises(FrameError):
            imaging.dog_kernel(**kw)


class TestDirectional:
    def test_left(self):
        assert np.array_equal(imaging.directional_kernel("left"), np.tile([1.0, 0.0, -1.0], (3, 1)))

    @pytest.mark.parametrize("size", [3, 5])
    def test_antisymmetry(self, size):
        k = {d: imaging.directional_kernel(d, size) for d in imaging.DIRECTIONS}
        assert not (k["left"] + k["right"]).any()
        assert not (k["up"] + k["down"]).any()
        assert np.array_equal(k["right"], k["left"][:, ::-1])
        assert np.array_equal(k["down"], k["left"].T)

    def test_uniform_zero(self):
        for d in imaging.DIRECTIONS:
            out = imaging.convolve_valid(np.full((6, 6), 0.3), imaging.directional_kernel(d))
            assert np.abs(out).max() < 1e-12

    def test_bad_direction(self):
        with pytest.raises(FrameError):
            imaging.directional_kernel("diagonal")


class TestConvolution:
    @settings(max_examples=30)
    @given(unit_frames(5, 9))
    def test_valid_matches_scipy(self, f):
        from scipy.signal import correlate2d

        k = imaging.dog_kernel(3)
        assert np.allclose(imaging.convolve_valid(f, k), correlate2d(f, k, mode="valid"), atol=1e-12)

    def test_valid_shape(self):
        assert imaging.convolve_valid(np.zeros((10, 7)), np.ones((3, 3))).shape == (8, 5)


def test_gray8_round_trip(tmp_path):
    data = np.arange(64, dtype=np.uint8).reshape(8, 8) * 3
    imaging.write_gray8(tmp_path / "a.png", data)
    assert np.array_equal(imaging.read_gray8(tmp_path / "a.png"), data)
    frame = np.random.default_rng(0).integers(0, 256, (4, 5, 3), dtype=np.uint8)
    imaging.write_raw(tmp_path / "b.png", frame)
    assert np.array_equal(imaging.read_raw(tmp_path / "b.png"), frame)
