"""Transform correctness against brute-force index and convolution oracles."""

import numpy as np
import pytest

from sarberg.data import ImagePlane, SampleSet, SarSample
from sarberg.imageops import (
    AugmentationPolicy,
    augment_dataset,
    gaussian_kernel_1d,
    gaussian_smooth,
    gradient_magnitude,
    laplacian,
    reflect,
    rotate,
    sample_augmentation,
    shift,
    sobel,
    write_pgm,
)


def plane(arr):
    return ImagePlane(np.asarray(arr, dtype=np.float64))


def random_plane(shape=(16, 16), seed=0):
    return plane(np.random.default_rng(seed).normal(size=shape))


def dense_correlate(arr, kernel):
    """Reference 2-D correlation: explicit loops, edge-replicate padding."""
    kh, kw = kernel.shape
    ry, rx = kh // 2, kw // 2
    h, w = arr.shape
    out = np.zeros_like(arr)
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for i in range(kh):
                for j in range(kw):
                    rr = min(max(r + i - ry, 0), h - 1)
                    cc = min(max(c + j - rx, 0), w - 1)
                    acc += kernel[i, j] * arr[rr, cc]
            out[r, c] = acc
    return out


class TestRotate:
    def test_four_quarter_turns_identity(self):
        p = random_plane((7, 7), seed=1)
        q = p
        for _ in range(4):
            q = rotate(q, 90.0)
        assert np.array_equal(q.data, p.data)

    def test_zero_identity(self):
        p = random_plane((5, 8), seed=2)
        assert np.array_equal(rotate(p, 0.0).data, p.data)

    def test_quarter_turn_matches_index_map_oracle(self):
        # CCW 90 degrees sends (r, c) to (W-1-c, r); checked for every pixel.
        w = 5
        for r in range(w):
            for c in range(w):
                arr = np.zeros((w, w))
                arr[r, c] = 1.0
                got = rotate(plane(arr), 90.0).data
                expect = np.zeros((w, w))
                expect[w - 1 - c, r] = 1.0
                assert np.array_equal(got, expect), (r, c)

    def test_bilinear_preserves_constant(self):
        p = plane(np.full((9, 9), 3.25))
        assert np.allclose(rotate(p, 17.3).data, 3.25)

    def test_non_finite_angle_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            rotate(random_plane(), float("nan"))

    def test_dimensions_preserved(self):
        p = random_plane((6, 11), seed=3)
        assert rotate(p, 33.0).shape == (6, 11)


class TestReflect:
    def test_involution(self):
        p = random_plane((6, 9), seed=4)
        for axis in ("horizontal", "vertical"):
            assert np.array_equal(reflect(reflect(p, axis), axis).data, p.data)

    def test_symmetric_plane_fixed(self):
        arr = np.array([[1.0, 2.0, 1.0], [4.0, 5.0, 4.0], [7.0, 8.0, 7.0]])
        assert np.array_equal(reflect(plane(arr), "horizontal").data, arr)

    def test_hand_oracle_one_to_nine(self):
        arr = np.arange(1.0, 10.0).reshape(3, 3)
        got = reflect(plane(arr), "horizontal").data
        assert np.array_equal(got, [[3, 2, 1], [6, 5, 4], [9, 8, 7]])

    def test_vertical_reverses_rows(self):
        arr = np.arange(1.0, 10.0).reshape(3, 3)
        got = reflect(plane(arr), "vertical").data
        assert np.array_equal(got, [[7, 8, 9], [4, 5, 6], [1, 2, 3]])

    def test_bad_axis(self):
        with pytest.raises(ValueError, match="axis"):
            reflect(random_plane(), "diagonal")


class TestShift:
    def test_zero_identity(self):
        p = random_plane((5, 5), seed=5)
        assert np.array_equal(shift(p, 0, 0).data, p.data)

    def test_constant_fill_symmetry(self):
        p = plane(np.full((6, 6), 2.5))
        for dx, dy in ((3, 0), (-2, 4), (5, -5)):
            assert np.array_equal(shift(p, dx, dy).data, p.data)

    def test_delta_moves_by_offset(self):
        arr = np.zeros((5, 5))
        arr[2, 2] = 1.0
        got = shift(plane(arr), 1, 0).data
        expect = np.zeros((5, 5))
        expect[2, 3] = 1.0
        assert np.array_equal(got, expect)

    def test_down_shift(self):
        arr = np.zeros((5, 5))
        arr[1, 1] = 1.0
        got = shift(plane(arr), 0, 2).data
        assert got[3, 1] == 1.0

    def test_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            shift(random_plane((5, 5)), 5, 0)


class TestGaussian:
    def test_constant_preserved(self):
        p = plane(np.full((8, 8), 4.0))
        assert np.allclose(gaussian_smooth(p, 1.0).data, 4.0, atol=1e-12)

    def test_center_delta_equals_kernel_center(self):
        arr = np.zeros((15, 15))
        arr[7, 7] = 1.0
        got = gaussian_smooth(plane(arr), 1.0).data
        k = gaussian_kernel_1d(1.0)
        # 2-D kernel center weight computed from the dense formula directly.
        radius = (len(k) - 1) // 2
        xs = np.arange(-radius, radius + 1)
        dense = np.exp(-(xs[:, None] ** 2 + xs[None, :] ** 2) / 2.0)
        dense /= dense.sum()
        assert got[7, 7] == pytest.approx(dense[radius, radius], abs=1e-12)

    def test_matches_dense_convolution_oracle(self):
        p = random_plane((16, 16), seed=6)
        sigma = 0.8
        k = gaussian_kernel_1d(sigma)
        radius = (len(k) - 1) // 2
        xs = np.arange(-radius, radius + 1)
        dense = np.exp(-(xs[:, None] ** 2 + xs[None, :] ** 2) / (2.0 * sigma**2))
        dense /= dense.sum()
        expect = dense_correlate(p.data, dense)
        assert np.max(np.abs(gaussian_smooth(p, sigma).data - expect)) < 1e-12

    def test_bad_sigma(self):
        with pytest.raises(ValueError, match="sigma"):
            gaussian_smooth(random_plane(), 0.0)


class TestDerivatives:
    def test_sobel_constant_zero(self):
        p = plane(np.full((7, 7), 9.0))
        assert np.array_equal(sobel(p, "x").data, np.zeros((7, 7)))
        assert np.array_equal(sobel(p, "y").data, np.zeros((7, 7)))

    def test_sobel_ramp_interior_eight(self):
        arr = np.tile(np.arange(8.0), (8, 1))
        got = sobel(plane(arr), "x").data
        assert np.allclose(got[1:-1, 1:-1], 8.0)

    def test_sobel_transpose_symmetry(self):
        p = random_plane((9, 9), seed=7)
        gx = sobel(p, "x").data
        gy_t = sobel(plane(p.data.T), "y").data
        assert np.allclose(gx, gy_t.T, atol=1e-12)

    def test_gradient_magnitude_ramp(self):
        arr = np.tile(np.arange(10.0), (10, 1))
        got = gradient_magnitude(plane(arr)).data
        assert np.allclose(got[1:-1, 1:-1], 8.0)

    def test_gradient_magnitude_reflect_invariance(self):
        p = random_plane((8, 8), seed=8)
        a = gradient_magnitude(p).data
        b = gradient_magnitude(reflect(p, "horizontal")).data
        assert np.allclose(a, b[:, ::-1], atol=1e-12)

    def test_laplacian_constant_zero(self):
        p = plane(np.full((6, 6), 1.5))
        assert np.array_equal(laplacian(p).data, np.zeros((6, 6)))

    def test_laplacian_linear_ramp_interior_zero(self):
        r, c = np.mgrid[0:9, 0:9].astype(float)
        got = laplacian(plane(2.0 * r + 3.0 * c)).data
        assert np.allclose(got[1:-1, 1:-1], 0.0, atol=1e-12)

    def test_laplacian_quadratic_interior_two(self):
        r, _ = np.mgrid[0:9, 0:9].astype(float)
        got = laplacian(plane(r**2)).data
        assert np.allclose(got[1:-1, 1:-1], 2.0, atol=1e-12)

    def test_sobel_matches_dense_oracle(self):
        from sarberg.imageops import SOBEL_X
        p = random_plane((11, 11), seed=9)
        assert np.max(np.abs(sobel(p, "x").data - dense_correlate(p.data, SOBEL_X))) < 1e-12


def make_pair(seed=0, shape=(20, 20), label=1):
    rng = np.random.default_rng(seed)
    return SarSample(
        id=f"p{seed}",
        hh=ImagePlane(rng.normal(size=shape)),
        hv=ImagePlane(rng.normal(size=shape)),
        inc_angle=30.0,
        label=label,
    )


class TestAugmentation:
    def test_policy_validation(self):
        with pytest.raises(ValueError):
            AugmentationPolicy(width_shift_frac=0.5)
        with pytest.raises(ValueError):
            AugmentationPolicy(rotation_max_deg=200.0)

    def test_degenerate_policy_is_identity(self):
        policy = AugmentationPolicy(
            width_shift_frac=0.0,
            height_shift_frac=0.0,
            rotation_max_deg=0.0,
            allow_horizontal_reflect=False,
            allow_vertical_reflect=False,
        )
        s = make_pair(seed=1)
        out = sample_augmentation(s, policy, np.random.default_rng(0))
        assert np.array_equal(out.hh.data, s.hh.data)
        assert np.array_equal(out.hv.data, s.hv.data)
        assert out.label == s.label and out.inc_angle == s.inc_angle

    def test_same_rng_state_reproduces(self):
        s = make_pair(seed=2)
        policy = AugmentationPolicy()
        a = sample_augmentation(s, policy, np.random.default_rng(42))
        b = sample_augmentation(s, policy, np.random.default_rng(42))
        assert np.array_equal(a.hh.data, b.hh.data)
        assert np.array_equal(a.hv.data, b.hv.data)

    def test_same_transform_applied_to_both_bands(self):
        # Marker planes: identical inputs on both bands must stay identical.
        rng = np.random.default_rng(3)
        marker = ImagePlane(rng.normal(size=(20, 20)))
        s = SarSample(id="m", hh=marker, hv=marker, inc_angle=25.0, label=0)
        out = sample_augmentation(s, AugmentationPolicy(), np.random.default_rng(7))
        assert np.array_equal(out.hh.data, out.hv.data)

    def test_draw_bounds_over_many_samples(self):
        from sarberg.imageops import _draw_transform

        policy = AugmentationPolicy()
        rng = np.random.default_rng(0)
        max_dx = max_dy = max_angle = 0.0
        for _ in range(10_000):
            dx, dy, angle, _, _ = _draw_transform(policy, (75, 75), rng)
            max_dx = max(max_dx, abs(dx))
            max_dy = max(max_dy, abs(dy))
            max_angle = max(max_angle, abs(angle))
        assert max_dx <= 7 and max_dy <= 7
        assert max_angle <= 15.0

    def test_multiplier_one_is_input(self):
        sset = SampleSet((make_pair(1), make_pair(2)), provenance="synthetic")
        assert augment_dataset(sset, AugmentationPolicy(), 1, seed=0) is sset

    def test_multiplier_scales_counts_and_labels(self):
        sset = SampleSet(
            tuple(make_pair(i, label=i % 2) for i in range(10)), provenance="synthetic"
        )
        out = augment_dataset(sset, AugmentationPolicy(), 4, seed=0)
        assert len(out) == 40
        assert out.provenance == "augmented"
        assert sum(s.label for s in out) == 4 * sum(s.label for s in sset)

    def test_seed_reproducibility(self):
        sset = SampleSet((make_pair(1), make_pair(2)))
        a = augment_dataset(sset, AugmentationPolicy(), 3, seed=5)
        b = augment_dataset(sset, AugmentationPolicy(), 3, seed=5)
        assert a.ids() == b.ids()
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.hh.data, sb.hh.data)

    def test_transforms_preserve_finiteness_and_dims(self):
        s = make_pair(seed=9, shape=(75, 75))
        rng = np.random.default_rng(1)
        for _ in range(20):
            out = sample_augmentation(s, AugmentationPolicy(), rng)
            assert out.hh.shape == (75, 75)
            assert np.all(np.isfinite(out.hh.data))


class TestPgm:
    def test_pgm_header_and_size(self, tmp_path):
        p = random_plane((7, 9), seed=10)
        path = tmp_path / "x.pgm"
        write_pgm(p, path)
        raw = path.read_bytes()
        assert raw.startswith(b"P5\n9 7\n255\n")
        assert len(raw) == len(b"P5\n9 7\n255\n") + 63

    def test_constant_plane_uniform_output(self, tmp_path):
        p = plane(np.full((5, 5), 1.0))
        path = tmp_path / "c.pgm"
        write_pgm(p, path)
        body = path.read_bytes().split(b"255\n", 1)[1]
        assert set(body) == {0}
