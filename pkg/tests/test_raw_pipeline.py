"""Tests for demosaicing, downsampling, the ISP chain, and SNR measurement."""

import math

import numpy as np
import pytest

from darksfm.errors import DimensionError, UnsupportedFormatError
from darksfm.raw_pipeline import (
    CFA_LAYOUTS,
    FULL_SCALE,
    IspConfig,
    LinearImage,
    RawImage,
    apply_isp,
    demosaic_subsample,
    downsample_area,
    measure_snr,
)


def make_raw(data: np.ndarray, pattern: str = "RGGB", white: float = FULL_SCALE) -> RawImage:
    h, w = data.shape
    return RawImage(
        width=w,
        height=h,
        cfa_pattern=pattern,
        data=data.astype(np.uint16),
        black_level=np.zeros(4),
        white_level=white,
    )


def demosaic_oracle(data: np.ndarray, pattern: str) -> np.ndarray:
    """Independent per-quad computation: loop over quads, read the layout."""
    layout = CFA_LAYOUTS[pattern]
    h, w = data.shape
    out = np.zeros((3, h // 2, w // 2))
    for qy in range(h // 2):
        for qx in range(w // 2):
            quad = {
                layout[0]: [data[2 * qy, 2 * qx]],
                layout[1]: [data[2 * qy, 2 * qx + 1]],
            }
            quad.setdefault(layout[2], []).append(data[2 * qy + 1, 2 * qx])
            quad.setdefault(layout[3], []).append(data[2 * qy + 1, 2 * qx + 1])
            out[0, qy, qx] = np.mean(quad["R"])
            out[1, qy, qx] = np.mean(quad["G"])
            out[2, qy, qx] = np.mean(quad["B"])
    return out / FULL_SCALE


class TestDemosaicSubsample:
    def test_rggb_quad_averages_greens(self):
        data = np.array([[100, 60], [80, 40]])
        img = demosaic_subsample(make_raw(data))
        expected = np.array([100.0, 70.0, 40.0]) / FULL_SCALE
        np.testing.assert_allclose(img.data[:, 0, 0], expected, rtol=0, atol=1e-15)

    def test_all_zero_frame(self):
        img = demosaic_subsample(make_raw(np.zeros((6, 8))))
        assert img.data.shape == (3, 3, 4)
        assert not img.data.any()

    @pytest.mark.parametrize("pattern", sorted(CFA_LAYOUTS))
    def test_random_frame_matches_per_quad_oracle(self, pattern):
        rng = np.random.default_rng(7)
        data = rng.integers(0, 16384, size=(4, 4)).astype(np.uint16)
        img = demosaic_subsample(make_raw(data, pattern))
        np.testing.assert_allclose(
            img.data, demosaic_oracle(data, pattern), rtol=0, atol=1e-15
        )

    def test_output_halves_dimensions(self):
        img = demosaic_subsample(make_raw(np.zeros((10, 16))))
        assert (img.width, img.height) == (8, 5)

    def test_r_and_b_sites_preserved_exactly(self):
        rng = np.random.default_rng(11)
        data = rng.integers(0, 16384, size=(8, 8)).astype(np.uint16)
        img = demosaic_subsample(make_raw(data, "RGGB"))
        scale = 1.0 / FULL_SCALE
        np.testing.assert_array_equal(img.data[0], data[0::2, 0::2] * scale)
        np.testing.assert_array_equal(img.data[2], data[1::2, 1::2] * scale)

    def test_odd_dimensions_rejected(self):
        with pytest.raises(DimensionError):
            RawImage(
                width=3,
                height=4,
                cfa_pattern="RGGB",
                data=np.zeros((4, 3), dtype=np.uint16),
                black_level=np.zeros(4),
                white_level=100,
            )

    def test_unknown_pattern_rejected(self):
        with pytest.raises(UnsupportedFormatError):
            make_raw(np.zeros((4, 4)), pattern="XYZW")


class TestDownsampleArea:
    def test_constant_image_unchanged(self):
        img = LinearImage.from_array(np.full((3, 8, 8), 0.37))
        out = downsample_area(img, 4)
        np.testing.assert_allclose(out.data, 0.37)

    def test_two_by_two_block(self):
        img = LinearImage.from_array(np.array([[[0.0, 0.0], [1.0, 1.0]]]))
        out = downsample_area(img, 2)
        assert out.data.shape == (1, 1, 1)
        assert out.data[0, 0, 0] == 0.5

    def test_random_image_matches_block_mean_oracle(self):
        rng = np.random.default_rng(3)
        data = rng.random((3, 16, 16))
        out = downsample_area(LinearImage.from_array(data), 4)
        expected = np.zeros((3, 4, 4))
        for c in range(3):
            for by in range(4):
                for bx in range(4):
                    expected[c, by, bx] = data[
                        c, 4 * by : 4 * by + 4, 4 * bx : 4 * bx + 4
                    ].mean()
        np.testing.assert_allclose(out.data, expected, atol=1e-12, rtol=0)

    def test_preserves_mean(self):
        rng = np.random.default_rng(5)
        data = rng.random((3, 12, 12))
        out = downsample_area(LinearImage.from_array(data), 3)
        assert abs(out.data.mean() - data.mean()) < 1e-12

    def test_linearity(self):
        rng = np.random.default_rng(9)
        x = rng.random((3, 8, 8))
        y = rng.random((3, 8, 8))
        a, b = 2.5, -0.75
        lhs = downsample_area(LinearImage.from_array(a * x + b * y), 2).data
        rhs = (
            a * downsample_area(LinearImage.from_array(x), 2).data
            + b * downsample_area(LinearImage.from_array(y), 2).data
        )
        np.testing.assert_allclose(lhs, rhs, atol=1e-14, rtol=0)

    def test_non_divisible_rejected(self):
        img = LinearImage.from_array(np.zeros((3, 9, 9)))
        with pytest.raises(DimensionError):
            downsample_area(img, 4)


class TestApplyIsp:
    def test_black_level_maps_to_zero_with_clip(self):
        img = LinearImage.from_array(np.full((3, 2, 2), 0.1))
        cfg = IspConfig(black_level=0.1, white_level=1.0, gamma=0.5, clip=True)
        out = apply_isp(img, cfg)
        np.testing.assert_allclose(out.data, 0.0)

    def test_white_level_maps_to_one(self):
        img = LinearImage.from_array(np.ones((3, 2, 2)))
        cfg = IspConfig(black_level=0.0, white_level=1.0, gamma=1.0, clip=True)
        out = apply_isp(img, cfg)
        np.testing.assert_allclose(out.data, 1.0)

    def test_midway_sample_matches_step_by_step_oracle(self):
        black, white = 0.1, 0.9
        value = 0.5
        gains = (2.0, 1.0, 1.0)
        gamma = 1.0 / 2.2
        img = LinearImage.from_array(np.full((3, 1, 1), value))
        cfg = IspConfig(
            black_level=black, white_level=white, white_balance_gains=gains, gamma=gamma
        )
        out = apply_isp(img, cfg)
        for c in range(3):
            x = value - black
            x = max(x, 0.0)
            x = x / (white - black)
            x = x * gains[c]
            x = min(max(x, 0.0), 1.0)
            expected = x**gamma
            assert abs(out.data[c, 0, 0] - expected) < 1e-14

    def test_affine_when_clip_off_unit_gains_gamma_one(self):
        rng = np.random.default_rng(21)
        x = rng.random((3, 4, 4))
        y = rng.random((3, 4, 4))
        cfg = IspConfig(black_level=0.05, white_level=0.85, gamma=1.0, clip=False)

        def isp(arr):
            return apply_isp(LinearImage.from_array(arr), cfg).data

        # affine: f(ax + (1-a)y) == a f(x) + (1-a) f(y)
        a = 0.3
        np.testing.assert_allclose(
            isp(a * x + (1 - a) * y), a * isp(x) + (1 - a) * isp(y), atol=1e-12
        )

    def test_no_clip_keeps_negatives_and_flags(self):
        img = LinearImage.from_array(np.full((3, 1, 1), 0.02))
        cfg = IspConfig(black_level=0.1, white_level=1.0, gamma=1.0, clip=False)
        out = apply_isp(img, cfg)
        assert out.no_clip
        assert (out.data < 0).all()


class TestMeasureSnr:
    def test_identical_images_give_positive_infinity(self):
        img = LinearImage.from_array(np.random.default_rng(0).random((3, 4, 4)))
        assert measure_snr(img, img) == math.inf

    def test_unit_offset_on_unit_signal_is_zero_db(self):
        clean = LinearImage.from_array(np.ones((1, 8, 8)))
        noisy = LinearImage.from_array(np.full((1, 8, 8), 2.0))
        assert abs(measure_snr(noisy, clean)) < 1e-12

    def test_known_rms_monte_carlo(self):
        rng = np.random.default_rng(42)
        n = 1_000_000
        clean = LinearImage.from_array(np.full((1, 1000, 1000), 10.0))
        noisy = LinearImage.from_array(10.0 + rng.normal(0.0, 1.0, (1, 1000, 1000)))
        snr = measure_snr(noisy, clean)
        assert abs(snr - 20.0) < 0.2

    def test_scale_invariance(self):
        rng = np.random.default_rng(1)
        clean = rng.random((3, 6, 6)) + 0.5
        noisy = clean + 0.01 * rng.standard_normal((3, 6, 6))
        a = measure_snr(LinearImage.from_array(noisy), LinearImage.from_array(clean))
        b = measure_snr(
            LinearImage.from_array(7.5 * noisy), LinearImage.from_array(7.5 * clean)
        )
        assert abs(a - b) < 1e-9

    def test_zero_signal_gives_negative_infinity(self):
        zero = LinearImage.from_array(np.zeros((1, 2, 2)))
        one = LinearImage.from_array(np.ones((1, 2, 2)))
        assert measure_snr(one, zero) == -math.inf

    def test_black_level_subtracted_before_ratio(self):
        clean = LinearImage.from_array(np.full((1, 4, 4), 1.5))
        noisy = LinearImage.from_array(np.full((1, 4, 4), 2.5))
        # after subtracting black level 0.5, signal power is 1, noise power 1
        assert abs(measure_snr(noisy, clean, black_level=0.5)) < 1e-12
