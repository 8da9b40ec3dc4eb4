"""Tests for the feature-consistency loss and low-rank weight merging."""

import numpy as np
import pytest

from darksfm.adaptation import (
    FeatureBundle,
    LoraDelta,
    distill_loss,
    lora_merge,
)
from darksfm.errors import ShapeMismatchError


def make_bundle(rng, h=3, w=4, de=5, dd=6, dc=7):
    return FeatureBundle(
        encoder=rng.standard_normal((2, h, w, de)),
        decoder=rng.standard_normal((2, h, w, dd)),
        correspondence=rng.standard_normal((2, h, w, dc)),
    )


def clone_bundle(b):
    return FeatureBundle(
        encoder=b.encoder.copy(),
        decoder=b.decoder.copy(),
        correspondence=b.correspondence.copy(),
    )


def sq_distance_oracle(a, b):
    """Element-by-element accumulation over all three tensors."""
    acc = 0.0
    for ta, tb in zip(a.tensors(), b.tensors()):
        for x, y in zip(ta.ravel(), tb.ravel()):
            acc += (x - y) ** 2
    return acc


class TestDistillLoss:
    def test_identical_bundles_zero(self):
        rng = np.random.default_rng(0)
        t = make_bundle(rng)
        loss = distill_loss(t, clone_bundle(t), clone_bundle(t), lambda_clean=0.3)
        assert loss == (0.0, 0.0, 0.0)

    def test_constructed_losses_combine_with_regularization_weight(self):
        # engineered so the noisy term is exactly 1.0 and the clean term 2.0
        zeros = FeatureBundle(
            encoder=np.zeros((2, 1, 1, 2)),
            decoder=np.zeros((2, 1, 1, 2)),
            correspondence=np.zeros((2, 1, 1, 2)),
        )
        noisy = clone_bundle(zeros)
        noisy.encoder[0, 0, 0, 0] = 1.0  # squared distance 1.0
        clean = clone_bundle(zeros)
        clean.decoder[0, 0, 0, 0] = 1.0
        clean.decoder[0, 0, 0, 1] = 1.0  # squared distance 2.0
        loss = distill_loss(zeros, noisy, clean, lambda_clean=0.3)
        assert loss.noisy == 1.0
        assert loss.clean == 2.0
        assert abs(loss.total - 1.6) < 1e-15

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(1)
        t, sn, sc = make_bundle(rng), make_bundle(rng), make_bundle(rng)
        loss = distill_loss(t, sn, sc, lambda_clean=0.3)
        expected_noisy = sq_distance_oracle(t, sn)
        expected_clean = sq_distance_oracle(t, sc)
        assert abs(loss.noisy - expected_noisy) / expected_noisy < 1e-6
        assert abs(loss.clean - expected_clean) / expected_clean < 1e-6
        expected_total = expected_noisy + 0.3 * expected_clean
        assert abs(loss.total - expected_total) / expected_total < 1e-6

    def test_symmetric_in_each_term(self):
        rng = np.random.default_rng(2)
        t, s = make_bundle(rng), make_bundle(rng)
        a = distill_loss(t, s, clone_bundle(t)).noisy
        b = distill_loss(s, t, clone_bundle(s)).noisy
        assert abs(a - b) < 1e-9

    def test_finite_difference_gradient(self):
        rng = np.random.default_rng(3)
        t = make_bundle(rng, h=2, w=2, de=3, dd=3, dc=3)
        sn = make_bundle(rng, h=2, w=2, de=3, dd=3, dc=3)
        sc = make_bundle(rng, h=2, w=2, de=3, dd=3, dc=3)
        lam = 0.3
        h = 1e-5
        rng_idx = np.random.default_rng(4)
        for _ in range(10):
            view = int(rng_idx.integers(2))
            y, x, d = (int(rng_idx.integers(2)), int(rng_idx.integers(2)), int(rng_idx.integers(3)))
            # noisy-student element: analytic gradient is 2 * (student - teacher)
            analytic = 2.0 * (sn.encoder[view, y, x, d] - t.encoder[view, y, x, d])
            sn.encoder[view, y, x, d] += h
            up = distill_loss(t, sn, sc, lam).total
            sn.encoder[view, y, x, d] -= 2 * h
            down = distill_loss(t, sn, sc, lam).total
            sn.encoder[view, y, x, d] += h
            fd = (up - down) / (2 * h)
            assert abs(fd - analytic) < 1e-6
            # clean-student element picks up the regularization weight
            analytic_c = 2.0 * lam * (sc.decoder[view, y, x, d] - t.decoder[view, y, x, d])
            sc.decoder[view, y, x, d] += h
            up = distill_loss(t, sn, sc, lam).total
            sc.decoder[view, y, x, d] -= 2 * h
            down = distill_loss(t, sn, sc, lam).total
            sc.decoder[view, y, x, d] += h
            fd = (up - down) / (2 * h)
            assert abs(fd - analytic_c) < 1e-6

    def test_shape_mismatch_names_offending_tensor(self):
        rng = np.random.default_rng(5)
        t = make_bundle(rng)
        bad = FeatureBundle(
            encoder=rng.standard_normal((2, 3, 4, 5)),
            decoder=rng.standard_normal((2, 3, 4, 9)),
            correspondence=rng.standard_normal((2, 3, 4, 7)),
        )
        with pytest.raises(ShapeMismatchError, match="decoder"):
            distill_loss(t, bad, clone_bundle(t))

    def test_per_tensor_mean_flag(self):
        rng = np.random.default_rng(6)
        t, sn, sc = make_bundle(rng), make_bundle(rng), make_bundle(rng)
        loss = distill_loss(t, sn, sc, lambda_clean=0.0, per_tensor_mean=True)
        expected = sum(
            float(np.mean((a - b) ** 2))
            for a, b in zip(t.tensors(), sn.tensors())
        )
        assert abs(loss.noisy - expected) < 1e-12

    def test_bundle_leading_shape_validated(self):
        rng = np.random.default_rng(7)
        with pytest.raises(ShapeMismatchError):
            FeatureBundle(
                encoder=rng.standard_normal((2, 3, 4, 5)),
                decoder=rng.standard_normal((2, 3, 5, 5)),
                correspondence=rng.standard_normal((2, 3, 4, 5)),
            )


class TestLoraMerge:
    def test_zero_update_returns_base(self):
        rng = np.random.default_rng(8)
        W = rng.standard_normal((6, 4))
        delta = LoraDelta(base=W, down=rng.standard_normal((2, 4)), up=np.zeros((6, 2)), alpha=3.0)
        np.testing.assert_array_equal(lora_merge(delta), W)

    def test_rank_one_outer_product(self):
        e1_col = np.zeros((4, 1))
        e1_col[0, 0] = 1.0
        e1_row = np.zeros((1, 4))
        e1_row[0, 0] = 1.0
        delta = LoraDelta(base=np.zeros((4, 4)), down=e1_row, up=e1_col, alpha=1.0)
        merged = lora_merge(delta)
        expected = np.zeros((4, 4))
        expected[0, 0] = 1.0
        np.testing.assert_array_equal(merged, expected)

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(9)
        m, n, r = 8, 8, 2
        W = rng.standard_normal((m, n))
        A = rng.standard_normal((r, n))
        B = rng.standard_normal((m, r))
        alpha = 1.7
        merged = lora_merge(LoraDelta(base=W, down=A, up=B, alpha=alpha))
        expected = W.copy()
        for i in range(m):
            for j in range(n):
                acc = 0.0
                for k in range(r):
                    acc += B[i, k] * A[k, j]
                expected[i, j] += (alpha / r) * acc
        np.testing.assert_allclose(merged, expected, atol=1e-12)

    def test_linear_in_each_factor(self):
        rng = np.random.default_rng(10)
        W = np.zeros((5, 3))
        A1, A2 = rng.standard_normal((2, 3)), rng.standard_normal((2, 3))
        B = rng.standard_normal((5, 2))
        m1 = lora_merge(LoraDelta(base=W, down=A1, up=B, alpha=2.0))
        m2 = lora_merge(LoraDelta(base=W, down=A2, up=B, alpha=2.0))
        m12 = lora_merge(LoraDelta(base=W, down=A1 + A2, up=B, alpha=2.0))
        np.testing.assert_allclose(m12, m1 + m2, atol=1e-12)

    def test_rank_bound_enforced(self):
        with pytest.raises(ShapeMismatchError):
            LoraDelta(
                base=np.zeros((3, 3)),
                down=np.zeros((4, 3)),
                up=np.zeros((3, 4)),
            )
