import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from signnet.losses import (
    LossWeights,
    TripletBatch,
    ctc_feasible,
    ctc_log_probability,
    ctc_probability,
    metric_loss,
    mse_loss,
    pool_embedding,
    recognition_loss,
    select_triplets,
    total_pose2text_loss,
    total_text2pose_loss,
    translation_loss,
    triplet_distance,
)
from signnet.tensor import Tensor, finite_difference_check, softmax


# ---------------------------------------------------------------- oracles
def collapse(path, blank=0):
    out, prev = [], None
    for s in path:
        if s != prev and s != blank:
            out.append(s)
        prev = s
    return tuple(out)


def brute_force_ctc(probs, target, blank=0):
    """Sum of path probabilities over every length-T label path."""
    n_frames, n_labels = probs.shape
    total = 0.0
    for path in itertools.product(range(n_labels), repeat=n_frames):
        if collapse(path, blank) == tuple(target):
            total += np.prod(probs[np.arange(n_frames), path])
    return total


def random_probs(rng, n_frames, n_labels):
    return softmax(Tensor(rng.normal(size=(n_frames, n_labels)) * 2)).data


# -------------------------------------------------------------------- MSE
class TestMse:
    def test_zero_at_truth(self, rng):
        x = rng.normal(size=(3, 4))
        assert mse_loss(Tensor(x), x).item() == 0.0

    def test_hand_value(self):
        assert mse_loss(Tensor([0.0, 0.0]), [1.0, 1.0]).item() == 1.0

    @given(arrays(np.float64, (2, 3), elements=st.floats(-5, 5)), st.floats(-3, 3))
    def test_homogeneity(self, x, c):
        y = np.ones_like(x)
        assert mse_loss(Tensor(c * x), c * y).item() == pytest.approx(c * c * mse_loss(Tensor(x), y).item(),
                                                                     rel=1e-9, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mse_loss(Tensor(np.zeros((2, 3))), np.zeros((3, 2)))

    def test_mask_ignores_padding(self, rng):
        pred, truth = rng.normal(size=(1, 3, 4)), rng.normal(size=(1, 3, 4))
        base = mse_loss(Tensor(pred), truth).item()
        padded_pred = np.concatenate([pred, rng.normal(size=(1, 2, 4))], axis=1)
        padded_truth = np.concatenate([truth, np.zeros((1, 2, 4))], axis=1)
        mask = np.array([[True, True, True, False, False]])
        assert mse_loss(Tensor(padded_pred), padded_truth, mask).item() == pytest.approx(base, rel=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        truth, mask = rng.normal(size=(2, 3, 4)), np.array([[1, 1, 0], [1, 0, 0]], dtype=bool)
        assert finite_difference_check(lambda t: mse_loss(t, truth, mask), Tensor(rng.normal(size=(2, 3, 4)))) < 1e-4


# ---------------------------------------------------------------- triplet
class TestPoolEmbedding:
    def test_single_frame(self):
        np.testing.assert_array_equal(pool_embedding([[1.0, 2.0]]), [1.0, 2.0])

    def test_constant_frames(self):
        np.testing.assert_array_equal(pool_embedding([[3.0, -1.0]] * 3), [3.0, -1.0])

    def test_mean(self):
        np.testing.assert_array_equal(pool_embedding([[0.0, 0.0], [2.0, 4.0]]), [1.0, 2.0])

    def test_empty(self):
        with pytest.raises(ValueError):
            pool_embedding(np.zeros((0, 3)))


class TestTripletDistance:
    def test_separated_beyond_margin(self):
        s = np.array([np.sqrt(0.5), 0.0])
        assert triplet_distance([0.0, 0.0], [0.0, 0.0], s, 0.2) == 0.0

    def test_hand_example(self):
        assert triplet_distance([0.0, 0.0], [0.1, 0.0], [1.0, 0.0], 0.2) == 0.0

    def test_margin_remains(self):
        assert triplet_distance([0.0, 0.0], [1.0, 0.0], [1.0, 0.0], 0.2) == 0.2

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            triplet_distance([0.0, 0.0], [0.0], [0.0, 0.0])

    @given(*(arrays(np.float64, 3, elements=st.floats(-10, 10)) for _ in range(4)), st.floats(0, 2))
    def test_bounds_and_translation_invariance(self, b, t, s, shift, margin):
        d = triplet_distance(b, t, s, margin)
        assert 0.0 <= d <= np.sum((b - t) ** 2) + margin + 1e-9
        assert triplet_distance(b + shift, t + shift, s + shift, margin) == pytest.approx(d, abs=1e-9)


class TestSelectTriplets:
    def _pairs(self, rng, n=4):
        return [(rng.normal(size=(3, 2)), Tensor(rng.normal(size=(3, 2)))) for _ in range(n)]

    def test_negatives_differ_and_deterministic(self, rng):
        pairs = self._pairs(rng, 6)
        a = select_triplets(pairs, np.random.default_rng(5))
        b = select_triplets(pairs, np.random.default_rng(5))
        assert [t.false_index for t in a] == [t.false_index for t in b]
        assert all(t.index != t.false_index for t in a)

    def test_batch_of_one(self, rng):
        with pytest.raises(ValueError):
            select_triplets(self._pairs(rng, 1), rng)

    def test_uniform_negative(self):
        """Sample 1 of a batch of 4: each other index about a third of the time."""
        pairs = [(np.full((1, 2), float(k)), Tensor(np.zeros((1, 2)))) for k in range(4)]
        rng = np.random.default_rng(0)
        n = 10_000
        counts = np.zeros(4)
        for _ in range(n):
            counts[select_triplets(pairs, rng)[1].false_index] += 1
        assert counts[1] == 0
        sigma = np.sqrt(n * (1 / 3) * (2 / 3))
        assert np.all(np.abs(counts[[0, 2, 3]] - n / 3) < 3 * sigma)

    def test_hardest_picks_nearest(self):
        pairs = [(np.array([[x, 0.0]]), Tensor(np.zeros((1, 2)))) for x in (0.0, 0.1, 5.0)]
        assert [t.false_index for t in select_triplets(pairs, None, mining="hardest")] == [1, 0, 1]

    def test_embedding_applied(self, rng):
        pairs = self._pairs(rng)
        plain = select_triplets(pairs, np.random.default_rng(1))
        scaled = select_triplets(pairs, np.random.default_rng(1), embed=lambda v: v * 2.0)
        np.testing.assert_allclose(scaled[0].baseline, 2 * plain[0].baseline)
        np.testing.assert_allclose(scaled[0].truth.data, 2 * plain[0].truth.data)


class TestMetricLoss:
    def test_all_satisfied(self):
        tr = TripletBatch(np.zeros(2), Tensor(np.zeros(2)), np.array([1.0, 0.0]))
        assert metric_loss([tr, tr]).item() == 0.0

    def test_additive(self):
        a = TripletBatch(np.zeros(1), Tensor(np.zeros(1)), np.zeros(1), margin=0.2)
        b = TripletBatch(np.zeros(1), Tensor(np.zeros(1)), np.zeros(1), margin=0.3)
        assert metric_loss([a, b]).item() == pytest.approx(0.5)

    def test_empty(self):
        with pytest.raises(ValueError):
            metric_loss([])

    def test_gradient_only_through_predictions(self, rng):
        truths = [Tensor(rng.normal(size=(3, 2)), requires_grad=True) for _ in range(3)]
        preds = [Tensor(rng.normal(size=(3, 2)) * 3, requires_grad=True) for _ in range(3)]
        loss = metric_loss(select_triplets(list(zip(truths, preds)), np.random.default_rng(0), margin=100.0))
        loss.backward()
        assert all(t.grad is None for t in truths)
        assert all(p.grad is not None and np.abs(p.grad).sum() > 0 for p in preds)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient_matches_finite_difference(self, seed):
        rng = np.random.default_rng(seed)
        b = rng.normal(size=4)
        s = b + rng.normal(size=4) * 0.1  # negative close to the anchor
        t0 = b + rng.normal(size=4) * 2  # positive far away, so the hinge is active
        f = lambda t: metric_loss([TripletBatch(b, t, s, margin=1.0)])
        assert f(Tensor(t0)).item() > 0
        assert finite_difference_check(f, Tensor(t0)) < 1e-4


# -------------------------------------------------------------------- CTC
class TestCtc:
    def test_hand_example(self):
        probs = np.array([[0.4, 0.6], [0.5, 0.5]])  # columns: blank, "a"
        assert ctc_probability(probs, [1]).item() == pytest.approx(0.8, abs=1e-15)

    def test_target_too_long(self):
        probs = np.full((2, 3), 1 / 3)
        assert ctc_probability(probs, [1, 2, 1]).item() == 0.0
        assert ctc_probability(probs, [1, 1]).item() == 0.0  # repeat needs a blank between
        assert not ctc_feasible(2, [1, 1]) and ctc_feasible(3, [1, 1])

    def test_empty_target(self, rng):
        probs = random_probs(rng, 4, 3)
        assert ctc_probability(probs, []).item() == pytest.approx(np.prod(probs[:, 0]), rel=1e-12)

    def test_infeasible_gradient_is_zero(self):
        p = Tensor(np.full((1, 3), 1 / 3), requires_grad=True)
        ctc_probability(p, [1, 2]).backward()
        np.testing.assert_array_equal(p.grad, 0.0)

    def test_rejects_blank_in_target(self):
        with pytest.raises(ValueError):
            ctc_probability(np.full((2, 2), 0.5), [0])

    @pytest.mark.parametrize("n_frames", range(1, 7))
    @pytest.mark.parametrize("n_labels", [1, 2, 3])
    def test_matches_brute_force(self, n_frames, n_labels):
        rng = np.random.default_rng(10 * n_frames + n_labels)
        probs = random_probs(rng, n_frames, n_labels + 1)
        for length in range(4):
            for target in itertools.product(range(1, n_labels + 1), repeat=length):
                got = ctc_probability(probs, target).item()
                assert got == pytest.approx(brute_force_ctc(probs, target), abs=1e-9)

    @pytest.mark.parametrize("n_frames", range(1, 5))
    def test_total_probability(self, n_frames):
        rng = np.random.default_rng(n_frames)
        probs = random_probs(rng, n_frames, 4)
        total = sum(
            ctc_probability(probs, target).item()
            for length in range(n_frames + 1)
            for target in itertools.product(range(1, 4), repeat=length)
        )
        assert total == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("target", [[1], [1, 2], [2, 2], [1, 2, 1]])
    def test_gradient(self, seed, target):
        rng = np.random.default_rng(seed)
        logits = rng.normal(size=(5, 3))
        assert finite_difference_check(lambda t: ctc_log_probability(softmax(t), target), Tensor(logits)) < 1e-4
        assert finite_difference_check(lambda t: ctc_probability(softmax(t), target), Tensor(logits)) < 1e-4

    def test_long_sequence_log_space_finite(self, rng):
        probs = random_probs(rng, 400, 5)
        assert np.isfinite(ctc_log_probability(probs, [1, 2, 3, 4]).item())


class TestRecognitionLoss:
    def test_complement_form(self):
        probs = np.array([[0.4, 0.6], [0.5, 0.5]])
        assert recognition_loss(probs, [1]).item() == pytest.approx(0.2, abs=1e-15)

    def test_log_form(self):
        probs = np.array([[0.4, 0.6], [0.5, 0.5]])
        assert recognition_loss(probs, [1], form="log").item() == pytest.approx(-np.log(0.8), rel=1e-14)

    def test_perfect_alignment(self):
        probs = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        assert recognition_loss(probs, [1, 2]).item() == 0.0

    def test_infeasible_is_one(self):
        assert recognition_loss(np.full((1, 3), 1 / 3), [1, 2]).item() == 1.0

    def test_unknown_form(self):
        with pytest.raises(ValueError):
            recognition_loss(np.full((1, 2), 0.5), [1], form="hinge")


class TestTranslationLoss:
    def test_certain(self):
        z = Tensor(np.eye(3))
        assert translation_loss(z, [0, 1, 2]).item() == 0.0

    def test_product_rule(self):
        z = Tensor([[0.5, 0.5], [0.6, 0.4]])
        assert translation_loss(z, [0, 1]).item() == pytest.approx(0.8, abs=1e-15)

    def test_annihilation(self):
        z = Tensor([[1.0, 0.0], [0.3, 0.7]])
        assert translation_loss(z, [1, 1]).item() == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            translation_loss(Tensor(np.full((2, 3), 1 / 3)), [0])

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("form", ["complement", "log"])
    def test_gradient(self, seed, form):
        logits = np.random.default_rng(seed).normal(size=(3, 4))
        assert finite_difference_check(lambda t: translation_loss(softmax(t), [1, 3, 0], form), Tensor(logits)) < 1e-4


class TestTotals:
    def test_defaults(self):
        assert LossWeights() == LossWeights(5.0, 5.0, 100.0, 100.0)

    def test_text2pose(self):
        assert total_text2pose_loss(0.1, 0.2, LossWeights()) == pytest.approx(1.5)

    def test_ablation_arm(self):
        assert total_text2pose_loss(0.1, 0.2, LossWeights(lambda_b=0.0)) == pytest.approx(0.5)

    def test_pose2text(self):
        assert total_pose2text_loss(0.01, 0.01, LossWeights()) == pytest.approx(2.0)

    def test_negative_weight(self):
        with pytest.raises(ValueError):
            LossWeights(lambda_a=-1.0)
