import numpy as np
import pytest

from stemcurate.head import (
    HeadError,
    HeadParams,
    TrainConfig,
    TrainingError,
    decide,
    evaluate,
    f1_score,
    grad_check,
    head_forward,
    load_head,
    metrics_from_counts,
    save_head,
    train_head,
)


def two_gaussian_dataset(dim=16, n_per_class=200, seed=0, separation=3.0):
    rng = np.random.default_rng(seed)
    pos = rng.normal(+separation / 2, 1.0, size=(n_per_class, dim))
    neg = rng.normal(-separation / 2, 1.0, size=(n_per_class, dim))
    data = [(v, 1) for v in pos] + [(v, 0) for v in neg]
    order = rng.permutation(len(data))
    return [data[i] for i in order]


class TestForward:
    def test_zero_head_gives_half(self):
        params = HeadParams.zeros(8)
        logit, prob = head_forward(np.ones(8), params)
        assert logit == 0.0
        assert prob == 0.5

    def test_parameter_count_at_768(self):
        params = HeadParams.zeros(768)
        expected = (768 * 768 + 768) + (768 * 384 + 384) + (384 * 192 + 192) + (192 * 1 + 1)
        assert params.parameter_count() == expected == 960_001

    def test_hand_computed_toy_forward(self):
        # D=8 head; first four inputs pass straight through layer 1,
        # layer 2 sums pairs, layer 3 sums pairs, output doubles the sum.
        params = HeadParams.zeros(8)
        params.weights[0][:] = np.eye(8)
        params.weights[1][0, 0] = params.weights[1][1, 0] = 1.0  # -> h2[0]
        params.weights[1][2, 1] = params.weights[1][3, 1] = 1.0  # -> h2[1]
        params.weights[2][0, 0] = params.weights[2][1, 0] = 1.0
        params.weights[3][0, 0] = 2.0
        params.biases[3][0] = -1.0

        e = np.array([0.5, 0.25, 1.0, 0.75, 0.0, 0.0, 0.0, 0.0])
        # by hand: h2 = [0.75, 1.75]; h3[0] = 2.5; logit = 2*2.5 - 1 = 4
        logit, prob = head_forward(e, params)
        assert logit == pytest.approx(4.0, abs=1e-12)
        assert prob == pytest.approx(1.0 / (1.0 + np.exp(-4.0)), abs=1e-12)

    def test_relu_blocks_negative_path(self):
        params = HeadParams.zeros(8)
        params.weights[0][:] = -np.eye(8)
        params.weights[1][0, 0] = 1.0
        params.weights[2][0, 0] = 1.0
        params.weights[3][0, 0] = 1.0
        logit, prob = head_forward(np.ones(8), params)
        assert logit == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(HeadError):
            head_forward(np.ones(12), HeadParams.zeros(8))

    def test_probability_logit_consistency(self):
        rng = np.random.default_rng(2)
        params = HeadParams.initialize(16, rng)
        for _ in range(50):
            logit, prob = head_forward(rng.normal(size=16), params)
            assert 0.0 < prob < 1.0
            assert prob == pytest.approx(1.0 / (1.0 + np.exp(-logit)), abs=1e-12)

    def test_shapes_must_be_consistent(self):
        with pytest.raises(HeadError):
            HeadParams.zeros(10)  # not divisible by 4
        params = HeadParams.zeros(8)
        with pytest.raises(HeadError):
            HeadParams(params.weights[:3] + [np.zeros((3, 1))], params.biases)


class TestDecide:
    def test_boundary_at_half(self):
        assert decide(0.5, 0.5) == 1

    def test_just_below_strict_threshold(self):
        assert decide(0.9949, 0.995) == 0

    def test_at_strict_threshold(self):
        assert decide(0.995, 0.995) == 1

    def test_threshold_range(self):
        with pytest.raises(HeadError):
            decide(0.5, 0.0)
        with pytest.raises(HeadError):
            decide(0.5, 1.0)


class TestGradCheck:
    def test_random_heads_sweep(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            dim = int(rng.choice([8, 16, 32, 64]))
            params = HeadParams.initialize(dim, rng)
            e = rng.normal(size=dim)
            label = int(rng.integers(2))
            assert grad_check(params, e, label) < 1e-4

    def test_zero_head_smooth_point(self):
        assert grad_check(HeadParams.zeros(8), np.ones(8), 1) < 1e-6

    def test_zero_embedding_kills_first_layer_grad(self):
        rng = np.random.default_rng(1)
        params = HeadParams.initialize(8, rng)
        e = np.zeros(8)
        from stemcurate.head import _backward

        _, grad_w, _ = _backward(params, e[None, :], np.array([1.0]))
        np.testing.assert_array_equal(grad_w[0], 0.0)
        assert grad_check(params, e, 1) < 1e-4

    def test_epsilon_range_enforced(self):
        with pytest.raises(HeadError):
            grad_check(HeadParams.zeros(8), np.ones(8), 1, epsilon=1e-2)


class TestTraining:
    def test_separable_clusters_reach_99(self):
        dataset = two_gaussian_dataset(dim=16, n_per_class=200, seed=0)
        params, log = train_head(dataset, TrainConfig(seed=0, max_epochs=200))
        assert len(log) <= 200
        assert max(rec["val_accuracy"] for rec in log) >= 0.99

    def test_shuffled_labels_stay_at_chance(self):
        # destroying the label signal leaves validation accuracy at chance
        rng = np.random.default_rng(3)
        dataset = two_gaussian_dataset(dim=16, n_per_class=200, seed=3)
        shuffled = [(v, int(rng.integers(2))) for v, _ in dataset]
        _, log = train_head(shuffled, TrainConfig(seed=3, max_epochs=60))
        assert 0.4 <= log[-1]["val_accuracy"] <= 0.6

    def test_single_class_rejected(self):
        dataset = [(np.ones(8), 1) for _ in range(10)]
        with pytest.raises(TrainingError, match="degenerate label set"):
            train_head(dataset, TrainConfig())

    def test_seed_reproducibility(self):
        dataset = two_gaussian_dataset(dim=8, n_per_class=40, seed=5)
        cfg = TrainConfig(seed=11, max_epochs=12)
        a, log_a = train_head(dataset, cfg)
        b, log_b = train_head(dataset, cfg)
        assert log_a == log_b
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_loss_decreases_overall(self):
        dataset = two_gaussian_dataset(dim=16, n_per_class=100, seed=7)
        _, log = train_head(dataset, TrainConfig(seed=7, max_epochs=50))
        assert log[-1]["train_loss"] < log[0]["train_loss"]

    def test_lr_halves_on_plateau(self):
        dataset = two_gaussian_dataset(dim=8, n_per_class=30, seed=1, separation=6.0)
        _, log = train_head(
            dataset, TrainConfig(seed=1, max_epochs=200, early_stop_patience=10)
        )
        lrs = {rec["lr"] for rec in log}
        assert len(lrs) >= 2  # plateau reached, lr halved at least once

    def test_config_validation(self):
        with pytest.raises(HeadError):
            TrainConfig(learning_rate=0)
        with pytest.raises(HeadError):
            TrainConfig(val_fraction=1.5)


class TestEvaluate:
    def test_paper_f1_formula(self):
        assert f1_score(0.9750, 0.9832) == pytest.approx(0.9791, abs=1e-4)

    def test_perfect_classifier(self):
        report = metrics_from_counts(tp=5, fp=0, tn=5, fn=0, threshold=0.5)
        assert report.accuracy == 1.0
        assert report.f1 == 1.0
        assert report.undefined == ()

    def test_all_negative_predictions(self):
        report = metrics_from_counts(tp=0, fp=0, tn=5, fn=5, threshold=0.5)
        assert report.accuracy == 0.5
        assert report.precision == 0.0
        assert report.recall == 0.0
        assert report.f1 == 0.0
        assert "precision" in report.undefined

    def test_counts_consistent_with_metrics(self):
        rng = np.random.default_rng(0)
        params = HeadParams.initialize(8, rng)
        dataset = [(rng.normal(size=8), int(rng.integers(2))) for _ in range(64)]
        report = evaluate(params, dataset, 0.5)
        recomputed = metrics_from_counts(
            report.tp, report.fp, report.tn, report.fn, 0.5
        )
        assert recomputed == report
        assert report.tp + report.fp + report.tn + report.fn == 64

    def test_threshold_monotonicity_of_positives(self):
        rng = np.random.default_rng(4)
        params = HeadParams.initialize(8, rng)
        dataset = [(rng.normal(size=8), int(rng.integers(2))) for _ in range(128)]
        previous = None
        for threshold in np.linspace(0.05, 0.95, 19):
            report = evaluate(params, dataset, float(threshold))
            flagged = report.tp + report.fp
            if previous is not None:
                assert flagged <= previous
            previous = flagged

    def test_empty_dataset_rejected(self):
        with pytest.raises(HeadError):
            evaluate(HeadParams.zeros(8), [], 0.5)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        params = HeadParams.initialize(16, rng)
        path = tmp_path / "piano.head.npz"
        save_head(path, params, backend_name="spectral-v1", seed=6)
        loaded, meta = load_head(path)
        assert meta["backend_name"] == "spectral-v1"
        assert meta["seed"] == 6
        for a, b in zip(params.weights, loaded.weights):
            np.testing.assert_array_equal(a, b)

    def test_backend_dim_mismatch_rejected(self, tmp_path):
        params = HeadParams.zeros(16)
        path = tmp_path / "h.npz"
        save_head(path, params, "spectral-v1", seed=0)

        class WrongBackend:
            name = "other"
            dim_d = 128

        with pytest.raises(HeadError, match="D=16"):
            load_head(path, WrongBackend())
