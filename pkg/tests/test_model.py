"""Classifier math checked against finite differences and frozen behaviours."""

import numpy as np
import pytest

from alpool.data import generate_synthetic
from alpool.errors import ModelError
from alpool.model import (
    FINE_TUNE,
    FREEZE,
    LINEAR,
    MLP,
    Classifier,
    ModelConfig,
    TrainConfig,
    cross_entropy,
    fine_tune,
    gradients,
    init,
    load_weights,
    predict,
    predict_proba,
    save_weights,
    train,
    with_seed,
)


def linear_cfg(d=3, c=2, seed=0):
    return ModelConfig(feature_count=d, class_count=c, architecture=LINEAR, seed=seed)


def mlp_cfg(d=3, c=2, h=4, seed=0):
    return ModelConfig(feature_count=d, class_count=c, architecture=MLP, hidden_units=h, seed=seed)


def blob_data(rng, n_per=40, d=4, gap=4.0):
    """Two well-separated gaussian blobs, labels 0/1."""
    a = rng.normal(-gap / 2, 1.0, size=(n_per, d))
    b = rng.normal(gap / 2, 1.0, size=(n_per, d))
    x = np.vstack([a, b])
    y = np.array([0] * n_per + [1] * n_per)
    perm = rng.permutation(len(y))
    return x[perm], y[perm]


def numeric_gradients(model, x, y, step=1e-5):
    """Central finite differences of the mean cross-entropy, one weight at a time."""
    grads = []
    for w_idx, w in enumerate(model.weights):
        g = np.zeros_like(w)
        flat = g.reshape(-1)
        for i in range(w.size):
            for sign, bucket in ((+1, 0), (-1, 1)):
                perturbed = [np.array(arr, copy=True) for arr in model.weights]
                perturbed[w_idx].reshape(-1)[i] += sign * step
                loss = cross_entropy(
                    Classifier(config=model.config, weights=tuple(perturbed)), x, y
                )
                if bucket == 0:
                    up = loss
                else:
                    flat[i] = (up - loss) / (2 * step)
        grads.append(g)
    return tuple(grads)


class TestInit:
    def test_linear_shapes(self):
        m = init(linear_cfg(d=5, c=3))
        assert [w.shape for w in m.weights] == [(3, 5), (3,)]

    def test_mlp_shapes(self):
        m = init(mlp_cfg(d=5, c=3, h=7))
        assert [w.shape for w in m.weights] == [(7, 5), (7,), (3, 7), (3,)]

    def test_seed_determinism(self):
        a, b = init(mlp_cfg(seed=9)), init(mlp_cfg(seed=9))
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)
        c = init(mlp_cfg(seed=10))
        assert any(not np.array_equal(wa, wc) for wa, wc in zip(a.weights, c.weights))

    def test_scale_bound(self):
        m = init(mlp_cfg(d=16, c=2, h=8, seed=1))
        assert np.abs(m.weights[0]).max() <= 1 / np.sqrt(16) + 1e-12
        assert np.abs(m.weights[2]).max() <= 1 / np.sqrt(8) + 1e-12

    def test_weights_frozen(self):
        m = init(linear_cfg())
        with pytest.raises(ValueError):
            m.weights[0][0, 0] = 1.0


class TestForward:
    def test_proba_rows_normalized(self):
        rng = np.random.default_rng(2)
        m = init(mlp_cfg(d=6, c=4, h=5, seed=3))
        p = predict_proba(m, rng.normal(size=(10, 6)))
        assert p.shape == (10, 4)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert p.min() >= 0

    def test_softmax_overflow_safe(self):
        m = init(linear_cfg(d=2, c=2))
        p = predict_proba(m, np.array([[1e6, -1e6]]))
        assert np.all(np.isfinite(p))

    def test_predict_is_argmax(self):
        rng = np.random.default_rng(4)
        m = init(mlp_cfg(seed=5))
        x = rng.normal(size=(8, 3))
        np.testing.assert_array_equal(predict(m, x), predict_proba(m, x).argmax(axis=1))

    def test_feature_count_mismatch(self):
        m = init(linear_cfg(d=3))
        with pytest.raises(ModelError) as err:
            predict_proba(m, np.zeros((2, 4)))
        assert err.value.code == "SHAPE_MISMATCH"

    def test_zero_weights_predict_uniform(self):
        m = Classifier(config=linear_cfg(d=3, c=4), weights=(np.zeros((4, 3)), np.zeros(4)))
        p = predict_proba(m, np.random.default_rng(6).normal(size=(5, 3)))
        np.testing.assert_allclose(p, 0.25, atol=1e-12)

    def test_duplicate_rows_get_identical_outputs(self):
        m = init(mlp_cfg(d=3, c=3, h=4, seed=7))
        row = np.array([[0.3, -1.2, 0.8]])
        p = predict_proba(m, np.vstack([row, row]))
        np.testing.assert_array_equal(p[0], p[1])


class TestGradients:
    @pytest.mark.parametrize("cfg", [linear_cfg(d=4, c=3, seed=21), mlp_cfg(d=4, c=3, h=5, seed=22)])
    def test_matches_central_differences(self, cfg):
        rng = np.random.default_rng(cfg.seed)
        m = init(cfg)
        x = rng.normal(size=(6, 4))
        y = rng.integers(0, 3, size=6)
        analytic = gradients(m, x, y)
        numeric = numeric_gradients(m, x, y, step=1e-5)
        for a, n in zip(analytic, numeric):
            denom = np.maximum(np.abs(n), 1e-8)
            assert np.max(np.abs(a - n) / denom) < 1e-4

    def test_unlabeled_sample_rejected(self):
        m = init(linear_cfg())
        with pytest.raises(ModelError) as err:
            gradients(m, np.zeros((1, 3)), [-1])
        assert err.value.code == "UNLABELED_SAMPLE"

    def test_out_of_range_label_rejected(self):
        m = init(linear_cfg(c=2))
        with pytest.raises(ModelError) as err:
            gradients(m, np.zeros((1, 3)), [2])
        assert err.value.code == "INVALID_LABEL"


class TestTrain:
    def test_fine_tune_zero_epochs_keeps_predictions(self):
        rng = np.random.default_rng(25)
        x, y = blob_data(rng)
        base = init(mlp_cfg(d=4, h=5, seed=26))
        tuned = fine_tune(base, x, y, TrainConfig(epochs=0, seed=1))
        probe = rng.normal(size=(12, 4))
        np.testing.assert_array_equal(predict_proba(tuned, probe), predict_proba(base, probe))

    def test_zero_epochs_is_identity(self):
        rng = np.random.default_rng(6)
        m = init(mlp_cfg(seed=7))
        out = train(m, rng.normal(size=(4, 3)), [0, 1, 0, 1], TrainConfig(epochs=0))
        assert out is m

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(8)
        x, y = blob_data(rng)
        cfg = TrainConfig(learning_rate=0.01, epochs=3, batch_size=8, seed=5)
        m = init(mlp_cfg(d=4, seed=1))
        a = train(m, x, y, cfg)
        b = train(m, x, y, cfg)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_input_model_unchanged(self):
        rng = np.random.default_rng(9)
        x, y = blob_data(rng)
        m = init(linear_cfg(d=4, seed=2))
        before = [np.array(w, copy=True) for w in m.weights]
        train(m, x, y, TrainConfig(learning_rate=0.05, epochs=2, seed=0))
        for w, b in zip(m.weights, before):
            assert np.array_equal(w, b)

    def test_loss_decreases_on_separable_data(self):
        rng = np.random.default_rng(10)
        x, y = blob_data(rng)
        m = init(linear_cfg(d=4, seed=3))
        losses = [cross_entropy(m, x, y)]
        cur = m
        for _ in range(5):
            cur = train(cur, x, y, TrainConfig(learning_rate=0.05, epochs=1, seed=0))
            losses.append(cross_entropy(cur, x, y))
        assert losses[-1] < losses[0]

    @pytest.mark.parametrize("cfg", [linear_cfg(d=4, seed=11), mlp_cfg(d=4, h=8, seed=12)])
    def test_separable_blobs_reach_99_accuracy(self, cfg):
        rng = np.random.default_rng(cfg.seed)
        x, y = blob_data(rng, n_per=100)
        m = train(init(cfg), x, y, TrainConfig(learning_rate=0.05, epochs=40, batch_size=8, seed=1))
        assert (predict(m, x) == y).mean() >= 0.99

    def test_well_separated_clusters_reach_99_accuracy(self):
        ds = generate_synthetic(100, 2, [[-3.0, 0.0], [3.0, 0.0]], 0.5, seed=21)
        m = train(
            init(linear_cfg(d=2, seed=22)),
            ds.samples,
            ds.labels,
            TrainConfig(learning_rate=0.1, epochs=50, batch_size=8, seed=5),
        )
        assert (predict(m, ds.samples) == ds.labels).mean() >= 0.99

    def test_full_batch_small_lr_loss_never_increases(self):
        rng = np.random.default_rng(23)
        x = rng.normal(size=(8, 3))
        y = rng.integers(0, 2, size=8)
        cur = init(linear_cfg(d=3, seed=24))
        prev = cross_entropy(cur, x, y)
        for _ in range(100):
            cur = train(cur, x, y, TrainConfig(learning_rate=1e-3, epochs=1, batch_size=8, seed=0))
            loss = cross_entropy(cur, x, y)
            assert loss <= prev + 1e-12
            prev = loss

    def test_freeze_keeps_hidden_layer_bitwise(self):
        rng = np.random.default_rng(13)
        x, y = blob_data(rng)
        base = init(mlp_cfg(d=4, h=6, seed=14))
        tuned = fine_tune(base, x, y, TrainConfig(learning_rate=0.05, epochs=3, mode=FREEZE, seed=2))
        assert np.array_equal(tuned.weights[0], base.weights[0])
        assert np.array_equal(tuned.weights[1], base.weights[1])
        assert not np.array_equal(tuned.weights[2], base.weights[2])

    def test_freeze_on_linear_trains_everything(self):
        rng = np.random.default_rng(15)
        x, y = blob_data(rng)
        base = init(linear_cfg(d=4, seed=16))
        tuned = fine_tune(base, x, y, TrainConfig(learning_rate=0.05, epochs=2, mode=FREEZE, seed=3))
        assert not np.array_equal(tuned.weights[0], base.weights[0])

    def test_three_learning_rates_diverge(self):
        rng = np.random.default_rng(17)
        x, y = blob_data(rng)
        base = init(mlp_cfg(d=4, h=6, seed=18))
        members = [
            fine_tune(base, x, y, with_seed(TrainConfig(epochs=2, seed=4), 4, learning_rate=lr))
            for lr in (0.001, 0.0005, 0.0001)
        ]
        for i in range(3):
            for j in range(i + 1, 3):
                assert any(
                    not np.array_equal(a, b)
                    for a, b in zip(members[i].weights, members[j].weights)
                )

    def test_mini_batch_order_depends_on_seed(self):
        rng = np.random.default_rng(19)
        x, y = blob_data(rng)
        m = init(linear_cfg(d=4, seed=20))
        a = train(m, x, y, TrainConfig(learning_rate=0.05, epochs=1, batch_size=4, seed=1))
        b = train(m, x, y, TrainConfig(learning_rate=0.05, epochs=1, batch_size=4, seed=2))
        assert any(not np.array_equal(wa, wb) for wa, wb in zip(a.weights, b.weights))


class TestSerialization:
    @pytest.mark.parametrize("cfg", [linear_cfg(d=5, c=3, seed=30), mlp_cfg(d=5, c=3, h=4, seed=31)])
    def test_round_trip_bitwise(self, cfg, tmp_path):
        m = init(cfg)
        path = tmp_path / "model.weights"
        save_weights(m, path)
        loaded = load_weights(path)
        assert loaded.config.architecture == cfg.architecture
        assert loaded.config.feature_count == cfg.feature_count
        assert loaded.config.class_count == cfg.class_count
        for wa, wb in zip(m.weights, loaded.weights):
            assert np.array_equal(wa, wb)

    def test_truncated_file_rejected(self, tmp_path):
        m = init(linear_cfg())
        path = tmp_path / "model.weights"
        save_weights(m, path)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(ModelError) as err:
            load_weights(path)
        assert err.value.code == "TRUNCATED_FILE"

    def test_trailing_garbage_rejected(self, tmp_path):
        m = init(linear_cfg())
        path = tmp_path / "model.weights"
        save_weights(m, path)
        path.write_bytes(path.read_bytes() + b"\x00" * 3)
        with pytest.raises(ModelError) as err:
            load_weights(path)
        assert err.value.code == "BAD_MAGIC"

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "model.weights"
        path.write_bytes(b"\xff" * 32)
        with pytest.raises(ModelError) as err:
            load_weights(path)
        assert err.value.code == "BAD_MAGIC"


class TestValidation:
    def test_nan_weights_rejected(self):
        cfg = linear_cfg(d=2, c=2)
        bad = (np.full((2, 2), np.nan), np.zeros(2))
        with pytest.raises(ModelError) as err:
            Classifier(config=cfg, weights=bad)
        assert err.value.code == "NON_FINITE_WEIGHT"

    def test_wrong_shape_rejected(self):
        cfg = linear_cfg(d=2, c=2)
        with pytest.raises(ModelError):
            Classifier(config=cfg, weights=(np.zeros((3, 3)), np.zeros(2)))

    def test_bad_config_rejected(self):
        with pytest.raises(ModelError):
            ModelConfig(feature_count=0, class_count=2)
        with pytest.raises(ModelError):
            ModelConfig(feature_count=2, class_count=1)
        with pytest.raises(ModelError):
            ModelConfig(feature_count=2, class_count=2, architecture=MLP, hidden_units=0)
        with pytest.raises(ModelError):
            TrainConfig(learning_rate=-0.1)
