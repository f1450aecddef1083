import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deskbench import mlp
from deskbench.dataio import DenseDataset, generate_synthetic
from deskbench.errors import ConfigError, DataFormatError


def tiny_arch(**overrides):
    base = dict(input_size=6, hidden_size=3, num_hidden_blocks=1,
                output_size=2, dropout_p=0.0)
    base.update(overrides)
    return mlp.MlpArchitecture(**base)


def zero_model(arch, bn_eps=1e-5):
    model = mlp.init_model(arch, np.random.default_rng(0), bn_eps=bn_eps)
    for block in model.blocks:
        block["w"][:] = 0.0
    model.out_w[:] = 0.0
    model.mode = "eval"
    return model


class TestConfigs:
    def test_arch_defaults_match_reference(self):
        arch = mlp.MlpArchitecture()
        assert (arch.input_size, arch.hidden_size, arch.num_hidden_blocks,
                arch.output_size, arch.dropout_p) == (2000, 128, 2, 2, 0.8)

    def test_train_defaults(self):
        cfg = mlp.MlpTrainConfig()
        assert (cfg.learning_rate, cfg.weight_decay, cfg.epochs, cfg.batch_size) == (
            1e-5, 1e-4, 100, 128)
        assert (cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps) == (0.9, 0.999, 1e-8)
        assert (cfg.bn_momentum, cfg.bn_eps) == (0.1, 1e-5)

    @pytest.mark.parametrize("kwargs", [
        {"input_size": 0}, {"dropout_p": 1.0}, {"dropout_p": -0.1},
    ])
    def test_arch_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            tiny_arch(**kwargs)

    @pytest.mark.parametrize("kwargs", [
        {"epochs": 0}, {"batch_size": 1}, {"adam_beta1": 1.0},
        {"adam_eps": 0.0}, {"learning_rate": 0.0}, {"bn_momentum": 0.0},
        {"class_weights": (0.0, 1.0)},
    ])
    def test_train_config_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            mlp.MlpTrainConfig(**kwargs)


class TestForward:
    def test_zero_network_gives_zero_logits(self):
        model = zero_model(tiny_arch())
        logits = mlp.forward(model, np.random.default_rng(1).normal(size=(4, 6)))
        assert np.array_equal(logits, np.zeros((4, 2)))

    @pytest.mark.parametrize("batch_rows", [1, 2, 7])
    def test_eval_shape(self, batch_rows):
        model = mlp.init_model(tiny_arch(), np.random.default_rng(2))
        model.mode = "eval"
        logits = mlp.forward(model, np.zeros((batch_rows, 6)))
        assert logits.shape == (batch_rows, 2)

    def test_train_bn_normalizes_batch(self):
        # tiny bn_eps so normalized variance sits within 1e-6 of 1
        model = mlp.init_model(tiny_arch(hidden_size=5), np.random.default_rng(3),
                               bn_eps=1e-9)
        X = np.random.default_rng(4).normal(size=(64, 6)) * 3.0
        _, _, caches = mlp._forward_cache(model, X, "train", None, False)
        x_hat = caches[0]["x_hat"]
        assert np.max(np.abs(x_hat.mean(axis=0))) < 1e-6
        assert np.max(np.abs(x_hat.var(axis=0) - 1.0)) < 1e-6

    def test_running_stats_ema(self):
        model = mlp.init_model(tiny_arch(hidden_size=2), np.random.default_rng(5))
        X = np.random.default_rng(6).normal(size=(8, 6))
        z = X @ model.blocks[0]["w"] + model.blocks[0]["b"]
        mu, var_biased = z.mean(axis=0), z.var(axis=0)
        mlp.forward(model, X, mode="train")
        expect_mean = 0.9 * 0.0 + 0.1 * mu
        expect_var = 0.9 * 1.0 + 0.1 * var_biased * 8 / 7  # unbiased into the EMA
        assert np.allclose(model.blocks[0]["run_mean"], expect_mean, atol=1e-12)
        assert np.allclose(model.blocks[0]["run_var"], expect_var, atol=1e-12)

    def test_eval_forward_is_pure(self):
        model = mlp.init_model(tiny_arch(), np.random.default_rng(7))
        model.mode = "eval"
        X = np.random.default_rng(8).normal(size=(5, 6))
        before = [block["run_mean"].copy() for block in model.blocks]
        a = mlp.forward(model, X)
        b = mlp.forward(model, X)
        assert np.array_equal(a, b)
        for block, run_mean in zip(model.blocks, before):
            assert np.array_equal(block["run_mean"], run_mean)

    def test_train_batch_of_one_rejected(self):
        model = mlp.init_model(tiny_arch(), np.random.default_rng(9))
        with pytest.raises(DataFormatError):
            mlp.forward(model, np.zeros((1, 6)), mode="train")

    def test_width_mismatch(self):
        model = mlp.init_model(tiny_arch(), np.random.default_rng(10))
        with pytest.raises(DataFormatError):
            mlp.forward(model, np.zeros((2, 5)), mode="eval")

    def test_dropout_needs_rng(self):
        model = mlp.init_model(tiny_arch(dropout_p=0.5), np.random.default_rng(11))
        with pytest.raises(ConfigError):
            mlp.forward(model, np.zeros((4, 6)), mode="train")

    def test_dropout_expectation_matches_eval(self):
        model = mlp.init_model(tiny_arch(hidden_size=8, dropout_p=0.5),
                               np.random.default_rng(3))
        model.out_b[:] = [1.0, -1.5]
        X = np.random.default_rng(12).normal(size=(3, 6))
        model.mode = "eval"
        target = mlp.forward(model, X)
        assert np.min(np.abs(target)) > 0.2  # keeps the relative bound meaningful
        rng = np.random.default_rng(99)
        total = np.zeros_like(target)
        for _ in range(10_000):
            total += mlp.forward(model, X, mode="train", rng=rng, freeze_bn=True)
        mean = total / 10_000
        assert np.all(np.abs(mean - target) <= 0.02 * np.abs(target))


class TestSoftmax:
    @given(st.integers(0, 2**31 - 1), st.integers(1, 12), st.integers(2, 6))
    @settings(max_examples=50, deadline=None)
    def test_rows_sum_to_one(self, seed, rows, cols):
        rng = np.random.default_rng(seed)
        logits = rng.normal(size=(rows, cols)) * rng.uniform(1, 200)
        probs = mlp.softmax(logits)
        assert np.all(np.abs(probs.sum(axis=1) - 1.0) < 1e-12)
        assert np.all(probs >= 0)


class TestLossAndGradients:
    def test_uniform_logits_ln2(self):
        model = zero_model(tiny_arch())
        model.mode = "train"
        X = np.random.default_rng(13).normal(size=(6, 6))
        labels = np.array([0, 1, 0, 1, 1, 0])
        loss, _ = mlp.loss_and_gradients(model, X, labels)
        assert loss == pytest.approx(np.log(2.0), abs=1e-12)

    def test_class_weight_multiplier_rule(self):
        # one distinct label-0 example, duplicated to satisfy the BN batch
        # contract; weights (2,1) must scale the loss by exactly 2
        model = mlp.init_model(tiny_arch(), np.random.default_rng(14))
        row = np.random.default_rng(15).normal(size=6)
        X = np.vstack([row, row])
        labels = np.array([0, 0])
        plain, _ = mlp.loss_and_gradients(model, X, labels)
        weighted, _ = mlp.loss_and_gradients(model, X, labels, class_weights=(2.0, 1.0))
        assert weighted == pytest.approx(2.0 * plain, rel=1e-15)

    def test_eval_mode_rejected(self):
        model = zero_model(tiny_arch())
        with pytest.raises(ConfigError):
            mlp.loss_and_gradients(model, np.zeros((2, 6)), np.array([0, 1]))

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(16)
        model = mlp.init_model(tiny_arch(), rng)
        X = rng.normal(size=(4, 6))
        labels = np.array([0, 1, 1, 0])
        weights = (1.3, 0.7)
        _, grads = mlp.loss_and_gradients(model, X, labels, class_weights=weights)

        def loss_only():
            return mlp.loss_and_gradients(model, X, labels, class_weights=weights)[0]

        h = 1e-5
        params = [
            (model.blocks[0]["w"], grads["blocks"][0]["w"]),
            (model.blocks[0]["b"], grads["blocks"][0]["b"]),
            (model.blocks[0]["gamma"], grads["blocks"][0]["gamma"]),
            (model.blocks[0]["beta"], grads["blocks"][0]["beta"]),
            (model.out_w, grads["out_w"]),
            (model.out_b, grads["out_b"]),
        ]
        worst = 0.0
        for param, grad in params:
            flat = param.reshape(-1)
            gflat = np.asarray(grad).reshape(-1)
            for j in range(flat.size):
                keep = flat[j]
                flat[j] = keep + h
                up = loss_only()
                flat[j] = keep - h
                down = loss_only()
                flat[j] = keep
                fd = (up - down) / (2 * h)
                # 1e-6 floor: BN zeroes the pre-BN bias gradient exactly, so
                # those coordinates are pure finite-difference noise
                rel = abs(fd - gflat[j]) / max(abs(fd), abs(gflat[j]), 1e-6)
                worst = max(worst, rel)
        assert worst < 1e-4

    def test_gradient_shapes_mirror_parameters(self):
        model = mlp.init_model(tiny_arch(num_hidden_blocks=2), np.random.default_rng(17))
        _, grads = mlp.loss_and_gradients(
            model, np.random.default_rng(18).normal(size=(5, 6)), np.array([0, 1, 0, 1, 1])
        )
        assert len(grads["blocks"]) == 2
        for block, g in zip(model.blocks, grads["blocks"]):
            for name in ("w", "b", "gamma", "beta"):
                assert g[name].shape == block[name].shape
        assert grads["out_w"].shape == model.out_w.shape


class TestTrain:
    def small_ds(self, n=300, f=6, seed=20):
        return generate_synthetic(n, f, separation=3.0, seed=seed)

    def cfg(self, **overrides):
        base = dict(learning_rate=1e-2, weight_decay=1e-4, epochs=4,
                    batch_size=32, seed=5)
        base.update(overrides)
        return mlp.MlpTrainConfig(**base)

    def test_curve_length_and_determinism(self):
        ds = self.small_ds()
        arch = tiny_arch(dropout_p=0.2)
        _, curve_a = mlp.train(ds, arch, self.cfg())
        _, curve_b = mlp.train(ds, arch, self.cfg())
        assert len(curve_a) == 4
        assert curve_a == curve_b

    def test_different_seeds_differ(self):
        ds = self.small_ds()
        arch = tiny_arch()
        _, a = mlp.train(ds, arch, self.cfg(seed=1))
        _, b = mlp.train(ds, arch, self.cfg(seed=2))
        assert a != b

    def test_batch_size_exceeds_train_rows(self):
        ds = self.small_ds(n=40)
        with pytest.raises(ConfigError):
            mlp.train(ds, tiny_arch(), self.cfg(batch_size=64))

    def test_learns_easy_data(self):
        ds = self.small_ds(n=400)
        model, curve = mlp.train(ds, tiny_arch(hidden_size=8), self.cfg(epochs=30))
        predictor = mlp.MlpPredictor(model)
        acc = float(np.mean(predictor.predict(ds.features) == ds.labels))
        assert acc > 0.9
        assert curve[-1][0] < curve[0][0]

    def test_descent_on_wide_synthetic(self):
        # 2000-feature easy instance; loss after 15 epochs must beat epoch 1
        ds = generate_synthetic(5000, 2000, separation=4.0, seed=31)
        cfg = mlp.MlpTrainConfig(learning_rate=1e-3, epochs=15, batch_size=128, seed=7)
        model, curve = mlp.train(ds, mlp.MlpArchitecture(), cfg)
        assert len(curve) == 15
        assert curve[-1][0] < curve[0][0]

    def test_predictor_interface(self):
        ds = self.small_ds(n=200)
        trainer = mlp.make_trainer(tiny_arch(hidden_size=4), self.cfg(epochs=3))
        predictor = trainer(ds)
        preds = predictor.predict(ds.features)
        scores = predictor.score(ds.features)
        assert set(np.unique(preds)) <= {0, 1}
        assert np.all((scores >= 0) & (scores <= 1))

    def test_wrong_width_dataset(self):
        ds = self.small_ds(f=5)
        with pytest.raises(DataFormatError):
            mlp.train(ds, tiny_arch(input_size=6), self.cfg())

    def test_save_learning_curve(self, tmp_path):
        path = tmp_path / "curve.csv"
        mlp.save_learning_curve(path, [(0.5, 0.6), (0.4, 0.55)])
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,train_loss,val_loss"
        assert lines[1] == "1,0.5,0.6"
        assert lines[2] == "2,0.4,0.55"
