import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deskbench import gbt
from deskbench.errors import ConfigError, DataFormatError

from oracles import brute_force_best_split


def loose(**overrides):
    base = dict(max_depth=3, eta=0.3, num_round=10, min_child_weight=0.0,
                lambda_=0.0, gamma=0.0)
    base.update(overrides)
    return gbt.GbtConfig(**base)


class TestConfig:
    def test_defaults(self):
        cfg = gbt.GbtConfig()
        assert (cfg.max_depth, cfg.eta, cfg.num_round) == (10, 0.05, 300)
        assert (cfg.min_child_weight, cfg.lambda_, cfg.gamma) == (5.0, 1.5, 0.1)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"max_depth": 0},
            {"eta": 0.0},
            {"eta": 1.5},
            {"num_round": 0},
            {"min_child_weight": -1.0},
            {"lambda_": -0.1},
            {"gamma": -0.1},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ConfigError):
            gbt.GbtConfig(**kwargs)


class TestFit:
    def test_constant_targets_zero_trees(self):
        X = np.random.default_rng(0).normal(size=(20, 3))
        y = np.full(20, 4.25)
        model = gbt.fit(X, y, loose(num_round=5))
        assert model.base_score == 4.25
        assert len(model.trees) == 5
        for tree in model.trees:
            assert set(tree) == {"w"}
            assert tree["w"] == 0.0

    def test_hand_solvable_stump(self):
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        y = np.array([0.0, 0.0, 1.0, 1.0])
        cfg = gbt.GbtConfig(max_depth=1, eta=1.0, num_round=1,
                            min_child_weight=0.0, lambda_=0.0, gamma=0.0)
        model = gbt.fit(X, y, cfg)
        tree = model.trees[0]
        assert tree["f"] == 0 and tree["t"] == 0.5
        assert tree["l"]["w"] == -0.5 and tree["r"]["w"] == 0.5
        preds = gbt.predict(model, X)
        assert np.array_equal(preds, y)

    def test_first_root_split_matches_brute_force(self):
        rng = np.random.default_rng(99)
        X = rng.normal(size=(200, 3))
        y = X[:, 0] * 2.0 + np.sin(X[:, 1]) + rng.normal(size=200) * 0.3
        cfg = loose(max_depth=2, num_round=1, lambda_=1.5, gamma=0.1,
                    min_child_weight=5.0)
        model = gbt.fit(X, y, cfg)
        g = np.full(200, y.mean()) - y
        oracle = brute_force_best_split(X, g, lambda_=1.5, gamma=0.1,
                                        min_child_weight=5.0)
        root = model.trees[0]
        assert root["f"] == oracle[1]
        assert root["t"] == pytest.approx(oracle[2], abs=0.0)

    def test_rmse_non_increasing_across_rounds(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(500, 4))
        y = X @ np.array([1.0, -2.0, 0.5, 0.0]) + rng.normal(size=500) * 0.5
        cfg = gbt.GbtConfig(max_depth=3, eta=0.3, num_round=40,
                            min_child_weight=1.0, lambda_=1.0, gamma=0.0)
        model = gbt.fit(X, y, cfg)
        preds = np.full(500, model.base_score)
        rows = np.arange(500)
        last = float(np.sqrt(np.mean((preds - y) ** 2)))
        for tree in model.trees:
            out = np.zeros(500)
            gbt._apply_tree(tree, X, rows, out)
            preds += out
            rmse = float(np.sqrt(np.mean((preds - y) ** 2)))
            assert rmse <= last + 1e-12
            last = rmse

    def test_split_invariants_walk(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(300, 5))
        y = X[:, 0] + 0.5 * X[:, 1] ** 2 + rng.normal(size=300) * 0.2
        cfg = gbt.GbtConfig(max_depth=4, eta=0.2, num_round=15,
                            min_child_weight=7.0, lambda_=1.5, gamma=0.05)
        model = gbt.fit(X, y, cfg)

        def check(node, rows):
            if "w" in node:
                return
            mask = X[rows, node["f"]] <= node["t"]
            left, right = rows[mask], rows[~mask]
            assert left.size >= cfg.min_child_weight
            assert right.size >= cfg.min_child_weight
            check(node["l"], left)
            check(node["r"], right)

        rows = np.arange(300)
        for tree in model.trees:
            check(tree, rows)
            for _, depth in gbt.walk_leaves(tree):
                assert depth <= cfg.max_depth

    def test_huge_gamma_degenerates_to_base(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(100, 3))
        y = rng.normal(size=100)
        model = gbt.fit(X, y, loose(gamma=1e9, num_round=10))
        preds = gbt.predict(model, X)
        assert np.allclose(preds, model.base_score, atol=1e-9)

    def test_tiny_eta_stays_near_base(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(100, 3))
        y = rng.normal(size=100) * 10
        model = gbt.fit(X, y, loose(eta=1e-9, num_round=10))
        preds = gbt.predict(model, X)
        assert np.max(np.abs(preds - model.base_score)) < 1e-6

    def test_depth_one_beats_nothing_on_step_function(self):
        X = np.linspace(0, 1, 50).reshape(-1, 1)
        y = (X[:, 0] > 0.5).astype(float) * 3.0
        model = gbt.fit(X, y, loose(max_depth=1, num_round=30))
        rmse = float(np.sqrt(np.mean((gbt.predict(model, X) - y) ** 2)))
        assert rmse < 0.1

    def test_rejects_bad_inputs(self):
        cfg = loose()
        with pytest.raises(DataFormatError):
            gbt.fit(np.ones((1, 2)), np.ones(1), cfg)
        with pytest.raises(DataFormatError):
            gbt.fit(np.array([[np.nan, 1.0], [0.0, 1.0]]), np.ones(2), cfg)
        with pytest.raises(DataFormatError):
            gbt.fit(np.ones((3, 2)), np.array([1.0, np.nan, 2.0]), cfg)
        with pytest.raises(DataFormatError):
            gbt.fit(np.ones((3, 2)), np.ones(4), cfg)


class TestPredict:
    def test_empty_trees_gives_base(self):
        model = gbt.GbtModel(base_score=2.5, trees=[], num_features=3)
        preds = gbt.predict(model, np.zeros((4, 3)))
        assert np.array_equal(preds, np.full(4, 2.5))

    def test_threshold_tie_goes_left(self):
        tree = {"f": 0, "t": 1.0, "l": {"w": -1.0}, "r": {"w": 1.0}}
        model = gbt.GbtModel(base_score=0.0, trees=[tree], num_features=1)
        preds = gbt.predict(model, np.array([[1.0], [1.0000001], [0.5]]))
        assert np.array_equal(preds, [-1.0, 1.0, -1.0])

    def test_training_predictions_bit_identical_to_fit(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(150, 4))
        y = X[:, 0] - X[:, 2] + rng.normal(size=150) * 0.1
        cfg = loose(num_round=25, min_child_weight=3.0, lambda_=1.0)
        model = gbt.fit(X, y, cfg)
        # replay fit-time prediction updates
        preds = np.full(150, model.base_score)
        rows = np.arange(150)
        for tree in model.trees:
            out = np.zeros(150)
            gbt._apply_tree(tree, X, rows, out)
            preds += out
        assert np.array_equal(gbt.predict(model, X), preds)

    def test_width_mismatch(self):
        model = gbt.GbtModel(base_score=0.0, trees=[], num_features=2)
        with pytest.raises(DataFormatError):
            gbt.predict(model, np.zeros((3, 3)))

    def test_nan_rejected(self):
        model = gbt.GbtModel(base_score=0.0, trees=[], num_features=1)
        with pytest.raises(DataFormatError):
            gbt.predict(model, np.array([[np.nan]]))

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=15, deadline=None)
    def test_fit_deterministic(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(40, 2))
        y = rng.normal(size=40)
        cfg = loose(num_round=3)
        a = gbt.fit(X, y, cfg)
        b = gbt.fit(X, y, cfg)
        assert a.trees == b.trees and a.base_score == b.base_score


class TestTrainerAdapter:
    def test_predictor_matches_module_predict(self):
        from deskbench.dataio import DenseDataset

        rng = np.random.default_rng(6)
        X = rng.normal(size=(80, 3))
        y = X[:, 0] * 2.0 + rng.normal(size=80) * 0.1
        cfg = loose(num_round=5)
        ds = DenseDataset(y, X)
        predictor = gbt.make_trainer(cfg)(ds)
        direct = gbt.predict(gbt.fit(X, y, cfg), X)
        assert np.array_equal(predictor.predict(X), direct)
