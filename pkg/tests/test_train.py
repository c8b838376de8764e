"""Loss, gradients, the Adam update, and the checkpointed training loop."""

import math

import numpy as np
import pytest

from emomon import train as tr
from emomon.classify import LinearModel, load_checkpoint, scores_matrix
from emomon.errors import (
    ClassWithoutPositives,
    DimensionMismatch,
    EmptyDataset,
    EmptyEvaluation,
    LengthMismatch,
    MissingEmbedding,
)
from emomon.labeling import DatasetExample
from oracles import wbce_naive
from synthgen import make_separable


class TestTrainConfig:
    def test_defaults(self):
        cfg = tr.TrainConfig()
        assert cfg.learning_rate == 3e-5
        assert cfg.epochs == 4
        assert cfg.batch_size == 32
        assert (cfg.beta1, cfg.beta2, cfg.eps) == (0.9, 0.999, 1e-8)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"learning_rate": 0.0},
            {"learning_rate": -1e-4},
            {"epochs": 0},
            {"batch_size": 0},
            {"prob_clamp": 0.0},
            {"prob_clamp": 0.5},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            tr.TrainConfig(**kwargs)


class TestClassWeights:
    def test_balanced_class_weighs_one(self):
        w = tr.class_weights([50] * 6, 100)
        assert np.array_equal(w, np.ones(6))

    def test_rare_class_weighs_more(self):
        w = tr.class_weights([10, 50, 50, 50, 50, 50], 100)
        assert w[0] == 9.0
        assert list(w[1:]) == [1.0] * 5

    def test_missing_class(self):
        with pytest.raises(ClassWithoutPositives):
            tr.class_weights([5, 0, 5, 5, 5, 5], 10)

    def test_wrong_arity(self):
        with pytest.raises(ValueError):
            tr.class_weights([5, 5], 10)

    def test_n_must_be_positive(self):
        with pytest.raises(ValueError):
            tr.class_weights([1] * 6, 0)


class TestWbceLoss:
    def test_coin_flip_term(self):
        # y=1, p=0.5, w=1 contributes exactly ln 2
        assert tr.wbce_loss([[0.5]], [[1]], [1.0]) == pytest.approx(math.log(2), abs=1e-12)

    def test_weighted_term(self):
        got = tr.wbce_loss([[0.8]], [[1]], [3.0])
        assert got == pytest.approx(3 * -math.log(0.8), abs=1e-12)
        assert round(got, 6) == 0.669431

    def test_perfect_predictions_vanish(self):
        loss = tr.wbce_loss([[1.0, 0.0]], [[1, 0]], [1.0, 1.0], clamp=1e-7)
        assert 0.0 <= loss < 1e-6

    def test_mean_convention(self):
        # two cells, only one active: the ln 2 term is averaged over both
        got = tr.wbce_loss([[0.5, 1.0]], [[1, 1]], [1.0, 1.0])
        assert got == pytest.approx(math.log(2) / 2, abs=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(LengthMismatch):
            tr.wbce_loss([[0.5]], [[1, 0]], [1.0])
        with pytest.raises(LengthMismatch):
            tr.wbce_loss([[0.5, 0.5]], [[1, 0]], [1.0])
        with pytest.raises(LengthMismatch):
            tr.wbce_loss(np.empty((0, 6)), np.empty((0, 6)), [1.0] * 6)

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            n, c = rng.integers(1, 8), rng.integers(1, 8)
            scores = rng.uniform(size=(n, c))
            labels = rng.integers(0, 2, size=(n, c))
            weights = rng.uniform(0.5, 5.0, size=c)
            got = tr.wbce_loss(scores, labels, weights)
            want = wbce_naive(scores.tolist(), labels.tolist(), weights.tolist())
            assert got == pytest.approx(want, rel=1e-12)

    def test_unit_weights_equal_plain_bce(self):
        rng = np.random.default_rng(9)
        scores = rng.uniform(0.01, 0.99, size=(5, 6))
        labels = rng.integers(0, 2, size=(5, 6))
        got = tr.wbce_loss(scores, labels, np.ones(6))
        plain = -np.mean(labels * np.log(scores) + (1 - labels) * np.log(1 - scores))
        assert got == pytest.approx(float(plain), rel=1e-12)

    def test_non_negative(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            scores = rng.uniform(size=(3, 6))
            labels = rng.integers(0, 2, size=(3, 6))
            assert tr.wbce_loss(scores, labels, rng.uniform(0.1, 9, size=6)) >= 0.0


def numeric_gradient(model, vectors, labels, weights, clamp=1e-7, step=1e-5):
    """Central finite differences of the loss over every W and b entry."""

    def loss_at(w_mat, b_vec):
        m = LinearModel(weights=w_mat, bias=b_vec)
        return tr.wbce_loss(scores_matrix(m, vectors), labels, weights, clamp)

    g_w = np.zeros_like(model.weights)
    for c in range(6):
        for d in range(model.dim):
            up, down = model.weights.copy(), model.weights.copy()
            up[c, d] += step
            down[c, d] -= step
            g_w[c, d] = (loss_at(up, model.bias) - loss_at(down, model.bias)) / (2 * step)
    g_b = np.zeros_like(model.bias)
    for c in range(6):
        up, down = model.bias.copy(), model.bias.copy()
        up[c] += step
        down[c] -= step
        g_b[c] = (loss_at(model.weights, up) - loss_at(model.weights, down)) / (2 * step)
    return g_w, g_b


class TestWbceGradient:
    def test_bias_anchor_at_zero_model(self):
        # p=0.5 everywhere, y all-true, w=1: d/db_c = (0.5 - 1)/6
        model = LinearModel.zeros(3)
        v = np.array([[0.2, -0.4, 1.0]])
        y = np.ones((1, 6))
        g_w, g_b = tr.wbce_gradient(model, v, y, np.ones(6))
        assert np.allclose(g_b, -1.0 / 12.0, atol=1e-15)
        assert np.allclose(g_w, np.outer(np.full(6, -1 / 12), v[0]), atol=1e-15)

    def test_zero_vector_kills_weight_gradient(self):
        model = LinearModel.zeros(4)
        g_w, g_b = tr.wbce_gradient(model, np.zeros((2, 4)), np.zeros((2, 6)), np.ones(6))
        assert np.array_equal(g_w, np.zeros((6, 4)))
        assert np.allclose(g_b, 1.0 / 12.0)

    def test_clamped_cells_are_inert(self):
        # bias 60 saturates class 0 to p = 1.0, outside the clamp window
        bias = np.zeros(6)
        bias[0] = 60.0
        model = LinearModel(weights=np.zeros((6, 2)), bias=bias)
        y = np.zeros((1, 6))
        y[0, 0] = 1.0
        g_w, g_b = tr.wbce_gradient(model, np.ones((1, 2)), y, np.ones(6))
        assert g_b[0] == 0.0
        assert np.array_equal(g_w[0], np.zeros(2))

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            dim, n = int(rng.integers(1, 6)), int(rng.integers(1, 5))
            model = LinearModel(
                weights=rng.normal(scale=0.5, size=(6, dim)),
                bias=rng.normal(scale=0.5, size=6),
            )
            vectors = rng.normal(size=(n, dim))
            labels = rng.integers(0, 2, size=(n, 6)).astype(float)
            weights = rng.uniform(0.5, 4.0, size=6)
            g_w, g_b = tr.wbce_gradient(model, vectors, labels, weights)
            n_w, n_b = numeric_gradient(model, vectors, labels, weights)
            assert np.allclose(g_w, n_w, rtol=1e-4, atol=1e-8)
            assert np.allclose(g_b, n_b, rtol=1e-4, atol=1e-8)

    def test_dimension_errors(self):
        model = LinearModel.zeros(3)
        with pytest.raises(DimensionMismatch):
            tr.wbce_gradient(model, np.zeros((2, 4)), np.zeros((2, 6)), np.ones(6))
        with pytest.raises(DimensionMismatch):
            tr.wbce_gradient(model, np.zeros((2, 3)), np.zeros((2, 5)), np.ones(6))
        with pytest.raises(DimensionMismatch):
            tr.wbce_gradient(model, np.zeros((0, 3)), np.zeros((0, 6)), np.ones(6))


class TestAdamStep:
    def test_zero_gradient_is_identity(self):
        cfg = tr.TrainConfig()
        model = LinearModel(weights=np.full((6, 2), 0.3), bias=np.full(6, -0.1))
        state = tr.AdamState.fresh(2)
        new_state, new_model = tr.adam_step(state, (np.zeros((6, 2)), np.zeros(6)), cfg, model)
        assert new_state.t == 1
        assert np.array_equal(new_model.weights, model.weights)
        assert np.array_equal(new_model.bias, model.bias)

    def test_first_step_size(self):
        # fresh state, g = 0.5: m-hat = 0.5, v-hat = 0.25, step = lr * 0.5/(0.5 + eps)
        cfg = tr.TrainConfig(learning_rate=3e-5)
        model = LinearModel.zeros(2)
        state = tr.AdamState.fresh(2)
        grad = (np.full((6, 2), 0.5), np.full(6, 0.5))
        _, new_model = tr.adam_step(state, grad, cfg, model)
        assert np.allclose(new_model.weights, -3e-5, rtol=1e-6)
        assert np.allclose(new_model.bias, -3e-5, rtol=1e-6)

    def test_negative_gradient_moves_up(self):
        cfg = tr.TrainConfig(learning_rate=1e-3)
        model = LinearModel.zeros(1)
        _, new_model = tr.adam_step(
            tr.AdamState.fresh(1), (np.full((6, 1), -1.0), np.full(6, -1.0)), cfg, model
        )
        assert (new_model.weights > 0).all()
        assert (new_model.bias > 0).all()

    def test_inputs_left_untouched(self):
        cfg = tr.TrainConfig()
        model = LinearModel.zeros(2)
        state = tr.AdamState.fresh(2)
        tr.adam_step(state, (np.ones((6, 2)), np.ones(6)), cfg, model)
        assert state.t == 0
        assert np.array_equal(state.m_w, np.zeros((6, 2)))
        assert np.array_equal(model.weights, np.zeros((6, 2)))

    def test_deterministic(self):
        cfg = tr.TrainConfig()
        grad = (np.full((6, 3), 0.2), np.full(6, -0.7))

        def run():
            model = LinearModel.zeros(3)
            state = tr.AdamState.fresh(3)
            for _ in range(3):
                state, model = tr.adam_step(state, grad, cfg, model)
            return model

        a, b = run(), run()
        assert a.weights.tobytes() == b.weights.tobytes()
        assert a.bias.tobytes() == b.bias.tobytes()

    def test_t_counts_steps(self):
        cfg = tr.TrainConfig()
        model = LinearModel.zeros(1)
        state = tr.AdamState.fresh(1)
        for want in (1, 2, 3):
            state, model = tr.adam_step(state, (np.ones((6, 1)), np.ones(6)), cfg, model)
            assert state.t == want


def tiny_problem(n=40, dim=4, seed=11):
    examples, emb = make_separable(n=n, dim=dim, seed=seed)
    eval_gold = [(ex.tweet_id, ex.labels) for ex in examples]
    return examples, emb, eval_gold


CFG = dict(learning_rate=1e-2, epochs=4, batch_size=8, seed=0)


class TestTrainLoop:
    def test_checkpoints_and_log(self, tmp_path):
        examples, emb, eval_gold = tiny_problem()
        res = tr.train(examples, emb, eval_gold, tr.TrainConfig(**CFG), tmp_path)
        assert [p.name for p in res.checkpoints] == [
            f"checkpoint_epoch{k}.json" for k in (1, 2, 3, 4)
        ]
        for k, path in enumerate(res.checkpoints, start=1):
            model, epoch = load_checkpoint(path)
            assert epoch == k
            assert model.dim == 4
        log = (tmp_path / "training_log.csv").read_text().splitlines()
        assert log[0] == ",".join(tr.LOG_HEADER)
        assert len(log) == 5
        assert [row["epoch"] for row in res.log_rows] == [1, 2, 3, 4]

    def test_loss_decreases_on_separable_set(self, tmp_path):
        examples, emb, eval_gold = tiny_problem()
        res = tr.train(examples, emb, eval_gold, tr.TrainConfig(**CFG), tmp_path)
        assert res.log_rows[-1]["train_loss"] < res.log_rows[0]["train_loss"]

    def test_best_has_highest_map(self, tmp_path):
        examples, emb, eval_gold = tiny_problem()
        res = tr.train(examples, emb, eval_gold, tr.TrainConfig(**CFG), tmp_path)
        assert res.best_map == max(row["eval_map"] for row in res.log_rows)
        assert res.best_path in res.checkpoints
        import json

        best = json.loads((tmp_path / "best.json").read_text())
        assert best["best_epoch"] == res.best_epoch
        assert best["checkpoint"] == res.best_path.name
        assert best["eval_map"] == res.best_map

    def test_map_tie_prefers_earliest_epoch(self, tmp_path, monkeypatch):
        examples, emb, eval_gold = tiny_problem()
        monkeypatch.setattr(tr.metrics, "mean_average_precision", lambda pairs: 0.5)
        res = tr.train(examples, emb, eval_gold, tr.TrainConfig(**CFG), tmp_path)
        assert res.best_epoch == 1

    def test_rerun_is_byte_identical(self, tmp_path):
        examples, emb, eval_gold = tiny_problem()
        cfg = tr.TrainConfig(**CFG)
        tr.train(examples, emb, eval_gold, cfg, tmp_path / "a")
        tr.train(examples, emb, eval_gold, cfg, tmp_path / "b")
        for name in [f"checkpoint_epoch{k}.json" for k in (1, 2, 3, 4)] + ["training_log.csv"]:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_dataset_order_does_not_matter(self, tmp_path):
        examples, emb, eval_gold = tiny_problem()
        cfg = tr.TrainConfig(**CFG)
        tr.train(examples, emb, eval_gold, cfg, tmp_path / "fwd")
        tr.train(list(reversed(examples)), emb, eval_gold, cfg, tmp_path / "rev")
        for k in (1, 2, 3, 4):
            name = f"checkpoint_epoch{k}.json"
            assert (tmp_path / "fwd" / name).read_bytes() == (tmp_path / "rev" / name).read_bytes()

    def test_empty_dataset(self, tmp_path):
        _, emb, eval_gold = tiny_problem()
        with pytest.raises(EmptyDataset):
            tr.train([], emb, eval_gold, tr.TrainConfig(**CFG), tmp_path)

    def test_empty_evaluation(self, tmp_path):
        examples, emb, _ = tiny_problem()
        with pytest.raises(EmptyEvaluation):
            tr.train(examples, emb, [], tr.TrainConfig(**CFG), tmp_path)

    def test_missing_embedding(self, tmp_path):
        examples, emb, eval_gold = tiny_problem()
        del emb[examples[0].tweet_id]
        with pytest.raises(MissingEmbedding):
            tr.train(examples, emb, eval_gold, tr.TrainConfig(**CFG), tmp_path)

    def test_class_without_positives(self, tmp_path):
        examples, emb, eval_gold = tiny_problem()
        flattened = [
            DatasetExample(tweet_id=ex.tweet_id, words=ex.words, labels=(False,) * 6)
            for ex in examples
        ]
        with pytest.raises(ClassWithoutPositives):
            tr.train(flattened, emb, eval_gold, tr.TrainConfig(**CFG), tmp_path)
