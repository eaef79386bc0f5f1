import itertools
import json
import math
from fractions import Fraction
from math import lcm

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biaslens import (
    Dataset,
    DistributionError,
    JointDistribution,
    LinearModel,
    Schema,
    ScoreTable,
    TrainConfig,
    TrainingDivergence,
    dpd_empirical,
    evaluate,
    fit_plugin_bayes,
    fixture,
    from_dataset,
    generate_fair_sp_network,
    predict,
    reweighing_weights,
    sample_dataset,
    train_logistic,
)
from biaslens.models import LogisticObjective, encode

from corpus import random_joint

F, M = 0, 1
BSC, MSC, PHD = 0, 1, 2


def random_dataset(rs, n=400):
    """Small sample from a random full-support world on a random schema."""
    schema = Schema(tuple(int(c) for c in rs.integers(2, 4, size=rs.integers(1, 3))), 2)
    J = random_joint(rs, schema)
    return sample_dataset(J, n, seed=int(rs.integers(2**31)))


def numeric_grad(obj, theta, h=1e-6):
    g = np.zeros_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (obj.value(theta + e) - obj.value(theta - e)) / (2 * h)
    return g


class TestScoreTable:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            ScoreTable([[0.2, 1.1]])
        with pytest.raises(ValueError):
            ScoreTable([0.2, 0.3])

    def test_lookup(self):
        T = ScoreTable([[0.1, 0.2], [0.3, 0.4]])
        assert T([1, 0], [0, 1]).tolist() == [0.2, 0.3]


class TestPluginBayes:
    def test_uniform(self):
        J = JointDistribution(Schema((3,)), np.full((2, 2, 3), 1 / 12))
        assert np.all(fit_plugin_bayes(J).scores == 0.5)

    def test_fixture_a(self):
        assert fit_plugin_bayes(fixture("D_a")).scores[M, PHD] == 1.0

    def test_fixture_b(self):
        assert fit_plugin_bayes(fixture("D_b")).scores[F, MSC] == pytest.approx(1 / 3, abs=1e-15)

    def test_off_support_half(self):
        D = Dataset(Schema((2,)), [1, 0], [0, 0], [0, 0])
        T = fit_plugin_bayes(D)
        assert T.scores[0, 0] == 0.5
        assert np.all(T.scores[1] == 0.5)
        assert T.scores[0, 1] == 0.5

    def test_optimal_by_exhaustion(self):
        rs = np.random.default_rng(0)
        for layout in [(2,), (3,), (6,), (2, 3)]:
            J = random_joint(rs, Schema(layout, 2))
            mass = J.mass
            G, C = J.schema.groups, J.schema.n_cells
            best = max(
                sum(mass[lab, a, c] for (a, c), lab in zip(itertools.product(range(G), range(C)), labels))
                for labels in itertools.product((0, 1), repeat=G * C)
            )
            assert evaluate(fit_plugin_bayes(J), J).accuracy == pytest.approx(best, abs=1e-12)


class TestPredict:
    def test_threshold_half(self):
        T = predict(ScoreTable([[0.6, 0.4], [0.6, 0.4]]), [0.5, 0.5])
        assert T.scores.tolist() == [[1.0, 0.0], [1.0, 0.0]]

    def test_zero_thresholds(self):
        T = predict(ScoreTable([[0.0, 0.4], [0.2, 0.0]]), [0.0, 0.0])
        assert np.all(T.scores == 1)

    def test_tie_at_one(self):
        assert predict(ScoreTable([[1.0], [0.99]]), [1.0, 1.0]).scores.tolist() == [[1.0], [0.0]]

    def test_per_group(self):
        T = predict(ScoreTable([[0.4], [0.4]]), [0.3, 0.5])
        assert T.scores.tolist() == [[1.0], [0.0]]

    def test_bad_thresholds(self):
        T = ScoreTable([[0.4], [0.4]])
        with pytest.raises(ValueError):
            predict(T, [0.5])
        with pytest.raises(ValueError):
            predict(T, [0.5, 1.5])

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 1))
    def test_threshold_monotone(self, seed, s, t):
        rs = np.random.default_rng(seed)
        J = random_joint(rs)
        T = ScoreTable(rs.uniform(size=(2, J.schema.n_cells)))
        lo, hi = min(s, t), max(s, t)
        xg = J.x_given_a()
        for a in range(2):
            thr_lo, thr_hi = [0.5, 0.5], [0.5, 0.5]
            thr_lo[a], thr_hi[a] = lo, hi
            rate_lo = (xg[a] * predict(T, thr_lo).scores[a]).sum()
            rate_hi = (xg[a] * predict(T, thr_hi).scores[a]).sum()
            assert rate_hi <= rate_lo + 1e-15


class TestEncoding:
    def test_drop_first(self):
        schema = Schema((3, 2), 2)
        X = encode(schema, np.arange(6), np.zeros(6, dtype=int), include_group=True)
        assert X.shape == (6, 3 + 1)
        assert np.all(X[0] == 0)

    def test_group_column(self):
        X = encode(Schema((2,), 3), [0, 0, 0], [0, 1, 2], include_group=True)
        assert X[:, 1:].tolist() == [[0, 0], [1, 0], [0, 1]]
        assert encode(Schema((2,), 3), [0], [2], include_group=False).shape == (1, 1)


class TestTraining:
    def test_loss_non_increasing(self):
        D = Dataset(Schema((2,)), [0, 1, 0, 1], [0, 0, 1, 1], [0, 1, 0, 1], [5, 5, 5, 5])
        m = train_logistic(D, TrainConfig(lr=0.5, epochs=300), record=True)
        h = np.array(m.history)
        assert np.all(np.diff(h) <= 1e-15)
        assert m.coefficients[0] > 0

    def test_deterministic(self):
        D = random_dataset(np.random.default_rng(1))
        cfg = TrainConfig(epochs=200, lambda_dpd=5.0)
        assert np.array_equal(train_logistic(D, cfg).theta, train_logistic(D, cfg).theta)

    def test_zero_epochs_is_zero_model(self):
        D = random_dataset(np.random.default_rng(2))
        m = train_logistic(D, TrainConfig(epochs=0))
        assert m.intercept == 0 and np.all(m.coefficients == 0)

    def test_weights_match_rescaled_multiplicities(self):
        D = fixture("D_b").compact()
        w = reweighing_weights(D, exact=True)
        scale = lcm(*(Fraction(v).denominator for v in w.ravel()))
        counts = [int(c * w[y, a] * scale) for y, a, c in zip(D.y, D.a, D.count)]
        D2 = Dataset(D.schema, D.y, D.a, D.cell, counts)
        cfg = TrainConfig(epochs=500)
        m1 = train_logistic(D, cfg, weights=w.astype(float))
        m2 = train_logistic(D2, cfg)
        np.testing.assert_allclose(m1.theta, m2.theta, atol=1e-12)

    def test_large_penalty_removes_dpd(self):
        D = fixture("D_a")
        assert dpd_empirical(train_logistic(D), D) > 0.3
        m = train_logistic(D, TrainConfig(lambda_dpd=100.0))
        assert dpd_empirical(m, D) < 0.01

    def test_penalty_needs_both_groups(self):
        D = Dataset(Schema((2,)), [0, 1], [0, 0], [0, 1])
        with pytest.raises(DistributionError):
            train_logistic(D, TrainConfig(lambda_dpd=1.0))
        train_logistic(D, TrainConfig(lambda_dpd=0.0, epochs=5))

    def test_penalty_on_other_data(self):
        D = fixture("D_a")
        U = Dataset(D.schema, [0, 0], [0, 1], [0, 0])
        m = train_logistic(D, TrainConfig(lambda_dpd=100.0), penalty_data=U)
        # only the b.sc cell is penalized, so the two groups must agree there
        assert abs(m([0], [0])[0] - m([0], [1])[0]) < 0.01

    def test_divergence_reported(self):
        D = fixture("D_a")
        with pytest.raises(TrainingDivergence) as info:
            train_logistic(D, TrainConfig(lr=math.inf, epochs=50), record=True)
        assert info.value.epoch == 0

    def test_empty_rejected(self):
        with pytest.raises(DistributionError):
            train_logistic(Dataset(Schema((2,)), [], [], []))


class TestGradient:
    @pytest.mark.parametrize("lam", [0.0, 3.0, 100.0])
    def test_matches_finite_differences(self, lam):
        rs = np.random.default_rng(int(lam))
        for _ in range(5):
            D = random_dataset(rs)
            obj = LogisticObjective(D, TrainConfig(lambda_dpd=lam), weights=rs.uniform(0.5, 2, size=(2, 2)))
            for _ in range(5):
                theta = rs.normal(size=obj.dim)
                g, num = obj.grad(theta), numeric_grad(obj, theta)
                assert np.linalg.norm(g - num) <= 1e-4 * max(np.linalg.norm(num), 1e-8)

    def test_penalty_dataset_gradient(self):
        rs = np.random.default_rng(5)
        D = random_dataset(rs)
        U = sample_dataset(random_joint(rs, D.schema), 300, seed=1)
        obj = LogisticObjective(D, TrainConfig(lambda_dpd=10.0), penalty_data=U)
        theta = rs.normal(size=obj.dim)
        num = numeric_grad(obj, theta)
        assert np.linalg.norm(obj.grad(theta) - num) <= 1e-4 * np.linalg.norm(num)


class TestModelIO:
    def test_json_roundtrip(self, tmp_path):
        m = train_logistic(fixture("D_b"), TrainConfig(epochs=50, lambda_dpd=2.0, seed=3))
        m.save(tmp_path / "m.json")
        back = LinearModel.load(tmp_path / "m.json")
        assert np.array_equal(back.theta, m.theta)
        assert back.config == m.config
        doc = json.loads((tmp_path / "m.json").read_text())
        assert set(doc) == {"schema", "intercept", "coefficients", "config"}
        assert doc["config"]["lambda_dpd"] == 2.0

    def test_table_matches_call(self):
        m = train_logistic(fixture("D_a"), TrainConfig(epochs=100))
        assert m.table()[F, MSC] == m([MSC], [F])[0]


class TestEvaluate:
    def test_perfect_scorer(self):
        D = Dataset(Schema((2,)), [0, 1, 0, 1], [0, 0, 1, 1], [0, 1, 0, 1])
        m = evaluate(ScoreTable([[0.0, 1.0], [0.0, 1.0]]), D)
        assert (m.accuracy, m.f1) == (1.0, 1.0)

    def test_plugin_on_deterministic_source(self):
        J = JointDistribution(Schema((2,)), np.array([[[0.25, 0], [0, 0.25]], [[0, 0.25], [0.25, 0]]]))
        assert evaluate(fit_plugin_bayes(J), J).accuracy == 1.0

    def test_constant_half(self):
        D = fixture("D_b")
        m = evaluate(0.5, D)
        assert m.accuracy == 0.5
        assert m.dpd == 0
        assert m.f1 == pytest.approx(2 / 3)

    def test_f1_undefined(self):
        D = Dataset(Schema((1,)), [0, 0], [0, 1], [0, 0])
        m = evaluate(0.0, D)
        assert m.f1 == 0 and m.f1_undefined
        assert m.accuracy == 1.0

    def test_randomized_in_expectation(self):
        D = fixture("D_b")
        T = ScoreTable(np.full((2, 3), 0.5), randomized=True)
        m = evaluate(T, D)
        assert m.accuracy == pytest.approx(0.5)
        assert m.f1 == pytest.approx(0.5)

    def test_dataset_matches_distribution(self):
        D = fixture("D_a")
        T = fit_plugin_bayes(D)
        a, b = evaluate(T, D), evaluate(T, from_dataset(D))
        assert a.accuracy == pytest.approx(b.accuracy, abs=1e-15)
        assert a.dpd == pytest.approx(b.dpd, abs=1e-15)

    def test_plain_floats(self):
        d = evaluate(0.5, fixture("D_a")).to_dict()
        assert all(type(v) in (float, bool) for v in d.values())

    def test_empty_rejected(self):
        with pytest.raises(DistributionError):
            evaluate(0.5, Dataset(Schema((1,)), [], [], []))


def test_metrics_ranges():
    _, J = generate_fair_sp_network(k=2, seed=0)
    D = sample_dataset(J, 2000, seed=1)
    m = evaluate(train_logistic(D, TrainConfig(epochs=100)), J)
    assert 0 <= m.accuracy <= 1 and 0 <= m.f1 <= 1 and m.dpd >= 0
    assert not math.isnan(m.dpd)
