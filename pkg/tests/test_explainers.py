import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xainudge import ContractError, Explanation, LogisticModel, augment, exact_shapley, lime_explain, rescale_max_abs
from xainudge.explainers import coalition_values


class ConstantModel:
    n_features_in_ = 4

    def predict_proba(self, X):
        return np.column_stack([np.full(len(X), 0.3), np.full(len(X), 0.7)])


@given(st.integers(1, 8), st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_linear_score_closed_form(n, seed):
    rng = np.random.default_rng(seed)
    w, x, B = rng.normal(size=n), rng.random(n), rng.random((12, n))
    phi = exact_shapley(LogisticModel(w, rng.normal()), x, B, output="decision").attributions
    np.testing.assert_allclose(phi, w * (x - B.mean(axis=0)), atol=1e-9, rtol=0)


def test_symmetry():
    B = np.random.default_rng(0).random((10, 1))
    B = np.hstack([B, B, np.random.default_rng(1).random((10, 1))])
    phi = exact_shapley(LogisticModel([1.5, 1.5, -0.3]), np.array([0.8, 0.8, 0.2]), B).attributions
    assert abs(phi[0] - phi[1]) <= 1e-9


def test_efficiency_on_forest(small_forest, census):
    _, (train, _, test) = census
    for inst in test.instances[:5]:
        v = coalition_values(small_forest, inst.features, train, cap=16)
        phi = exact_shapley(small_forest, inst.features, train, cap=16).attributions
        assert abs(phi.sum() - (v[-1] - v[0])) <= 1e-9


def test_dummy_feature():
    B = np.random.default_rng(3).random((10, 3))
    phi = exact_shapley(LogisticModel([1.0, 0.0, -2.0]), np.array([0.9, 0.1, 0.4]), B).attributions
    assert abs(phi[1]) <= 1e-9


def test_additivity():
    rng = np.random.default_rng(5)
    w1, w2 = rng.normal(size=4), rng.normal(size=4)
    x, B = rng.random(4), rng.random((8, 4))
    f = lambda w: exact_shapley(LogisticModel(w), x, B, output="decision").attributions  # noqa: E731
    np.testing.assert_allclose(f(w1 + w2), f(w1) + f(w2), atol=1e-12)


def test_refuses_wide_inputs():
    with pytest.raises(ContractError, match="lime_explain"):
        exact_shapley(LogisticModel(np.ones(16)), np.zeros(16), np.zeros((2, 16)))


def test_lime_agrees_with_shapley_on_logistic():
    rng = np.random.default_rng(2)
    for _ in range(5):
        n = int(rng.integers(3, 9))
        model = LogisticModel(rng.normal(size=n) * 2)
        x, B = rng.random(n), rng.random((40, n))
        lime, r2 = lime_explain(model, x, B, num_samples=4000, seed=1, return_score=True)
        phi = exact_shapley(model, x, B).attributions
        assert np.corrcoef(lime.attributions, phi)[0, 1] >= 0.95
        assert r2 >= 0.8


def test_lime_constant_model_zero():
    e = lime_explain(ConstantModel(), np.full(4, 0.5), np.random.default_rng(0).random((5, 4)), 200, seed=3)
    np.testing.assert_allclose(e.attributions, 0.0, atol=1e-6)


def test_lime_deterministic():
    model = LogisticModel([1.0, -2.0, 0.5])
    B = np.random.default_rng(0).random((5, 3))
    a = lime_explain(model, np.array([0.2, 0.4, 0.9]), B, 100, seed=8).attributions
    b = lime_explain(model, np.array([0.2, 0.4, 0.9]), B, 100, seed=8).attributions
    assert a.tobytes() == b.tobytes()


def test_lime_sample_floor():
    with pytest.raises(ContractError):
        lime_explain(LogisticModel([1.0, 1.0]), np.zeros(2), np.zeros((2, 2)), num_samples=19)


def test_augment_identity_and_mask():
    e = Explanation(np.array([0.2, -0.4, 0.1]), "shapley")
    np.testing.assert_array_equal(augment(e, 0.0, 0.0).attributions, e.attributions)
    np.testing.assert_array_equal(augment(e, 1.0, 0.0).attributions, 0.0)
    assert augment(e).kind == "augmented"


def test_augment_amplifies_chosen_index():
    outs = {tuple(augment(np.array([0.2, -0.4]), 0.0, 0.5, 2.0, seed=s).attributions) for s in range(20)}
    assert outs == {(0.4, -0.4), (0.2, -0.8)}


def test_augment_fractions_checked():
    with pytest.raises(ContractError):
        augment(np.ones(4), 0.7, 0.5)


def test_rescale():
    np.testing.assert_array_equal(rescale_max_abs([0.5, -2.0]), [0.25, -1.0])
    np.testing.assert_array_equal(rescale_max_abs([0.0, 0.0]), [0.0, 0.0])
