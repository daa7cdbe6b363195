import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xcsge.errors import (
    ConfigError,
    DimensionMismatch,
    EmptyDataset,
    InsufficientSamples,
    LeadtimeOutOfRange,
    ShapeMismatch,
)
from xcsge.weighting import (
    LOG_LOSS,
    SQUARED_ERROR,
    LocalModelSpec,
    ScoreFunction,
    fit_local_error_models,
    get_score,
    global_error_scores,
    global_weights,
    leadtime_error_scores,
    local_error_estimates,
    local_weights,
    per_sample_errors,
    register_score,
    time_weight_tensor,
    time_weights,
)


def test_squared_error_of_truth_is_zero():
    y = np.array([0.3, -1.0])
    np.testing.assert_array_equal(SQUARED_ERROR.evaluate(y, y), 0.0)


def test_log_loss_per_dimension():
    e = LOG_LOSS.evaluate(np.array([0.5, 0.5]), np.array([1.0, 0.0]))
    np.testing.assert_allclose(e, [np.log(2), 0.0])
    assert np.all(LOG_LOSS.evaluate(np.array([0.0, 1.0]), np.array([1.0, 0.0])) >= 0)


def test_score_registry():
    assert get_score("squared") is SQUARED_ERROR
    with pytest.raises(ConfigError):
        get_score("nope")
    register_score(ScoreFunction("abs", lambda p, y: np.abs(p - y)))
    assert get_score("abs").name == "abs"
    with pytest.raises(ConfigError):
        register_score(ScoreFunction("acc", lambda p, y: p == y, lower_is_better=False))


def test_per_sample_errors_hand():
    P = np.array([0.0, 1.0]).reshape(1, 1, 2, 1)
    np.testing.assert_allclose(per_sample_errors(P, [[1.0]]), [[[1.0]]])


def test_per_sample_errors_perfect_is_zero():
    Y = np.random.default_rng(0).normal(size=(5, 2))
    P = np.repeat(Y[:, None, None, :], 3, axis=2).repeat(2, axis=1)
    np.testing.assert_array_equal(per_sample_errors(P, Y), 0.0)


def test_per_sample_errors_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        per_sample_errors(np.zeros((3, 1, 1, 1)), np.zeros((2, 1)))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 3), st.integers(1, 3), st.integers(1, 2), st.integers(0, 10**6))
def test_per_sample_errors_brute_force(N, J, T, M, seed):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(N, J, T, M))
    Y = rng.normal(size=(N, M))
    e = per_sample_errors(P, Y)
    for n in range(N):
        for j in range(J):
            for m in range(M):
                ref = sum((P[n, j, t, m] - Y[n, m]) ** 2 for t in range(T))
                assert abs(e[n, j, m] - ref) <= 1e-12 * max(1.0, ref)


def test_global_error_scores():
    np.testing.assert_allclose(global_error_scores(np.array([[[1.0]], [[3.0]]])), [[2.0]])
    with pytest.raises(EmptyDataset):
        global_error_scores(np.zeros((0, 2, 1)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_global_error_scores_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    E = rng.random((7, 3, 2))
    np.testing.assert_allclose(global_error_scores(E[rng.permutation(7)]), global_error_scores(E), atol=1e-15)


def test_global_weights_examples():
    np.testing.assert_allclose(global_weights([[1.0], [2.0]], 1, 1e-12), [[2 / 3], [1 / 3]], atol=1e-12)
    np.testing.assert_allclose(global_weights([[1.0], [5.0]], 0), [[0.5], [0.5]])
    np.testing.assert_array_equal(global_weights([[3.0]], 2), [[1.0]])


def test_knn1_interpolates_training_points():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(20, 3))
    E = rng.random((20, 2, 1))
    models = fit_local_error_models(X, E, LocalModelSpec(k=1))
    np.testing.assert_array_equal(local_error_estimates(models, X), E)


def test_knn2_equidistant_mean():
    X = np.array([[0.0], [2.0]])
    E = np.array([[[0.2]], [[0.4]]])
    models = fit_local_error_models(X, E, LocalModelSpec(k=2))
    np.testing.assert_allclose(local_error_estimates(models, [[1.0]]), [[[0.3]]])


def test_insufficient_samples():
    with pytest.raises(InsufficientSamples):
        fit_local_error_models(np.zeros((3, 1)), np.zeros((3, 1, 1)), LocalModelSpec(k=4))


def test_custom_constant_zero_is_uniform():
    class Zero:
        def predict(self, X):
            return np.zeros((len(X), 1))

    spec = LocalModelSpec(kind="custom", factory=lambda X, e: Zero())
    models = fit_local_error_models(np.zeros((5, 2)), np.random.default_rng(0).random((5, 3, 1)), spec)
    np.testing.assert_allclose(local_weights(np.zeros(2), models, 4.0), 1 / 3)


def test_negative_estimate_clamped_to_max_weight():
    class Const:
        def __init__(self, v):
            self.v = v

        def predict(self, X):
            return np.full((len(X), 1), self.v)

    vals = iter([-0.1, 0.5, 1.0])
    spec = LocalModelSpec(kind="custom", factory=lambda X, e: Const(next(vals)))
    models = fit_local_error_models(np.zeros((3, 1)), np.zeros((3, 3, 1)), spec)
    np.testing.assert_array_equal(local_error_estimates(models, [[0.0]])[0, :, 0], [0.0, 0.5, 1.0])
    w = local_weights(np.zeros(1), models, 1.0)
    assert np.argmax(w[:, 0]) == 0


def test_local_weights_examples():
    class Const:
        def __init__(self, v):
            self.v = v

        def predict(self, X):
            return np.full((len(X), 1), self.v)

    vals = iter([1.0, 2.0])
    spec = LocalModelSpec(kind="custom", factory=lambda X, e: Const(next(vals)))
    models = fit_local_error_models(np.zeros((2, 1)), np.zeros((2, 2, 1)), spec)
    np.testing.assert_allclose(local_weights(np.zeros(1), models, 1.0, 1e-12), [[2 / 3], [1 / 3]], atol=1e-12)


def test_local_dimension_mismatch():
    models = fit_local_error_models(np.zeros((4, 2)), np.zeros((4, 1, 1)), LocalModelSpec(k=2))
    with pytest.raises(DimensionMismatch):
        local_error_estimates(models, np.zeros((1, 3)))


def test_ridge_local_model():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 2))
    E = (1.0 + X @ [0.5, -0.2])[:, None, None].repeat(2, axis=1)
    models = fit_local_error_models(X, E, LocalModelSpec(kind="ridge", lam=1e-9))
    np.testing.assert_allclose(local_error_estimates(models, X[:3]), np.maximum(E[:3], 0), atol=1e-6)


def test_shared_knn_estimates_match_per_member():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(30, 2))
    E = rng.random((30, 3, 2))
    models = fit_local_error_models(X, E, LocalModelSpec(k=5))
    q = rng.normal(size=(6, 2))
    fast = local_error_estimates(models, q)
    slow = np.stack([m.predict(q) for m in models], axis=1)
    np.testing.assert_array_equal(fast, slow)


def test_leadtime_profile_hand():
    # member error 1 at t=0 and 3 at t=1 -> shares 0.25, 0.75
    P = np.array([1.0, np.sqrt(3.0)]).reshape(1, 1, 2, 1)
    prof = leadtime_error_scores(P, [[0.0]])
    np.testing.assert_allclose(prof.relative[0, :, 0], [0.25, 0.75])


def test_leadtime_profile_constant_and_single():
    P = np.ones((4, 1, 3, 1))
    prof = leadtime_error_scores(P, np.zeros((4, 1)))
    np.testing.assert_allclose(prof.relative, 1 / 3)
    prof = leadtime_error_scores(np.random.default_rng(0).random((4, 2, 1, 1)), np.zeros((4, 1)))
    np.testing.assert_array_equal(prof.relative, 1.0)


def test_perfect_member_profile_uniform():
    Y = np.random.default_rng(0).normal(size=(5, 1))
    P = np.repeat(Y[:, None, None, :], 4, axis=2)
    prof = leadtime_error_scores(P, Y)
    np.testing.assert_array_equal(prof.relative, 0.25)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_profile_rows_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    prof = leadtime_error_scores(rng.normal(size=(6, 3, 4, 2)), rng.normal(size=(6, 2)))
    np.testing.assert_allclose(prof.relative.sum(axis=1), 1.0, atol=1e-9)


def test_time_weights_examples():
    from xcsge.weighting import LeadtimeErrorProfile

    rel = np.array([[[0.25], [0.75]], [[0.5], [0.5]]])
    prof = LeadtimeErrorProfile(rel, rel)
    np.testing.assert_allclose(time_weights(prof, 0, 1.0, 1e-12), [[2 / 3], [1 / 3]], atol=1e-12)
    np.testing.assert_allclose(time_weights(prof, 1, 0.0), 0.5)
    np.testing.assert_allclose(time_weight_tensor(prof, 1.0, 1e-12)[:, 0], [[2 / 3], [1 / 3]], atol=1e-12)
    single = LeadtimeErrorProfile(rel[:1], rel[:1])
    for t in range(2):
        np.testing.assert_array_equal(time_weights(single, t, 3.0), [[1.0]])
    with pytest.raises(LeadtimeOutOfRange):
        time_weights(prof, 2, 1.0)


def test_local_spec_validation():
    assert LocalModelSpec(k=50).k == (50,)
    with pytest.raises(ConfigError):
        LocalModelSpec(kind="svm")
    with pytest.raises(ConfigError):
        LocalModelSpec(kind="custom")
    with pytest.raises(ConfigError):
        LocalModelSpec(k=0)
