import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xcsge.data import Dataset, LeadtimeFrame, synth_random_walk_dataset
from xcsge.errors import DimensionMismatch, IncompleteCoverage, MissingPrediction, ParseError, SingularSystem
from xcsge.learners import (
    KnnModel,
    LearnerMember,
    PrecomputedMember,
    fit_member,
    knn_fit,
    load_precomputed,
    ridge_fit,
)


def test_ridge_exact_line():
    x = np.arange(10.0)[:, None]
    m = ridge_fit(x, 2 * x[:, 0], lam=0)
    assert m.coef[0, 0] == pytest.approx(2.0, abs=1e-9)
    assert m.intercept[0] == pytest.approx(0.0, abs=1e-9)


def test_ridge_hand_three_points():
    # centered x = (-1, 0, 1), sum xy = 1, sum x^2 = 2 -> beta = 1 / (2 + 1)
    m = ridge_fit([[1.0], [2.0], [3.0]], [1.0, 2.0, 2.0], lam=1.0)
    assert m.coef[0, 0] == pytest.approx(1 / 3, abs=1e-12)
    assert m.intercept[0] == pytest.approx(1.0, abs=1e-12)


def test_ridge_huge_penalty_gives_mean():
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(30, 3)), rng.normal(size=30)
    m = ridge_fit(X, y, lam=1e12)
    assert np.all(np.abs(m.coef) < 1e-9)
    assert m.intercept[0] == pytest.approx(y.mean(), abs=1e-9)


def test_ridge_singular():
    with pytest.raises(SingularSystem):
        ridge_fit([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]], [1.0, 2.0, 3.0], lam=0)
    ridge_fit([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]], [1.0, 2.0, 3.0], lam=0.1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_ridge_recovers_coefficients(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(50, 4))
    beta = rng.normal(size=(4, 2))
    m = ridge_fit(X, X @ beta + [1.0, -2.0], lam=0)
    np.testing.assert_allclose(m.coef, beta, atol=1e-6)
    np.testing.assert_allclose(m.intercept, [1.0, -2.0], atol=1e-6)


def test_ridge_dimension_mismatch():
    m = ridge_fit(np.eye(3), [1.0, 2.0, 3.0])
    with pytest.raises(DimensionMismatch):
        m.predict(np.ones((1, 2)))


def test_knn_regress_query_on_training_point():
    X = np.array([[0.0], [1.0], [5.0]])
    m = knn_fit(X, [3.0, 4.0, 9.0], k=1)
    np.testing.assert_array_equal(m.predict(X), [[3.0], [4.0], [9.0]])


def test_knn_classify_frequencies():
    X = np.array([[0.0], [0.1], [0.2], [0.3], [9.0]])
    m = knn_fit(X, [0, 0, 1, 2, 1], k=4, mode="classify")
    np.testing.assert_allclose(m.predict([[0.0]]), [[0.5, 0.25, 0.25]])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 10))
def test_knn_classify_on_simplex(seed, k):
    rng = np.random.default_rng(seed)
    m = knn_fit(rng.normal(size=(20, 2)), rng.integers(0, 3, 20), k=k, mode="classify", n_classes=3)
    p = m.predict(rng.normal(size=(15, 2)))
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-15)


def test_knn_k_range():
    with pytest.raises(ValueError):
        KnnModel(np.zeros((2, 1)), np.zeros((2, 1)), 3)


def test_persistence_echoes_issue_value():
    ds = Dataset(features=np.zeros((6, 1)), targets=np.full((6, 1), 0.42), feature_names=("x",),
                 target_names=("y",), frame=LeadtimeFrame(1, 3, 1), persistence=True)
    m = fit_member("persistence", ds, np.arange(3, 6))
    for t in range(3):
        np.testing.assert_array_equal(m.predict(ds, np.arange(3, 6), t), 0.42)


def test_persistence_error_grows_with_horizon():
    ds = synth_random_walk_dataset(seed=0, n=3000)
    m = fit_member("persistence", ds, [])
    rows = ds.valid_rows()
    e = [np.mean((m.predict(ds, rows, t) - ds.targets[rows]) ** 2) for t in range(ds.n_leadtimes)]
    assert e[0] < e[-1]
    # paired comparison over >= 1000 samples
    d = (m.predict(ds, rows, ds.n_leadtimes - 1) - ds.targets[rows]) ** 2 - (m.predict(ds, rows, 0) - ds.targets[rows]) ** 2
    z = d.mean() / (d.std(ddof=1) / np.sqrt(len(d)))
    assert len(rows) >= 1000 and z > 5


def test_learner_member_pools_leadtimes():
    rng = np.random.default_rng(0)
    lt = rng.normal(size=(40, 2, 1))
    ds = Dataset(features=np.zeros((40, 0)), targets=lt[:, 0] * 2, frame=LeadtimeFrame(1, 2, 1),
                 leadtime_features=lt, leadtime_feature_names=("z",))
    m = fit_member("ridge", ds, np.arange(40), lam=0.0)
    assert isinstance(m, LearnerMember) and m.columns == ["z"]
    np.testing.assert_allclose(m.predict(ds, np.arange(3), 1), lt[:3, 1] * m.model.coef[0, 0] + m.model.intercept)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_precomputed_roundtrip(tmp_path):
    p = _write(tmp_path / "p.csv", "sample_id,leadtime,p_0,p_1\na,0,1,2\na,1,3,4\nb,0,5,6\nb,1,7,8\n")
    m = load_precomputed(p, id="ext", sample_ids=["a", "b"], leadtimes=[0, 1])
    np.testing.assert_array_equal(m.lookup(["b", "a"], 1), [[7, 8], [3, 4]])
    with pytest.raises(MissingPrediction):
        m.lookup(["c"], 0)


def test_precomputed_coverage(tmp_path):
    p = _write(tmp_path / "p.csv", "sample_id,leadtime,p_0\na,0,1\na,1,3\nb,0,5\n")
    with pytest.raises(IncompleteCoverage) as err:
        load_precomputed(p, sample_ids=["a", "b"], leadtimes=[0, 1])
    assert ("b", 1) in err.value.missing
    assert "b" in str(err.value)


@pytest.mark.parametrize("body", [
    "sample_id,lt,p_0\na,0,1\n",
    "sample_id,leadtime,p_0\na,x,1\n",
    "sample_id,leadtime,p_0\na,0,foo\n",
    "sample_id,leadtime,p_0\na,0,nan\n",
    "sample_id,leadtime,p_0\na,0,1\na,0,2\n",
    "sample_id,leadtime,p_0\na,0\n",
    "",
])
def test_precomputed_parse_errors(tmp_path, body):
    with pytest.raises(ParseError):
        load_precomputed(_write(tmp_path / "p.csv", body))


def test_precomputed_error_names_line(tmp_path):
    p = _write(tmp_path / "p.csv", "sample_id,leadtime,p_0\na,0,1\nb,0,zz\n")
    with pytest.raises(ParseError, match=":3:"):
        load_precomputed(p)


@settings(max_examples=40, deadline=None)
@given(st.floats(-1e-5, 1e-5))
def test_precomputed_probability_tolerance(tmp_path_factory, delta):
    path = tmp_path_factory.mktemp("p") / "p.csv"
    path.write_text(f"sample_id,leadtime,p_0,p_1\na,0,0.5,{0.5 + delta!r}\n", encoding="utf-8")
    if abs(delta) <= 0.9e-6:
        load_precomputed(path, proba=True)
    elif abs(delta) >= 1.1e-6:
        with pytest.raises(ParseError):
            load_precomputed(path, proba=True)


def test_precomputed_scale():
    m = PrecomputedMember("x", ["a"], [0], [[10.0]], scale=4.0)
    np.testing.assert_array_equal(m.lookup(["a"], 0), [[2.5]])
    back = PrecomputedMember.from_state(*m.state())
    assert back.scale == 4.0
