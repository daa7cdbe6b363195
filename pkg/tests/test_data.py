import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xcsge.data import (
    Dataset,
    LeadtimeFrame,
    Schema,
    SplitPlan,
    SynthConfig,
    apply_transform,
    denormalize_targets,
    kfold_splits,
    lag_features,
    load_csv,
    noise_schedule,
    normalize_target_max,
    regime_of,
    standardize,
    synth_random_walk_dataset,
    synth_regime_dataset,
    train_split,
    training_target_max,
    write_csv,
)
from xcsge.errors import (
    ConfigError,
    DatasetNotFound,
    EmptyFitSet,
    LeadtimeOutOfRange,
    NonPositiveMax,
    ParseError,
    SchemaMismatch,
    ShiftTooLarge,
    TimestampOrderError,
    TooFewGroups,
    TooFewSamples,
    TransformError,
)


def _files(tmp_path, body, **schema):
    base = {"features": ["a", "b"], "targets": ["y"], "timestamp": "ts"}
    base.update(schema)
    (tmp_path / "s.json").write_text(json.dumps(base))
    (tmp_path / "d.csv").write_text(body)
    return tmp_path / "d.csv", tmp_path / "s.json"


def test_load_three_rows(tmp_path):
    ds = load_csv(*_files(tmp_path, "ts,a,b,y\n1,0.5,1,2\n2,1.5,2,3\n2,2.5,3,4\n"))
    assert ds.n_samples == 3 and ds.features.shape == (3, 2) and ds.n_targets == 1
    np.testing.assert_array_equal(ds.targets[:, 0], [2, 3, 4])


def test_load_iso_timestamps(tmp_path):
    ds = load_csv(*_files(tmp_path, "ts,a,b,y\n2024-01-01T00:00:00,1,1,1\n2024-01-01T01:00:00Z,1,1,1\n"))
    assert ds.timestamps[1] - ds.timestamps[0] == 3600.0


def test_load_errors(tmp_path):
    with pytest.raises(ParseError, match=r":3: column 'b'"):
        load_csv(*_files(tmp_path, "ts,a,b,y\n1,0,0,0\n2,0,x,0\n"))
    with pytest.raises(TimestampOrderError):
        load_csv(*_files(tmp_path, "ts,a,b,y\n2,0,0,0\n1,0,0,0\n"))
    with pytest.raises(SchemaMismatch):
        load_csv(*_files(tmp_path, "ts,a,y\n1,0,0\n"))
    with pytest.raises(ParseError):
        load_csv(*_files(tmp_path, "ts,a,b,y\n1,0,0\n"))
    with pytest.raises(DatasetNotFound):
        load_csv(tmp_path / "nope.csv", Schema(features=["a"], targets=["y"]))
    with pytest.raises(ConfigError):
        Schema.from_dict({"features": [], "targets": ["y"], "bogus": 1})


def test_missing_rows_dropped_and_counted(tmp_path):
    with pytest.warns(UserWarning, match="dropped 2"):
        ds = load_csv(*_files(tmp_path, "ts,a,b,y\n1,0,0,0\n2,,0,0\n3,0,NA,0\n4,1,1,1\n"))
    assert ds.n_samples == 2 and ds.dropped_rows == 2
    assert not np.isnan(ds.features).any()


def test_classification_labels(tmp_path):
    ds = load_csv(*_files(tmp_path, "ts,a,b,lab\n1,0,0,walk\n2,0,0,run\n", targets=[],
                          task="classification", label="lab", classes=["walk", "run", "stand"]))
    np.testing.assert_array_equal(ds.targets, [[1, 0, 0], [0, 1, 0]])
    with pytest.raises(ParseError):
        load_csv(*_files(tmp_path, "ts,a,b,lab\n1,0,0,fly\n", targets=[], task="classification",
                         label="lab", classes=["walk"]))


def test_write_load_roundtrip(tmp_path):
    ds = synth_regime_dataset(SynthConfig(n=50, n_leadtimes=3, seed=1))
    write_csv(ds, tmp_path / "d.csv", tmp_path / "s.json")
    back = load_csv(tmp_path / "d.csv", tmp_path / "s.json")
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.leadtime_features, ds.leadtime_features)
    np.testing.assert_array_equal(back.targets, ds.targets)
    np.testing.assert_array_equal(back.aux["regime"], ds.aux["regime"])
    assert back.frame == ds.frame and list(back.sample_ids) == list(ds.sample_ids)


def test_frame_and_issue_columns():
    ds = synth_random_walk_dataset(seed=0, n=20, frame=LeadtimeFrame(2, 6, 2))
    assert ds.n_leadtimes == 3 and ds.frame.horizon(2) == 6
    assert ds.issue_columns == ["y@issue"]
    assert ds.first_valid_row() == 6
    rows = np.array([10, 11])
    np.testing.assert_array_equal(ds.inputs(rows, 1, ["y@issue"])[:, 0], ds.targets[rows - 4, 0])
    with pytest.raises(LeadtimeOutOfRange):
        ds.inputs(rows, 3)
    with pytest.raises(TooFewSamples):
        ds.inputs(np.array([1]), 2, ["y@issue"])
    with pytest.raises(SchemaMismatch):
        ds.inputs(rows, 0, ["zzz"])


def test_standardize():
    rng = np.random.default_rng(0)
    ds = Dataset(features=rng.normal(3, 2, size=(100, 2)), targets=np.zeros((100, 1)), feature_names=("a", "b"))
    out, tr = standardize(ds)
    np.testing.assert_allclose(out.features.mean(axis=0), 0, atol=1e-9)
    np.testing.assert_allclose(out.features.std(axis=0), 1, atol=1e-6)
    with pytest.raises(TransformError):
        standardize(out)
    assert apply_transform(out, tr) is out
    with pytest.raises(EmptyFitSet):
        standardize(ds, [])


def test_standardize_held_out_hand():
    ds = Dataset(features=np.array([[1.0], [3.0], [10.0]]), targets=np.zeros((3, 1)), feature_names=("a",))
    out, tr = standardize(ds, fit_on=[0, 1])
    # mean 2, std 1 from the two fit rows
    assert out.features[2, 0] == 8.0
    assert tr.mean == (2.0,) and tr.std == (1.0,)


def test_standardize_constant_column():
    ds = Dataset(features=np.array([[5.0, 1.0], [5.0, 2.0]]), targets=np.zeros((2, 1)), feature_names=("c", "v"))
    with pytest.warns(UserWarning, match="constant"):
        out, tr = standardize(ds)
    np.testing.assert_array_equal(out.features[:, 0], 0.0)
    assert tr.std[0] == 1.0


def test_standardize_leadtime_pooled():
    lt = np.arange(12.0).reshape(3, 2, 2)
    ds = Dataset(features=np.zeros((3, 0)), targets=np.zeros((3, 1)), leadtime_features=lt,
                 leadtime_feature_names=("p", "q"), frame=LeadtimeFrame(1, 2, 1))
    out, tr = standardize(ds)
    np.testing.assert_allclose(out.leadtime_features.reshape(-1, 2).mean(axis=0), 0, atol=1e-12)


def test_target_normalization():
    ds = Dataset(features=np.zeros((3, 0)), targets=np.array([[50.0], [-20.0], [100.0]]))
    out = normalize_target_max(ds, 100)
    np.testing.assert_array_equal(out.targets[:, 0], [0.5, -0.2, 1.0])
    np.testing.assert_array_equal(denormalize_targets(out.targets, out), ds.targets)
    with pytest.raises(NonPositiveMax):
        normalize_target_max(ds, 0)
    with pytest.raises(TransformError):
        normalize_target_max(out, 2)
    assert training_target_max(ds, [0, 1]) == 50.0


def test_lag_features_definition():
    ds = Dataset(features=np.array([[1.0], [2.0], [3.0]]), targets=np.zeros((3, 1)), feature_names=("c",))
    out, dropped = lag_features(ds, ["c"], {1})
    np.testing.assert_array_equal(out.features, [[1, 2], [2, 3]])
    assert dropped == 1 and out.feature_names == ("c", "c+1")
    same, dropped = lag_features(ds, ["c"], {0})
    assert same is ds and dropped == 0
    with pytest.raises(ShiftTooLarge):
        lag_features(ds, ["c"], {3})


def test_lag_features_wind_count():
    # 4 of 7 features shifted by -2..+2 hours
    rng = np.random.default_rng(0)
    names = tuple(f"f{i}" for i in range(7))
    ds = Dataset(features=rng.normal(size=(50, 7)), targets=np.zeros((50, 1)), feature_names=names)
    out, dropped = lag_features(ds, names[:4], {-2, -1, 1, 2})
    assert out.features.shape[1] == 23 and dropped == 4


@settings(max_examples=50, deadline=None)
@given(st.integers(5, 30), st.sets(st.integers(-4, 4), min_size=1, max_size=4), st.integers(0, 10**6))
def test_lag_features_never_fabricates(n, shifts, seed):
    rng = np.random.default_rng(seed)
    ds = Dataset(features=rng.normal(size=(n, 2)), targets=np.zeros((n, 1)), feature_names=("a", "b"))
    out, dropped = lag_features(ds, ["a"], shifts)
    assert out.n_samples + dropped == n
    assert np.isin(out.features, ds.features).all()


def test_kfold_contiguous_blocks():
    ds = Dataset(features=np.zeros((100, 1)), targets=np.zeros((100, 1)))
    splits = kfold_splits(ds, SplitPlan(folds=10), seed=0)
    assert len(splits) == 10
    allt = np.concatenate([s.test for s in splits])
    np.testing.assert_array_equal(allt, np.arange(100))
    for s in splits:
        assert len(s.test) == 10 and np.all(np.diff(s.test) == 1)
        assert len(np.intersect1d(s.base, s.test)) == 0 and len(np.intersect1d(s.ensemble, s.test)) == 0
        assert len(s.base) == 63 and len(s.ensemble) == 27
    again = kfold_splits(ds, SplitPlan(folds=10), seed=0)
    assert all(np.array_equal(a.base, b.base) for a, b in zip(splits, again))
    with pytest.raises(TooFewSamples):
        kfold_splits(Dataset(features=np.zeros((5, 1)), targets=np.zeros((5, 1))), SplitPlan(folds=10))


def test_kfold_groups():
    g = np.repeat(np.array(["u1", "u2", "u3", "u4"], dtype=object), 6)
    ds = Dataset(features=np.zeros((24, 1)), targets=np.zeros((24, 1)), group_ids=g)
    for s in kfold_splits(ds, SplitPlan(folds=2, group_key=True), seed=1):
        sides = [set(g[s.base]), set(g[s.ensemble]), set(g[s.test])]
        assert all(not (a & b) for i, a in enumerate(sides) for b in sides[i + 1:])
    with pytest.raises(TooFewGroups):
        kfold_splits(ds, SplitPlan(folds=5, group_key=True))


def test_split_plan_validation():
    assert SplitPlan(folds=10).test_fraction == pytest.approx(0.1)
    with pytest.raises(ConfigError):
        SplitPlan(base_fraction=1.5)


def test_train_split():
    ds = Dataset(features=np.zeros((10, 1)), targets=np.zeros((10, 1)))
    b, e = train_split(ds, SplitPlan(), seed=3)
    assert len(b) == 7 and len(e) == 3 and not set(b) & set(e)


def test_synth_determinism_and_regimes():
    a = synth_regime_dataset(SynthConfig(n=10_000, regime_fractions=(0.3, 0.7), seed=4))
    b = synth_regime_dataset(SynthConfig(n=10_000, regime_fractions=(0.3, 0.7), seed=4))
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.targets, b.targets)
    frac = a.aux["regime"].mean()
    assert abs(frac - 0.7) <= 0.01
    np.testing.assert_array_equal(regime_of(a.features[:, 0], (0.3, 0.7)), a.aux["regime"])
    with pytest.raises(ConfigError):
        synth_regime_dataset(SynthConfig(regime_fractions=(0.5, 0.6)))


def test_synth_noise_grows_with_leadtime():
    cfg = SynthConfig(n=10_000, n_leadtimes=4, seed=2)
    ds = synth_regime_dataset(cfg)
    err = ds.leadtime_features[:, :, 0] - ds.aux["x1_true"][:, None]
    var = err.var(axis=0)
    assert var[-1] > var[0]
    np.testing.assert_allclose(np.sqrt(var), noise_schedule(cfg), rtol=0.05)
