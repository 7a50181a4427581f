import math

import numpy as np
import pytest

import spnx


def small_suite(seed=1):
    cfg = spnx.GenConfig()
    cfg.n_features = 8
    cfg.n_samples = 400
    cfg.n_outliers = 10
    cfg.seed = seed
    return spnx.generate(cfg)


def test_generate_is_seeded():
    a, b = small_suite(3), small_suite(3)
    assert a.truth == b.truth
    assert np.array_equal(a.dataset.to_numpy(), b.dataset.to_numpy())
    assert a.dataset.to_numpy().shape == (400, 8)
    assert sorted(a.truth) == a.outlier_rows()


def test_learn_and_marginals():
    labeled = small_suite()
    learn = spnx.LearnConfig()
    learn.seed = 1
    model = spnx.Model.learn(labeled.dataset, learn)
    assert model.num_features == 8
    x = labeled.dataset.to_numpy()[0]
    full = model.log_marginal(x)
    assert math.isfinite(full)
    assert model.log_marginal(x, list(range(8))) == full
    # A marginal over fewer features is a sum over more outcomes.
    assert math.isfinite(model.log_marginal(x, [0, 3]))

    again = spnx.Model.from_json(model.to_json())
    assert again.log_marginal(x) == full


def test_explain_and_detect():
    labeled = small_suite(2)
    learn = spnx.LearnConfig()
    learn.seed = 2
    model = spnx.Model.learn(labeled.dataset, learn)
    data = labeled.dataset.to_numpy()
    row = labeled.outlier_rows()[0]
    res = model.explain(data[row])
    assert res["evals"] == 8 * 9 // 2 - 1
    assert len(res["per_size"]) == 7
    assert res["selected"] == sorted(res["selected"])

    cfg = spnx.ExplainConfig()
    cfg.strategy = "forward"
    cfg.selection = "zscore"
    res = model.explain(data[row], cfg, labeled.dataset)
    assert 1 <= res["size"] <= 8

    rows, scores, threshold = model.detect(labeled.dataset, 0.025)
    assert len(rows) >= 10
    assert len(scores) == 400
    assert all(scores[r] >= threshold for r in rows)


def test_benchmark_and_f1():
    labeled = small_suite(4)
    learn = spnx.LearnConfig()
    learn.seed = 4
    fw, bw = spnx.ExplainConfig(), spnx.ExplainConfig()
    fw.strategy = "forward"
    reports = spnx.run_benchmark(labeled, learn, [fw, bw])
    assert [r["strategy"] for r in reports] == ["forward", "backward"]
    assert reports[0]["train_s"] == reports[1]["train_s"]
    for r in reports:
        assert 0.0 <= r["mean_f1"] <= 1.0
        assert set(r["selected"]) == set(labeled.truth)

    p, r, f = spnx.f1_dims([1], [1, 2])
    assert (p, r) == (1.0, 0.5)
    assert f == pytest.approx(2 / 3)


def test_errors_map_to_python_exceptions():
    with pytest.raises(spnx.DataError):
        spnx.parse_csv("a,b\n1,\n")
    with pytest.raises(spnx.ModelError):
        spnx.Model.from_json("{}")
    with pytest.raises(spnx.QueryError):
        spnx.f1_dims([], [1])
    with pytest.raises(spnx.QueryError):
        spnx.ExplainConfig().strategy = "sideways"
    assert issubclass(spnx.DataError, spnx.Error)


def test_dataset_from_numpy():
    d = spnx.Dataset(np.arange(6.0).reshape(3, 2), ["a", "b"])
    assert (d.rows, d.cols) == (3, 2)
    assert d.names == ["a", "b"]
    assert d.to_csv().startswith("a,b\n0,1\n")
    with pytest.raises(spnx.DataError):
        spnx.Dataset(np.array([[1.0, float("nan")]]))
