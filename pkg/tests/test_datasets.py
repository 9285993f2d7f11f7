import numpy as np
import pytest
import scipy.sparse as sp

from varchen.datasets import (Dataset, DatasetParseError, load_csv, load_dataset, load_libsvm,
                              synthetic_binary)


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_libsvm_roundtrip(tmp_path):
    p = _write(tmp_path, "a.libsvm", "# header comment\n+1 1:0.5 3:2\n\n-1 2:-1.5  # trailing\n1 1:1e-3\n")
    ds = load_libsvm(p)
    assert sp.issparse(ds.features)
    np.testing.assert_array_equal(ds.features.toarray(),
                                  [[0.5, 0.0, 2.0], [0.0, -1.5, 0.0], [1e-3, 0.0, 0.0]])
    np.testing.assert_array_equal(ds.labels, [1.0, -1.0, 1.0])
    assert load_libsvm(p, n_features=5).n_features == 5


@pytest.mark.parametrize("text,line,col,fragment", [
    ("1 1:1\n1 2:1 1:3\n", 2, 7, "strictly increasing"),
    ("1 1:1\n-1 0:2\n", 2, 4, "1-based"),
    ("1 1:1\nx 1:2\n", 2, 1, "bad label"),
    ("1 1:1\n3.5 1:2\n", 2, 1, "not an integer"),
    ("1 1:1\n12 1:2\n", 2, 1, "outside"),
    ("1 1:abc\n", 1, 5, "bad feature value"),
    ("1 1:nan\n", 1, 5, "non-finite"),
    ("1  1:2 7\n", 1, 8, "idx:val"),
    ("1 q:2\n", 1, 3, "bad feature index"),
])
def test_libsvm_errors(tmp_path, text, line, col, fragment):
    p = _write(tmp_path, "bad.libsvm", text)
    with pytest.raises(DatasetParseError) as info:
        load_libsvm(p)
    err = info.value
    assert (err.lineno, err.col) == (line, col)
    assert fragment in str(err)
    assert str(err).startswith(f"{p}:{line}:{col}:")


def test_libsvm_feature_limit(tmp_path):
    p = _write(tmp_path, "a.libsvm", "1 4:1\n")
    with pytest.raises(DatasetParseError, match="exceeds"):
        load_libsvm(p, n_features=3)


def test_empty_file(tmp_path):
    with pytest.raises(DatasetParseError, match="no samples"):
        load_libsvm(_write(tmp_path, "e.libsvm", "# nothing\n"))


def test_csv(tmp_path):
    p = _write(tmp_path, "a.csv", "label,f1,f2\n1,0.5,2\n-1,1,-1\n")
    ds = load_csv(p)
    np.testing.assert_array_equal(ds.features, [[0.5, 2.0], [1.0, -1.0]])
    np.testing.assert_array_equal(ds.labels, [1.0, -1.0])
    assert load_dataset(p).n_samples == 2


@pytest.mark.parametrize("text,line,col", [
    ("1,0.5,2\n-1,1\n", 2, 1),
    ("1,0.5,2\n-1,1,zz\n", 2, 3),
    ("1,0.5,2\n7.5,1,1\n", 2, 1),
])
def test_csv_errors(tmp_path, text, line, col):
    with pytest.raises(DatasetParseError) as info:
        load_csv(_write(tmp_path, "b.csv", text))
    assert (info.value.lineno, info.value.col) == (line, col)


def test_load_dataset_dispatch(tmp_path):
    p = _write(tmp_path, "d.txt", "1 1:1\n")
    assert sp.issparse(load_dataset(p).features)
    with pytest.raises(ValueError):
        load_dataset(p, fmt="parquet")


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.ones((2, 2)), np.array([1.0]))
    with pytest.raises(ValueError):
        Dataset(np.array([[np.inf]]), np.array([1.0]))
    with pytest.raises(ValueError):
        Dataset(np.ones((1, 1)), np.array([11.0]))


def test_one_vs_rest():
    ds = Dataset(np.ones((4, 1)), np.array([0.0, 3.0, 3.0, 9.0]))
    np.testing.assert_array_equal(ds.one_vs_rest(3).labels, [-1.0, 1.0, 1.0, -1.0])


def test_synthetic_binary_deterministic():
    a, b = synthetic_binary(30, 4, seed=9), synthetic_binary(30, 4, seed=9)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert set(np.unique(a.labels)) <= {-1.0, 1.0}
    assert not np.array_equal(a.features, synthetic_binary(30, 4, seed=10).features)
