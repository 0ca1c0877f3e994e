import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairbayes_dpp.data import (CSVSchema, GroupView, SplitSpec, TabularDataset, group_views,
                                load_csv, split, split_indices, views_from_mapping)
from fairbayes_dpp.errors import CalibrationInputError, ConfigError, DataError, SchemaError, ShapeError


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_csv_small_example(tmp_path):
    p = write(tmp_path, "x,grp,y\n1.0,F,0\n2.0,M,1\n3.0,F,1\n")
    ds, gmap = load_csv(p, CSVSchema("y", "grp", numeric=["x"]))
    assert ds.labels.tolist() == [0, 1, 1]
    assert ds.groups.tolist() == [0, 1, 0]
    assert gmap == {"F": 0, "M": 1}
    assert ds.group_names == ("F", "M")
    # z-score with population sd: mean 2, sd sqrt(2/3)
    np.testing.assert_allclose(ds.features[:, 0], np.array([-1, 0, 1]) / np.sqrt(2 / 3), atol=1e-12)


def test_load_csv_rejects_bad_label(tmp_path):
    p = write(tmp_path, "x,grp,y\n1,F,0\n2,M,2\n")
    with pytest.raises(DataError, match="line 3"):
        load_csv(p, CSVSchema("y", "grp", numeric=["x"]))


def test_load_csv_missing_column(tmp_path):
    p = write(tmp_path, "x,grp\n1,F\n")
    with pytest.raises(SchemaError):
        load_csv(p, CSVSchema("y", "grp", numeric=["x"]))
    with pytest.raises(KeyError):
        load_csv(p, CSVSchema("y", "grp", numeric=["x"]))


def test_load_csv_empty(tmp_path):
    with pytest.raises(DataError):
        load_csv(write(tmp_path, ""), CSVSchema("y", "g", numeric=["x"]))
    with pytest.raises(DataError):
        load_csv(write(tmp_path, "x,g,y\n", "h.csv"), CSVSchema("y", "g", numeric=["x"]))


def test_load_csv_non_numeric(tmp_path):
    p = write(tmp_path, "x,g,y\n1,a,0\nabc,b,1\n")
    with pytest.raises(DataError):
        load_csv(p, CSVSchema("y", "g", numeric=["x"]))


def test_one_hot_width_and_standardisation(tmp_path):
    rng = np.random.default_rng(3)
    n = 200
    num = rng.normal(5, 3, size=(n, 2))
    colors = rng.choice(["red", "green", "blue"], size=n)
    shapes = rng.choice(["sq", "tri"], size=n)
    lines = ["u,v,color,shape,g,y"]
    for i in range(n):
        lines.append(f"{float(num[i,0])!r},{float(num[i,1])!r},{colors[i]},{shapes[i]},{i % 2},{i % 3 == 0:d}")
    p = write(tmp_path, "\n".join(lines) + "\n")
    ds, _ = load_csv(p, CSVSchema("y", "g", numeric=["u", "v"], categorical=["color", "shape"]))
    expected_width = 2 + len(set(colors)) + len(set(shapes))
    assert ds.dim == expected_width
    np.testing.assert_allclose(ds.features[:, :2].mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(ds.features[:, :2].std(axis=0), 1.0, atol=1e-9)
    onehot = ds.features[:, 2:]
    assert set(np.unique(onehot)) <= {0.0, 1.0}
    # each categorical block sums to one per row
    k = len(set(colors))
    np.testing.assert_array_equal(onehot[:, :k].sum(axis=1), 1.0)
    np.testing.assert_array_equal(onehot[:, k:].sum(axis=1), 1.0)


def test_constant_column_dropped_with_warning(tmp_path, caplog):
    p = write(tmp_path, "x,c,k,g,y\n1,7,a,0,0\n2,7,a,1,1\n3,7,a,0,1\n")
    with caplog.at_level(logging.WARNING):
        ds, _ = load_csv(p, CSVSchema("y", "g", numeric=["x", "c"], categorical=["k"]))
    assert ds.dim == 1
    assert ds.feature_names == ("x",)
    assert "constant" in caplog.text


def test_schema_validation():
    with pytest.raises(SchemaError):
        CSVSchema("y", "g")
    with pytest.raises(SchemaError):
        CSVSchema("y", "y", numeric=["x"])


def test_dataset_validation():
    with pytest.raises(ShapeError):
        TabularDataset(np.zeros((3, 2)), [0, 1], [0, 1, 0])
    with pytest.raises(DataError):
        TabularDataset(np.zeros((2, 2)), [0, 1], [0, 2])
    with pytest.raises(DataError):
        TabularDataset(np.zeros((2, 2)), [0, -1], [0, 1])
    ds = TabularDataset(np.zeros((2, 2)), [0, 1], [0, 1])
    with pytest.raises(ValueError):
        ds.features[0, 0] = 1.0


def test_split_sizes_with_replacement():
    ds = TabularDataset(np.arange(100.0), np.zeros(100, int), np.arange(100) % 2)
    tr, ca, te = split(ds, SplitSpec(0.7, 0.5, 0.3, True, seed=1))
    assert (tr.n, ca.n, te.n) == (70, 50, 30)


def test_split_partition_is_disjoint():
    tr, ca, te = split_indices(10, SplitSpec(0.5, 0.2, 0.3, with_replacement=False, seed=4))
    assert (len(tr), len(ca), len(te)) == (5, 2, 3)
    assert sorted(np.concatenate([tr, ca, te]).tolist()) == list(range(10))


def test_split_deterministic_and_seed_sensitive():
    spec = SplitSpec(seed=11)
    a = split_indices(1000, spec)
    b = split_indices(1000, spec)
    c = split_indices(1000, SplitSpec(seed=12))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    assert not np.array_equal(a[0], c[0])


def test_split_config_errors():
    with pytest.raises(ConfigError):
        SplitSpec(0.7, 0.5, 0.3, with_replacement=False)
    with pytest.raises(ConfigError):
        SplitSpec(0.0, 0.5, 0.3)


def test_group_views_example():
    views = group_views([0, 1, 0, 1, 0], [0.2, 0.9, 0.7, 0.1, 0.7], [0, 1, 1, 0, 0])
    assert views[0].scores.tolist() == [0.7, 0.7, 0.2]
    # stable ordering keeps ties in input order
    assert views[0].labels.tolist() == [1, 0, 0]
    assert views[1].scores.tolist() == [0.9, 0.1]
    assert views[1].labels.tolist() == [1, 0]


def test_group_views_errors():
    with pytest.raises(CalibrationInputError):
        group_views(TabularDataset(np.zeros(2), [0, 0], [0, 1], num_groups=2), [0.1, 0.2])
    with pytest.raises(CalibrationInputError):
        GroupView(0, [], [])
    with pytest.raises(ShapeError):
        group_views([0, 1], [0.1], [0, 1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.floats(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
def test_group_views_conserve_rows(rows):
    g = np.array([r[0] for r in rows])
    present = sorted(set(g.tolist()))
    remap = {a: i for i, a in enumerate(present)}
    g = np.array([remap[a] for a in g])
    s = np.array([r[1] for r in rows])
    y = np.array([r[2] for r in rows])
    views = group_views(g, s, y)
    assert sum(len(v) for v in views.values()) == len(rows)
    for a, v in views.items():
        assert np.all(np.diff(v.scores) <= 0)
        got = sorted(zip(v.scores.tolist(), v.labels.tolist()))
        want = sorted(zip(s[g == a].tolist(), y[g == a].tolist()))
        assert got == want


def test_views_from_mapping():
    views = views_from_mapping({0: ([0.1, 0.5], [0, 1]), 1: ([0.3], [1])})
    assert views[0].scores.tolist() == [0.5, 0.1]
    assert len(views[1]) == 1
