import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from opml.data import (Dataset, DatasetError, NormParams, SplitSpec, bundled_names, coldstart_order,
                       load_bundled, load_csv, make_stream, normalize, unit_ball_rescale,
                       zscore_fit_apply)

TABLE_SIZES = {  # samples, dim, classes
    "iris": (150, 4, 3), "wine": (178, 13, 3), "breast": (683, 9, 2), "balance": (625, 4, 3),
    "glass": (214, 9, 6), "pima": (768, 8, 2), "segment": (2310, 19, 7), "optdigits": (5620, 64, 10),
}


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_label_first(tmp_path):
    ds = load_csv(_write(tmp_path, "1,0.5,0.2\n2,0.1,0.9\n1,0.4,0.3\n"), label_column=0)
    assert ds.dim == 2 and ds.num_classes == 2
    assert_array_equal(ds.labels, [0, 1, 0])
    assert_allclose(ds.features, [[0.5, 0.2], [0.1, 0.9], [0.4, 0.3]])
    assert ds.classes == ("1", "2")


def test_header_detected_and_tokens_remapped(tmp_path):
    ds = load_csv(_write(tmp_path, "a,b,label\n1,2,cat\n3,4,dog\n5,6,cat\n"))
    assert len(ds) == 3
    assert ds.classes == ("cat", "dog")
    assert_array_equal(ds.labels, [0, 1, 0])


def test_empty_file(tmp_path):
    with pytest.raises(DatasetError, match="empty dataset"):
        load_csv(_write(tmp_path, ""))
    with pytest.raises(DatasetError, match="empty dataset"):
        load_csv(_write(tmp_path, "x,y,label\n"))


def test_ragged_row_reports_location(tmp_path):
    with pytest.raises(DatasetError, match="row 2 has 2 columns"):
        load_csv(_write(tmp_path, "1,2,0\n3,1\n"))


def test_non_numeric_cell_reports_location(tmp_path):
    with pytest.raises(DatasetError, match="row 2, column 2"):
        load_csv(_write(tmp_path, "1,2,0\n3,x,1\n"))


def test_non_finite_rejected(tmp_path):
    with pytest.raises(DatasetError, match="non-finite"):
        load_csv(_write(tmp_path, "1,2,0\n3,nan,1\n"))


def test_missing_file(tmp_path):
    with pytest.raises(DatasetError, match="cannot read"):
        load_csv(tmp_path / "absent.csv")


def test_bad_label_column(tmp_path):
    with pytest.raises(DatasetError, match="out of range"):
        load_csv(_write(tmp_path, "1,2,0\n"), label_column=5)


@pytest.mark.parametrize("name", sorted(TABLE_SIZES))
def test_bundled_shapes(name):
    ds = load_bundled(name)
    assert (len(ds), ds.dim, ds.num_classes) == TABLE_SIZES[name]
    assert np.isfinite(ds.features).all()
    assert set(ds.labels.tolist()) == set(range(ds.num_classes))


def test_bundled_names():
    assert set(bundled_names()) == set(TABLE_SIZES)
    with pytest.raises(DatasetError):
        load_bundled("nope")


def _ds(X, y=None):
    X = np.asarray(X, dtype=np.float64)
    return Dataset(X, np.zeros(len(X), dtype=int) if y is None else y)


def test_zscore_symmetric_column():
    tr, te, params = zscore_fit_apply(_ds([[1.0], [2.0], [3.0]]), _ds([[2.0]]))
    assert_allclose(tr.features[:, 0], [-np.sqrt(1.5), 0.0, np.sqrt(1.5)])
    # population std of [1,2,3] is sqrt(2/3); (x - 2)/sqrt(2/3) = +-sqrt(3/2)
    assert params.ddof == 0
    assert_allclose(te.features, [[0.0]])


def test_zscore_sample_std_convention():
    tr, _, _ = zscore_fit_apply(_ds([[1.0], [2.0], [3.0]]), _ds([[2.0]]), ddof=1)
    assert_allclose(tr.features[:, 0], [-1.0, 0.0, 1.0])


def test_zscore_constant_column():
    tr, te, params = zscore_fit_apply(_ds([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]), _ds([[7.0, 1.0]]))
    assert_array_equal(tr.features[:, 0], 0.0)
    assert_array_equal(te.features[:, 0], 0.0)
    assert params.stds[0] == 0.0


def test_zscore_moments(rng):
    tr, te, _ = zscore_fit_apply(_ds(rng.standard_normal((20, 3)) * 5 + 2), _ds(rng.standard_normal((20, 3))))
    X = tr.features
    assert np.abs(X.mean(axis=0)).max() < 1e-12
    assert np.abs(X.std(axis=0) - 1.0).max() < 1e-12


def test_unit_ball_direct():
    tr, te, s = unit_ball_rescale(_ds([[2.0, 0.0], [0.0, 4.0]]), _ds([[8.0, 0.0]]))
    assert s == 4.0
    assert_allclose(np.linalg.norm(tr.features, axis=1), [0.5, 1.0])
    assert_allclose(te.features, [[2.0, 0.0]])  # test may exceed norm 1


def test_unit_ball_all_zero():
    with pytest.raises(DatasetError):
        unit_ball_rescale(_ds([[0.0, 0.0, 0.0]]), _ds([[1.0, 0.0, 0.0]]))


def test_unit_ball_max_norm_is_one(rng):
    tr, _, _ = unit_ball_rescale(_ds(rng.standard_normal((30, 4))), _ds(rng.standard_normal((5, 4))))
    assert abs(tr.max_norm() - 1.0) < 1e-12


def test_normalize_idempotent(rng):
    tr, te = _ds(rng.standard_normal((25, 4)) * 3 + 1), _ds(rng.standard_normal((10, 4)))
    n_tr, n_te, params = normalize(tr, te)
    again_tr, again_te, _ = normalize(n_tr, n_te)
    assert np.abs(again_tr.features - n_tr.features).max() < 1e-12
    assert np.abs(again_te.features - n_te.features).max() < 1e-12
    assert abs(params.test_max_norm - n_te.max_norm()) < 1e-15


def test_norm_params_json_roundtrip(rng):
    _, _, params = normalize(_ds(rng.standard_normal((10, 3))), _ds(rng.standard_normal((4, 3))))
    back = NormParams.from_json(params.to_json())
    X = rng.standard_normal((6, 3))
    assert_array_equal(back.apply(X), params.apply(X))
    assert json.loads(params.to_json())["scale"] == params.scale


@pytest.mark.parametrize("name", sorted(TABLE_SIZES))
def test_every_train_norm_within_unit_ball(name):
    tr, te = make_stream(load_bundled(name), SplitSpec(seed=3))
    n_tr, _, _ = normalize(tr, te)
    assert n_tr.max_norm() <= 1.0 + 1e-12


def test_shuffled_split_deterministic():
    ds = _ds(np.arange(8.0).reshape(4, 2), np.array([0, 1, 0, 1]))
    a_tr, a_te = make_stream(ds, SplitSpec(0.5, seed=11))
    b_tr, b_te = make_stream(ds, SplitSpec(0.5, seed=11))
    assert len(a_tr) == len(a_te) == 2
    assert a_tr.features.tobytes() == b_tr.features.tobytes()
    assert a_te.features.tobytes() == b_te.features.tobytes()


def test_shuffled_split_frozen():
    ds = _ds(np.arange(10.0)[:, None])
    tr, te = make_stream(ds, SplitSpec(0.5, seed=0))
    # SplitMix64(0).permutation(10)
    assert_array_equal(tr.features[:, 0], [6, 3, 2, 9, 8])
    assert_array_equal(te.features[:, 0], [1, 4, 7, 0, 5])


def test_coldstart_interleave():
    order = coldstart_order(np.array([0, 0, 0, 0, 1, 1, 1, 1]), 2)
    labels = np.array([0, 0, 0, 0, 1, 1, 1, 1])[order]
    assert_array_equal(labels, [0, 0, 1, 1, 0, 0, 1, 1])
    assert_array_equal(order, [0, 1, 4, 5, 2, 3, 6, 7])


def test_coldstart_blocks_are_disjoint_and_cover():
    labels = np.repeat(np.arange(3), [7, 5, 9])
    order = coldstart_order(labels, 4)
    assert sorted(order.tolist()) == list(range(len(labels)))


def test_segment_coldstart_prefix_single_class():
    ds = load_bundled("segment")
    for parts in (10, 5, 2):
        tr, _ = make_stream(ds, SplitSpec(seed=0, mode="coldstart", parts=parts))
        first_block = int(np.ceil(np.sum(ds.labels == tr.labels[0]) / parts))
        prefix = tr.labels[:first_block]
        assert (prefix == prefix[0]).all()
        assert first_block >= len(ds) // (7 * parts)


@pytest.mark.parametrize("frac", [0.01, 0.99])
def test_split_empty_side(frac):
    with pytest.raises(DatasetError):
        make_stream(_ds(np.ones((3, 1))), SplitSpec(frac))


def test_splitspec_validation():
    with pytest.raises(ValueError):
        SplitSpec(1.0)
    with pytest.raises(ValueError):
        SplitSpec(mode="weird")
    with pytest.raises(ValueError):
        SplitSpec(mode="coldstart", parts=0)
    assert SplitSpec(mode="coldstart", parts=7).to_dict()["parts"] == 7
