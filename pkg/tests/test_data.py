import warnings
from collections import Counter

import numpy as np
import pytest

from structdict.core import LabeledMatrix
from structdict.data import (
    DataWarning,
    ImageMeta,
    SplitSpec,
    half_split_alternative,
    load_matrix,
    mirror_samples,
    normalize_columns,
    remap_labels,
    save_matrix,
    train_test_split,
)
from structdict.errors import ConfigError, DataError


def test_csv_label_remap(tmp_path):
    (tmp_path / "x.csv").write_text("1.5,2\n3,4\n")
    (tmp_path / "y.txt").write_text("5\n9\n")
    Y = load_matrix(tmp_path / "x.csv", tmp_path / "y.txt")
    np.testing.assert_array_equal(Y.labels, [0, 1])
    assert Y.label_names == (5, 9)
    np.testing.assert_array_equal(Y.data, [[1.5, 2], [3, 4]])
    rows = load_matrix(tmp_path / "x.csv", tmp_path / "y.txt", orientation="rows")
    np.testing.assert_array_equal(rows.data, [[1.5, 3], [2, 4]])


def test_load_errors(tmp_path):
    (tmp_path / "empty.csv").write_text("")
    with pytest.raises(DataError, match="empty"):
        load_matrix(tmp_path / "empty.csv", None)
    (tmp_path / "x.csv").write_text("1,2\n3,oops\n")
    (tmp_path / "y.txt").write_text("0\n1\n")
    with pytest.raises(DataError, match="row 2, column 2"):
        load_matrix(tmp_path / "x.csv", tmp_path / "y.txt")
    (tmp_path / "x.csv").write_text("1,2,3\n3,4,5\n")
    with pytest.raises(DataError, match="3 samples but 2 labels"):
        load_matrix(tmp_path / "x.csv", tmp_path / "y.txt")
    (tmp_path / "bad.bin").write_bytes(b"SDLM" + b"\0" * 10)
    with pytest.raises(DataError):
        load_matrix(tmp_path / "bad.bin")
    with pytest.raises(DataError):
        load_matrix(tmp_path / "missing.csv", None)


def test_binary_layout(tmp_path):
    Y = LabeledMatrix(np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]), [1, 0, 1], 2, (7, -3))
    save_matrix(Y, tmp_path / "m.sdlm")
    buf = (tmp_path / "m.sdlm").read_bytes()
    assert buf[:4] == b"SDLM"
    assert np.frombuffer(buf[4:28], "<u8").tolist() == [2, 3, 3]
    assert np.frombuffer(buf[28:76], "<f8").tolist() == [1, 4, 2, 5, 3, 6]
    assert np.frombuffer(buf[76:], "<i4").tolist() == [-3, 7, -3]
    back = load_matrix(tmp_path / "m.sdlm")
    np.testing.assert_array_equal(back.data, Y.data)
    assert back.label_names == (-3, 7)
    np.testing.assert_array_equal(np.asarray(back.label_names)[back.labels], [-3, 7, -3])


def test_round_trips_are_bitwise(tmp_path, rng):
    Y = LabeledMatrix(rng.standard_normal((4, 6)) * 10.0 ** rng.integers(-8, 8, (4, 6)),
                      [0, 0, 1, 1, 2, 2], 3, (10, 20, 30))
    for fmt, orient in (("bin", "columns"), ("csv", "columns"), ("csv", "rows")):
        save_matrix(Y, tmp_path / "d", tmp_path / "l", fmt=fmt, orientation=orient)
        back = load_matrix(tmp_path / "d", tmp_path / "l", fmt=fmt, orientation=orient)
        np.testing.assert_array_equal(back.data, Y.data)
        np.testing.assert_array_equal(back.labels, Y.labels)
        assert back.label_names == Y.label_names


def test_remap_is_bijection():
    labels, names = remap_labels([42, 7, 7, 100])
    np.testing.assert_array_equal(labels, [1, 0, 0, 2])
    assert names == (7, 42, 100)


def test_image_meta_sidecar(tmp_path):
    (tmp_path / "meta.txt").write_text("# faces\nwidth = 32\nheight: 30\n")
    assert ImageMeta.read(tmp_path / "meta.txt") == ImageMeta(32, 30)
    ImageMeta(4, 5).write(tmp_path / "m2")
    assert ImageMeta.read(tmp_path / "m2") == ImageMeta(4, 5)
    (tmp_path / "bad").write_text("width=3\n")
    with pytest.raises(DataError):
        ImageMeta.read(tmp_path / "bad")


def test_mirror_cases():
    Y = LabeledMatrix(np.array([[1.0], [2.0]]), [0], 1)
    np.testing.assert_array_equal(mirror_samples(Y, ImageMeta(2, 1)).data, [[2.0], [1.0]])
    # column-major 2x3 image: columns (a,b), (c,d), (e,f)
    img = np.array([[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]]).T
    flipped = mirror_samples(LabeledMatrix(img, [0], 1), ImageMeta(3, 2)).data.ravel()
    np.testing.assert_array_equal(flipped, [5, 6, 3, 4, 1, 2])
    sym = np.array([[1.0, 2.0, 1.0]]).T
    np.testing.assert_array_equal(mirror_samples(LabeledMatrix(sym, [0], 1), ImageMeta(3, 1)).data, sym)
    with pytest.raises(DataError):
        mirror_samples(Y, ImageMeta(3, 1))


def test_mirror_involution(rng):
    Y = LabeledMatrix(rng.standard_normal((12, 5)), [0, 1, 0, 1, 1], 2)
    meta = ImageMeta(4, 3)
    np.testing.assert_array_equal(mirror_samples(mirror_samples(Y, meta), meta).data, Y.data)


def test_half_split(rng):
    Y = LabeledMatrix(rng.standard_normal((3, 9)), [0, 0, 0, 0, 1, 1, 1, 1, 1], 2)
    log = []
    A, B = half_split_alternative(Y, seed=3, log=log)
    np.testing.assert_array_equal(A.labels, B.labels)
    np.testing.assert_array_equal(A.labels, [0, 0, 1, 1])
    assert len(log) == 1 and "odd" in log[0]
    with pytest.warns(DataWarning):
        half_split_alternative(Y, seed=3)
    even = LabeledMatrix(rng.standard_normal((3, 4)), [0, 0, 0, 0], 1)
    A, B = half_split_alternative(even, seed=0)
    assert Counter(np.concatenate([A.ids, B.ids]).tolist()) == Counter(even.ids.tolist())
    with pytest.raises(DataError):
        half_split_alternative(LabeledMatrix(np.ones((2, 3)), [0, 1, 1], 2))


def test_split_pinned_prefix_is_deterministic(rng):
    Y = LabeledMatrix(rng.standard_normal((2, 12)), np.repeat([0, 1], 6), 2)
    a, _ = train_test_split(Y, SplitSpec(3, seed=1, pinned_prefix=3))
    b, _ = train_test_split(Y, SplitSpec(3, seed=99, pinned_prefix=3))
    np.testing.assert_array_equal(a.ids, b.ids)
    np.testing.assert_array_equal(a.ids, [0, 1, 2, 6, 7, 8])


def test_split_whole_class_warns(rng):
    Y = LabeledMatrix(rng.standard_normal((2, 6)), np.repeat([0, 1], 3), 2)
    with pytest.warns(DataWarning):
        tr, te = train_test_split(Y, SplitSpec(3))
    assert te.n_samples == 0 and tr.n_samples == 6


def test_split_seeds(rng):
    Y = LabeledMatrix(rng.standard_normal((2, 40)), np.repeat([0, 1], 20), 2)
    a = train_test_split(Y, SplitSpec(10, seed=5, pinned_prefix=2))
    b = train_test_split(Y, SplitSpec(10, seed=5, pinned_prefix=2))
    c = train_test_split(Y, SplitSpec(10, seed=6, pinned_prefix=2))
    np.testing.assert_array_equal(a[0].ids, b[0].ids)
    assert not np.array_equal(a[0].ids, c[0].ids)
    tr, te = a
    assert set(tr.ids) & set(te.ids) == set()
    assert sorted(np.concatenate([tr.ids, te.ids])) == list(range(40))
    assert {0, 1, 20, 21} <= set(tr.ids.tolist())


def test_split_errors(rng):
    Y = LabeledMatrix(rng.standard_normal((2, 6)), np.repeat([0, 1], 3), 2)
    with pytest.raises(ConfigError):
        train_test_split(Y, SplitSpec(4))
    with pytest.raises(ConfigError):
        train_test_split(Y, SplitSpec(1, pinned_prefix=2))


def test_split_fraction(rng):
    Y = LabeledMatrix(rng.standard_normal((2, 20)), np.repeat([0, 1], 10), 2)
    tr, te = train_test_split(Y, SplitSpec(0.3, seed=0))
    np.testing.assert_array_equal(tr.class_sizes(), [3, 3])


def test_normalize_columns():
    Y = LabeledMatrix(np.array([[3.0, 0.0, 1.0], [4.0, 0.0, 1.0]]), [0, 0, 0], 1)
    log = []
    Z = normalize_columns(Y, log=log)
    np.testing.assert_allclose(Z.data[:, 0], [0.6, 0.8])
    np.testing.assert_array_equal(Z.data[:, 1], [0.0, 0.0])
    assert log
    norms = np.linalg.norm(Z.data, axis=0)
    assert np.all((np.abs(norms - 1) < 1e-12) | (norms == 0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        normalize_columns(LabeledMatrix(np.ones((2, 2)), [0, 0], 1))
