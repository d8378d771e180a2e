import json

import numpy as np
import pytest

from modules.data_io import (
    DatasetManifest,
    MultiViewDataset,
    ViewEntry,
    load,
    load_prepared,
    make_miniature_dataset,
    read_matrix,
    save_dataset,
    split,
    standardize,
    write_miniature_dataset,
)
from modules.errors import (
    ContractError,
    DimMismatchError,
    LabelRangeError,
    NonNumericCellError,
    RowCountMismatchError,
    UnreadableFileError,
)


def _write(path, text):
    path.write_text(text)
    return str(path)


def _manifest(tmp_path, view1, view2, labels, dims=(2, 1), n_classes=2):
    return DatasetManifest(
        name="tiny",
        views=[
            ViewEntry("view1", _write(tmp_path / "v1.csv", view1), dims[0]),
            ViewEntry("view2", _write(tmp_path / "v2.csv", view2), dims[1]),
        ],
        labels_path=None if labels is None else _write(tmp_path / "y.csv", labels),
        n_classes=n_classes,
    )


class TestLoad:

    def test_small_dataset(self, tmp_path):
        dataset = load(_manifest(tmp_path, "1,2\n3,4\n5,6\n", "7\n8\n9\n", "0\n1\n0\n"))
        assert dataset.n_samples == 3
        assert dataset.dims == [2, 1]
        np.testing.assert_array_equal(dataset.views[0], [[1, 2], [3, 4], [5, 6]])
        np.testing.assert_array_equal(dataset.labels, [0, 1, 0])

    def test_dim_mismatch_names_view(self, tmp_path):
        manifest = _manifest(tmp_path, "1,2\n3,4\n5,6\n", "7\n8\n9\n", None, dims=(2, 3))
        with pytest.raises(DimMismatchError, match="view2"):
            load(manifest)

    def test_label_out_of_range_names_row(self, tmp_path):
        manifest = _manifest(tmp_path, "1,2\n3,4\n5,6\n", "7\n8\n9\n", "0\n1\n2\n")
        with pytest.raises(LabelRangeError) as info:
            load(manifest)
        assert info.value.row == 3

    def test_non_numeric_cell_location(self, tmp_path):
        manifest = _manifest(tmp_path, "1,2\n3,x\n5,6\n", "7\n8\n9\n", None)
        with pytest.raises(NonNumericCellError) as info:
            load(manifest)
        assert (info.value.row, info.value.column) == (2, "2")
        assert info.value.path.endswith("v1.csv")

    def test_infinite_cell_location(self, tmp_path):
        manifest = _manifest(tmp_path, "1,2\n3,4\n5,inf\n", "7\n8\n9\n", None)
        with pytest.raises(NonNumericCellError, match="non-finite") as info:
            load(manifest)
        assert (info.value.row, info.value.column) == (3, "2")

    def test_row_count_mismatch(self, tmp_path):
        manifest = _manifest(tmp_path, "1,2\n3,4\n5,6\n", "7\n8\n", None)
        with pytest.raises(RowCountMismatchError):
            load(manifest)

    def test_missing_labels_file(self, tmp_path):
        manifest = _manifest(tmp_path, "1,2\n3,4\n", "7\n8\n", None)
        manifest.labels_path = str(tmp_path / "absent.csv")
        with pytest.raises(UnreadableFileError):
            load(manifest)

    def test_header_row_is_skipped(self, tmp_path):
        manifest = _manifest(tmp_path, "a,b\n1,2\n3,4\n", "c\n7\n8\n", None)
        manifest.has_header = True
        assert load(manifest).n_samples == 2

    def test_manifest_json_resolves_relative_paths(self, tmp_path):
        _write(tmp_path / "v1.csv", "1,2\n3,4\n")
        _write(tmp_path / "v2.csv", "5\n6\n")
        payload = {"name": "rel", "n_classes": 2,
                   "views": [{"name": "a", "csv_path": "v1.csv", "dim": 2},
                             {"name": "b", "csv_path": "v2.csv", "dim": 1}]}
        path = _write(tmp_path / "m.json", json.dumps(payload))
        manifest = DatasetManifest.from_json(path)
        assert manifest.views[0].csv_path == str(tmp_path / "v1.csv")
        assert manifest.labels_path is None

    def test_manifest_missing_field(self, tmp_path):
        path = _write(tmp_path / "m.json", json.dumps({"name": "x", "views": []}))
        with pytest.raises(UnreadableFileError):
            DatasetManifest.from_json(path)

    def test_read_matrix(self, tmp_path):
        matrix = read_matrix(_write(tmp_path / "m.csv", "0.5;1\n2;3\n"), delimiter=";")
        np.testing.assert_array_equal(matrix, [[0.5, 1.0], [2.0, 3.0]])


class TestSaveLoad:

    def test_round_trip_is_bit_exact(self, tmp_path, rng):
        original = MultiViewDataset(views=[rng.normal(size=(7, 3)), rng.normal(size=(7, 2)) * 1e-7],
                                    labels=np.array([0, 1, 2, 0, 1, 2, 0]), n_classes=3, name="rt")
        loaded = load(DatasetManifest.from_json(save_dataset(original, str(tmp_path))))
        for a, b in zip(original.views, loaded.views):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(original.labels, loaded.labels)
        assert loaded.view_names == original.view_names

    def test_miniature_example(self, tmp_path):
        path = write_miniature_dataset(str(tmp_path))
        assert path.endswith("mini_manifest.json")
        dataset = load(DatasetManifest.from_json(path))
        assert dataset.dims == [6, 4]
        assert dataset.n_samples == 60
        assert np.bincount(dataset.labels).tolist() == [20, 20, 20]


class TestStandardize:

    def test_zero_mean_unit_variance(self, rng):
        dataset = MultiViewDataset(views=[rng.normal(3.0, 2.0, size=(20, 4))], labels=None, n_classes=2)
        z = standardize(dataset).views[0]
        np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(z.std(axis=0), 1.0, atol=1e-12)

    def test_constant_feature_is_centered(self):
        x = np.column_stack([np.full(5, 3.0), np.arange(5.0)])
        z = standardize(MultiViewDataset(views=[x], labels=None, n_classes=2)).views[0]
        np.testing.assert_array_equal(z[:, 0], 0.0)

    def test_idempotent(self, rng):
        dataset = MultiViewDataset(views=[rng.normal(size=(15, 3))], labels=None, n_classes=2)
        once = standardize(dataset)
        twice = standardize(once)
        np.testing.assert_allclose(once.views[0], twice.views[0], atol=1e-12)

    def test_statistics_come_from_training_rows(self):
        x = np.array([[0.0], [2.0], [100.0]])
        mask = np.array([True, True, False])
        dataset = MultiViewDataset(views=[x], labels=None, n_classes=2, train_mask=mask, test_mask=~mask)
        np.testing.assert_allclose(standardize(dataset).views[0].ravel(), [-1.0, 1.0, 99.0])


class TestSplit:

    def test_one_test_sample_per_class(self):
        dataset = MultiViewDataset(views=[np.arange(10.0)[:, None]], labels=np.repeat([0, 1], 5), n_classes=2)
        parts = split(dataset, test_fraction=0.2, seed=0)
        assert np.bincount(dataset.labels[parts.test_mask]).tolist() == [1, 1]
        assert np.all(parts.train_mask == ~parts.test_mask)

    def test_deterministic(self, mini_dataset):
        a = split(mini_dataset, seed=4)
        b = split(mini_dataset, seed=4)
        np.testing.assert_array_equal(a.test_mask, b.test_mask)

    def test_fraction_within_one_per_class(self, mini_dataset):
        parts = split(mini_dataset, test_fraction=0.3, seed=1)
        for count in np.bincount(mini_dataset.labels[parts.test_mask]):
            assert abs(count - 0.3 * 20) <= 1

    def test_needs_labels(self, rng):
        with pytest.raises(ContractError):
            split(MultiViewDataset(views=[rng.normal(size=(4, 2))], labels=None, n_classes=2))

    def test_singleton_class(self):
        dataset = MultiViewDataset(views=[np.zeros((3, 1))], labels=np.array([0, 0, 1]), n_classes=2)
        with pytest.raises(ContractError):
            split(dataset)

    def test_prepared_dataset(self, tmp_path):
        prepared = load_prepared(write_miniature_dataset(str(tmp_path)), seed=0, test_fraction=0.2)
        assert int(prepared.test_mask.sum()) == 12
        train = prepared.train_split()
        np.testing.assert_allclose(train.views[0].mean(axis=0), 0.0, atol=1e-12)


class TestBatches:

    def test_covers_every_row_once(self, mini_dataset):
        rows = []
        for batch in mini_dataset.batches(16, np.random.default_rng(0)):
            rows.extend(batch.labels.tolist())
        assert sorted(rows) == sorted(mini_dataset.labels.tolist())

    def test_trailing_singleton_dropped(self):
        dataset = make_miniature_dataset(seed=1).subset(np.arange(5))
        sizes = [b.n_samples for b in dataset.batches(2, np.random.default_rng(0))]
        assert sizes == [2, 2]
