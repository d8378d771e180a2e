"""
CUMI Toolkit — Multi-view Data I/O
Loads multi-view datasets described by a JSON manifest (one CSV per view
plus a single-column labels CSV), standardizes features and builds
stratified train/test splits.

All parsing goes through pandas. Every ingestion error names the file,
and the row and column where one applies.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Iterator, List, Optional

import numpy as np
import pandas as pd

import config
from modules.errors import (
    ContractError,
    DimMismatchError,
    LabelRangeError,
    NonNumericCellError,
    RowCountMismatchError,
    UnreadableFileError,
)

logger = logging.getLogger(__name__)


# ============================================================================
# TYPES
# ============================================================================

@dataclass
class ViewEntry:
    name: str
    csv_path: str
    dim: int


@dataclass
class DatasetManifest:
    name: str
    views: List[ViewEntry]
    labels_path: Optional[str]
    n_classes: int
    delimiter: str = ","
    has_header: bool = False

    def __post_init__(self):
        if not self.views:
            raise ContractError(f"manifest '{self.name}' declares no views")
        if len(self.views) == 1:
            logger.warning(f"Manifest '{self.name}' has a single view; common/unique separation is degenerate")
        for v in self.views:
            if v.dim < 1:
                raise ContractError(f"view '{v.name}' declares non-positive dim {v.dim}")
        if self.n_classes < 2:
            raise ContractError(f"n_classes must be >= 2, got {self.n_classes}")

    @classmethod
    def from_json(cls, path: str) -> "DatasetManifest":
        """Parse a manifest file; relative paths resolve against its directory."""
        try:
            with open(path, "r") as f:
                raw = json.load(f)
        except OSError as e:
            raise UnreadableFileError(f"cannot read manifest: {e.strerror}", path=path)
        except json.JSONDecodeError as e:
            raise UnreadableFileError(f"manifest is not valid JSON: {e.msg}", path=path, row=e.lineno)

        base = os.path.dirname(os.path.abspath(path))

        def _resolve(p: Optional[str]) -> Optional[str]:
            if p is None:
                return None
            return p if os.path.isabs(p) else os.path.join(base, p)

        try:
            views = [ViewEntry(name=v["name"], csv_path=_resolve(v["csv_path"]), dim=int(v["dim"]))
                     for v in raw["views"]]
            return cls(
                name=raw.get("name", os.path.splitext(os.path.basename(path))[0]),
                views=views,
                labels_path=_resolve(raw.get("labels_path")),
                n_classes=int(raw["n_classes"]),
                delimiter=raw.get("delimiter", config.CSV_DELIMITER),
                has_header=bool(raw.get("has_header", False)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise UnreadableFileError(f"manifest is missing or has an invalid field: {e}", path=path)

    def to_json(self, path: str):
        base = os.path.dirname(os.path.abspath(path))

        def _rel(p: Optional[str]) -> Optional[str]:
            return None if p is None else os.path.relpath(p, base)

        payload = {
            "name": self.name,
            "views": [{"name": v.name, "csv_path": _rel(v.csv_path), "dim": v.dim} for v in self.views],
            "labels_path": _rel(self.labels_path),
            "n_classes": self.n_classes,
            "delimiter": self.delimiter,
            "has_header": self.has_header,
        }
        with open(path, "w") as f:
            json.dump(payload, f, indent=2)


@dataclass
class MultiViewBatch:
    """Aligned minibatch: one N x d_i matrix per view plus optional labels."""
    views: List[np.ndarray]
    labels: Optional[np.ndarray] = None

    @property
    def n_samples(self) -> int:
        return self.views[0].shape[0]


@dataclass
class MultiViewDataset:
    views: List[np.ndarray]
    labels: Optional[np.ndarray]
    n_classes: int
    name: str = "dataset"
    view_names: List[str] = field(default_factory=list)
    train_mask: Optional[np.ndarray] = None
    test_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.views = [np.asarray(v, dtype=np.float64) for v in self.views]
        n = self.views[0].shape[0]
        for i, v in enumerate(self.views):
            if v.ndim != 2 or v.shape[0] != n:
                raise ContractError(f"view {i} has shape {v.shape}, expected {n} rows")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ContractError(f"labels have shape {self.labels.shape}, expected ({n},)")
            if n and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
                raise ContractError(f"labels must lie in [0, {self.n_classes})")
        if not self.view_names:
            self.view_names = [f"view{i + 1}" for i in range(len(self.views))]

    @property
    def n_samples(self) -> int:
        return self.views[0].shape[0]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> List[int]:
        return [v.shape[1] for v in self.views]

    def subset(self, index) -> "MultiViewDataset":
        """Rows selected by a boolean mask or an index array (split masks dropped)."""
        return MultiViewDataset(
            views=[v[index] for v in self.views],
            labels=None if self.labels is None else self.labels[index],
            n_classes=self.n_classes,
            name=self.name,
            view_names=list(self.view_names),
        )

    def train_split(self) -> "MultiViewDataset":
        return self if self.train_mask is None else self.subset(self.train_mask)

    def test_split(self) -> Optional["MultiViewDataset"]:
        return None if self.test_mask is None else self.subset(self.test_mask)

    def as_batch(self) -> MultiViewBatch:
        return MultiViewBatch(views=list(self.views), labels=self.labels)

    def batches(self, batch_size: int, rng: np.random.Generator,
                drop_singletons: bool = True) -> Iterator[MultiViewBatch]:
        """Shuffled minibatches; a trailing batch of one sample is skipped."""
        order = rng.permutation(self.n_samples)
        for start in range(0, self.n_samples, batch_size):
            idx = order[start:start + batch_size]
            if drop_singletons and idx.size < 2:
                continue
            yield MultiViewBatch(
                views=[v[idx] for v in self.views],
                labels=None if self.labels is None else self.labels[idx],
            )


# ============================================================================
# LOADING
# ============================================================================

def _read_numeric_csv(path: str, delimiter: str, has_header: bool, what: str) -> pd.DataFrame:
    if not os.path.isfile(path):
        raise UnreadableFileError(f"{what} file not found", path=path)
    try:
        frame = pd.read_csv(path, sep=delimiter, header=0 if has_header else None,
                            float_precision="round_trip", skip_blank_lines=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise UnreadableFileError(f"cannot parse {what} CSV: {e}", path=path)

    header_rows = 1 if has_header else 0
    for col_pos, col in enumerate(frame.columns):
        series = frame[col]
        numeric = pd.to_numeric(series, errors="coerce")
        # cells must be finite; to_numeric accepts inf
        bad = np.flatnonzero(~np.isfinite(numeric.to_numpy(dtype=np.float64)))
        if bad.size:
            row = int(bad[0])
            column = str(col) if has_header else str(col_pos + 1)
            kind = "non-numeric" if pd.isna(numeric.iloc[row]) else "non-finite"
            raise NonNumericCellError(
                f"{kind} cell {series.iloc[row]!r} in {what}",
                path=path, row=row + 1 + header_rows, column=column,
            )
        if not pd.api.types.is_numeric_dtype(series):
            frame[col] = numeric
    return frame


def load(manifest: DatasetManifest) -> MultiViewDataset:
    """
    Read every view and the labels declared in the manifest.

    Returns:
        MultiViewDataset with validated shapes and 0-based integer labels
    """
    views: List[np.ndarray] = []
    n_rows: Optional[int] = None
    first_path = None

    for entry in manifest.views:
        frame = _read_numeric_csv(entry.csv_path, manifest.delimiter, manifest.has_header, f"view '{entry.name}'")
        if frame.shape[1] != entry.dim:
            raise DimMismatchError(
                f"view '{entry.name}' has {frame.shape[1]} columns but dim {entry.dim} is declared",
                path=entry.csv_path,
            )
        if n_rows is None:
            n_rows, first_path = frame.shape[0], entry.csv_path
        elif frame.shape[0] != n_rows:
            raise RowCountMismatchError(
                f"view '{entry.name}' has {frame.shape[0]} rows, {first_path} has {n_rows}",
                path=entry.csv_path,
            )
        views.append(frame.to_numpy(dtype=np.float64))
        logger.info(f"Loaded view '{entry.name}': {frame.shape[0]} x {frame.shape[1]} from {entry.csv_path}")

    labels = None
    if manifest.labels_path is not None:
        labels = _load_labels(manifest.labels_path, manifest, n_rows)

    return MultiViewDataset(
        views=views,
        labels=labels,
        n_classes=manifest.n_classes,
        name=manifest.name,
        view_names=[v.name for v in manifest.views],
    )


def _load_labels(path: str, manifest: DatasetManifest, n_rows: int) -> np.ndarray:
    frame = _read_numeric_csv(path, manifest.delimiter, manifest.has_header, "labels")
    header_rows = 1 if manifest.has_header else 0
    if frame.shape[1] != 1:
        raise DimMismatchError(f"labels file must have one column, found {frame.shape[1]}", path=path)
    if frame.shape[0] != n_rows:
        raise RowCountMismatchError(f"labels have {frame.shape[0]} rows, views have {n_rows}", path=path)

    raw = frame.iloc[:, 0].to_numpy(dtype=np.float64)
    column = str(frame.columns[0]) if manifest.has_header else "1"
    for row, value in enumerate(raw):
        if value != np.floor(value):
            raise NonNumericCellError(f"label {value} is not an integer", path=path,
                                      row=row + 1 + header_rows, column=column)
        if value < 0 or value >= manifest.n_classes:
            raise LabelRangeError(f"label {int(value)} outside [0, {manifest.n_classes})", path=path,
                                  row=row + 1 + header_rows, column=column)
    return raw.astype(np.int64)


def save_dataset(dataset: MultiViewDataset, out_dir: str, name: Optional[str] = None) -> str:
    """Write view CSVs, labels CSV and manifest; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    name = name or dataset.name
    entries = []
    for view_name, matrix in zip(dataset.view_names, dataset.views):
        path = os.path.join(out_dir, f"{name}_{view_name}.csv")
        pd.DataFrame(matrix).to_csv(path, header=False, index=False)
        entries.append(ViewEntry(name=view_name, csv_path=path, dim=matrix.shape[1]))

    labels_path = None
    if dataset.labels is not None:
        labels_path = os.path.join(out_dir, f"{name}_labels.csv")
        pd.DataFrame(dataset.labels).to_csv(labels_path, header=False, index=False)

    manifest = DatasetManifest(name=name, views=entries, labels_path=labels_path, n_classes=dataset.n_classes)
    manifest_path = os.path.join(out_dir, f"{name}_manifest.json")
    manifest.to_json(manifest_path)
    logger.info(f"Dataset '{name}' saved to {out_dir} ({dataset.n_samples} samples, {dataset.n_views} views)")
    return manifest_path


# ============================================================================
# PREPROCESSING
# ============================================================================

@dataclass
class FeatureStats:
    means: List[np.ndarray]
    stds: List[np.ndarray]


def feature_stats(dataset: MultiViewDataset, mask: Optional[np.ndarray] = None) -> FeatureStats:
    rows = dataset.train_mask if mask is None else mask
    source = dataset if rows is None else dataset.subset(rows)
    if source.n_samples == 0:
        raise ContractError("standardization statistics need a nonempty split")
    return FeatureStats(
        means=[v.mean(axis=0) for v in source.views],
        stds=[v.std(axis=0) for v in source.views],
    )


def standardize(dataset: MultiViewDataset, stats_from: Optional[np.ndarray] = None,
                stats: Optional[FeatureStats] = None) -> MultiViewDataset:
    """
    Z-score every feature with statistics from one split.

    Args:
        dataset: dataset to transform (masks are carried over)
        stats_from: boolean mask of the statistics split; defaults to the
                    training mask, or all rows when there is none
        stats: precomputed statistics, overriding stats_from

    Features with std < 1e-12 are only mean-centered.
    """
    stats = stats or feature_stats(dataset, stats_from)
    views = []
    for v, mean, std in zip(dataset.views, stats.means, stats.stds):
        safe = np.where(std < 1e-12, 1.0, std)
        views.append((v - mean) / safe)
    return MultiViewDataset(
        views=views,
        labels=dataset.labels,
        n_classes=dataset.n_classes,
        name=dataset.name,
        view_names=list(dataset.view_names),
        train_mask=dataset.train_mask,
        test_mask=dataset.test_mask,
    )


def split(dataset: MultiViewDataset, test_fraction: float = config.TEST_FRACTION,
          seed: int = config.SEED) -> MultiViewDataset:
    """
    Seeded stratified split; returns the dataset with train/test masks set.

    Each class contributes round(fraction * count) test samples, kept
    within [1, count - 1].
    """
    if dataset.labels is None:
        raise ContractError("stratified split needs labels")
    if not 0.0 < test_fraction < 1.0:
        raise ContractError(f"test_fraction must lie in (0, 1), got {test_fraction}")

    rng = np.random.default_rng(seed)
    test_mask = np.zeros(dataset.n_samples, dtype=bool)
    for cls in np.unique(dataset.labels):
        members = np.flatnonzero(dataset.labels == cls)
        if members.size < 2:
            raise ContractError(f"class {cls} has {members.size} sample; stratified split needs at least 2")
        n_test = int(np.floor(test_fraction * members.size + 0.5))
        n_test = min(max(n_test, 1), members.size - 1)
        test_mask[rng.permutation(members)[:n_test]] = True

    logger.info(f"Split '{dataset.name}': {int((~test_mask).sum())} train / {int(test_mask.sum())} test")
    return MultiViewDataset(
        views=dataset.views,
        labels=dataset.labels,
        n_classes=dataset.n_classes,
        name=dataset.name,
        view_names=list(dataset.view_names),
        train_mask=~test_mask,
        test_mask=test_mask,
    )


# ============================================================================
# MINIATURE EXAMPLE DATASET
# ============================================================================

MINI_DIMS = (6, 4)
MINI_SAMPLES = 60
MINI_CLASSES = 3


def make_miniature_dataset(seed: int = 0) -> MultiViewDataset:
    """2 views, 60 samples, 3 well-separated classes (20 each)."""
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(MINI_CLASSES), MINI_SAMPLES // MINI_CLASSES)
    views = []
    for dim in MINI_DIMS:
        centers = rng.normal(0.0, 1.0, size=(MINI_CLASSES, dim))
        centers *= 4.0 / np.linalg.norm(centers, axis=1, keepdims=True)
        views.append(centers[labels] + rng.normal(0.0, 0.3, size=(labels.size, dim)))
    order = rng.permutation(labels.size)
    return MultiViewDataset(
        views=[v[order] for v in views],
        labels=labels[order],
        n_classes=MINI_CLASSES,
        name="mini",
        view_names=["view1", "view2"],
    )


def write_miniature_dataset(out_dir: str, seed: int = 0) -> str:
    return save_dataset(make_miniature_dataset(seed), out_dir, name="mini")


def prepare(dataset: MultiViewDataset, seed: int = config.SEED,
            test_fraction: float = config.TEST_FRACTION) -> MultiViewDataset:
    """Stratified split (when labelled) then z-scoring with training-split statistics."""
    if dataset.labels is not None:
        dataset = split(dataset, test_fraction, seed)
    return standardize(dataset)


def load_prepared(manifest_path: str, seed: int = config.SEED,
                  test_fraction: float = config.TEST_FRACTION) -> MultiViewDataset:
    return prepare(load(DatasetManifest.from_json(manifest_path)), seed, test_fraction)


def read_matrix(path: str, delimiter: str = config.CSV_DELIMITER, has_header: bool = False) -> np.ndarray:
    """A standalone numeric CSV as an N x d float matrix."""
    return _read_numeric_csv(path, delimiter, has_header, "matrix").to_numpy(dtype=np.float64)
