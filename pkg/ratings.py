"""
Rating data model: CSV ingestion, seeded splitting and baseline statistics
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy import sparse

from errors import ConfigError, DataError
from utils import round_half_up, validate_scale

logger = logging.getLogger(__name__)

DEFAULT_SCALE = (1.0, 5.0)
RATINGS_HEADER = ["user_id", "item_id", "rating"]
PAIRS_HEADER = ["user_id", "item_id"]
PREDICTIONS_HEADER = ["user_id", "item_id", "prediction"]


class Rating(NamedTuple):
    user: int
    item: int
    value: float


class SparseIndex(NamedTuple):
    """Compressed rows: entity e owns indices/values[indptr[e]:indptr[e + 1]]"""
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray

    def row(self, entity: int):
        """Return the (indices, values) views of one entity"""
        start, end = self.indptr[entity], self.indptr[entity + 1]
        return self.indices[start:end], self.values[start:end]


def _build_index(rows, cols, values, num_rows, num_cols) -> SparseIndex:
    """CSR view with column indices sorted inside every row; explicit zero ratings are kept"""
    matrix = sparse.csr_matrix((values, (rows, cols)), shape=(num_rows, num_cols))
    matrix.sort_indices()
    return SparseIndex(
        _frozen(matrix.indptr.astype(np.int64)),
        _frozen(matrix.indices.astype(np.int64)),
        _frozen(matrix.data.astype(np.float64)),
    )


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class RatingDataset:
    """Immutable sparse set of (user, item, rating) triples with per-user/per-item indexes"""

    def __init__(self, users, items, values, num_users, num_items,
                 scale=DEFAULT_SCALE, user_ids=None, item_ids=None):
        users = np.asarray(users, dtype=np.int64).copy()
        items = np.asarray(items, dtype=np.int64).copy()
        values = np.asarray(values, dtype=np.float64).copy()
        self.scale = validate_scale(scale)
        self.num_users = int(num_users)
        self.num_items = int(num_items)

        if not (users.shape == items.shape == values.shape) or users.ndim != 1:
            raise DataError("users, items and values must be 1-d arrays of equal length")
        if users.size and (users.min() < 0 or users.max() >= self.num_users):
            raise DataError(f"user index out of range [0, {self.num_users})")
        if items.size and (items.min() < 0 or items.max() >= self.num_items):
            raise DataError(f"item index out of range [0, {self.num_items})")
        if not np.all(np.isfinite(values)):
            raise DataError("ratings must be finite numbers")
        r_min, r_max = self.scale
        outside = (values < r_min) | (values > r_max)
        if outside.any():
            first = int(np.flatnonzero(outside)[0])
            raise DataError(
                f"rating {values[first]} for (user {users[first]}, item {items[first]}) "
                f"is outside the scale [{r_min}, {r_max}]"
            )
        keys = users * self.num_items + items
        unique_keys, counts = np.unique(keys, return_counts=True)
        if (counts > 1).any():
            key = int(unique_keys[np.argmax(counts > 1)])
            raise DataError(f"duplicate rating for (user {key // self.num_items}, item {key % self.num_items})")

        self.users = _frozen(users)
        self.items = _frozen(items)
        self.values = _frozen(values)
        self.by_user = _build_index(users, items, values, self.num_users, self.num_items)
        self.by_item = _build_index(items, users, values, self.num_items, self.num_users)
        self.user_ids = None if user_ids is None else list(user_ids)
        self.item_ids = None if item_ids is None else list(item_ids)

    @classmethod
    def from_triples(cls, triples, num_users=None, num_items=None, scale=DEFAULT_SCALE):
        """Build a dataset from (user, item, value) index triples"""
        triples = list(triples)
        users = np.array([t[0] for t in triples], dtype=np.int64)
        items = np.array([t[1] for t in triples], dtype=np.int64)
        values = np.array([t[2] for t in triples], dtype=np.float64)
        if num_users is None:
            num_users = int(users.max()) + 1 if users.size else 0
        if num_items is None:
            num_items = int(items.max()) + 1 if items.size else 0
        return cls(users, items, values, num_users, num_items, scale)

    def __len__(self):
        return int(self.values.size)

    def __iter__(self):
        for u, i, r in zip(self.users, self.items, self.values):
            yield Rating(int(u), int(i), float(r))

    def __repr__(self):
        return f"RatingDataset(users={self.num_users}, items={self.num_items}, ratings={len(self)})"

    @property
    def ratings(self):
        return list(self)

    def keys(self) -> np.ndarray:
        """Flat (user, item) keys, unique per rating"""
        return self.users * self.num_items + self.items

    def subset(self, selection) -> "RatingDataset":
        """Keep the selected ratings while sharing dimensions, scale and id tables"""
        return RatingDataset(
            self.users[selection], self.items[selection], self.values[selection],
            self.num_users, self.num_items, self.scale, self.user_ids, self.item_ids,
        )

    def dense(self, fill: float = 0.0) -> np.ndarray:
        """Dense users x items matrix with unrated cells set to fill"""
        matrix = np.full((self.num_users, self.num_items), fill, dtype=np.float64)
        matrix[self.users, self.items] = self.values
        return matrix

    def external_user(self, u: int):
        return self.user_ids[u] if self.user_ids is not None else u

    def external_item(self, i: int):
        return self.item_ids[i] if self.item_ids is not None else i


@dataclass(frozen=True)
class TrainValSplit:
    train: RatingDataset
    validation: RatingDataset
    seed: int
    fraction: float


@dataclass(frozen=True)
class BaselineStats:
    global_mean: float
    user_means: np.ndarray
    item_means: np.ndarray
    user_offsets: np.ndarray
    item_offsets: np.ndarray
    user_counts: np.ndarray
    item_counts: np.ndarray


# Load functions
def load_csv(path, scale=DEFAULT_SCALE) -> RatingDataset:
    """Load a user_id,item_id,rating CSV and reindex ids to dense 0-based indices"""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"ratings file not found: {path}")
    except pd.errors.EmptyDataError:
        raise DataError(f"no ratings in {path}")
    except pd.errors.ParserError as e:
        raise DataError(f"malformed ratings file {path}: {e}")

    if list(frame.columns) != RATINGS_HEADER:
        raise DataError(f"expected header {','.join(RATINGS_HEADER)} in {path}, got {','.join(frame.columns)}")

    # Header is line 1 and blank lines are kept as rows, so data row k sits on line k + 2
    missing = pd.DataFrame({c: frame[c].isna() | (frame[c].str.strip() == "") for c in RATINGS_HEADER})
    empty_line = missing.all(axis=1).to_numpy()
    line_numbers = frame.index.to_numpy()[~empty_line] + 2
    frame = frame[~empty_line].reset_index(drop=True)
    missing = missing[~empty_line].reset_index(drop=True)
    if frame.empty:
        raise DataError(f"no ratings in {path}")

    for column in RATINGS_HEADER:
        blank = missing[column].to_numpy()
        if blank.any():
            raise DataError(f"malformed line {line_numbers[blank][0]} in {path}: missing {column}")

    values = pd.to_numeric(frame["rating"].str.strip(), errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise DataError(
            f"malformed line {line_numbers[row]} in {path}: rating {frame['rating'].iloc[row]!r} is not a number"
        )

    r_min, r_max = validate_scale(scale)
    outside = (values < r_min) | (values > r_max)
    if outside.any():
        row = int(np.flatnonzero(outside)[0])
        raise DataError(f"line {line_numbers[row]} in {path}: rating {values[row]} outside the scale [{r_min}, {r_max}]")

    user_keys = frame["user_id"].str.strip()
    item_keys = frame["item_id"].str.strip()
    duplicated = pd.DataFrame({"u": user_keys, "i": item_keys}).duplicated(keep="first").to_numpy()
    if duplicated.any():
        row = int(np.flatnonzero(duplicated)[0])
        raise DataError(
            f"line {line_numbers[row]} in {path}: duplicate rating for user {user_keys.iloc[row]}, item {item_keys.iloc[row]}"
        )

    users, user_ids = pd.factorize(user_keys, sort=False)
    items, item_ids = pd.factorize(item_keys, sort=False)
    dataset = RatingDataset(users, items, values, len(user_ids), len(item_ids), (r_min, r_max),
                            user_ids=list(user_ids), item_ids=list(item_ids))
    logger.info(f"Loaded {len(dataset)} ratings from {path} ({dataset.num_users} users, {dataset.num_items} items)")
    return dataset


def load_pairs(path, dataset: RatingDataset):
    """Load a user_id,item_id query CSV and map ids onto the dataset's indices"""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, usecols=PAIRS_HEADER)
    except FileNotFoundError:
        raise DataError(f"pairs file not found: {path}")
    except (ValueError, pd.errors.ParserError) as e:
        raise DataError(f"malformed pairs file {path}: {e}")

    user_lookup = {str(key): index for index, key in enumerate(dataset.user_ids or range(dataset.num_users))}
    item_lookup = {str(key): index for index, key in enumerate(dataset.item_ids or range(dataset.num_items))}
    users, items = [], []
    for line, (user_key, item_key) in enumerate(zip(frame["user_id"].str.strip(), frame["item_id"].str.strip()), start=2):
        if user_key not in user_lookup or item_key not in item_lookup:
            raise DataError(f"line {line} in {path}: unknown user {user_key!r} or item {item_key!r}")
        users.append(user_lookup[user_key])
        items.append(item_lookup[item_key])
    return np.array(users, dtype=np.int64), np.array(items, dtype=np.int64)


# Save functions
def save_csv(dataset: RatingDataset, path):
    """Write a dataset in the ratings CSV format"""
    frame = pd.DataFrame({
        "user_id": [dataset.external_user(u) for u in dataset.users],
        "item_id": [dataset.external_item(i) for i in dataset.items],
        "rating": dataset.values,
    })
    frame.to_csv(path, index=False, float_format="%.6g", lineterminator="\n")


def save_predictions(path, users, items, predictions, dataset: RatingDataset):
    """Write user_id,item_id,prediction rows with five decimals"""
    frame = pd.DataFrame({
        "user_id": [dataset.external_user(u) for u in users],
        "item_id": [dataset.external_item(i) for i in items],
        "prediction": np.asarray(predictions, dtype=np.float64),
    })
    frame.to_csv(path, index=False, float_format="%.5f", lineterminator="\n")


# Splitting functions
def permutation(n: int, seed: int) -> np.ndarray:
    """Seeded uniform permutation of range(n) (numpy PCG64)"""
    return np.random.Generator(np.random.PCG64(seed)).permutation(n)


def split(dataset: RatingDataset, fraction: float, seed: int) -> TrainValSplit:
    """Seeded train/validation split: the first round(fraction * n) permuted ratings train"""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"split fraction must lie in (0, 1), got {fraction}")
    if len(dataset) == 0:
        raise DataError("cannot split an empty dataset")
    order = permutation(len(dataset), seed)
    n_train = round_half_up(fraction * len(dataset))
    train_idx = np.sort(order[:n_train])
    val_idx = np.sort(order[n_train:])
    return TrainValSplit(dataset.subset(train_idx), dataset.subset(val_idx), seed, fraction)


def kfold_splits(dataset: RatingDataset, folds: int, seed: int):
    """Strict k-fold partition: fold f validates on the f-th slice of one seeded permutation"""
    if folds < 2:
        raise ConfigError(f"k-fold needs at least 2 folds, got {folds}")
    if len(dataset) < folds:
        raise DataError(f"cannot cut {len(dataset)} ratings into {folds} folds")
    order = permutation(len(dataset), seed)
    chunks = np.array_split(order, folds)
    splits = []
    for fold, chunk in enumerate(chunks):
        train_idx = np.sort(np.concatenate([c for f, c in enumerate(chunks) if f != fold]))
        splits.append(TrainValSplit(
            dataset.subset(train_idx), dataset.subset(np.sort(chunk)), seed, (folds - 1) / folds,
        ))
    return splits


# Calculation functions
def baseline_stats(train: RatingDataset) -> BaselineStats:
    """Global, per-user and per-item means plus offsets from the global mean"""
    if len(train) == 0:
        raise DataError("baseline statistics need at least one training rating")
    global_mean = float(np.mean(train.values))
    user_means, user_counts = _grouped_means(train.users, train.values, train.num_users, global_mean)
    item_means, item_counts = _grouped_means(train.items, train.values, train.num_items, global_mean)
    return BaselineStats(
        global_mean=global_mean,
        user_means=_frozen(user_means),
        item_means=_frozen(item_means),
        user_offsets=_frozen(user_means - global_mean),
        item_offsets=_frozen(item_means - global_mean),
        user_counts=_frozen(user_counts),
        item_counts=_frozen(item_counts),
    )


def _grouped_means(groups, values, size, fallback):
    counts = np.bincount(groups, minlength=size)
    sums = np.bincount(groups, weights=values, minlength=size)
    means = np.full(size, fallback, dtype=np.float64)
    rated = counts > 0
    means[rated] = sums[rated] / counts[rated]
    return means, counts
