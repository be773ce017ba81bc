import numpy as np
import pytest

from errors import ConfigError, DataError
from ratings import (
    RatingDataset, baseline_stats, kfold_splits, load_csv, load_pairs,
    permutation, save_csv, save_predictions, split,
)


def keyset(dataset):
    return set(dataset.keys().tolist())


# Loading
def test_load_csv_reindexes_ids(ratings_csv):
    path = ratings_csv("user_id,item_id,rating\nu1,m1,4\nu2,m1,3\n")
    dataset = load_csv(path)

    assert (dataset.num_users, dataset.num_items, len(dataset)) == (2, 1, 2)
    assert dataset.user_ids == ["u1", "u2"]
    assert dataset.item_ids == ["m1"]
    assert sorted(r.value for r in dataset) == [3.0, 4.0]


def test_load_csv_accepts_decimal_ratings(ratings_csv):
    dataset = load_csv(ratings_csv("user_id,item_id,rating\na,x,3.5\nb,y,1\n"))
    assert dataset.values.tolist() == [3.5, 1.0]


def test_load_csv_without_ratings(ratings_csv):
    with pytest.raises(DataError, match="no ratings"):
        load_csv(ratings_csv("user_id,item_id,rating\n"))


def test_load_csv_duplicate_pair(ratings_csv):
    with pytest.raises(DataError, match="line 3.*duplicate"):
        load_csv(ratings_csv("user_id,item_id,rating\nu1,m1,4\nu1,m1,2\n"))


@pytest.mark.parametrize("body,line", [
    ("u1,m1,4\nu2,m1,abc\n", 3),
    ("u1,m1,4\nu2,,3\n", 3),
    ("u1,m1,\n", 2),
    ("u1,m1,4\n\nu2,m1,x\n", 4),
    ("\nu1,m1,4\n\n\nu1,m1,2\n", 6),
    ("u1,m1,4\n   \nu2,m1,9\n", 4),
])
def test_load_csv_malformed_line_reports_line_number(ratings_csv, body, line):
    with pytest.raises(DataError, match=f"line {line} in "):
        load_csv(ratings_csv("user_id,item_id,rating\n" + body))


def test_load_csv_skips_blank_lines(ratings_csv):
    dataset = load_csv(ratings_csv("user_id,item_id,rating\n\nu1,m1,4\n\nu2,m1,3\n\n"))
    assert dataset.values.tolist() == [4.0, 3.0]


def test_load_csv_out_of_scale(ratings_csv):
    with pytest.raises(DataError, match="outside the scale"):
        load_csv(ratings_csv("user_id,item_id,rating\nu1,m1,6\n"))


def test_load_csv_wrong_header(ratings_csv):
    with pytest.raises(DataError, match="expected header"):
        load_csv(ratings_csv("user,item,stars\nu1,m1,4\n"))


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_csv(tmp_path / "absent.csv")


def test_save_csv_loads_back_identically(tmp_path, ratings_csv):
    source = load_csv(ratings_csv("user_id,item_id,rating\nb,y,2\na,x,4.5\nb,x,1\n"))
    target = tmp_path / "copy.csv"
    save_csv(source, target)
    again = load_csv(target)

    assert again.user_ids == source.user_ids
    assert again.item_ids == source.item_ids
    assert np.array_equal(again.values, source.values)


def test_load_pairs_and_save_predictions(tmp_path, ratings_csv):
    dataset = load_csv(ratings_csv("user_id,item_id,rating\nu1,m1,4\nu2,m2,3\n"))
    pairs = ratings_csv("user_id,item_id\nu2,m1\nu1,m2\n", name="pairs.csv")
    users, items = load_pairs(pairs, dataset)
    assert users.tolist() == [1, 0]
    assert items.tolist() == [0, 1]

    out = tmp_path / "predictions.csv"
    save_predictions(out, users, items, [3.123456, 4.0], dataset)
    assert out.read_text().splitlines() == [
        "user_id,item_id,prediction",
        "u2,m1,3.12346",
        "u1,m2,4.00000",
    ]


def test_load_pairs_unknown_id(ratings_csv):
    dataset = load_csv(ratings_csv("user_id,item_id,rating\nu1,m1,4\n"))
    with pytest.raises(DataError, match="unknown user"):
        load_pairs(ratings_csv("user_id,item_id\nu9,m1\n", name="pairs.csv"), dataset)


# Dataset invariants
def test_dataset_rejects_duplicates():
    with pytest.raises(DataError, match="duplicate"):
        RatingDataset.from_triples([(0, 0, 3), (0, 0, 4)])


def test_dataset_rejects_out_of_range_index():
    with pytest.raises(DataError, match="out of range"):
        RatingDataset([0, 3], [0, 0], [3, 4], num_users=2, num_items=1)


def test_dataset_is_read_only(tiny):
    with pytest.raises(ValueError):
        tiny.values[0] = 1.0


def test_indexes_agree_with_the_dense_matrix(make_dataset):
    dataset = make_dataset(25, 15, 0.3, seed=8)
    dense = dataset.dense(fill=np.nan)
    for u in range(dataset.num_users):
        items, values = dataset.by_user.row(u)
        assert np.array_equal(items, np.flatnonzero(~np.isnan(dense[u])))
        assert np.array_equal(values, dense[u, items])
    for i in range(dataset.num_items):
        users, values = dataset.by_item.row(i)
        assert np.array_equal(users, np.flatnonzero(~np.isnan(dense[:, i])))
        assert np.array_equal(values, dense[users, i])
    assert dataset.by_user.indptr[-1] == dataset.by_item.indptr[-1] == len(dataset)


def test_zero_ratings_stay_in_the_indexes():
    dataset = RatingDataset.from_triples([(0, 1, 0.0), (1, 0, -2.0), (1, 1, 0.0)], scale=(-5.0, 5.0))
    items, values = dataset.by_user.row(1)
    assert items.tolist() == [0, 1]
    assert values.tolist() == [-2.0, 0.0]
    assert dataset.by_item.row(1)[0].tolist() == [0, 1]


def test_by_user_rows_are_sorted_by_item(make_dataset):
    dataset = make_dataset(30, 20, 0.3, seed=4)
    for u in range(dataset.num_users):
        items, _ = dataset.by_user.row(u)
        assert np.all(np.diff(items) > 0)


# Splitting
def test_split_sizes(make_dataset):
    dataset = make_dataset(20, 20, 1.0, seed=0)
    dataset = dataset.subset(np.arange(100))
    data_split = split(dataset, 0.9, seed=3)
    assert (len(data_split.train), len(data_split.validation)) == (90, 10)


def test_split_rounds_half_up(make_dataset):
    dataset = make_dataset(5, 5, 1.0, seed=0).subset(np.arange(5))
    assert len(split(dataset, 0.5, seed=0).train) == 3


def test_split_is_deterministic(make_dataset):
    dataset = make_dataset(40, 30, 0.2, seed=1)
    first, second = split(dataset, 0.8, seed=11), split(dataset, 0.8, seed=11)
    assert np.array_equal(first.train.keys(), second.train.keys())
    assert np.array_equal(first.validation.keys(), second.validation.keys())


def test_split_follows_seeded_permutation(make_dataset):
    dataset = make_dataset(10, 10, 1.0, seed=2).subset(np.arange(10))
    seed = 17
    order = np.random.Generator(np.random.PCG64(seed)).permutation(10)
    data_split = split(dataset, 0.5, seed)

    assert keyset(data_split.train) == set(dataset.keys()[order[:5]].tolist())
    assert np.array_equal(permutation(10, seed), order)


@pytest.mark.parametrize("seed", [0, 1, 99])
@pytest.mark.parametrize("fraction", [0.1, 0.5, 0.9])
def test_split_partitions_the_source(make_dataset, seed, fraction):
    dataset = make_dataset(25, 15, 0.3, seed=seed)
    data_split = split(dataset, fraction, seed)
    train, validation = keyset(data_split.train), keyset(data_split.validation)

    assert not train & validation
    assert train | validation == keyset(dataset)


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.2, 1.5])
def test_split_rejects_fraction(tiny, fraction):
    with pytest.raises(ConfigError):
        split(tiny, fraction, seed=0)


def test_kfold_validation_sets_partition_the_source(make_dataset):
    dataset = make_dataset(30, 20, 0.25, seed=5)
    folds = kfold_splits(dataset, 4, seed=8)
    validations = [keyset(f.validation) for f in folds]

    assert set().union(*validations) == keyset(dataset)
    assert sum(len(v) for v in validations) == len(dataset)
    for f in folds:
        assert keyset(f.train) | keyset(f.validation) == keyset(dataset)


# Baselines
def test_baseline_single_rating():
    stats = baseline_stats(RatingDataset.from_triples([(0, 0, 4)], num_users=2, num_items=3))
    assert stats.global_mean == 4.0
    assert np.all(stats.user_offsets == 0)
    assert np.all(stats.item_offsets == 0)


def test_baseline_user_mean():
    stats = baseline_stats(RatingDataset.from_triples([(0, 0, 3), (0, 1, 5), (1, 0, 1)]))
    assert stats.user_means[0] == 4.0
    assert stats.global_mean == 3.0
    assert stats.user_offsets[1] == -2.0


def test_baseline_unrated_user_has_zero_offset():
    stats = baseline_stats(RatingDataset.from_triples([(0, 0, 2), (0, 1, 4)], num_users=3))
    assert stats.user_means[2] == stats.global_mean
    assert stats.user_offsets[2] == 0.0


def test_baseline_weighted_means_sum_to_total(make_dataset):
    dataset = make_dataset(50, 40, 0.15, seed=9, integer=False)
    stats = baseline_stats(dataset)
    total = dataset.values.sum()

    assert np.sum(stats.user_counts * stats.user_means) == pytest.approx(total, rel=1e-9)
    assert np.sum(stats.item_counts * stats.item_means) == pytest.approx(total, rel=1e-9)
    assert len(dataset) * stats.global_mean == pytest.approx(total, rel=1e-9)


def test_baseline_needs_ratings():
    with pytest.raises(DataError):
        baseline_stats(RatingDataset([], [], [], 2, 2))
