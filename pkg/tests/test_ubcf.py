from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from errors import ConfigError
from models import ubcf
from ratings import RatingDataset
from utils import rmse


def reference_prediction(train, u, m, metric, k):
    """Aggregation over the k most similar raters of m, computed from a dense matrix"""
    dense = train.dense(np.nan)
    known = ~np.isnan(dense)
    if not known[u].any():
        column = dense[:, m][known[:, m]]
        return column.mean() if column.size else np.nanmean(dense)
    means = np.array([dense[v][known[v]].mean() if known[v].any() else np.nanmean(dense)
                      for v in range(train.num_users)])

    def similarity(a, b):
        both = known[a] & known[b]
        n = int(both.sum())
        x = dense[a, both] - (means[a] if metric == "pearson" else 0.0)
        y = dense[b, both] - (means[b] if metric == "pearson" else 0.0)
        if n < (2 if metric == "pearson" else 1) or not x.any() or not y.any():
            return 0.0, n
        return float(x @ y / (np.sqrt(x @ x) * np.sqrt(y @ y))), n

    candidates = []
    for b in range(train.num_users):
        if b == u or not known[b, m]:
            continue
        value, n = similarity(u, b)
        if n >= 1:
            candidates.append((-value, b))
    chosen = sorted(candidates)[:k]
    denominator = sum(abs(w) for w, _ in chosen)
    if not chosen or denominator == 0:
        return means[u]
    return means[u] + sum(-w * (dense[b, m] - means[b]) for w, b in chosen) / denominator


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("metric", ["pearson", "cosine"])
@pytest.mark.parametrize("k", [1, 3, 100])
def test_matches_reference(make_dataset, seed, metric, k):
    train = make_dataset(15, 10, 0.45, seed=seed, integer=False)
    model = ubcf.fit(train, metric=metric, k=k, clamp=False)
    for u in range(train.num_users):
        for m in range(train.num_items):
            assert ubcf.predict(model, u, m) == pytest.approx(reference_prediction(train, u, m, metric, k), abs=1e-10)


def test_predict_many_matches_predict(make_dataset):
    train = make_dataset(20, 12, 0.3, seed=2)
    model = ubcf.fit(train, metric="pearson", k=5)
    users = np.repeat(np.arange(train.num_users), train.num_items)
    items = np.tile(np.arange(train.num_items), train.num_users)
    single = [ubcf.predict(model, u, m) for u, m in zip(users, items)]
    assert np.allclose(ubcf.predict_many(model, users, items), single, atol=1e-12)


def test_neighbors_at_their_mean_give_the_user_mean():
    # users 1 and 2 rate item 2 at their own mean
    train = RatingDataset.from_triples([
        (0, 0, 4), (0, 1, 2),
        (1, 0, 5), (1, 1, 1), (1, 2, 3),
        (2, 0, 3), (2, 1, 3), (2, 2, 3),
    ])
    model = ubcf.fit(train, metric="cosine", k=10)
    assert ubcf.predict(model, 0, 2) == pytest.approx(3.0, abs=1e-12)


def test_single_neighbor_above_its_mean():
    # user 1 rates item 2 one above its mean of 3; cosine(0, 1) = 1 over the shared item
    train = RatingDataset.from_triples([(0, 0, 2), (1, 0, 2), (1, 1, 3), (1, 2, 4)])
    model = ubcf.fit(train, metric="cosine", k=5, clamp=False)
    assert ubcf.predict(model, 0, 2) == pytest.approx(2.0 + 1.0, abs=1e-12)


def test_unrated_item_falls_back_to_the_user_mean():
    train = RatingDataset.from_triples([(0, 0, 2), (0, 1, 4), (1, 0, 5)], num_items=3)
    model = ubcf.fit(train, metric="cosine", k=5)
    assert ubcf.predict(model, 0, 2) == 3.0


def test_cold_start_user_gets_the_item_mean():
    train = RatingDataset.from_triples([(0, 0, 2), (1, 0, 4), (1, 1, 5)], num_users=3, num_items=3)
    model = ubcf.fit(train, metric="pearson", k=5)
    assert ubcf.predict(model, 2, 0) == 3.0
    # neither the user nor the item has ratings
    assert ubcf.predict(model, 2, 2) == pytest.approx(11 / 3)


def test_clamped_predictions_stay_in_scale(make_dataset):
    train = make_dataset(30, 20, 0.3, seed=7)
    model = ubcf.fit(train, metric="pearson", k=10, clamp=True)
    users = np.repeat(np.arange(train.num_users), train.num_items)
    items = np.tile(np.arange(train.num_items), train.num_users)
    predictions = ubcf.predict_many(model, users, items)
    assert np.all((predictions >= 1.0) & (predictions <= 5.0))


def test_unclamped_prediction_is_a_weighted_mean_of_deviations(make_dataset):
    train = make_dataset(25, 15, 0.4, seed=10)
    model = ubcf.fit(train, metric="cosine", k=8, clamp=False)
    means = model.stats.user_means
    for u in range(train.num_users):
        for m in range(train.num_items):
            raters, ratings = train.by_item.row(m)
            others = raters != u
            if not others.any() or model.stats.user_counts[u] == 0:
                continue
            spread = np.max(np.abs(ratings[others] - means[raters[others]]))
            assert abs(ubcf.predict(model, u, m) - means[u]) <= spread + 1e-12


def test_stronger_similarity_pulls_toward_that_neighbor():
    # user 1 keeps a mean of 3 while its agreement with user 0 on items 0 and 1 grows
    def prediction(agreement):
        train = RatingDataset.from_triples([
            (0, 0, 1), (0, 1, 1),
            (1, 0, 1), (1, 1, agreement), (1, 2, 5), (1, 3, 6 - agreement),
            (2, 0, 5), (2, 1, 1), (2, 2, 1),
        ], scale=(0.0, 5.0))
        return ubcf.predict(ubcf.fit(train, metric="cosine", k=2, clamp=False), 0, 2)

    values = [prediction(a) for a in (5.0, 3.0, 1.0)]
    assert values[0] < values[1] < values[2]


def test_with_neighbors_shares_the_cache(make_dataset):
    train = make_dataset(12, 9, 0.5, seed=1)
    model = ubcf.fit(train, k=2)
    ubcf.predict(model, 0, 0)
    wider = model.with_neighbors(6)
    assert wider.row_cache is model.row_cache
    assert wider.cache_lock is model.cache_lock
    assert wider.k == 6
    with pytest.raises(ConfigError):
        model.with_neighbors(0)


def test_concurrent_predictions_match_serial(make_dataset, monkeypatch):
    monkeypatch.setattr(ubcf, "ROW_CACHE_SIZE", 8)
    train = make_dataset(40, 12, 0.5, seed=4)
    queries = [(u, m) for u in range(40) for m in range(12)] * 3
    serial = ubcf.fit(train, k=5)
    expected = [ubcf.predict(serial, u, m) for u, m in queries]
    model = ubcf.fit(train, k=5)
    with ThreadPoolExecutor(max_workers=8) as pool:
        results = list(pool.map(lambda query: ubcf.predict(model, *query), queries))
    assert results == expected
    assert len(model.row_cache) <= 8


def test_sweep_neighbors_table(make_dataset):
    data = make_dataset(30, 20, 0.4, seed=3)
    train, validation = data.subset(np.arange(0, len(data), 2)), data.subset(np.arange(1, len(data), 2))
    template = ubcf.fit(train, metric="cosine", k=100)
    table = ubcf.sweep_neighbors(template, [5, 10, 25, 50, 100], ["pearson", "cosine"], validation)

    assert len(table) == 10
    assert list(table.columns) == ["metric", "k", "rmse", "n"]
    row = table[(table["metric"] == "cosine") & (table["k"] == 10)].iloc[0]
    direct = rmse(ubcf.predict_many(template.with_neighbors(10), validation.users, validation.items), validation.values)
    assert row["rmse"] == pytest.approx(direct.rmse, abs=1e-12)
    assert row["n"] == len(validation)


def test_sweep_is_deterministic(make_dataset):
    data = make_dataset(20, 15, 0.4, seed=4)
    train, validation = data.subset(np.arange(0, len(data), 3)), data.subset(np.arange(1, len(data), 3))
    template = ubcf.fit(train)
    first = ubcf.sweep_neighbors(template, [3, 7], ["pearson"], validation)
    second = ubcf.sweep_neighbors(template, [3, 7], ["pearson"], validation)
    assert first.equals(second)


@pytest.mark.parametrize("kwargs", [{"k": 0}, {"metric": "jaccard"}])
def test_fit_rejects_bad_settings(tiny, kwargs):
    with pytest.raises(ConfigError):
        ubcf.fit(tiny, **kwargs)
