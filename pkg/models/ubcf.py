"""
User-based collaborative filtering: similarity-weighted neighbor deviations
"""
import logging
import threading
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from errors import ConfigError
from ratings import BaselineStats, RatingDataset, baseline_stats
from similarity import METRICS, SimilarityRows, top_k
from utils import clamp_prediction, rmse

logger = logging.getLogger(__name__)

ROW_CACHE_SIZE = 256


@dataclass
class UbcfModel:
    train: RatingDataset
    stats: BaselineStats
    metric: str = "cosine"
    k: int = 100
    clamp: bool = True
    rows: SimilarityRows = field(default=None, repr=False)
    row_cache: dict = field(default_factory=dict, repr=False)
    # shared with copies from with_neighbors, like the cache it guards
    cache_lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def similarities(self, u: int):
        """Similarity row of user u, cached for repeated single predictions; safe across threads"""
        with self.cache_lock:
            cached = self.row_cache.get(u)
        if cached is not None:
            return cached
        cached = self.rows.row(u)
        with self.cache_lock:
            if u not in self.row_cache:
                if len(self.row_cache) >= ROW_CACHE_SIZE:
                    self.row_cache.pop(next(iter(self.row_cache)))
                self.row_cache[u] = cached
            return self.row_cache[u]

    def with_neighbors(self, k: int) -> "UbcfModel":
        """Same model and similarity cache with a different neighbor count"""
        _check_k(k)
        return replace(self, k=k)


def _check_k(k):
    if k < 1:
        raise ConfigError(f"UBCF needs at least one neighbor, got k={k}")


def fit(train: RatingDataset, metric: str = "cosine", k: int = 100, clamp: bool = True) -> UbcfModel:
    """Prepare user means and the similarity kernel for a training set"""
    if metric not in METRICS:
        raise ConfigError(f"metric must be one of {METRICS}, got {metric!r}")
    _check_k(k)
    stats = baseline_stats(train)
    return UbcfModel(train=train, stats=stats, metric=metric, k=k, clamp=clamp,
                     rows=SimilarityRows(train, "user", metric))


def _aggregate(model: UbcfModel, u: int, m: int, sims, supports, k: int) -> float:
    stats = model.stats
    if stats.user_counts[u] == 0:
        # Cold-start user: item mean, which is the global mean for an unrated item
        return float(stats.item_means[m])
    raters, ratings = model.train.by_item.row(m)
    usable = (raters != u) & (supports[raters] >= 1)
    raters, ratings = raters[usable], ratings[usable]
    if raters.size == 0:
        return float(stats.user_means[u])
    weights = sims[raters]
    chosen = top_k(raters, weights, k)
    weights = weights[chosen]
    deviations = ratings[chosen] - stats.user_means[raters[chosen]]
    denominator = np.sum(np.abs(weights))
    if denominator == 0.0:
        return float(stats.user_means[u])
    return float(stats.user_means[u] + np.sum(weights * deviations) / denominator)


def _finish(model: UbcfModel, value):
    return clamp_prediction(value, model.train.scale) if model.clamp else value


def predict(model: UbcfModel, u: int, m: int) -> float:
    """Predict user u's rating of item m from the k most similar raters of m"""
    sims, supports = model.similarities(u)
    return _finish(model, _aggregate(model, u, m, sims, supports, model.k))


def _by_user(users, items):
    """Group query positions by user so each similarity row is computed once"""
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    order = np.argsort(users, kind="stable")
    boundaries = np.flatnonzero(np.diff(users[order])) + 1
    for group in np.split(order, boundaries):
        if group.size:
            yield int(users[group[0]]), group, items[group]


def predict_many(model: UbcfModel, users, items) -> np.ndarray:
    """Predictions for paired user/item index arrays"""
    out = np.empty(len(users), dtype=np.float64)
    for u, positions, user_items in _by_user(users, items):
        sims, supports = model.rows.row(u)
        out[positions] = [_aggregate(model, u, m, sims, supports, model.k) for m in user_items]
    return _finish(model, out)


def sweep_neighbors(template: UbcfModel, ks, metrics, validation: RatingDataset) -> pd.DataFrame:
    """Validation RMSE for every (metric, k) cell, one similarity row per user and metric"""
    ks = list(ks)
    if not ks:
        raise ConfigError("sweep_neighbors needs at least one neighbor count")
    for k in ks:
        _check_k(k)
    records = []
    for metric in metrics:
        model = template if metric == template.metric else fit(template.train, metric, template.k, template.clamp)
        predictions = np.empty((len(ks), len(validation)), dtype=np.float64)
        for u, positions, user_items in _by_user(validation.users, validation.items):
            sims, supports = model.rows.row(u)
            for row, k in enumerate(ks):
                predictions[row, positions] = [_aggregate(model, u, m, sims, supports, k) for m in user_items]
        for row, k in enumerate(ks):
            report = rmse(_finish(model, predictions[row]), validation.values)
            logger.info(f"UBCF {metric} k={k}: RMSE {report.rmse:.5f}")
            records.append({"metric": metric, "k": k, "rmse": report.rmse, "n": report.n})
    return pd.DataFrame.from_records(records, columns=["metric", "k", "rmse", "n"])
