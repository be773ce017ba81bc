"""
Iterative low-rank matrix completion with item-mean centering.

Unrated cells start at zero on the centered scale. Each iteration replaces the
matrix by its rank-r SVD truncation and then writes the known centered training
entries back in place. Predictions add the item means back.

The matrix is dense (float64): 10^7 cells take about 80 MB, and the first
reconstruction fills every unknown cell anyway.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from errors import ConfigError, DataError, NumericalError
from ratings import RatingDataset
from utils import clamp_prediction, rmse

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SvdFactors:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray


@dataclass(frozen=True)
class LowRankState:
    X: np.ndarray
    item_means: np.ndarray
    rank: int
    iteration: int
    known_users: np.ndarray
    known_items: np.ndarray
    known_values: np.ndarray
    scale: tuple

    def known_mask(self):
        """Training keys with their centered values"""
        return {(int(u), int(i)): float(v) for u, i, v in zip(self.known_users, self.known_items, self.known_values)}


def _check_rank(rank, shape):
    if not 1 <= rank <= min(shape):
        raise ConfigError(f"rank must lie in [1, {min(shape)}], got {rank}")


def center(train: RatingDataset, rank: int = 3) -> LowRankState:
    """Subtract item means from known ratings and zero-fill every other cell"""
    if len(train) == 0:
        raise DataError("iterative matrix factorization needs training ratings")
    _check_rank(rank, (train.num_users, train.num_items))
    global_mean = float(np.mean(train.values))
    counts = np.bincount(train.items, minlength=train.num_items)
    sums = np.bincount(train.items, weights=train.values, minlength=train.num_items)
    item_means = np.full(train.num_items, global_mean)
    rated = counts > 0
    item_means[rated] = sums[rated] / counts[rated]

    centered = train.values - item_means[train.items]
    X = np.zeros((train.num_users, train.num_items), dtype=np.float64)
    X[train.users, train.items] = centered
    return LowRankState(
        X=X, item_means=item_means, rank=rank, iteration=0,
        known_users=train.users, known_items=train.items, known_values=centered,
        scale=train.scale,
    )


def truncated_svd(X: np.ndarray, rank: int) -> SvdFactors:
    """Best rank-r approximation factors (full thin SVD, then truncation)"""
    _check_rank(rank, X.shape)
    if not np.all(np.isfinite(X)):
        raise NumericalError("cannot decompose a matrix with non-finite entries")
    U, S, Vt = np.linalg.svd(X, full_matrices=False)
    return SvdFactors(U=U[:, :rank], S=S[:rank], V=Vt[:rank].T)


def reconstruct(factors: SvdFactors) -> np.ndarray:
    """U diag(S) V^T"""
    return (factors.U * factors.S) @ factors.V.T


def iterate(state: LowRankState, iterations: int, on_iteration=None) -> LowRankState:
    """Alternate rank-r projection and reimposition of known entries `iterations` times"""
    if iterations < 1:
        raise ConfigError(f"iterations must be >= 1, got {iterations}")
    X = state.X.copy()
    for step in range(1, iterations + 1):
        X = reconstruct(truncated_svd(X, state.rank))
        X[state.known_users, state.known_items] = state.known_values
        if on_iteration is not None:
            on_iteration(replace(state, X=X, iteration=state.iteration + step))
    return replace(state, X=X, iteration=state.iteration + iterations)


def fit(train: RatingDataset, rank: int = 3, iterations: int = 20) -> LowRankState:
    """center() then iterate()"""
    return iterate(center(train, rank), iterations)


def predict(state: LowRankState, u: int, i: int, clamp: bool = True) -> float:
    """Un-centered completed entry for (u, i)"""
    value = float(state.X[u, i] + state.item_means[i])
    return clamp_prediction(value, state.scale) if clamp else value


def predict_many(state: LowRankState, users, items, clamp: bool = True) -> np.ndarray:
    values = state.X[users, items] + state.item_means[items]
    return clamp_prediction(values, state.scale) if clamp else values


def sweep_rank_iterations(train: RatingDataset, validation: RatingDataset, ranks, max_iterations: int,
                          clamp: bool = True) -> pd.DataFrame:
    """Validation RMSE after every iteration for every rank"""
    ranks = list(ranks)
    if not ranks:
        raise ConfigError("sweep_rank_iterations needs at least one rank")
    records = []

    for rank in ranks:
        def record(state, rank=rank):
            predictions = predict_many(state, validation.users, validation.items, clamp)
            report = rmse(predictions, validation.values)
            logger.info(f"IMF rank={rank} iteration={state.iteration}: RMSE {report.rmse:.5f}")
            records.append({"rank": rank, "iteration": state.iteration, "rmse": report.rmse})

        iterate(center(train, rank), max_iterations, on_iteration=record)
    return pd.DataFrame.from_records(records, columns=["rank", "iteration", "rmse"])
