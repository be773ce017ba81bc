"""
Pairwise similarity over co-rated supports, shrinkage and top-k neighbor sets
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import pandas as pd
from numba import njit, prange

from errors import ConfigError
from ratings import RatingDataset, baseline_stats

logger = logging.getLogger(__name__)

AXES = ("user", "item")
METRICS = ("pearson", "cosine")


class SimilarityValue(NamedTuple):
    value: float
    support: int


@dataclass(frozen=True)
class NeighborSets:
    """Per-entity neighbor lists in compressed rows, each sorted by weight descending"""
    indptr: np.ndarray
    neighbors: np.ndarray
    weights: np.ndarray
    supports: np.ndarray

    def __len__(self):
        return len(self.indptr) - 1

    def of(self, entity: int):
        """Return the (neighbor ids, weights) of one entity"""
        start, end = self.indptr[entity], self.indptr[entity + 1]
        return self.neighbors[start:end], self.weights[start:end]

    def as_lists(self):
        return [list(zip(*(a.tolist() for a in self.of(e)))) for e in range(len(self))]


# Compiled kernels
@njit(cache=True)
def _co_rated(idx_a, val_a, mean_a, idx_b, val_b, mean_b, min_support):
    """Merge-join two sorted rating rows; returns (similarity, support)"""
    i = 0
    j = 0
    n = 0
    dot = 0.0
    sq_a = 0.0
    sq_b = 0.0
    while i < idx_a.shape[0] and j < idx_b.shape[0]:
        if idx_a[i] == idx_b[j]:
            x = val_a[i] - mean_a
            y = val_b[j] - mean_b
            dot += x * y
            sq_a += x * x
            sq_b += y * y
            n += 1
            i += 1
            j += 1
        elif idx_a[i] < idx_b[j]:
            i += 1
        else:
            j += 1
    if n < min_support or sq_a == 0.0 or sq_b == 0.0:
        return 0.0, n
    return dot / (np.sqrt(sq_a) * np.sqrt(sq_b)), n


@njit(parallel=True, cache=True)
def _similarity_row(a, indptr, indices, values, means, min_support, out_values, out_supports):
    idx_a = indices[indptr[a]:indptr[a + 1]]
    val_a = values[indptr[a]:indptr[a + 1]]
    for b in prange(indptr.shape[0] - 1):
        if b == a:
            out_values[b] = 0.0
            out_supports[b] = 0
            continue
        value, support = _co_rated(
            idx_a, val_a, means[a],
            indices[indptr[b]:indptr[b + 1]], values[indptr[b]:indptr[b + 1]], means[b],
            min_support,
        )
        out_values[b] = value
        out_supports[b] = support


# Similarity functions
def _axis_view(train: RatingDataset, axis: str, metric: str):
    """Rows to compare, the centering means and the minimum support for a metric"""
    if axis not in AXES:
        raise ConfigError(f"axis must be one of {AXES}, got {axis!r}")
    if metric not in METRICS:
        raise ConfigError(f"metric must be one of {METRICS}, got {metric!r}")
    index = train.by_user if axis == "user" else train.by_item
    if metric == "cosine":
        return index, np.zeros(len(index.indptr) - 1), 1
    stats = baseline_stats(train)
    means = stats.user_means if axis == "user" else stats.item_means
    return index, np.ascontiguousarray(means), 2


def _pair(a, b, train, axis, metric) -> SimilarityValue:
    if a == b:
        raise ConfigError("similarity is only defined between distinct entities")
    index, means, min_support = _axis_view(train, axis, metric)
    idx_a, val_a = index.row(a)
    idx_b, val_b = index.row(b)
    value, support = _co_rated(idx_a, val_a, means[a], idx_b, val_b, means[b], min_support)
    return SimilarityValue(float(value), int(support))


def pearson(a: int, b: int, train: RatingDataset, axis: str = "user") -> SimilarityValue:
    """Pearson correlation over co-rated support, centered on each entity's full mean"""
    return _pair(a, b, train, axis, "pearson")


def cosine(a: int, b: int, train: RatingDataset, axis: str = "user") -> SimilarityValue:
    """Cosine of the raw co-rating vectors"""
    return _pair(a, b, train, axis, "cosine")


def shrunk_similarity(rho, n, lambda1: float):
    """Discount a similarity backed by n co-ratings: n / (n + lambda1) * rho"""
    if lambda1 < 0:
        raise ConfigError(f"shrinkage lambda1 must be >= 0, got {lambda1}")
    rho = np.asarray(rho, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        shrunk = np.where(n > 0, n / (n + lambda1) * rho, 0.0)
    return float(shrunk) if shrunk.ndim == 0 else shrunk


class SimilarityRows:
    """Computes one entity's similarities against every entity on an axis"""

    def __init__(self, train: RatingDataset, axis: str, metric: str):
        self.axis = axis
        self.metric = metric
        self.index, self.means, self.min_support = _axis_view(train, axis, metric)
        self.size = len(self.index.indptr) - 1

    def row(self, a: int):
        values = np.empty(self.size, dtype=np.float64)
        supports = np.empty(self.size, dtype=np.int64)
        _similarity_row(a, self.index.indptr, self.index.indices, self.index.values,
                        self.means, self.min_support, values, supports)
        return values, supports


def similarity_row(train: RatingDataset, a: int, axis: str = "user", metric: str = "pearson"):
    """Similarities and supports of entity a against every entity on the axis"""
    return SimilarityRows(train, axis, metric).row(a)


def top_k(candidates: np.ndarray, weights: np.ndarray, k: int) -> np.ndarray:
    """Positions of the k largest weights, ties broken by lower candidate id"""
    order = np.lexsort((candidates, -weights))
    return order[:k]


def build_neighbor_sets(train: RatingDataset, axis: str = "item", metric: str = "pearson",
                        shrink=None, k: int = 1) -> NeighborSets:
    """Top-k most similar entities (support >= 1) for every entity on the axis"""
    if k < 0:
        raise ConfigError(f"neighbor count must be >= 0, got {k}")
    rows = SimilarityRows(train, axis, metric)
    indptr = np.zeros(rows.size + 1, dtype=np.int64)
    neighbors, weights, supports = [], [], []
    for a in range(rows.size):
        values, counts = rows.row(a)
        candidates = np.flatnonzero(counts >= 1)
        candidates = candidates[candidates != a]
        if k == 0 or candidates.size == 0:
            indptr[a + 1] = indptr[a]
            continue
        cand_weights = values[candidates]
        if shrink is not None:
            cand_weights = shrunk_similarity(cand_weights, counts[candidates], shrink)
        chosen = top_k(candidates, cand_weights, k)
        neighbors.append(candidates[chosen])
        weights.append(cand_weights[chosen])
        supports.append(counts[candidates][chosen])
        indptr[a + 1] = indptr[a] + chosen.size
    logger.debug(f"Built {axis} neighbor sets ({metric}, k={k}, shrink={shrink}): {indptr[-1]} pairs")
    return NeighborSets(
        indptr=indptr,
        neighbors=np.concatenate(neighbors) if neighbors else np.zeros(0, dtype=np.int64),
        weights=np.concatenate(weights) if weights else np.zeros(0, dtype=np.float64),
        supports=np.concatenate(supports) if supports else np.zeros(0, dtype=np.int64),
    )


def dump_similarities(train: RatingDataset, path, axis: str = "user", metric: str = "pearson", shrink=None):
    """Write entity_a,entity_b,similarity,support for every pair a < b with support >= 1"""
    rows = SimilarityRows(train, axis, metric)
    frames = []
    for a in range(rows.size):
        values, counts = rows.row(a)
        b = np.flatnonzero(counts >= 1)
        b = b[b > a]
        if b.size == 0:
            continue
        sims = values[b] if shrink is None else shrunk_similarity(values[b], counts[b], shrink)
        frames.append(pd.DataFrame({"entity_a": a, "entity_b": b, "similarity": sims, "support": counts[b]}))
    columns = ["entity_a", "entity_b", "similarity", "support"]
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=columns)
    frame.to_csv(path, index=False, float_format="%.10f", lineterminator="\n")
    return frame
