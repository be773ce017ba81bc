"""
Integrated neighborhood + latent factor model trained by stochastic gradient descent.

    r_ui = mu + b_u + b_i + q_i . (p_u + |N(u)|^-1/2 sum_{j in N(u)} y_j)
         + |R^k(i;u)|^-1/2 sum_{t in R^k(i;u)} (r_ut - b_ut) w_it
         + |N^k(i;u)|^-1/2 sum_{t in N^k(i;u)} c_it

N(u) is the set of items u rated (implicit feedback is derived from the explicit
ratings), and R^k(i;u) = N^k(i;u) are the neighbors of i that u rated. An empty
set contributes zero. The neighbor weights w and c live in flat arrays laid out
exactly like the item neighbor lists.
"""
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit

from errors import ConfigError, DataError, NumericalError
from models.iterative_mf import center, truncated_svd
from ratings import RatingDataset, SparseIndex, baseline_stats
from similarity import NeighborSets, build_neighbor_sets
from utils import clamp_prediction, rmse

logger = logging.getLogger(__name__)

PARAMS_FORMAT_VERSION = 1
NEIGHBOR_BASELINES = ("current", "frozen")
NEIGHBOR_INITS = ("similarity", "zero")


@dataclass(frozen=True)
class HyperParams:
    lambda1: float = 600.0
    lambda2: float = 0.005
    lambda3: float = 0.015
    lambda4: float = 0.015
    gamma1: float = 0.007
    gamma2: float = 0.007
    gamma3: float = 0.001
    gamma_decay: float = 0.9
    k: int = 300
    K: int = 10
    epochs: int = 6
    neighbor_baseline: str = "current"
    init_neighbor_weights: str = "similarity"

    def validate(self) -> "HyperParams":
        for name in ("lambda1", "lambda2", "lambda3", "lambda4"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("gamma1", "gamma2", "gamma3"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0 < self.gamma_decay <= 1:
            raise ConfigError(f"gamma_decay must lie in (0, 1], got {self.gamma_decay}")
        for name in ("k", "K", "epochs"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.neighbor_baseline not in NEIGHBOR_BASELINES:
            raise ConfigError(f"neighbor_baseline must be one of {NEIGHBOR_BASELINES}")
        if self.init_neighbor_weights not in NEIGHBOR_INITS:
            raise ConfigError(f"init_neighbor_weights must be one of {NEIGHBOR_INITS}")
        return self


@dataclass
class IntegratedParams:
    mu: float
    b_user: np.ndarray
    b_item: np.ndarray
    q: np.ndarray
    p: np.ndarray
    y: np.ndarray
    w: np.ndarray
    c: np.ndarray
    item_neighbors: NeighborSets
    user_rated: SparseIndex
    scale: tuple
    frozen_offsets: tuple = field(default=None, repr=False)

    @property
    def num_factors(self) -> int:
        return self.q.shape[1]

    def baseline_arrays(self):
        """Offsets used for b_ut = mu + b_u + b_t inside the neighborhood term"""
        if self.frozen_offsets is not None:
            return self.frozen_offsets
        return self.b_user, self.b_item

    def copy(self) -> "IntegratedParams":
        return IntegratedParams(
            mu=self.mu, b_user=self.b_user.copy(), b_item=self.b_item.copy(),
            q=self.q.copy(), p=self.p.copy(), y=self.y.copy(), w=self.w.copy(), c=self.c.copy(),
            item_neighbors=self.item_neighbors, user_rated=self.user_rated, scale=self.scale,
            frozen_offsets=self.frozen_offsets,
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in (self.b_user, self.b_item, self.q, self.p, self.y, self.w, self.c))


class EpochReport(NamedTuple):
    epoch: int
    order: np.ndarray
    learning_rates: tuple
    training_rmse: float


# Compiled kernels
@njit(cache=True)
def _find(sorted_ids, target):
    pos = np.searchsorted(sorted_ids, target)
    if pos < sorted_ids.shape[0] and sorted_ids[pos] == target:
        return pos
    return -1


@njit(cache=True)
def _predict(u, i, mu, b_user, b_item, q, p, y, w, c, nb_indptr, nb_ids,
             rated_indptr, rated_items, rated_values, base_user, base_item, z, slots, residuals):
    """Prediction for (u, i); leaves z = p_u + |N(u)|^-1/2 sum y_j and the R^k(i;u)
    pair slots with their residuals r_ut - b_ut in the scratch buffers"""
    n_factors = q.shape[1]
    start = rated_indptr[u]
    end = rated_indptr[u + 1]
    for f in range(n_factors):
        z[f] = 0.0
    for s in range(start, end):
        j = rated_items[s]
        for f in range(n_factors):
            z[f] += y[j, f]
    norm = 1.0 / np.sqrt(end - start) if end > start else 0.0
    for f in range(n_factors):
        z[f] = p[u, f] + norm * z[f]

    pred = mu + b_user[u] + b_item[i]
    for f in range(n_factors):
        pred += q[i, f] * z[f]

    items_u = rated_items[start:end]
    m = 0
    for s in range(nb_indptr[i], nb_indptr[i + 1]):
        t = nb_ids[s]
        pos = _find(items_u, t)
        if pos >= 0:
            slots[m] = s
            residuals[m] = rated_values[start + pos] - (mu + base_user[u] + base_item[t])
            m += 1
    if m > 0:
        norm_k = 1.0 / np.sqrt(m)
        explicit = 0.0
        implicit = 0.0
        for s in range(m):
            explicit += residuals[s] * w[slots[s]]
            implicit += c[slots[s]]
        pred += norm_k * explicit + norm_k * implicit
    return pred, m


@njit(cache=True)
def _sgd_update(u, i, r, g1, g2, g3, l2, l3, l4, mu, b_user, b_item, q, p, y, w, c,
                nb_indptr, nb_ids, rated_indptr, rated_items, rated_values, base_user, base_item,
                z, slots, residuals, q_old, p_old):
    """One sample: error from pre-step values, then the seven update groups in order"""
    pred, m = _predict(u, i, mu, b_user, b_item, q, p, y, w, c, nb_indptr, nb_ids,
                       rated_indptr, rated_items, rated_values, base_user, base_item, z, slots, residuals)
    e = r - pred
    n_factors = q.shape[1]

    bu = b_user[u]
    bi = b_item[i]
    b_user[u] = bu + g1 * (e - l2 * bu)
    b_item[i] = bi + g1 * (e - l2 * bi)

    for f in range(n_factors):
        q_old[f] = q[i, f]
        p_old[f] = p[u, f]
    for f in range(n_factors):
        q[i, f] = q_old[f] + g2 * (e * z[f] - l3 * q_old[f])
    for f in range(n_factors):
        p[u, f] = p_old[f] + g2 * (e * q_old[f] - l3 * p_old[f])

    start = rated_indptr[u]
    end = rated_indptr[u + 1]
    if end > start:
        norm = 1.0 / np.sqrt(end - start)
        for s in range(start, end):
            j = rated_items[s]
            for f in range(n_factors):
                y[j, f] = y[j, f] + g2 * (e * norm * q_old[f] - l3 * y[j, f])

    if m > 0:
        norm_k = 1.0 / np.sqrt(m)
        for s in range(m):
            slot = slots[s]
            w[slot] = w[slot] + g3 * (norm_k * e * residuals[s] - l4 * w[slot])
            c[slot] = c[slot] + g3 * (norm_k * e - l4 * c[slot])
    return e


@njit(cache=True)
def _sgd_epoch(order, users, items, values, g1, g2, g3, l2, l3, l4, mu, b_user, b_item, q, p, y, w, c,
               nb_indptr, nb_ids, rated_indptr, rated_items, rated_values, base_user, base_item, max_neighbors):
    """Apply one SGD pass in the given order; returns (first diverging position or -1, sum of squared errors)"""
    n_factors = q.shape[1]
    z = np.empty(n_factors)
    q_old = np.empty(n_factors)
    p_old = np.empty(n_factors)
    slots = np.empty(max_neighbors, dtype=np.int64)
    residuals = np.empty(max_neighbors)
    sse = 0.0
    for position in range(order.shape[0]):
        n = order[position]
        u = users[n]
        i = items[n]
        e = _sgd_update(u, i, values[n], g1, g2, g3, l2, l3, l4, mu, b_user, b_item, q, p, y, w, c,
                        nb_indptr, nb_ids, rated_indptr, rated_items, rated_values, base_user, base_item,
                        z, slots, residuals, q_old, p_old)
        if not (np.isfinite(e) and np.isfinite(b_user[u]) and np.isfinite(b_item[i])):
            return position, sse
        sse += e * e
    return -1, sse


@njit(cache=True)
def _predict_batch(users, items, mu, b_user, b_item, q, p, y, w, c, nb_indptr, nb_ids,
                   rated_indptr, rated_items, rated_values, base_user, base_item, max_neighbors):
    out = np.empty(users.shape[0])
    z = np.empty(q.shape[1])
    slots = np.empty(max_neighbors, dtype=np.int64)
    residuals = np.empty(max_neighbors)
    for n in range(users.shape[0]):
        pred, _ = _predict(users[n], items[n], mu, b_user, b_item, q, p, y, w, c, nb_indptr, nb_ids,
                           rated_indptr, rated_items, rated_values, base_user, base_item, z, slots, residuals)
        out[n] = pred
    return out


# Kernel plumbing
def _max_neighbors(params: IntegratedParams) -> int:
    counts = np.diff(params.item_neighbors.indptr)
    return max(1, int(counts.max()) if counts.size else 1)


def _model_arrays(params: IntegratedParams, baseline=None):
    base_user, base_item = baseline if baseline is not None else params.baseline_arrays()
    nb = params.item_neighbors
    rated = params.user_rated
    return (params.mu, params.b_user, params.b_item, params.q, params.p, params.y, params.w, params.c,
            nb.indptr, nb.neighbors, rated.indptr, rated.indices, rated.values, base_user, base_item)


def _scratch(params: IntegratedParams):
    size = _max_neighbors(params)
    return (np.empty(params.num_factors), np.empty(size, dtype=np.int64), np.empty(size))


def _check_index(params: IntegratedParams, u: int, i: int):
    if not (0 <= u < len(params.b_user) and 0 <= i < len(params.b_item)):
        raise DataError(f"(user {u}, item {i}) is outside the trained dimensions")


# Model functions
def _empty_neighbors(num_items: int) -> NeighborSets:
    return NeighborSets(
        indptr=np.zeros(num_items + 1, dtype=np.int64),
        neighbors=np.zeros(0, dtype=np.int64),
        weights=np.zeros(0, dtype=np.float64),
        supports=np.zeros(0, dtype=np.int64),
    )


def init(train: RatingDataset, hp: HyperParams) -> IntegratedParams:
    """Baselines from means, shrunk Pearson item neighborhoods, SVD factors, zero y"""
    hp.validate()
    if len(train) == 0:
        raise DataError("the integrated model needs training ratings")
    if hp.k > train.num_items - 1:
        raise ConfigError(f"k={hp.k} exceeds the {train.num_items - 1} possible item neighbors")
    if hp.K > min(train.num_users, train.num_items):
        raise ConfigError(f"K={hp.K} exceeds min(users, items)={min(train.num_users, train.num_items)}")

    stats = baseline_stats(train)
    if hp.k > 0:
        neighbors = build_neighbor_sets(train, axis="item", metric="pearson", shrink=hp.lambda1, k=hp.k)
    else:
        neighbors = _empty_neighbors(train.num_items)

    if hp.K > 0:
        factors = truncated_svd(center(train, hp.K).X, hp.K)
        root = np.sqrt(factors.S)
        p = np.ascontiguousarray(factors.U * root)
        q = np.ascontiguousarray(factors.V * root)
    else:
        p = np.zeros((train.num_users, 0))
        q = np.zeros((train.num_items, 0))

    if hp.init_neighbor_weights == "similarity":
        w = neighbors.weights.astype(np.float64).copy()
        c = neighbors.weights.astype(np.float64).copy()
    else:
        w = np.zeros(len(neighbors.neighbors))
        c = np.zeros(len(neighbors.neighbors))

    b_user = np.array(stats.user_offsets, dtype=np.float64)
    b_item = np.array(stats.item_offsets, dtype=np.float64)
    frozen = (b_user.copy(), b_item.copy()) if hp.neighbor_baseline == "frozen" else None
    logger.debug(f"Initialized integrated model: k={hp.k}, K={hp.K}, {len(w)} neighbor pairs")
    return IntegratedParams(
        mu=stats.global_mean, b_user=b_user, b_item=b_item, q=q, p=p,
        y=np.zeros((train.num_items, hp.K)), w=w, c=c,
        item_neighbors=neighbors, user_rated=train.by_user, scale=train.scale,
        frozen_offsets=frozen,
    )


def predict(params: IntegratedParams, u: int, i: int, clamp: bool = True, baseline=None) -> float:
    """Integrated prediction for one (user, item) pair"""
    _check_index(params, u, i)
    z, slots, residuals = _scratch(params)
    value, _ = _predict(u, i, *_model_arrays(params, baseline), z, slots, residuals)
    return clamp_prediction(float(value), params.scale) if clamp else float(value)


def predict_many(params: IntegratedParams, users, items, clamp: bool = True) -> np.ndarray:
    users = np.ascontiguousarray(users, dtype=np.int64)
    items = np.ascontiguousarray(items, dtype=np.int64)
    values = _predict_batch(users, items, *_model_arrays(params), _max_neighbors(params))
    return clamp_prediction(values, params.scale) if clamp else values


def sample_loss(params: IntegratedParams, u: int, i: int, r_ui: float, hp: HyperParams, baseline=None) -> float:
    """Squared error plus the regularization of every parameter this sample touches.

    `baseline` pins the offsets used inside b_ut, which the update rules treat as
    constants; pass a snapshot to differentiate the loss the way SGD does.
    """
    _check_index(params, u, i)
    z, slots, residuals = _scratch(params)
    pred, m = _predict(u, i, *_model_arrays(params, baseline), z, slots, residuals)
    e = r_ui - pred
    rated, _ = params.user_rated.row(u)
    touched = slots[:m]
    return float(
        e * e
        + hp.lambda2 * (params.b_user[u] ** 2 + params.b_item[i] ** 2)
        + hp.lambda3 * (np.sum(params.q[i] ** 2) + np.sum(params.p[u] ** 2) + np.sum(params.y[rated] ** 2))
        + hp.lambda4 * (np.sum(params.w[touched] ** 2) + np.sum(params.c[touched] ** 2))
    )


def learning_rates(hp: HyperParams, epoch: int):
    """(gamma1, gamma2, gamma3) after `epoch` decays"""
    factor = hp.gamma_decay ** epoch
    return hp.gamma1 * factor, hp.gamma2 * factor, hp.gamma3 * factor


def sgd_step(params: IntegratedParams, u: int, i: int, r_ui: float, hp: HyperParams, effective_gammas=None):
    """Apply one stochastic update in place and return (params, error)"""
    _check_index(params, u, i)
    g1, g2, g3 = effective_gammas if effective_gammas is not None else learning_rates(hp, 0)
    z, slots, residuals = _scratch(params)
    buffers = np.empty(params.num_factors), np.empty(params.num_factors)
    e = _sgd_update(u, i, float(r_ui), g1, g2, g3, hp.lambda2, hp.lambda3, hp.lambda4,
                    *_model_arrays(params), z, slots, residuals, *buffers)
    rated, _ = params.user_rated.row(u)
    touched = (params.b_user[u], params.b_item[i], params.q[i], params.p[u], params.y[rated], params.w, params.c)
    if not np.isfinite(e) or not all(np.all(np.isfinite(a)) for a in touched):
        raise NumericalError(f"SGD diverged at (user {u}, item {i}): error {e}")
    return params, float(e)


def train(train: RatingDataset, hp: HyperParams, seed: int = 0, on_epoch=None) -> IntegratedParams:
    """init(), then hp.epochs shuffled SGD passes with decaying learning rates"""
    params = init(train, hp)
    rng = np.random.Generator(np.random.PCG64(seed))
    users = np.ascontiguousarray(train.users)
    items = np.ascontiguousarray(train.items)
    values = np.ascontiguousarray(train.values)
    max_neighbors = _max_neighbors(params)

    for epoch in range(hp.epochs):
        rates = learning_rates(hp, epoch)
        order = rng.permutation(len(train))
        failed, sse = _sgd_epoch(order, users, items, values, *rates, hp.lambda2, hp.lambda3, hp.lambda4,
                                 *_model_arrays(params), max_neighbors)
        if failed >= 0 or not params.is_finite():
            where = f" at sample {order[failed]}" if failed >= 0 else ""
            raise NumericalError(f"SGD diverged in epoch {epoch + 1}{where}; lower the learning rates")
        running = float(np.sqrt(sse / len(train)))
        logger.info(f"Integrated epoch {epoch + 1}/{hp.epochs}: running training RMSE {running:.5f}")
        if on_epoch is not None:
            on_epoch(EpochReport(epoch, order, rates, running))
    return params


def training_rmse(params: IntegratedParams, data: RatingDataset, clamp: bool = False) -> float:
    return rmse(predict_many(params, data.users, data.items, clamp), data.values).rmse


# Persistence
def save_params(params: IntegratedParams, path):
    """Versioned .npz archive: header, dimensions, then flat arrays"""
    nb = params.item_neighbors
    rated = params.user_rated
    frozen_user, frozen_item = params.frozen_offsets if params.frozen_offsets is not None else (np.zeros(0), np.zeros(0))
    np.savez(
        path,
        format_version=np.array([PARAMS_FORMAT_VERSION]),
        dimensions=np.array([len(params.b_user), len(params.b_item), params.num_factors, len(params.w)]),
        scale=np.array(params.scale, dtype=np.float64),
        mu=np.array([params.mu]),
        b_user=params.b_user, b_item=params.b_item, q=params.q, p=params.p, y=params.y,
        w=params.w, c=params.c,
        nb_indptr=nb.indptr, nb_ids=nb.neighbors, nb_weights=nb.weights, nb_supports=nb.supports,
        rated_indptr=rated.indptr, rated_items=rated.indices, rated_values=rated.values,
        frozen_user=frozen_user, frozen_item=frozen_item,
    )


def load_params(path) -> IntegratedParams:
    try:
        archive = np.load(path)
    except (OSError, ValueError) as e:
        raise DataError(f"cannot read model parameters from {path}: {e}")
    with archive:
        version = int(archive["format_version"][0])
        if version != PARAMS_FORMAT_VERSION:
            raise DataError(f"unsupported parameter format version {version} in {path}")
        num_users, num_items, num_factors, num_pairs = (int(v) for v in archive["dimensions"])
        params = IntegratedParams(
            mu=float(archive["mu"][0]),
            b_user=archive["b_user"], b_item=archive["b_item"],
            q=archive["q"].reshape(num_items, num_factors), p=archive["p"].reshape(num_users, num_factors),
            y=archive["y"].reshape(num_items, num_factors),
            w=archive["w"], c=archive["c"],
            item_neighbors=NeighborSets(archive["nb_indptr"], archive["nb_ids"], archive["nb_weights"], archive["nb_supports"]),
            user_rated=SparseIndex(archive["rated_indptr"], archive["rated_items"], archive["rated_values"]),
            scale=tuple(float(v) for v in archive["scale"]),
            frozen_offsets=(archive["frozen_user"], archive["frozen_item"]) if archive["frozen_user"].size else None,
        )
    if len(params.w) != num_pairs or len(params.b_user) != num_users:
        raise DataError(f"parameter archive {path} does not match its dimension header")
    return params
