"""
Experiment harness: cross-validated sweeps, method comparison, tuning and result CSVs
"""
import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from config import DEFAULTS, ExperimentConfig, hyper_params
from errors import DataError, RatebenchError, with_context
from models import integrated, iterative_mf, ubcf
from ratings import RatingDataset, kfold_splits, load_csv, split
from synthetic import generate_synthetic
from utils import canonical_params, rmse

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["method", "params", "fold", "rmse", "wall_time_ms"]
METHOD_LABELS = {
    "ubcf": "User-based CF",
    "imf": "Iterative Matrix Factorization",
    "integrated": "Integrated Model",
}
# Published RMSE on a private dataset with an external test set; reference only
REFERENCE_RMSE = {"ubcf": 0.99802, "imf": 0.98893, "integrated": 0.97075}


@dataclass(frozen=True)
class ResultRow:
    method: str
    params: str
    fold: int
    rmse: float
    wall_time_ms: float = None


# Data functions
def load_dataset(config: ExperimentConfig) -> RatingDataset:
    """Dataset named by the config: a ratings CSV or a synthetic spec"""
    if config.synthetic is not None:
        return generate_synthetic(config.synthetic).dataset
    return load_csv(config.data_path)


def fold_splits(dataset: RatingDataset, config: ExperimentConfig):
    """Validation splits: repeated sub-sampling with seed + fold, or strict k-fold"""
    if config.cv_mode == "kfold":
        return kfold_splits(dataset, config.cv_folds, config.seed)
    return [split(dataset, config.split, config.seed + fold) for fold in range(config.cv_folds)]


def sweep_cells(config: ExperimentConfig):
    """Parameter dicts for every sweep cell, axes varying in the order given"""
    names = list(config.sweep)
    cells = []
    for combination in itertools.product(*(config.sweep[name] for name in names)):
        params = dict(config.params)
        params.update(zip(names, combination))
        cells.append(params)
    return cells


# Evaluation functions
def fit_predict(method: str, params: dict, train: RatingDataset, users, items, clamp: bool, seed: int):
    """Train one method on train and predict the given (user, item) pairs"""
    if method == "ubcf":
        model = ubcf.fit(train, metric=params["metric"], k=int(params["k"]), clamp=clamp)
        return ubcf.predict_many(model, users, items)
    if method == "imf":
        state = iterative_mf.fit(train, rank=int(params["rank"]), iterations=int(params["iterations"]))
        return iterative_mf.predict_many(state, users, items, clamp)
    if method == "integrated":
        trained = integrated.train(train, hyper_params(params), seed=seed)
        return integrated.predict_many(trained, users, items, clamp)
    raise ValueError(f"unknown method {method!r}")


def evaluate_cell(method: str, params: dict, fold: int, data_split, clamp: bool, timing: bool) -> ResultRow:
    """Train on one split and report validation RMSE; errors carry the cell context"""
    rendered = canonical_params(params)
    started = time.perf_counter()
    try:
        validation = data_split.validation
        predictions = fit_predict(method, params, data_split.train, validation.users, validation.items,
                                  clamp, data_split.seed)
        report = rmse(predictions, validation.values)
    except RatebenchError as e:
        raise with_context(e, method=method, params=rendered, fold=fold) from e
    elapsed = (time.perf_counter() - started) * 1000.0 if timing else None
    logger.info(f"{method} [{rendered}] fold {fold}: RMSE {report.rmse:.5f} over {report.n} ratings")
    return ResultRow(method, rendered, fold, report.rmse, elapsed)


def run(config: ExperimentConfig, dataset: RatingDataset = None):
    """Evaluate every sweep cell on every fold; rows ordered by cell, then fold"""
    config.validate(require_source=dataset is None)
    if dataset is None:
        dataset = load_dataset(config)
    splits = fold_splits(dataset, config)
    tasks = [(params, fold) for params in sweep_cells(config) for fold in range(len(splits))]
    logger.info(f"Running {config.method}: {len(tasks) // len(splits)} cells x {len(splits)} folds")

    def execute(task):
        params, fold = task
        return evaluate_cell(config.method, params, fold, splits[fold], config.clamp, config.timing)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(execute, tasks))
    return [execute(task) for task in tasks]


def results_frame(rows) -> pd.DataFrame:
    return pd.DataFrame([vars(row) for row in rows], columns=RESULT_COLUMNS)


def results_header(config: ExperimentConfig) -> str:
    return f"# cv_mode={config.cv_mode};seed={config.seed};folds={config.cv_folds}"


def write_results(rows, path, config: ExperimentConfig):
    """Results CSV: a cv-mode comment line, then method,params,fold,rmse,wall_time_ms"""
    frame = results_frame(rows)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(results_header(config) + "\n")
        frame.to_csv(handle, index=False, float_format="%.8f", lineterminator="\n")


def read_results(path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


# Comparison functions
def method_settings(dataset: RatingDataset, settings: dict = None) -> dict:
    """Each method's settings (published defaults unless given), capped to what the dataset supports"""
    source = settings or DEFAULTS
    settings = {method: dict(source[method]) for method in ("ubcf", "imf", "integrated")}
    max_rank = min(dataset.num_users, dataset.num_items)
    if settings["imf"]["rank"] > max_rank:
        settings["imf"]["rank"] = max_rank
    if settings["integrated"]["k"] > dataset.num_items - 1:
        logger.warning(f"Capping integrated k={settings['integrated']['k']} at {dataset.num_items - 1} item neighbors")
        settings["integrated"]["k"] = dataset.num_items - 1
    if settings["integrated"]["K"] > max_rank:
        settings["integrated"]["K"] = max_rank
    return settings


def compare_methods(dataset: RatingDataset, seed: int = 0, fraction: float = 0.9, clamp: bool = True,
                    settings: dict = None) -> pd.DataFrame:
    """All three methods at their default settings on one shared split"""
    if len(dataset) == 0:
        raise DataError("cannot compare methods on an empty dataset")
    settings = settings or method_settings(dataset)
    data_split = split(dataset, fraction, seed)
    records = []
    for method in ("ubcf", "imf", "integrated"):
        row = evaluate_cell(method, settings[method], 0, data_split, clamp, timing=False)
        records.append({"method": method, "rmse": row.rmse, "n": len(data_split.validation)})
    return pd.DataFrame.from_records(records, columns=["method", "rmse", "n"])


def format_comparison(frame: pd.DataFrame) -> str:
    """Render a comparison as a two-row Methods/Result table"""
    labels = [METHOD_LABELS[m] for m in frame["method"]]
    values = [f"{v:.5f}" for v in frame["rmse"]]
    widths = [max(len(a), len(b)) for a, b in zip(labels, values)]
    head = " | ".join(["Methods"] + [l.center(w) for l, w in zip(labels, widths)])
    body = " | ".join(["Result ".ljust(7)] + [v.center(w) for v, w in zip(values, widths)])
    return f"{head}\n{body}"


# Tuning functions
def tune_integrated(train: RatingDataset, validation: RatingDataset, ks, lambda1s, factor_counts,
                    base: integrated.HyperParams = None, seed: int = 0, clamp: bool = True):
    """Coordinate search: best k first, then lambda1 with that k, then K with both"""
    hp = (base or integrated.HyperParams()).validate()
    records = []

    def score(candidate):
        trained = integrated.train(train, candidate, seed=seed)
        predictions = integrated.predict_many(trained, validation.users, validation.items, clamp)
        return rmse(predictions, validation.values).rmse

    for stage, name, values in (("k", "k", ks), ("lambda1", "lambda1", lambda1s), ("K", "K", factor_counts)):
        values = list(values)
        if not values:
            continue
        scored = []
        for value in values:
            candidate = replace(hp, **{name: value}).validate()
            result = score(candidate)
            logger.info(f"Tuning {name}={value} (k={candidate.k}, lambda1={candidate.lambda1}, K={candidate.K}): RMSE {result:.5f}")
            records.append({"stage": stage, "k": candidate.k, "lambda1": candidate.lambda1,
                            "K": candidate.K, "rmse": result})
            scored.append((result, value))
        best = min(scored, key=lambda pair: pair[0])[1]
        hp = replace(hp, **{name: best})
    return hp, pd.DataFrame.from_records(records, columns=["stage", "k", "lambda1", "K", "rmse"])


def predict_pairs(method: str, params: dict, dataset: RatingDataset, users, items, clamp: bool = True, seed: int = 0):
    """Train on every given rating and predict the query pairs"""
    return np.asarray(fit_predict(method, params, dataset, users, items, clamp, seed))
