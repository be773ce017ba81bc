"""
Configuration loading, experiment description and session state management
"""
import copy
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import toml

from errors import ConfigError
from models.integrated import HyperParams
from synthetic import SyntheticSpec
from utils import parse_value

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = "ratebench.toml"
METHODS = ("ubcf", "imf", "integrated")
CV_MODES = ("subsample", "kfold")

# Values the original experiments settled on
DEFAULTS = {
    "experiment": {
        "method": "ubcf",
        "data": "",
        "synthetic": "",
        "split": 0.9,
        "seed": 0,
        "folds": 1,
        "cv_mode": "subsample",
        "clamp": True,
        "timing": False,
        "workers": 1,
    },
    "ubcf": {"metric": "cosine", "k": 100},
    "imf": {"rank": 3, "iterations": 20},
    "integrated": {f.name: f.default for f in fields(HyperParams)},
    "sweep": {},
    "dashboard": {"data": "", "synthetic": "users=300,items=60,rank=3,noise=0.3,density=0.2,boost=0.5,seed=7"},
}

METHOD_PARAMS = {method: set(DEFAULTS[method]) for method in METHODS}


# Load configuration from TOML file
def load_config(path=None) -> dict:
    """Merge a TOML file over the built-in defaults (missing file -> defaults)"""
    settings = copy.deepcopy(DEFAULTS)
    if path is None:
        path = DEFAULT_CONFIG_PATH
        if not Path(path).exists():
            return settings
    try:
        loaded = toml.load(path)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except (toml.TomlDecodeError, OSError) as e:
        raise ConfigError(f"error loading config {path}: {e}")

    for section, values in loaded.items():
        if section not in settings:
            raise ConfigError(f"unknown config section [{section}] in {path}")
        if not isinstance(values, dict):
            raise ConfigError(f"config section [{section}] in {path} must be a table")
        if section != "sweep":
            unknown = set(values) - set(settings[section])
            if unknown:
                raise ConfigError(f"unknown keys {sorted(unknown)} in [{section}] of {path}")
        settings[section].update(values)
    logger.debug(f"Loaded configuration from {path}")
    return settings


@dataclass(frozen=True)
class ExperimentConfig:
    method: str
    data_path: str = ""
    synthetic: SyntheticSpec = None
    split: float = 0.9
    seed: int = 0
    params: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    cv_folds: int = 1
    cv_mode: str = "subsample"
    clamp: bool = True
    timing: bool = False
    workers: int = 1

    def validate(self, require_source: bool = True) -> "ExperimentConfig":
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if require_source and bool(self.data_path) == (self.synthetic is not None):
            raise ConfigError("give exactly one of a data path or a synthetic spec")
        if not 0 < self.split < 1:
            raise ConfigError(f"split fraction must lie in (0, 1), got {self.split}")
        if self.cv_folds < 1:
            raise ConfigError(f"folds must be >= 1, got {self.cv_folds}")
        if self.cv_mode not in CV_MODES:
            raise ConfigError(f"cv_mode must be one of {CV_MODES}, got {self.cv_mode!r}")
        if self.cv_mode == "kfold" and self.cv_folds < 2:
            raise ConfigError("k-fold cross-validation needs at least 2 folds")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        allowed = METHOD_PARAMS[self.method]
        for name in list(self.params) + list(self.sweep):
            if name not in allowed:
                raise ConfigError(f"{name!r} is not a parameter of {self.method}; expected one of {sorted(allowed)}")
        for name, values in self.sweep.items():
            if not values:
                raise ConfigError(f"sweep axis {name!r} has no values")
        return self


def experiment_config(settings: dict, method: str = None) -> ExperimentConfig:
    """Build an ExperimentConfig from merged settings"""
    experiment = settings["experiment"]
    method = method or experiment["method"]
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")
    synthetic = experiment.get("synthetic") or ""
    return ExperimentConfig(
        method=method,
        data_path=experiment.get("data") or "",
        synthetic=SyntheticSpec.parse(synthetic) if synthetic else None,
        split=float(experiment["split"]),
        seed=int(experiment["seed"]),
        params=dict(settings[method]),
        sweep={name: list(values) for name, values in settings["sweep"].items()},
        cv_folds=int(experiment["folds"]),
        cv_mode=experiment["cv_mode"],
        clamp=bool(experiment["clamp"]),
        timing=bool(experiment["timing"]),
        workers=int(experiment["workers"]),
    ).validate()


def parse_sweep(entries):
    """Turn ['k=5,10', 'metric=cosine'] into {'k': [5, 10], 'metric': ['cosine']}"""
    sweep = {}
    for entry in entries or []:
        name, sep, values = entry.partition("=")
        if not sep or not name.strip() or not values.strip():
            raise ConfigError(f"sweep must look like param=v1,v2,..., got {entry!r}")
        sweep[name.strip()] = [parse_value(v) for v in values.split(",") if v.strip()]
    return sweep


def hyper_params(params: dict) -> HyperParams:
    """HyperParams from a parameter dict, ignoring keys that are not hyper-parameters"""
    names = {f.name for f in fields(HyperParams)}
    try:
        return HyperParams(**{key: value for key, value in params.items() if key in names}).validate()
    except TypeError as e:
        raise ConfigError(f"invalid integrated model parameters: {e}")


# Initialize session state
def initialize_session_state():
    """Initialize all dashboard session state variables"""
    import streamlit as st

    if "settings" not in st.session_state:
        try:
            st.session_state.settings = load_config()
        except ConfigError as e:
            st.error(f"Error loading configuration: {e}")
            st.session_state.settings = copy.deepcopy(DEFAULTS)

    if "dataset" not in st.session_state:
        st.session_state.dataset = None

    if "dataset_label" not in st.session_state:
        st.session_state.dataset_label = None

    if "results" not in st.session_state:
        st.session_state.results = None

    if "comparison" not in st.session_state:
        st.session_state.comparison = None

    if "page" not in st.session_state:
        st.session_state.page = "Data Management"
