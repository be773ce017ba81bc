"""
Utility functions for metrics, clamping and small formatting helpers
"""
import math
from dataclasses import dataclass

import numpy as np

from errors import ConfigError


# Metric functions
@dataclass(frozen=True)
class MetricReport:
    """Root mean square error over exactly n evaluated pairs"""
    rmse: float
    n: int


def rmse(predictions, truths) -> MetricReport:
    """Root mean square error between paired predictions and true ratings"""
    predictions = np.asarray(predictions, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if predictions.shape != truths.shape:
        raise ConfigError(
            f"rmse needs equal lengths, got {predictions.size} predictions and {truths.size} truths"
        )
    if predictions.size == 0:
        raise ConfigError("rmse needs at least one prediction")
    errors = predictions - truths
    return MetricReport(rmse=float(np.sqrt(np.mean(errors * errors))), n=int(predictions.size))


def clamp_prediction(x, scale):
    """Clamp a prediction (or an array of them) into the rating scale"""
    r_min, r_max = scale
    if isinstance(x, np.ndarray):
        return np.clip(x, r_min, r_max)
    return float(min(max(x, r_min), r_max))


def validate_scale(scale):
    """Check that a rating scale is an increasing (r_min, r_max) pair"""
    r_min, r_max = (float(v) for v in scale)
    if not r_min < r_max:
        raise ConfigError(f"rating scale must satisfy r_min < r_max, got {scale}")
    return r_min, r_max


# Calculation functions
def round_half_up(x: float) -> int:
    """Round to the nearest integer with halves going up (2.5 -> 3)"""
    return int(math.floor(x + 0.5))


def canonical_params(params: dict) -> str:
    """Render parameters as a stable key=value;key=value string"""
    return ";".join(f"{key}={format_value(params[key])}" for key in sorted(params))


def format_value(value) -> str:
    """Format a parameter value so equal values always print the same way"""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_value(text: str):
    """Parse a parameter value written on the command line or in a sweep"""
    text = text.strip()
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text
