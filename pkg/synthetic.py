"""
Synthetic rating data with known ground truth for oracle tests and benchmarks
"""
import logging
from dataclasses import dataclass, fields, replace

import numpy as np

from errors import ConfigError, DataError
from ratings import DEFAULT_SCALE, RatingDataset
from utils import parse_value, round_half_up, validate_scale

logger = logging.getLogger(__name__)

# Standard deviation of one entry of the factor product P Q^T
SIGNAL_STD = 0.7

SPEC_KEYS = {
    "users": "num_users",
    "items": "num_items",
    "rank": "true_rank",
    "noise": "noise_std",
    "density": "density",
    "boost": "neighborhood_boost",
    "seed": "seed",
    "bias": "user_bias",
    "ibias": "item_bias",
    "clusters": "clusters",
    "quantize": "quantize",
}


@dataclass(frozen=True)
class SyntheticSpec:
    num_users: int = 200
    num_items: int = 50
    true_rank: int = 3
    noise_std: float = 0.3
    density: float = 0.2
    neighborhood_boost: float = 0.0
    seed: int = 0
    user_bias: float = 0.3
    item_bias: float = 0.5
    clusters: int = 10
    quantize: bool = True
    scale: tuple = DEFAULT_SCALE

    def validate(self) -> "SyntheticSpec":
        if self.num_users < 1 or self.num_items < 1:
            raise ConfigError("synthetic data needs at least one user and one item")
        if not 1 <= self.true_rank <= min(self.num_users, self.num_items):
            raise ConfigError(f"true rank must lie in [1, {min(self.num_users, self.num_items)}], got {self.true_rank}")
        if not 0 < self.density <= 1:
            raise ConfigError(f"density must lie in (0, 1], got {self.density}")
        for name in ("noise_std", "neighborhood_boost", "user_bias", "item_bias"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.clusters < 1:
            raise ConfigError(f"clusters must be >= 1, got {self.clusters}")
        validate_scale(self.scale)
        if self.num_observed() < 1:
            raise DataError(f"density {self.density} yields no ratings on a {self.num_users}x{self.num_items} matrix")
        return self

    def num_observed(self) -> int:
        return min(round_half_up(self.density * self.num_users * self.num_items), self.num_users * self.num_items)

    @classmethod
    def parse(cls, text: str) -> "SyntheticSpec":
        """Parse users=U,items=I,rank=R,noise=s,density=d,seed=n[,boost=b,...]"""
        values = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            key, sep, raw = part.partition("=")
            if not sep or key.strip() not in SPEC_KEYS:
                raise ConfigError(f"unknown synthetic spec entry {part!r}; expected keys {', '.join(SPEC_KEYS)}")
            values[SPEC_KEYS[key.strip()]] = parse_value(raw)
        types = {f.name: f.type for f in fields(cls)}
        try:
            for name, value in values.items():
                if types[name] in (int, "int"):
                    values[name] = int(value)
                elif types[name] in (float, "float"):
                    values[name] = float(value)
                elif types[name] in (bool, "bool"):
                    values[name] = value if isinstance(value, bool) else bool(int(value))
        except (TypeError, ValueError):
            raise ConfigError(f"invalid synthetic spec {text!r}")
        return replace(cls(), **values).validate()

    def render(self) -> str:
        names = {field_name: key for key, field_name in SPEC_KEYS.items()}
        return ",".join(f"{names[f.name]}={getattr(self, f.name)}" for f in fields(self) if f.name in names)


@dataclass(frozen=True)
class SyntheticData:
    dataset: RatingDataset
    truth: np.ndarray
    spec: SyntheticSpec


def generate_synthetic(spec: SyntheticSpec) -> SyntheticData:
    """Biases + rank-r factors + item-cluster effects + noise, sampled at the given density"""
    spec.validate()
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    r_min, r_max = validate_scale(spec.scale)
    n_users, n_items = spec.num_users, spec.num_items

    user_offsets = rng.normal(0.0, spec.user_bias, n_users) if spec.user_bias > 0 else np.zeros(n_users)
    item_offsets = rng.normal(0.0, spec.item_bias, n_items) if spec.item_bias > 0 else np.zeros(n_items)
    factor_std = (SIGNAL_STD ** 2 / spec.true_rank) ** 0.25
    P = rng.normal(0.0, factor_std, (n_users, spec.true_rank))
    Q = rng.normal(0.0, factor_std, (n_items, spec.true_rank))
    truth = (r_min + r_max) / 2.0 + user_offsets[:, None] + item_offsets[None, :] + P @ Q.T

    if spec.neighborhood_boost > 0:
        membership = rng.integers(0, spec.clusters, n_items)
        cluster_taste = rng.normal(0.0, spec.neighborhood_boost, (n_users, spec.clusters))
        truth = truth + cluster_taste[:, membership]

    cells = rng.choice(n_users * n_items, size=spec.num_observed(), replace=False)
    cells.sort()
    users, items = np.divmod(cells, n_items)
    values = truth[users, items]
    if spec.noise_std > 0:
        values = values + rng.normal(0.0, spec.noise_std, values.size)
    if spec.quantize:
        values = np.rint(values)
    values = np.clip(values, r_min, r_max)

    dataset = RatingDataset(users, items, values, n_users, n_items, (r_min, r_max))
    logger.info(f"Generated synthetic dataset {spec.render()}: {len(dataset)} ratings")
    return SyntheticData(dataset=dataset, truth=truth, spec=spec)
