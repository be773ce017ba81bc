import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from ratings import RatingDataset  # noqa: E402


def random_dataset(num_users, num_items, density, seed, scale=(1.0, 5.0), integer=True):
    """Random ratings on a num_users x num_items grid, at least one rating"""
    rng = np.random.default_rng(seed)
    mask = rng.random((num_users, num_items)) < density
    if not mask.any():
        mask[0, 0] = True
    users, items = np.nonzero(mask)
    if integer:
        values = rng.integers(int(scale[0]), int(scale[1]) + 1, users.size).astype(float)
    else:
        values = rng.uniform(scale[0], scale[1], users.size)
    return RatingDataset(users, items, values, num_users, num_items, scale)


@pytest.fixture
def tiny():
    """3 users x 4 items with a few overlapping ratings"""
    return RatingDataset.from_triples([
        (0, 0, 5), (0, 1, 3), (0, 2, 4),
        (1, 0, 4), (1, 1, 2), (1, 3, 1),
        (2, 1, 4), (2, 2, 5), (2, 3, 2),
    ], num_users=3, num_items=4)


@pytest.fixture
def make_dataset():
    return random_dataset


@pytest.fixture
def ratings_csv(tmp_path):
    def write(text, name="ratings.csv"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return write
