import numpy as np
import pytest
from hypothesis import settings

from src.config.models import RunConfig
from src.core.types import DataItem
from src.data.distributions import Regression, UniformBox
from src.subset.registry import default_registry

settings.register_profile("retention-lab", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("retention-lab")

THETA_2D = np.array([0.5, -0.25])


def batch_of(values, round_index=1, labels=None):
    """Items stamped with ``round_index`` and their slot, from scalars or vectors."""
    items = []
    for j, v in enumerate(values):
        label = None if labels is None else float(labels[j])
        items.append(DataItem(
            values=tuple(np.atleast_1d(np.asarray(v, dtype=float)).tolist()),
            arrival_round=round_index,
            label=label,
            offset=j,
        ))
    return items


@pytest.fixture
def registry():
    return default_registry()


@pytest.fixture
def make_batch():
    return batch_of


@pytest.fixture
def scalar_cfg():
    return RunConfig(m=12, T=15, d=1, seed=11)


@pytest.fixture
def regression_spec():
    return Regression(theta=THETA_2D.copy(), design=UniformBox(B=1.0), noise_sigma=0.5)


@pytest.fixture
def regression_cfg(regression_spec):
    return RunConfig(m=32, T=6, d=2, k=4, seed=1, distribution=regression_spec)
