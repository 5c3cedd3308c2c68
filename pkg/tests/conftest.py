import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from maxent_merge.core import FeatureSpec, VariableSet
from maxent_merge.solver import OptimizerConfig


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def three_binaries():
    return VariableSet.binary("A", "B", "C")


@pytest.fixture
def strict():
    return OptimizerConfig(tol=1e-8, max_iter=200_000)


@pytest.fixture
def mean_feature():
    def make(name: str) -> FeatureSpec:
        return FeatureSpec.product(name.lower(), (name,))
    return make
