import numpy as np
import pytest

from hsembed.geometry import build_whitney
from hsembed.quadrature import QuadratureConfig


@pytest.fixture(scope="session")
def small_decomp():
    """Window small enough to enumerate cubes explicitly."""
    return build_whitney(2, (-1, 1), 4.0)


@pytest.fixture(scope="session")
def mid_decomp():
    return build_whitney(2, (-3, 3), 8.0)


@pytest.fixture(scope="session")
def qcfg():
    return QuadratureConfig(nodes_per_axis=3, refinement_depth=30, rel_tol=1e-6)


@pytest.fixture(scope="session")
def qcfg_fast():
    return QuadratureConfig(nodes_per_axis=2, refinement_depth=24, rel_tol=1e-4)
