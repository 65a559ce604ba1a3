"""
Pytest configuration and fixtures for qmask tests.
"""
import numpy as np
import pytest

from qmask.core.config import get_settings
from qmask.core.linalg import SubsystemShape, random_density_matrix
from qmask.models.quantum import A_PRIME, B, DensityOperator
from qmask.services.quantum_service import identity_channel
from qmask.services.region_service import MaskingInstance
from qmask.services.zoo_service import (
    DephasingSpec,
    dephasing_channel,
    erasure_channel,
    phase_flip_channel,
    stateless,
)

# ---------------------------------------------------------------------------
# Settings
# ---------------------------------------------------------------------------


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Each test sees settings rebuilt from a clean environment."""
    for key in ("QMASK_DIM_CAP", "QMASK_MAX_WORKERS", "QMASK_CODE_DIM_CAP"):
        monkeypatch.delenv(key, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


# ---------------------------------------------------------------------------
# Randomness
# ---------------------------------------------------------------------------


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator so every run draws the same samples."""
    return np.random.default_rng(20240611)


@pytest.fixture
def random_state(rng):
    """Factory for random density operators on a labelled space."""

    def make(*pairs, rank=None):
        shape = SubsystemShape.of(*pairs)
        return DensityOperator(random_density_matrix(shape.dim, rng, rank), shape)

    return make


# ---------------------------------------------------------------------------
# Channel instances
# ---------------------------------------------------------------------------


@pytest.fixture
def dephasing_spec() -> DephasingSpec:
    return DephasingSpec(q=0.3, eps0=0.1, eps1=0.8)


@pytest.fixture
def dephasing_instance(dephasing_spec) -> MaskingInstance:
    channel, triple = dephasing_channel(dephasing_spec)
    return MaskingInstance(channel, triple)


@pytest.fixture
def controlled_z_instance() -> MaskingInstance:
    """Dephasing with eps0 = 0, eps1 = 1: the channel applies Z when s = 1."""
    channel, triple = dephasing_channel(DephasingSpec(q=0.5, eps0=0.0, eps1=1.0))
    return MaskingInstance(channel, triple)


@pytest.fixture
def identity_instance() -> MaskingInstance:
    channel, triple = stateless(identity_channel(SubsystemShape.of((A_PRIME, 2)), [B]))
    return MaskingInstance(channel, triple)


@pytest.fixture
def erasure_instance():
    """Factory for stateless erasure instances."""

    def make(eps: float) -> MaskingInstance:
        channel, triple = stateless(erasure_channel(eps))
        return MaskingInstance(channel, triple)

    return make


@pytest.fixture
def phase_flip():
    return phase_flip_channel(0.02)
