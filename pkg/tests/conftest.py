"""
Test Configuration - Global pytest fixtures.

Mock Principles:
1. Mock at boundaries (filesystem, clock, git)
2. Never mock the code under test
3. Prefer tiny real graphs over fakes: every domain below enumerates in
   milliseconds

Settings are read from ``config/*.yaml`` relative to the working directory,
so every test runs inside its own ``tmp_path`` with a fresh settings cache.

Version: 0.1.0
"""

import os
from pathlib import Path

import numpy as np
import pytest

from dimerfold.core.config import reset_config
from dimerfold.core.logging import clear_context
from dimerfold.domain.lattice import (
    SymmetricLatticeDomain,
    TemperleyanGraph,
    build_symmetric_domain,
    build_temperleyan,
    rectangle,
    restrict_upper,
)

# ============================================================================
# Isolation
# ============================================================================


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
    """Run in tmp_path with default settings and no DIMERFOLD_* overrides."""
    monkeypatch.chdir(tmp_path)
    for key in [k for k in os.environ if k.startswith("DIMERFOLD_")]:
        monkeypatch.delenv(key)
    reset_config()
    yield
    reset_config()
    clear_context()


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator."""
    return np.random.default_rng(20240917)


# ============================================================================
# Domain Fixtures
# ============================================================================


@pytest.fixture
def unit_domain() -> SymmetricLatticeDomain:
    """[0, 1] x [-1, 1] with eps = 1: two cells, 14-vertex Temperleyan graph."""
    return build_symmetric_domain(rectangle(0, 1, 1, eps=1.0))


@pytest.fixture
def wide_domain() -> SymmetricLatticeDomain:
    """[0, 2] x [-1, 1] with eps = 1: four cells, 192 dimer covers."""
    return build_symmetric_domain(rectangle(0, 2, 1, eps=1.0))


@pytest.fixture
def unit_graph(unit_domain: SymmetricLatticeDomain) -> TemperleyanGraph:
    """Symmetric Temperleyan graph of the unit domain."""
    return build_temperleyan(unit_domain)


@pytest.fixture
def unit_upper(unit_graph: TemperleyanGraph) -> TemperleyanGraph:
    """Upper graph of the unit domain (axis kept)."""
    return restrict_upper(unit_graph)


@pytest.fixture
def unit_strict_upper(unit_graph: TemperleyanGraph) -> TemperleyanGraph:
    """Strict upper graph of the unit domain (axis removed)."""
    return restrict_upper(unit_graph, strict=True)


# ============================================================================
# Marker Registration
# ============================================================================


def pytest_configure(config):
    """Register custom markers."""
    config.addinivalue_line("markers", "unit: mark test as a unit test")
    config.addinivalue_line("markers", "integration: mark test as an integration test")
    config.addinivalue_line("markers", "e2e: mark test as an end-to-end test")
    config.addinivalue_line("markers", "slow: mark test as slow running")
