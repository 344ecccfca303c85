"""Pytest configuration for integration tests."""

from __future__ import annotations

import os

import pytest

from rgg_lab.config import LabSettings, load_lab_settings


def pytest_configure(config: pytest.Config) -> None:
    """Register integration test marker."""
    config.addinivalue_line(
        "markers",
        "integration: mark test as integration test (acceptance-scale Monte Carlo runs)",
    )


def pytest_collection_modifyitems(
    config: pytest.Config,
    items: list[pytest.Item],
) -> None:
    """Skip integration tests unless they were asked for."""
    if os.environ.get("RGG_LAB_RUN_INTEGRATION"):
        return
    skip_marker = pytest.mark.skip(
        reason="RGG_LAB_RUN_INTEGRATION not set - skipping integration tests"
    )
    for item in items:
        item.add_marker(skip_marker)


@pytest.fixture(scope="session")
def settings() -> LabSettings:
    """Lab settings from the environment, so RGG_LAB_THREADS applies."""
    loaded, error = load_lab_settings(os.environ)
    if loaded is None:
        pytest.fail(f"Configuration error: {error}")
    return loaded
