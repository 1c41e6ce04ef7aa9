"""Shared fixtures for paracontact tests."""

from __future__ import annotations

import numpy as np
import pytest

from paracontact import config
from paracontact.families import builtin_example


@pytest.fixture(autouse=True)
def isolated_config(monkeypatch, tmp_path):
    """No config file or thread override leaks in from the developer's machine."""
    monkeypatch.setattr(config, "_config_cache", None)
    monkeypatch.setenv("PARACONTACT_CONFIG", str(tmp_path / "no-such-config.json"))
    monkeypatch.delenv("PARACONTACT_THREADS", raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def ex46():
    return builtin_example("example_4_6")


@pytest.fixture
def ex46_bar():
    return builtin_example("example_4_6_bar")


@pytest.fixture
def ex413():
    return builtin_example("example_4_13")


@pytest.fixture
def hyperplane():
    return builtin_example("hyperplane")
