"""Pytest configuration and fixtures for deltaspec tests."""
import os

import numpy as np
import pytest

from services.spectral_core import Units, make_problem

# Solver defaults for tests; the output directory is redirected per test below
os.environ.setdefault("HBAR", "1.0")
os.environ.setdefault("MASS", "0.5")
os.environ.setdefault("LOG_LEVEL", "WARNING")

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


@pytest.fixture(autouse=True)
def output_dir(tmp_path, monkeypatch):
    """Route every result document into a per-test temporary directory."""
    target = tmp_path / "results"
    monkeypatch.setenv("SPECTRAL_OUTPUT_DIR", str(target))
    return target


@pytest.fixture
def config_dir():
    return CONFIG_DIR


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def free_line():
    return make_problem("free-line", units=Units())


@pytest.fixture
def reflectionless():
    """Reflectionless well with kappa = 1 in units hbar = 2m = 1."""
    return make_problem("reflectionless", units=Units(), kappa=1.0)


@pytest.fixture
def oscillator():
    """Harmonic oscillator with hbar = m = omega = 1."""
    return make_problem("harmonic", units=Units(hbar=1.0, mass=1.0), omega=1.0)


@pytest.fixture
def torus():
    """Flat torus with both sides 2 pi, levels n1^2 + n2^2."""
    return make_problem("torus", units=Units(), L1=2 * np.pi, L2=2 * np.pi)


@pytest.fixture
def free_plane():
    return make_problem("free-plane", units=Units())
