"""Shared fixtures: the three standard transient test signals.

All three live on the window [-20, 20) with N = 2048 samples, which keeps
periodization error at the window edges below rounding for every tolerance
used in the suite.
"""

from __future__ import annotations

import numpy as np
import pytest

from scaletop import SignalGrid

N = 2048
X0 = -20.0
DX = 40.0 / N


def _grid() -> np.ndarray:
    return X0 + DX * np.arange(N)


def s1_samples(x: np.ndarray) -> np.ndarray:
    """Single centered unit Gaussian."""
    return np.exp(-0.5 * x**2)


def s2_samples(x: np.ndarray) -> np.ndarray:
    """Two separated bumps of unequal width and height."""
    return np.exp(-0.5 * ((x - 2.2) / 0.8) ** 2) + 0.65 * np.exp(
        -0.5 * ((x + 2.8) / 1.1) ** 2
    )


def s3_samples(x: np.ndarray) -> np.ndarray:
    """Three asymmetric bumps, including a narrow shoulder."""
    return (
        np.exp(-0.5 * ((x - 5.0) / 1.0) ** 2)
        + 0.8 * np.exp(-0.5 * ((x + 4.0) / 1.5) ** 2)
        + 0.5 * np.exp(-0.5 * ((x - 0.5) / 0.6) ** 2)
    )


@pytest.fixture(scope="session")
def x_axis() -> np.ndarray:
    return _grid()


@pytest.fixture(scope="session")
def s1() -> SignalGrid:
    return SignalGrid(X0, DX, s1_samples(_grid()))


@pytest.fixture(scope="session")
def s2() -> SignalGrid:
    return SignalGrid(X0, DX, s2_samples(_grid()))


@pytest.fixture(scope="session")
def s3() -> SignalGrid:
    return SignalGrid(X0, DX, s3_samples(_grid()))
