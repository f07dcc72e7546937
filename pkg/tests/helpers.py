"""Shared generators for randomized test suites.

All generators take an explicit ``numpy.random.Generator`` so every suite is
seeded and reproducible. Conditioning guards keep random instances far from
the singular boundary: the properties under test are exact in real
arithmetic and the guards only bound floating-point amplification.
"""

from __future__ import annotations

import numpy as np

from chi2mech import ChannelMatrix, ProbVector

EXAMPLE1_LEAKAGE = [[0.25, 0.4], [0.75, 0.6]]
EXAMPLE1_PY = [0.25, 0.75]

EXAMPLE3_LEAKAGE = [[0.9, 0.05], [0.1, 0.95]]
EXAMPLE3_PY = [0.06, 0.94]


def example1() -> tuple[ChannelMatrix, ProbVector]:
    return ChannelMatrix(EXAMPLE1_LEAKAGE), ProbVector(EXAMPLE1_PY)


def example3() -> tuple[ChannelMatrix, ProbVector]:
    return ChannelMatrix(EXAMPLE3_LEAKAGE), ProbVector(EXAMPLE3_PY)


def bsc(alpha: float) -> ChannelMatrix:
    return ChannelMatrix([[1.0 - alpha, alpha], [alpha, 1.0 - alpha]])


def random_distribution(rng: np.random.Generator, k: int, floor: float = 1e-3) -> ProbVector:
    """Strictly positive distribution with every entry >= floor."""
    while True:
        vec = rng.dirichlet(np.ones(k))
        if vec.min() >= floor:
            return ProbVector(vec)


def random_leakage_pair(
    rng: np.random.Generator, k: int, *, min_singular: float = 1e-3
) -> tuple[ChannelMatrix, ProbVector]:
    """A well-conditioned invertible leakage matrix with a positive P_Y."""
    while True:
        cols = rng.dirichlet(np.ones(k), size=k).T
        if cols.min() < 1e-4:
            continue
        leakage = ChannelMatrix(cols)
        if leakage.min_singular_value() >= min_singular:
            return leakage, random_distribution(rng, k)


def random_binary_channel(rng: np.random.Generator, *, min_det: float = 1e-3) -> ChannelMatrix:
    """A 2x2 stochastic channel with determinant bounded away from zero."""
    while True:
        x, y = rng.random(), rng.random()
        if abs(x - y) >= min_det:
            return ChannelMatrix([[x, y], [1.0 - x, 1.0 - y]])
