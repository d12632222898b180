import numpy as np
import pytest

from imperfect_whittle.belief import TransitionMatrix


def random_matrix(rng, sign=None, min_gap=1e-3):
    """Draw a valid two-state chain; ``sign`` forces the correlation sign."""
    while True:
        p01, p11 = rng.uniform(0.01, 0.99, size=2)
        if abs(p11 - p01) < min_gap:
            continue
        if sign is not None and np.sign(p11 - p01) != sign:
            p01, p11 = p11, p01
        return TransitionMatrix(float(p01), float(p11))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
