import numpy as np
import pytest

from asode.linalg import JacobianApprox, factorize_D


class LinearSystem:
    """phi(y) = A y, g(y) = G y with B = G."""

    def __init__(self, A, G):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.G = np.atleast_2d(np.asarray(G, dtype=float))

    def phi(self, y):
        return self.A @ y

    def g(self, y):
        return self.G @ y

    def factor(self, a, h):
        return factorize_D(JacobianApprox("dense", self.G), a, h)


@pytest.fixture
def linear_system():
    return LinearSystem


@pytest.fixture
def rng():
    return np.random.default_rng(20240615)
