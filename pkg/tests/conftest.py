import numpy as np
import pytest


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def dense_operator(x):
    """Explicit matrix of ``w -> X w`` for vec(w) of a (F, N, M) stack, range (N, T, F) row-major."""
    M, T, F = x.shape
    N = M
    L = np.zeros((N * T * F, F * N * M), dtype=complex)
    for n in range(N):
        for t in range(T):
            for f in range(F):
                row = (n * T + t) * F + f
                for m in range(M):
                    L[row, (f * N + n) * M + m] = x[m, t, f]
    return L


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
