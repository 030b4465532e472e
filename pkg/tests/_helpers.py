import numpy as np
from hypothesis import strategies as st

from bihamlab.sampling import random_hermitian

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.sampled_from([2, 3, 4, 5])


def complex_matrix(rng, n):
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


def hermitian(rng, n):
    return random_hermitian(n, rng)


def max_abs(X) -> float:
    return float(np.max(np.abs(X)))
