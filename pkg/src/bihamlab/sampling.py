"""Reproducible random test points and observables."""

from __future__ import annotations

import numpy as np

from .brackets import ExtendedStatePoint, StatePoint, TripleStatePoint
from .linalg_core import MIN_GAP, hermitian_part
from .observables import (
    Const,
    Exp,
    Expr,
    Hamiltonian,
    LinComb,
    Log,
    Mul,
    Pow,
    Q,
    Wtr,
    canonical_family,
)

# default spacing of sampled q; keeps 1/sinh^2 of the gaps (and so FD noise) moderate
SPREAD = 0.4


def rng_for(seed: int, trial: int = 0) -> np.random.Generator:
    """Per-trial generator: seed + trial index, so serial and parallel runs agree."""
    return np.random.default_rng(int(seed) + int(trial))


def random_hermitian(n: int, rng: np.random.Generator, norm: float = 1.0) -> np.ndarray:
    """A GUE sample rescaled to spectral norm ``norm``."""
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    H = hermitian_part(A)
    return H * (norm / np.linalg.norm(H, 2))


def random_alcove(n: int, rng: np.random.Generator, spread: float = SPREAD) -> np.ndarray:
    """Sorted Gaussian q, pushed apart so that consecutive gaps are at least ``spread``."""
    z = np.sort(rng.normal(size=n))[::-1]
    q = np.empty(n)
    q[0] = z[0]
    for j in range(1, n):
        q[j] = q[j - 1] - max(z[j - 1] - z[j], spread)
    return q - q.mean()


def random_state(n: int, rng: np.random.Generator, spread: float = SPREAD, min_gap: float = MIN_GAP) -> StatePoint:
    return StatePoint(random_alcove(n, rng, spread), random_hermitian(n, rng), min_gap)


def random_triple(n: int, rng: np.random.Generator, spread: float = SPREAD, min_gap: float = MIN_GAP) -> TripleStatePoint:
    p = random_state(n, rng, spread, min_gap)
    return TripleStatePoint(p.q, p.L, 1j * rng.normal(scale=0.5, size=n), min_gap)


def random_extended(n: int, rng: np.random.Generator, spread: float = SPREAD, min_gap: float = MIN_GAP) -> ExtendedStatePoint:
    p = random_state(n, rng, spread, min_gap)
    return ExtendedStatePoint(p.q + 1j * rng.uniform(-1.0, 1.0, size=n), p.L, min_gap)


def random_canonical(n: int, rng: np.random.Generator, k: int = 3) -> list[Expr]:
    """``k`` distinct members of the canonical family."""
    fam = canonical_family(n)
    idx = rng.choice(len(fam), size=k, replace=False)
    return [fam[i] for i in idx]


def random_word(n: int, rng: np.random.Generator, max_letters: int = 4) -> Wtr:
    word = []
    for _ in range(int(rng.integers(1, max_letters + 1))):
        if rng.random() < 0.5:
            word.append(("P", int(rng.integers(n))))
        else:
            word.append(("L", int(rng.integers(1, 4))))
    return Wtr(tuple(word))


def _low_degree_leaf(n: int, rng: np.random.Generator) -> Expr:
    # at most quadratic in L, so exp stays finite (a degree-12 word under exp overflows)
    r = rng.random()
    if r < 0.4:
        return Q(int(rng.integers(n)))
    if r < 0.7:
        return Hamiltonian(int(rng.integers(1, 3)))
    i, j = (int(k) for k in rng.integers(n, size=2))
    return Wtr((("P", i), ("L", 1), ("P", j), ("L", 1)))


def random_observable(n: int, rng: np.random.Generator, depth: int = 3) -> Expr:
    """A random expression tree mixing q, word traces and Hamiltonians."""
    if depth <= 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.3:
            return Q(int(rng.integers(n)))
        if r < 0.5:
            return Hamiltonian(int(rng.integers(1, 5)))
        return random_word(n, rng)
    op = rng.integers(5)
    if op == 2:
        return Exp(Mul((Const(0.3), _low_degree_leaf(n, rng))))
    a = random_observable(n, rng, depth - 1)
    if op == 0:
        b = random_observable(n, rng, depth - 1)
        return LinComb.of([(float(rng.normal()), a), (float(rng.normal()), b)])
    if op == 1:
        return Mul((a, random_observable(n, rng, depth - 1)))
    if op == 3:
        return Log(LinComb.of([(1.0, Const(1.0)), (1.0, Pow(a, 2))]))
    return Pow(a, int(rng.integers(2, 4)))
