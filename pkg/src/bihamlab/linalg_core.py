"""Complex matrix algebra on gl(n, C) viewed as a real Lie algebra.

Matrices are plain ``numpy`` arrays of dtype ``complex128``; diagonal
objects (points ``q`` of the alcove, elements of the Cartan subalgebra)
are 1-D arrays holding the diagonal entries.

The bilinear form is ``<X, Y> = Re tr(XY)``.  It splits gl(n, C) into the
anti-Hermitian part ``G = u(n)`` and the Hermitian part ``iG``; these are
refined further into diagonal (``T``, ``A``) and off-diagonal (``Tperp``,
``Aperp``) pieces.
"""

from __future__ import annotations

import functools

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    NotHermitian,
    NotInvertible,
    RegularityViolation,
    SingularValueCollision,
)

HERM_TOL = 1e-12
SYMMETRIZE_TOL = 1e-9
MIN_GAP = 1e-6
INV_TOL = 1e-12

PARTS = ("G", "iG", "T", "Tperp", "A", "Aperp")


def as_square(X) -> np.ndarray:
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix has non-finite entries")
    return X


def hermitian_part(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.conj().T)


def antihermitian_part(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X - X.conj().T)


def as_hermitian(X, tol: float = SYMMETRIZE_TOL) -> np.ndarray:
    """Return ``X`` symmetrized into iG, rejecting it if it is far from Hermitian."""
    X = as_square(X)
    resid = np.max(np.abs(X - X.conj().T), initial=0.0)
    if resid > tol:
        raise NotHermitian(f"Hermiticity residual {resid:.3e} exceeds {tol:.1e}")
    return hermitian_part(X)


def as_antihermitian(X, tol: float = SYMMETRIZE_TOL) -> np.ndarray:
    X = as_square(X)
    resid = np.max(np.abs(X + X.conj().T), initial=0.0)
    if resid > tol:
        raise NotHermitian(f"anti-Hermiticity residual {resid:.3e} exceeds {tol:.1e}")
    return antihermitian_part(X)


def is_hermitian(X, tol: float = HERM_TOL) -> bool:
    X = np.asarray(X)
    return bool(np.max(np.abs(X - X.conj().T), initial=0.0) <= tol)


def is_antihermitian(X, tol: float = HERM_TOL) -> bool:
    X = np.asarray(X)
    return bool(np.max(np.abs(X + X.conj().T), initial=0.0) <= tol)


def as_regular(q, min_gap: float = MIN_GAP) -> np.ndarray:
    """Validate a point of the open Weyl alcove: q_1 > q_2 > ... > q_n."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.size < 1:
        raise DimensionMismatch(f"expected a 1-D vector of diagonal entries, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("diagonal entries must be finite")
    gaps = q[:-1] - q[1:]
    if gaps.size and gaps.min() < min_gap:
        j = int(np.argmin(gaps))
        raise RegularityViolation(
            f"q_{j + 1} - q_{j + 2} = {gaps[j]:.3e} is below min_gap={min_gap:.1e}"
        )
    return q


def as_regular_complex(w, min_gap: float = MIN_GAP) -> np.ndarray:
    """Validate a point of H° = A° + T (real parts strictly decreasing)."""
    w = np.asarray(w, dtype=complex)
    as_regular(w.real, min_gap)
    return w


def phase_diagonal(theta) -> np.ndarray:
    return np.diag(np.exp(1j * np.asarray(theta, dtype=float)))


def commutator(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return X @ Y - Y @ X


def pairing(X, Y) -> float:
    """The invariant form ``Re tr(XY)``."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape != Y.shape:
        raise DimensionMismatch(f"shape mismatch {X.shape} vs {Y.shape}")
    # tr(XY) = sum_jk X_jk Y_kj
    return float(np.real(np.sum(X * Y.T)))


def diag_part(X: np.ndarray) -> np.ndarray:
    return np.diag(np.diag(X))


def offdiag_part(X: np.ndarray) -> np.ndarray:
    Y = np.array(X, dtype=complex)
    np.fill_diagonal(Y, 0.0)
    return Y


def project(X, part: str) -> np.ndarray:
    """Orthogonal projection of ``X`` onto one of G, iG, T, Tperp, A, Aperp."""
    X = as_square(X)
    if part == "G":
        return antihermitian_part(X)
    if part == "iG":
        return hermitian_part(X)
    if part == "T":
        return diag_part(antihermitian_part(X))
    if part == "Tperp":
        return offdiag_part(antihermitian_part(X))
    if part == "A":
        return diag_part(hermitian_part(X))
    if part == "Aperp":
        return offdiag_part(hermitian_part(X))
    raise ValueError(f"unknown part {part!r}; expected one of {PARTS}")


def mat_power(L, m: int) -> np.ndarray:
    if m < 1:
        raise ValueError("power must be >= 1")
    return hermitian_part(np.linalg.matrix_power(np.asarray(L, dtype=complex), m))


def mat_exp(X) -> np.ndarray:
    """Matrix exponential (scaling and squaring with a Pade kernel)."""
    return scipy.linalg.expm(as_square(X))


def ordered_svd(g, min_gap: float = MIN_GAP, inv_tol: float = INV_TOL):
    """Decompose ``g = etaL^{-1} @ diag(exp(q)) @ etaR`` with q strictly decreasing.

    The residual torus ambiguity ``(etaL, etaR) -> (eta etaL, eta etaR)`` is
    fixed by making the first nonzero entry of every right singular vector
    (every column of ``etaR^dagger``) real and positive.

    Returns ``(etaL, q, etaR)``.
    """
    g = as_square(g)
    U, s, Vh = np.linalg.svd(g)
    if s[-1] <= inv_tol:
        raise NotInvertible(f"smallest singular value {s[-1]:.3e} <= {inv_tol:.1e}")
    q = np.log(s)
    gaps = q[:-1] - q[1:]
    if gaps.size and gaps.min() < min_gap:
        raise SingularValueCollision(
            f"log singular values collide (gap {gaps.min():.3e} < {min_gap:.1e})"
        )
    V = Vh.conj().T
    for k in range(V.shape[1]):
        col = V[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-8 * np.abs(col).max())[0]
        phase = col[nz] / abs(col[nz])
        V[:, k] /= phase
        U[:, k] /= phase
    return U.conj().T, q, V.conj().T


# --- orthonormal basis of iG -------------------------------------------------


def hermitian_basis(n: int) -> np.ndarray:
    """Orthonormal basis of iG under the pairing, shape ``(n*n, n, n)``.

    Ordering: E_jj, then (E_jk + E_kj)/sqrt2 for j<k, then i(E_jk - E_kj)/sqrt2 for j<k.
    """
    basis = []
    for j in range(n):
        Z = np.zeros((n, n), dtype=complex)
        Z[j, j] = 1.0
        basis.append(Z)
    pairs = [(j, k) for j in range(n) for k in range(j + 1, n)]
    s = 1.0 / np.sqrt(2.0)
    for j, k in pairs:
        Z = np.zeros((n, n), dtype=complex)
        Z[j, k] = Z[k, j] = s
        basis.append(Z)
    for j, k in pairs:
        Z = np.zeros((n, n), dtype=complex)
        Z[j, k] = 1j * s
        Z[k, j] = -1j * s
        basis.append(Z)
    return np.array(basis)


@functools.lru_cache(maxsize=None)
def _upper_pairs(n: int):
    ju, ku = np.triu_indices(n, k=1)
    ju.flags.writeable = False
    ku.flags.writeable = False
    return ju, ku


def herm_to_coords(H: np.ndarray) -> np.ndarray:
    """Coordinates ``<Z_a, H>`` of a Hermitian matrix in :func:`hermitian_basis`."""
    n = H.shape[0]
    ju, ku = _upper_pairs(n)
    r2 = np.sqrt(2.0)
    return np.concatenate([np.diag(H).real, r2 * H[ju, ku].real, r2 * H[ju, ku].imag])


def coords_to_herm(c: np.ndarray, n: int) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    ju, ku = _upper_pairs(n)
    npair = ju.size
    H = np.zeros((n, n), dtype=complex)
    H[np.arange(n), np.arange(n)] = c[:n]
    upper = (c[n : n + npair] + 1j * c[n + npair :]) / np.sqrt(2.0)
    H[ju, ku] = upper
    H[ku, ju] = upper.conj()
    return H
