"""The hyperbolic dynamical r-matrix and the operators built from it.

Every operator here is a function of ``ad_w`` restricted to the
off-diagonal matrices.  Since ``ad_w E_jk = (w_j - w_k) E_jk`` they all act
entrywise: ``phi(ad_w) X`` has entries ``phi(w_j - w_k) X_jk`` off the
diagonal and vanishes on the diagonal.
"""

from __future__ import annotations

import numpy as np

from .errors import CrossCheckFailure, NonzeroDiagonal
from .linalg_core import (
    HERM_TOL,
    MIN_GAP,
    as_regular,
    as_regular_complex,
    as_square,
    commutator,
    diag_part,
    mat_power,
    offdiag_part,
)

CROSS_TOL = 1e-9


def _differences(w: np.ndarray) -> np.ndarray:
    return w[:, None] - w[None, :]


def _entrywise(phi, w, X, min_gap, *, require_offdiag):
    X = as_square(X)
    if X.shape[0] != w.shape[0]:
        raise ValueError(f"dimension mismatch: {w.shape[0]} vs {X.shape[0]}")
    if require_offdiag:
        dmax = np.max(np.abs(np.diag(X)), initial=0.0)
        if dmax > HERM_TOL:
            raise NonzeroDiagonal(f"diagonal entry of modulus {dmax:.3e}")
    n = X.shape[0]
    mask = ~np.eye(n, dtype=bool)
    Y = np.zeros((n, n), dtype=complex)
    Y[mask] = phi(_differences(w)[mask]) * X[mask]
    return Y


def _coth(z):
    # Re z is bounded away from 0 by regularity, so no pole of coth is hit
    return np.cosh(z) / np.sinh(z)


def apply_R(w, X, min_gap: float = MIN_GAP) -> np.ndarray:
    """``R(w) X``: coth(w_j - w_k) X_jk off the diagonal, zero on it."""
    w = as_regular_complex(w, min_gap)
    return _entrywise(_coth, w, X, min_gap, require_offdiag=False)


def apply_sinh(q, X, min_gap: float = MIN_GAP) -> np.ndarray:
    q = as_regular(q, min_gap)
    return _entrywise(np.sinh, q, X, min_gap, require_offdiag=False)


def apply_cosh_offdiag(q, X, min_gap: float = MIN_GAP) -> np.ndarray:
    """``cosh(ad_q)`` restricted to off-diagonal input (diagonal part dropped)."""
    q = as_regular(q, min_gap)
    return _entrywise(np.cosh, q, X, min_gap, require_offdiag=False)


def apply_sinh_inv(q, X, min_gap: float = MIN_GAP, offdiag_only: bool = True) -> np.ndarray:
    """Inverse of ``sinh(ad_q)`` on the off-diagonal matrices.

    With ``offdiag_only=False`` the diagonal of ``X`` is discarded instead of
    being rejected.
    """
    q = as_regular(q, min_gap)
    if not offdiag_only:
        X = offdiag_part(as_square(X))
    return _entrywise(lambda d: 1.0 / np.sinh(d), q, X, min_gap, require_offdiag=True)


def apply_f_ad(q, X, min_gap: float = MIN_GAP) -> np.ndarray:
    """``f(ad_q) X`` with ``f = coth' = -1/sinh^2``, for zero-diagonal ``X``."""
    q = as_regular(q, min_gap)
    return _entrywise(lambda d: -1.0 / np.sinh(d) ** 2, q, X, min_gap, require_offdiag=True)


def directional_derivative_R(q, T, X, min_gap: float = MIN_GAP) -> np.ndarray:
    """``(nabla_T R)(q) X = [T, f(ad_q) X]`` for a diagonal direction ``T``."""
    T = np.asarray(T, dtype=complex)
    if T.ndim == 2:
        T = np.diag(T)
    F = apply_f_ad(q, X, min_gap)
    return T[:, None] * F - F * T[None, :]


def r_bracket(q, X, Y, min_gap: float = MIN_GAP) -> np.ndarray:
    """``[X, Y]_R = [R X, Y] + [X, R Y]``."""
    return commutator(apply_R(q, X, min_gap), Y) + commutator(X, apply_R(q, Y, min_gap))


def nabla_R_pairing(q, X, Y, min_gap: float = MIN_GAP) -> np.ndarray:
    """The H-valued term ``<X, (nabla R) Y>`` assembled over dual bases of A and T.

    For each basis element B of H = A + T (E_jj and i E_jj) the coefficient
    ``<X, (nabla_B R) Y>`` multiplies the dual basis element (E_jj and -i E_jj).
    Returned as a diagonal matrix.
    """
    X = as_square(X)
    Yo = offdiag_part(as_square(Y))
    n = X.shape[0]
    out = np.zeros(n, dtype=complex)
    for j in range(n):
        e = np.zeros(n, dtype=complex)
        e[j] = 1.0
        a_coef = np.real(np.sum(X * directional_derivative_R(q, e, Yo, min_gap).T))
        t_coef = np.real(np.sum(X * directional_derivative_R(q, 1j * e, Yo, min_gap).T))
        out[j] = a_coef - 1j * t_coef
    return np.diag(out)


def cdybe_sides(q, X, Y, min_gap: float = MIN_GAP):
    """Left and right sides of the modified classical dynamical Yang-Baxter equation."""
    X = as_square(X)
    Y = as_square(Y)
    RX = apply_R(q, X, min_gap)
    RY = apply_R(q, Y, min_gap)
    lhs = (
        apply_R(q, commutator(X, RY) + commutator(RX, Y), min_gap)
        - commutator(RX, RY)
        + directional_derivative_R(q, np.diag(X), offdiag_part(Y), min_gap)
        - directional_derivative_R(q, np.diag(Y), offdiag_part(X), min_gap)
    )
    rhs = commutator(X, Y) + nabla_R_pairing(q, X, Y, min_gap)
    return lhs, rhs


def cdybe_residual(q, X, Y, min_gap: float = MIN_GAP) -> float:
    lhs, rhs = cdybe_sides(q, X, Y, min_gap)
    return float(np.max(np.abs(lhs - rhs)))


def gauge_compensator_T(
    q, L, m: int, l: int, min_gap: float = MIN_GAP, cross_tol: float = CROSS_TOL
) -> np.ndarray:
    """The T-valued generator by which the flows V_m and V_l fail to commute.

    Evaluated directly from its defining combination of R-terms and
    compared with the closed form ``pi_T([f(ad_q) offdiag(L^l), L^m])``.
    Returns the closed form as an (anti-Hermitian) diagonal matrix.
    """
    direct = _compensator_direct(q, L, m, l, min_gap)
    closed = _compensator_closed(q, L, m, l, min_gap)
    err = float(np.max(np.abs(direct - closed)))
    if err > cross_tol * max(1.0, float(np.max(np.abs(closed)))):
        raise CrossCheckFailure(f"T_(m,l) routes disagree by {err:.3e}")
    return closed


def _compensator_direct(q, L, m, l, min_gap):
    Lm = mat_power(L, m)
    Ll = mat_power(L, l)
    RLm = apply_R(q, Lm, min_gap)
    RLl = apply_R(q, Ll, min_gap)
    return (
        apply_R(q, commutator(RLm, Ll) + commutator(Lm, RLl), min_gap)
        - commutator(RLm, RLl)
        + directional_derivative_R(q, np.diag(Lm).real, offdiag_part(Ll), min_gap)
        - directional_derivative_R(q, np.diag(Ll).real, offdiag_part(Lm), min_gap)
    )


def _compensator_closed(q, L, m, l, min_gap):
    Lm = mat_power(L, m)
    Ll = mat_power(L, l)
    F = apply_f_ad(q, offdiag_part(Ll), min_gap)
    C = diag_part(commutator(F, Lm))
    # pi_T: keep the anti-Hermitian (purely imaginary) part of the diagonal
    return 1j * np.diag(np.diag(C).imag)
