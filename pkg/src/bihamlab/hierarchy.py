"""The hierarchy of coth r-matrix Lax flows: vector fields, flows and the reduction picture.

The m-th member of the hierarchy moves ``(q, L)`` by

    dq/dt = diag(L^m),    dL/dt = [R(q) L^m, L].

Besides a fixed-step RK4 integrator, the module provides the exact
solution obtained by projecting the free flow ``g(t) = e^q exp(t L^m)`` back
onto the gauge slice ``g = e^q`` with an ordered singular value decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .brackets import ExtendedStatePoint, StatePoint
from .errors import NotInvertible, RegularityLost, RegularityViolation
from .linalg_core import (
    INV_TOL,
    MIN_GAP,
    antihermitian_part,
    as_square,
    commutator,
    hermitian_part,
    mat_exp,
    mat_power,
    offdiag_part,
    ordered_svd,
)
from .observables import Observable
from .rmatrix import (
    apply_cosh_offdiag,
    apply_R,
    apply_sinh,
    apply_sinh_inv,
    gauge_compensator_T,
)


@dataclass(frozen=True)
class TangentVector:
    dq: np.ndarray
    dL: np.ndarray


@dataclass(frozen=True)
class UnreducedPoint:
    g: np.ndarray
    J: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        g = as_square(self.g)
        if np.linalg.svd(g, compute_uv=False)[-1] <= INV_TOL:
            raise NotInvertible("g is not invertible")
        object.__setattr__(self, "g", g)


def vector_field(m: int, p: StatePoint) -> TangentVector:
    Lm = mat_power(p.L, m)
    dq = np.diag(Lm).real.copy()
    dL = hermitian_part(commutator(apply_R(p.q, Lm, p.min_gap), p.L))
    return TangentVector(dq, dL)


def derivative_along(F: Observable, m: int, p: StatePoint) -> float:
    """``V_m[F](p)``."""
    v = vector_field(m, p)
    return F.directional(p.q, p.L, None, v.dq, v.dL)


# --- integration ---------------------------------------------------------------------


def _rhs(m, q, L, min_gap, t):
    # lean version of vector_field for the stepping loop (validated against it in the tests)
    d = q[:, None] - q[None, :]
    gaps = -np.diff(q)
    if np.any(gaps < min_gap):
        raise RegularityLost(t, f"gap {float(np.min(gaps)):.3e} below {min_gap:.1e}")
    n = q.size
    C = np.zeros((n, n))
    off = ~np.eye(n, dtype=bool)
    C[off] = 1.0 / np.tanh(d[off])
    Lm = np.linalg.matrix_power(L, m)
    RLm = C * Lm
    return np.diag(Lm).real.copy(), RLm @ L - L @ RLm


def rk4_step(m: int, q, L, h: float, min_gap: float = MIN_GAP, t: float = 0.0):
    k1q, k1L = _rhs(m, q, L, min_gap, t)
    k2q, k2L = _rhs(m, q + 0.5 * h * k1q, L + 0.5 * h * k1L, min_gap, t)
    k3q, k3L = _rhs(m, q + 0.5 * h * k2q, L + 0.5 * h * k2L, min_gap, t)
    k4q, k4L = _rhs(m, q + h * k3q, L + h * k3L, min_gap, t)
    q = q + (h / 6.0) * (k1q + 2 * k2q + 2 * k3q + k4q)
    L = hermitian_part(L + (h / 6.0) * (k1L + 2 * k2L + 2 * k3L + k4L))
    return q, L


def trajectory(m: int, p0: StatePoint, t: float, steps: int, samples: int | None = None):
    """RK4 trajectory; yields ``(time, StatePoint)`` at ``samples + 1`` evenly spaced times."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    samples = steps if samples is None else samples
    if steps % samples:
        raise ValueError("steps must be a multiple of samples")
    every = steps // samples
    h = t / steps
    q, L = p0.q.copy(), p0.L.copy()
    yield 0.0, p0
    for k in range(1, steps + 1):
        q, L = rk4_step(m, q, L, h, p0.min_gap, (k - 1) * h)
        if k % every == 0:
            try:
                pt = StatePoint(q, L, p0.min_gap)
            except RegularityViolation as exc:
                raise RegularityLost(k * h, str(exc)) from exc
            yield k * h, pt


def integrate(m: int, p0: StatePoint, t: float, steps: int) -> StatePoint:
    """Classical RK4 with ``steps`` fixed steps of size ``t / steps``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    h = t / steps
    q, L = p0.q.copy(), p0.L.copy()
    for k in range(steps):
        q, L = rk4_step(m, q, L, h, p0.min_gap, k * h)
    try:
        return StatePoint(q, L, p0.min_gap)
    except RegularityViolation as exc:
        raise RegularityLost(t, str(exc)) from exc


def exact_flow(m: int, p0: StatePoint, t: float) -> StatePoint:
    """Solve the m-th flow by projecting the free motion ``e^q0 exp(t L0^m)``.

    Raises :class:`~bihamlab.errors.SingularValueCollision` when g(t) is not
    regular.  L(t) is determined up to conjugation by a diagonal unitary.
    """
    if t == 0:
        return p0
    g = np.diag(np.exp(p0.q)) @ mat_exp(t * mat_power(p0.L, m))
    _, q, etaR = ordered_svd(g, p0.min_gap)
    L = hermitian_part(etaR @ p0.L @ etaR.conj().T)
    return StatePoint(q, L, p0.min_gap)


# --- the reduction picture -------------------------------------------------------------


def slice_compensators(m: int, p: StatePoint):
    """``(Y^L, Y^R)`` making the free field ``h_m`` tangent to the gauge slice."""
    M = mat_power(p.L, m - 1) if m > 1 else np.eye(p.n, dtype=complex)
    YL = apply_sinh_inv(p.q, offdiag_part(hermitian_part(M)), p.min_gap)
    YR = apply_R(p.q, M, p.min_gap)
    return YL, YR


def tangency_residual(m: int, p: StatePoint) -> float:
    """Off-A part of ``L^(m-1) - sinh(ad_q) Y^L + cosh(ad_q) Y^L - Y^R``."""
    YL, YR = slice_compensators(m, p)
    M = mat_power(p.L, m - 1) if m > 1 else np.eye(p.n, dtype=complex)
    X = M - apply_sinh(p.q, YL, p.min_gap) + apply_cosh_offdiag(p.q, YL, p.min_gap) - YR
    off_A = X - np.diag(np.diag(X).real)
    return float(np.max(np.abs(off_A)))


def slice_velocity(m: int, p: StatePoint) -> TangentVector:
    """The reduced field obtained from the slice compensators.

    ``e^-q d(e^q)/dt = L^(m-1) + e^-q Y^L e^q - Y^R`` projected to A gives dq,
    and ``dL = [Y^R, L]``.
    """
    YL, YR = slice_compensators(m, p)
    M = mat_power(p.L, m - 1) if m > 1 else np.eye(p.n, dtype=complex)
    eq = np.diag(np.exp(p.q))
    emq = np.diag(np.exp(-p.q))
    X = M + emq @ YL @ eq - YR
    return TangentVector(np.diag(X).real.copy(), hermitian_part(commutator(YR, p.L)))


def build_unreduced(p: StatePoint) -> UnreducedPoint:
    """The slice point ``(e^q, L, xi = -sinh(ad_q) L)``."""
    xi = -apply_sinh(p.q, p.L, p.min_gap)
    return UnreducedPoint(np.diag(np.exp(p.q)).astype(complex), p.L.astype(complex), xi)


def moment_map_Phi(u: UnreducedPoint):
    """``(pi_G(g J g^-1) + xi, -pi_G(J))`` for the action of U(n) x U(n)."""
    gJg = u.g @ u.J @ np.linalg.inv(u.g)
    return antihermitian_part(gJg) + u.xi, -antihermitian_part(u.J)


def moment_map_phi(e: ExtendedStatePoint) -> np.ndarray:
    """``-2 Im(w)``: the moment map of the torus action on H° x iG."""
    return -2.0 * np.imag(e.w)


# --- commutation of flows ----------------------------------------------------------------


def _field_derivative(m: int, p: StatePoint, direction: TangentVector, h: float):
    """Central difference of ``vector_field(m, .)`` along ``direction``."""
    norm = np.sqrt(np.sum(direction.dq**2) + np.sum(np.abs(direction.dL) ** 2))
    if norm == 0:
        return np.zeros(p.n), np.zeros((p.n, p.n), dtype=complex)
    dq, dL = direction.dq / norm, direction.dL / norm
    step = h * max(1.0, float(np.max(np.abs(p.L))))
    plus = vector_field(m, StatePoint(p.q + step * dq, p.L + step * dL, p.min_gap))
    minus = vector_field(m, StatePoint(p.q - step * dq, p.L - step * dL, p.min_gap))
    scale = norm / (2 * step)
    return scale * (plus.dq - minus.dq), scale * (plus.dL - minus.dL)


def flow_commutator(m: int, l: int, p: StatePoint, h: float = 1e-5):
    """``(V_m o V_l - V_l o V_m)`` applied to q and L, by central differences."""
    vm = vector_field(m, p)
    vl = vector_field(l, p)
    a_q, a_L = _field_derivative(l, p, vm, h)
    b_q, b_L = _field_derivative(m, p, vl, h)
    return a_q - b_q, a_L - b_L


def flow_commutator_check(m: int, l: int, p: StatePoint, h: float = 1e-5):
    """Residuals of the commutator against ``(0, [T_(m,l), L])``."""
    cq, cL = flow_commutator(m, l, p, h)
    T = gauge_compensator_T(p.q, p.L, m, l, p.min_gap)
    return float(np.max(np.abs(cq))), float(np.max(np.abs(cL - commutator(T, p.L))))


def invariant_drift(m: int, p0: StatePoint, t: float, steps: int, k: int) -> float:
    """``max_t |H_k(t) - H_k(0)| / (1 + |H_k(0)|)`` along the RK4 trajectory."""
    if k < 1:
        raise ValueError("k must be >= 1")

    def Hk(L):
        return float(np.trace(np.linalg.matrix_power(L, k)).real) / k

    h0 = Hk(p0.L)
    worst = 0.0
    for _, pt in trajectory(m, p0, t, steps):
        worst = max(worst, abs(Hk(pt.L) - h0) / (1 + abs(h0)))
    return worst
