"""Poisson brackets on gauge-invariant functions of (q, L) and their checks.

Two reduced brackets live on functions of ``(q, L)``:

* ``bracket2``, the quadratic bracket inherited from the Li bracket on
  ``H° x iG`` (``bracket_li``) by restricting to real ``w``;
* ``bracket1``, the linear bracket obtained from the unreduced bracket on
  ``A° x iG x T`` (``bracket_extended``) at ``xi_T = 0``.

Every bracket is linear in the gradients of its first argument, so
``{F, H} = dF(X_H)`` for a tangent vector ``X_H`` (the Hamiltonian vector
field of H).  Bracket values of bracket values are evaluated that way: the
inner value is a pointwise function whose derivative along ``X_H`` comes
from a central difference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .fd import DEFAULT_FD, INNER_FD, NESTED_FD, FDScheme
from .linalg_core import (
    MIN_GAP,
    as_hermitian,
    as_regular,
    as_regular_complex,
    commutator,
    hermitian_part,
    offdiag_part,
    pairing,
)
from .observables import D_observable, FunctionObservable, Observable
from .rmatrix import _entrywise, apply_R, apply_sinh_inv


# --- points ---------------------------------------------------------------------


@dataclass(frozen=True)
class StatePoint:
    q: np.ndarray
    L: np.ndarray
    min_gap: float = MIN_GAP

    def __post_init__(self):
        q = as_regular(self.q, self.min_gap)
        L = as_hermitian(self.L)
        if L.shape[0] != q.size:
            raise ValueError("q and L dimensions differ")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "L", L)

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def xi(self) -> np.ndarray:
        return np.zeros(self.n, dtype=complex)

    def moved(self, q, L, xi=None) -> "StatePoint":
        return StatePoint(q, L, self.min_gap)


@dataclass(frozen=True)
class TripleStatePoint:
    """A point ``(q, L, xi_T)``; ``xi`` holds the purely imaginary diagonal of xi_T."""

    q: np.ndarray
    L: np.ndarray
    xi: np.ndarray
    min_gap: float = MIN_GAP

    def __post_init__(self):
        q = as_regular(self.q, self.min_gap)
        L = as_hermitian(self.L)
        xi = np.asarray(self.xi, dtype=complex)
        if xi.ndim == 2:
            xi = np.diag(xi)
        if np.max(np.abs(xi.real), initial=0.0) > 1e-12:
            raise ValueError("xi_T must be purely imaginary (an element of T)")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "xi", 1j * xi.imag)

    @property
    def n(self) -> int:
        return self.q.size

    def moved(self, q, L, xi=None) -> "TripleStatePoint":
        return TripleStatePoint(q, L, self.xi if xi is None else xi, self.min_gap)


@dataclass(frozen=True)
class ExtendedStatePoint:
    """A point ``(w, L)`` of ``H° x iG`` with complex diagonal ``w``."""

    w: np.ndarray
    L: np.ndarray
    min_gap: float = MIN_GAP

    def __post_init__(self):
        w = as_regular_complex(self.w, self.min_gap)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "L", as_hermitian(self.L))

    @property
    def n(self) -> int:
        return self.w.size


@dataclass(frozen=True)
class BracketKind:
    tag: str
    x: float = 0.0
    y: float = 0.0

    TAGS = ("B1", "B2", "Li", "Extended", "DerivedOfB2", "Pencil", "LiOriginal")

    def __post_init__(self):
        if self.tag not in self.TAGS:
            raise ValueError(f"unknown bracket kind {self.tag!r}")
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError("pencil coefficients must be finite")

    @classmethod
    def pencil(cls, x: float, y: float) -> "BracketKind":
        return cls("Pencil", float(x), float(y))

    @property
    def analytic(self) -> bool:
        return self.tag in ("B1", "B2", "Li", "Extended", "LiOriginal")


B1 = BracketKind("B1")
B2 = BracketKind("B2")
LI = BracketKind("Li")
EXTENDED = BracketKind("Extended")
DERIVED = BracketKind("DerivedOfB2")


# --- Hamiltonian vector fields -----------------------------------------------------------


def _grads(F: Observable, p):
    return F.gradients(p.q, p.L, getattr(p, "xi", None))


def field2(H: Observable, p: StatePoint):
    """Tangent ``(dq, dL)`` with ``{F, H}_2 = dF(dq, dL)`` for every F."""
    g = _grads(H, p)
    L, K = p.L, g.grad2
    LK = L @ K
    dq = np.diag(LK).real.copy()
    dL = hermitian_part(-g.grad1[:, None] * L + 2.0 * apply_R(p.q, LK, p.min_gap) @ L)
    return dq, dL


def field1(H: Observable, p: StatePoint):
    """Tangent ``(dq, dL)`` with ``{F, H}_1 = dF(dq, dL)`` for every F."""
    g = _grads(H, p)
    L, K = p.L, g.grad2
    RK = apply_R(p.q, K, p.min_gap)
    dq = np.diag(K).real.copy()
    dL = hermitian_part(
        -np.diag(g.grad1).astype(complex)
        - apply_R(p.q, commutator(K, L), p.min_gap)
        + commutator(RK, L)
    )
    return dq, dL


def field_extended(H: Observable, p: TripleStatePoint):
    """Tangent ``(dq, dL, dxi)`` with ``{F, H} = dF(dq, dL, dxi)``."""
    g = _grads(H, p)
    L, K = p.L, g.grad2
    q = p.q
    RK = apply_R(q, K, p.min_gap)
    WK = apply_sinh_inv(q, offdiag_part(K), p.min_gap)
    xi = np.diag(p.xi)
    dq = np.diag(K).real.copy()
    dL = hermitian_part(
        -np.diag(g.grad1).astype(complex)
        - apply_R(q, commutator(K, L), p.min_gap)
        + commutator(RK, L)
        - apply_sinh_inv(q, commutator(WK, xi), p.min_gap)
        + commutator(L, np.diag(g.grad_xi))
    )
    dxi = 1j * np.diag(commutator(L, K)).imag
    return dq, dL, dxi


# --- the brackets ------------------------------------------------------------------------


def _via_field(F, H, p, formula, field):
    """Route a bracket through Hamiltonian vector fields when a side is pointwise-only."""
    if F.analytic and H.analytic:
        return formula(_grads(F, p), _grads(H, p), p)
    xi = getattr(p, "xi", None)
    if not F.analytic and H.analytic:
        return F.directional(p.q, p.L, xi, *field(H, p))
    if F.analytic and not H.analytic:
        return -H.directional(p.q, p.L, xi, *field(F, p))
    return formula(_grads(F, p), _grads(H, p), p)


def _formula2(gF, gH, p):
    L = p.L
    LF = L @ gF.grad2
    LH = L @ gH.grad2
    return (
        float(np.dot(gF.grad1, np.diag(LH).real))
        - float(np.dot(gH.grad1, np.diag(LF).real))
        - 2.0 * pairing(apply_R(p.q, LF, p.min_gap), LH)
    )


def _formula1(gF, gH, p):
    return (
        float(np.dot(gF.grad1, np.diag(gH.grad2).real))
        - float(np.dot(gH.grad1, np.diag(gF.grad2).real))
        + pairing(p.L, _r_bracket(p, gF.grad2, gH.grad2))
    )


def _r_bracket(p, X, Y):
    return commutator(apply_R(p.q, X, p.min_gap), Y) + commutator(X, apply_R(p.q, Y, p.min_gap))


def _formula_extended(gF, gH, p):
    q, L = p.q, p.L
    a, b, c = gF.grad1, gF.grad2, np.diag(gF.grad_xi)
    a2, b2, c2 = gH.grad1, gH.grad2, np.diag(gH.grad_xi)
    Wb = apply_sinh_inv(q, offdiag_part(b), p.min_gap)
    Wb2 = apply_sinh_inv(q, offdiag_part(b2), p.min_gap)
    return (
        float(np.dot(a, np.diag(b2).real))
        - float(np.dot(a2, np.diag(b).real))
        + pairing(L, _r_bracket(p, b, b2))
        + pairing(np.diag(p.xi), commutator(Wb, Wb2))
        + pairing(commutator(c2, b), L)
        - pairing(commutator(c, b2), L)
    )


def bracket2(F: Observable, H: Observable, p: StatePoint) -> float:
    """The quadratic bracket ``{F, H}_2``."""
    return _via_field(F, H, p, _formula2, field2)


def bracket1(F: Observable, H: Observable, p: StatePoint) -> float:
    """The linear bracket ``{F, H}_1``."""
    return _via_field(F, H, p, _formula1, field1)


def bracket_extended(F: Observable, H: Observable, p: TripleStatePoint) -> float:
    """Bracket of arbitrary functions of ``(q, L, xi_T)``.

    Assembled from the coordinate relations

        {q^X, L^Z} = <X, Z>,   {L^Z, xi^T} = L^{[T, Z]},   {q, q} = {q, xi} = {xi, xi} = 0,
        {L^Z1, L^Z2} = L^{[Z1, Z2]_R} + <xi_T, [W pi_Aperp Z1, W pi_Aperp Z2]>,

    with ``W = sinh(ad_q)^{-1}``.
    """
    return _via_field(F, H, p, _formula_extended, field_extended)


def _outer_fd(*obs) -> FDScheme:
    return DEFAULT_FD if all(o.analytic for o in obs) else NESTED_FD


def _D_of_function(fn, p: StatePoint, fd: FDScheme) -> float:
    """Derivative of ``fn(point)`` along ``L -> L + t 1_n`` by central differences."""
    eye = np.eye(p.n, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(p.L))))
    return fd.derivative(lambda t: fn(p.moved(p.q, p.L + t * eye)), fd.step * scale)


def bracket_derived(F: Observable, H: Observable, p: StatePoint, fd: FDScheme | None = None) -> float:
    """``D[{F,H}_2] - {D[F], H}_2 - {F, D[H]}_2`` with the outer D by finite differences."""
    fd = fd or _outer_fd(F, H)
    outer = _D_of_function(lambda pt: bracket2(F, H, pt), p, fd)
    return outer - bracket2(D_observable(F), H, p) - bracket2(F, D_observable(H), p)


def pencil(x: float, y: float, F: Observable, H: Observable, p: StatePoint, fd: FDScheme | None = None) -> float:
    val = 0.0
    if x:
        val += x * bracket2(F, H, p)
    if y:
        val += y * bracket_derived(F, H, p, fd)
    return val


def exactness_residual(F: Observable, H: Observable, p: StatePoint, fd: FDScheme | None = None) -> float:
    """``|D[{F,H}_1] - {D[F], H}_1 - {F, D[H]}_1|``."""
    fd = fd or _outer_fd(F, H)
    outer = _D_of_function(lambda pt: bracket1(F, H, pt), p, fd)
    return abs(outer - bracket1(D_observable(F), H, p) - bracket1(F, D_observable(H), p))


def bracket(kind: BracketKind, F: Observable, H: Observable, p, fd: FDScheme | None = None) -> float:
    """Dispatch on ``kind``; ``fd`` overrides the outer-D stencil of derived brackets."""
    if kind.tag == "B1":
        return bracket1(F, H, p)
    if kind.tag == "B2":
        return bracket2(F, H, p)
    if kind.tag == "Extended":
        return bracket_extended(F, H, p)
    if kind.tag == "DerivedOfB2":
        return bracket_derived(F, H, p, fd)
    if kind.tag == "Pencil":
        return pencil(kind.x, kind.y, F, H, p, fd)
    if kind.tag == "Li":
        return bracket_li(F, H, p)
    if kind.tag == "LiOriginal":
        return li_original_bracket(MhermFunction(F), MhermFunction(H), p)
    raise ValueError(kind.tag)


def bracket_function(kind: BracketKind, F: Observable, G: Observable, p) -> FunctionObservable:
    """``(q, L, xi) -> {F, G}(q, L, xi)`` as a pointwise observable."""
    fd = DEFAULT_FD if kind.analytic and F.analytic and G.analytic else NESTED_FD
    # an inner derived bracket is differentiated twice more, so its own D needs a wider stencil
    inner = INNER_FD if not kind.analytic and F.analytic and G.analytic else None

    def fn(q, L, xi):
        return bracket(kind, F, G, p.moved(q, L, xi), inner)

    invariant = bool(F.invariant and G.invariant)
    return FunctionObservable(fn, name=f"{{{F!r}, {G!r}}}_{kind.tag}", invariant=invariant, fd=fd)


def jacobi_residual(kind: BracketKind, F: Observable, G: Observable, H: Observable, p) -> float:
    """``|{{F,G},H} + {{G,H},F} + {{H,F},G}|`` with inner values differentiated numerically."""
    if kind.tag in ("Li", "LiOriginal"):
        raise ValueError("Jacobi checks are provided for B1, B2, Extended, DerivedOfB2 and Pencil")
    total = 0.0
    for A, B, C in ((F, G, H), (G, H, F), (H, F, G)):
        total += bracket(kind, bracket_function(kind, A, B, p), C, p)
    return abs(total)


# --- Li bracket on H° x iG ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WCoordinate:
    """The function ``w^X(w, L) = <w, X>`` for X in T (``X`` holds the imaginary diagonal)."""

    X: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=complex)
        if X.ndim == 2:
            X = np.diag(X)
        if np.max(np.abs(X.real), initial=0.0) > 1e-12:
            raise ValueError("X must lie in T (purely imaginary diagonal)")
        object.__setattr__(self, "X", X)

    def value(self, w, L) -> float:
        return float(np.real(np.dot(w, self.X)))


LiFunction = Union[Observable, WCoordinate]


def li_value(F: LiFunction, w, L) -> float:
    """Value of ``F^ext(w, L) = F(Re w, L)`` (or of a w-coordinate)."""
    if isinstance(F, WCoordinate):
        return F.value(w, L)
    return F.evaluate(np.real(w), L)


def li_gradients(F: LiFunction, w, L):
    """``(grad_1, grad_2)`` on H° x iG; grad_1 is a complex diagonal."""
    n = len(w)
    if isinstance(F, WCoordinate):
        return F.X.copy(), np.zeros((n, n), dtype=complex)
    g = F.gradients(np.real(w), L)
    return g.grad1.astype(complex), g.grad2


def bracket_li(F: LiFunction, H: LiFunction, p: ExtendedStatePoint) -> float:
    a, G = li_gradients(F, p.w, p.L)
    a2, K = li_gradients(H, p.w, p.L)
    LG = p.L @ G
    LK = p.L @ K
    return (
        float(np.real(np.dot(a, np.diag(LK))))
        - float(np.real(np.dot(a2, np.diag(LG))))
        - 2.0 * pairing(apply_R(p.w, LG, p.min_gap), LK)
    )


# --- the original form of the Li bracket on (u, L, u^dagger) ------------------------------


def apply_R_li(u, X, min_gap: float = MIN_GAP) -> np.ndarray:
    """``-(1/2) coth(ad_u / 2)`` on the off-diagonal matrices."""
    u = as_regular_complex(u, min_gap)
    return _entrywise(lambda d: -0.5 * np.cosh(d / 2) / np.sinh(d / 2), u, X, min_gap, require_offdiag=False)


def _h_basis(n):
    """Real basis of the complex diagonals with its dual under Re tr."""
    for j in range(n):
        e = np.zeros(n, dtype=complex)
        e[j] = 1.0
        yield e, e
        yield 1j * e, -1j * e


def _gl_basis(n):
    """Real basis of gl(n, C) with its dual under Re tr: E_jk -> E_kj, iE_jk -> -iE_kj."""
    for j in range(n):
        for k in range(n):
            E = np.zeros((n, n), dtype=complex)
            E[j, k] = 1.0
            yield E, E.T.copy()
            yield 1j * E, -1j * E.T


@dataclass(frozen=True, eq=False)
class MhermFunction:
    """A function f on ``{(u, L, u^dagger)}`` defined from F by ``F(w, L) = f(2w, L, 2w^dagger)``.

    ``extension`` selects the off-manifold extension used to differentiate:
    ``"symmetric"`` uses ``F((u + v^dagger)/4, herm(g))``, ``"u_only"`` uses
    ``F(u/2, herm(g))``.  The derivatives must not depend on the choice.
    """

    F: object
    extension: str = "symmetric"

    def _w(self, u, v):
        if self.extension == "symmetric":
            return (u + np.conj(v)) / 4.0
        if self.extension == "u_only":
            return u / 2.0
        raise ValueError(self.extension)

    def ext_value(self, u, g, v) -> float:
        return li_value(self.F, self._w(u, v), hermitian_part(g))

    def _ext_tangent(self, u, g, v, du, dg, dv) -> float:
        # exact first-order change of ext_value along (du, dg, dv)
        w = self._w(u, v)
        L = hermitian_part(g)
        a, G = li_gradients(self.F, w, L)
        dw = self._w(du, dv)
        return float(np.real(np.dot(dw, a))) + pairing(hermitian_part(dg), G)

    def delta1(self, u, L) -> np.ndarray:
        """``(delta_1 f^ext + (delta_2 f^ext)^dagger) / 2`` at ``(u, L, u^dagger)``."""
        n = len(u)
        v = np.conj(u)
        zero_g = np.zeros((n, n), dtype=complex)
        zero_d = np.zeros(n, dtype=complex)
        d1 = np.zeros(n, dtype=complex)
        d2 = np.zeros(n, dtype=complex)
        for B, dual in _h_basis(n):
            d1 += self._ext_tangent(u, L, v, B, zero_g, zero_d) * dual
            d2 += self._ext_tangent(u, L, v, zero_d, zero_g, B) * dual
        return 0.5 * (d1 + np.conj(d2))

    def D(self, u, L) -> np.ndarray:
        """``(D f^ext + (D' f^ext)^dagger) / 2``: left and right derivatives along g."""
        n = len(u)
        v = np.conj(u)
        zero_d = np.zeros(n, dtype=complex)
        Dl = np.zeros((n, n), dtype=complex)
        Dr = np.zeros((n, n), dtype=complex)
        for B, dual in _gl_basis(n):
            Dl += self._ext_tangent(u, L, v, zero_d, B @ L, zero_d) * dual
            Dr += self._ext_tangent(u, L, v, zero_d, L @ B, zero_d) * dual
        return 0.5 * (Dl + Dr.conj().T)


def li_original_bracket(f: MhermFunction, h: MhermFunction, p) -> float:
    """``-2<d1 f, Dh> + 2<d1 h, Df> - 2<R(u) Df, Dh>`` at ``(u, L, u^dagger)``.

    ``p`` is either an :class:`ExtendedStatePoint` (read as ``u = 2w``) or a
    pair ``(u, L)``.
    """
    if isinstance(p, ExtendedStatePoint):
        u, L, min_gap = 2.0 * p.w, p.L, p.min_gap
    else:
        u, L = p
        u = np.asarray(u, dtype=complex)
        L = as_hermitian(L)
        min_gap = MIN_GAP
    d1f, d1h = f.delta1(u, L), h.delta1(u, L)
    Df, Dh = f.D(u, L), h.D(u, L)
    return (
        -2.0 * float(np.real(np.dot(d1f, np.diag(Dh))))
        + 2.0 * float(np.real(np.dot(d1h, np.diag(Df))))
        - 2.0 * pairing(apply_R_li(u, Df, min_gap), Dh)
    )


def li_correspondence(F: LiFunction, H: LiFunction, p: ExtendedStatePoint, extension: str = "symmetric") -> float:
    """``|{f, h}(2w, L, 2w^dagger) + (1/2) {F, H}_Li(w, L)|``."""
    f = MhermFunction(F, extension)
    h = MhermFunction(H, extension)
    return abs(li_original_bracket(f, h, p) + 0.5 * bracket_li(F, H, p))
