"""Gauge-invariant observables F(q, L) with exact first derivatives.

Observables are small immutable expression trees.  Generators are the
coordinates ``q[j]``, the diagonal torus variables ``xi[j]`` (imaginary
parts of a point of T, used by the unreduced bracket), and word traces
``Re tr(W_1 ... W_k)`` whose letters are diagonal projectors ``P_i = E_ii``
and powers ``L^a``.  Conjugating L by a diagonal unitary fixes every
``P_i``, so every word trace is gauge invariant.

Derivatives are computed in forward mode: each node evaluates to a
:class:`Jet` that carries one tangent component per real coordinate
(``n`` for q, ``n*n`` for L in the orthonormal Hermitian basis, ``n`` for xi).

Text form (prefix notation, indices 1-based)::

    mul(q[1], wtr(P1,L^2,P2,L))
    add(H(2), scale(0.5, exp(sub(q[1],q[2]))))
"""

from __future__ import annotations

import math
import re
import weakref
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fd import DEFAULT_FD, FDScheme
from .linalg_core import (
    as_hermitian,
    coords_to_herm,
    hermitian_basis,
    herm_to_coords,
    hermitian_part,
    pairing,
    phase_diagonal,
)


@dataclass(frozen=True)
class GradientPair:
    """Gradients of F at a point.

    ``grad1`` is the diagonal of the A-valued q-gradient, ``grad2`` the
    iG-valued L-gradient, and ``grad_xi`` the diagonal of the T-valued
    xi-gradient (purely imaginary), all with respect to ``Re tr(XY)``.
    """

    grad1: np.ndarray
    grad2: np.ndarray
    grad_xi: np.ndarray


class Jet:
    """A real value together with its gradient over the chart coordinates."""

    __slots__ = ("value", "grad")

    def __init__(self, value: float, grad: np.ndarray):
        self.value = value
        self.grad = grad

    def __add__(self, other: "Jet") -> "Jet":
        return Jet(self.value + other.value, self.grad + other.grad)

    def scale(self, c: float) -> "Jet":
        return Jet(c * self.value, c * self.grad)

    def __mul__(self, other: "Jet") -> "Jet":
        return Jet(self.value * other.value, self.value * other.grad + other.value * self.grad)

    def apply(self, f: float, df: float) -> "Jet":
        return Jet(f, df * self.grad)


class _Context:
    """Per-evaluation cache: powers of L and memoised node jets."""

    def __init__(self, q, L, xi):
        self.q = q
        self.L = L
        self.xi = xi
        self.n = L.shape[0]
        self.dim = 2 * self.n + self.n * self.n
        self._powers = {0: np.eye(self.n, dtype=complex), 1: L}
        self.memo: dict[int, Jet] = {}

    def power(self, a: int) -> np.ndarray:
        if a not in self._powers:
            self._powers[a] = self.power(a - 1) @ self.L
        return self._powers[a]

    def zero(self) -> np.ndarray:
        return np.zeros(self.dim)

    def l_slice(self) -> slice:
        return slice(self.n, self.n + self.n * self.n)


def _prepare(q, L, xi):
    q = np.asarray(q, dtype=float)
    L = as_hermitian(L)
    if q.shape != (L.shape[0],):
        raise ValueError(f"q has shape {q.shape} but L is {L.shape[0]}x{L.shape[0]}")
    if xi is None:
        xi = np.zeros(L.shape[0], dtype=complex)
    else:
        xi = np.asarray(xi, dtype=complex)
        if xi.ndim == 2:
            xi = np.diag(xi)
    return q, L, xi


class Observable:
    """Base class.  Subclasses provide ``evaluate`` and ``gradients``."""

    #: DSL members are gauge invariant by construction
    invariant: bool = True
    #: whether gradients are exact (False: finite-difference backed)
    analytic: bool = True

    def evaluate(self, q, L, xi=None) -> float:
        raise NotImplementedError

    def gradients(self, q, L, xi=None) -> GradientPair:
        raise NotImplementedError

    def directional(self, q, L, xi, dq, dL, dxi=None) -> float:
        """Derivative of F along the tangent vector ``(dq, dL, dxi)``."""
        g = self.gradients(q, L, xi)
        val = float(np.dot(dq, g.grad1)) + pairing(dL, g.grad2)
        if dxi is not None:
            val += float(np.real(np.dot(dxi, g.grad_xi)))
        return val

    def __call__(self, q, L, xi=None) -> float:
        return self.evaluate(q, L, xi)


class Expr(Observable):
    """A node of the observable expression language."""

    def jet(self, ctx: _Context) -> Jet:
        key = id(self)
        hit = ctx.memo.get(key)
        if hit is None:
            hit = self._jet(ctx)
            ctx.memo[key] = hit
        return hit

    def _jet(self, ctx: _Context) -> Jet:
        raise NotImplementedError

    def value(self, ctx: _Context) -> float:
        return self.jet(ctx).value

    def evaluate(self, q, L, xi=None) -> float:
        return float(self.jet(_Context(*_prepare(q, L, xi))).value)

    def gradients(self, q, L, xi=None) -> GradientPair:
        ctx = _Context(*_prepare(q, L, xi))
        g = self.jet(ctx).grad
        n = ctx.n
        return GradientPair(
            grad1=g[:n].copy(),
            grad2=coords_to_herm(g[ctx.l_slice()], n),
            grad_xi=-1j * g[n + n * n :],
        )

    def value_and_gradients(self, q, L, xi=None) -> tuple[float, GradientPair]:
        return self.evaluate(q, L, xi), self.gradients(q, L, xi)

    def to_text(self) -> str:
        raise NotImplementedError

    def max_index(self) -> int:
        """Largest 0-based index referenced by q[j], xi[j] or P_j (or -1)."""
        return max((c.max_index() for c in self.children()), default=-1)

    def children(self) -> tuple["Expr", ...]:
        return ()

    @property
    def uses_xi(self) -> bool:
        return any(c.uses_xi for c in self.children())

    def __repr__(self) -> str:
        return self.to_text()

    # algebra
    def __add__(self, other):
        return LinComb.of([(1.0, self), (1.0, _lift(other))])

    __radd__ = __add__

    def __sub__(self, other):
        return LinComb.of([(1.0, self), (-1.0, _lift(other))])

    def __rsub__(self, other):
        return LinComb.of([(1.0, _lift(other)), (-1.0, self)])

    def __neg__(self):
        return LinComb.of([(-1.0, self)])

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return LinComb.of([(float(other), self)])
        return Mul((self, _lift(other)))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        return Pow(self, int(k))


def _lift(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float)):
        return Const(float(x))
    raise TypeError(f"cannot combine an observable with {type(x).__name__}")


def _fmt(c: float) -> str:
    return repr(float(c))


@dataclass(frozen=True, eq=False, repr=False)
class Const(Expr):
    c: float

    def _jet(self, ctx):
        return Jet(self.c, ctx.zero())

    def to_text(self):
        return f"const({_fmt(self.c)})"


@dataclass(frozen=True, eq=False, repr=False)
class Q(Expr):
    """The coordinate q_j (0-based ``j``)."""

    j: int

    def _jet(self, ctx):
        g = ctx.zero()
        g[self.j] = 1.0
        return Jet(float(ctx.q[self.j]), g)

    def max_index(self):
        return self.j

    def to_text(self):
        return f"q[{self.j + 1}]"


@dataclass(frozen=True, eq=False, repr=False)
class Xi(Expr):
    """Imaginary part of the j-th diagonal entry of xi in T (0-based ``j``)."""

    j: int

    def _jet(self, ctx):
        g = ctx.zero()
        g[ctx.n + ctx.n * ctx.n + self.j] = 1.0
        return Jet(float(ctx.xi[self.j].imag), g)

    def max_index(self):
        return self.j

    @property
    def uses_xi(self):
        return True

    def to_text(self):
        return f"xi[{self.j + 1}]"


_GUARD_TRIALS = 3
_GUARD_TOL = 1e-10
_GUARDED: set = set()


@dataclass(frozen=True, eq=False, repr=False)
class Wtr(Expr):
    """Word trace ``Re tr(M_1 ... M_k)`` with letters ('P', i) or ('L', a), a >= 1."""

    word: tuple

    def __post_init__(self):
        word = tuple((str(kind), int(k)) for kind, k in self.word)
        for kind, k in word:
            if kind == "P" and k < 0:
                raise ValueError("projector index must be nonnegative")
            if kind == "L" and k < 1:
                raise ValueError("powers of L in a word must be >= 1")
            if kind not in ("P", "L"):
                raise ValueError(f"unknown letter {kind!r}")
        object.__setattr__(self, "word", word)
        self._guard()

    def _guard(self):
        # conjugation by a diagonal unitary must leave the value unchanged
        if self.word in _GUARDED:
            return
        n = max(2, self.max_index() + 1)
        rng = np.random.default_rng(20240611)
        q = np.zeros(n)
        for _ in range(_GUARD_TRIALS):
            A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            L = hermitian_part(A)
            eta = phase_diagonal(rng.uniform(0, 2 * np.pi, n))
            a = self.evaluate(q, L)
            b = self.evaluate(q, eta @ L @ eta.conj().T)
            if abs(a - b) > _GUARD_TOL * (1 + abs(a)):
                raise ValueError(f"word {self.to_text()} is not gauge invariant")
        _GUARDED.add(self.word)

    def max_index(self):
        return max((k for kind, k in self.word if kind == "P"), default=-1)

    def _mats(self, ctx):
        mats = []
        for kind, k in self.word:
            if kind == "L":
                mats.append(ctx.power(k))
            else:
                P = np.zeros((ctx.n, ctx.n), dtype=complex)
                P[k, k] = 1.0
                mats.append(P)
        return mats

    def _jet(self, ctx):
        n = ctx.n
        mats = self._mats(ctx)
        k = len(mats)
        eye = np.eye(n, dtype=complex)
        prefix = [eye]
        for M in mats:
            prefix.append(prefix[-1] @ M)
        suffix = [eye]
        for M in reversed(mats):
            suffix.append(M @ suffix[-1])
        suffix.reverse()  # suffix[r] = M_r ... M_k (0-based)
        value = float(np.trace(prefix[-1]).real)
        G = np.zeros((n, n), dtype=complex)
        for r, (kind, a) in enumerate(self.word):
            if kind != "L":
                continue
            # cyclic remainder of the word after removing the letter r
            S = suffix[r + 1] @ prefix[r]
            for s in range(a):
                G += ctx.power(a - 1 - s) @ S @ ctx.power(s)
        g = ctx.zero()
        g[ctx.l_slice()] = herm_to_coords(hermitian_part(G))
        return Jet(value, g)

    def to_text(self):
        letters = []
        for kind, k in self.word:
            if kind == "P":
                letters.append(f"P{k + 1}")
            else:
                letters.append("L" if k == 1 else f"L^{k}")
        return f"wtr({','.join(letters)})"


@dataclass(frozen=True, eq=False, repr=False)
class Hamiltonian(Expr):
    """``H_m = tr(L^m) / m``."""

    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("Hamiltonian index must be >= 1")

    def _jet(self, ctx):
        value = float(np.trace(ctx.power(self.m)).real) / self.m
        g = ctx.zero()
        g[ctx.l_slice()] = herm_to_coords(hermitian_part(ctx.power(self.m - 1)))
        return Jet(value, g)

    def to_text(self):
        return f"H({self.m})"


@dataclass(frozen=True, eq=False, repr=False)
class LinComb(Expr):
    terms: tuple  # of (coefficient, Expr)

    @staticmethod
    def of(pairs) -> Expr:
        flat = []
        for c, e in pairs:
            if isinstance(e, LinComb):
                flat.extend((c * c2, e2) for c2, e2 in e.terms)
            else:
                flat.append((float(c), e))
        if len(flat) == 1 and flat[0][0] == 1.0:
            return flat[0][1]
        return LinComb(tuple(flat))

    def children(self):
        return tuple(e for _, e in self.terms)

    def _jet(self, ctx):
        acc = Jet(0.0, ctx.zero())
        for c, e in self.terms:
            acc = acc + e.jet(ctx).scale(c)
        return acc

    def to_text(self):
        if len(self.terms) == 1:
            c, e = self.terms[0]
            return f"scale({_fmt(c)},{e.to_text()})"
        parts = [e.to_text() if c == 1.0 else f"scale({_fmt(c)},{e.to_text()})" for c, e in self.terms]
        return f"add({','.join(parts)})"


@dataclass(frozen=True, eq=False, repr=False)
class Mul(Expr):
    factors: tuple

    def children(self):
        return self.factors

    def _jet(self, ctx):
        acc = self.factors[0].jet(ctx)
        for f in self.factors[1:]:
            acc = acc * f.jet(ctx)
        return acc

    def to_text(self):
        return f"mul({','.join(f.to_text() for f in self.factors)})"


@dataclass(frozen=True, eq=False, repr=False)
class Exp(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)

    def _jet(self, ctx):
        a = self.arg.jet(ctx)
        e = math.exp(a.value)
        return a.apply(e, e)

    def to_text(self):
        return f"exp({self.arg.to_text()})"


@dataclass(frozen=True, eq=False, repr=False)
class Log(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)

    def _jet(self, ctx):
        a = self.arg.jet(ctx)
        if a.value <= 0:
            raise ValueError(f"log of nonpositive value {a.value!r}")
        return a.apply(math.log(a.value), 1.0 / a.value)

    def to_text(self):
        return f"log({self.arg.to_text()})"


@dataclass(frozen=True, eq=False, repr=False)
class Pow(Expr):
    arg: Expr
    k: int

    def children(self):
        return (self.arg,)

    def _jet(self, ctx):
        a = self.arg.jet(ctx)
        if self.k == 0:
            return Jet(1.0, ctx.zero())
        if self.k < 0 and a.value == 0:
            raise ZeroDivisionError("negative power of zero")
        return a.apply(a.value**self.k, self.k * a.value ** (self.k - 1))

    def to_text(self):
        return f"pow({self.arg.to_text()},{self.k})"


# --- constructors --------------------------------------------------------------


def q_coord(j: int) -> Q:
    """q_j with a 1-based index."""
    return Q(j - 1)


def xi_coord(j: int) -> Xi:
    return Xi(j - 1)


def word_trace(*letters) -> Wtr:
    """``word_trace("P1", "L^2", "P2", "L")`` or with tuples ``("P", 0)``."""
    word = []
    for letter in letters:
        if isinstance(letter, tuple):
            word.append(letter)
        else:
            word.append(_parse_letter(letter))
    return Wtr(tuple(word))


def hamiltonian(m: int) -> Hamiltonian:
    return Hamiltonian(m)


# --- derivation D: D[q_j] = 0, D[L] = identity -------------------------------------

_ZERO = Const(0.0)


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.c == 0.0


_D_CACHE: "weakref.WeakKeyDictionary[Expr, Expr]" = weakref.WeakKeyDictionary()


def derive_D(F: Expr) -> Expr:
    """Symbolic image of F under the derivation D (shift of L along the identity)."""
    try:
        return _D_CACHE[F]
    except KeyError:
        pass
    out = _derive_D(F)
    _D_CACHE[F] = out
    return out


def _derive_D(F: Expr) -> Expr:
    if isinstance(F, (Const, Q, Xi)):
        return _ZERO
    if isinstance(F, Hamiltonian):
        if F.m == 1:
            return Wtr(())
        return Wtr((("L", F.m - 1),))
    if isinstance(F, Wtr):
        terms = []
        for r, (kind, a) in enumerate(F.word):
            if kind != "L":
                continue
            reduced = F.word[:r] + ((("L", a - 1),) if a > 1 else ()) + F.word[r + 1 :]
            terms.append((float(a), Wtr(reduced)))
        return LinComb.of(terms) if terms else _ZERO
    if isinstance(F, LinComb):
        terms = [(c, derive_D(e)) for c, e in F.terms]
        terms = [(c, e) for c, e in terms if not _is_zero(e)]
        return LinComb.of(terms) if terms else _ZERO
    if isinstance(F, Mul):
        terms = []
        for i, f in enumerate(F.factors):
            df = derive_D(f)
            if _is_zero(df):
                continue
            others = F.factors[:i] + F.factors[i + 1 :]
            terms.append((1.0, Mul(others + (df,))))
        return LinComb.of(terms) if terms else _ZERO
    if isinstance(F, Exp):
        da = derive_D(F.arg)
        return _ZERO if _is_zero(da) else Mul((F, da))
    if isinstance(F, Log):
        da = derive_D(F.arg)
        return _ZERO if _is_zero(da) else Mul((da, Pow(F.arg, -1)))
    if isinstance(F, Pow):
        da = derive_D(F.arg)
        if _is_zero(da) or F.k == 0:
            return _ZERO
        return LinComb.of([(float(F.k), Mul((Pow(F.arg, F.k - 1), da)))])
    raise TypeError(f"no symbolic D for {type(F).__name__}")


# --- observables outside the expression language ------------------------------


@dataclass(frozen=True, eq=False)
class Linear(Observable):
    """``<X, q> + <Z, L> + <T, xi>``: linear coordinate functions.

    ``X`` is a real diagonal (vector), ``Z`` an element of iG, ``T`` the
    (imaginary) diagonal of an element of T.  These are not gauge invariant
    in general and bypass the expression-language guard.
    """

    X: np.ndarray | None = None
    Z: np.ndarray | None = None
    T: np.ndarray | None = None
    invariant = False

    def evaluate(self, q, L, xi=None):
        q, L, xi = _prepare(q, L, xi)
        val = 0.0
        if self.X is not None:
            val += float(np.dot(self.X, q))
        if self.Z is not None:
            val += pairing(self.Z, L)
        if self.T is not None:
            val += float(np.real(np.dot(self.T, xi)))
        return val

    def gradients(self, q, L, xi=None):
        n = np.asarray(L).shape[0]
        return GradientPair(
            grad1=np.zeros(n) if self.X is None else np.asarray(self.X, dtype=float),
            grad2=np.zeros((n, n), complex) if self.Z is None else hermitian_part(np.asarray(self.Z, dtype=complex)),
            grad_xi=np.zeros(n, complex) if self.T is None else np.asarray(self.T, dtype=complex),
        )


class FunctionObservable(Observable):
    """A scalar function of ``(q, L, xi)`` differentiated by central differences.

    Used for bracket values, which are pointwise-evaluable but not members of
    the expression language.  ``invariant`` is ``None`` when unknown.
    """

    analytic = False

    def __init__(self, fn: Callable, name: str = "<function>", invariant=None, fd: FDScheme = DEFAULT_FD):
        self.fn = fn
        self.name = name
        self.invariant = invariant
        self.fd = fd

    def __repr__(self):
        return f"FunctionObservable({self.name})"

    def evaluate(self, q, L, xi=None):
        q, L, xi = _prepare(q, L, xi)
        return float(self.fn(q, L, xi))

    def _step(self, q, L):
        # scaled by L only: q is kept away from the walls by its gaps, not its size
        return self.fd.step * max(1.0, float(np.max(np.abs(L))))

    def directional(self, q, L, xi, dq, dL, dxi=None):
        q, L, xi = _prepare(q, L, xi)
        dq = np.asarray(dq, dtype=float)
        dL = np.asarray(dL, dtype=complex)
        dxi = np.zeros_like(xi) if dxi is None else np.asarray(dxi, dtype=complex)
        norm = math.sqrt(float(np.sum(dq**2) + np.sum(np.abs(dL) ** 2) + np.sum(np.abs(dxi) ** 2)))
        if norm == 0.0:
            return 0.0
        dq, dL, dxi = dq / norm, dL / norm, dxi / norm

        def along(t):
            return self.fn(q + t * dq, L + t * dL, xi + t * dxi)

        return norm * self.fd.derivative(along, self._step(q, L))

    def gradients(self, q, L, xi=None):
        q, L, xi = _prepare(q, L, xi)
        n = L.shape[0]
        zq, zL, zx = np.zeros(n), np.zeros((n, n), complex), np.zeros(n, complex)
        g1 = np.empty(n)
        for j in range(n):
            e = zq.copy()
            e[j] = 1.0
            g1[j] = self.directional(q, L, xi, e, zL, zx)
        basis = _basis(n)
        g2 = np.array([self.directional(q, L, xi, zq, Z, zx) for Z in basis])
        gx = np.empty(n)
        for j in range(n):
            e = zx.copy()
            e[j] = 1j
            gx[j] = self.directional(q, L, xi, zq, zL, e)
        return GradientPair(g1, coords_to_herm(g2, n), -1j * gx)


_BASIS_CACHE: dict[int, np.ndarray] = {}


def _basis(n: int) -> np.ndarray:
    if n not in _BASIS_CACHE:
        _BASIS_CACHE[n] = hermitian_basis(n)
    return _BASIS_CACHE[n]


# --- module-level operations -------------------------------------------------------


def evaluate(F: Observable, q, L, xi=None) -> float:
    return F.evaluate(q, L, xi)


def gradients(F: Observable, q, L, xi=None) -> GradientPair:
    return F.gradients(q, L, xi)


def apply_derivation_D(F: Observable, q, L, xi=None) -> float:
    """``D[F](q, L) = <1_n, grad_2 F>``."""
    n = np.asarray(L).shape[0]
    if F.analytic:
        return float(np.trace(F.gradients(q, L, xi).grad2).real)
    return F.directional(q, L, xi, np.zeros(n), np.eye(n, dtype=complex))


def D_observable(F: Observable) -> Observable:
    """D[F] as an observable: symbolic for expression trees, pointwise otherwise."""
    if isinstance(F, Expr):
        return derive_D(F)
    return FunctionObservable(
        lambda q, L, xi: apply_derivation_D(F, q, L, xi),
        name=f"D[{F!r}]",
        invariant=F.invariant,
        fd=getattr(F, "fd", DEFAULT_FD),
    )


def check_gauge_invariance(F: Observable, trials: int = 10, n: int | None = None, seed: int = 0) -> bool:
    """Sample random ``(q, L, eta)`` and compare F(q, L) with F(q, eta L eta^-1)."""
    rng = np.random.default_rng(seed)
    if n is None:
        n = max(2, F.max_index() + 1) if isinstance(F, Expr) else 3
    for _ in range(trials):
        q = np.sort(rng.normal(size=n))[::-1] + np.arange(n)[::-1]
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        L = hermitian_part(A)
        eta = phase_diagonal(rng.uniform(0, 2 * np.pi, n))
        a = F.evaluate(q, L)
        b = F.evaluate(q, eta @ L @ eta.conj().T)
        if abs(a - b) > 1e-10 * (1 + abs(a)):
            return False
    return True


# --- text format ----------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<sym>[(),\[\]^]))")


def _tokenize(text: str):
    pos = 0
    out = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse observable near {text[pos:]!r}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


def _parse_letter(letter: str):
    letter = letter.replace(" ", "")
    if re.fullmatch(r"P\d+", letter):
        return ("P", int(letter[1:]) - 1)
    m = re.fullmatch(r"L(?:\^(\d+))?", letter)
    if m:
        return ("L", int(m.group(1) or 1))
    raise ValueError(f"bad word letter {letter!r}")


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None or (value is not None and tok[1] != value):
            raise ValueError(f"expected {value!r}, got {tok[1]!r}")
        self.i += 1
        return tok

    def number(self) -> float:
        kind, val = self.take()
        if kind != "num":
            raise ValueError(f"expected a number, got {val!r}")
        return float(val)

    def expr(self) -> Expr:
        kind, val = self.peek()
        if kind == "num":
            return Const(self.number())
        if kind != "name":
            raise ValueError(f"unexpected token {val!r}")
        self.take()
        if val in ("q", "xi"):
            self.take("[")
            j = int(self.number())
            self.take("]")
            if j < 1:
                raise ValueError("indices are 1-based")
            return Q(j - 1) if val == "q" else Xi(j - 1)
        self.take("(")
        if val == "wtr":
            letters = []
            while self.peek()[1] != ")":
                name = self.take()[1]
                if self.peek()[1] == "^":
                    self.take("^")
                    name += "^" + str(int(self.number()))
                letters.append(_parse_letter(name))
                if self.peek()[1] == ",":
                    self.take(",")
            self.take(")")
            return Wtr(tuple(letters))
        if val in ("H", "const"):
            x = self.number()
            self.take(")")
            return Hamiltonian(int(x)) if val == "H" else Const(x)
        if val in ("scale", "pow"):
            if val == "scale":
                c = self.number()
                self.take(",")
                e = self.expr()
                self.take(")")
                return LinComb.of([(c, e)])
            e = self.expr()
            self.take(",")
            k = int(self.number())
            self.take(")")
            return Pow(e, k)
        args = [self.expr()]
        while self.peek()[1] == ",":
            self.take(",")
            args.append(self.expr())
        self.take(")")
        if val == "add":
            return LinComb.of([(1.0, a) for a in args])
        if val == "sub":
            if len(args) != 2:
                raise ValueError("sub takes two arguments")
            return LinComb.of([(1.0, args[0]), (-1.0, args[1])])
        if val == "mul":
            return Mul(tuple(args))
        if val in ("exp", "log"):
            if len(args) != 1:
                raise ValueError(f"{val} takes one argument")
            return Exp(args[0]) if val == "exp" else Log(args[0])
        raise ValueError(f"unknown function {val!r}")


def parse(text: str) -> Expr:
    """Parse the prefix text form, e.g. ``mul(q[1], wtr(P1,L^2,P2,L^1))``."""
    p = _Parser(text)
    e = p.expr()
    if p.peek()[0] is not None:
        raise ValueError(f"trailing input in {text!r}")
    return e


# --- canonical test family ---------------------------------------------------------------


def canonical_family(n: int) -> list[Expr]:
    """q_j, H_m (m<=4), Re tr(E_ii L^a E_jj L^b) with a+b<=4, and exp(q1-q2) H_2."""
    fam: list[Expr] = [Q(j) for j in range(n)]
    fam += [Hamiltonian(m) for m in range(1, 5)]
    pairs = [(0, 1)] if n == 2 else [(0, 1), (1, 2)]
    for i, j in pairs:
        for a, b in [(1, 1), (1, 2), (2, 2), (1, 3)]:
            fam.append(Wtr((("P", i), ("L", a), ("P", j), ("L", b))))
    fam.append(Wtr((("P", 0), ("L", 2))))
    fam.append(Mul((Exp(LinComb.of([(1.0, Q(0)), (-1.0, Q(1))])), Hamiltonian(2))))
    return fam
