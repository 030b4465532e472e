import numpy as np
import pytest
from hypothesis import given, settings

from bihamlab import brackets as br
from bihamlab.errors import RegularityViolation
from bihamlab.fd import NESTED_FD
from bihamlab.linalg_core import commutator, hermitian_basis, offdiag_part, pairing
from bihamlab.observables import FunctionObservable, Hamiltonian, Linear, Mul, Q, canonical_family, word_trace, xi_coord
from bihamlab.rmatrix import apply_R, apply_sinh_inv, r_bracket
from bihamlab.sampling import random_canonical, random_extended, random_state, random_triple

from ._helpers import max_abs, seeds

H = {m: Hamiltonian(m) for m in range(1, 6)}


def pointwise(F):
    """The same function, but only evaluable pointwise (forces the finite-difference route)."""
    return FunctionObservable(lambda q, L, xi: F.evaluate(q, L, xi), name=repr(F), fd=NESTED_FD)


# --- the two reduced brackets -------------------------------------------------------------


def test_involution(n):
    p = random_state(n, np.random.default_rng(n))
    for l in range(1, 5):
        for m in range(1, 5):
            assert abs(br.bracket2(H[l], H[m], p)) <= 1e-11
            assert abs(br.bracket1(H[l], H[m], p)) <= 1e-11


def test_coordinate_flows(state):
    for m in (1, 2, 3):
        Lm = np.linalg.matrix_power(state.L, m)
        for j in range(3):
            assert br.bracket2(Q(j), H[m], state) == pytest.approx(Lm[j, j].real, abs=1e-12)
            assert br.bracket1(Q(j), H[m + 1], state) == pytest.approx(Lm[j, j].real, abs=1e-12)


def test_trivial_values(state):
    F = word_trace("P1", "L", "P2", "L^2")
    assert br.bracket2(F, F, state) == 0.0
    assert br.bracket1(Q(0), Q(1) * Q(2), state) == 0.0
    assert br.bracket2(Q(0), Q(1), state) == 0.0


def test_bracket2_entrywise_formula():
    # {q_1, H_2}_2 and the L-part written out for n=2
    p = br.StatePoint(np.array([1.0, 0.0]), np.array([[0.3, 0.5 - 0.2j], [0.5 + 0.2j, -0.1]]))
    F = word_trace("P1", "L", "P2", "L")  # |L_12|^2
    G = H[3]
    g2F, g2G = F.gradients(p.q, p.L).grad2, G.gradients(p.q, p.L).grad2
    direct = -2 * np.real(np.trace(apply_R(p.q, p.L @ g2F) @ p.L @ g2G))
    assert br.bracket2(F, G, p) == pytest.approx(direct, abs=1e-13)


@given(seeds)
def test_antisymmetry_and_leibniz_analytic(seed):
    rng = np.random.default_rng(seed)
    p = random_state(3, rng)
    F, G, K = random_canonical(3, rng)
    FG = Mul((F, G))
    f, g = F.evaluate(p.q, p.L), G.evaluate(p.q, p.L)
    for b in (br.bracket1, br.bracket2):
        assert abs(b(F, G, p) + b(G, F, p)) <= 1e-10
        lhs = b(FG, K, p)
        assert abs(lhs - f * b(G, K, p) - g * b(F, K, p)) <= 1e-10 * max(1, abs(lhs))


@settings(max_examples=5)
@given(seeds)
def test_pointwise_route_agrees_with_analytic(seed):
    rng = np.random.default_rng(seed)
    p = random_state(3, rng)
    F, G = random_canonical(3, rng, 2)
    for b in (br.bracket1, br.bracket2):
        exact = b(F, G, p)
        assert abs(b(pointwise(F), G, p) - exact) <= 1e-8
        assert abs(b(F, pointwise(G), p) - exact) <= 1e-8
    # antisymmetry and Leibniz for the pointwise-assembled derived bracket
    assert abs(br.bracket_derived(F, G, p) + br.bracket_derived(G, F, p)) <= 1e-6
    K = random_canonical(3, rng, 1)[0]
    lhs = br.bracket_derived(Mul((F, G)), K, p)
    rhs = F.evaluate(p.q, p.L) * br.bracket_derived(G, K, p) + G.evaluate(p.q, p.L) * br.bracket_derived(F, K, p)
    assert abs(lhs - rhs) <= 1e-6 * max(1, abs(lhs))


def test_brackets_reject_wall():
    with pytest.raises(RegularityViolation):
        br.StatePoint(np.array([0.0, 0.0]), np.eye(2))


# --- derived bracket, pencil, exactness ----------------------------------------------------


def test_derived_bracket_examples(state):
    assert abs(br.bracket_derived(Q(0), Q(1), state)) <= 1e-12
    assert br.bracket_derived(Q(0), H[2], state) == pytest.approx(state.L[0, 0].real, abs=1e-6)
    assert abs(br.bracket_derived(H[2], H[3], state)) <= 1e-6


def test_derived_bracket_equals_bracket1_on_family(state):
    fam = canonical_family(3)
    worst = max(abs(br.bracket1(F, G, state) - br.bracket_derived(F, G, state)) for F in fam for G in fam)
    assert worst <= 1e-6


def test_derived_bracket_is_not_bracket2(state):
    # guards against a derived bracket that silently returns bracket2
    F, G = Q(0), H[2]
    assert abs(br.bracket_derived(F, G, state) - br.bracket2(F, G, state)) > 1e-3


def test_pencil_examples(state):
    F, G = word_trace("P1", "L", "P2", "L^2"), Q(1) * H[2]
    assert br.pencil(1, 0, F, G, state) == br.bracket2(F, G, state)
    assert br.pencil(0, 1, F, G, state) == pytest.approx(br.bracket1(F, G, state), abs=1e-6)
    assert abs(br.pencil(1, 1, H[2], H[3], state)) <= 1e-6


def test_exactness_examples(state):
    assert br.exactness_residual(Q(0), Q(1), state) == 0.0
    assert br.exactness_residual(Q(0), H[2], state) <= 1e-6
    assert br.exactness_residual(H[2], word_trace("P1", "L", "P2", "L"), state) <= 1e-6


def test_exactness_on_family(state):
    fam = canonical_family(3)
    assert max(br.exactness_residual(F, G, state) for F in fam for G in fam) <= 1e-6


# --- Jacobi -------------------------------------------------------------------------------


def test_jacobi_repeated_argument(state):
    F, G = random_canonical(3, np.random.default_rng(5), 2)
    for kind in (br.B1, br.B2, br.DERIVED):
        assert br.jacobi_residual(kind, F, F, G, state) <= 1e-8


@pytest.mark.parametrize("kind", [br.B1, br.B2])
def test_jacobi_reduced(kind, n):
    rng = np.random.default_rng(40 + n)
    for _ in range(3):
        p = random_state(n, rng)
        assert br.jacobi_residual(kind, *random_canonical(n, rng), p) <= 1e-5


def test_jacobi_extended():
    rng = np.random.default_rng(8)
    for _ in range(3):
        p = random_triple(3, rng)
        F, G, K = random_canonical(3, rng)
        assert br.jacobi_residual(br.EXTENDED, F + xi_coord(1 + rng.integers(3)) * G, G, K, p) <= 1e-5


def test_jacobi_pencil(state):
    F, G, K = word_trace("P1", "L", "P2", "L^2"), Q(0) * H[2], H[3] + word_trace("P2", "L", "P3", "L")
    assert br.jacobi_residual(br.BracketKind.pencil(0.7, -1.3), F, G, K, state) <= 1e-5


def test_jacobi_detects_a_non_poisson_bracket(state, monkeypatch):
    # scaling the R-term of bracket2 by 1/2 gives a bilinear form that is not Poisson
    original = br._formula2

    def broken(gF, gH, p):
        L = p.L
        return original(gF, gH, p) + pairing(apply_R(p.q, L @ gF.grad2), L @ gH.grad2)

    monkeypatch.setattr(br, "_formula2", broken)
    monkeypatch.setattr(
        br,
        "field2",
        lambda Hh, p: _broken_field2(Hh, p),
    )
    F, G, K = word_trace("P1", "L", "P2", "L^2"), Q(0) * H[2], word_trace("P2", "L", "P3", "L")
    assert br.jacobi_residual(br.B2, F, G, K, state) > 1e-3


def _broken_field2(Hh, p):
    from bihamlab.linalg_core import hermitian_part

    g = Hh.gradients(p.q, p.L)
    LK = p.L @ g.grad2
    dq = np.diag(LK).real.copy()
    dL = hermitian_part(-g.grad1[:, None] * p.L + 1.0 * apply_R(p.q, LK) @ p.L)
    return dq, dL


def test_kind_validation():
    with pytest.raises(ValueError):
        br.BracketKind("B3")
    with pytest.raises(ValueError):
        br.BracketKind.pencil(np.inf, 0)
    with pytest.raises(ValueError):
        br.jacobi_residual(br.LI, Q(0), Q(1), H[2], None)


# --- extended bracket on (q, L, xi_T) -----------------------------------------------------


def test_extended_coordinate_relations():
    rng = np.random.default_rng(9)
    n = 3
    p = random_triple(n, rng)
    xi = np.diag(p.xi)
    B = hermitian_basis(n)
    eye = np.eye(n)
    for Z1 in B:
        for j in range(n):
            T = 1j * eye[j]
            assert br.bracket_extended(Linear(X=eye[j]), Linear(Z=Z1), p) == pytest.approx(pairing(np.diag(eye[j]), Z1), abs=1e-14)
            expected = pairing(p.L, commutator(np.diag(T), Z1))
            assert br.bracket_extended(Linear(Z=Z1), Linear(T=T), p) == pytest.approx(expected, abs=1e-13)
            assert br.bracket_extended(Linear(X=eye[j]), Linear(T=T), p) == 0.0
            assert br.bracket_extended(Linear(T=T), Linear(T=1j * eye[(j + 1) % n]), p) == 0.0
        for Z2 in B:
            W1 = apply_sinh_inv(p.q, offdiag_part(Z1))
            W2 = apply_sinh_inv(p.q, offdiag_part(Z2))
            expected = pairing(p.L, r_bracket(p.q, Z1, Z2)) + pairing(xi, commutator(W1, W2))
            assert br.bracket_extended(Linear(Z=Z1), Linear(Z=Z2), p) == pytest.approx(expected, abs=1e-12)


def test_extended_reduces_to_bracket1(state):
    p0 = br.TripleStatePoint(state.q, state.L, np.zeros(3))
    assert abs(br.bracket_extended(H[1], H[3], p0)) <= 1e-12
    B = hermitian_basis(3)
    for Za in B:
        for Zb in B:
            a, b = Linear(Z=Za), Linear(Z=Zb)
            assert abs(br.bracket_extended(a, b, p0) - br.bracket1(a, b, state)) <= 1e-10
    for F in canonical_family(3):
        for G in canonical_family(3):
            assert abs(br.bracket_extended(F, G, p0) - br.bracket1(F, G, state)) <= 1e-10


def test_extended_sees_xi():
    # away from xi = 0 the symmetric and antisymmetric coordinates of one entry see xi
    p = random_triple(3, np.random.default_rng(3))
    Z1, Z2 = hermitian_basis(3)[3], hermitian_basis(3)[6]
    red = br.StatePoint(p.q, p.L)
    assert abs(br.bracket_extended(Linear(Z=Z1), Linear(Z=Z2), p) - br.bracket1(Linear(Z=Z1), Linear(Z=Z2), red)) > 1e-3


def test_triple_point_rejects_real_xi():
    with pytest.raises(ValueError):
        br.TripleStatePoint(np.array([1.0, 0.0]), np.eye(2), np.array([1.0, 0.0]))


# --- Li bracket and the original form ------------------------------------------------------


def test_li_restriction(n):
    p = random_state(n, np.random.default_rng(70 + n))
    e = br.ExtendedStatePoint(p.q.astype(complex), p.L)
    fam = canonical_family(n)
    for F in fam:
        for G in fam:
            assert abs(br.bracket_li(F, G, e) - br.bracket2(F, G, p)) <= 1e-11


def test_li_w_coordinates():
    rng = np.random.default_rng(12)
    e = random_extended(3, rng)
    X, Y = 1j * rng.normal(size=3), 1j * rng.normal(size=3)
    wX, wY = br.WCoordinate(X), br.WCoordinate(Y)
    assert br.bracket_li(wX, wY, e) == 0.0
    for F in (H[2], H[3], word_trace("P1", "L", "P3", "L^2")):
        G = F.gradients(e.w.real, e.L).grad2
        assert abs(br.bracket_li(F, wX, e) - pairing(G, -0.5 * commutator(np.diag(X), e.L))) <= 1e-10
    with pytest.raises(ValueError):
        br.WCoordinate(np.array([1.0, 0.0, 0.0]))


def test_li_depends_on_imaginary_part_of_w():
    rng = np.random.default_rng(13)
    e = random_extended(3, rng)
    e_real = br.ExtendedStatePoint(e.w.real.astype(complex), e.L)
    F, G = word_trace("P1", "L", "P2", "L^2"), H[3]
    assert abs(br.bracket_li(F, G, e) - br.bracket_li(F, G, e_real)) > 1e-6


def test_li_correspondence_examples():
    rng = np.random.default_rng(14)
    p = random_state(3, rng)
    e = br.ExtendedStatePoint(p.q.astype(complex), p.L)
    assert br.li_correspondence(H[2], word_trace("P1", "L", "P2", "L"), e) <= 1e-11
    e = random_extended(3, rng)
    assert br.li_correspondence(br.WCoordinate(1j * rng.normal(size=3)), H[2], e) <= 1e-11
    # the half-argument coth of the original r-matrix at u = 2q is coth(ad_q)
    X = offdiag_part(rng.normal(size=(3, 3)) + 0j)
    assert max_abs(br.apply_R_li(2 * p.q, X) + 0.5 * apply_R(p.q, X)) <= 1e-14


@given(seeds)
def test_li_correspondence_random(seed):
    rng = np.random.default_rng(seed)
    e = random_extended(3, rng)
    F, G = random_canonical(3, rng, 2)
    for ext in ("symmetric", "u_only"):
        assert br.li_correspondence(F, G, e, ext) <= 1e-10
    assert br.li_original_bracket(br.MhermFunction(F), br.MhermFunction(G), e) != pytest.approx(
        0.5 * br.bracket_li(F, G, e), abs=1e-6
    ) or abs(br.bracket_li(F, G, e)) < 1e-6


@given(seeds)
def test_derivative_relations_of_original_picture(seed):
    rng = np.random.default_rng(seed)
    e = random_extended(3, rng)
    F = random_canonical(3, rng, 1)[0]
    f = br.MhermFunction(F)
    g = F.gradients(e.w.real, e.L)
    u = 2 * e.w
    assert max_abs(f.D(u, e.L) - e.L @ g.grad2) <= 1e-10
    assert max_abs(f.delta1(u, e.L) - 0.25 * g.grad1) <= 1e-10
