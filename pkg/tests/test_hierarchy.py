import numpy as np
import pytest
from hypothesis import given, settings

from bihamlab.brackets import ExtendedStatePoint, StatePoint, bracket1, bracket2
from bihamlab.errors import RegularityLost
from bihamlab.hierarchy import (
    _rhs,
    build_unreduced,
    derivative_along,
    exact_flow,
    flow_commutator_check,
    integrate,
    invariant_drift,
    moment_map_Phi,
    moment_map_phi,
    slice_compensators,
    slice_velocity,
    tangency_residual,
    trajectory,
    vector_field,
)
from bihamlab.linalg_core import phase_diagonal
from bihamlab.observables import Hamiltonian, canonical_family
from bihamlab.sampling import random_extended, random_state

from ._helpers import max_abs, seeds

SWAP = np.array([[0, 1], [1, 0]], dtype=complex)
Q10 = np.array([1.0, 0.0])
COTH1 = np.cosh(1) / np.sinh(1)


def test_vector_field_examples():
    v = vector_field(1, StatePoint(Q10, SWAP))
    assert np.allclose(v.dq, [0, 0])
    assert np.allclose(v.dL, np.diag([2 * COTH1, -2 * COTH1]))
    assert 2 * COTH1 == pytest.approx(2.6260706, abs=1e-7)
    v = vector_field(2, StatePoint(Q10, np.diag([2.0, 1.0])))
    assert np.allclose(v.dq, [4, 1]) and max_abs(v.dL) == 0


def test_lean_rhs_matches_vector_field(n):
    p = random_state(n, np.random.default_rng(n))
    for m in (1, 2, 3):
        dq, dL = _rhs(m, p.q, p.L, p.min_gap, 0.0)
        v = vector_field(m, p)
        assert max_abs(dq - v.dq) <= 1e-13 and max_abs(dL - v.dL) <= 1e-12


def test_vector_field_is_hamiltonian_for_both_brackets(state):
    # V_m = {., H_m}_2 = {., H_(m+1)}_1 on every family member
    for m in (1, 2, 3):
        for F in canonical_family(3):
            v = derivative_along(F, m, state)
            assert abs(v - bracket2(F, Hamiltonian(m), state)) <= 1e-9 * max(1, abs(v))
            assert abs(v - bracket1(F, Hamiltonian(m + 1), state)) <= 1e-9 * max(1, abs(v))


@given(seeds)
def test_vector_field_gauge_covariance(seed):
    rng = np.random.default_rng(seed)
    p = random_state(3, rng)
    eta = phase_diagonal(rng.uniform(0, 2 * np.pi, 3))
    pe = StatePoint(p.q, eta @ p.L @ eta.conj().T)
    for m in (1, 2):
        v, ve = vector_field(m, p), vector_field(m, pe)
        assert max_abs(v.dq - ve.dq) <= 1e-12
        assert max_abs(eta @ v.dL @ eta.conj().T - ve.dL) <= 1e-12


def test_integrate_diagonal_example():
    p = integrate(1, StatePoint(Q10, np.diag([2.0, 1.0])), 0.5, 10)
    # decoupled free motion: q(t) = q0 + t diag(L)
    assert np.allclose(p.q, [2.0, 0.5], atol=1e-13)
    assert np.allclose(p.L, np.diag([2.0, 1.0]))


def test_integrate_edge_cases(state):
    p = integrate(1, state, 0.0, 5)
    assert np.array_equal(p.q, state.q) and np.array_equal(p.L, state.L)
    with pytest.raises(ValueError):
        integrate(1, state, 0.1, 0)


def test_integrate_aborts_at_wall():
    # q_1 - q_2 shrinks at rate 1 under the first flow with L = diag(0, 1)
    p0 = StatePoint(np.array([0.05, 0.0]), np.diag([0.0, 1.0]))
    with pytest.raises(RegularityLost) as info:
        integrate(1, p0, 1.0, 100)
    assert info.value.t < 0.1
    with pytest.raises(RegularityLost) as info:
        list(trajectory(1, p0, 1.0, 100, samples=100))
    assert info.value.t < 0.1


def test_trajectory_sampling(state):
    times = [t for t, _ in trajectory(1, state, 0.1, 20, samples=4)]
    assert np.allclose(times, [0, 0.025, 0.05, 0.075, 0.1])
    with pytest.raises(ValueError):
        list(trajectory(1, state, 0.1, 20, samples=3))


def test_exact_flow_examples():
    p0 = StatePoint(Q10, np.diag([2.0, 1.0]))
    p = exact_flow(1, p0, 0.5)
    assert np.allclose(p.q, [2.0, 0.5])
    assert exact_flow(1, p0, 0.0) is p0


@pytest.mark.parametrize("m", [1, 2])
def test_exact_flow_matches_rk4(m, n):
    p0 = random_state(n, np.random.default_rng(30 + n))
    a, b = exact_flow(m, p0, 0.2), integrate(m, p0, 0.2, 2000)
    assert max_abs(a.q - b.q) <= 1e-8
    # compare gauge invariants: moduli of entries and the spectrum
    assert max_abs(np.abs(a.L) - np.abs(b.L)) <= 1e-8
    assert max_abs(np.linalg.eigvalsh(a.L) - np.linalg.eigvalsh(p0.L)) <= 1e-10


def test_flows_commute_on_invariants(state):
    s = t = 0.1
    a = exact_flow(2, exact_flow(1, state, s), t)
    b = exact_flow(1, exact_flow(2, state, t), s)
    assert max_abs(a.q - b.q) <= 1e-9
    assert max_abs(np.abs(a.L) - np.abs(b.L)) <= 1e-9


def test_invariant_drift(state):
    for k in (2, 3):
        assert invariant_drift(1, state, 1.0, 1000, k) <= 1e-9
    p = StatePoint(Q10, np.diag([2.0, 1.0]))
    assert invariant_drift(2, p, 0.3, 10, 2) <= 1e-15
    with pytest.raises(ValueError):
        invariant_drift(1, state, 1.0, 10, 0)


# --- commutation of flows ------------------------------------------------------------------


def test_flow_commutator_trivial_cases(state):
    p = StatePoint(state.q, np.diag([0.4, -0.3, 1.1]))
    rq, rL = flow_commutator_check(1, 2, p)
    assert rq <= 1e-9 and rL <= 1e-9
    rq, rL = flow_commutator_check(2, 2, state)
    assert rq <= 1e-15 and rL <= 1e-15


@settings(max_examples=10)
@given(seeds)
def test_flow_commutator_is_a_gauge_rotation(seed):
    p = random_state(3, np.random.default_rng(seed))
    for m, l in ((1, 2), (1, 3), (2, 3)):
        rq, rL = flow_commutator_check(m, l, p)
        assert rq <= 1e-6 and rL <= 1e-6


# --- reduction picture ----------------------------------------------------------------------


def test_slice_compensators_trivial_cases(state):
    YL, YR = slice_compensators(1, state)
    assert max_abs(YL) == 0 and max_abs(YR) == 0
    YL, YR = slice_compensators(3, StatePoint(state.q, np.diag([1.0, 2.0, -1.0])))
    assert max_abs(YL) == 0 and max_abs(YR) == 0


@given(seeds)
def test_slice_tangency_and_reduced_field(seed):
    p = random_state(3, np.random.default_rng(seed))
    for m in (1, 2, 3):
        assert tangency_residual(m, p) <= 1e-10
        # the slice field of h_(m+1) is the m-th hierarchy field
        vs, v = slice_velocity(m + 1, p), vector_field(m, p)
        assert max_abs(vs.dq - v.dq) <= 1e-12 and max_abs(vs.dL - v.dL) <= 1e-12


def test_moment_maps(state):
    Phi_L, Phi_R = moment_map_Phi(build_unreduced(state))
    assert max_abs(Phi_L) <= 1e-11 and max_abs(Phi_R) <= 1e-11
    # diagonal L: xi vanishes on the slice
    u = build_unreduced(StatePoint(state.q, np.diag([1.0, 0.5, -2.0])))
    assert max_abs(u.xi) == 0
    e = ExtendedStatePoint(state.q.astype(complex), state.L)
    assert np.array_equal(moment_map_phi(e), np.zeros(3))
    e = random_extended(3, np.random.default_rng(0))
    assert np.allclose(moment_map_phi(e), -2 * e.w.imag)
