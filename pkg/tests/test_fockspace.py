import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from septrap.errors import PropagationError, TruncationError
from septrap.fockspace import (
    FockBasis,
    Hamiltonian,
    HybridState,
    ModeOperator,
    PropagationInfo,
    Qubit,
    annihilation,
    apply_local,
    build_mode_operator,
    check_truncation,
    displacement_matrix,
    ion_layout,
    mode_layout,
    propagate,
    squeeze_matrix,
    tensor,
)


def test_basis_rejects_tiny_truncation():
    with pytest.raises(ValueError):
        FockBasis(0)
    assert FockBasis(1).dim == 2


def test_annihilation_entries():
    a = build_mode_operator(FockBasis(2), "annihilation").matrix
    expected = np.zeros((3, 3))
    expected[0, 1] = 1
    expected[1, 2] = math.sqrt(2)
    assert np.array_equal(a, expected)
    adag = build_mode_operator(FockBasis(2), "creation").matrix
    assert np.array_equal(adag, a.conj().T)


def test_number_operator_is_diagonal():
    n = build_mode_operator(FockBasis(2), "number").matrix
    assert np.array_equal(n, np.diag([0, 1, 2]))


def test_position_matches_ladder_sum():
    b = FockBasis(10)
    xi = 7.3e-9
    z = build_mode_operator(b, "position", xi).matrix
    a = build_mode_operator(b, "annihilation")
    assert np.array_equal(z, (xi * (a + a.dag)).matrix)


def test_operator_errors():
    with pytest.raises(ValueError):
        build_mode_operator(FockBasis(3), "momentum")
    with pytest.raises(ValueError):
        build_mode_operator(FockBasis(3), "position")
    with pytest.raises(ValueError):
        ModeOperator(np.zeros((2, 3)))


def test_tensor_identities():
    eye = tensor([build_mode_operator(FockBasis(1), "identity"),
                  build_mode_operator(FockBasis(2), "identity")])
    assert np.array_equal(eye.matrix, np.eye(6))


def test_tensor_basis_embedding():
    layout = mode_layout(2, 3)
    one = HybridState.basis(layout[:1], [1])
    zero = HybridState.basis(layout[1:], [0])
    psi = tensor([one, zero])
    assert psi.amplitudes[1 * 4 + 0] == 1
    assert np.array_equal(psi.amplitudes, HybridState.basis(layout, [1, 0]).amplitudes)


def test_ladder_action_moves_quantum():
    b = FockBasis(3)
    a = build_mode_operator(b, "annihilation")
    eye = build_mode_operator(b, "identity")
    hop = tensor([a, eye]) @ tensor([eye, a.dag])
    psi = hop @ HybridState.basis(mode_layout(2, 3), [1, 0])
    assert np.allclose(psi.amplitudes, HybridState.basis(mode_layout(2, 3), [0, 1]).amplitudes)


def test_tensor_rejects_mixtures():
    with pytest.raises(TypeError):
        tensor([build_mode_operator(FockBasis(1), "identity"),
                HybridState.basis(mode_layout(1, 1), [0])])
    with pytest.raises(ValueError):
        tensor([np.eye(2), np.ones(2)])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 3), min_size=3, max_size=3), st.integers(0, 2**32 - 1))
def test_tensor_is_associative(dims, seed):
    rng = np.random.default_rng(seed)
    # integer entries keep every product exact, so equality is exact too
    ops = [ModeOperator(rng.integers(-9, 10, size=(d, d)) + 1j * rng.integers(-9, 10, size=(d, d)))
           for d in dims]
    left = tensor([tensor(ops[:2]), ops[2]]).matrix
    right = tensor([ops[0], tensor(ops[1:])]).matrix
    assert np.array_equal(left, right)


def test_documented_index_order():
    layout = ion_layout(2, 2)
    for q1, m1, q2, m2 in [(0, 0, 0, 0), (1, 2, 0, 1), (0, 1, 1, 2), (1, 0, 1, 0)]:
        psi = HybridState.basis(layout, [q1, m1, q2, m2])
        expected = ((q1 * 3 + m1) * 2 + q2) * 3 + m2
        assert np.flatnonzero(psi.amplitudes).tolist() == [expected]
    assert HybridState.basis(layout, ["e", 0, "g", 1]).amplitude([1, 0, 0, 1]) == 1


def test_state_is_immutable():
    psi = HybridState.basis(mode_layout(1, 2), [0])
    with pytest.raises(ValueError):
        psi.amplitudes[0] = 2


def test_apply_local_targets_order():
    layout = ion_layout(2, 1)
    psi = HybridState.basis(layout, [0, 1, 1, 0])
    swap = np.zeros((4, 4))
    swap[[0, 2, 1, 3], [0, 1, 2, 3]] = 1
    out = apply_local(psi, swap, [1, 3])
    assert abs(out.amplitude([0, 0, 1, 1]) - 1) < 1e-15


def test_truncation_check():
    psi = HybridState.basis(mode_layout(1, 3), [3])
    with pytest.raises(TruncationError):
        check_truncation(psi, [0])
    check_truncation(HybridState.basis(mode_layout(1, 3), [2]), [0])


# --------------------------------------------------------------------------- #
# propagation
# --------------------------------------------------------------------------- #

def test_zero_hamiltonian_is_identity():
    rng = np.random.default_rng(3)
    v = rng.normal(size=6) + 1j * rng.normal(size=6)
    psi = HybridState(v / np.linalg.norm(v), mode_layout(1, 5))
    out = propagate(psi, np.zeros((6, 6)), 1.7e-3)
    assert np.array_equal(out.amplitudes, psi.amplitudes)


def test_oscillator_phase():
    nu = 2 * math.pi * 1e6
    n = 6
    num = np.diag(np.arange(n + 1.0))
    h = nu * (num + 0.5 * np.eye(n + 1))
    t = 0.37e-6
    out = propagate(HybridState.basis(mode_layout(1, n), [1]), h, t)
    assert abs(out.amplitude([1]) - np.exp(-1.5j * nu * t)) < 1e-12


def test_beam_splitter_quarter_period():
    g = 2 * math.pi * 1.5e3
    a1 = np.kron(annihilation(3), np.eye(4))
    a2 = np.kron(np.eye(4), annihilation(3))
    h = -g * (a1 @ a2.conj().T + a1.conj().T @ a2)
    psi = HybridState.basis(mode_layout(2, 3), [0, 1])
    out = propagate(psi, h, math.pi / (2 * g))
    assert abs(out.amplitude([1, 0]) - 1j) < 1e-8


def test_time_dependent_matches_rotating_frame_oracle():
    # lab frame H = w/2 sz + om cos(w t) sx; interaction frame wrt w/2 sz,
    # where sp = |0><1| picks up exp(i w t) and cos(w t) exp(i w t) = (exp(2 i w t) + 1) / 2
    w, om = 2 * math.pi * 2e6, 2 * math.pi * 1e5
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sz = np.diag([1.0, -1.0]).astype(complex)
    sp = np.array([[0, 1], [0, 0]], dtype=complex)
    h = Hamiltonian([(0.5 * om * sp, 2 * w), (0.5 * om * sp, 0.0),
                     (0.5 * om * sp.conj().T, -2 * w), (0.5 * om * sp.conj().T, 0.0)])
    t = 3e-6
    out = propagate(np.array([1, 0], dtype=complex), h, t, tol=1e-10)
    # oracle: product of many short exact steps of the lab-frame Hamiltonian
    steps = 20000
    dt = t / steps
    u = np.eye(2, dtype=complex)
    for j in range(steps):
        tm = (j + 0.5) * dt
        u = scipy.linalg.expm(-1j * dt * (0.5 * w * sz + om * math.cos(w * tm) * sx)) @ u
    lab = u @ np.array([1, 0], dtype=complex)
    frame = np.exp(0.5j * w * t * np.array([1, -1]))
    assert np.abs(frame * lab - out).max() < 1e-6


def test_propagate_reports_refinement():
    h = Hamiltonian([(np.array([[0, 1], [1, 0]], dtype=complex), lambda t: math.cos(1e4 * t))])
    info = PropagationInfo()
    out = propagate(np.array([1, 0], dtype=complex), h, 1e-3, tol=1e-9, info=info)
    assert info.halving_change < 1e-9
    assert abs(np.linalg.norm(out) - 1) < 1e-9
    # exact: H commutes with itself, phase = int cos = sin(1e4 t)/1e4
    theta = math.sin(10.0) / 1e4
    assert abs(out[1] + 1j * math.sin(theta)) < 1e-9


def test_non_hermitian_rejected():
    with pytest.raises(ValueError):
        propagate(np.array([1, 0], dtype=complex), np.array([[0, 1], [0, 0]], dtype=complex), 1.0)


def test_budget_exhaustion_is_reported():
    h = Hamiltonian([(np.array([[0, 1], [1, 0]], dtype=complex), lambda t: math.cos(1e6 * t))])
    with pytest.raises(PropagationError):
        propagate(np.array([1, 0], dtype=complex), h, 1e-4, tol=1e-17, max_refinements=0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-7, 1e-5))
def test_norm_preserved_for_random_driven_hamiltonians(seed, t):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = Hamiltonian([(1e6 * m, 3e6), (1e6 * m.conj().T, -3e6)])
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    out = propagate(v / np.linalg.norm(v), h, t, tol=1e-9)
    assert abs(np.linalg.norm(out) - 1) < 1e-9


def test_time_reversal_composition():
    rng = np.random.default_rng(11)
    m = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    m = m + m.conj().T
    v = rng.normal(size=5) + 1j * rng.normal(size=5)
    v /= np.linalg.norm(v)
    fwd = propagate(v, m, 0.8)
    back = propagate(fwd, -m, 0.8)
    assert np.abs(back - v).max() < 1e-12


def test_squeeze_and_displacement_are_near_unitary():
    s = squeeze_matrix(40, 0.05) @ squeeze_matrix(40, -0.05)
    assert np.abs(s - np.eye(41))[:6, :6].max() < 1e-10
    d = displacement_matrix(8, 0.1)
    assert abs(d[0, 0] - math.exp(-0.005)) < 1e-12


def test_squeezed_vacuum_is_ground_state_of_stiffer_trap():
    # S(r)|0> is the ground state of an oscillator at exp(2r) times the frequency
    n = 40
    a = annihilation(n)
    x = a + a.conj().T
    ratio = 1.3
    # H / nu_ref = n + (ratio^2 - 1) / 4 * X^2 in the reference basis
    h = a.conj().T @ a + 0.25 * (ratio ** 2 - 1) * x @ x
    vals, vecs = np.linalg.eigh(h)
    ground = vecs[:, 0]
    sq = squeeze_matrix(n, 0.5 * math.log(ratio))[:, 0]
    assert abs(abs(np.vdot(ground, sq)) - 1) < 1e-10
    assert abs(vals[1] - vals[0] - ratio) < 1e-8


def test_qubit_dim():
    assert Qubit().dim == 2
