import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from septrap.constants import BE9_PLUS, ELEMENTARY_CHARGE, EPSILON_0
from septrap.coulomb_coupling import (
    TrapPair,
    coupling_g,
    exchange_evolve,
    exchange_unitary,
    frequency_shift,
    full_coupling_propagate,
    renormalized_frequency,
)
from septrap.errors import TruncationError
from septrap.fockspace import HybridState, annihilation, ion_layout, mode_layout

TWO_PI = 2 * math.pi
NU = TWO_PI * 4.04e6
PAIR = TrapPair.identical(BE9_PLUS, NU, 40e-6)


def test_coupling_reference_values():
    assert coupling_g(PAIR) / TWO_PI == pytest.approx(1.5e3, rel=2e-2)
    near = TrapPair.identical(BE9_PLUS, NU, 20e-6)
    assert coupling_g(near) / TWO_PI == pytest.approx(12e3, rel=2e-2)


def test_identical_ion_closed_form():
    expected = ELEMENTARY_CHARGE ** 2 / (4 * math.pi * EPSILON_0 * 40e-6 ** 3 * BE9_PLUS.mass * NU)
    assert coupling_g(PAIR) == pytest.approx(expected, rel=1e-12)


def test_cubic_distance_scaling():
    far = TrapPair.identical(BE9_PLUS, NU, 80e-6)
    assert coupling_g(far) == pytest.approx(coupling_g(PAIR) / 8, rel=1e-12)


def test_swap_symmetry():
    pair = TrapPair(BE9_PLUS, BE9_PLUS, NU, 1.1 * NU, 35e-6)
    assert coupling_g(pair) == pytest.approx(coupling_g(pair.swapped()), rel=1e-14)
    assert frequency_shift(pair, 1) == pytest.approx(frequency_shift(pair.swapped(), 2), rel=1e-14)


def test_renormalization():
    shift = frequency_shift(PAIR, 1)
    assert shift / TWO_PI == pytest.approx(1.5e3, rel=2e-2)
    assert shift == pytest.approx(coupling_g(PAIR), rel=1e-14)
    assert renormalized_frequency(PAIR, 2) == pytest.approx(NU + shift, rel=1e-15)
    assert PAIR.expansion_valid


def test_decoupled_limit():
    pair = TrapPair.identical(BE9_PLUS, NU, math.inf)
    assert coupling_g(pair) == 0.0
    assert renormalized_frequency(pair, 1) == NU
    with pytest.raises(ValueError):
        frequency_shift(PAIR, 3)
    with pytest.raises(ValueError):
        TrapPair.identical(BE9_PLUS, NU, -1e-6)


# --------------------------------------------------------------------------- #
# effective exchange
# --------------------------------------------------------------------------- #

G = coupling_g(PAIR)


def _basis(n1, n2, n_max=6):
    return HybridState.basis(mode_layout(2, n_max), [n1, n2])


def test_half_exchange_phase():
    out = exchange_evolve(_basis(1, 0), G, math.pi / (2 * G))
    assert abs(out.amplitude([0, 1]) - 1j) < 1e-12


def test_vacuum_invariant():
    for t in (0.0, 1e-5, 3.3e-4):
        out = exchange_evolve(_basis(0, 0), G, t)
        assert abs(out.amplitude([0, 0]) - 1) < 1e-14


def test_full_period_sign():
    out = exchange_evolve(_basis(0, 1), G, math.pi / G)
    assert abs(out.amplitude([0, 1]) + 1) < 1e-12


def test_population_oscillation_matches_cos_squared():
    u = exchange_unitary(6, 6, G, 0.0)
    idx = 0 * 7 + 1
    for t in np.linspace(0, math.pi / G, 20):
        u = exchange_unitary(6, 6, G, t)
        assert abs(abs(u[idx, idx]) ** 2 - math.cos(G * t) ** 2) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-1e-3, 1e-3))
def test_excitation_number_conserved(seed, t):
    rng = np.random.default_rng(seed)
    n_max = 6
    amps = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    amps[:4, :4] = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    psi = HybridState(amps.ravel() / np.linalg.norm(amps), mode_layout(2, n_max))
    out = exchange_evolve(psi, G, t)
    n = np.arange(n_max + 1)
    n_tot = np.add.outer(n, n).ravel()

    def mean(state):
        return float(np.sum(n_tot * np.abs(state.amplitudes) ** 2))

    assert abs(mean(out) - mean(psi)) < 1e-12
    assert abs(out.norm - 1) < 1e-12


def test_time_reversal():
    rng = np.random.default_rng(5)
    amps = np.zeros((7, 7), dtype=complex)
    amps[:3, :3] = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    psi = HybridState(amps.ravel() / np.linalg.norm(amps), mode_layout(2, 6))
    back = exchange_evolve(exchange_evolve(psi, G, 7.1e-5), G, -7.1e-5)
    assert np.abs(back.amplitudes - psi.amplitudes).max() < 1e-12


def test_exchange_on_selected_modes_leaves_qubits_alone():
    psi = HybridState.basis(ion_layout(2, 3), ["e", 1, "g", 0])
    out = exchange_evolve(psi, G, math.pi / (2 * G), modes=(1, 3))
    assert abs(out.amplitude(["e", 0, "g", 1]) - 1j) < 1e-12


def test_exchange_truncation_edge():
    with pytest.raises(TruncationError):
        exchange_evolve(_basis(3, 0, n_max=3), G, 1e-5)


# --------------------------------------------------------------------------- #
# full quadratic model
# --------------------------------------------------------------------------- #

def test_decoupled_full_model_is_free_evolution():
    pair = TrapPair.identical(BE9_PLUS, NU, math.inf)
    psi = _basis(1, 0, n_max=4)
    out = full_coupling_propagate(psi, pair, 2e-6, tol=1e-10)
    # interaction picture: free evolution is the identity
    assert np.abs(out.amplitudes - psi.amplitudes).max() < 1e-9


@pytest.mark.slow
def test_full_model_detuned_transfer_is_suppressed():
    delta = 1e5
    pair = TrapPair(BE9_PLUS, BE9_PLUS, NU + delta, NU, 40e-6)
    # the Coulomb-shifted equilibrium is a coherent offset of ~0.63, hence n_max=10
    psi = _basis(1, 0, n_max=10)
    out = full_coupling_propagate(psi, pair, math.pi / (2 * G), tol=1e-6)
    change = abs(abs(out.amplitude([1, 0])) ** 2 - 1)
    assert change < (2 * G / delta) ** 2


def test_linear_terms_leave_exchange_intact_over_short_time():
    # a short window keeps the runtime small; the linear force is removed by
    # the equilibrium shift, so with and without it the result must agree
    t = 2e-6
    psi = _basis(1, 0, n_max=10)
    a = full_coupling_propagate(psi, PAIR, t, linear_terms=True, tol=1e-9)
    b = full_coupling_propagate(psi, PAIR, t, linear_terms=False, tol=1e-9)
    assert 1 - a.fidelity(b) < 1e-6
    ref = exchange_evolve(psi, G, t)
    assert 1 - a.fidelity(ref) < 1e-4


def test_lab_ladder_sanity():
    # the annihilation matrix used by the models has sqrt(n) on the superdiagonal
    a = annihilation(4)
    assert np.allclose(np.diag(a, 1) ** 2, np.arange(1, 5))
