import math

import numpy as np
import pytest

from septrap.adiabatic_sweep import (
    RAMP_OFF,
    RAMP_ON,
    SweepSpec,
    exchange_step,
    gamma_nm,
    resonant_hold,
    sweep_derivative,
    sweep_propagate,
)
from septrap.constants import BE9_PLUS
from septrap.coulomb_coupling import TrapPair, coupling_g
from septrap.fockspace import HybridState, annihilation, mode_layout

TWO_PI = 2 * math.pi
NU = TWO_PI * 4.04e6
DELTA = 1e5  # rad/s
TAU = 9e-6
PAIR = TrapPair.identical(BE9_PLUS, NU, 40e-6)
SWEEP = SweepSpec.linear(DELTA, TAU)


def test_gamma_reference_bounds():
    g20 = gamma_nm(PAIR, SWEEP, 2, 0)
    g31 = gamma_nm(PAIR, SWEEP, 3, 1)
    assert g20 < 3.1e-6 and g31 < 5.3e-6
    assert g20 == pytest.approx(3.05e-6, rel=3e-2)
    assert g31 == pytest.approx(5.28e-6, rel=3e-2)


def test_gamma_closed_form_and_selection_rule():
    beta = DELTA / TAU
    assert gamma_nm(PAIR, SWEEP, 0, 2) == pytest.approx(beta * math.sqrt(2) / (8 * NU ** 2), rel=1e-14)
    assert gamma_nm(PAIR, SWEEP, 1, 0) == 0.0
    assert gamma_nm(PAIR, SWEEP, 4, 1) == 0.0
    with pytest.raises(ValueError):
        gamma_nm(PAIR, SWEEP, 2, 2)
    with pytest.raises(ValueError):
        gamma_nm(PAIR, SWEEP, 2, 0, at_nu1=2 * NU)


def test_gamma_ends_of_ramp_agree():
    lo = gamma_nm(PAIR, SWEEP, 2, 0, at_nu1=NU)
    hi = gamma_nm(PAIR, SWEEP, 2, 0, at_nu1=NU + DELTA)
    # the two ends differ by the squared frequency ratio, about 0.8% here
    assert lo / hi == pytest.approx(((NU + DELTA) / NU) ** 2, rel=1e-14)
    assert abs(lo / hi - 1) < 1e-2


def test_gamma_matches_finite_difference_eigenbasis():
    # single trap in units of nu1; H(nu) = p^2/2M + M nu^2 z^2/2 written in the
    # ladder basis of the reference frequency, then diagonalised numerically
    n = 120
    a = annihilation(n)
    x = a + a.conj().T
    num = a.conj().T @ a

    def h(nu):
        return num + 0.5 * np.eye(n + 1) + 0.25 * (nu ** 2 - 1) * x @ x

    delta = 1e-6
    _, vecs = np.linalg.eigh(h(1.0))
    _, vecs_up = np.linalg.eigh(h(1.0 + delta))
    # dH/dnu by a central difference, and the same through the two eigenbases
    dh = (h(1.0 + delta) - h(1.0 - delta)) / (2 * delta)
    beta = DELTA / TAU / NU ** 2  # rate in units of nu1^2
    for hi, lo in [(2, 0), (3, 1)]:
        elem = abs(vecs[:, hi] @ dh @ vecs[:, lo])
        fd = abs(vecs_up[:, hi] @ (h(1.0 + delta) - h(1.0)) @ vecs[:, lo]) / delta
        expected = gamma_nm(PAIR, SWEEP, hi, lo)
        assert beta * elem / (hi - lo) ** 2 == pytest.approx(expected, rel=1e-6)
        assert beta * fd / (hi - lo) ** 2 == pytest.approx(expected, rel=1e-5)


def test_sweep_derivative_matrix():
    d = sweep_derivative(6, 2.0)
    a = annihilation(6)
    assert np.allclose(d, (a + a.conj().T) @ (a + a.conj().T))


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        SweepSpec(1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        SweepSpec(1.0, 1.0, 1.0, "sideways")
    off = SWEEP.reversed()
    assert off.direction == RAMP_OFF and off.reversed().direction == RAMP_ON
    assert SWEEP.nu1(NU, 0.0) == NU + DELTA
    assert SWEEP.nu1(NU, TAU) == pytest.approx(NU, rel=1e-15)
    assert off.nu1(NU, TAU) == pytest.approx(NU + DELTA, rel=1e-15)


# --------------------------------------------------------------------------- #
# numerical ramps
# --------------------------------------------------------------------------- #

def _state(n1, n2, n_max=4):
    return HybridState.basis(mode_layout(2, n_max), [n1, n2])


def test_ground_state_leakage_is_small():
    res = sweep_propagate(_state(0, 0), PAIR, SWEEP, include_coupling=False, tol=1e-10)
    assert res.leakage < 1e-4
    assert abs(res.state.norm - 1) < 1e-10
    assert res.accrued_exchange_angle == 0.0


def test_static_trap_has_no_leakage():
    static = SweepSpec(0.0, TAU, 0.0)
    psi = _state(1, 0)
    res = sweep_propagate(psi, PAIR, static, include_coupling=False)
    assert res.leakage < 1e-14
    assert np.abs(res.state.amplitudes - psi.amplitudes).max() < 1e-9


@pytest.mark.slow
def test_leakage_falls_with_ramp_time():
    leaks = []
    for tau in (4.5e-6, 9e-6, 18e-6, 36e-6):
        res = sweep_propagate(_state(0, 0), PAIR, SweepSpec.linear(DELTA, tau),
                              include_coupling=False, tol=1e-11)
        leaks.append(res.leakage)
        assert abs(res.state.norm - 1) < 1e-10
    for shorter, longer in zip(leaks, leaks[1:]):
        assert longer <= shorter + 1e-7


def test_ramp_off_from_excited_level_keeps_occupation():
    res = sweep_propagate(_state(1, 0), PAIR, SWEEP.reversed(), include_coupling=False,
                          tol=1e-10)
    assert res.leakage < 1e-4
    assert abs(abs(res.state.amplitude([1, 0])) - 1) < 1e-4


def test_resonant_hold_matches_exchange():
    g = coupling_g(PAIR)
    out = resonant_hold(_state(1, 0), PAIR, math.pi / (2 * g))
    assert abs(abs(out.amplitude([0, 1])) - 1) < 1e-6


def test_exchange_step_correction():
    res = exchange_step(_state(1, 0, n_max=4), PAIR, SWEEP, tol=1e-9)
    g = coupling_g(PAIR)
    assert res.hold == pytest.approx(math.pi / (2 * g), rel=1e-15)
    assert res.duration == pytest.approx(res.hold + 2 * TAU, rel=1e-15)
    amp = abs(res.state.amplitude([0, 1]))
    # frozen oracle value sin(pi/2 + 2 g tau)
    assert amp == pytest.approx(0.9856, abs=1e-2)
    assert amp == pytest.approx(math.sin(math.pi / 2 + res.angle_on + res.angle_off), abs=1e-3)
    assert res.leakage < 1e-4


def test_exchange_step_compensation_restores_full_transfer():
    res = exchange_step(_state(1, 0, n_max=4), PAIR, SWEEP, compensate=True, tol=1e-9)
    assert abs(res.state.amplitude([0, 1])) > 1 - 1e-4
