"""Linear ramps of trap 1's frequency that switch the exchange coupling on and off.

Unit convention: the detuning ``delta_initial`` is an angular frequency.  The
reference setting "Delta = 100 kHz" is taken as 1e5 rad/s, the only reading
under which the adiabaticity estimates come out at 3.1e-6 and 5.3e-6.

Frames
------
Ramp and hold functions take and return two-mode states expressed in the
*instantaneous* Fock bases (the eigenbases of each mode's harmonic potential
at that moment, Coulomb stiffening included) and in a rotating frame that
removes each mode's dynamical phase ``exp(-i n \\int omega(t) dt)``
accumulated since the start of the call.  Internally the dynamics are
integrated in a fixed reference basis; the instantaneous bases are reached
through the exact squeezing (Bogoliubov) relation between oscillators of
different frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad

from septrap.coulomb_coupling import TrapPair, coupling_g, lab_hamiltonian
from septrap.fockspace import (
    FockBasis,
    Hamiltonian,
    HybridState,
    annihilation,
    apply_local,
    check_truncation,
    propagate,
    squeeze_matrix,
)

RAMP_ON = "ramp-on"
RAMP_OFF = "ramp-off"


@dataclass(frozen=True)
class SweepSpec:
    """Linear ramp of trap 1 over ``tau`` seconds at rate ``beta`` (rad/s^2).

    ``ramp-on`` moves trap 1 from ``nu2 + delta_initial`` to ``nu2`` and
    ``ramp-off`` moves it back; ``beta * tau == delta_initial`` either way.
    """

    beta: float
    tau: float
    delta_initial: float
    direction: str = RAMP_ON

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.direction not in (RAMP_ON, RAMP_OFF):
            raise ValueError(f"direction must be {RAMP_ON!r} or {RAMP_OFF!r}")
        if self.beta < 0 or self.delta_initial < 0:
            raise ValueError("beta and delta_initial are magnitudes and must be >= 0")
        if abs(self.beta * self.tau - self.delta_initial) > 1e-9 * max(self.delta_initial, 1.0):
            raise ValueError(
                f"beta * tau = {self.beta * self.tau:.6g} must equal delta_initial = "
                f"{self.delta_initial:.6g}"
            )

    @classmethod
    def linear(cls, delta: float, tau: float, direction: str = RAMP_ON) -> "SweepSpec":
        return cls(delta / tau, tau, delta, direction)

    def reversed(self) -> "SweepSpec":
        other = RAMP_OFF if self.direction == RAMP_ON else RAMP_ON
        return SweepSpec(self.beta, self.tau, self.delta_initial, other)

    def nu1(self, nu2: float, s: float) -> float:
        """Trap 1 frequency ``s`` seconds into the ramp."""
        if self.direction == RAMP_ON:
            return nu2 + self.delta_initial - self.beta * s
        return nu2 + self.beta * s

    @property
    def signed_rate(self) -> float:
        return -self.beta if self.direction == RAMP_ON else self.beta


def gamma_nm(pair: TrapPair, sweep: SweepSpec, n: int, m: int,
             at_nu1: float | None = None) -> float:
    """Adiabaticity parameter |<n| dH/dt |m>| / (hbar nu1^2 (n - m)^2).

    With dH/dt = M nu1 beta z^2 only ``|n - m| = 2`` survives, giving
    ``beta sqrt((l + 1)(l + 2)) / (8 nu1^2)`` with ``l = min(n, m)``.
    ``at_nu1`` defaults to the resonant end of the ramp (``pair.nu2``).
    """
    if n == m:
        raise ValueError("gamma_nm needs n != m")
    if min(n, m) < 0:
        raise ValueError("Fock indices must be non-negative")
    nu1 = pair.nu2 if at_nu1 is None else at_nu1
    lo_nu, hi_nu = pair.nu2, pair.nu2 + sweep.delta_initial
    if not lo_nu * (1 - 1e-12) <= nu1 <= hi_nu * (1 + 1e-12):
        raise ValueError(f"at_nu1={nu1:.6g} rad/s lies outside the ramp [{lo_nu:.6g}, {hi_nu:.6g}]")
    if abs(n - m) != 2:
        return 0.0
    lo = min(n, m)
    return sweep.beta * math.sqrt((lo + 1) * (lo + 2)) / (8 * nu1 ** 2)


def sweep_derivative(n_max: int, beta: float) -> np.ndarray:
    """dH/dt / hbar = M nu1 beta z1^2 / hbar = (beta / 2) (a + a^dag)^2 in rad/s^2."""
    a = annihilation(n_max)
    x = a + a.conj().T
    return 0.5 * beta * x @ x


# --------------------------------------------------------------------------- #
# Numerical ramps
# --------------------------------------------------------------------------- #

class SweepResult(NamedTuple):
    state: HybridState
    leakage: float
    accrued_exchange_angle: float


def _mode_pair(state: HybridState, modes) -> tuple[int, int]:
    if modes is None:
        modes = [i for i, s in enumerate(state.layout) if isinstance(s, FockBasis)]
        if len(modes) != 2:
            raise ValueError("state does not have exactly two modes; pass modes=(i, j)")
    return tuple(modes)


def _excitation_distribution(cols: np.ndarray, d1: int, d2: int, total: bool) -> np.ndarray:
    probs = (np.abs(cols) ** 2).sum(axis=1).reshape(d1, d2)
    if not total:
        return probs.sum(axis=1)
    n_tot = np.add.outer(np.arange(d1), np.arange(d2))
    return np.bincount(n_tot.ravel(), weights=probs.ravel(), minlength=d1 + d2 - 1)


def _leakage(before, after, d1, d2, total):
    p0 = _excitation_distribution(before, d1, d2, total)
    p1 = _excitation_distribution(after, d1, d2, total)
    return 0.5 * float(np.abs(p1 - p0).sum())


def _exchange_probe(n1: int, n2: int) -> np.ndarray:
    v = np.zeros((n1 + 1) * (n2 + 1), dtype=complex)
    v[1 * (n2 + 1) + 0] = 1.0
    return v


def _probe_angle(col: np.ndarray, n2: int) -> float:
    return math.asin(min(1.0, abs(col[0 * (n2 + 1) + 1])))


class _Frame:
    """Reference-basis bookkeeping for one two-mode segment."""

    def __init__(self, pair: TrapPair, n1: int, n2: int, nu_ref1: float, coupling: bool):
        self.n1, self.n2 = n1, n2
        self.nu_ref1 = nu_ref1
        # Coulomb coefficients are fixed in z, so evaluate them in the reference basis
        ref = pair.with_nu1(nu_ref1)
        s1, s2 = ref.quadratic_coefficients if coupling else (0.0, 0.0)
        self.s1, self.s2 = s1, s2
        self.g = coupling_g(ref) if coupling else 0.0
        self.nu2 = pair.nu2
        self.omega2 = math.sqrt(pair.nu2 ** 2 + 4 * s2 * pair.nu2)
        self.s_mode2 = squeeze_matrix(n2, 0.5 * math.log(self.omega2 / pair.nu2))
        n_1 = np.arange(n1 + 1)
        n_2 = np.arange(n2 + 1)
        self.n1_diag = np.repeat(n_1, n2 + 1)
        self.n2_diag = np.tile(n_2, n1 + 1)

    def omega1(self, nu1: float) -> float:
        """Instantaneous mode-1 frequency including Coulomb stiffening."""
        return math.sqrt(nu1 ** 2 + 4 * self.s1 * self.nu_ref1)

    def to_instantaneous(self, nu1: float) -> np.ndarray:
        s1 = squeeze_matrix(self.n1, 0.5 * math.log(self.omega1(nu1) / self.nu_ref1))
        return np.kron(s1, self.s_mode2)

    def rotate(self, phase1: float, phase2: float) -> np.ndarray:
        return np.exp(1j * (self.n1_diag * phase1 + self.n2_diag * phase2))


def _ramp_hamiltonian(fr: _Frame, nu1_of_t) -> Hamiltonian:
    """Quadratic two-mode Hamiltonian in the frame rotating at (nu_ref1, nu2)."""
    n1, n2 = fr.n1, fr.n2
    a1 = np.kron(annihilation(n1), np.eye(n2 + 1))
    a2 = np.kron(np.eye(n1 + 1), annihilation(n2))
    num1 = a1.conj().T @ a1
    nr, nu2 = fr.nu_ref1, fr.nu2

    def c_sq(t):
        # coefficient of X1^2 minus its value at the reference frequency
        return (nu1_of_t(t) ** 2 - nr ** 2) / (4 * nr)

    def rising(t):
        return c_sq(t) * np.exp(-2j * nr * t)

    def falling(t):
        return c_sq(t) * np.exp(2j * nr * t)

    terms = [
        (2 * num1, c_sq),
        (a1 @ a1, rising),
        (a1.conj().T @ a1.conj().T, falling),
    ]
    if fr.s1 or fr.s2 or fr.g:
        quad_terms = [
            (fr.s1 * a1 @ a1, -2 * nr),
            (fr.s2 * a2 @ a2, -2 * nu2),
            (-fr.g * a1 @ a2, -(nr + nu2)),
            (-fr.g * a1 @ a2.conj().T, nu2 - nr),
        ]
        terms += quad_terms + [(m.conj().T, -w) for m, w in quad_terms]
        terms += [(2 * fr.s1 * num1, None), (2 * fr.s2 * a2.conj().T @ a2, None)]
    return Hamiltonian(terms)


def _ramp_columns(cols: np.ndarray, pair: TrapPair, sweep: SweepSpec, coupling: bool,
                  n1: int, n2: int, tol: float) -> np.ndarray:
    nu_start = sweep.nu1(pair.nu2, 0.0)
    nu_end = sweep.nu1(pair.nu2, sweep.tau)
    fr = _Frame(pair, n1, n2, nu_start, coupling)
    h = _ramp_hamiltonian(fr, lambda t: sweep.nu1(pair.nu2, t))
    psi = fr.to_instantaneous(nu_start) @ cols
    psi = propagate(psi, h, sweep.tau, tol=tol)
    energies = fr.nu_ref1 * fr.n1_diag + fr.nu2 * fr.n2_diag
    psi = np.exp(-1j * energies * sweep.tau)[:, None] * psi
    psi = fr.to_instantaneous(nu_end).conj().T @ psi
    phase1, _ = quad(lambda s: fr.omega1(sweep.nu1(pair.nu2, s)), 0.0, sweep.tau,
                     epsabs=0.0, epsrel=1e-13, limit=200)
    return fr.rotate(phase1, fr.omega2 * sweep.tau)[:, None] * psi


def sweep_propagate(state: HybridState, pair: TrapPair, sweep: SweepSpec,
                    include_coupling: bool = True, modes=None,
                    tol: float = 1e-9) -> SweepResult:
    """Integrate two modes through a linear ramp of trap 1.

    ``pair.nu2`` fixes trap 2; trap 1 follows ``sweep.nu1``.  Returns the final
    state, the leakage and the exchange angle accrued during the ramp.

    Leakage is the total-variation distance between the initial and final
    distributions of mode 1's instantaneous level when the coupling is off.
    With coupling on, exchange legitimately moves quanta between the modes, so
    the distribution of the total excitation number ``n1 + n2`` is compared
    instead.  The accrued angle is ``asin |<0,1|U|1,0>|`` for the same ramp
    (zero without coupling).
    """
    m1, m2 = _mode_pair(state, modes)
    n1, n2 = state.layout[m1].n_max, state.layout[m2].n_max
    check_truncation(state, [m1, m2], levels=1)
    box = {}

    def evolve(cols):
        block = cols
        if include_coupling:
            block = np.column_stack([cols, _exchange_probe(n1, n2)])
        out = _ramp_columns(block, pair, sweep, include_coupling, n1, n2, tol)
        if include_coupling:
            box["angle"] = _probe_angle(out[:, -1], n2)
            out = out[:, :-1]
        box["leak"] = _leakage(cols, out, n1 + 1, n2 + 1, include_coupling)
        return out

    out_state = apply_local(state, evolve, [m1, m2])
    return SweepResult(out_state, box["leak"], box.get("angle", 0.0))


def ramp_exchange_angle(pair: TrapPair, sweep: SweepSpec, n_max: int = 3,
                        tol: float = 1e-9) -> float:
    """Exchange angle accrued by |1>|0> during one ramp with coupling on."""
    cols = _exchange_probe(n_max, n_max)[:, None]
    out = _ramp_columns(cols, pair, sweep, True, n_max, n_max, tol)
    return _probe_angle(out[:, 0], n_max)


def resonant_hold(state: HybridState, pair: TrapPair, t: float, include_coupling: bool = True,
                  modes=None) -> HybridState:
    """Hold both traps fixed for ``t`` seconds; exact, the lab Hamiltonian is static."""
    m1, m2 = _mode_pair(state, modes)
    n1, n2 = state.layout[m1].n_max, state.layout[m2].n_max
    check_truncation(state, [m1, m2], levels=1)
    fr = _Frame(pair, n1, n2, pair.nu1, include_coupling)
    if include_coupling:
        h = lab_hamiltonian(pair, n1, n2, linear_terms=False)
    else:
        a1 = np.kron(annihilation(n1), np.eye(n2 + 1))
        a2 = np.kron(np.eye(n1 + 1), annihilation(n2))
        h = pair.nu1 * a1.conj().T @ a1 + pair.nu2 * a2.conj().T @ a2
    basis = fr.to_instantaneous(pair.nu1)
    rot = fr.rotate(fr.omega1(pair.nu1) * t, fr.omega2 * t)

    def evolve(cols):
        return rot[:, None] * (basis.conj().T @ propagate(basis @ cols, h, t))

    return apply_local(state, evolve, [m1, m2])


class ExchangeStepResult(NamedTuple):
    state: HybridState
    duration: float
    hold: float
    leakage: float
    angle_on: float
    angle_off: float


def exchange_step(state: HybridState, pair: TrapPair, sweep: SweepSpec,
                  include_coupling: bool = True, compensate: bool = False,
                  modes=None, tol: float = 1e-9) -> ExchangeStepResult:
    """Ramp on, hold for a pi/2 exchange, ramp off.

    ``pair`` describes the resonant configuration.  The hold lasts
    ``pi / (2 g)``; with ``compensate`` it is shortened by the angle the two
    ramps accrue, so the total exchange angle is pi/2.
    """
    on = sweep if sweep.direction == RAMP_ON else sweep.reversed()
    off = on.reversed()
    g = coupling_g(pair)
    hold = math.pi / (2 * g)
    if compensate and include_coupling:
        n_max = max(3, min(state.layout[i].n_max for i in _mode_pair(state, modes)))
        extra = ramp_exchange_angle(pair, on, n_max, tol) + ramp_exchange_angle(pair, off, n_max, tol)
        hold = max(hold - extra / g, 0.0)
    r_on = sweep_propagate(state, pair, on, include_coupling, modes, tol)
    held = resonant_hold(r_on.state, pair, hold, include_coupling, modes)
    r_off = sweep_propagate(held, pair, off, include_coupling, modes, tol)
    return ExchangeStepResult(r_off.state, on.tau + hold + off.tau, hold,
                              r_on.leakage + r_off.leakage,
                              r_on.accrued_exchange_angle, r_off.accrued_exchange_angle)
