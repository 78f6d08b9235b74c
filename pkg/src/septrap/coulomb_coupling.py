"""Coulomb coupling between the axial vibrations of two separately trapped ions.

Expanding the Coulomb energy to second order in the displacements ``z_j``
gives, in units of hbar and with ``X_j = a_j + a_j^dag``::

    V / hbar = f_1 X_1 + f_2 X_2 + s_1 X_1^2 + s_2 X_2^2 - g X_1 X_2 + const

    f_j = (-1)^j K xi_j / (hbar d),   s_j = K xi_j^2 / (hbar d^2),
    g   = 2 K xi_1 xi_2 / (hbar d^2), K = q_1 q_2 / (4 pi eps_0 d).

The ``2 s_j a^dag a`` part renormalises the trap frequency to
``omega_j = nu_j + 2 s_j``.  On resonance, and dropping terms that rotate at
``omega`` or ``2 omega``, only the exchange ``-g (a_1 a_2^dag + a_1^dag a_2)``
survives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from septrap.constants import EPSILON_0, HBAR, IonSpecies
from septrap.errors import TruncationError
from septrap.fockspace import (
    FockBasis,
    Hamiltonian,
    HybridState,
    annihilation,
    apply_local,
    check_truncation,
    displacement_matrix,
    propagate,
)


def zero_point_length(species: IonSpecies, nu: float) -> float:
    """xi = sqrt(hbar / (2 M nu)) in metres."""
    if not nu > 0:
        raise ValueError(f"trap frequency must be positive, got {nu}")
    return math.sqrt(HBAR / (2 * species.mass * nu))


@dataclass(frozen=True)
class TrapPair:
    """Two ions in separate harmonic wells a distance ``distance`` (m) apart.

    ``nu1`` and ``nu2`` are bare axial trap frequencies in rad/s.  ``distance``
    may be ``math.inf`` for uncoupled traps.
    """

    ion1: IonSpecies
    ion2: IonSpecies
    nu1: float
    nu2: float
    distance: float

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError(f"distance d must be positive, got {self.distance}")
        if not (self.nu1 > 0 and self.nu2 > 0):
            raise ValueError(f"trap frequencies must be positive, got {self.nu1}, {self.nu2}")

    @classmethod
    def identical(cls, species: IonSpecies, nu: float, distance: float) -> "TrapPair":
        return cls(species, species, nu, nu, distance)

    def with_nu1(self, nu1: float) -> "TrapPair":
        return TrapPair(self.ion1, self.ion2, nu1, self.nu2, self.distance)

    def swapped(self) -> "TrapPair":
        return TrapPair(self.ion2, self.ion1, self.nu2, self.nu1, self.distance)

    @property
    def xi(self) -> tuple[float, float]:
        return zero_point_length(self.ion1, self.nu1), zero_point_length(self.ion2, self.nu2)

    @property
    def coulomb_energy(self) -> float:
        """K = q1 q2 / (4 pi eps0 d) in joules."""
        return self.ion1.charge * self.ion2.charge / (4 * math.pi * EPSILON_0 * self.distance)

    @property
    def expansion_valid(self) -> bool:
        """Second-order expansion of the Coulomb energy needs xi_j / d << 1."""
        return max(self.xi) / self.distance < 1e-3

    @property
    def linear_coefficients(self) -> tuple[float, float]:
        """f_j in rad/s: the static Coulomb force on each ion."""
        xi1, xi2 = self.xi
        k = self.coulomb_energy / (HBAR * self.distance)
        return -k * xi1, k * xi2

    @property
    def quadratic_coefficients(self) -> tuple[float, float]:
        """s_j in rad/s, the coefficients of X_j^2."""
        xi1, xi2 = self.xi
        k = self.coulomb_energy / (HBAR * self.distance ** 2)
        return k * xi1 ** 2, k * xi2 ** 2


def coupling_g(pair: TrapPair) -> float:
    """Exchange coupling g = 2 K xi_1 xi_2 / (hbar d^2) in rad/s.

    For identical ions this is q^2 / (4 pi eps0 d^3 M nu).
    """
    xi1, xi2 = pair.xi
    return 2 * pair.coulomb_energy * xi1 * xi2 / (HBAR * pair.distance ** 2)


def frequency_shift(pair: TrapPair, which: int) -> float:
    """Coulomb stiffening nu~_j = 2 K xi_j^2 / (hbar d^2) of trap ``which`` (1 or 2)."""
    if which not in (1, 2):
        raise ValueError(f"ion index must be 1 or 2, got {which}")
    return 2 * pair.quadratic_coefficients[which - 1]


def renormalized_frequency(pair: TrapPair, which: int) -> float:
    """omega_j = nu_j + nu~_j."""
    nu = pair.nu1 if which == 1 else pair.nu2
    return nu + frequency_shift(pair, which)


def equilibrium_displacements(pair: TrapPair) -> tuple[float, float]:
    """Coherent amplitudes (alpha_1, alpha_2) of the shifted potential minima.

    The static Coulomb force moves each ion away from its trap centre.
    Shifting ``a_j -> a_j + alpha_j`` removes every linear term of the
    quadratic Hamiltonian and leaves the rest unchanged.
    """
    f1, f2 = pair.linear_coefficients
    s1, s2 = pair.quadratic_coefficients
    g = coupling_g(pair)
    curvature = np.array([[2 * (pair.nu1 / 4 + s1), -g], [-g, 2 * (pair.nu2 / 4 + s2)]])
    x_eq = np.linalg.solve(curvature, -np.array([f1, f2]))
    return float(x_eq[0] / 2), float(x_eq[1] / 2)


# --------------------------------------------------------------------------- #
# Effective exchange dynamics
# --------------------------------------------------------------------------- #

def exchange_generator(n_max1: int, n_max2: int) -> np.ndarray:
    """a_1 a_2^dag + a_1^dag a_2 on two truncated modes."""
    a1 = np.kron(annihilation(n_max1), np.eye(n_max2 + 1))
    a2 = np.kron(np.eye(n_max1 + 1), annihilation(n_max2))
    hop = a1 @ a2.conj().T
    return hop + hop.conj().T


def exchange_unitary(n_max1: int, n_max2: int, g: float, t: float) -> np.ndarray:
    """exp(+i g t (a_1 a_2^dag + a_1^dag a_2)), generated by H = -hbar g (...)."""
    return scipy.linalg.expm(1j * g * t * exchange_generator(n_max1, n_max2))


def _mode_pair(state: HybridState, modes) -> tuple[int, int]:
    if modes is None:
        found = [i for i, s in enumerate(state.layout) if isinstance(s, FockBasis)]
        if len(found) != 2:
            raise ValueError("state does not have exactly two modes; pass modes=(i, j)")
        modes = found
    m1, m2 = modes
    for m in (m1, m2):
        if not isinstance(state.layout[m], FockBasis):
            raise ValueError(f"subsystem {m} is not a vibrational mode")
    return m1, m2


def exchange_evolve(state: HybridState, g: float, t: float, modes=None) -> HybridState:
    """Resonant exchange between two modes for time ``t`` (interaction picture).

    |0>|1> -> cos(g t)|0>|1> + i sin(g t)|1>|0>, and |0>|0> is invariant.
    ``modes`` selects the two mode subsystems (auto-detected when the state
    has exactly two).  Population in either mode's top level raises
    :class:`~septrap.errors.TruncationError`.
    """
    m1, m2 = _mode_pair(state, modes)
    check_truncation(state, [m1, m2], levels=1)
    u = exchange_unitary(state.layout[m1].n_max, state.layout[m2].n_max, g, t)
    return apply_local(state, u, [m1, m2])


# --------------------------------------------------------------------------- #
# Full quadratic model
# --------------------------------------------------------------------------- #

def _two_mode_ladders(n_max1: int, n_max2: int):
    a1 = np.kron(annihilation(n_max1), np.eye(n_max2 + 1))
    a2 = np.kron(np.eye(n_max1 + 1), annihilation(n_max2))
    return a1, a2


def full_coupling_hamiltonian(pair: TrapPair, n_max1: int, n_max2: int,
                              linear_terms: bool = True) -> Hamiltonian:
    """Interaction-picture Coulomb Hamiltonian (rad/s) without the RWA.

    The frame rotates each mode at its renormalised frequency ``omega_j``; the
    Hamiltonian keeps the linear force terms (rotating at ``omega_j``), the
    single-mode squeezing terms (``2 omega_j``), the counter-rotating pair
    creation (``omega_1 + omega_2``) and the exchange (``omega_2 - omega_1``).
    """
    a1, a2 = _two_mode_ladders(n_max1, n_max2)
    w1, w2 = renormalized_frequency(pair, 1), renormalized_frequency(pair, 2)
    f1, f2 = pair.linear_coefficients
    s1, s2 = pair.quadratic_coefficients
    g = coupling_g(pair)
    terms = [
        (s1 * a1 @ a1, -2 * w1),
        (s2 * a2 @ a2, -2 * w2),
        (-g * a1 @ a2, -(w1 + w2)),
        (-g * a1 @ a2.conj().T, w2 - w1),
    ]
    if linear_terms:
        terms += [(f1 * a1, -w1), (f2 * a2, -w2)]
    terms += [(m.conj().T, -w) for m, w in terms]
    return Hamiltonian(terms)


def lab_hamiltonian(pair: TrapPair, n_max1: int, n_max2: int,
                    linear_terms: bool = True) -> np.ndarray:
    """Time-independent lab-frame Hamiltonian (rad/s), normal ordered.

    c-number terms (zero-point energies, the constant in ``X_j^2``) are dropped
    so that phases match the interaction-picture convention.
    """
    a1, a2 = _two_mode_ladders(n_max1, n_max2)
    x1, x2 = a1 + a1.conj().T, a2 + a2.conj().T
    one = np.eye(x1.shape[0])
    f1, f2 = pair.linear_coefficients
    s1, s2 = pair.quadratic_coefficients
    h = (pair.nu1 * a1.conj().T @ a1 + pair.nu2 * a2.conj().T @ a2
         + s1 * (x1 @ x1 - one) + s2 * (x2 @ x2 - one) - coupling_g(pair) * x1 @ x2)
    if linear_terms:
        h = h + f1 * x1 + f2 * x2
    return h


def full_coupling_propagate(state: HybridState, pair: TrapPair, t: float, modes=None,
                            linear_terms: bool = True, tol: float = 1e-9) -> HybridState:
    """Integrate the full quadratic Coulomb model for time ``t``.

    Input and output are interaction-picture states in the Fock basis centred
    on the Coulomb-shifted equilibrium, which is where cooled ions actually
    sit.  Internally the state is displaced to the trap-centred basis,
    integrated with the linear force terms included, and displaced back by
    the equilibrium offset as seen from the rotating frame at time ``t``.
    """
    m1, m2 = _mode_pair(state, modes)
    n1, n2 = state.layout[m1].n_max, state.layout[m2].n_max
    h = full_coupling_hamiltonian(pair, n1, n2, linear_terms)
    if linear_terms:
        al1, al2 = equilibrium_displacements(pair)
        w1, w2 = renormalized_frequency(pair, 1), renormalized_frequency(pair, 2)
        d_in = np.kron(displacement_matrix(n1, al1), displacement_matrix(n2, al2))
        d_out = np.kron(displacement_matrix(n1, al1 * np.exp(1j * w1 * t)),
                        displacement_matrix(n2, al2 * np.exp(1j * w2 * t)))
    else:
        d_in = d_out = np.eye((n1 + 1) * (n2 + 1))

    def evolve(cols):
        shifted = d_in @ cols
        lost = float(np.abs(np.linalg.norm(shifted, axis=0) - np.linalg.norm(cols, axis=0)).max())
        if lost > 1e-8:
            raise TruncationError(
                f"equilibrium displacement pushes {lost:.2e} of the norm past n_max; raise n_max"
            )
        return d_out.conj().T @ propagate(shifted, h, t, tol=tol)

    return apply_local(state, evolve, [m1, m2])
