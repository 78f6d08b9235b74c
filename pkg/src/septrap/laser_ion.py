"""Laser coupling of one ion's internal qubit to its axial vibration.

Single-ion states use the layout ``(qubit, mode)``: ``|m, g>`` has flat index
``m`` and ``|m, e>`` has index ``n_max + 1 + m``.  Functions that take a
multi-ion :class:`HybridState` address ion ``j`` through subsystems
``2 j`` (qubit) and ``2 j + 1`` (mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from septrap.errors import NoSolutionError
from septrap.fockspace import (
    FockBasis,
    Hamiltonian,
    HybridState,
    Qubit,
    annihilation,
    apply_local,
    check_truncation,
    propagate,
)

_I_POWERS = (1, 1j, -1, -1j)


def _ipow(n: int) -> complex:
    """i**n for any integer n, exactly."""
    return _I_POWERS[n % 4]


@dataclass(frozen=True)
class LaserPulse:
    """Square pulse resonant with the k-th red sideband (k = 0 is the carrier).

    ``rabi`` is Omega in rad/s, ``phase`` the laser phase in radians and
    ``duration`` in seconds.  The laser frequency is implied by the sideband:
    ``omega_l = omega_a - k nu``.
    """

    rabi: float
    eta: float
    sideband_k: int
    phase: float = 0.0
    duration: float = 0.0

    def __post_init__(self):
        if not self.rabi > 0:
            raise ValueError(f"rabi must be positive, got {self.rabi}")
        if not self.eta >= 0:
            raise ValueError(f"eta must be non-negative, got {self.eta}")
        if int(self.sideband_k) != self.sideband_k or self.sideband_k < 0:
            raise ValueError(f"sideband_k must be a non-negative integer, got {self.sideband_k}")
        if not self.duration >= 0:
            raise ValueError(f"duration must be non-negative, got {self.duration}")

    def with_duration(self, duration: float) -> "LaserPulse":
        return replace(self, duration=duration)


@dataclass(frozen=True)
class InternalLevels:
    """|g> <-> |e> transition frequency omega_a in rad/s."""

    omega_a: float

    def __post_init__(self):
        if not self.omega_a > 0:
            raise ValueError(f"omega_a must be positive, got {self.omega_a}")


def rabi_mk(rabi: float, eta: float, m: int, k: int) -> float:
    """Rabi frequency between ``|m + k, g>`` and ``|m, e>`` on the k-th red sideband.

    Equals ``(rabi/2) exp(-eta^2/2) eta^k sqrt(m!/(m+k)!) L_m^k(eta^2)``.  The
    value is signed; its magnitude is ``(rabi/2) |<m+k| exp(i eta (a + a^dag)) |m>|``.
    """
    if m < 0 or k < 0 or int(m) != m or int(k) != k:
        raise ValueError(f"m and k must be non-negative integers, got m={m}, k={k}")
    x = eta * eta
    # eta^k sqrt((m+k)!/m!) / k!, accumulated as a product of ratios
    pref = 1.0
    for i in range(1, k + 1):
        pref *= eta * math.sqrt(m + i) / i
    # sum_j (-x)^j m! k! / ((j+k)! j! (m-j)!)
    term, total = 1.0, 1.0
    for j in range(m):
        term *= -x * (m - j) / ((j + k + 1) * (j + 1))
        total += term
    return 0.5 * rabi * math.exp(-0.5 * x) * pref * total


def sideband_unitary(n_max: int, rabi: float, eta: float, k: int, phase: float,
                     t: float) -> np.ndarray:
    """Closed-form evolution matrix on one ion's ``(qubit, mode)`` space.

    Pairs ``|m + k, g>`` and ``|m, e>`` rotate by ``rabi_mk(m, k) t``; ``|m, g>``
    with ``m < k`` is untouched.  ``|m, e>`` with ``m > n_max - k`` has no
    partner inside the truncation and is left unchanged, so the matrix is
    unitary; callers must keep population out of those levels.  ``t`` may be
    negative.
    """
    d = n_max + 1
    u = np.eye(2 * d, dtype=complex)
    to_e = _ipow(k - 1) * np.exp(-1j * phase)
    to_g = -_ipow(1 - k) * np.exp(1j * phase)  # (-i)^(k-1) == i^(1-k)
    for m in range(0, d - k):
        w = rabi_mk(rabi, eta, m, k) * t
        c, s = math.cos(w), math.sin(w)
        g_idx, e_idx = m + k, d + m
        u[g_idx, g_idx] = c
        u[e_idx, e_idx] = c
        u[e_idx, g_idx] = to_e * s
        u[g_idx, e_idx] = to_g * s
    return u


def sideband_evolve(state: HybridState, pulse: LaserPulse, ion: int = 0) -> HybridState:
    """Apply the closed-form sideband map for ``pulse`` to ion ``ion``.

    Raises :class:`~septrap.errors.TruncationError` if more than 1e-8 of the
    population sits in the top ``k`` Fock levels of that ion's mode.
    """
    q, mode = _ion_subsystems(state, ion)
    n_max = state.layout[mode].n_max
    check_truncation(state, [mode], levels=pulse.sideband_k)
    u = sideband_unitary(n_max, pulse.rabi, pulse.eta, pulse.sideband_k, pulse.phase,
                         pulse.duration)
    return apply_local(state, u, [q, mode])


def _ion_subsystems(state: HybridState, ion: int) -> tuple[int, int]:
    q, mode = 2 * ion, 2 * ion + 1
    if mode >= len(state.layout) or not isinstance(state.layout[q], Qubit) \
            or not isinstance(state.layout[mode], FockBasis):
        raise ValueError(f"state layout has no (qubit, mode) pair for ion {ion}")
    return q, mode


def first_sideband_duration(rabi: float, eta: float) -> float:
    """pi / (2 Omega_{0,1}): maps |0, e> to |1, g> (up to phase)."""
    return math.pi / (2 * rabi_mk(rabi, eta, 0, 1))


def commensurate_eta(p: int, r: int) -> float:
    """Lamb-Dicke parameter at which the single-pulse CNOT is exact.

    Chooses eta so that ``Omega_{1,0} / Omega_{0,0} = 1 - eta^2`` equals
    ``(r + 1/4) / p``; then ``t = 2 pi p / Omega_{0,0}`` gives
    ``cos(Omega_{0,0} t) = sin(Omega_{1,0} t) = 1`` exactly.
    """
    ratio = (r + 0.25) / p
    if not 0 < ratio < 1:
        raise ValueError("need 0 < (r + 1/4) / p < 1")
    return math.sqrt(1 - ratio)


def cnot_error(rabi: float, eta: float, t: float) -> float:
    """max(1 - cos(Omega_{0,0} t), 1 - sin(Omega_{1,0} t))."""
    a, b = rabi_mk(rabi, eta, 0, 0), rabi_mk(rabi, eta, 1, 0)
    return max(1 - math.cos(a * t), 1 - math.sin(b * t))


def solve_cnot_duration(rabi: float, eta: float, infidelity_tol: float = 1e-2,
                        t_max: float = 100e-6) -> tuple[float, float]:
    """Shortest carrier pulse acting as a CNOT between vibration and qubit.

    Scans the carrier revivals ``Omega_{0,0} t = 2 pi p`` in increasing ``p``,
    refines ``t`` around each to minimise :func:`cnot_error`, and returns the
    first ``(t, error)`` with ``error <= infidelity_tol``.  Exact coincidence
    is generally impossible, so the achieved error is always returned.
    """
    a, b = rabi_mk(rabi, eta, 0, 0), rabi_mk(rabi, eta, 1, 0)
    if abs(a - b) <= 1e-12 * abs(a):
        raise NoSolutionError(
            "Omega_{0,0} == Omega_{1,0} (eta = 0): no vibration-conditioned flip is possible"
        )
    if not infidelity_tol > 0 or not t_max > 0:
        raise ValueError("infidelity_tol and t_max must be positive")

    def objective(t):
        return cnot_error(rabi, eta, t)

    half_width = math.pi / (2 * max(abs(a), abs(b)))
    best = (math.inf, math.nan)
    p = 1
    while True:
        t_p = 2 * math.pi * p / abs(a)
        if t_p - half_width > t_max:
            break
        lo, hi = max(t_p - half_width, 0.0), min(t_p + half_width, t_max)
        if hi > lo:
            res = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-16 * t_p + 1e-18})
            t, err = float(res.x), float(res.fun)
            # at a commensurate eta the revival itself is exact; the optimiser
            # only resolves t to ~sqrt(machine eps)
            if objective(t_p) <= err:
                t, err = t_p, objective(t_p)
            if err < best[0]:
                best = (err, t)
            if err <= infidelity_tol:
                return t, err
        p += 1
    raise NoSolutionError(
        f"no carrier duration <= {t_max:.3e} s reaches CNOT error {infidelity_tol:.1e} "
        f"(best {best[0]:.3e} at t={best[1]:.4e} s)"
    )


# --------------------------------------------------------------------------- #
# RWA Hamiltonian and the full interaction-picture model
# --------------------------------------------------------------------------- #

def _sigma_plus() -> np.ndarray:
    return np.array([[0, 0], [1, 0]], dtype=complex)


def sideband_hamiltonian(n_max: int, rabi: float, eta: float, k: int,
                         phase: float = 0.0) -> np.ndarray:
    """Time-independent k-th red-sideband RWA Hamiltonian (rad/s), built from
    the normal-ordered operator series rather than the Laguerre closed form."""
    a = annihilation(n_max)
    ad = a.conj().T
    series = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    for j in range(0, n_max + 1):
        if j + k > n_max:
            break
        coeff = (1j * eta) ** (2 * j) / (math.factorial(j) * math.factorial(j + k))
        series += coeff * np.linalg.matrix_power(ad, j) @ np.linalg.matrix_power(a, j + k)
    pref = 0.5 * rabi * math.exp(-eta * eta / 2) * np.exp(-1j * phase) * (1j * eta) ** k
    h = np.kron(_sigma_plus(), pref * series)
    return h + h.conj().T


def normal_ordered_displacement(n_max: int, eta: float,
                                order_cutoff: int | None = None) -> np.ndarray:
    """``exp(-eta^2/2) sum_{n+m<=cutoff} (i eta)^(n+m) a^dag^n a^m / (n! m!)``.

    Without a cutoff the truncated matrix reproduces the exact elements
    ``<m'| exp(i eta (a + a^dag)) |m>`` for ``m, m' <= n_max``.
    """
    cutoff = 2 * n_max if order_cutoff is None else order_cutoff
    a = annihilation(n_max)
    ad = a.conj().T
    a_pows = [np.linalg.matrix_power(a, i) for i in range(n_max + 1)]
    ad_pows = [np.linalg.matrix_power(ad, i) for i in range(n_max + 1)]
    out = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    for n in range(n_max + 1):
        for m in range(n_max + 1):
            if n + m > cutoff:
                continue
            coeff = (1j * eta) ** (n + m) / (math.factorial(n) * math.factorial(m))
            out += coeff * ad_pows[n] @ a_pows[m]
    return math.exp(-eta * eta / 2) * out


def full_interaction_hamiltonian(n_max: int, pulse: LaserPulse, trap_nu: float,
                                 levels: InternalLevels | None = None,
                                 order_cutoff: int | None = None,
                                 keep_counter_rotating: bool = False) -> Hamiltonian:
    """Interaction-picture laser-ion Hamiltonian without the rotating-wave step.

    Every term ``a^dag^n a^m`` keeps its phase ``exp(i (n - m + k) nu t)``.  The
    term oscillating near ``2 omega_a`` is dropped unless
    ``keep_counter_rotating`` is set, which needs ``levels``; use a scaled-down
    ``omega_a`` for that, optical frequencies cannot be resolved.
    """
    if order_cutoff is not None and order_cutoff < 1:
        raise ValueError("order_cutoff must be >= 1")
    k = pulse.sideband_k
    pref = 0.5 * pulse.rabi
    offsets = np.subtract.outer(np.arange(n_max + 1), np.arange(n_max + 1))
    terms = []

    def add_branch(series, base_freq, phase_factor):
        for d in range(-n_max, n_max + 1):
            band = np.where(offsets == d, series, 0)
            if not np.any(band):
                continue
            block = np.kron(_sigma_plus(), pref * phase_factor * band)
            freq = base_freq + d * trap_nu
            terms.append((block, freq))
            terms.append((block.conj().T, -freq))

    add_branch(normal_ordered_displacement(n_max, pulse.eta, order_cutoff),
               k * trap_nu, np.exp(-1j * pulse.phase))
    if keep_counter_rotating:
        if levels is None:
            raise ValueError("keep_counter_rotating needs the internal transition frequency")
        add_branch(normal_ordered_displacement(n_max, -pulse.eta, order_cutoff),
                   2 * levels.omega_a - k * trap_nu, np.exp(1j * pulse.phase))
    if not terms:
        terms.append((np.zeros((2 * n_max + 2, 2 * n_max + 2)), None))
    return Hamiltonian(terms)


def full_interaction_unitary(n_max: int, pulse: LaserPulse, trap_nu: float,
                             levels: InternalLevels | None = None,
                             order_cutoff: int | None = None,
                             keep_counter_rotating: bool = False,
                             tol: float = 1e-9) -> np.ndarray:
    """Propagator of :func:`full_interaction_hamiltonian` over ``pulse.duration``."""
    h = full_interaction_hamiltonian(n_max, pulse, trap_nu, levels, order_cutoff,
                                     keep_counter_rotating)
    return propagate(np.eye(2 * (n_max + 1), dtype=complex), h, pulse.duration, tol=tol)


def full_interaction_propagate(state: HybridState, pulse: LaserPulse,
                               levels: InternalLevels | None, trap_nu: float,
                               order_cutoff: int | None = None, *, ion: int = 0,
                               keep_counter_rotating: bool = False,
                               tol: float = 1e-9) -> HybridState:
    """Integrate the non-RWA laser-ion model for one pulse on ion ``ion``.

    A validation oracle for :func:`sideband_evolve`: it includes the
    off-resonant carrier and higher sidebands that the RWA discards.
    """
    q, mode = _ion_subsystems(state, ion)
    n_max = state.layout[mode].n_max
    h = full_interaction_hamiltonian(n_max, pulse, trap_nu, levels, order_cutoff,
                                     keep_counter_rotating)
    return apply_local(state, lambda cols: propagate(cols, h, pulse.duration, tol=tol),
                       [q, mode])
