"""Five-step CNOT between two separately trapped ions, and chain transfer.

The sequence is

    I    red-sideband pi pulse on ion 1 (qubit -> vibration),
    II   ramp traps into resonance, hold for a pi/2 exchange, ramp apart,
    III  carrier pulse on ion 2 acting as a vibration-controlled NOT,
    IV   repeat II,
    V    red-sideband pi pulse on ion 1 (vibration -> qubit).

With sideband phases theta_1, theta_5 and carrier phase theta_3 the
computational states map as

    |gg> -> |gg>,   |ge> -> |ge>,
    |eg> -> exp(i(theta_1 - theta_3 - theta_5 + 3 pi/2)) |ee>,
    |ee> -> exp(i(theta_1 + theta_3 - theta_5 + 3 pi/2)) |eg>,

with both vibrations back in |0>.  Joint states use the layout
``(qubit 1, mode 1, qubit 2, mode 2)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from septrap.adiabatic_sweep import RAMP_ON, SweepSpec, exchange_step
from septrap.coulomb_coupling import TrapPair, coupling_g, exchange_evolve, renormalized_frequency
from septrap.errors import ProtocolFailure
from septrap.fockspace import FockBasis, HybridState, ion_layout, mode_layout
from septrap.laser_ion import (
    LaserPulse,
    first_sideband_duration,
    full_interaction_propagate,
    rabi_mk,
    sideband_evolve,
    solve_cnot_duration,
)

CLOSED_FORM = "closed-form"
FULL_NUMERIC = "full-numeric"
MODES = (CLOSED_FORM, FULL_NUMERIC)

#: theta_1 = theta_3 = 0, theta_5 = 3 pi/2 turns the sequence into an exact CNOT
DEFAULT_PHASES = (0.0, 0.0, 1.5 * math.pi)

#: computational basis order of the truth table, ``(qubit 1, qubit 2)``
QUBIT_BASIS = ((0, 0), (0, 1), (1, 0), (1, 1))
QUBIT_LABELS = ("gg", "ge", "eg", "ee")

IDEAL_CNOT = np.array([[1, 0, 0, 0],
                       [0, 1, 0, 0],
                       [0, 0, 0, 1],
                       [0, 0, 1, 0]], dtype=complex)

#: largest tolerated population outside the vibrational ground state
VIBRATION_RETURN_LIMIT = 1e-2


@dataclass(frozen=True)
class PulseStep:
    """A laser pulse on ion ``ion`` (0 or 1)."""

    name: str
    ion: int
    pulse: LaserPulse

    @property
    def duration(self) -> float:
        return self.pulse.duration


@dataclass(frozen=True)
class ExchangeStep:
    """Ramp into resonance, hold ``hold`` seconds, ramp back out."""

    name: str
    sweep: SweepSpec
    hold: float

    @property
    def duration(self) -> float:
        return self.hold + 2 * self.sweep.tau


Step = Union[PulseStep, ExchangeStep]


@dataclass(frozen=True)
class ProtocolSchedule:
    """Ordered steps of the gate plus the physical context they run in.

    ``pair`` is the resonant configuration of the two traps; ``g`` the
    exchange rate used for the hold times (from ``pair`` unless overridden).
    """

    steps: tuple[Step, ...]
    phases: tuple[float, float, float]
    pair: TrapPair
    g: float
    mode: str = CLOSED_FORM
    cnot_error: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        kinds = [type(s) for s in self.steps]
        pattern = [PulseStep, ExchangeStep, PulseStep, ExchangeStep, PulseStep]
        if kinds != pattern:
            raise ValueError("steps must follow sideband, exchange, carrier, exchange, sideband")
        ions = [self.steps[i].ion for i in (0, 2, 4)]
        if ions != [0, 1, 0]:
            raise ValueError("pulses I and V act on ion 1 and pulse III on ion 2")

    @property
    def durations(self) -> tuple[float, ...]:
        return tuple(s.duration for s in self.steps)

    @property
    def total_duration(self) -> float:
        return float(sum(self.durations))

    def with_mode(self, mode: str) -> "ProtocolSchedule":
        return ProtocolSchedule(self.steps, self.phases, self.pair, self.g, mode, self.cnot_error)


def build_schedule(pair: TrapPair, laser: tuple[float, float], sweep: SweepSpec,
                   phases: Sequence[float] = DEFAULT_PHASES, *, g: float | None = None,
                   mode: str = CLOSED_FORM, cnot_tol: float = 1e-2,
                   cnot_t_max: float | None = None) -> ProtocolSchedule:
    """Assemble the five steps for Rabi frequency and LD parameter ``laser``.

    t_1 = t_5 = pi / (2 Omega_{0,1}), t_2 = pi / (2 g) and t_3 from
    :func:`~septrap.laser_ion.solve_cnot_duration` at ``cnot_tol``, searched
    up to ``cnot_t_max`` (default: 50 carrier revivals).
    """
    rabi, eta = laser
    theta1, theta3, theta5 = (float(p) for p in phases)
    g = coupling_g(pair) if g is None else float(g)
    if not g > 0:
        raise ValueError(f"coupling g must be positive, got {g}")
    t1 = first_sideband_duration(rabi, eta)
    if cnot_t_max is None:
        cnot_t_max = 100 * math.pi / abs(rabi_mk(rabi, eta, 0, 0))
    t3, err = solve_cnot_duration(rabi, eta, cnot_tol, cnot_t_max)
    on = sweep if sweep.direction == RAMP_ON else sweep.reversed()
    hold = math.pi / (2 * g)
    steps = (
        PulseStep("I", 0, LaserPulse(rabi, eta, 1, theta1, t1)),
        ExchangeStep("II", on, hold),
        PulseStep("III", 1, LaserPulse(rabi, eta, 0, theta3, t3)),
        ExchangeStep("IV", on, hold),
        PulseStep("V", 0, LaserPulse(rabi, eta, 1, theta5, t1)),
    )
    return ProtocolSchedule(steps, (theta1, theta3, theta5), pair, g, mode, err)


def expected_truth_table(phases: Sequence[float]) -> np.ndarray:
    """Truth table predicted by composing the closed-form step maps."""
    theta1, theta3, theta5 = phases
    u = np.zeros((4, 4), dtype=complex)
    u[0, 0] = u[1, 1] = 1
    u[3, 2] = cmath.exp(1j * (theta1 - theta3 - theta5 + 1.5 * math.pi))
    u[2, 3] = cmath.exp(1j * (theta1 + theta3 - theta5 + 1.5 * math.pi))
    return u


def gate_fidelity(u: np.ndarray, ideal: np.ndarray = IDEAL_CNOT) -> float:
    """|tr(U_ideal^dag U)|^2 / d^2."""
    d = ideal.shape[0]
    return float(abs(np.trace(ideal.conj().T @ u)) ** 2 / d ** 2)


# --------------------------------------------------------------------------- #
# Execution
# --------------------------------------------------------------------------- #

@dataclass
class ProtocolReport:
    """Outcome of one protocol run.

    ``truth_table[j, i]`` is the amplitude of computational state ``j`` with
    both vibrations in |0> when the gate acts on state ``i``.
    ``vibration_return_error`` is the largest population left outside the
    vibrational ground state over the four inputs.
    """

    truth_table: np.ndarray
    fidelity: float
    vibration_return_error: float
    per_step_durations: tuple[float, ...]
    total_duration: float
    mode: str
    phases: tuple[float, float, float]
    output_state: HybridState | None = None
    exchange_leakage: float = 0.0
    exchange_angles: tuple[float, ...] = ()
    diagnostics: dict = field(default_factory=dict)


def _joint_input(n_max: int, qubits: Sequence[int]) -> HybridState:
    return HybridState.basis(ion_layout(2, n_max), [qubits[0], 0, qubits[1], 0])


def _input_state(spec, n_max: int) -> HybridState:
    """Label ('eg'), qubit pair, or 4-vector of two-qubit amplitudes."""
    if isinstance(spec, HybridState):
        return spec
    if isinstance(spec, str):
        if spec not in QUBIT_LABELS:
            raise ValueError(f"input label must be one of {QUBIT_LABELS}, got {spec!r}")
        return _joint_input(n_max, QUBIT_BASIS[QUBIT_LABELS.index(spec)])
    vec = np.asarray(spec, dtype=complex)
    if vec.shape == (2,):
        return _joint_input(n_max, [int(v.real) for v in vec])
    if vec.shape != (4,):
        raise ValueError("input must be a label, a qubit pair or four amplitudes")
    layout = ion_layout(2, n_max)
    amps = np.zeros(tuple(s.dim for s in layout), dtype=complex)
    for c, (q1, q2) in zip(vec, QUBIT_BASIS):
        amps[q1, 0, q2, 0] = c
    return HybridState(amps.ravel() / np.linalg.norm(vec), layout)


def _qubit_block(state: HybridState) -> np.ndarray:
    t = state.as_tensor()
    return np.array([t[q1, 0, q2, 0] for q1, q2 in QUBIT_BASIS])


class _Runner:
    """Applies schedule steps in the requested mode."""

    def __init__(self, schedule: ProtocolSchedule, n_max: int, tol: float,
                 calibrate: bool, compensate: bool):
        self.schedule = schedule
        self.n_max = n_max
        self.tol = tol
        self.compensate = compensate
        self.leakage = 0.0
        self.angles: list[float] = []
        self.phase_shift = 0.0
        pair = schedule.pair
        if schedule.mode == FULL_NUMERIC:
            sweep = schedule.steps[1].sweep
            detuned = pair.with_nu1(pair.nu2 + sweep.delta_initial)
            self.trap_nu = (renormalized_frequency(detuned, 1),
                            renormalized_frequency(detuned, 2))
            if calibrate:
                self.phase_shift = self._exchange_phase()

    def _exchange(self, state: HybridState, step: ExchangeStep) -> HybridState:
        if self.schedule.mode == CLOSED_FORM:
            return exchange_evolve(state, self.schedule.g, step.hold, modes=(1, 3))
        res = exchange_step(state, self.schedule.pair, step.sweep, True, self.compensate,
                            modes=(1, 3), tol=self.tol)
        self.leakage = max(self.leakage, res.leakage)
        self.angles += [res.angle_on, res.angle_off]
        return res.state

    def _exchange_phase(self) -> float:
        """arg(-c c'), with c, c' the transfer amplitudes of steps II and IV.

        The ideal exchanges contribute i * i = -1 to the rows that carry a
        vibrational quantum; this offset is absorbed into theta_5.
        """
        step = self.schedule.steps[1]
        n = max(3, min(self.n_max, 4))
        layout = mode_layout(2, n)
        fwd = exchange_step(HybridState.basis(layout, [1, 0]), self.schedule.pair, step.sweep,
                            True, self.compensate, tol=self.tol).state.amplitude([0, 1])
        back = exchange_step(HybridState.basis(layout, [0, 1]), self.schedule.pair, step.sweep,
                             True, self.compensate, tol=self.tol).state.amplitude([1, 0])
        return cmath.phase(-fwd * back)

    def _pulse(self, state: HybridState, step: PulseStep) -> HybridState:
        pulse = step.pulse
        if step.name == "V" and self.phase_shift:
            pulse = LaserPulse(pulse.rabi, pulse.eta, pulse.sideband_k,
                               pulse.phase + self.phase_shift, pulse.duration)
        if self.schedule.mode == CLOSED_FORM:
            return sideband_evolve(state, pulse, ion=step.ion)
        return full_interaction_propagate(state, pulse, None, self.trap_nu[step.ion],
                                          ion=step.ion, tol=self.tol)

    def run(self, state: HybridState) -> HybridState:
        for step in self.schedule.steps:
            if isinstance(step, PulseStep):
                state = self._pulse(state, step)
            else:
                state = self._exchange(state, step)
        return state


def run_protocol(schedule: ProtocolSchedule, input_state=None, *, n_max: int | None = None,
                 tol: float = 1e-8, calibrate_phase: bool = True, compensate: bool = False,
                 check_return: bool = True) -> ProtocolReport:
    """Run the gate on the four computational inputs (and ``input_state``).

    ``input_state`` may be a label such as ``"eg"``, a pair of qubit values,
    four two-qubit amplitudes, or a prepared :class:`HybridState`.  Both
    vibrations start in |0>.

    In ``full-numeric`` mode the pulses are integrated with the non-RWA
    laser-ion model at the detuned trap frequencies (Coulomb exchange off),
    the exchanges with the numerical ramps and resonant hold.  With
    ``calibrate_phase`` the phase the real exchanges add on top of ``i * i``
    is measured once and folded into theta_5, as one would calibrate a
    laser phase.  ``compensate`` shortens each hold by the ramp-accrued
    exchange angle.

    Raises :class:`~septrap.errors.ProtocolFailure` (carrying the report as
    ``.report``) when more than 1e-2 of the population is left outside the
    vibrational ground state and ``check_return`` is set.
    """
    if n_max is None:
        n_max = 10 if schedule.mode == CLOSED_FORM else 5
    runner = _Runner(schedule, n_max, tol, calibrate_phase, compensate)
    table = np.zeros((4, 4), dtype=complex)
    ret_err = 0.0
    for i, qubits in enumerate(QUBIT_BASIS):
        out = runner.run(_joint_input(n_max, qubits))
        col = _qubit_block(out)
        table[:, i] = col
        ret_err = max(ret_err, 1.0 - float(np.sum(np.abs(col) ** 2)))
    output = None
    if input_state is not None:
        output = runner.run(_input_state(input_state, n_max))
    report = ProtocolReport(
        truth_table=table,
        fidelity=min(1.0, gate_fidelity(table)),
        vibration_return_error=max(ret_err, 0.0),
        per_step_durations=schedule.durations,
        total_duration=schedule.total_duration,
        mode=schedule.mode,
        phases=schedule.phases,
        output_state=output,
        exchange_leakage=runner.leakage,
        exchange_angles=tuple(runner.angles),
        diagnostics={"cnot_error": schedule.cnot_error, "theta5_shift": runner.phase_shift},
    )
    if check_return and report.vibration_return_error > VIBRATION_RETURN_LIMIT:
        err = ProtocolFailure(
            f"vibrations not returned to |00>: error {report.vibration_return_error:.3e} "
            f"> {VIBRATION_RETURN_LIMIT:.0e}"
        )
        err.report = report
        raise err
    return report


# --------------------------------------------------------------------------- #
# Chains
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class ChainTransferResult:
    state: HybridState
    phase: float
    duration: float
    hop_durations: tuple[float, ...]


def _chain_modes(state: HybridState) -> list[int]:
    return [i for i, s in enumerate(state.layout) if isinstance(s, FockBasis)]


def hop_amplitude(pair: TrapPair, sweep: SweepSpec | None, *, forward: bool = True,
                  mode: str = CLOSED_FORM, g: float | None = None, tol: float = 1e-8) -> complex:
    """Amplitude <0,1|U|1,0> (or <1,0|U|0,1>) of one chain hop."""
    layout = mode_layout(2, 2)
    start, end = ([1, 0], [0, 1]) if forward else ([0, 1], [1, 0])
    psi = HybridState.basis(layout, start)
    if mode == CLOSED_FORM:
        g_j = coupling_g(pair) if g is None else float(g)
        out = exchange_evolve(psi, g_j, math.pi / (2 * g_j))
    else:
        on = sweep if sweep.direction == RAMP_ON else sweep.reversed()
        out = exchange_step(psi, pair, on, tol=tol).state
    return out.amplitude(end)


def chain_transfer(chain: Sequence[TrapPair], state: HybridState, source: int, target: int,
                   sweep: SweepSpec, *, mode: str = CLOSED_FORM, g: float | None = None,
                   tol: float = 1e-8) -> ChainTransferResult:
    """Move the vibration of trap ``source`` to trap ``target`` hop by hop.

    ``chain[j]`` is the resonant configuration of traps ``j`` and ``j + 1``;
    each hop is a ramp-on, a hold of pi / (2 g_j) and a ramp-off (closed
    form: an exact pi/2 exchange).  ``g`` overrides every link's coupling.

    ``phase`` is the argument of the amplitude that carries one quantum from
    ``source`` to ``target``.  Quanta left behind by an imperfect hop are
    never touched again, so this amplitude is the product of the single-hop
    amplitudes, which are evaluated on two-mode probes.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    modes = _chain_modes(state)
    n = len(modes)
    if len(chain) != n - 1:
        raise ValueError(f"{n} traps need {n - 1} links, got {len(chain)}")
    if not (0 <= source < n and 0 <= target < n):
        raise ValueError(f"trap indices must lie in [0, {n - 1}]")
    for j, m in enumerate(modes):
        if j != source and state.populations(m)[0] < 1 - 1e-12:
            raise ValueError(f"trap {j} is not in its vibrational ground state")
    on = sweep if sweep.direction == RAMP_ON else sweep.reversed()
    step = 1 if target >= source else -1
    amp = 1.0 + 0j
    hops = []
    for j in range(source, target, step):
        link = min(j, j + step)
        pair = chain[link]
        g_j = coupling_g(pair) if g is None else float(g)
        hold = math.pi / (2 * g_j)
        pm = (modes[link], modes[link + 1])
        if mode == CLOSED_FORM:
            state = exchange_evolve(state, g_j, hold, modes=pm)
        else:
            state = exchange_step(state, pair, on, modes=pm, tol=tol).state
        amp *= hop_amplitude(pair, on, forward=step > 0, mode=mode, g=g, tol=tol)
        hops.append(hold + 2 * on.tau)
    return ChainTransferResult(state, cmath.phase(amp), float(sum(hops)), tuple(hops))


def chain_cnot_duration(t1: float, t2: float, t3: float, tau: float, n_ions: int) -> float:
    """2 [t_1 + (N - 1) t_2] + t_3 + 4 (N - 1) tau."""
    if n_ions < 2:
        raise ValueError("a chain needs at least two traps")
    return 2 * (t1 + (n_ions - 1) * t2) + t3 + 4 * (n_ions - 1) * tau
