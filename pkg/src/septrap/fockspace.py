"""Truncated Fock-space linear algebra shared by the physics modules.

Index convention
----------------
A :class:`HybridState` is laid out as a tuple of subsystems, slowest index
first.  For ions the layout is ``(qubit_1, mode_1, qubit_2, mode_2, ...)``, so
the flat amplitude index of ``|q1, m1, q2, m2>`` is::

    ((q1 * d1 + m1) * 2 + q2) * d2 + m2          (d_j = n_max_j + 1)

Qubit index 0 is the ground state ``|g>`` and 1 the excited state ``|e>``.

Hamiltonians are always expressed as H / hbar, i.e. in rad/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from numbers import Real
from typing import Callable, Iterable, Sequence, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sparse
from scipy.integrate import solve_ivp

from septrap.errors import PropagationError, TruncationError

GROUND = 0
EXCITED = 1
_QUBIT_LABELS = {"g": GROUND, "e": EXCITED}


@dataclass(frozen=True)
class FockBasis:
    """Fock levels 0..n_max of one vibrational mode."""

    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @property
    def dim(self) -> int:
        return self.n_max + 1


@dataclass(frozen=True)
class Qubit:
    """Two internal levels, |g> (index 0) and |e> (index 1)."""

    @property
    def dim(self) -> int:
        return 2


Subsystem = Union[Qubit, FockBasis]


def ion_layout(n_ions: int, n_max: int | Sequence[int]) -> tuple[Subsystem, ...]:
    """Layout ``(qubit, mode) * n_ions``; ``n_max`` may differ per ion."""
    cutoffs = [n_max] * n_ions if isinstance(n_max, (int, np.integer)) else list(n_max)
    if len(cutoffs) != n_ions:
        raise ValueError("one n_max per ion required")
    layout: list[Subsystem] = []
    for n in cutoffs:
        layout += [Qubit(), FockBasis(int(n))]
    return tuple(layout)


def mode_layout(n_modes: int, n_max: int) -> tuple[Subsystem, ...]:
    return tuple(FockBasis(n_max) for _ in range(n_modes))


def _dims(layout: Sequence[Subsystem]) -> tuple[int, ...]:
    return tuple(s.dim for s in layout)


@dataclass(frozen=True, eq=False)
class HybridState:
    """Pure state on a product of qubits and truncated modes.

    ``amplitudes`` is stored read-only; every operation returns a new state.
    """

    amplitudes: np.ndarray
    layout: tuple[Subsystem, ...]

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        size = int(np.prod(_dims(self.layout)))
        if amps.size != size:
            raise ValueError(f"{amps.size} amplitudes do not match layout of dimension {size}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "layout", tuple(self.layout))

    @classmethod
    def basis(cls, layout: Sequence[Subsystem], labels: Sequence[int | str]) -> "HybridState":
        """Product basis state; qubit labels may be 0/1 or 'g'/'e'."""
        layout = tuple(layout)
        index = _flat_index(layout, labels)
        amps = np.zeros(int(np.prod(_dims(layout))), dtype=complex)
        amps[index] = 1.0
        return cls(amps, layout)

    @property
    def dims(self) -> tuple[int, ...]:
        return _dims(self.layout)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def as_tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def amplitude(self, labels: Sequence[int | str]) -> complex:
        return complex(self.amplitudes[_flat_index(self.layout, labels)])

    def with_amplitudes(self, amplitudes: np.ndarray) -> "HybridState":
        return HybridState(amplitudes, self.layout)

    def populations(self, subsystem: int) -> np.ndarray:
        """Marginal level populations of one subsystem."""
        probs = np.abs(self.as_tensor()) ** 2
        axes = tuple(i for i in range(len(self.layout)) if i != subsystem)
        return probs.sum(axis=axes)

    def overlap(self, other: "HybridState") -> complex:
        """<self|other>."""
        if _dims(self.layout) != _dims(other.layout):
            raise ValueError("states live on different layouts")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "HybridState") -> float:
        return abs(self.overlap(other)) ** 2


def _flat_index(layout: Sequence[Subsystem], labels: Sequence[int | str]) -> int:
    if len(labels) != len(layout):
        raise ValueError(f"expected {len(layout)} labels, got {len(labels)}")
    idx = []
    for sub, lab in zip(layout, labels):
        if isinstance(lab, str):
            if not isinstance(sub, Qubit) or lab not in _QUBIT_LABELS:
                raise ValueError(f"label {lab!r} is not valid for {sub}")
            lab = _QUBIT_LABELS[lab]
        if not 0 <= lab < sub.dim:
            raise ValueError(f"label {lab} outside {sub}")
        idx.append(int(lab))
    return int(np.ravel_multi_index(idx, _dims(layout)))


@dataclass(frozen=True, eq=False)
class ModeOperator:
    """A square matrix with a descriptive label."""

    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def dag(self) -> "ModeOperator":
        return ModeOperator(self.matrix.conj().T, f"({self.label})^dag")

    def __matmul__(self, other):
        if isinstance(other, ModeOperator):
            return ModeOperator(self.matrix @ other.matrix, f"{self.label} {other.label}")
        if isinstance(other, HybridState):
            return other.with_amplitudes(self.matrix @ other.amplitudes)
        return NotImplemented

    def __add__(self, other: "ModeOperator") -> "ModeOperator":
        return ModeOperator(self.matrix + other.matrix, f"{self.label} + {other.label}")

    def __mul__(self, scalar: complex) -> "ModeOperator":
        return ModeOperator(scalar * self.matrix, self.label)

    __rmul__ = __mul__


OPERATOR_KINDS = ("annihilation", "creation", "number", "position", "identity")


def annihilation(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1).astype(complex)


def build_mode_operator(basis: FockBasis, kind: str, xi: float | None = None) -> ModeOperator:
    """Ladder-type operators on one truncated mode.

    ``position`` is ``xi * (a + a^dag)`` with ``xi = sqrt(hbar / (2 M nu))`` in
    metres and must be given ``xi``.
    """
    a = annihilation(basis.n_max)
    if kind == "annihilation":
        return ModeOperator(a, "a")
    if kind == "creation":
        return ModeOperator(a.conj().T, "a^dag")
    if kind == "number":
        return ModeOperator(np.diag(np.arange(basis.dim, dtype=float)), "n")
    if kind == "identity":
        return ModeOperator(np.eye(basis.dim), "1")
    if kind == "position":
        if xi is None:
            raise ValueError("position operator needs the zero-point length xi")
        return ModeOperator(xi * (a + a.conj().T), "z")
    raise ValueError(f"unknown operator kind {kind!r}; expected one of {OPERATOR_KINDS}")


def tensor(items: Sequence):
    """Kronecker product in the documented (slowest-first) index order.

    Accepts all :class:`ModeOperator`, all :class:`HybridState`, or plain arrays.
    """
    items = list(items)
    if not items:
        raise ValueError("tensor of an empty list")
    if all(isinstance(x, ModeOperator) for x in items):
        mat = reduce(np.kron, (x.matrix for x in items))
        return ModeOperator(mat, " (x) ".join(x.label or "?" for x in items))
    if all(isinstance(x, HybridState) for x in items):
        amps = reduce(np.kron, (x.amplitudes for x in items))
        layout = sum((x.layout for x in items), ())
        return HybridState(amps, layout)
    if any(isinstance(x, (ModeOperator, HybridState)) for x in items):
        raise TypeError("cannot mix operators and states in one tensor product")
    arrays = [np.asarray(x) for x in items]
    if len({a.ndim for a in arrays}) != 1:
        raise ValueError("dimension mismatch: mixing vectors and matrices")
    return reduce(np.kron, arrays)


def apply_local(state: HybridState, op, targets: Sequence[int]) -> HybridState:
    """Apply ``op`` to the listed subsystems (in the listed order).

    ``op`` is a matrix on the tensor product of the targets, or a callable
    mapping a ``(d_targets, n_columns)`` array to one of the same shape.
    """
    targets = list(targets)
    dims = state.dims
    if len(set(targets)) != len(targets) or any(not 0 <= t < len(dims) for t in targets):
        raise ValueError(f"invalid target subsystems {targets}")
    rest = [i for i in range(len(dims)) if i not in targets]
    psi = np.transpose(state.as_tensor(), targets + rest)
    d_t = int(np.prod([dims[t] for t in targets]))
    cols = psi.reshape(d_t, -1)
    if callable(op):
        out = np.asarray(op(cols))
    else:
        op = op.matrix if isinstance(op, ModeOperator) else np.asarray(op)
        if op.shape != (d_t, d_t):
            raise ValueError(f"operator of shape {op.shape} does not act on dimension {d_t}")
        out = op @ cols
    out = out.reshape([dims[i] for i in targets + rest])
    return state.with_amplitudes(np.transpose(out, np.argsort(targets + rest)).reshape(-1))


def top_population(state: HybridState, subsystem: int, levels: int = 1) -> float:
    """Population in the highest ``levels`` Fock levels of a mode."""
    if levels <= 0:
        return 0.0
    return float(state.populations(subsystem)[-levels:].sum())


def check_truncation(state: HybridState, modes: Iterable[int], levels: int = 1,
                     threshold: float = 1e-8) -> None:
    for m in modes:
        p = top_population(state, m, levels)
        if p > threshold:
            raise TruncationError(
                f"subsystem {m}: population {p:.3e} in its top {levels} Fock level(s) "
                f"exceeds {threshold:.0e}; raise n_max"
            )


# --------------------------------------------------------------------------- #
# Hamiltonians and propagation
# --------------------------------------------------------------------------- #

Coefficient = Union[None, float, Callable[[float], complex]]


class Hamiltonian:
    """H(t)/hbar = sum_k c_k(t) M_k.

    A coefficient is ``None`` (constant 1), a real number ``w`` meaning
    ``exp(1j * w * t)``, or a callable of ``t``.  Harmonic terms sharing a
    frequency are merged so that a matrix-vector product costs one sparse
    product per distinct frequency.
    """

    def __init__(self, terms: Iterable[tuple[np.ndarray, Coefficient]]):
        harmonic: dict[float, object] = {}
        general: list[tuple[object, Callable[[float], complex]]] = []
        dim = None
        for matrix, coeff in terms:
            m = sparse.csr_matrix(matrix, dtype=complex)
            if dim is None:
                dim = m.shape[0]
            if m.shape != (dim, dim):
                raise ValueError("all Hamiltonian terms must share one square shape")
            if coeff is None:
                coeff = 0.0
            if isinstance(coeff, Real):
                w = float(coeff)
                harmonic[w] = harmonic[w] + m if w in harmonic else m
            else:
                general.append((m, coeff))
        if dim is None:
            raise ValueError("Hamiltonian needs at least one term")
        self.dim = dim
        self._harmonic = [(w, m.tocsr()) for w, m in sorted(harmonic.items())]
        self._general = general

    @property
    def is_constant(self) -> bool:
        return not self._general and all(w == 0.0 for w, _ in self._harmonic)

    def __call__(self, t: float) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for w, m in self._harmonic:
            out += (m * (np.exp(1j * w * t) if w else 1.0)).toarray()
        for m, f in self._general:
            out += (m * f(t)).toarray()
        return out

    def matvec(self, t: float, y: np.ndarray) -> np.ndarray:
        out = np.zeros(y.shape, dtype=complex)
        for w, m in self._harmonic:
            out += (np.exp(1j * w * t) if w else 1.0) * (m @ y)
        for m, f in self._general:
            out += f(t) * (m @ y)
        return out


HamiltonianLike = Union[Hamiltonian, np.ndarray, Callable[[float], np.ndarray]]


@dataclass
class PropagationInfo:
    """Diagnostics of the last refinement of :func:`propagate`."""

    rtol: float = math.nan
    steps: int = 0
    halving_change: float = math.nan
    norm_error: float = math.nan
    refinements: int = 0
    history: list = field(default_factory=list)


def _check_hermitian(h: np.ndarray, t: float) -> None:
    scale = max(np.abs(h).max(), 1e-300)
    dev = np.abs(h - h.conj().T).max()
    if dev > 1e-12 * scale:
        raise ValueError(f"Hamiltonian is not Hermitian at t={t:.6g}: deviation {dev:.3e}")


def propagate(state, hamiltonian: HamiltonianLike, t_span, tol: float = 1e-9,
              max_refinements: int = 6, info: PropagationInfo | None = None):
    """Evolve under the time-ordered exponential of -i H(t) over ``t_span``.

    ``state`` is a :class:`HybridState`, a vector, or a ``(dim, k)`` array whose
    columns are evolved together.  ``t_span`` is a duration or ``(t0, t1)``.

    Constant Hamiltonians are exponentiated exactly.  Otherwise an adaptive
    8th-order Runge-Kutta run is repeated with its largest step halved; the
    result is accepted once the two runs agree to ``tol`` in every amplitude and
    the norm is preserved to ``tol``.  Each failed attempt tightens the
    integrator tolerance a hundredfold; :class:`PropagationError` is raised when
    the budget of ``max_refinements`` is exhausted.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    t0, t1 = (0.0, float(t_span)) if np.ndim(t_span) == 0 else map(float, t_span)
    if isinstance(state, HybridState):
        y0 = state.amplitudes.reshape(-1, 1)
    else:
        y0 = np.asarray(state, dtype=complex)
        y0 = y0.reshape(-1, 1) if y0.ndim == 1 else y0
    dim, ncol = y0.shape

    if isinstance(hamiltonian, np.ndarray) or sparse.issparse(hamiltonian):
        hamiltonian = Hamiltonian([(hamiltonian, None)])
    if isinstance(hamiltonian, Hamiltonian):
        h_of_t, matvec, constant = hamiltonian, hamiltonian.matvec, hamiltonian.is_constant
    else:
        h_of_t, constant = hamiltonian, False

        def matvec(t, y):
            return hamiltonian(t) @ y

    for t in np.linspace(t0, t1, 5):
        h = np.asarray(h_of_t(t))
        if h.shape != (dim, dim):
            raise ValueError(f"Hamiltonian of shape {h.shape} does not act on dimension {dim}")
        _check_hermitian(h, t)

    info = info if info is not None else PropagationInfo()
    if t1 == t0:
        y = y0.copy()
    elif constant:
        y = scipy.linalg.expm(-1j * (t1 - t0) * h_of_t(t0)) @ y0
        info.steps, info.norm_error, info.halving_change = 1, 0.0, 0.0
    else:
        y = _adaptive(y0, matvec, t0, t1, tol, max_refinements, info)

    if isinstance(state, HybridState):
        return state.with_amplitudes(y[:, 0])
    return y[:, 0] if np.ndim(state) == 1 else y


def _adaptive(y0, matvec, t0, t1, tol, max_refinements, info):
    dim, ncol = y0.shape
    norms0 = np.linalg.norm(y0, axis=0)

    def rhs(t, y):
        return -1j * matvec(t, y.reshape(dim, ncol)).reshape(-1)

    rtol = min(max(tol * 1e-2, 1e-13), 1e-6)
    for attempt in range(max_refinements + 1):
        kwargs = dict(method="DOP853", rtol=rtol, atol=rtol * 1e-2)
        coarse = solve_ivp(rhs, (t0, t1), y0.reshape(-1), **kwargs)
        if not coarse.success:
            raise PropagationError(f"integrator failed: {coarse.message}")
        n_steps = max(len(coarse.t) - 1, 1)
        h_max = 0.5 * float(np.max(np.diff(coarse.t))) if n_steps > 0 else abs(t1 - t0)
        fine = solve_ivp(rhs, (t0, t1), y0.reshape(-1), max_step=h_max, **kwargs)
        if not fine.success:
            raise PropagationError(f"integrator failed: {fine.message}")
        y_c = coarse.y[:, -1].reshape(dim, ncol)
        y_f = fine.y[:, -1].reshape(dim, ncol)
        change = float(np.abs(y_f - y_c).max())
        norm_err = float(np.abs(np.linalg.norm(y_f, axis=0) - norms0).max())
        info.history.append((rtol, len(fine.t) - 1, change, norm_err))
        info.rtol, info.steps, info.halving_change, info.norm_error = rtol, len(fine.t) - 1, change, norm_err
        info.refinements = attempt
        if change < tol and norm_err < tol:
            return y_f
        if rtol <= 1e-13:
            break
        rtol = max(rtol * 1e-2, 1e-13)
    raise PropagationError(
        f"could not reach tol={tol:.1e}: halving the step still changes amplitudes by "
        f"{info.halving_change:.2e} (norm error {info.norm_error:.2e}) after "
        f"{info.refinements} refinements"
    )


def evolve_constant(state, hamiltonian: np.ndarray, t: float):
    """exp(-i H t) applied to a state, vector or column block."""
    return propagate(state, np.asarray(hamiltonian), t)


def squeeze_matrix(n_max: int, r: float, pad: int = 30) -> np.ndarray:
    """Truncated ``S(r) = exp(r/2 (a^2 - a^dag^2))`` computed on a padded space.

    ``S(r)|n>`` is the n-th eigenstate of an oscillator whose frequency is
    ``exp(2 r)`` times that of the reference basis (position variance shrinks by
    ``exp(-2 r)``).
    """
    a = annihilation(n_max + pad)
    s = scipy.linalg.expm(0.5 * r * (a @ a - a.conj().T @ a.conj().T))
    return s[: n_max + 1, : n_max + 1]


def displacement_matrix(n_max: int, alpha: complex, pad: int = 30) -> np.ndarray:
    """Truncated ``D(alpha) = exp(alpha a^dag - alpha* a)`` computed on a padded space."""
    a = annihilation(n_max + pad)
    d = scipy.linalg.expm(alpha * a.conj().T - np.conj(alpha) * a)
    return d[: n_max + 1, : n_max + 1]
