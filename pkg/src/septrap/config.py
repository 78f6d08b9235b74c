"""Scenario configuration: a flat YAML mapping of typed keys.

Frequencies are written as ordinary frequencies with the suffix
``_over_2pi_hz`` and converted to angular frequency (rad/s) once, when the
config object is built.  Lengths are in metres and times in seconds.
Unknown keys are rejected so a misspelt key can never fall back to a
default silently.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from septrap.constants import SPECIES

SCENARIOS = ("pulse", "exchange", "sweep", "cnot", "chain")
RUN_MODES = ("closed-form", "full-numeric")


class ConfigError(ValueError):
    """Invalid scenario configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation scenario.

    Keys (units in brackets):

    scenario            pulse | exchange | sweep | cnot | chain
    name                output file stem (defaults to the scenario)
    species             ion species, e.g. ``Be9+``
    nu1_over_2pi_hz     trap 1 axial frequency at resonance [Hz]
    nu2_over_2pi_hz     trap 2 axial frequency [Hz]
    d                   trap separation [m]
    g_over_2pi_hz       optional override of the computed exchange rate [Hz]
    rabi_over_2pi_hz    laser Rabi frequency Omega [Hz]
    eta                 Lamb-Dicke parameter
    theta1/3/5          laser phases of pulses I, III, V [rad]
    delta_over_2pi_hz   ramp detuning Delta [Hz]
    tau                 ramp duration [s]
    n_max               Fock truncation per mode
    n_ions              number of traps in a chain
    mode                closed-form | full-numeric
    sideband_k          sideband order of the pulse scenario (0 = carrier)
    duration            pulse / exchange duration [s]; default is the pi
                        pulse, the CNOT carrier time or pi/(2 g)
    initial_qubit       g | e (pulse scenario)
    initial_fock        initial Fock level (pulse scenario)
    initial_n1/n2       initial Fock levels (exchange scenario)
    samples             rows of the CSV time series
    cnot_tol            error tolerance of the single-pulse CNOT search
    compensate          shorten holds by the ramp-accrued exchange angle
    tol                 integrator tolerance (full-numeric)
    output_dir          directory for the CSV and report
    output_format       csv
    reference_*         optional quoted values printed next to the results
    """

    scenario: str
    name: str = ""
    species: str = "Be9+"
    nu1_over_2pi_hz: float = 4.04e6
    nu2_over_2pi_hz: float = 4.04e6
    d: float = 40e-6
    g_over_2pi_hz: float | None = None
    rabi_over_2pi_hz: float = 5e5
    eta: float = 0.33
    theta1: float = 0.0
    theta3: float = 0.0
    theta5: float = 1.5 * math.pi
    delta_over_2pi_hz: float = 1e5 / (2 * math.pi)
    tau: float = 9e-6
    n_max: int = 10
    n_ions: int = 2
    mode: str = "closed-form"
    sideband_k: int = 1
    duration: float | None = None
    initial_qubit: str = "e"
    initial_fock: int = 0
    initial_n1: int = 1
    initial_n2: int = 0
    samples: int = 101
    cnot_tol: float = 1e-2
    compensate: bool = False
    tol: float = 1e-8
    output_dir: str = "."
    output_format: str = "csv"
    reference_g_over_2pi_hz: float | None = None
    reference_t1: float | None = None
    reference_t3: float | None = None
    reference_total_duration: float | None = None
    reference_gamma_20: float | None = None
    reference_gamma_31: float | None = None
    reference_exchange_correction: float | None = None

    # angular frequencies in rad/s, filled in once at construction
    nu1: float = field(init=False, repr=False, compare=False)
    nu2: float = field(init=False, repr=False, compare=False)
    rabi: float = field(init=False, repr=False, compare=False)
    delta: float = field(init=False, repr=False, compare=False)
    g: float | None = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        _validate(self)
        two_pi = 2 * math.pi
        object.__setattr__(self, "nu1", two_pi * self.nu1_over_2pi_hz)
        object.__setattr__(self, "nu2", two_pi * self.nu2_over_2pi_hz)
        object.__setattr__(self, "rabi", two_pi * self.rabi_over_2pi_hz)
        object.__setattr__(self, "delta", two_pi * self.delta_over_2pi_hz)
        g = None if self.g_over_2pi_hz is None else two_pi * self.g_over_2pi_hz
        object.__setattr__(self, "g", g)

    @property
    def stem(self) -> str:
        return self.name or self.scenario

    def updated(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


_INPUT_FIELDS = {f.name: f for f in fields(ScenarioConfig) if f.init}
_INT_KEYS = {"n_max", "n_ions", "sideband_k", "initial_fock", "initial_n1", "initial_n2",
             "samples"}
_STR_KEYS = {"scenario", "name", "species", "mode", "initial_qubit", "output_dir",
             "output_format"}
_BOOL_KEYS = {"compensate"}
_OPTIONAL = {"g_over_2pi_hz", "duration"} | {k for k in _INPUT_FIELDS if k.startswith("reference_")}
_POSITIVE = ("nu1_over_2pi_hz", "nu2_over_2pi_hz", "d", "g_over_2pi_hz", "rabi_over_2pi_hz",
             "delta_over_2pi_hz", "tau", "cnot_tol", "tol", "duration")


def _coerce(key: str, value):
    if value is None:
        if key in _OPTIONAL:
            return None
        raise ConfigError(key, "must not be empty")
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true or false, got {value!r}")
        return value
    if isinstance(value, bool):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if key in _INT_KEYS:
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    try:
        # YAML 1.1 reads 1e5 (no decimal point) as a string
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected a number, got {value!r}") from None


def _validate(cfg: ScenarioConfig) -> None:
    for key in _INPUT_FIELDS:
        object.__setattr__(cfg, key, _coerce(key, getattr(cfg, key)))
    if cfg.scenario not in SCENARIOS:
        raise ConfigError("scenario", f"must be one of {', '.join(SCENARIOS)}, got {cfg.scenario!r}")
    if cfg.mode not in RUN_MODES:
        raise ConfigError("mode", f"must be one of {', '.join(RUN_MODES)}, got {cfg.mode!r}")
    if cfg.species not in SPECIES:
        raise ConfigError("species", f"unknown species {cfg.species!r}")
    for key in _POSITIVE:
        value = getattr(cfg, key)
        if value is not None and not (value > 0 and math.isfinite(value)):
            raise ConfigError(key, f"must be positive and finite, got {value!r}")
    if not cfg.eta > 0:
        raise ConfigError("eta", f"must be positive, got {cfg.eta!r}")
    if cfg.n_max < 1:
        raise ConfigError("n_max", f"must be at least 1, got {cfg.n_max}")
    if cfg.n_ions < 2:
        raise ConfigError("n_ions", f"a chain needs at least 2 traps, got {cfg.n_ions}")
    if cfg.sideband_k < 0:
        raise ConfigError("sideband_k", f"must be >= 0, got {cfg.sideband_k}")
    if cfg.samples < 2:
        raise ConfigError("samples", f"must be at least 2, got {cfg.samples}")
    if cfg.initial_qubit not in ("g", "e"):
        raise ConfigError("initial_qubit", f"must be 'g' or 'e', got {cfg.initial_qubit!r}")
    for key in ("initial_fock", "initial_n1", "initial_n2"):
        if not 0 <= getattr(cfg, key) <= cfg.n_max:
            raise ConfigError(key, f"must lie in [0, n_max={cfg.n_max}]")
    if cfg.output_format != "csv":
        raise ConfigError("output_format", f"only 'csv' is supported, got {cfg.output_format!r}")
    if cfg.scenario in ("sweep", "cnot", "chain") and cfg.nu1_over_2pi_hz != cfg.nu2_over_2pi_hz:
        raise ConfigError("nu1_over_2pi_hz",
                          "must equal nu2_over_2pi_hz (the resonant setting; use delta for detuning)")


def from_mapping(data) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping of keys to values")
    unknown = sorted(set(data) - set(_INPUT_FIELDS))
    if unknown:
        raise ConfigError(str(unknown[0]), "unknown key")
    if "scenario" not in data:
        raise ConfigError("scenario", "missing required key")
    return ScenarioConfig(**data)


def parse(text: str) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<syntax>", str(exc).splitlines()[0]) from None
    return from_mapping(data)


def load(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    return parse(text)


def to_mapping(cfg: ScenarioConfig) -> dict:
    data = asdict(cfg)
    return {k: data[k] for k in _INPUT_FIELDS}


def serialize(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(to_mapping(cfg), sort_keys=False)


def scale_parameters(base: ScenarioConfig, power_factor: float, distance: float) -> ScenarioConfig:
    """Scale laser power by ``power_factor`` and move the traps to ``distance``.

    Omega grows as sqrt(P).  The coupling follows from the new distance, so
    any explicit ``g_over_2pi_hz`` is dropped unless ``distance`` is
    unchanged.
    """
    if not power_factor > 0:
        raise ValueError(f"power_factor must be positive, got {power_factor}")
    if not distance > 0:
        raise ValueError(f"distance must be positive, got {distance}")
    changes = {"d": distance}
    if power_factor != 1:
        changes["rabi_over_2pi_hz"] = base.rabi_over_2pi_hz * math.sqrt(power_factor)
    if distance != base.d:
        changes["g_over_2pi_hz"] = None
    return base.updated(**changes)
