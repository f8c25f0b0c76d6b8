from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.errors import InvalidCoherenceError

Site = Literal["Q1", "Q2", "C"]
SITES: Tuple[Site, ...] = ("Q1", "Q2", "C")


class CircuitParams(BaseModel):
    """
    Device parameters of the qubit-coupler-qubit circuit.

    Frequencies, anharmonicities and couplings are linear frequencies in GHz,
    coherence times in ns. ``None`` leaves a coherence time unset; ``inf``
    is accepted as "no decay". Defaults are the measured device values.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    omega1: float = Field(4.670, alias="omega1_ghz", gt=0, description="Q1 frequency")
    omega2: float = Field(4.619, alias="omega2_ghz", gt=0, description="Q2 frequency")
    omega_c: float = Field(6.183, alias="omegac_ghz", gt=0, description="Coupler frequency")
    alpha1: float = Field(-0.222, alias="alpha1_ghz", description="Q1 anharmonicity")
    alpha2: float = Field(-0.242, alias="alpha2_ghz", description="Q2 anharmonicity")
    alpha_c: float = Field(-0.378, alias="alphac_ghz", description="Coupler anharmonicity")
    g1: float = Field(0.110, alias="g1_ghz", ge=0, description="Q1-coupler coupling")
    g2: float = Field(0.105, alias="g2_ghz", ge=0, description="Q2-coupler coupling")
    # sign not fixed by measurement; positive reproduces the off-point positions
    g12: float = Field(0.0075, alias="g12_ghz", ge=0, description="Direct Q1-Q2 coupling")
    t1_q1: Optional[float] = Field(6510.0, alias="t1_q1_ns", gt=0)
    t1_q2: Optional[float] = Field(6580.0, alias="t1_q2_ns", gt=0)
    t1_c: Optional[float] = Field(4060.0, alias="t1_c_ns", gt=0)
    t2_q1: Optional[float] = Field(540.0, alias="t2_q1_ns", gt=0)
    t2_q2: Optional[float] = Field(7430.0, alias="t2_q2_ns", gt=0)
    t2_c: Optional[float] = Field(270.0, alias="t2_c_ns", gt=0)
    levels: int = Field(3, ge=2, description="Truncation per element")

    @model_validator(mode="after")
    def _check_coherence(self) -> "CircuitParams":
        for site in SITES:
            t1, t2 = self.coherence(site)
            if t1 is not None and t2 is not None and t2 > 2.0 * t1:
                raise InvalidCoherenceError(f"{site}: T2={t2} ns exceeds 2*T1={2.0 * t1} ns")
        return self

    def frequency(self, site: Site) -> float:
        return {"Q1": self.omega1, "Q2": self.omega2, "C": self.omega_c}[site]

    def anharmonicity(self, site: Site) -> float:
        return {"Q1": self.alpha1, "Q2": self.alpha2, "C": self.alpha_c}[site]

    def coherence(self, site: Site) -> Tuple[Optional[float], Optional[float]]:
        """Return (T1, T2) in ns for one element."""
        return {
            "Q1": (self.t1_q1, self.t2_q1),
            "Q2": (self.t1_q2, self.t2_q2),
            "C": (self.t1_c, self.t2_c),
        }[site]

    def with_frequencies(
        self, omega1: Optional[float] = None, omega_c: Optional[float] = None
    ) -> "CircuitParams":
        """Copy with Q1 and/or coupler moved (Q2 is fixed-frequency)."""
        update = {}
        if omega1 is not None:
            update["omega1"] = omega1
        if omega_c is not None:
            update["omega_c"] = omega_c
        return self.model_copy(update=update)

    def without_decoherence(self) -> "CircuitParams":
        return self.model_copy(
            update={f"t{k}_{s}": None for k in (1, 2) for s in ("q1", "q2", "c")}
        )


class Detunings(BaseModel):
    """
    Detunings entering the three-level effective couplings (GHz).

    delta = w1 - wc, delta_tilde = w - w~c, delta_tilde_prime = w~ - wc,
    delta_double_tilde = w~ - w~c, with w~ = w + alpha.
    """

    model_config = ConfigDict(frozen=True)

    delta: float
    delta_tilde: float
    delta_tilde_prime: float
    delta_double_tilde: float


class EffectiveCoupling(BaseModel):
    """
    Effective Q1-Q2 exchange coupling for a given coupler state
    """

    model_config = ConfigDict(frozen=True)

    value: float = Field(..., description="Signed coupling (GHz)")
    coupler_state: Literal[0, 1]
    model: Literal["two-level", "three-level"]
    delta: float = Field(..., description="Detuning used (GHz)")

    @property
    def value_2g_mhz(self) -> float:
        """|2 g| in MHz, the population oscillation frequency."""
        return abs(2.0 * self.value) * 1e3


class FitResult(BaseModel):
    """
    Result of a cosine oscillation fit.

    ``frequency`` is in MHz; for a population exchange it equals |2 g|/2pi.
    """

    frequency: float = Field(..., ge=0, description="Oscillation frequency (MHz)")
    amplitude: float
    phase: float
    offset: float
    residual_rms: float = Field(..., ge=0)
    flag: Literal["ok", "flat", "under_resolved"] = "ok"


class Segment(BaseModel):
    """
    Piecewise-constant control segment; pi-pulses fire at its start
    """

    model_config = ConfigDict(frozen=True)

    name: str = "segment"
    duration: float = Field(..., gt=0, description="Duration (ns)")
    omega1: float = Field(..., gt=0, description="Q1 frequency during the segment (GHz)")
    omega_c: float = Field(..., gt=0, description="Coupler frequency during the segment (GHz)")
    state_preps: Tuple[Site, ...] = ()


class PulseSchedule(BaseModel):
    """
    Ordered control segments. Q2 stays at its fixed frequency throughout.
    """

    model_config = ConfigDict(frozen=True)

    segments: Tuple[Segment, ...] = Field(..., min_length=1)

    @property
    def total_duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def start_of(self, name: str) -> float:
        """Start time (ns) of the first segment called ``name``."""
        t = 0.0
        for segment in self.segments:
            if segment.name == name:
                return t
            t += segment.duration
        raise KeyError(name)


class ScheduleConfig(BaseModel):
    """
    Inputs to the transistor pulse-sequence builder
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    coupler_state: Literal[0, 1] = 1
    omega_c: Optional[float] = Field(None, gt=0, description="Interaction coupler frequency (GHz)")
    interaction_ns: Optional[float] = Field(None, ge=0, description="None = one full transfer")
    idle_ns: float = Field(10.0, gt=0)
    idle_detuning_ghz: float = Field(0.050, description="Q1 above Q2 while idling")
    idle_omega_c: Optional[float] = Field(None, gt=0, description="None = |0> off point")
    prepare: Tuple[Site, ...] = ("Q2",)
    calibrate: bool = False

    @field_validator("coupler_state", mode="before")
    @classmethod
    def _parse_coupler_state(cls, value):
        tags = {"0": 0, "1": 1, "|0>": 0, "|1>": 1, "closed": 0, "open": 1}
        if isinstance(value, str):
            if value.strip() not in tags:
                raise ValueError(f"unknown coupler state tag: {value!r}")
            return tags[value.strip()]
        return value

    @field_validator("prepare")
    @classmethod
    def _qubits_only(cls, value):
        if "C" in value:
            raise ValueError("the coupler is prepared through coupler_state")
        return value


class TomographyRecord(BaseModel):
    """
    One measurement setting of two-qubit state tomography.

    Populations are ordered (p00, p10, p01, p11) with Q1 written first.
    """

    input_state_id: int = Field(..., ge=0, le=15)
    basis: str = Field(..., pattern=r"^[xyz]{2}$", description="Axis for Q1 then Q2")
    populations: List[float] = Field(..., min_length=4, max_length=4)
    counts: Optional[List[int]] = Field(None, min_length=4, max_length=4)
    shots: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _check_totals(self) -> "TomographyRecord":
        if abs(sum(self.populations) - 1.0) > 1e-9:
            raise ValueError("populations must sum to 1")
        if self.counts is not None and (self.shots is None or sum(self.counts) != self.shots):
            raise ValueError("counts must sum to shots")
        return self


class GridSpec(BaseModel):
    """
    Evenly spaced grid (or explicit values)
    """

    model_config = ConfigDict(extra="forbid")

    start: float = 0.0
    stop: float = 1.0
    points: int = Field(2, ge=1)
    values: Optional[List[float]] = Field(None, min_length=1)

    def array(self) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        return np.linspace(self.start, self.stop, self.points)


class ExperimentConfig(BaseModel):
    """
    Experiment block of a run configuration
    """

    model_config = ConfigDict(extra="forbid")

    coupler_state: Literal[0, 1] = 1
    omegac_grid: GridSpec = GridSpec(start=6.10, stop=6.30, points=21)
    t_grid: GridSpec = GridSpec(start=0.0, stop=300.0, points=301)
    delta_grid: GridSpec = GridSpec(start=-2.6, stop=-1.1, points=25)
    gamma_grid: GridSpec = GridSpec(start=0.0, stop=0.110, points=6)
    curve_window_ns: float = Field(1000.0, gt=0)
    curve_sample_ns: float = Field(1.0, gt=0)
    transistor_ns: float = Field(120.0, gt=0)
    interaction_ns: Optional[float] = Field(None, ge=0)
    idle_ns: float = Field(10.0, gt=0)
    sample_ns: float = Field(0.5, gt=0)
    calibrate: bool = True
    noisy: bool = False
    shots: Optional[int] = Field(None, ge=1, description="None = exact expectation values")
    seed: int = 1234
    readout_error_q1: float = Field(0.0, ge=0, le=0.5)
    readout_error_q2: float = Field(0.0, ge=0, le=0.5)
    correct_readout: bool = True
    bootstrap_resamples: Optional[int] = Field(None, ge=1)
    gate: Literal["open", "closed", "both"] = "both"


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dir: Optional[Path] = None


class RunConfig(BaseModel):
    """
    Full run configuration: circuit, experiment and output blocks
    """

    model_config = ConfigDict(extra="forbid")

    circuit: CircuitParams = CircuitParams()
    experiment: ExperimentConfig = ExperimentConfig()
    output: OutputConfig = OutputConfig()
