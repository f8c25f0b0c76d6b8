"""
Measurement protocols of the transistor: pulse sequences, chevron scans,
oscillation fits, coupling curves and the gate channel used for tomography.

Populations are always read in the dressed eigenbasis of the idle point,
with the coupler traced out.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import least_squares, minimize_scalar

from app.config import get_settings
from app.errors import (
    FitError,
    InvalidDimensionError,
    NoRootError,
    ResonanceSingularityError,
)
from app.schemas import (
    CircuitParams,
    FitResult,
    PulseSchedule,
    ScheduleConfig,
    Segment,
    Site,
)
from app.services.circuit_model import (
    TWO_PI,
    DressedBasis,
    dressed_basis,
    embed_op,
    full_hamiltonian,
)
from app.services.dynamics import (
    LindbladPropagator,
    Propagator,
    QuantumState,
    collapse_channels_from_coherence,
    dephasing_channel,
    get_propagator,
    reduce_to_qubits,
)
from app.services.effective_model import (
    coupler_frequency_for_delta,
    find_off_point,
    g_eff_three_level,
    g_eff_two_level,
    interaction_delta,
    off_point_bracket,
    transfer_time,
)

logger = logging.getLogger(__name__)

PREPARE, INTERACT, MEASURE = "idle_prepare", "interact", "idle_measure"
POPULATION_COLUMNS = ["p00", "p01", "p10", "p11"]
MIN_FIT_SAMPLES = 8
FLAT_AMPLITUDE = 1e-4
CALIBRATION_WINDOW_GHZ = 0.03


@dataclass(frozen=True)
class InteractionCalibration:
    """Q1 frequency that puts |10> and |01> on dressed resonance."""

    omega1: float
    omega_c: float
    coupler_state: int
    splitting_ghz: float

    @property
    def coupling_ghz(self) -> float:
        return 0.5 * self.splitting_ghz

    @property
    def transfer_time_ns(self) -> float:
        return transfer_time(self.coupling_ghz)


@dataclass
class ScheduleRun:
    """Population table of a schedule run and its final state (bare basis)."""

    table: pd.DataFrame
    final_state: QuantumState
    measurement_basis: DressedBasis

    def segment(self, name: str) -> pd.DataFrame:
        return self.table[self.table["segment"] == name]


@dataclass
class ChevronData:
    """P(|01>) over (coupler frequency, interaction time) with one fit per row."""

    omegac_grid: np.ndarray
    t_grid: np.ndarray
    population: np.ndarray
    fitted: List[Optional[FitResult]] = field(default_factory=list)

    def __post_init__(self):
        if self.population.shape != (len(self.omegac_grid), len(self.t_grid)):
            raise InvalidDimensionError("population grid does not match the axes")

    def to_frame(self) -> pd.DataFrame:
        wc, t = np.meshgrid(self.omegac_grid, self.t_grid, indexing="ij")
        return pd.DataFrame(
            {"omegac_ghz": wc.ravel(), "t_ns": t.ravel(), "p01": self.population.ravel()}
        )


@dataclass
class _SegmentModel:
    H: np.ndarray
    basis: DressedBasis
    levels: int

    def pi_pulse(self, site: Site) -> np.ndarray:
        """X on levels {0, 1} of ``site``, acting in this segment's dressed basis."""
        L = self.levels
        x = np.eye(L, dtype=complex)
        x[:2, :2] = [[0.0, 1.0], [1.0, 0.0]]
        return self.basis.to_bare(embed_op(x, site, L).matrix)


def _segment_model(p: CircuitParams, segment: Segment) -> _SegmentModel:
    H = full_hamiltonian(p.with_frequencies(omega1=segment.omega1, omega_c=segment.omega_c)).matrix
    return _SegmentModel(H=H, basis=dressed_basis(H, p.levels), levels=p.levels)


def _max_workers(max_workers: Optional[int]) -> int:
    return max_workers or get_settings().max_workers


def idle_coupler_frequency(p: CircuitParams) -> float:
    """Coupler frequency of the |0> off point, where the idle coupling vanishes."""
    try:
        delta = find_off_point(p, 0, off_point_bracket(p, 0))
    except NoRootError:
        logger.warning("No |0> off point for these couplings, idling at wc=%.4f GHz", p.omega_c)
        return p.omega_c
    return coupler_frequency_for_delta(p, delta)


def calibrate_interaction(p: CircuitParams, omega_c: float, coupler_state: int) -> InteractionCalibration:
    """
    Tune Q1 onto the dressed resonance with Q2 for a given coupler frequency.

    Minimizes the |10n>/|01n> eigenvalue splitting over w1 within 30 MHz of w2;
    the minimum splitting is |2 g|.
    """
    if coupler_state not in (0, 1):
        raise ValueError(f"coupler state must be 0 or 1, got {coupler_state!r}")
    labels = (f"10{coupler_state}", f"01{coupler_state}")

    def splitting(omega1: float) -> float:
        H = full_hamiltonian(p.with_frequencies(omega1=omega1, omega_c=omega_c)).matrix
        basis = dressed_basis(H, p.levels)
        i, j = (basis.labels.index(label) for label in labels)
        return abs(basis.energies[i] - basis.energies[j]) / TWO_PI

    result = minimize_scalar(
        splitting,
        bounds=(p.omega2 - CALIBRATION_WINDOW_GHZ, p.omega2 + CALIBRATION_WINDOW_GHZ),
        method="bounded",
        options={"xatol": 1e-9},
    )
    calibration = InteractionCalibration(
        omega1=float(result.x),
        omega_c=omega_c,
        coupler_state=coupler_state,
        splitting_ghz=float(result.fun),
    )
    logger.debug(
        "Calibrated wc=%.4f |%d>: w1=%.6f GHz, 2g=%.4f MHz",
        omega_c,
        coupler_state,
        calibration.omega1,
        calibration.splitting_ghz * 1e3,
    )
    return calibration


def build_transistor_schedule(cfg: ScheduleConfig, p: Optional[CircuitParams] = None) -> PulseSchedule:
    """
    Idle (pi-pulses) -> interact -> idle sequence of the transistor.

    Closed gate (coupler |0>): the coupler stays at its |0> off point.
    Open gate (coupler |1>): coupler pi-pulse at t=0 and interaction at
    ``cfg.omega_c`` (default: the device coupler frequency). A zero
    interaction time drops the interaction segment.
    """
    p = p or CircuitParams()
    idle_wc = cfg.idle_omega_c or idle_coupler_frequency(p)
    if cfg.omega_c is not None:
        target_wc = cfg.omega_c
    else:
        target_wc = p.omega_c if cfg.coupler_state == 1 else idle_wc
    open_wc = cfg.omega_c if cfg.coupler_state == 1 and cfg.omega_c is not None else p.omega_c

    duration = cfg.interaction_ns
    if duration is None:
        if cfg.calibrate:
            duration = calibrate_interaction(p, open_wc, 1).transfer_time_ns
        else:
            duration = transfer_time(g_eff_three_level(p, interaction_delta(p, open_wc), 1).value)
    omega1 = calibrate_interaction(p, target_wc, cfg.coupler_state).omega1 if cfg.calibrate else p.omega2

    preps: Tuple[Site, ...] = tuple(cfg.prepare) + (("C",) if cfg.coupler_state == 1 else ())
    idle_w1 = p.omega2 + cfg.idle_detuning_ghz
    segments = [Segment(name=PREPARE, duration=cfg.idle_ns, omega1=idle_w1, omega_c=idle_wc, state_preps=preps)]
    if duration > 0:
        segments.append(Segment(name=INTERACT, duration=duration, omega1=omega1, omega_c=target_wc))
    else:
        logger.info("Zero interaction time, schedule has no interaction segment")
    segments.append(Segment(name=MEASURE, duration=cfg.idle_ns, omega1=idle_w1, omega_c=idle_wc))
    logger.info(
        "Schedule: coupler |%d>, interaction %.2f ns at wc=%.4f GHz, w1=%.6f GHz",
        cfg.coupler_state,
        duration,
        target_wc,
        omega1,
    )
    return PulseSchedule(segments=tuple(segments))


def _qubit_populations(rho: np.ndarray, basis: DressedBasis, levels: int) -> Dict[str, float]:
    qubits = reduce_to_qubits(basis.to_dressed(rho), levels)
    pops = {f"p{a}{b}": float(np.real(qubits[a * levels + b, a * levels + b])) for a in (0, 1) for b in (0, 1)}
    pops["leakage"] = 1.0 - sum(pops.values())
    return pops


def run_schedule(
    s: PulseSchedule,
    p: CircuitParams,
    psi0: Optional[QuantumState] = None,
    noisy: bool = False,
    sample_ns: float = 0.5,
    offsets: Optional[Mapping[str, Sequence[float]]] = None,
    propagator: Optional[Propagator] = None,
) -> ScheduleRun:
    """
    Propagate through the schedule segment by segment.

    ``psi0`` holds amplitudes in the dressed basis of the first segment
    (default: ground state). ``offsets`` overrides the uniform sampling of
    named segments with explicit times from each segment start.
    """
    L = p.levels
    if propagator is None:
        channels = collapse_channels_from_coherence(p) if noisy else ()
        propagator = get_propagator(noisy, channels)
    models = [_segment_model(p, segment) for segment in s.segments]
    measure = models[-1].basis

    coeffs = np.zeros(L**3, dtype=complex)
    if psi0 is None:
        coeffs[0] = 1.0
    else:
        if psi0.kind != "pure" or psi0.dim != L**3:
            raise InvalidDimensionError(f"psi0 must be a pure state of dimension {L**3}")
        coeffs = psi0.data
    state = propagator.native(models[0].basis.to_bare(coeffs))

    rows, t0 = [], 0.0
    for segment, model in zip(s.segments, models):
        for site in segment.state_preps:
            state = propagator.apply_unitary(model.pi_pulse(site), state)
        if offsets is not None and segment.name in offsets:
            local = np.asarray(offsets[segment.name], dtype=float)
        else:
            local = np.arange(0.0, segment.duration - 1e-9, sample_ns)
        if local.size and (local.min() < 0 or local.max() > segment.duration + 1e-9):
            raise ValueError(f"sample offsets fall outside segment {segment.name!r}")
        evolved = propagator.sample(model.H, state, list(local) + [segment.duration])
        for t, sampled in zip(local, evolved[:-1]):
            rows.append({"t_ns": t0 + float(t), "segment": segment.name,
                         **_qubit_populations(propagator.density(sampled), measure, L)})
        state = evolved[-1]
        t0 += segment.duration

    rows.append({"t_ns": t0, "segment": s.segments[-1].name,
                 **_qubit_populations(propagator.density(state), measure, L)})
    table = pd.DataFrame(rows, columns=["t_ns", "segment", *POPULATION_COLUMNS, "leakage"])
    kind = "pure" if state.ndim == 1 else "density"
    final = QuantumState(kind, state, measure.labels, validate=False)
    return ScheduleRun(table=table, final_state=final, measurement_basis=measure)


def fit_oscillation(t, values, frequency_guess: Optional[float] = None) -> FitResult:
    """
    Fit offset + A cos(2 pi f t + phase) and report f in MHz.

    The frequency seed (GHz) comes from ``frequency_guess`` or the largest
    non-DC peak of a zero-padded spectrum; offset, amplitude and phase at the
    seed come from linear least squares before the Levenberg-Marquardt refine.

    Raises:
        ValueError: fewer than 8 samples
        FitError: the refinement fails or returns non-finite parameters
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.size < MIN_FIT_SAMPLES:
        raise ValueError(f"need at least {MIN_FIT_SAMPLES} matching samples, got {t.size}")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
        raise FitError("non-finite samples", residuals=v - np.nanmean(v))

    offset = float(np.mean(v))
    if 0.5 * np.ptp(v) < FLAT_AMPLITUDE:
        rms = float(np.sqrt(np.mean((v - offset) ** 2)))
        return FitResult(frequency=0.0, amplitude=0.0, phase=0.0, offset=offset, residual_rms=rms, flag="flat")

    span = float(t.max() - t.min())
    if frequency_guess is None:
        dt = float(np.median(np.diff(np.sort(t))))
        n_pad = 8 * int(2 ** math.ceil(math.log2(t.size)))
        spectrum = np.abs(np.fft.rfft(v - offset, n=n_pad))
        freqs = np.fft.rfftfreq(n_pad, d=dt)
        f0 = float(freqs[1 + np.argmax(spectrum[1:])])
    else:
        f0 = abs(float(frequency_guess))

    design = np.column_stack([np.ones_like(t), np.cos(TWO_PI * f0 * t), np.sin(TWO_PI * f0 * t)])
    (c0, ca, cb), *_ = np.linalg.lstsq(design, v, rcond=None)
    x0 = [c0, math.hypot(ca, cb), f0, math.atan2(-cb, ca)]

    def residuals(x):
        return x[0] + x[1] * np.cos(TWO_PI * x[2] * t + x[3]) - v

    result = least_squares(residuals, x0, method="lm", xtol=1e-10, max_nfev=200 * (len(x0) + 1))
    if not result.success or not np.all(np.isfinite(result.x)):
        raise FitError(f"oscillation fit did not converge: {result.message}", residuals=result.fun)

    off, amp, freq, phase = (float(x) for x in result.x)
    if amp < 0:
        amp, phase = -amp, phase + math.pi
    if freq < 0:
        freq, phase = -freq, -phase
    phase = math.atan2(math.sin(phase), math.cos(phase))
    flag = "under_resolved" if freq * span < 0.5 else "ok"
    rms = float(np.sqrt(np.mean(result.fun**2)))
    return FitResult(frequency=freq * 1e3, amplitude=amp, phase=phase, offset=off, residual_rms=rms, flag=flag)


def _safe_fit(t, values, frequency_guess: Optional[float] = None) -> Optional[FitResult]:
    try:
        return fit_oscillation(t, values, frequency_guess)
    except FitError as e:
        logger.warning("Fit failed: %s", e)
        return None


def _exchange_schedule(
    p: CircuitParams, coupler_state: int, omega_c: float, omega1: float, duration: float, idle_wc: float
) -> PulseSchedule:
    preps: Tuple[Site, ...] = ("Q2", "C") if coupler_state == 1 else ("Q2",)
    idle_w1 = p.omega2 + 0.050
    return PulseSchedule(
        segments=(
            Segment(name=PREPARE, duration=10.0, omega1=idle_w1, omega_c=idle_wc, state_preps=preps),
            Segment(name=INTERACT, duration=duration, omega1=omega1, omega_c=omega_c),
            Segment(name=MEASURE, duration=10.0, omega1=idle_w1, omega_c=idle_wc),
        )
    )


def chevron_scan(
    p: CircuitParams,
    coupler_state: int,
    omegac_grid: Sequence[float],
    t_grid: Sequence[float],
    noisy: bool = False,
    max_workers: Optional[int] = None,
) -> ChevronData:
    """
    P(|01>) after preparing |01> (and the coupler state) versus coupler
    frequency and interaction time, with Q1 held at w2. Rows run in a thread pool.
    """
    if coupler_state not in (0, 1):
        raise ValueError(f"coupler state must be 0 or 1, got {coupler_state!r}")
    omegac_grid = np.asarray(omegac_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if omegac_grid.size == 0 or t_grid.size == 0:
        raise ValueError("chevron grids must be non-empty")
    if t_grid.min() < 0 or np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be non-negative and ascending")
    idle_wc = idle_coupler_frequency(p)
    duration = max(float(t_grid[-1]), 1e-3)
    offsets = {PREPARE: [], INTERACT: t_grid, MEASURE: []}

    def row(omega_c: float) -> np.ndarray:
        schedule = _exchange_schedule(p, coupler_state, omega_c, p.omega2, duration, idle_wc)
        run = run_schedule(schedule, p, noisy=noisy, offsets=offsets)
        return np.clip(run.segment(INTERACT)["p01"].to_numpy(), 0.0, 1.0)

    logger.info("Chevron scan: %d x %d points, coupler |%d>", omegac_grid.size, t_grid.size, coupler_state)
    with ThreadPoolExecutor(max_workers=_max_workers(max_workers)) as pool:
        population = np.array(list(pool.map(row, omegac_grid)))
    fitted = [_safe_fit(t_grid, values) if t_grid.size >= MIN_FIT_SAMPLES else None for values in population]
    return ChevronData(omegac_grid=omegac_grid, t_grid=t_grid, population=population, fitted=fitted)


def coupling_vs_detuning(
    p: CircuitParams,
    coupler_state: int,
    delta_grid: Sequence[float],
    window_ns: float = 1000.0,
    sample_ns: float = 1.0,
    max_workers: Optional[int] = None,
) -> pd.DataFrame:
    """
    Fitted |2g|/2pi from full simulations at dressed resonance beside both closed forms.

    Columns: delta_ghz, fitted_2g_mhz, formula3_2g_mhz, formula2_2g_mhz,
    coupler_state, eigen_2g_mhz, fit_flag.
    """
    p = p.without_decoherence()
    idle_wc = idle_coupler_frequency(p)
    t_grid = np.arange(0.0, window_ns + 1e-9, sample_ns)

    def point(delta: float) -> dict:
        omega_c = coupler_frequency_for_delta(p, delta)
        try:
            formula3 = abs(2.0 * g_eff_three_level(p, delta, coupler_state).value) * 1e3
            formula2 = abs(2.0 * g_eff_two_level(p, delta, coupler_state).value) * 1e3
        except ResonanceSingularityError:
            formula3 = formula2 = math.nan
        calibration = calibrate_interaction(p, omega_c, coupler_state)
        schedule = _exchange_schedule(p, coupler_state, omega_c, calibration.omega1, window_ns, idle_wc)
        run = run_schedule(schedule, p, offsets={PREPARE: [], INTERACT: t_grid, MEASURE: []})
        fit = _safe_fit(t_grid, run.segment(INTERACT)["p01"].to_numpy(), calibration.splitting_ghz)
        return {
            "delta_ghz": float(delta),
            "fitted_2g_mhz": fit.frequency if fit else math.nan,
            "formula3_2g_mhz": formula3,
            "formula2_2g_mhz": formula2,
            "coupler_state": coupler_state,
            "eigen_2g_mhz": calibration.splitting_ghz * 1e3,
            "fit_flag": fit.flag if fit else "failed",
        }

    logger.info("Coupling curve: %d detunings, coupler |%d>", len(delta_grid), coupler_state)
    with ThreadPoolExecutor(max_workers=_max_workers(max_workers)) as pool:
        rows = list(pool.map(point, [float(d) for d in delta_grid]))
    return pd.DataFrame(rows)


class GateChannel:
    """
    The transistor sequence as a two-qubit channel.

    Inputs are embedded in the idle dressed basis with the coupler in |0>
    (the open gate then pi-pulses it). Outputs are taken in the rotating
    frame of the idle dressed Hamiltonian, with the coupler traced out and
    only the qubit {0,1} block kept. The block is not renormalized, so its
    missing trace is the population that leaked out of it (see ``leakage``).
    """

    def __init__(self, p: CircuitParams, cfg: ScheduleConfig, noisy: bool = False,
                 propagator: Optional[Propagator] = None):
        self.levels = L = p.levels
        self.schedule = build_transistor_schedule(cfg.model_copy(update={"prepare": ()}), p)
        if propagator is None:
            channels = collapse_channels_from_coherence(p) if noisy else ()
            propagator = get_propagator(noisy, channels)
        self.propagator = propagator

        models = [_segment_model(p, segment) for segment in self.schedule.segments]
        total = propagator.unitary_map(np.eye(L**3, dtype=complex))
        for segment, model in zip(self.schedule.segments, models):
            for site in segment.state_preps:
                total = propagator.unitary_map(model.pi_pulse(site)) @ total
            total = propagator.segment_map(model.H, segment.duration) @ total
        self._map = total
        self._input_basis = models[0].basis
        self._output_basis = models[-1].basis
        self._frame = np.exp(1j * self._output_basis.energies * self.schedule.total_duration)
        self._qubit_idx = np.array([a * L**2 + b * L for a in (0, 1) for b in (0, 1)])
        self._reduced_idx = np.array([a * L + b for a in (0, 1) for b in (0, 1)])

    @property
    def duration(self) -> float:
        return self.schedule.total_duration

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (4, 4):
            raise InvalidDimensionError("gate channel acts on two-qubit (4x4) density matrices")
        L = self.levels
        embedded = np.zeros((L**3, L**3), dtype=complex)
        embedded[np.ix_(self._qubit_idx, self._qubit_idx)] = rho
        out = self.propagator.map_density(self._map, self._input_basis.to_bare(embedded))
        dressed = self._output_basis.to_dressed(out)
        dressed = self._frame[:, np.newaxis] * dressed * self._frame.conj()[np.newaxis, :]
        qubits = reduce_to_qubits(dressed, L)[np.ix_(self._reduced_idx, self._reduced_idx)]
        return 0.5 * (qubits + qubits.conj().T)

    def leakage(self, rho: np.ndarray) -> float:
        """Population that leaves the two-qubit subspace for input ``rho``."""
        return 1.0 - float(np.real(np.trace(self(rho))))


def gate_channel(p: CircuitParams, cfg: ScheduleConfig, noisy: bool = False) -> GateChannel:
    return GateChannel(p, cfg, noisy)


@dataclass
class TransistorRun:
    table: pd.DataFrame
    summary: dict


def transistor_run(
    p: CircuitParams, cfg: ScheduleConfig, noisy: bool = False, sample_ns: float = 0.5
) -> TransistorRun:
    """Run one gate setting and summarize transfer time, peak P(|10>) and the fitted 2g."""
    schedule = build_transistor_schedule(cfg, p)
    run = run_schedule(schedule, p, noisy=noisy, sample_ns=sample_ns)
    interact = run.segment(INTERACT)
    summary = {
        "coupler_state": cfg.coupler_state,
        "gate": "open" if cfg.coupler_state == 1 else "closed",
        "noisy": noisy,
        "interaction_ns": 0.0,
        "transfer_time_ns": None,
        "peak_p10": float(run.table["p10"].max()),
        "fitted_2g_mhz": None,
        "fit_transfer_time_ns": None,
        "fit_flag": None,
        "final_populations": {c: float(run.table[c].iloc[-1]) for c in POPULATION_COLUMNS},
    }
    if not interact.empty:
        start = schedule.start_of(INTERACT)
        segment = next(s for s in schedule.segments if s.name == INTERACT)
        peak = interact["p10"].idxmax()
        summary.update(
            interaction_ns=segment.duration,
            interaction_omega_c=segment.omega_c,
            interaction_omega1=segment.omega1,
            transfer_time_ns=float(interact.loc[peak, "t_ns"] - start),
            peak_p10=float(interact["p10"].max()),
        )
        if len(interact) >= MIN_FIT_SAMPLES:
            fit = _safe_fit(interact["t_ns"].to_numpy() - start, interact["p01"].to_numpy())
            if fit is not None:
                summary.update(
                    fitted_2g_mhz=fit.frequency,
                    fit_transfer_time_ns=500.0 / fit.frequency if fit.frequency > 0 else None,
                    fit_flag=fit.flag,
                )
    logger.info(
        "%s gate: transfer %.2f ns, peak p10 %.4f",
        summary["gate"],
        summary["transfer_time_ns"] or math.nan,
        summary["peak_p10"],
    )
    return TransistorRun(table=run.table, summary=summary)


def dephasing_sweep(
    p: CircuitParams,
    gammas: Sequence[float],
    duration: Optional[float] = None,
    sample_ns: float = 1.0,
    max_workers: Optional[int] = None,
) -> pd.DataFrame:
    """
    Transfer and blockade quality versus pure dephasing of the coupler.

    ``gammas`` are in GHz (the units of g); the coherence of the coupler
    decays as exp(-2 pi gamma t). Only coupler dephasing acts. Columns:
    gamma_ghz, peak_p10 (open gate), min_p01 (closed gate).
    """
    clean = p.without_decoherence()
    base = ScheduleConfig(coupler_state=1, calibrate=True)
    window = duration or 2.0 * build_transistor_schedule(base, clean).segments[1].duration
    schedules = {
        n: build_transistor_schedule(base.model_copy(update={"coupler_state": n, "interaction_ns": window}), clean)
        for n in (0, 1)
    }

    def point(gamma: float) -> dict:
        if gamma < 0:
            raise ValueError(f"dephasing rate must be non-negative, got {gamma}")
        propagator = LindbladPropagator([dephasing_channel(clean.levels, "C", TWO_PI * gamma)])
        open_run = run_schedule(schedules[1], clean, sample_ns=sample_ns, propagator=propagator)
        closed_run = run_schedule(schedules[0], clean, sample_ns=sample_ns, propagator=propagator)
        return {
            "gamma_ghz": float(gamma),
            "peak_p10": float(open_run.segment(INTERACT)["p10"].max()),
            "min_p01": float(closed_run.segment(INTERACT)["p01"].min()),
        }

    logger.info("Dephasing sweep: %d rates, window %.1f ns", len(gammas), window)
    with ThreadPoolExecutor(max_workers=_max_workers(max_workers)) as pool:
        rows = list(pool.map(point, [float(g) for g in gammas]))
    return pd.DataFrame(rows)
