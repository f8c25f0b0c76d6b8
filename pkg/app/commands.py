"""
Experiment orchestration shared by the command line and the HTTP service.

Each function takes a validated ``RunConfig`` and returns tables or
JSON-ready payloads; writing files is left to the caller.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.errors import ConfigError
from app.schemas import RunConfig, ScheduleConfig
from app.services.experiment import (
    TransistorRun,
    chevron_scan,
    coupling_vs_detuning,
    dephasing_sweep,
    gate_channel,
    transistor_run,
)
from app.services.tomography import (
    ReadoutMatrix,
    bootstrap_fidelity,
    calibrate_readout,
    confusion_matrix,
    fit_conditional_phase,
    ideal_chi,
    iswap,
    optimize_virtual_z,
    prepare_input_states,
    process_fidelity,
    process_tomography,
    process_tomography_from_records,
    readout_apply,
    readout_correct,
    records_to_jsonl,
    simulate_process_records,
)

logger = logging.getLogger(__name__)

# Device values reported beside the simulated fidelities
MEASURED_FIDELITY = {"open": 0.9236, "closed": 0.9523}
ROUND_TRIP_POPULATIONS = [0.4, 0.3, 0.2, 0.1]
# Slack around the simulated band within which a measured value counts as reproduced
REFERENCE_MARGIN = 0.04


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_dotted(raw: Dict[str, Any], key: str, value: Any) -> None:
    parts = key.split(".")
    node = raw
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(key, f"{part!r} is not a section")
        node = child
    node[parts[-1]] = value


def load_run_config(
    path: Optional[Path] = None,
    overrides: Sequence[str] = (),
    seed: Optional[int] = None,
    noisy: Optional[bool] = None,
    out: Optional[Path] = None,
) -> RunConfig:
    """
    Build a RunConfig from defaults, a JSON file and overrides (in rising precedence).

    Raises:
        ConfigError: naming the offending key
    """
    raw: Dict[str, Any] = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(str(path), f"cannot read config: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError(str(path), "config must be a JSON object")

    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(item, "expected KEY=VALUE")
        _set_dotted(raw, key.strip(), _parse_value(value.strip()))
    if seed is not None:
        _set_dotted(raw, "experiment.seed", seed)
    if noisy is not None:
        _set_dotted(raw, "experiment.noisy", noisy)
    if out is not None:
        _set_dotted(raw, "output.dir", str(out))

    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as e:
        error = e.errors()[0]
        key = ".".join(str(part) for part in error["loc"]) or "<root>"
        raise ConfigError(key, error["msg"]) from e
    logger.debug("Run config: %s", config.model_dump_json(by_alias=True))
    return config


def chevron(config: RunConfig) -> Tuple[pd.DataFrame, dict]:
    """
    Chevron scan as a long table plus per-row fits
    """
    exp = config.experiment
    data = chevron_scan(
        config.circuit, exp.coupler_state, exp.omegac_grid.array(), exp.t_grid.array(), noisy=exp.noisy
    )
    fits = [
        {
            "omegac_ghz": float(wc),
            "frequency_mhz": fit.frequency if fit else None,
            "amplitude": fit.amplitude if fit else None,
            "flag": fit.flag if fit else "failed",
        }
        for wc, fit in zip(data.omegac_grid, data.fitted)
    ]
    return data.to_frame(), {"coupler_state": exp.coupler_state, "rows": fits}


def coupling_curve(config: RunConfig) -> pd.DataFrame:
    """
    Fitted and closed-form |2g|/2pi versus detuning for both coupler states
    """
    exp = config.experiment
    tables = [
        coupling_vs_detuning(
            config.circuit, n, exp.delta_grid.array(), window_ns=exp.curve_window_ns, sample_ns=exp.curve_sample_ns
        )
        for n in (0, 1)
    ]
    return pd.concat(tables, ignore_index=True)


def _schedule_config(config: RunConfig, coupler_state: int, interaction_ns: Optional[float]) -> ScheduleConfig:
    exp = config.experiment
    return ScheduleConfig(
        coupler_state=coupler_state,
        interaction_ns=interaction_ns,
        idle_ns=exp.idle_ns,
        calibrate=exp.calibrate,
    )


def transistor(config: RunConfig) -> Dict[str, TransistorRun]:
    """
    Open- and closed-gate runs over the transistor window
    """
    exp = config.experiment
    window = exp.interaction_ns if exp.interaction_ns is not None else exp.transistor_ns
    return {
        gate: transistor_run(config.circuit, _schedule_config(config, n, window), exp.noisy, exp.sample_ns)
        for gate, n in (("open", 1), ("closed", 0))
    }


def _readout_matrices(config: RunConfig, seed) -> Tuple[ReadoutMatrix, ReadoutMatrix]:
    """True confusion matrix and the one calibrated from (possibly sampled) preparations."""
    exp = config.experiment
    true = confusion_matrix(exp.readout_error_q1, exp.readout_error_q2)
    return true, calibrate_readout(true, exp.shots, seed)


def _reference_check(gate: str, result: dict) -> dict:
    """
    Compare the measured device fidelity with the simulated band widened by
    REFERENCE_MARGIN. The band is the bootstrap interval when there is one,
    otherwise the virtual-Z fidelity itself.
    """
    band = result["bootstrap"]
    low, high = (band["low"], band["high"]) if band else (result["fidelity_virtual_z"],) * 2
    reference = MEASURED_FIDELITY[gate]
    gap = max(low - REFERENCE_MARGIN - reference, reference - high - REFERENCE_MARGIN, 0.0)
    if gap > 0:
        logger.warning(
            "%s gate: measured fidelity %.4f lies %.4f outside the simulated band [%.4f, %.4f] +/- %.2f",
            gate, reference, gap, low, high, REFERENCE_MARGIN,
        )
    return {"band": [low, high], "margin": REFERENCE_MARGIN, "within": gap == 0.0, "gap": gap}


def qpt(config: RunConfig) -> Tuple[dict, Dict[str, str]]:
    """
    Process tomography of the open and/or closed gate.

    Returns the JSON payload and, for shot-based runs, the raw records of
    each gate as JSON lines.
    """
    exp = config.experiment
    gates = ["open", "closed"] if exp.gate == "both" else [exp.gate]
    seeds = np.random.SeedSequence(exp.seed).spawn(2 * len(gates) + 1)
    true_M, calibrated_M = _readout_matrices(config, seeds[-1])
    distorted = exp.shots is not None or exp.readout_error_q1 > 0 or exp.readout_error_q2 > 0

    payload: Dict[str, Any] = {"noisy": exp.noisy, "shots": exp.shots, "gates": {}}
    records_out: Dict[str, str] = {}
    for k, gate in enumerate(gates):
        n = 1 if gate == "open" else 0
        channel = gate_channel(config.circuit, _schedule_config(config, n, exp.interaction_ns), exp.noisy)
        U_ideal = iswap() if n == 1 else np.eye(4)
        ideal = ideal_chi(U_ideal, "iswap" if n == 1 else "identity")
        seed = int(seeds[2 * k].generate_state(1)[0])
        correction = calibrated_M if exp.correct_readout else None

        if distorted:
            records = simulate_process_records(channel, exp.shots, true_M, seed)
            chi = process_tomography_from_records(records, correction, exp.correct_readout, label=gate)
            if exp.shots is not None:
                records_out[gate] = records_to_jsonl(records)
        else:
            records = []
            chi = process_tomography(channel, label=gate)

        corrected = optimize_virtual_z(chi, ideal)
        leakage = [channel.leakage(state.matrix()) for state in prepare_input_states()]
        result = {
            "ideal": ideal.label,
            "duration_ns": channel.duration,
            "chi": chi.to_payload(),
            "fidelity": process_fidelity(chi, ideal),
            "fidelity_virtual_z": corrected.fidelity,
            "virtual_z_phases": list(corrected.phases),
            "conditional_phase": fit_conditional_phase(chi, U_ideal).to_payload(),
            "leakage": {"mean": float(np.mean(leakage)), "max": float(np.max(leakage))},
            "measured_reference": MEASURED_FIDELITY[gate],
            "bootstrap": None,
        }
        if exp.shots is not None:
            result["bootstrap"] = bootstrap_fidelity(
                records,
                ideal,
                correction,
                exp.correct_readout,
                resamples=exp.bootstrap_resamples,
                seed=int(seeds[2 * k + 1].generate_state(1)[0]),
            ).to_payload()
        result["reference_check"] = _reference_check(gate, result)
        logger.info(
            "QPT %s gate: F=%.4f, F(virtual Z)=%.4f, conditional phase %.4f rad",
            gate,
            result["fidelity"],
            result["fidelity_virtual_z"],
            result["conditional_phase"]["phase_rad"],
        )
        payload["gates"][gate] = result
    return payload, records_out


def readout_calibration(config: RunConfig) -> dict:
    """
    Readout transfer matrix, its inverse and a correction round trip
    """
    exp = config.experiment
    _, M = _readout_matrices(config, exp.seed)
    inverse = M.inverse()
    measured = readout_apply(M, ROUND_TRIP_POPULATIONS)
    recovered = readout_correct(M, measured, project=False)
    residual = float(np.max(np.abs(recovered - np.asarray(ROUND_TRIP_POPULATIONS))))
    return {
        "order": ["p00", "p10", "p01", "p11"],
        "error_rates": {"q1": exp.readout_error_q1, "q2": exp.readout_error_q2},
        "shots": exp.shots,
        "M": M.matrix.tolist(),
        "M_inv": inverse.tolist(),
        "condition_number": float(np.linalg.cond(M.matrix)),
        "round_trip": {
            "true": ROUND_TRIP_POPULATIONS,
            "measured": measured.tolist(),
            "corrected": recovered.tolist(),
            "residual": residual,
        },
    }


def dephasing(config: RunConfig) -> pd.DataFrame:
    """
    Transfer and blockade quality versus coupler dephasing
    """
    return dephasing_sweep(config.circuit, config.experiment.gamma_grid.array())
