"""
Two-qubit state and process tomography with readout-error correction.

Conventions:
    * Two-qubit operators use kron(Q1, Q2), so basis index = 2*q1 + q2.
    * Readout population vectors are ordered (p00, p10, p01, p11), i.e.
      index = q1 + 2*q2.
    * chi is expanded on unnormalized Paulis (II, IX, ..., ZZ) with
      E(rho) = sum_mn chi_mn P_m rho P_n, so Tr chi = 1 for trace-preserving maps.
"""
import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize

from app.config import get_settings
from app.errors import (
    ConventionError,
    IncompleteDataError,
    InvalidDimensionError,
    RankError,
    SingularMatrixError,
)
from app.schemas import TomographyRecord
from app.services.dynamics import QuantumState

logger = logging.getLogger(__name__)

PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
PAULI_LABELS: Tuple[str, ...] = tuple(a + b for a, b in itertools.product("IXYZ", repeat=2))
PAULI_2Q = np.array([np.kron(PAULI_1Q[label[0]], PAULI_1Q[label[1]]) for label in PAULI_LABELS])
BASES: Tuple[str, ...] = tuple(a + b for a, b in itertools.product("xyz", repeat=2))
QUBIT_LABELS = ("00", "01", "10", "11")

_S_DAG = np.diag([1.0, -1j])
_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0)
# rotations taking the measured axis onto z
_ROTATIONS = {"x": _HADAMARD, "y": _HADAMARD @ _S_DAG, "z": np.eye(2, dtype=complex)}
# kron index 2*q1 + q2 -> readout index q1 + 2*q2
_READOUT_ORDER = np.array([0, 2, 1, 3])

COND_WARN = 1e3


@dataclass(frozen=True)
class ReadoutMatrix:
    """
    Column-stochastic 4x4 map from true to measured populations.

    Raises:
        InvalidDimensionError: wrong shape
        ValueError: not column-stochastic
        SingularMatrixError: not invertible
    """

    matrix: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if M.shape != (4, 4):
            raise InvalidDimensionError(f"readout matrix must be 4x4, got {M.shape}")
        if np.any(M < -1e-12) or np.any(M > 1 + 1e-12):
            raise ValueError("readout matrix entries must lie in [0, 1]")
        if np.max(np.abs(M.sum(axis=0) - 1.0)) > 1e-9:
            raise ValueError("readout matrix columns must sum to 1")
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > 1e12:
            raise SingularMatrixError("readout matrix is singular")
        if cond > COND_WARN:
            logger.warning("Readout matrix is ill-conditioned (cond=%.2e)", cond)
        object.__setattr__(self, "matrix", M)

    @classmethod
    def identity(cls) -> "ReadoutMatrix":
        return cls(np.eye(4))

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)


@dataclass(frozen=True)
class ProcessMatrix:
    """16x16 chi matrix in the two-qubit Pauli basis."""

    chi: np.ndarray
    label: str = ""

    def __post_init__(self):
        chi = np.asarray(self.chi, dtype=complex)
        if chi.shape != (16, 16):
            raise InvalidDimensionError(f"chi must be 16x16, got {chi.shape}")
        object.__setattr__(self, "chi", chi)

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.chi)))

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return bool(np.max(np.abs(self.chi - self.chi.conj().T)) <= tol)

    def to_payload(self) -> dict:
        return {
            "label": self.label,
            "basis": list(PAULI_LABELS),
            "real": self.chi.real.tolist(),
            "imag": self.chi.imag.tolist(),
            "trace": self.trace,
        }


@dataclass(frozen=True)
class VirtualZResult:
    phases: Tuple[float, float]
    process: ProcessMatrix
    fidelity: float


@dataclass(frozen=True)
class ConditionalPhaseResult:
    phase: float
    z_phases: Tuple[float, float]
    fidelity: float

    def to_payload(self) -> dict:
        return {"phase_rad": self.phase, "z_phases": list(self.z_phases), "fidelity": self.fidelity}


@dataclass(frozen=True)
class BootstrapResult:
    mean: float
    std: float
    low: float
    high: float
    samples: np.ndarray

    def to_payload(self) -> dict:
        return {"mean": self.mean, "std": self.std, "low": self.low, "high": self.high,
                "resamples": int(self.samples.size)}


def iswap() -> np.ndarray:
    return np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex)


def pauli_coefficients(U: np.ndarray) -> np.ndarray:
    """u_m = Tr(P_m U) / 4, so that U = sum_m u_m P_m."""
    U = np.asarray(U, dtype=complex)
    if U.shape != (4, 4):
        raise InvalidDimensionError("expected a two-qubit operator")
    return np.einsum("mij,ji->m", PAULI_2Q, U) / 4.0


def ideal_chi(U: np.ndarray, label: str = "") -> ProcessMatrix:
    """chi of the unitary channel rho -> U rho U^dag."""
    u = pauli_coefficients(U)
    return ProcessMatrix(np.outer(u, u.conj()), label)


@lru_cache(maxsize=1)
def _chi_basis() -> np.ndarray:
    """Columns vec(K_mn) with K_mn = kron(P_m, conj(P_n)), the superoperator of rho -> P_m rho P_n."""
    return np.array(
        [np.kron(Pm, Pn.conj()).reshape(-1) for Pm in PAULI_2Q for Pn in PAULI_2Q]
    ).T


def project_to_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    k = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[k] / (k + 1.0)
    return np.maximum(v - theta, 0.0)


def project_to_physical(rho: np.ndarray) -> np.ndarray:
    """
    Closest (Frobenius) positive semidefinite matrix with unit trace.

    The eigenvalues are projected onto the simplex; eigenvectors are kept.
    """
    rho = np.asarray(rho, dtype=complex)
    rho = 0.5 * (rho + rho.conj().T)
    values, vectors = np.linalg.eigh(rho)
    values = project_to_simplex(values)
    return (vectors * values) @ vectors.conj().T


def prepare_input_states() -> List[QuantumState]:
    """
    The 16 product inputs, id = 4*i1 + i2 over single-qubit states
    (|0>, |1>, |+>, |+i>).
    """
    single = [
        np.array([1, 0], dtype=complex),
        np.array([0, 1], dtype=complex),
        np.array([1, 1], dtype=complex) / np.sqrt(2.0),
        np.array([1, 1j], dtype=complex) / np.sqrt(2.0),
    ]
    return [QuantumState.pure(np.kron(a, b), QUBIT_LABELS) for a in single for b in single]


def confusion_matrix(
    e1: Union[float, Tuple[float, float]], e2: Union[float, Tuple[float, float]]
) -> ReadoutMatrix:
    """
    Independent per-qubit assignment errors.

    Each error is either a symmetric flip probability or a pair
    (P(read 1 | 0), P(read 0 | 1)).
    """

    def single(e) -> np.ndarray:
        e01, e10 = (e, e) if np.isscalar(e) else e
        return np.array([[1.0 - e01, e10], [e01, 1.0 - e10]])

    # readout index q1 + 2*q2 puts Q1 on the fast axis
    return ReadoutMatrix(np.kron(single(e2), single(e1)))


def readout_apply(M: ReadoutMatrix, p_true) -> np.ndarray:
    p = np.asarray(p_true, dtype=float)
    if p.shape != (4,):
        raise InvalidDimensionError("population vector must have 4 entries")
    return M.matrix @ p


def readout_correct(M: ReadoutMatrix, p_measured, project: bool = True) -> np.ndarray:
    """p = M^-1 p', optionally moved to the nearest point of the simplex."""
    p = np.asarray(p_measured, dtype=float)
    if p.shape != (4,):
        raise InvalidDimensionError("population vector must have 4 entries")
    try:
        corrected = np.linalg.solve(M.matrix, p)
    except np.linalg.LinAlgError as e:
        raise SingularMatrixError(str(e)) from e
    return project_to_simplex(corrected) if project else corrected


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def calibrate_readout(confusion: ReadoutMatrix, shots: Optional[int] = None, seed=0) -> ReadoutMatrix:
    """
    Build M column by column from zz measurements of prepared |00>, |10>,
    |01>, |11> read out through ``confusion``.

    With ``shots`` each column is a sampled histogram, otherwise the exact
    measured populations.
    """
    rng = _rng(seed)
    columns = []
    for j in range(4):
        prepared = np.zeros((4, 4), dtype=complex)
        k = _READOUT_ORDER[j]
        prepared[k, k] = 1.0
        record = simulate_measurement(prepared, "zz", shots, confusion, seed=rng)
        columns.append(np.asarray(record.populations))
    return ReadoutMatrix(np.column_stack(columns))


def simulate_measurement(
    rho: np.ndarray,
    basis: str,
    shots: Optional[int],
    M: Optional[ReadoutMatrix] = None,
    seed=None,
    input_state_id: int = 0,
) -> TomographyRecord:
    """
    Measure Q1 along basis[0] and Q2 along basis[1].

    Outcomes are drawn from the readout-distorted Born distribution; with
    ``shots=None`` the exact distorted populations are recorded.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise InvalidDimensionError("expected a two-qubit density matrix")
    if len(basis) != 2 or any(axis not in _ROTATIONS for axis in basis):
        raise ValueError(f"unknown measurement basis {basis!r}")
    R = np.kron(_ROTATIONS[basis[0]], _ROTATIONS[basis[1]])
    born = np.real(np.diag(R @ rho @ R.conj().T))[_READOUT_ORDER]
    measured = (M or ReadoutMatrix.identity()).matrix @ np.clip(born, 0.0, None)
    measured = np.clip(measured, 0.0, None)
    measured = measured / measured.sum()
    if shots is None:
        return TomographyRecord(input_state_id=input_state_id, basis=basis, populations=measured.tolist())
    counts = _rng(seed).multinomial(shots, measured)
    return TomographyRecord(
        input_state_id=input_state_id,
        basis=basis,
        populations=(counts / shots).tolist(),
        counts=counts.tolist(),
        shots=shots,
    )


def _expectations(populations: Sequence[float]) -> Tuple[float, float, float]:
    """<A x I>, <I x B>, <A x B> from populations in readout order."""
    p = np.asarray(populations, dtype=float)
    s1 = np.array([1, -1, 1, -1])
    s2 = np.array([1, 1, -1, -1])
    return float(s1 @ p), float(s2 @ p), float((s1 * s2) @ p)


def state_tomography(records: Iterable[TomographyRecord]) -> np.ndarray:
    """
    Linear-inversion estimate rho = (1/4) sum_m <P_m> P_m, projected to a state.

    Raises:
        IncompleteDataError: one of the nine basis pairs is missing
    """
    by_basis: Dict[str, TomographyRecord] = {}
    for record in records:
        by_basis[record.basis] = record
    missing = [b for b in BASES if b not in by_basis]
    if missing:
        raise IncompleteDataError(f"missing measurement bases: {', '.join(missing)}")

    single: Dict[Tuple[int, str], List[float]] = {}
    expectation = {"II": 1.0}
    for basis in BASES:
        e1, e2, e12 = _expectations(by_basis[basis].populations)
        single.setdefault((0, basis[0].upper()), []).append(e1)
        single.setdefault((1, basis[1].upper()), []).append(e2)
        expectation[basis.upper()] = e12
    for (qubit, axis), values in single.items():
        label = axis + "I" if qubit == 0 else "I" + axis
        expectation[label] = float(np.mean(values))

    rho = sum(expectation[label] * PAULI_2Q[m] for m, label in enumerate(PAULI_LABELS)) / 4.0
    return project_to_physical(rho)


def reconstruct_process(
    inputs: Sequence[np.ndarray], outputs: Sequence[np.ndarray], label: str = ""
) -> ProcessMatrix:
    """
    chi from input/output density-matrix pairs by linear inversion.

    Raises:
        RankError: the inputs do not span the operator space
    """
    A = np.column_stack([np.asarray(r, dtype=complex).reshape(-1) for r in inputs])
    B = np.column_stack([np.asarray(r, dtype=complex).reshape(-1) for r in outputs])
    if A.shape != (16, 16) or B.shape != (16, 16):
        raise InvalidDimensionError("process tomography needs 16 two-qubit input/output pairs")
    rank = np.linalg.matrix_rank(A)
    if rank < 16:
        raise RankError(f"input states span only {rank} of 16 operator dimensions")
    S = B @ np.linalg.inv(A)
    chi = (_chi_basis().conj().T @ S.reshape(-1) / 16.0).reshape(16, 16)
    chi = project_to_physical(chi)
    return ProcessMatrix(chi, label)


def process_tomography(channel: Callable[[np.ndarray], np.ndarray], label: str = "") -> ProcessMatrix:
    """chi of ``channel`` from its exact action on the 16 product inputs."""
    inputs = [state.matrix() for state in prepare_input_states()]
    outputs = [np.asarray(channel(rho), dtype=complex) for rho in inputs]
    return reconstruct_process(inputs, outputs, label)


def simulate_process_records(
    channel: Callable[[np.ndarray], np.ndarray],
    shots: Optional[int],
    M: Optional[ReadoutMatrix] = None,
    seed: int = 0,
) -> List[TomographyRecord]:
    """Synthetic tomography data: 16 inputs x 9 bases, one derived seed per setting."""
    children = np.random.SeedSequence(seed).spawn(16 * len(BASES))
    records = []
    for i, state in enumerate(prepare_input_states()):
        rho_out = np.asarray(channel(state.matrix()), dtype=complex)
        for j, basis in enumerate(BASES):
            records.append(
                simulate_measurement(rho_out, basis, shots, M, seed=children[i * len(BASES) + j], input_state_id=i)
            )
    return records


def process_tomography_from_records(
    records: Iterable[TomographyRecord],
    M: Optional[ReadoutMatrix] = None,
    correct: bool = True,
    label: str = "",
) -> ProcessMatrix:
    """
    chi from measured records, optionally readout-corrected first.

    Raises:
        IncompleteDataError: an input state has no records
    """
    grouped: Dict[int, List[TomographyRecord]] = {}
    for record in records:
        if M is not None and correct:
            record = record.model_copy(
                update={"populations": readout_correct(M, record.populations).tolist(), "counts": None}
            )
        grouped.setdefault(record.input_state_id, []).append(record)
    missing = [i for i in range(16) if i not in grouped]
    if missing:
        raise IncompleteDataError(f"no records for input states {missing}")
    inputs = [state.matrix() for state in prepare_input_states()]
    outputs = [state_tomography(grouped[i]) for i in range(16)]
    return reconstruct_process(inputs, outputs, label)


def _check_convention(chi: ProcessMatrix) -> None:
    if abs(chi.trace - 1.0) > 1e-3:
        raise ConventionError(f"chi {chi.label!r} has trace {chi.trace:.6f}, expected 1")


def process_fidelity(chi_exp: ProcessMatrix, chi_ideal: ProcessMatrix) -> float:
    """
    F = Re Tr(chi_exp chi_ideal), clamped to [0, 1].

    Raises:
        ConventionError: either trace differs from 1 by more than 1e-3
    """
    _check_convention(chi_exp)
    _check_convention(chi_ideal)
    fidelity = float(np.real(np.trace(chi_exp.chi @ chi_ideal.chi)))
    clamped = min(max(fidelity, 0.0), 1.0)
    if abs(clamped - fidelity) > 1e-6:
        logger.warning("Process fidelity %.8f clamped to [0, 1]", fidelity)
    return clamped


def _rz(phi: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * phi)])


def z_frame_transform(phi1: float, phi2: float) -> np.ndarray:
    """T_mn = Tr(P_m V P_n) / 4 for V = Rz(phi1) x Rz(phi2) applied after the gate."""
    V = np.kron(_rz(phi1), _rz(phi2))
    return np.einsum("mij,jk,nki->mn", PAULI_2Q, V, PAULI_2Q) / 4.0


def optimize_virtual_z(chi: ProcessMatrix, chi_ideal: ProcessMatrix) -> VirtualZResult:
    """
    Post-gate single-qubit Z phases maximizing the fidelity.

    A conditional phase cannot be removed this way and stays in the result.
    """
    target = chi_ideal.chi

    def corrected(x) -> np.ndarray:
        T = z_frame_transform(x[0], x[1])
        return T @ chi.chi @ T.conj().T

    def loss(x) -> float:
        return -float(np.real(np.trace(corrected(x) @ target)))

    grid = np.linspace(-np.pi, np.pi, 12, endpoint=False)
    start = min(itertools.product(grid, grid), key=loss)
    result = minimize(loss, np.asarray(start), method="Nelder-Mead", options={"xatol": 1e-8, "fatol": 1e-12})
    phases = tuple(float(np.angle(np.exp(1j * x))) for x in result.x)
    process = ProcessMatrix(corrected(result.x), chi.label)
    return VirtualZResult(phases=phases, process=process, fidelity=process_fidelity(process, chi_ideal))


def cphase(phi: float) -> np.ndarray:
    return np.diag([1.0, 1.0, 1.0, np.exp(1j * phi)])


def fit_conditional_phase(chi: ProcessMatrix, U_ideal: np.ndarray) -> ConditionalPhaseResult:
    """
    Conditional phase phi of the |11> component together with post-gate Z
    phases, maximizing the fidelity to CPhase(phi) U_ideal.

    phi = 0 is on the starting grid, so the result is never below the
    virtual-Z fidelity against U_ideal.
    """
    U_ideal = np.asarray(U_ideal, dtype=complex)

    def corrected(x) -> np.ndarray:
        T = z_frame_transform(x[0], x[1])
        return T @ chi.chi @ T.conj().T

    def loss(x) -> float:
        target = ideal_chi(cphase(x[2]) @ U_ideal).chi
        return -float(np.real(np.trace(corrected(x) @ target)))

    grid = np.linspace(-np.pi, np.pi, 12, endpoint=False)
    start = min(itertools.product(grid, grid, grid), key=loss)
    result = minimize(loss, np.asarray(start), method="Nelder-Mead", options={"xatol": 1e-8, "fatol": 1e-12})
    phi1, phi2, phi = (float(np.angle(np.exp(1j * x))) for x in result.x)
    target = ideal_chi(cphase(phi) @ U_ideal, f"cphase({phi:.4f})")
    fidelity = process_fidelity(ProcessMatrix(corrected(result.x), chi.label), target)
    logger.debug("Conditional phase %.4f rad, F=%.6f", phi, fidelity)
    return ConditionalPhaseResult(phase=phi, z_phases=(phi1, phi2), fidelity=fidelity)


def bootstrap_fidelity(
    records: Sequence[TomographyRecord],
    chi_ideal: ProcessMatrix,
    M: Optional[ReadoutMatrix] = None,
    correct: bool = True,
    virtual_z: bool = True,
    resamples: Optional[int] = None,
    seed: int = 0,
    max_workers: Optional[int] = None,
) -> BootstrapResult:
    """
    Parametric bootstrap of the process fidelity over shot records.

    Every resample redraws each record's counts from its measured
    populations and repeats the full reconstruction.
    """
    if any(r.shots is None for r in records):
        raise ValueError("bootstrap needs shot-based records")
    settings = get_settings()
    resamples = resamples or settings.bootstrap_resamples
    children = np.random.SeedSequence(seed).spawn(resamples)

    def one(child) -> float:
        rng = np.random.default_rng(child)
        redrawn = []
        for r in records:
            counts = rng.multinomial(r.shots, project_to_simplex(r.populations))
            redrawn.append(r.model_copy(update={"populations": (counts / r.shots).tolist(),
                                                "counts": counts.tolist()}))
        chi = process_tomography_from_records(redrawn, M, correct)
        if virtual_z:
            return optimize_virtual_z(chi, chi_ideal).fidelity
        return process_fidelity(chi, chi_ideal)

    logger.info("Bootstrapping fidelity over %d resamples", resamples)
    with ThreadPoolExecutor(max_workers=max_workers or settings.max_workers) as pool:
        samples = np.array(list(pool.map(one, children)))
    return BootstrapResult(
        mean=float(samples.mean()),
        std=float(samples.std(ddof=1)) if samples.size > 1 else 0.0,
        low=float(np.percentile(samples, 2.5)),
        high=float(np.percentile(samples, 97.5)),
        samples=samples,
    )


def records_to_jsonl(records: Iterable[TomographyRecord]) -> str:
    return "".join(record.model_dump_json() + "\n" for record in records)


def records_from_jsonl(text: str) -> List[TomographyRecord]:
    return [TomographyRecord.model_validate(json.loads(line)) for line in text.splitlines() if line.strip()]
