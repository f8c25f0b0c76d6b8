"""
Time evolution of the circuit: closed-system propagation and the Lindblad
master equation with relaxation and pure dephasing.

Density matrices are vectorized row-major, vec(A rho B) = kron(A, B.T) vec(rho).
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import InitVar, dataclass, field
from typing import Dict, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from app.errors import InvalidCoherenceError, InvalidDimensionError
from app.schemas import SITES, CircuitParams, Site
from app.services.circuit_model import (
    OperatorMatrix,
    annihilation_op,
    basis_labels,
    embed_op,
    number_op,
)

logger = logging.getLogger(__name__)

NORM_TOL = 1e-10
TRACE_TOL = 1e-9
EIG_TOL = 1e-9
RK_RTOL = 1e-9
RK_ATOL = 1e-10

ArrayLike = Union[np.ndarray, OperatorMatrix]


@dataclass(frozen=True)
class QuantumState:
    """
    Pure state (vector) or density matrix on a labelled basis.

    Construction validates the state unless ``validate=False``.
    """

    kind: Literal["pure", "density"]
    data: np.ndarray
    basis_labels: Tuple[str, ...] = ()
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool):
        data = np.asarray(self.data, dtype=complex)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "basis_labels", tuple(self.basis_labels))
        if self.kind == "pure":
            if data.ndim != 1:
                raise InvalidDimensionError("pure state must be a vector")
            if validate and abs(np.linalg.norm(data) - 1.0) > NORM_TOL:
                raise ValueError(f"state norm {np.linalg.norm(data):.12f} is not 1")
        elif self.kind == "density":
            if data.ndim != 2 or data.shape[0] != data.shape[1]:
                raise InvalidDimensionError("density matrix must be square")
            if validate:
                if np.max(np.abs(data - data.conj().T)) > TRACE_TOL:
                    raise ValueError("density matrix is not Hermitian")
                if abs(np.trace(data).real - 1.0) > TRACE_TOL:
                    raise ValueError(f"density matrix trace {np.trace(data).real:.12f} is not 1")
                if np.min(np.linalg.eigvalsh(0.5 * (data + data.conj().T))) < -EIG_TOL:
                    raise ValueError("density matrix has a negative eigenvalue")
        else:
            raise ValueError(f"unknown state kind {self.kind!r}")
        if self.basis_labels and len(self.basis_labels) != data.shape[0]:
            raise InvalidDimensionError("basis_labels do not match the state dimension")

    @classmethod
    def pure(cls, vector, labels: Sequence[str] = ()) -> "QuantumState":
        return cls("pure", np.asarray(vector, dtype=complex), tuple(labels))

    @classmethod
    def density(cls, matrix, labels: Sequence[str] = ()) -> "QuantumState":
        return cls("density", np.asarray(matrix, dtype=complex), tuple(labels))

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def to_density(self) -> "QuantumState":
        if self.kind == "density":
            return self
        return QuantumState("density", np.outer(self.data, self.data.conj()), self.basis_labels)

    def matrix(self) -> np.ndarray:
        return self.to_density().data


def basis_state(label: str, levels: int) -> QuantumState:
    """Product state |n1 n2 nc> given as a label such as "010"."""
    labels = basis_labels(levels, len(label))
    if label not in labels:
        raise InvalidDimensionError(f"label {label!r} not in a levels={levels} basis")
    vector = np.zeros(len(labels), dtype=complex)
    vector[labels.index(label)] = 1.0
    return QuantumState.pure(vector, labels)


@dataclass(frozen=True)
class CollapseChannel:
    """
    Lindblad collapse operator with a non-negative rate (1/ns).

    For ``kind="dephasing"`` the dissipator carries 2*rate, so the
    coherence between neighbouring levels decays as exp(-rate * t).
    """

    operator: np.ndarray
    rate: float
    kind: Literal["relaxation", "dephasing"] = "relaxation"
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "operator", np.asarray(self.operator, dtype=complex))
        if not self.rate >= 0:
            raise ValueError(f"collapse rate must be non-negative, got {self.rate}")

    @property
    def dissipator_rate(self) -> float:
        return 2.0 * self.rate if self.kind == "dephasing" else self.rate


def _site_rates(t1: Optional[float], t2: Optional[float], site: str) -> Tuple[float, float]:
    gamma1 = 0.0 if t1 is None or np.isinf(t1) else 1.0 / t1
    if t2 is None:
        return gamma1, 0.0
    if t1 is not None and t2 > 2.0 * t1:
        raise InvalidCoherenceError(f"{site}: T2={t2} ns exceeds 2*T1")
    gamma_phi = 0.0 if np.isinf(t2) else 1.0 / t2 - 0.5 * gamma1
    # T2 = 2 T1 cancels only up to rounding
    return gamma1, max(gamma_phi, 0.0)


def collapse_channels_from_coherence(p: CircuitParams) -> List[CollapseChannel]:
    """
    Relaxation (a, 1/T1) and pure dephasing (a^dag a, 1/T2 - 1/(2 T1)) per element.

    An unset or infinite T1 omits the relaxation channel.
    """
    L = p.levels
    a = annihilation_op(L).matrix
    n = number_op(L).matrix
    channels: List[CollapseChannel] = []
    for site in SITES:
        t1, t2 = p.coherence(site)
        gamma1, gamma_phi = _site_rates(t1, t2, site)
        if gamma1 > 0.0:
            channels.append(
                CollapseChannel(embed_op(a, site, L).matrix, gamma1, "relaxation", f"relaxation_{site}")
            )
        if t2 is not None:
            channels.append(
                CollapseChannel(embed_op(n, site, L).matrix, gamma_phi, "dephasing", f"dephasing_{site}")
            )
    logger.debug("Collapse channels: %s", ", ".join(f"{c.label}={c.rate:.3e}" for c in channels))
    return channels


def dephasing_channel(levels: int, site: Site, gamma: float) -> CollapseChannel:
    """Pure dephasing of one element at rate ``gamma`` (1/ns)."""
    return CollapseChannel(
        embed_op(number_op(levels), site, levels).matrix, gamma, "dephasing", f"dephasing_{site}"
    )


def liouvillian(H: ArrayLike, channels: Sequence[CollapseChannel] = ()) -> np.ndarray:
    """Row-major vectorized generator of the master equation."""
    H = np.asarray(H, dtype=complex)
    dim = H.shape[0]
    eye = np.eye(dim, dtype=complex)
    L = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for channel in channels:
        if channel.rate == 0.0:
            continue
        C = channel.operator
        if C.shape != H.shape:
            raise InvalidDimensionError(f"channel {channel.label} does not match H")
        CdC = C.conj().T @ C
        L += channel.dissipator_rate * (
            np.kron(C, C.conj()) - 0.5 * np.kron(CdC, eye) - 0.5 * np.kron(eye, CdC.T)
        )
    return L


def _as_times(t) -> Tuple[np.ndarray, bool]:
    times = np.atleast_1d(np.asarray(t, dtype=float))
    return times, np.ndim(t) == 0


def evolve_unitary(H: ArrayLike, psi0: QuantumState, t) -> Union[QuantumState, List[QuantumState]]:
    """
    exp(-i H t) psi0 by diagonalizing H once.

    Returns one state for a scalar ``t`` and a list for a time grid.
    """
    H = np.asarray(H, dtype=complex)
    if psi0.kind != "pure":
        raise ValueError("evolve_unitary needs a pure state")
    if H.shape[0] != psi0.dim:
        raise InvalidDimensionError(f"H is {H.shape[0]}-dimensional, state is {psi0.dim}")
    times, scalar = _as_times(t)
    energies, vectors = np.linalg.eigh(H)
    coeffs = vectors.conj().T @ psi0.data
    phases = np.exp(-1j * np.outer(times, energies))
    evolved = (phases * coeffs[np.newaxis, :]) @ vectors.T
    states = [QuantumState("pure", row, psi0.basis_labels, validate=False) for row in evolved]
    return states[0] if scalar else states


def evolve_lindblad(
    H: ArrayLike,
    rho0: QuantumState,
    channels: Sequence[CollapseChannel],
    t_grid: Sequence[float],
) -> List[QuantumState]:
    """
    Integrate the master equation from rho0 at t=0 and sample at ``t_grid``.

    Adaptive Runge-Kutta 4(5) with rtol 1e-9 and atol 1e-10.
    """
    if rho0.kind != "density":
        raise ValueError("evolve_lindblad needs a density matrix")
    for channel in channels:
        if channel.rate < 0:
            raise ValueError(f"negative rate on channel {channel.label}")
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("t_grid must be a non-empty 1-D sequence")
    if times[0] < 0 or np.any(np.diff(times) < 0):
        raise ValueError("t_grid must be non-negative and ascending")

    dim = rho0.dim
    generator = liouvillian(H, channels)
    y0 = rho0.data.reshape(-1)
    if times[-1] == 0.0:
        return [rho0 for _ in times]

    solution = solve_ivp(
        lambda _t, y: generator @ y,
        (0.0, float(times[-1])),
        y0,
        method="RK45",
        t_eval=times,
        rtol=RK_RTOL,
        atol=RK_ATOL,
    )
    if not solution.success:
        raise RuntimeError(f"master equation integration failed: {solution.message}")
    states = []
    for column in solution.y.T:
        rho = column.reshape(dim, dim)
        states.append(QuantumState("density", 0.5 * (rho + rho.conj().T), rho0.basis_labels, validate=False))
    drift = max(abs(np.trace(s.data).real - 1.0) for s in states)
    logger.debug("Lindblad integration: %d samples, trace drift %.2e", len(states), drift)
    return states


def populations(
    traj: Sequence[QuantumState],
    projectors: Union[Mapping[str, ArrayLike], Sequence[ArrayLike]],
    times: Optional[Sequence[float]] = None,
) -> pd.DataFrame:
    """Table of Tr(P rho) per state; one column per projector."""
    if not isinstance(projectors, Mapping):
        projectors = {f"p{k}": P for k, P in enumerate(projectors)}
    mats: Dict[str, np.ndarray] = {name: np.asarray(P, dtype=complex) for name, P in projectors.items()}
    rows = []
    for state in traj:
        if state.kind == "pure":
            row = {name: float(np.real(state.data.conj() @ P @ state.data)) for name, P in mats.items()}
        else:
            row = {name: float(np.real(np.trace(P @ state.data))) for name, P in mats.items()}
        rows.append(row)
    table = pd.DataFrame(rows, columns=list(mats))
    if times is not None:
        table.insert(0, "t_ns", np.asarray(times, dtype=float))
    return table


def reduce_to_qubits(rho: np.ndarray, levels: int) -> np.ndarray:
    """Trace out the coupler, leaving the (Q1, Q2) block of size levels^2."""
    rho = np.asarray(rho).reshape(levels, levels, levels, levels, levels, levels)
    return np.einsum("abkcdk->abcd", rho).reshape(levels**2, levels**2)


class Propagator(ABC):
    """Advances states through piecewise-constant Hamiltonians."""

    noisy: bool = False

    @abstractmethod
    def native(self, psi: np.ndarray) -> np.ndarray:
        """Convert a pure state vector to this propagator's representation."""

    @abstractmethod
    def segment_map(self, H: np.ndarray, duration: float) -> np.ndarray:
        """Evolution map over ``duration`` (unitary or superoperator)."""

    @abstractmethod
    def apply_map(self, m: np.ndarray, state: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def apply_unitary(self, U: np.ndarray, state: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def density(self, state: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def unitary_map(self, U: np.ndarray) -> np.ndarray:
        """An instantaneous unitary as a map composable with ``segment_map``."""

    @abstractmethod
    def map_density(self, m: np.ndarray, rho: np.ndarray) -> np.ndarray:
        """Apply a composed map to a density matrix."""

    def sample(self, H: np.ndarray, state: np.ndarray, offsets: Sequence[float]) -> List[np.ndarray]:
        """States at ascending time offsets from the current one."""
        cache: Dict[float, np.ndarray] = {}
        out, t_prev, current = [], 0.0, state
        for t in offsets:
            dt = float(t) - t_prev
            if dt < -1e-12:
                raise ValueError("sample offsets must be ascending")
            if dt > 1e-12:
                key = round(dt, 9)
                if key not in cache:
                    cache[key] = self.segment_map(H, dt)
                current = self.apply_map(cache[key], current)
            t_prev = float(t)
            out.append(current)
        return out


class UnitaryPropagator(Propagator):
    """Closed-system propagation by eigendecomposition."""

    def native(self, psi):
        return np.asarray(psi, dtype=complex)

    def segment_map(self, H, duration):
        energies, vectors = np.linalg.eigh(H)
        return (vectors * np.exp(-1j * energies * duration)) @ vectors.conj().T

    def apply_map(self, m, state):
        return m @ state

    def apply_unitary(self, U, state):
        return U @ state

    def density(self, state):
        return np.outer(state, state.conj())

    def unitary_map(self, U):
        return U

    def map_density(self, m, rho):
        return m @ rho @ m.conj().T

    def sample(self, H, state, offsets):
        energies, vectors = np.linalg.eigh(H)
        coeffs = vectors.conj().T @ state
        phases = np.exp(-1j * np.outer(np.asarray(offsets, dtype=float), energies))
        return list((phases * coeffs[np.newaxis, :]) @ vectors.T)


class LindbladPropagator(Propagator):
    """
    Open-system propagation with the exact superoperator exponential.

    Every segment is time-independent, so exp(L t) is the exact map; it
    agrees with ``evolve_lindblad`` to integrator tolerance.
    """

    noisy = True

    def __init__(self, channels: Sequence[CollapseChannel] = ()):
        self.channels = list(channels)

    def native(self, psi):
        psi = np.asarray(psi, dtype=complex)
        return np.outer(psi, psi.conj()) if psi.ndim == 1 else psi

    def segment_map(self, H, duration):
        return expm(liouvillian(H, self.channels) * duration)

    def apply_map(self, m, state):
        dim = state.shape[0]
        return (m @ state.reshape(-1)).reshape(dim, dim)

    def apply_unitary(self, U, state):
        return U @ state @ U.conj().T

    def density(self, state):
        return state

    def unitary_map(self, U):
        return np.kron(U, U.conj())

    def map_density(self, m, rho):
        return self.apply_map(m, rho)


def get_propagator(noisy: bool, channels: Sequence[CollapseChannel] = ()) -> Propagator:
    """
    Factory function to get the configured propagator.

    Returns:
        LindbladPropagator when ``noisy`` else UnitaryPropagator
    """
    if noisy:
        logger.debug("Using Lindblad propagator with %d channels", len(channels))
        return LindbladPropagator(channels)
    return UnitaryPropagator()
