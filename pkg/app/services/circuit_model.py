"""
Truncated multilevel operators and the qubit-coupler-qubit Hamiltonian.

Basis ordering is (Q1, Q2, C); the product state |n1 n2 nc> sits at index
n1*L^2 + n2*L + nc for truncation L. Hamiltonians are in rad/ns (2*pi*GHz).
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Tuple, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from app.errors import InvalidDimensionError
from app.schemas import SITES, CircuitParams, Site

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense complex operator with the product-state labels of its basis."""

    matrix: np.ndarray
    basis_labels: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise InvalidDimensionError(f"operator must be square, got shape {matrix.shape}")
        if self.basis_labels and len(self.basis_labels) != matrix.shape[0]:
            raise InvalidDimensionError("basis_labels do not match the operator dimension")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "basis_labels", tuple(self.basis_labels))

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dag(self) -> "OperatorMatrix":
        return OperatorMatrix(self.matrix.conj().T, self.basis_labels)

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        scale = max(np.linalg.norm(self.matrix), 1.0)
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T))) <= rtol * scale

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if self.dim != other.dim:
            raise InvalidDimensionError(f"cannot add dims {self.dim} and {other.dim}")
        return OperatorMatrix(self.matrix + other.matrix, self.basis_labels or other.basis_labels)


@dataclass(frozen=True)
class DressedBasis:
    """
    Eigenbasis of a Hamiltonian labelled by the bare states it continues.

    Column k of ``vectors`` is the eigenvector assigned to bare product
    state k, phase-fixed so that its overlap with that bare state is real
    and positive. ``energies[k]`` is the matching eigenvalue (rad/ns).
    """

    energies: np.ndarray
    vectors: np.ndarray
    labels: Tuple[str, ...]

    def to_dressed(self, op: np.ndarray) -> np.ndarray:
        """Express a bare-basis matrix (or vector) in the dressed basis."""
        op = np.asarray(op)
        if op.ndim == 1:
            return self.vectors.conj().T @ op
        return self.vectors.conj().T @ op @ self.vectors

    def to_bare(self, op: np.ndarray) -> np.ndarray:
        op = np.asarray(op)
        if op.ndim == 1:
            return self.vectors @ op
        return self.vectors @ op @ self.vectors.conj().T


def _site_index(site: Site) -> int:
    if site not in SITES:
        raise InvalidDimensionError(f"unknown site {site!r}, expected one of {SITES}")
    return SITES.index(site)


def basis_labels(levels: int, sites: int = 3) -> Tuple[str, ...]:
    return tuple("".join(str(n) for n in combo) for combo in itertools.product(range(levels), repeat=sites))


def annihilation_op(d: int) -> OperatorMatrix:
    """
    Truncated lowering operator with sqrt(k) at (k-1, k).

    Raises:
        InvalidDimensionError: if d < 2
    """
    if d < 2:
        raise InvalidDimensionError(f"truncation must be at least 2, got {d}")
    return OperatorMatrix(np.diag(np.sqrt(np.arange(1, d)), k=1).astype(complex), basis_labels(d, 1))


def number_op(levels: int) -> OperatorMatrix:
    a = annihilation_op(levels).matrix
    return OperatorMatrix(a.conj().T @ a, basis_labels(levels, 1))


def embed_op(op: Union[OperatorMatrix, np.ndarray], site: Site, levels: int) -> OperatorMatrix:
    """
    Kronecker-embed a single-element operator at ``site`` of the three-body space.

    Raises:
        InvalidDimensionError: if ``op`` is not levels x levels
    """
    matrix = np.asarray(op, dtype=complex)
    if matrix.shape != (levels, levels):
        raise InvalidDimensionError(f"expected a {levels}x{levels} operator, got {matrix.shape}")
    factors = [np.eye(levels, dtype=complex)] * len(SITES)
    factors[_site_index(site)] = matrix
    full = factors[0]
    for factor in factors[1:]:
        full = np.kron(full, factor)
    return OperatorMatrix(full, basis_labels(levels))


def excitation_number(levels: int) -> OperatorMatrix:
    """Total excitation number N = n1 + n2 + nc."""
    n = number_op(levels).matrix
    total = sum(embed_op(n, site, levels).matrix for site in SITES)
    return OperatorMatrix(total, basis_labels(levels))


def bare_hamiltonian(p: CircuitParams) -> OperatorMatrix:
    L = p.levels
    n = np.arange(L, dtype=float)
    H = np.zeros((L**3, L**3), dtype=complex)
    for site in SITES:
        # a^dag a^dag a a = n (n - 1)
        ladder = p.frequency(site) * n + 0.5 * p.anharmonicity(site) * n * (n - 1.0)
        H += embed_op(np.diag(TWO_PI * ladder), site, L).matrix
    return OperatorMatrix(H, basis_labels(L))


def interaction_hamiltonian(p: CircuitParams) -> OperatorMatrix:
    L = p.levels
    a = annihilation_op(L).matrix
    a1, a2, ac = (embed_op(a, site, L).matrix for site in SITES)
    V = (
        p.g1 * (a1.conj().T @ ac + ac.conj().T @ a1)
        + p.g2 * (a2.conj().T @ ac + ac.conj().T @ a2)
        + p.g12 * (a1.conj().T @ a2 + a2.conj().T @ a1)
    )
    return OperatorMatrix(TWO_PI * V, basis_labels(L))


def full_hamiltonian(p: CircuitParams) -> OperatorMatrix:
    H = bare_hamiltonian(p) + interaction_hamiltonian(p)
    logger.debug(
        "Built H (levels=%d): w1=%.4f w2=%.4f wc=%.4f GHz", p.levels, p.omega1, p.omega2, p.omega_c
    )
    return H


def projector(labels: Iterable[str], levels: int) -> OperatorMatrix:
    """Projector onto the span of the given product states, e.g. ``projector(["010"], 3)``."""
    all_labels = basis_labels(levels)
    P = np.zeros((len(all_labels), len(all_labels)), dtype=complex)
    for label in labels:
        try:
            k = all_labels.index(label)
        except ValueError:
            raise InvalidDimensionError(f"label {label!r} not in a levels={levels} basis") from None
        P[k, k] = 1.0
    return OperatorMatrix(P, all_labels)


def dressed_basis(H: Union[OperatorMatrix, np.ndarray], levels: int) -> DressedBasis:
    """
    Diagonalize H and match every eigenvector to a bare product state.

    The matching maximizes the total overlap |<bare|dressed>|^2, so strongly
    hybridized pairs still receive distinct labels.
    """
    matrix = np.asarray(H, dtype=complex)
    energies, vectors = np.linalg.eigh(matrix)
    overlap = np.abs(vectors) ** 2
    bare_idx, eig_idx = linear_sum_assignment(-overlap)
    order = eig_idx[np.argsort(bare_idx)]
    vectors = vectors[:, order]
    energies = energies[order]
    diag = np.diag(vectors).copy()
    phases = np.where(np.abs(diag) > 0, diag / np.maximum(np.abs(diag), 1e-300), 1.0)
    vectors = vectors / phases[np.newaxis, :]
    weakest = float(np.min(np.abs(np.diag(vectors)) ** 2))
    if weakest < 0.5:
        logger.debug("Dressed basis has a hybridized state (min bare overlap %.3f)", weakest)
    return DressedBasis(energies=energies, vectors=vectors, labels=basis_labels(levels))
