"""
Closed-form effective Q1-Q2 couplings mediated by the coupler.

Sign convention: delta = w - wc with the coupler above the qubits, so
operating points have delta < 0. In the interaction segment the common
qubit frequency w is that of the fixed-frequency qubit Q2.
"""
import logging
import math
from typing import NamedTuple, Tuple

import numpy as np
from scipy.optimize import bisect, newton

from app.errors import (
    InvalidIntervalError,
    NoRootError,
    ResonanceSingularityError,
)
from app.schemas import CircuitParams, Detunings, EffectiveCoupling
from app.services.circuit_model import TWO_PI, OperatorMatrix

logger = logging.getLogger(__name__)

BISECT_XTOL = 1e-6
SECANT_TOL = 1e-9


class ExchangeCoefficients(NamedTuple):
    """Exchange amplitudes (GHz) of the restricted three-level effective Hamiltonian."""

    single: float  # |10> <-> |01>
    double: float  # |21> <-> |12>


def _check_state(n: int) -> None:
    if n not in (0, 1):
        raise ValueError(f"coupler state must be 0 or 1, got {n!r}")


def _nonzero(value: float, what: str) -> float:
    if value == 0.0:
        raise ResonanceSingularityError(f"{what} vanishes")
    return value


def g_eff_two_level(p: CircuitParams, delta: float, n: int) -> EffectiveCoupling:
    """g12 + (-1)^n g1 g2 / delta, the two-level coupler result."""
    _check_state(n)
    _nonzero(delta, "delta")
    value = p.g12 + (-1) ** n * p.g1 * p.g2 / delta
    return EffectiveCoupling(value=value, coupler_state=n, model="two-level", delta=delta)


def g_eff_three_level(p: CircuitParams, delta: float, n: int) -> EffectiveCoupling:
    """
    Effective coupling with the coupler's second excited level included.

    g12 + g1 g2 (2 / (delta - [n=1] alpha_c) - 1 / delta). For n=0 this is the
    two-level expression, evaluated by the same code path.

    Raises:
        ResonanceSingularityError: delta = 0, or delta = alpha_c with n = 1
    """
    _check_state(n)
    if n == 0:
        value = g_eff_two_level(p, delta, 0).value
    else:
        _nonzero(delta, "delta")
        _nonzero(delta - p.alpha_c, "delta - alpha_c")
        value = p.g12 + p.g1 * p.g2 * (2.0 / (delta - p.alpha_c) - 1.0 / delta)
    return EffectiveCoupling(value=value, coupler_state=n, model="three-level", delta=delta)


def effective_two_qubit_hamiltonian(p: CircuitParams, delta: float, n: int) -> OperatorMatrix:
    """Exchange Hamiltonian 2*pi*g [[0, 1], [1, 0]] on (|10>, |01>)."""
    g = g_eff_three_level(p, delta, n).value
    return OperatorMatrix(TWO_PI * g * np.array([[0.0, 1.0], [1.0, 0.0]]), ("10", "01"))


def effective_exchange_hamiltonians(p: CircuitParams, delta: float, n: int) -> ExchangeCoefficients:
    """
    Single- and double-excitation exchange amplitudes for coupler state n.

    Uses the mean qubit anharmonicity. Only ``single`` drives the dynamics
    of the single-excitation manifold.
    """
    _check_state(n)
    alpha = 0.5 * (p.alpha1 + p.alpha2)
    g1g2 = p.g1 * p.g2
    single = g_eff_three_level(p, delta, n).value
    if n == 0:
        double = 2.0 * (p.g12 + g1g2 / _nonzero(delta + alpha, "delta + alpha"))
    else:
        double = 2.0 * p.g12 - 2.0 * g1g2 * (
            1.0 / _nonzero(delta + alpha, "delta + alpha")
            - 2.0 / _nonzero(alpha - p.alpha_c, "alpha - alpha_c")
        )
    return ExchangeCoefficients(single=single, double=double)


def detunings(p: CircuitParams) -> Detunings:
    omega_tilde = p.omega1 + p.alpha1
    omega_c_tilde = p.omega_c + p.alpha_c
    return Detunings(
        delta=p.omega1 - p.omega_c,
        delta_tilde=p.omega1 - omega_c_tilde,
        delta_tilde_prime=omega_tilde - p.omega_c,
        delta_double_tilde=omega_tilde - omega_c_tilde,
    )


def interaction_delta(p: CircuitParams, omega_c: float) -> float:
    """Detuning of the coupler from the resonant qubit pair (w = w2)."""
    return p.omega2 - omega_c


def coupler_frequency_for_delta(p: CircuitParams, delta: float) -> float:
    return p.omega2 - delta


def _singularities(p: CircuitParams, n: int) -> Tuple[float, ...]:
    return (0.0,) if n == 0 else (0.0, p.alpha_c)


def off_point_bracket(p: CircuitParams, n: int) -> Tuple[float, float]:
    """Search interval on the physical (delta < 0) branch below every singularity."""
    _check_state(n)
    upper = min(_singularities(p, n)) - 0.05
    return (-5.0, upper)


def analytic_off_points(p: CircuitParams, n: int) -> Tuple[float, ...]:
    """
    Closed-form zeros of the three-level coupling, sorted ascending.

    n=0: -g1 g2 / g12. n=1: real roots of
    g12 d^2 + (g1 g2 - g12 alpha_c) d + g1 g2 alpha_c = 0.
    """
    _check_state(n)
    g1g2 = p.g1 * p.g2
    if n == 0:
        return () if p.g12 == 0 else (-g1g2 / p.g12,)
    coeffs = [p.g12, g1g2 - p.g12 * p.alpha_c, g1g2 * p.alpha_c]
    if not any(coeffs):
        return ()
    roots = np.roots(np.trim_zeros(coeffs, "f"))
    real = [float(r.real) for r in roots if abs(r.imag) < 1e-12]
    return tuple(sorted(r for r in real if all(abs(r - s) > 1e-12 for s in _singularities(p, n))))


def find_off_point(p: CircuitParams, n: int, interval: Tuple[float, float]) -> float:
    """
    Detuning where the three-level coupling vanishes.

    Bisection down to 1e-6 GHz, then a derivative-free secant polish to
    1e-9 GHz.

    Raises:
        InvalidIntervalError: malformed interval or a singularity inside it
        NoRootError: the coupling keeps its sign across the interval
    """
    _check_state(n)
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise InvalidIntervalError(f"interval must satisfy lo < hi, got ({lo}, {hi})")
    for s in _singularities(p, n):
        if lo <= s <= hi:
            raise InvalidIntervalError(f"interval ({lo}, {hi}) contains the singularity {s}")

    def g(delta: float) -> float:
        return g_eff_three_level(p, delta, n).value

    g_lo, g_hi = g(lo), g(hi)
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi
    if math.copysign(1.0, g_lo) == math.copysign(1.0, g_hi):
        raise NoRootError(f"coupling does not change sign on ({lo}, {hi}) for coupler state {n}")

    rough = bisect(g, lo, hi, xtol=BISECT_XTOL)
    try:
        root = float(newton(g, rough, x1=rough + BISECT_XTOL, tol=SECANT_TOL, maxiter=50))
    except (RuntimeError, ResonanceSingularityError):
        root = None
    if root is None or not lo <= root <= hi or abs(root - rough) > 10 * BISECT_XTOL:
        logger.warning("Secant polish left the bracket, refining by bisection")
        root = float(bisect(g, lo, hi, xtol=SECANT_TOL * 1e-3))
    logger.debug("Off point for coupler |%d>: delta=%.9f GHz", n, root)
    return root


def transfer_time(g: float) -> float:
    """Time (ns) for a full |10> -> |01> transfer at exchange coupling g (GHz)."""
    if g == 0.0:
        return math.inf
    return 1.0 / (4.0 * abs(g))
