"""Quantum and classical Fisher information, Cramer-Rao bounds and the
closed-form information of the single-probe and ancilla-assisted schemes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from qmetro.linalg import adjoint, hermitian_eig
from qmetro.states import Povm, born_probabilities

DEFAULT_STEP = 1e-5
SPECTRAL_CUTOFF = 1e-12
ZERO_PROB = 1e-12
ZERO_DERIVATIVE = 1e-9
NEGATIVE_FI_TOL = 1e-8


class FisherError(ArithmeticError):
    pass


class UnboundedVarianceError(FisherError):
    """Zero Fisher information: no unbiased estimator has finite variance."""


@dataclass(frozen=True)
class ProbeFamily:
    """A phase-parameterised family of density operators.

    ``evaluate`` must be a pure function of ``phi``; noise parameters are
    bound when the family is built.
    """

    evaluate: Callable[[float], np.ndarray]
    dim: int

    def __call__(self, phi: float) -> np.ndarray:
        return self.evaluate(phi)


def _check_step(step: float) -> None:
    if not step > 0:
        raise ValueError(f"finite-difference step must be positive, got {step}")


def _nonnegative(value: float) -> float:
    if not math.isfinite(value):
        raise FisherError(f"non-finite Fisher information {value}")
    if value < -NEGATIVE_FI_TOL:
        raise FisherError(f"negative Fisher information {value:.3g}")
    return max(value, 0.0)


def qfi_numeric(family: ProbeFamily, phi0: float, step: float = DEFAULT_STEP) -> float:
    """QFI from the spectral form of the symmetric logarithmic derivative.

    ``F = 2 sum_ij |<i|d rho|j>|^2 / (l_i + l_j)`` over eigenpairs of
    ``rho(phi0)`` with ``l_i + l_j`` above the cutoff; ``d rho`` is a central
    difference.
    """
    _check_step(step)
    rho = family(phi0)
    drho = (family(phi0 + step) - family(phi0 - step)) / (2.0 * step)
    vals, vecs = hermitian_eig(rho)
    drho_eig = adjoint(vecs) @ drho @ vecs
    denom = vals[:, None] + vals[None, :]
    mask = denom > SPECTRAL_CUTOFF
    terms = np.abs(drho_eig[mask]) ** 2 / denom[mask]
    return _nonnegative(2.0 * float(np.sum(terms)))


def cfi_from_probabilities(probs, derivs) -> float:
    """``sum_k (dp_k)^2 / p_k``, skipping outcomes that are impossible near phi0."""
    total = 0.0
    for p, dp in zip(probs, derivs):
        if p < ZERO_PROB:
            if abs(dp) < ZERO_DERIVATIVE:
                continue
            raise FisherError(
                f"outcome with probability {p:.3g} has derivative {dp:.3g}: "
                "Fisher information is singular"
            )
        total += dp * dp / p
    return _nonnegative(total)


def cfi(povm: Povm, family: ProbeFamily, phi0: float, step: float = DEFAULT_STEP) -> float:
    """Classical Fisher information of ``povm`` on ``family`` at ``phi0``."""
    _check_step(step)
    p0 = born_probabilities(povm, family(phi0))
    p_plus = born_probabilities(povm, family(phi0 + step))
    p_minus = born_probabilities(povm, family(phi0 - step))
    labels = povm.labels
    derivs = [(p_plus[k] - p_minus[k]) / (2.0 * step) for k in labels]
    return cfi_from_probabilities([p0[k] for k in labels], derivs)


def _check_eta(eta: float) -> None:
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"damping rate must lie in [0, 1], got {eta}")


def _check_visibility(v: float) -> None:
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {v}")


def single_probe_qfi_closed(eta: float) -> float:
    _check_eta(eta)
    return 1.0 - eta


def ancilla_qfi_closed(eta: float, v: float = 1.0) -> float:
    _check_eta(eta)
    _check_visibility(v)
    return 2.0 * v * v * (1.0 - eta) / (2.0 - eta)


def qcrb_variance(fisher: float, n: int) -> float:
    """Quantum Cramer-Rao variance bound ``1 / (n F)`` for ``n`` events."""
    if n < 1:
        raise ValueError(f"event count must be at least 1, got {n}")
    if fisher < 0:
        raise ValueError(f"Fisher information must be non-negative, got {fisher}")
    if fisher == 0:
        raise UnboundedVarianceError("zero Fisher information: variance is unbounded")
    return 1.0 / (n * fisher)


def crossover_noise(v: float) -> float:
    """Damping rate above which the ancilla scheme beats the single probe.

    Solves ``2 v^2 (1 - eta) / (2 - eta) = 1 - eta``; the root is clamped to
    ``[0, 1]``, so 1.0 means no advantage anywhere in range.
    """
    if not 0.0 < v <= 1.0:
        raise ValueError(f"visibility must lie in (0, 1], got {v}")
    return min(max(2.0 * (1.0 - v * v), 0.0), 1.0)
