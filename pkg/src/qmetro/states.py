"""States, gates, channels and Born-rule measurement for the polarisation
probe and the probe (x) path system.

Basis order is fixed everywhere: probe ``(H, V)``, path ``(0, 1)``, joint
``(H0, H1, V0, V1)``. Circular states follow
``|R> = (|H> - i|V>)/sqrt(2)`` and ``|L> = (|H> + i|V>)/sqrt(2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from qmetro.linalg import (
    HERMITIAN_TOL,
    adjoint,
    as_matrix,
    hermitian_eig,
    identity,
    is_hermitian,
    kron,
)

NORM_TOL = 1e-12
POSITIVITY_TOL = 1e-9
SQRT_HALF = np.sqrt(0.5)

H = np.array([1.0, 0.0], dtype=np.complex128)
V = np.array([0.0, 1.0], dtype=np.complex128)
D = SQRT_HALF * (H + V)
R = SQRT_HALF * (H - 1j * V)
L = SQRT_HALF * (H + 1j * V)
PATH0 = np.array([1.0, 0.0], dtype=np.complex128)
PATH1 = np.array([0.0, 1.0], dtype=np.complex128)

PAULI_Z = np.diag([1.0, -1.0]).astype(np.complex128)


class StateError(ValueError):
    pass


def ket(amplitudes) -> np.ndarray:
    psi = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
    if abs(np.vdot(psi, psi).real - 1.0) > NORM_TOL:
        raise StateError("state vector is not normalised")
    return psi


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    return np.outer(psi, psi.conj())


def density(psi) -> np.ndarray:
    return projector(ket(psi))


def check_density(rho, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Raise unless ``rho`` is Hermitian, unit-trace and positive semidefinite."""
    rho = as_matrix(rho)
    if not is_hermitian(rho, tol):
        raise StateError("density operator is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise StateError(f"density operator has trace {np.trace(rho).real:.3g}")
    if hermitian_eig(rho).eigenvalues[0] < -POSITIVITY_TOL:
        raise StateError("density operator has a negative eigenvalue")
    return rho


def purity(rho) -> float:
    rho = as_matrix(rho)
    return float(np.trace(rho @ rho).real)


def diag_state() -> np.ndarray:
    """The diagonal polarisation state (|H> + |V>)/sqrt(2)."""
    return D.copy()


def phase_unitary(phi: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * phi)])


def cnot_pol_controls_path() -> np.ndarray:
    """CNOT with polarisation as control: |H,b> -> |H,b>, |V,b> -> |V,1-b>."""
    u = np.zeros((4, 4), dtype=np.complex128)
    u[0, 0] = u[1, 1] = 1.0
    u[2, 3] = u[3, 2] = 1.0
    return u


def is_unitary(u, tol: float = HERMITIAN_TOL) -> bool:
    u = as_matrix(u)
    return bool(np.max(np.abs(adjoint(u) @ u - identity(u.shape[0]))) <= tol)


def apply_unitary(u, rho) -> np.ndarray:
    u, rho = as_matrix(u), as_matrix(rho)
    if u.shape != rho.shape:
        raise StateError(f"dimension mismatch: {u.shape[0]} vs {rho.shape[0]}")
    return u @ rho @ adjoint(u)


@dataclass(frozen=True)
class QuantumChannel:
    """A CPTP map given by its Kraus operators."""

    kraus: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(as_matrix(k) for k in self.kraus)
        if not ops:
            raise StateError("a channel needs at least one Kraus operator")
        if len({k.shape for k in ops}) != 1:
            raise StateError("Kraus operators have mixed dimensions")
        object.__setattr__(self, "kraus", ops)
        completeness = sum(adjoint(k) @ k for k in ops)
        if np.max(np.abs(completeness - identity(self.dim))) > HERMITIAN_TOL:
            raise StateError("Kraus operators are not trace preserving")

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    def __call__(self, rho) -> np.ndarray:
        return apply_channel(self, rho)


def amplitude_damping(eta: float) -> QuantumChannel:
    """Transfers a fraction ``eta`` of the V population to H."""
    if not 0.0 <= eta <= 1.0:
        raise StateError(f"damping rate must lie in [0, 1], got {eta}")
    k0 = np.diag([1.0, np.sqrt(1.0 - eta)]).astype(np.complex128)
    k1 = np.zeros((2, 2), dtype=np.complex128)
    k1[0, 1] = np.sqrt(eta)
    return QuantumChannel((k0, k1))


def visibility_dephasing(v: float) -> QuantumChannel:
    """Polarisation dephasing that scales the H-V coherences by ``v``."""
    if not 0.0 <= v <= 1.0:
        raise StateError(f"visibility must lie in [0, 1], got {v}")
    return QuantumChannel(
        (np.sqrt((1.0 + v) / 2.0) * identity(2), np.sqrt((1.0 - v) / 2.0) * PAULI_Z)
    )


def lift_to_probe(op):
    """Extend a probe operator or channel to the joint space, identity on the path."""
    if isinstance(op, QuantumChannel):
        if op.dim != 2:
            raise StateError(f"expected a qubit channel, got dimension {op.dim}")
        return QuantumChannel(tuple(kron(k, identity(2)) for k in op.kraus))
    m = as_matrix(op)
    if m.shape != (2, 2):
        raise StateError(f"expected a qubit operator, got dimension {m.shape[0]}")
    return kron(m, identity(2))


def apply_channel(ch: QuantumChannel, rho) -> np.ndarray:
    rho = as_matrix(rho)
    if rho.shape[0] != ch.dim:
        raise StateError(f"dimension mismatch: channel {ch.dim} vs state {rho.shape[0]}")
    return sum(k @ rho @ adjoint(k) for k in ch.kraus)


@dataclass(frozen=True)
class Povm:
    """Labelled positive operators summing to the identity."""

    labels: tuple[str, ...]
    operators: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(as_matrix(e) for e in self.operators)
        labels = tuple(self.labels)
        if not ops or len(ops) != len(labels):
            raise StateError("POVM needs one label per non-empty operator list")
        if len({e.shape for e in ops}) != 1:
            raise StateError("POVM elements have mixed dimensions")
        for label, e in zip(labels, ops):
            if not is_hermitian(e) or hermitian_eig(e).eigenvalues[0] < -POSITIVITY_TOL:
                raise StateError(f"POVM element {label!r} is not positive")
        if np.max(np.abs(sum(ops) - identity(ops[0].shape[0]))) > HERMITIAN_TOL:
            raise StateError("POVM elements do not sum to the identity")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "operators", ops)

    @classmethod
    def from_kets(cls, labelled: Sequence[tuple[str, np.ndarray]]) -> "Povm":
        return cls(tuple(lbl for lbl, _ in labelled), tuple(projector(k) for _, k in labelled))

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]


def born_probabilities(povm: Povm, rho) -> dict[str, float]:
    """Outcome probabilities ``Re tr(E rho)``; rounding-level negatives clamp to 0."""
    rho = as_matrix(rho)
    if rho.shape[0] != povm.dim:
        raise StateError(f"dimension mismatch: POVM {povm.dim} vs state {rho.shape[0]}")
    probs = {}
    for label, e in zip(povm.labels, povm.operators):
        p = float(np.real(np.trace(e @ rho)))
        if p < -POSITIVITY_TOL:
            raise StateError(f"negative probability {p:.3g} for outcome {label!r}")
        probs[label] = min(max(p, 0.0), 1.0)
    return probs


def hv_povm() -> Povm:
    return Povm.from_kets([("H", H), ("V", V)])


def circular_povm() -> Povm:
    return Povm.from_kets([("R", R), ("L", L)])
