"""The two estimation schemes, assembled from circuit primitives and in
closed form.

Single probe: ``|D>`` -> amplitude damping -> phase -> circular measurement.

Ancilla assisted: ``|D>|0>`` -> CNOT -> damping and phase on the probe ->
CNOT -> visibility dephasing -> circular analysis of branch 1 (path 0) and
H/V analysis of branch 2 (path 1).

Outcome labels follow the convention that "R" is the circular outcome whose
probability grows with ``sin(phi)``. With the circular kets defined in
:mod:`qmetro.states` that outcome is the projector onto ``|L>``, so the
circuit POVMs swap the two kets when attaching labels. Labels are physically
arbitrary; estimators and Fisher information do not depend on them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from qmetro.fisher import (
    ProbeFamily,
    ancilla_qfi_closed,
    cfi_from_probabilities,
    single_probe_qfi_closed,
)
from qmetro.states import (
    PATH0,
    PATH1,
    H,
    L,
    Povm,
    R,
    V,
    amplitude_damping,
    apply_channel,
    apply_unitary,
    born_probabilities,
    cnot_pol_controls_path,
    density,
    diag_state,
    lift_to_probe,
    phase_unitary,
    visibility_dephasing,
)


class Kind(str, enum.Enum):
    SINGLE = "single"
    ANCILLA = "ancilla"


SINGLE_LABELS = ("R", "L")
ANCILLA_LABELS = ("R1", "L1", "H2", "V2")


@dataclass(frozen=True)
class StrategyConfig:
    kind: Kind
    eta: float
    v: float = 1.0
    phi: float = math.pi

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"damping rate must lie in [0, 1], got {self.eta}")
        if not 0.0 <= self.v <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {self.v}")
        if not math.isfinite(self.phi):
            raise ValueError(f"phase must be finite, got {self.phi}")
        if kind is Kind.SINGLE:
            # the single-probe scheme has no interferometer
            object.__setattr__(self, "v", 1.0)

    @property
    def labels(self) -> tuple[str, ...]:
        return SINGLE_LABELS if self.kind is Kind.SINGLE else ANCILLA_LABELS

    @property
    def signal_amplitude(self) -> float:
        """Coefficient ``a`` in ``p_R - p_L = a sin(phi)``."""
        return self.v * math.sqrt(1.0 - self.eta)

    def fisher(self) -> float:
        if self.kind is Kind.SINGLE:
            return single_probe_qfi_closed(self.eta)
        return ancilla_qfi_closed(self.eta, self.v)

    def with_phi(self, phi: float) -> "StrategyConfig":
        return StrategyConfig(self.kind, self.eta, self.v, phi)


@dataclass(frozen=True)
class OutcomeDistribution:
    labels: tuple[str, ...]
    probs: tuple[float, ...]

    def __getitem__(self, label: str) -> float:
        return self.probs[self.labels.index(label)]

    def as_array(self) -> np.ndarray:
        return np.array(self.probs)


@lru_cache(maxsize=None)
def single_povm() -> Povm:
    return Povm.from_kets([("R", L), ("L", R)])


@lru_cache(maxsize=None)
def ancilla_povm() -> Povm:
    return Povm.from_kets(
        [
            ("R1", np.kron(L, PATH0)),
            ("L1", np.kron(R, PATH0)),
            ("H2", np.kron(H, PATH1)),
            ("V2", np.kron(V, PATH1)),
        ]
    )


def povm_for(kind) -> Povm:
    return single_povm() if Kind(kind) is Kind.SINGLE else ancilla_povm()


def single_probe_state(eta: float, phi: float) -> np.ndarray:
    rho = density(diag_state())
    rho = apply_channel(amplitude_damping(eta), rho)
    return apply_unitary(phase_unitary(phi), rho)


def ancilla_state(eta: float, v: float, phi: float) -> np.ndarray:
    cnot = cnot_pol_controls_path()
    rho = density(np.kron(diag_state(), PATH0))
    rho = apply_unitary(cnot, rho)
    rho = apply_channel(lift_to_probe(amplitude_damping(eta)), rho)
    rho = apply_unitary(lift_to_probe(phase_unitary(phi)), rho)
    rho = apply_unitary(cnot, rho)
    return apply_channel(lift_to_probe(visibility_dephasing(v)), rho)


def output_state(cfg: StrategyConfig) -> np.ndarray:
    """Pre-measurement density operator of the configured scheme."""
    if cfg.kind is Kind.SINGLE:
        return single_probe_state(cfg.eta, cfg.phi)
    return ancilla_state(cfg.eta, cfg.v, cfg.phi)


def circuit_distribution(cfg: StrategyConfig) -> OutcomeDistribution:
    probs = born_probabilities(povm_for(cfg.kind), output_state(cfg))
    return OutcomeDistribution(cfg.labels, tuple(probs[k] for k in cfg.labels))


def closed_form_distribution(cfg: StrategyConfig) -> OutcomeDistribution:
    signal = cfg.signal_amplitude * math.sin(cfg.phi)
    if cfg.kind is Kind.SINGLE:
        probs = (0.5 + 0.5 * signal, 0.5 - 0.5 * signal)
    else:
        base = (2.0 - cfg.eta) / 4.0
        probs = (base + 0.5 * signal, base - 0.5 * signal, cfg.eta / 2.0, 0.0)
    return OutcomeDistribution(cfg.labels, probs)


def closed_form_derivative(cfg: StrategyConfig) -> tuple[float, ...]:
    """Analytic d/dphi of :func:`closed_form_distribution`."""
    slope = cfg.signal_amplitude * math.cos(cfg.phi)
    if cfg.kind is Kind.SINGLE:
        return (0.5 * slope, -0.5 * slope)
    return (0.5 * slope, -0.5 * slope, 0.0, 0.0)


def cfi_closed_form(cfg: StrategyConfig) -> float:
    """Classical Fisher information of the scheme's measurement, analytically."""
    return cfi_from_probabilities(
        closed_form_distribution(cfg).probs, closed_form_derivative(cfg)
    )


def make_family(kind, eta: float, v: float = 1.0) -> ProbeFamily:
    cfg = StrategyConfig(kind, eta, v)
    if cfg.kind is Kind.SINGLE:
        return ProbeFamily(lambda phi: single_probe_state(cfg.eta, phi), dim=2)
    return ProbeFamily(lambda phi: ancilla_state(cfg.eta, cfg.v, phi), dim=4)
