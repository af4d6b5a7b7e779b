"""Ancilla-assisted phase estimation under amplitude damping: exact qubit
simulation, Fisher-information analysis and Monte Carlo photon counting."""

from qmetro.fisher import (
    ancilla_qfi_closed,
    cfi,
    crossover_noise,
    qcrb_variance,
    qfi_numeric,
    single_probe_qfi_closed,
)
from qmetro.lab import (
    ExperimentConfig,
    ExperimentResult,
    convergence_study,
    run_experiment,
    sweep_noise,
)
from qmetro.strategies import (
    StrategyConfig,
    circuit_distribution,
    closed_form_distribution,
    make_family,
)

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "StrategyConfig",
    "ancilla_qfi_closed",
    "cfi",
    "circuit_distribution",
    "closed_form_distribution",
    "convergence_study",
    "crossover_noise",
    "make_family",
    "qcrb_variance",
    "qfi_numeric",
    "run_experiment",
    "single_probe_qfi_closed",
    "sweep_noise",
]
