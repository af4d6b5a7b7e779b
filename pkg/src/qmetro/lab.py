"""Monte Carlo emulation of the photon-counting experiment.

Every repetition draws its own generator from ``(seed, point, repetition,
stream)`` through :class:`numpy.random.SeedSequence`, so results do not
depend on how repetitions are distributed over worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from qmetro.fisher import qcrb_variance
from qmetro.strategies import (
    Kind,
    OutcomeDistribution,
    StrategyConfig,
    closed_form_distribution,
)

ESTIMATORS = ("inversion", "mle")
MLE_BRACKET = (0.5 * math.pi, 1.5 * math.pi)
MLE_TOL = 1e-9
PROB_FLOOR = 1e-12
SEED_MAX = 2**64 - 1

STREAM_PRIMARY = 0
STREAM_SINGLE_PROBE = 1

INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class EstimationError(ArithmeticError):
    """The configured scheme carries no phase signal to invert."""


def rng_for(seed: int, point: int = 0, repetition: int = 0, stream: int = 0) -> np.random.Generator:
    if not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, point, repetition, stream])))


def sample_counts(dist: OutcomeDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial counts drawn as a chain of conditional binomials."""
    if n < 1:
        raise ValueError(f"event count must be at least 1, got {n}")
    counts = np.zeros(len(dist.probs), dtype=np.int64)
    remaining = n
    mass_left = 1.0
    for k, p in enumerate(dist.probs[:-1]):
        if remaining == 0:
            break
        q = min(max(p / mass_left, 0.0), 1.0) if mass_left > 0 else 0.0
        counts[k] = rng.binomial(remaining, q)
        remaining -= int(counts[k])
        mass_left -= p
    counts[-1] += remaining
    return counts


def _as_counts(counts, cfg: StrategyConfig) -> np.ndarray:
    if isinstance(counts, Mapping):
        counts = [counts.get(label, 0) for label in cfg.labels]
    arr = np.asarray(counts, dtype=np.int64)
    if arr.shape != (len(cfg.labels),):
        raise ValueError(f"expected counts for outcomes {cfg.labels}, got shape {arr.shape}")
    if arr.sum() < 1:
        raise ValueError("at least one event is needed")
    return arr


def inversion_estimator(counts, cfg: StrategyConfig) -> float:
    """Invert ``p_R - p_L = a sin(phi)`` on the branch through ``phi = pi``."""
    n = _as_counts(counts, cfg)
    amplitude = cfg.signal_amplitude
    if amplitude <= 0.0:
        raise EstimationError(
            f"no phase signal at eta={cfg.eta}, v={cfg.v}: estimation impossible"
        )
    s = (n[0] - n[1]) / (n.sum() * amplitude)
    return math.pi - math.asin(min(max(s, -1.0), 1.0))


def golden_section_maximize(f, a: float, b: float, tol: float = MLE_TOL, diff=None) -> float:
    """Maximiser of a unimodal ``f`` on ``[a, b]``, to a bracket of width ``tol``.

    ``diff(x, y)``, when given, must return ``f(x) - f(y)`` and is used for
    every comparison instead of ``f``. Near a flat maximum the difference of
    two rounded function values stops resolving the ordering long before the
    bracket reaches ``tol``; a directly computed difference does not.
    """
    if diff is None:
        diff = lambda x, y: f(x) - f(y)
    c = b - INV_GOLDEN * (b - a)
    d = a + INV_GOLDEN * (b - a)
    while b - a > tol:
        if diff(c, d) >= 0:
            b, d = d, c
            c = b - INV_GOLDEN * (b - a)
        else:
            a, c = c, d
            d = a + INV_GOLDEN * (b - a)
    return 0.5 * (a + b)


def mle_estimator(counts, cfg: StrategyConfig) -> float:
    """Maximum-likelihood phase on ``[pi/2, 3pi/2]`` under the multinomial model."""
    n = _as_counts(counts, cfg)
    n_r, n_l = float(n[0]), float(n[1])
    base = 0.5 if cfg.kind is Kind.SINGLE else (2.0 - cfg.eta) / 4.0
    half = 0.5 * cfg.signal_amplitude
    # the branch-2 terms do not depend on phi

    def probs(phi: float) -> tuple[float, float]:
        shift = half * math.sin(phi)
        return max(base + shift, PROB_FLOOR), max(base - shift, PROB_FLOOR)

    def loglik(phi: float) -> float:
        p_r, p_l = probs(phi)
        return n_r * math.log(p_r) + n_l * math.log(p_l)

    def loglik_diff(x: float, y: float) -> float:
        px_r, px_l = probs(x)
        py_r, py_l = probs(y)
        if min(px_r, px_l, py_r, py_l) <= PROB_FLOOR:
            return loglik(x) - loglik(y)
        # sin x - sin y without cancellation
        step = half * 2.0 * math.cos(0.5 * (x + y)) * math.sin(0.5 * (x - y))
        return n_r * math.log1p(step / py_r) + n_l * math.log1p(-step / py_l)

    return golden_section_maximize(loglik, *MLE_BRACKET, diff=loglik_diff)


def estimate(counts, cfg: StrategyConfig, estimator: str = "inversion") -> float:
    if estimator == "inversion":
        return inversion_estimator(counts, cfg)
    if estimator == "mle":
        return mle_estimator(counts, cfg)
    raise ValueError(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")


@dataclass(frozen=True)
class ExperimentConfig:
    strategy: StrategyConfig
    events_per_rep: int = 2000
    repetitions: int = 50
    seed: int = 42
    estimator: str = "inversion"

    def __post_init__(self):
        if self.events_per_rep < 1:
            raise ValueError(f"events per repetition must be >= 1, got {self.events_per_rep}")
        if self.repetitions < 2:
            raise ValueError(f"a variance needs at least 2 repetitions, got {self.repetitions}")
        if not 0 <= self.seed <= SEED_MAX:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}; choose from {ESTIMATORS}")


@dataclass(frozen=True)
class ExperimentResult:
    estimates: np.ndarray = field(repr=False)
    sample_variance: float
    sd: float
    mean_events: float
    normalized_variance: float
    qcrb_reference: float

    @property
    def sd_stderr(self) -> float:
        """Large-sample standard error of :attr:`sd` for Gaussian estimates."""
        return self.sd / math.sqrt(2.0 * (len(self.estimates) - 1))


def _estimate_block(cfg: ExperimentConfig, point: int, stream: int, reps: range) -> tuple[list[float], int]:
    dist = closed_form_distribution(cfg.strategy)
    estimates = []
    events = 0
    for r in reps:
        counts = sample_counts(dist, cfg.events_per_rep, rng_for(cfg.seed, point, r, stream))
        events += int(counts.sum())
        estimates.append(estimate(counts, cfg.strategy, cfg.estimator))
    return estimates, events


def _chunks(n: int, parts: int) -> list[range]:
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [range(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


def run_experiment(
    cfg: ExperimentConfig,
    *,
    point: int = 0,
    stream: int = STREAM_PRIMARY,
    workers: int = 1,
) -> ExperimentResult:
    """Repeat the counting experiment and summarise the phase estimates.

    The variance is the unbiased sample variance; ``normalized_variance``
    multiplies it by the mean number of events per repetition so it can be
    compared with ``1/F`` directly.
    """
    blocks = _chunks(cfg.repetitions, max(1, workers))
    if workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(
                    _estimate_block,
                    [cfg] * len(blocks),
                    [point] * len(blocks),
                    [stream] * len(blocks),
                    blocks,
                )
            )
    else:
        parts = [_estimate_block(cfg, point, stream, b) for b in blocks]

    estimates = np.array([x for part, _ in parts for x in part])
    mean_events = sum(ev for _, ev in parts) / cfg.repetitions
    variance = float(np.var(estimates, ddof=1))
    fisher = cfg.strategy.fisher()
    qcrb = qcrb_variance(fisher, cfg.events_per_rep) if fisher > 0 else math.inf
    return ExperimentResult(
        estimates=estimates,
        sample_variance=variance,
        sd=math.sqrt(variance),
        mean_events=mean_events,
        normalized_variance=variance * mean_events,
        qcrb_reference=qcrb,
    )


def theory_sd(fisher: float, events: int) -> float:
    return math.sqrt(qcrb_variance(fisher, events)) if fisher > 0 else math.inf


SWEEP_COLUMNS = ("eta", "sd_single_theory", "sd_ancilla_theory", "sd_simulated", "sd_sim_stderr")
SWEEP_SINGLE_COLUMNS = ("sd_single_simulated", "sd_single_sim_stderr")


def sweep_noise(
    etas: Sequence[float],
    base: ExperimentConfig,
    include_single_probe: bool = False,
    *,
    workers: int = 1,
) -> list[dict]:
    """Phase SD against damping rate: both theory curves plus simulation.

    ``sd_simulated`` follows the scheme configured in ``base``. With
    ``include_single_probe`` the single-probe scheme is simulated too, on its
    own seed stream.
    """
    n = base.events_per_rep
    v = base.strategy.v
    rows = []
    for i, eta in enumerate(etas):
        cfg = replace(base, strategy=replace(base.strategy, eta=eta))
        res = run_experiment(cfg, point=i, workers=workers)
        row = {
            "eta": eta,
            "sd_single_theory": theory_sd(1.0 - eta, n),
            "sd_ancilla_theory": theory_sd(2.0 * v * v * (1.0 - eta) / (2.0 - eta), n),
            "sd_simulated": res.sd,
            "sd_sim_stderr": res.sd_stderr,
        }
        if include_single_probe:
            single = replace(cfg, strategy=StrategyConfig(Kind.SINGLE, eta, 1.0, cfg.strategy.phi))
            sres = run_experiment(single, point=i, stream=STREAM_SINGLE_PROBE, workers=workers)
            row["sd_single_simulated"] = sres.sd
            row["sd_single_sim_stderr"] = sres.sd_stderr
        rows.append(row)
    return rows


CONVERGENCE_COLUMNS = ("events", "normalized_variance", "inverse_fisher", "relative_deviation")


def convergence_study(cfg: ExperimentConfig, event_grid: Sequence[int], *, workers: int = 1) -> list[dict]:
    """Normalised variance against events per repetition."""
    grid = list(event_grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("event grid must be strictly ascending")
    inv_f = 1.0 / cfg.strategy.fisher()
    rows = []
    for i, n in enumerate(grid):
        res = run_experiment(replace(cfg, events_per_rep=int(n)), point=i, workers=workers)
        rows.append(
            {
                "events": int(n),
                "normalized_variance": res.normalized_variance,
                "inverse_fisher": inv_f,
                "relative_deviation": res.normalized_variance / inv_f - 1.0,
            }
        )
    return rows


def asymptotic_onset(rows: Sequence[dict], tol: float = 0.1) -> int | None:
    """Smallest grid N from which every normalised variance is within ``tol`` of 1/F."""
    onset = None
    for row in reversed(rows):
        if abs(row["relative_deviation"]) > tol:
            break
        onset = row["events"]
    return onset
