import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from qmetro.lab import (
    EstimationError,
    ExperimentConfig,
    asymptotic_onset,
    convergence_study,
    golden_section_maximize,
    inversion_estimator,
    mle_estimator,
    rng_for,
    run_experiment,
    sample_counts,
    sweep_noise,
)
from qmetro.strategies import OutcomeDistribution, StrategyConfig, closed_form_distribution

PI = math.pi
ANC = ("R1", "L1", "H2", "V2")


def anc(eta=0.5, v=1.0, phi=PI):
    return StrategyConfig("ancilla", eta, v, phi)


def test_rng_streams_are_reproducible():
    a = rng_for(7, 1, 2).integers(0, 2**63, size=5)
    b = rng_for(7, 1, 2).integers(0, 2**63, size=5)
    c = rng_for(7, 1, 3).integers(0, 2**63, size=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    with pytest.raises(ValueError):
        rng_for(-1)


def test_sample_counts_deterministic_distribution():
    dist = OutcomeDistribution(ANC, (1.0, 0.0, 0.0, 0.0))
    assert list(sample_counts(dist, 100, rng_for(1))) == [100, 0, 0, 0]


def test_sample_counts_sum():
    dist = closed_form_distribution(anc(0.3, 0.9, 2.0))
    for r in range(20):
        counts = sample_counts(dist, 2000, rng_for(5, 0, r))
        assert counts.sum() == 2000 and np.all(counts >= 0)


def test_sample_counts_concentration():
    dist = OutcomeDistribution(ANC, (0.4, 0.4, 0.2, 0.0))
    n = 10**6
    freqs = sample_counts(dist, n, rng_for(3)) / n
    for f, p in zip(freqs, dist.probs):
        sigma = math.sqrt(p * (1 - p) / n)
        assert abs(f - p) <= 5 * sigma


@pytest.mark.parametrize("seed", [1, 2, 3])
@pytest.mark.parametrize("cfg", [anc(0.4, 1.0, PI), anc(0.7, 0.9, PI + 0.3), StrategyConfig("single", 0.2, 1.0, 2.0)])
def test_sample_counts_goodness_of_fit(seed, cfg):
    dist = closed_form_distribution(cfg)
    p = np.array(dist.probs)
    n = 50
    draws = np.array([sample_counts(dist, n, rng_for(seed, 0, r)) for r in range(400)])
    # joint frequencies over all draws
    mask = p > 0
    observed = draws.sum(axis=0)[mask]
    assert stats.chisquare(observed, p[mask] * draws.sum()).pvalue > 1e-3
    # marginal of the first outcome against Binomial(n, p0), tails pooled
    k = draws[:, 0]
    pmf = stats.binom(n, p[0])
    edges = [0, *range(int(pmf.ppf(0.05)), int(pmf.ppf(0.95)) + 1), n + 1]
    obs = np.histogram(k, bins=edges)[0]
    exp = np.diff(pmf.cdf(np.array(edges) - 1)) * len(k)
    exp *= obs.sum() / exp.sum()
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_inversion_examples():
    cfg = anc(0.5, 1.0)
    exact = np.array(closed_form_distribution(cfg).probs) * 4000
    assert inversion_estimator(exact.round().astype(int), cfg) == PI
    assert inversion_estimator([750, 250, 0, 0], anc(0.0, 1.0)) == pytest.approx(PI - PI / 6, abs=1e-15)
    assert mle_estimator([750, 250, 0, 0], anc(0.0, 1.0)) == pytest.approx(PI - PI / 6, abs=1e-8)
    assert inversion_estimator([1000, 0, 0, 0], anc(0.5, 1.0)) == PI / 2
    assert inversion_estimator({"R": 10, "L": 30}, StrategyConfig("single", 0.0)) == pytest.approx(PI + math.asin(0.5))


@pytest.mark.parametrize("cfg", [anc(1.0, 1.0), anc(0.3, 0.0)])
def test_inversion_degenerate_signal(cfg):
    with pytest.raises(EstimationError):
        inversion_estimator([10, 10, 5, 0], cfg)


def test_estimators_need_events():
    with pytest.raises(ValueError):
        inversion_estimator([0, 0, 0, 0], anc())
    with pytest.raises(ValueError):
        mle_estimator([1, 2], anc())


def test_golden_section_maximize():
    assert golden_section_maximize(lambda x: -(x - 1.234) ** 2, 0.0, 3.0) == pytest.approx(1.234, abs=1e-9)
    # boundary maximum
    assert golden_section_maximize(lambda x: x, 0.0, 1.0) == pytest.approx(1.0, abs=1e-9)
    f = lambda x: -((x - 0.3) ** 2)
    assert golden_section_maximize(f, 0.0, 1.0, diff=lambda x, y: (y - x) * (x + y - 0.6)) == pytest.approx(0.3, abs=1e-9)


def test_mle_examples():
    cfg = anc(0.4, 0.9)
    exact = np.array(closed_form_distribution(cfg).probs) * 5000
    assert mle_estimator(exact.round().astype(int), cfg) == pytest.approx(PI, abs=1e-8)
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(1, 500))
        h2, v2 = int(rng.integers(0, 300)), int(rng.integers(0, 3))
        assert mle_estimator([n, n, h2, v2], cfg) == pytest.approx(PI, abs=1e-8)


def test_mle_and_inversion_agree_to_first_order():
    rng = np.random.default_rng(99)
    for r in range(200):
        kind = "single" if r % 4 == 0 else "ancilla"
        cfg = StrategyConfig(kind, rng.uniform(0, 0.9), rng.uniform(0.8, 1.0), PI + rng.uniform(-0.3, 0.3))
        counts = sample_counts(closed_form_distribution(cfg), 2000, rng_for(99, 0, r))
        assert abs(mle_estimator(counts, cfg) - inversion_estimator(counts, cfg)) < 3 / math.sqrt(counts.sum())


def test_experiment_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(anc(), repetitions=1)
    with pytest.raises(ValueError):
        ExperimentConfig(anc(), events_per_rep=0)
    with pytest.raises(ValueError):
        ExperimentConfig(anc(), estimator="bayes")
    with pytest.raises(ValueError):
        ExperimentConfig(anc(), seed=2**64)


def test_run_experiment_summary_fields():
    res = run_experiment(ExperimentConfig(anc(0.5, 1.0), 2000, 50, 42))
    assert len(res.estimates) == 50
    assert res.sd == math.sqrt(res.sample_variance)
    assert res.sample_variance == pytest.approx(np.var(res.estimates, ddof=1))
    assert res.mean_events == 2000
    assert res.normalized_variance == pytest.approx(res.sample_variance * 2000)
    assert res.qcrb_reference == pytest.approx(1 / (2000 * 2 / 3))


@pytest.mark.parametrize("estimator", ["inversion", "mle"])
def test_run_experiment_deterministic_across_workers(estimator):
    cfg = ExperimentConfig(anc(0.3, 0.95), 2000, 40, 1234, estimator)
    serial = run_experiment(cfg)
    assert np.array_equal(serial.estimates, run_experiment(cfg).estimates)
    parallel = run_experiment(cfg, workers=3)
    assert np.array_equal(serial.estimates, parallel.estimates)
    assert serial.sample_variance == parallel.sample_variance


def test_run_experiment_converges_to_crb():
    res = run_experiment(ExperimentConfig(anc(0.5, 1.0), 2000, 2000, 42))
    assert abs(res.normalized_variance / 1.5 - 1) < 0.05
    res = run_experiment(ExperimentConfig(StrategyConfig("single", 0.0), 2000, 2000, 42))
    assert abs(res.normalized_variance - 1) < 0.05


@pytest.mark.parametrize("phi", [PI - 0.3, PI, PI + 0.3])
@pytest.mark.parametrize("estimator", ["inversion", "mle"])
def test_estimator_consistency(phi, estimator):
    res = run_experiment(ExperimentConfig(anc(0.4, 0.95, phi), 10**6, 500, 8, estimator))
    assert abs(res.estimates.mean() - phi) < 5 * res.sd / math.sqrt(500)


def test_normalized_variance_not_below_qcrb():
    base = ExperimentConfig(anc(0.0, 0.95), 2000, 1000, 17)
    for eta in (0.0, 0.2, 0.5, 0.8):
        for kind in ("single", "ancilla"):
            cfg = replace(base, strategy=StrategyConfig(kind, eta, 0.95))
            res = run_experiment(cfg)
            inv_f = 1 / cfg.strategy.fisher()
            assert res.normalized_variance >= inv_f * (1 - 5 / math.sqrt(1000))


def test_sweep_theory_columns():
    rows = sweep_noise([0.0, 0.8], ExperimentConfig(anc(0.0, 1.0), 2000, 20, 42))
    assert list(rows[0]) == ["eta", "sd_single_theory", "sd_ancilla_theory", "sd_simulated", "sd_sim_stderr"]
    assert rows[0]["sd_single_theory"] == pytest.approx(math.sqrt(1 / 2000))
    assert rows[0]["sd_ancilla_theory"] == pytest.approx(math.sqrt(1 / 2000))
    assert rows[1]["sd_single_theory"] == pytest.approx(0.0500, abs=1e-12)
    assert rows[1]["sd_ancilla_theory"] == pytest.approx(math.sqrt(1 / (2000 / 3)), abs=1e-12)
    assert rows[1]["sd_ancilla_theory"] == pytest.approx(0.0387, abs=1e-4)


def test_sweep_includes_single_probe_simulation():
    rows = sweep_noise([0.3], ExperimentConfig(anc(0.0, 0.9), 2000, 30, 5), include_single_probe=True)
    assert rows[0]["sd_single_simulated"] > 0
    assert rows[0]["sd_single_simulated"] != rows[0]["sd_simulated"]


def test_sweep_deterministic():
    base = ExperimentConfig(anc(0.0, 0.95), 2000, 60, 77)
    assert sweep_noise([0.1, 0.5], base) == sweep_noise([0.1, 0.5], base, workers=2)


def test_convergence_study():
    cfg = ExperimentConfig(anc(0.5, 1.0), 2000, 2000, 42)
    rows = convergence_study(cfg, [10, 100, 1000, 2000, 10**4])
    assert [r["events"] for r in rows] == [10, 100, 1000, 2000, 10**4]
    at_2000 = rows[3]["normalized_variance"]
    assert abs(at_2000 / 1.5 - 1) < 0.10
    deviations = [abs(r["normalized_variance"] - 1.5) for r in rows]
    assert max(deviations) == deviations[0]
    assert asymptotic_onset(rows) is not None and asymptotic_onset(rows) <= 2000
    with pytest.raises(ValueError):
        convergence_study(cfg, [100, 10])


def test_convergence_large_n_mle_is_efficient():
    cfg = ExperimentConfig(anc(0.5, 1.0), 2000, 20000, 42, "mle")
    (row,) = convergence_study(cfg, [10**6])
    assert abs(row["relative_deviation"]) < 0.02


def test_asymptotic_onset():
    rows = [{"events": n, "relative_deviation": d} for n, d in [(10, 0.5), (100, 0.05), (1000, 0.2), (2000, 0.01)]]
    assert asymptotic_onset(rows) == 2000
    assert asymptotic_onset(rows[:2]) == 100
    assert asymptotic_onset(rows[:1]) is None
