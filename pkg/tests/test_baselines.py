from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from tvtune.baselines import (EARLY_TERMINATION_PENALTY, GaConfig, ga_cost, ga_optimize,
                              ga_tune, manual_w_df)
from tvtune.env import DriverProfile, EpisodeConfig, run_fixed


def test_manual_weights():
    w = manual_w_df()
    assert np.array_equal(w, [100.0] * 4)
    assert np.all((w >= 40) & (w <= 1000))


def test_manual_completes_at_reference_scenario():
    _, s = run_fixed(manual_w_df(), EpisodeConfig(initial_speed=100.0, mu=0.4))
    assert not s["terminated"] and s["steps"] == 30


def test_ga_cost_deterministic_and_nonnegative():
    sc = EpisodeConfig(initial_speed=95.0, mu=0.5)
    w = np.array([120.0, 340.0, 77.0, 900.0])
    a, b = ga_cost(w, sc), ga_cost(w, sc)
    assert a == b and a >= 0


def test_ga_cost_matches_error_integral():
    sc = EpisodeConfig(initial_speed=100.0, mu=0.4)
    _, s = run_fixed(manual_w_df(), sc)
    assert ga_cost(manual_w_df(), sc) == s["error_cost"]


def test_ga_cost_penalises_early_termination():
    sc = EpisodeConfig(initial_speed=80.0, mu=0.3, maneuver=DriverProfile.generalization())
    assert ga_cost(manual_w_df(), sc) >= EARLY_TERMINATION_PENALTY


def test_ga_cost_zero_when_nothing_happens():
    still = DriverProfile("sine", 0.0, 6.0, 1.0, (0.0, 15.0), (0.0, 0.0))
    assert ga_cost(manual_w_df(), EpisodeConfig(maneuver=still)) == 0.0


def test_ga_config_validation():
    with pytest.raises(ValueError):
        GaConfig(population_size=41)
    with pytest.raises(ValueError):
        GaConfig(mutation_rate=1.5)
    with pytest.raises(ValueError):
        GaConfig(crossover_rate=-0.1)


@pytest.mark.parametrize("centre", [500.0, 40.0])
def test_ga_finds_bowl_minimum(centre):
    res = ga_optimize(lambda g: float(np.sum((g - centre) ** 2)), GaConfig(seed=3))
    assert np.all(np.abs(res.best.genes - centre) <= 10)


def test_ga_elitism_and_bounds():
    rng_cost = np.random.default_rng(0).normal(size=4)
    res = ga_optimize(lambda g: float(np.sum(np.sin(g / 50 + rng_cost))),
                      GaConfig(generations=30, mutation_rate=0.9, mutation_scale=2.0, seed=1),
                      keep_populations=True)
    fb = res.best_per_generation
    assert all(b <= a for a, b in zip(fb, fb[1:]))
    for pop, fit in res.populations:
        assert pop.min() >= 40 and pop.max() <= 1000
    assert res.best.fitness == min(f.min() for _, f in res.populations)


def test_ga_selection_only_improves_population():
    res = ga_optimize(lambda g: float(np.sum((g - 300) ** 2)),
                      GaConfig(generations=15, crossover_rate=0.0, mutation_rate=0.0, seed=2),
                      keep_populations=True)
    for (p0, f0), (p1, f1) in zip(res.populations, res.populations[1:]):
        rows0 = {tuple(r) for r in p0}
        assert all(tuple(r) in rows0 for r in p1)      # no new genes appear
        assert f1.min() <= f0.min() and f1.max() <= f0.max()


def test_ga_parallel_matches_sequential():
    cost = lambda g: float(np.sum(np.abs(g - 610)))  # noqa: E731
    cfg = GaConfig(generations=5, seed=4)
    seq = ga_optimize(cost, cfg)
    with ThreadPoolExecutor(4) as ex:
        par = ga_optimize(cost, cfg, map_fn=ex.map)
    assert np.array_equal(seq.best.genes, par.best.genes)
    assert seq.best_per_generation == par.best_per_generation


def test_ga_tune_on_vehicle_small_budget():
    sc = EpisodeConfig(initial_speed=100.0, mu=0.5)
    res = ga_tune([sc], GaConfig(population_size=6, generations=2, seed=0))
    assert res.evaluations == 6 + 2 * 4
    assert res.best.fitness == pytest.approx(ga_cost(res.best.genes, sc))
    with pytest.raises(ValueError):
        ga_tune([], GaConfig())
