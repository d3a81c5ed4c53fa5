"""Comparison tuners: an offline genetic algorithm over constant weights and the
fixed manual setting."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .controller import W_DF_MAX, W_DF_MIN, ControllerConfig
from .dynamics import TireParams, VehicleParams
from .env import EpisodeConfig, clamp_action, run_fixed

log = logging.getLogger(__name__)

EARLY_TERMINATION_PENALTY = 1e6


def manual_w_df() -> np.ndarray:
    return np.full(4, 100.0)


def ga_cost(w_df, scenario: EpisodeConfig, vehicle: VehicleParams = VehicleParams(),
            controller: ControllerConfig = ControllerConfig(),
            tire: TireParams | None = None) -> float:
    """Time integral of the weighted squared C.G. errors at agent ticks, plus a
    flat penalty when the episode ends before its time limit."""
    _, s = run_fixed(clamp_action(w_df), scenario, vehicle, controller, tire=tire)
    cost = s["error_cost"]
    if s["terminated"]:
        cost += EARLY_TERMINATION_PENALTY
    return float(cost)


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 40
    generations: int = 60
    crossover_rate: float = 0.8
    mutation_rate: float = 0.1
    mutation_scale: float = 0.1          # fraction of the gene range
    elitism: int = 2
    tournament_k: int = 3
    blend_alpha: float = 0.5
    low: float = W_DF_MIN
    high: float = W_DF_MAX
    n_genes: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2 or self.population_size % 2:
            raise ValueError("population_size must be even and at least 2")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 <= self.elitism <= self.population_size:
            raise ValueError("elitism out of range")
        if not 1 <= self.tournament_k <= self.population_size:
            raise ValueError("tournament_k out of range")
        if self.generations < 0 or self.high <= self.low:
            raise ValueError("bad generations or bounds")


@dataclass(frozen=True)
class Candidate:
    genes: np.ndarray
    fitness: float


@dataclass
class GaResult:
    best: Candidate
    best_per_generation: list = field(default_factory=list)
    best_genes_per_generation: list = field(default_factory=list)
    populations: list = field(default_factory=list)   # (genes, fitness) per generation
    evaluations: int = 0


def _tournament(rng, fitness, k):
    idx = rng.choice(len(fitness), size=k, replace=False)
    return idx[np.argmin(fitness[idx])]


def ga_optimize(cost, config: GaConfig = GaConfig(), map_fn=map,
                keep_populations: bool = False) -> GaResult:
    """Minimise ``cost(genes)`` over the box [low, high]^n_genes.

    ``map_fn`` evaluates a generation; pass an executor's ``map`` to run the
    fitness calls in parallel (results are identical to the sequential run).
    """
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    lo, hi, n = cfg.low, cfg.high, cfg.n_genes
    sigma = cfg.mutation_scale * (hi - lo)
    pop = rng.uniform(lo, hi, size=(cfg.population_size, n))
    fit = np.array(list(map_fn(cost, list(pop))), dtype=float)
    result = GaResult(Candidate(pop[0].copy(), np.inf))
    result.evaluations = len(pop)

    def record():
        i = int(np.argmin(fit))
        if fit[i] < result.best.fitness:
            result.best = Candidate(pop[i].copy(), float(fit[i]))
        result.best_per_generation.append(result.best.fitness)
        result.best_genes_per_generation.append(result.best.genes.copy())
        if keep_populations:
            result.populations.append((pop.copy(), fit.copy()))

    record()
    for gen in range(cfg.generations):
        order = np.argsort(fit, kind="stable")
        children = [pop[i].copy() for i in order[:cfg.elitism]]
        n_elite = len(children)
        while len(children) < cfg.population_size:
            p1 = pop[_tournament(rng, fit, cfg.tournament_k)]
            p2 = pop[_tournament(rng, fit, cfg.tournament_k)]
            if rng.random() < cfg.crossover_rate:
                a = cfg.blend_alpha
                gmin, gmax = np.minimum(p1, p2), np.maximum(p1, p2)
                span = gmax - gmin
                c1 = rng.uniform(gmin - a * span, gmax + a * span)
                c2 = rng.uniform(gmin - a * span, gmax + a * span)
            else:
                c1, c2 = p1.copy(), p2.copy()
            for c in (c1, c2):
                mask = rng.random(n) < cfg.mutation_rate
                c[mask] += rng.normal(0.0, sigma, size=int(mask.sum()))
                np.clip(c, lo, hi, out=c)
                if len(children) < cfg.population_size:
                    children.append(c)
        new = np.array(children)
        new_fit = np.empty(len(new))
        new_fit[:n_elite] = fit[order[:n_elite]]
        new_fit[n_elite:] = list(map_fn(cost, list(new[n_elite:])))
        result.evaluations += len(new) - n_elite
        pop, fit = new, new_fit
        record()
        log.debug("generation %d best %.6g", gen, result.best.fitness)
    return result


def ga_tune(scenarios, config: GaConfig = GaConfig(), vehicle: VehicleParams = VehicleParams(),
            controller: ControllerConfig = ControllerConfig(), map_fn=map,
            tire: TireParams | None = None) -> GaResult:
    """Tune one constant weight vector; fitness is the mean cost over ``scenarios``."""
    scenarios = list(scenarios)
    if not scenarios:
        raise ValueError("ga_tune needs at least one scenario")

    def cost(genes):
        return float(np.mean([ga_cost(genes, s, vehicle, controller, tire) for s in scenarios]))

    return ga_optimize(cost, config, map_fn)


__all__ = ["Candidate", "GaConfig", "GaResult", "EARLY_TERMINATION_PENALTY",
           "ga_cost", "ga_optimize", "ga_tune", "manual_w_df"]
