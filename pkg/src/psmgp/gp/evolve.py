"""Generational GP loop minimising relative squared error."""

from __future__ import annotations

import logging
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import UndefinedFitnessError, ValidationError
from .operators import crossover, init_population, mutate, tournament_index
from .tree import FEATURES, ExpressionTree

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GPConfig:
    population_size: int = 300
    generations: int = 100
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    tournament_size: int = 5
    init_min_depth: int = 2
    init_max_depth: int = 6
    elitism: int = 1
    constant_range: tuple = (-1.0, 1.0)
    max_depth: int = 17
    mutation_max_depth: int = 2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "constant_range", tuple(float(c) for c in self.constant_range))
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1]")
        if self.crossover_rate + self.mutation_rate > 1.0 + 1e-12:
            raise ValidationError("crossover_rate + mutation_rate must not exceed 1")
        for name in ("population_size", "tournament_size"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.generations < 0:
            raise ValidationError("generations must be >= 0")
        if not 0 <= self.elitism <= self.population_size:
            raise ValidationError("elitism must be in [0, population_size]")
        if not 0 <= self.init_min_depth <= self.init_max_depth <= self.max_depth:
            raise ValidationError("need 0 <= init_min_depth <= init_max_depth <= max_depth")
        if self.mutation_max_depth < 0:
            raise ValidationError("mutation_max_depth must be >= 0")
        lo, hi = self.constant_range
        if len(self.constant_range) != 2 or not lo <= hi:
            raise ValidationError("constant_range must be (low, high) with low <= high")


@dataclass
class GenerationStats:
    generation: int
    best: float
    mean: float
    best_size: int


@dataclass
class ScoringModel:
    tree: ExpressionTree
    train_rss: float
    test_rss: Optional[float]
    config: GPConfig
    feature_schema: tuple = FEATURES
    history: list = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        if len(self.feature_schema) != 11:
            raise ValidationError("feature schema must list 11 features")

    def score(self, features) -> float:
        return self.tree(features)

    def predict(self, X) -> np.ndarray:
        return self.tree.evaluate(X)[0]


def rss(predictions: Sequence[float], targets: Sequence[float]) -> float:
    """Squared error of the predictions divided by that of the target mean."""
    yhat = np.asarray(predictions, dtype=float)
    y = np.asarray(targets, dtype=float)
    if yhat.shape != y.shape or y.size == 0:
        raise ValidationError("predictions and targets must be equal-length and non-empty")
    denom = float(np.sum((y.mean() - y) ** 2))
    if denom == 0.0:
        raise UndefinedFitnessError("targets are all identical; relative error is undefined")
    with np.errstate(all="ignore"):
        num = float(np.sum((yhat - y) ** 2))
    return num / denom


class FitnessEvaluator:
    """Caches RSS per tree. Trees that produced non-finite values score inf."""

    def __init__(self, X, y, threads: int = 1):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        if self.X.ndim != 2 or self.X.shape[1] != len(FEATURES):
            raise ValidationError(f"feature matrix must have shape (n, {len(FEATURES)})")
        if len(self.y) != len(self.X) or len(self.y) == 0:
            raise ValidationError("need one target per row and at least one row")
        self._mean = self.y.mean()
        self._denom = float(np.sum((self._mean - self.y) ** 2))
        if self._denom == 0.0 or not math.isfinite(self._denom):
            raise UndefinedFitnessError("targets are all identical; relative error is undefined")
        self.threads = threads
        self.cache: dict[tuple, float] = {}

    def one(self, tree: ExpressionTree) -> float:
        yhat, clean = tree.evaluate(self.X)
        if not clean:
            return math.inf
        with np.errstate(all="ignore"):
            num = float(np.sum((yhat - self.y) ** 2))
        value = num / self._denom
        return value if math.isfinite(value) else math.inf

    def __call__(self, trees: Sequence[ExpressionTree]) -> list[float]:
        todo = []
        seen = set()
        for t in trees:
            if t.nodes not in self.cache and t.nodes not in seen:
                seen.add(t.nodes)
                todo.append(t)
        if self.threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as ex:
                values = list(ex.map(self.one, todo))
        else:
            values = [self.one(t) for t in todo]
        for t, v in zip(todo, values):
            self.cache[t.nodes] = v
        if len(self.cache) > 200_000:
            keep = {t.nodes for t in trees}
            self.cache = {k: v for k, v in self.cache.items() if k in keep}
        return [self.cache[t.nodes] for t in trees]


def _targets(train) -> tuple[np.ndarray, np.ndarray]:
    rows = list(train)
    if not rows:
        raise ValidationError("training set is empty")
    if any(r.target is None for r in rows):
        raise ValidationError("every training row needs a target score")
    X = np.array([r.values for r in rows], dtype=float)
    y = np.array([r.target for r in rows], dtype=float)
    return X, y


def evolve(train, cfg: GPConfig = GPConfig(), rng: Optional[random.Random] = None,
           threads: int = 1, X=None, y=None) -> ScoringModel:
    """Evolve a scoring tree on ``train`` (FeatureVectors with targets).

    A prebuilt matrix ``X`` and target array ``y`` may be passed instead.
    The best-ever individual by training RSS is returned; ties keep the
    earlier one.
    """
    if X is None:
        X, y = _targets(train)
    if rng is None:
        rng = random.Random(cfg.seed)
    fitness_of = FitnessEvaluator(X, y, threads)

    pop = init_population(cfg, rng)
    fit = fitness_of(pop)
    best_i = min(range(len(pop)), key=fit.__getitem__)
    best_tree, best_fit = pop[best_i], fit[best_i]
    history = [_stats(0, fit, pop)]
    _log(history[-1])

    cx, mut = cfg.crossover_rate, cfg.mutation_rate
    for gen in range(1, cfg.generations + 1):
        order = sorted(range(len(pop)), key=fit.__getitem__)
        offspring = [pop[i] for i in order[:cfg.elitism]]
        while len(offspring) < cfg.population_size:
            r = rng.random()
            if r < cx:
                a = pop[tournament_index(fit, cfg.tournament_size, rng)]
                b = pop[tournament_index(fit, cfg.tournament_size, rng)]
                c1, c2 = crossover(a, b, rng, cfg.max_depth)
                offspring.append(c1)
                if len(offspring) < cfg.population_size:
                    offspring.append(c2)
            elif r < cx + mut:
                a = pop[tournament_index(fit, cfg.tournament_size, rng)]
                offspring.append(mutate(a, rng, cfg.max_depth, cfg.mutation_max_depth,
                                        cfg.constant_range))
            else:
                offspring.append(pop[tournament_index(fit, cfg.tournament_size, rng)])
        pop = offspring
        fit = fitness_of(pop)
        gi = min(range(len(pop)), key=fit.__getitem__)
        if fit[gi] < best_fit:
            best_tree, best_fit = pop[gi], fit[gi]
        history.append(_stats(gen, fit, pop))
        _log(history[-1])

    return ScoringModel(best_tree, best_fit, None, cfg, FEATURES, history)


def _stats(gen, fit, pop) -> GenerationStats:
    finite = [f for f in fit if math.isfinite(f)]
    best_i = min(range(len(fit)), key=fit.__getitem__)
    mean = sum(finite) / len(finite) if finite else math.inf
    return GenerationStats(gen, fit[best_i], mean, len(pop[best_i]))


def _log(s: GenerationStats):
    logger.info("gen %3d  best %.6g  mean %.6g  size %d", s.generation, s.best, s.mean, s.best_size)


def holdout_rss(model: ScoringModel, rows) -> float:
    X, y = _targets(rows)
    return rss(model.predict(X), y)
