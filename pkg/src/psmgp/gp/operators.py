"""Tree generation, selection and variation operators.

All randomness comes from a ``random.Random`` passed in by the caller.
"""

from __future__ import annotations

import random
from typing import Sequence

from .tree import FEATURES, OPERATORS, ExpressionTree

N_TERMINAL_KINDS = len(FEATURES) + 1  # features plus one ephemeral constant
TERMINAL_RATIO = N_TERMINAL_KINDS / (N_TERMINAL_KINDS + len(OPERATORS))


def random_terminal(rng: random.Random, constant_range=(-1.0, 1.0)):
    k = rng.randrange(N_TERMINAL_KINDS)
    if k == len(FEATURES):
        return rng.uniform(*constant_range)
    return FEATURES[k]


def _generate(rng, min_depth, height, full, constant_range) -> tuple:
    out = []
    stack = [0]
    while stack:
        d = stack.pop()
        if d == height or (not full and d >= min_depth and rng.random() < TERMINAL_RATIO):
            out.append(random_terminal(rng, constant_range))
        else:
            out.append(rng.choice(OPERATORS))
            stack.extend((d + 1, d + 1))
    return tuple(out)


def gen_full(rng, depth, constant_range=(-1.0, 1.0)) -> ExpressionTree:
    """Every leaf sits at exactly ``depth``."""
    return ExpressionTree(_generate(rng, depth, depth, True, constant_range))


def gen_grow(rng, min_depth, max_depth, constant_range=(-1.0, 1.0), height=None) -> ExpressionTree:
    """Leaves may stop anywhere from ``min_depth`` down to ``height``, which
    is drawn from ``[min_depth, max_depth]`` unless given."""
    if height is None:
        height = rng.randint(min_depth, max_depth)
    return ExpressionTree(_generate(rng, min_depth, height, False, constant_range))


def init_population(cfg, rng: random.Random) -> list[ExpressionTree]:
    """Ramped half-and-half.

    Individual ``i`` gets target depth ``min + i % span`` and is built full
    when ``i`` is even, grown otherwise, so every depth is split evenly
    between the two methods.
    """
    span = cfg.init_max_depth - cfg.init_min_depth + 1
    pop = []
    for i in range(cfg.population_size):
        depth = cfg.init_min_depth + i % span
        if i % 2 == 0:
            pop.append(gen_full(rng, depth, cfg.constant_range))
        else:
            pop.append(gen_grow(rng, cfg.init_min_depth, depth, cfg.constant_range, height=depth))
    return pop


def tournament_index(fitness: Sequence[float], k: int, rng: random.Random) -> int:
    """``k`` uniform draws with replacement; lowest fitness wins, the
    earliest draw wins ties."""
    n = len(fitness)
    best = rng.randrange(n)
    for _ in range(k - 1):
        j = rng.randrange(n)
        if fitness[j] < fitness[best]:
            best = j
    return best


def tournament_select(population: Sequence, fitness: Sequence[float], k: int,
                      rng: random.Random):
    return population[tournament_index(fitness, k, rng)]


def crossover(a: ExpressionTree, b: ExpressionTree, rng: random.Random, max_depth=17):
    """Swap uniformly chosen subtrees. A child deeper than ``max_depth`` is
    replaced by its own parent."""
    i = rng.randrange(len(a))
    j = rng.randrange(len(b))
    sub_a = a.nodes[i:a.subtree_end(i)]
    sub_b = b.nodes[j:b.subtree_end(j)]
    c1 = a.replace(i, sub_b)
    c2 = b.replace(j, sub_a)
    if c1.depth > max_depth:
        c1 = a
    if c2.depth > max_depth:
        c2 = b
    return c1, c2


def mutate(a: ExpressionTree, rng: random.Random, max_depth=17, subtree_max_depth=2,
           constant_range=(-1.0, 1.0)) -> ExpressionTree:
    """Replace a uniformly chosen subtree with a freshly grown one."""
    i = rng.randrange(len(a))
    sub = gen_grow(rng, 0, subtree_max_depth, constant_range)
    child = a.replace(i, sub)
    return a if child.depth > max_depth else child
