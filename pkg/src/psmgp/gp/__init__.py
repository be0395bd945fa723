from .evolve import FitnessEvaluator, GPConfig, ScoringModel, evolve, holdout_rss, rss
from .model import format_model, parse_model, read_model, write_model
from .operators import (crossover, gen_full, gen_grow, init_population, mutate,
                        tournament_index, tournament_select)
from .tree import EPS, FEATURES, OPERATORS, ExpressionTree, protected_div

__all__ = [
    "EPS", "FEATURES", "OPERATORS", "ExpressionTree", "FitnessEvaluator", "GPConfig",
    "ScoringModel", "crossover", "evolve", "format_model", "gen_full", "gen_grow",
    "holdout_rss", "init_population", "mutate", "parse_model", "protected_div",
    "read_model", "rss", "tournament_index", "tournament_select", "write_model",
]
