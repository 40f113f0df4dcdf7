"""GP hyper-heuristic: half-and-half initialization, tournament selection,
single-point crossover, uniform mutation, and mini-batch rotation training."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .model import EnvironmentRealization, Instance
from .policy import (
    CONSTANT,
    FUNCTIONS,
    TERMINALS,
    Node,
    TreePolicy,
    const,
    depth,
    iter_nodes,
    replace,
    serialize,
    size,
    subtree,
)
from .simulator import mean_profit

FUNCTION_NAMES = tuple(FUNCTIONS)
MAX_RETRIES = 10

Pair = tuple[Instance, EnvironmentRealization]


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class EvolutionConfig:
    population_size: int = 20
    generations: int = 60
    crossover_prob: float = 0.85
    mutation_prob: float = 0.15
    tournament_size: int = 4
    init_min_depth: int = 2
    init_max_depth: int = 6
    mutation_subtree_min_depth: int = 1
    mutation_subtree_max_depth: int = 4
    overall_max_depth: int = 8
    batches: int = 20
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("crossover_prob", "mutation_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1]")
        if self.init_max_depth < 1 or self.mutation_subtree_max_depth < 1 or self.overall_max_depth < 1:
            raise ConfigurationError("depths must be >= 1")
        if not 0 <= self.init_min_depth <= self.init_max_depth <= self.overall_max_depth:
            raise ConfigurationError("need init_min_depth <= init_max_depth <= overall_max_depth")
        if not 0 <= self.mutation_subtree_min_depth <= self.mutation_subtree_max_depth:
            raise ConfigurationError("bad mutation subtree depth range")
        if self.tournament_size < 1 or self.population_size < self.tournament_size:
            raise ConfigurationError("population_size must be >= tournament_size >= 1")
        if self.batches < 1 or self.generations < 0:
            raise ConfigurationError("batches must be >= 1 and generations >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Individual:
    tree: Node
    fitness: float = math.nan
    batch_id: int | None = None


# ------------------------------------------------------------- tree growth


def random_terminal(rng: np.random.Generator) -> Node:
    name = TERMINALS[rng.integers(len(TERMINALS))]
    if name == CONSTANT:
        return const(rng.uniform(-1.0, 1.0))
    return Node(name)


def generate_tree(rng: np.random.Generator, max_depth: int, method: str) -> Node:
    """Full: functions down to ``max_depth``. Grow: free choice below a function root."""
    n_prims = len(FUNCTION_NAMES) + len(TERMINALS)

    def build(level: int) -> Node:
        if level >= max_depth:
            return random_terminal(rng)
        if method == "grow" and level > 0 and rng.integers(n_prims) >= len(FUNCTION_NAMES):
            return random_terminal(rng)
        op = FUNCTION_NAMES[rng.integers(len(FUNCTION_NAMES))]
        return Node(op, tuple(build(level + 1) for _ in range(FUNCTIONS[op][0])))

    if method not in ("full", "grow"):
        raise ValueError(f"unknown method {method!r}")
    return build(0)


def half_and_half(rng: np.random.Generator, min_depth: int, max_depth: int) -> tuple[Node, str]:
    method = "grow" if rng.random() < 0.5 else "full"
    d = int(rng.integers(min_depth, max_depth + 1))
    return generate_tree(rng, d, method), method


def init_population(config: EvolutionConfig, rng: np.random.Generator) -> list[Individual]:
    return [
        Individual(half_and_half(rng, config.init_min_depth, config.init_max_depth)[0])
        for _ in range(config.population_size)
    ]


# --------------------------------------------------------------- operators


def tournament_select(population: Sequence[Individual], tournament_size: int, rng: np.random.Generator) -> Individual:
    picks = rng.choice(len(population), size=tournament_size, replace=False)
    fit = np.array([population[i].fitness for i in picks])
    best = np.flatnonzero(fit == fit.max())
    return population[picks[best[rng.integers(len(best))]]]


def crossover_single_point(
    a: Node, b: Node, rng: np.random.Generator, max_depth: int = 8
) -> tuple[Node, Node]:
    inner_a = [(p, lvl) for p, n, lvl in iter_nodes(a) if not n.is_leaf]
    inner_b = [(p, lvl) for p, n, lvl in iter_nodes(b) if not n.is_leaf]
    if not inner_a or not inner_b:
        return a, b
    for _ in range(MAX_RETRIES):
        pa, la = inner_a[rng.integers(len(inner_a))]
        pb, lb = inner_b[rng.integers(len(inner_b))]
        sa, sb = subtree(a, pa), subtree(b, pb)
        if la + depth(sb) <= max_depth and lb + depth(sa) <= max_depth:
            return replace(a, pa, sb), replace(b, pb, sa)
    return a, b


def mutate_uniform(tree: Node, config: EvolutionConfig, rng: np.random.Generator) -> Node:
    if rng.random() >= config.mutation_prob:
        return tree
    nodes = list(iter_nodes(tree))
    for _ in range(MAX_RETRIES):
        path, _, level = nodes[rng.integers(len(nodes))]
        new, _ = half_and_half(rng, config.mutation_subtree_min_depth, config.mutation_subtree_max_depth)
        if level + depth(new) <= config.overall_max_depth:
            return replace(tree, path, new)
    return tree


def vary(parents: Sequence[Individual], config: EvolutionConfig, rng: np.random.Generator) -> list[Individual]:
    """Crossover consecutive pairs, then pass every child through the mutation gate."""
    trees = [p.tree for p in parents]
    for k in range(0, len(trees) - 1, 2):
        if rng.random() < config.crossover_prob:
            trees[k], trees[k + 1] = crossover_single_point(trees[k], trees[k + 1], rng, config.overall_max_depth)
    return [Individual(mutate_uniform(t, config, rng)) for t in trees]


# ----------------------------------------------------------------- fitness


def fitness(tree: Node, batch: Sequence[Pair], slack_m: float = 1.0) -> float:
    return mean_profit(batch, TreePolicy(tree), slack_m)


def split_batches(train: Sequence[Pair], batches: int) -> list[list[Pair]]:
    if len(train) == 0 or len(train) % batches:
        raise ConfigurationError(f"{len(train)} training pairs cannot be split into {batches} equal mini-batches")
    per = len(train) // batches
    return [list(train[k * per:(k + 1) * per]) for k in range(batches)]


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    batch_id: int
    batch_best_fitness: float
    validation_score: float
    tree_size: int
    tree_depth: int
    tree: str


@dataclass
class EvolutionResult:
    best_tree: Node
    best_validation: float
    history: list[GenerationRecord] = field(default_factory=list)
    population_trees: list[list[Node]] = field(default_factory=list)

    def history_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["generation", "batch_id", "batch_best_fitness", "validation_score", "tree_size", "tree_depth", "tree"])
        for r in self.history:
            w.writerow([r.generation, r.batch_id, repr(r.batch_best_fitness), repr(r.validation_score),
                        r.tree_size, r.tree_depth, r.tree])
        return buf.getvalue()


def _rng(seed: int, counter: int) -> np.random.Generator:
    return np.random.default_rng([seed, counter])


def evolve(
    train: Sequence[Pair],
    valid: Sequence[Pair],
    config: EvolutionConfig = EvolutionConfig(),
    slack_m: float = 1.0,
    keep_populations: bool = False,
) -> EvolutionResult:
    """Evolve a scheduling policy; the final pick is the best generation winner on ``valid``."""
    batches = split_batches(train, config.batches)
    if not valid:
        raise ConfigurationError("validation set is empty")
    population = init_population(config, _rng(config.rng_seed, 0))
    valid_cache: dict[str, float] = {}

    def validation(tree: Node) -> float:
        key = serialize(tree)
        if key not in valid_cache:
            valid_cache[key] = fitness(tree, valid, slack_m)
        return valid_cache[key]

    result = EvolutionResult(best_tree=population[0].tree, best_validation=-math.inf)
    if config.generations == 0:
        for ind in population:
            score = validation(ind.tree)
            if score > result.best_validation:
                result.best_tree, result.best_validation = ind.tree, score
        return result

    for gen in range(config.generations):
        b = gen % config.batches
        for ind in population:
            ind.fitness = fitness(ind.tree, batches[b], slack_m)
            ind.batch_id = b
        if keep_populations:
            result.population_trees.append([ind.tree for ind in population])
        top = max(population, key=lambda ind: ind.fitness)  # first of equals
        score = validation(top.tree)
        result.history.append(GenerationRecord(gen, b, top.fitness, score, size(top.tree), depth(top.tree),
                                               serialize(top.tree)))
        if score > result.best_validation:
            result.best_tree, result.best_validation = top.tree, score
        if gen + 1 < config.generations:
            rng = _rng(config.rng_seed, gen + 1)
            parents = [tournament_select(population, config.tournament_size, rng) for _ in population]
            population = vary(parents, config, rng)
    return result

