"""Tree-based genetic programming over real-valued feature vectors.

Programs are immutable prefix sequences of ``(opcode, arg)`` nodes.  The
function set is ``add``, ``sub``, ``mul`` and protected division ``pdiv``;
terminals are feature lookups and ephemeral constants drawn from [-1, 1].

Depth counts nodes on the longest root-to-leaf path, so a lone terminal has
depth 1.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _vm
from ._vm import ADD, CONST, FEATURE, MUL, PDIV, SUB

FUNCTIONS = (ADD, SUB, MUL, PDIV)
NAMES = {ADD: "add", SUB: "sub", MUL: "mul", PDIV: "pdiv", FEATURE: "feature", CONST: "const"}
OPCODES = {v: k for k, v in NAMES.items()}

# breeding operators, in the order used for operator draws and counters
FUNC_PT_CROSSOVER = "func_pt_crossover"
ANY_PT_CROSSOVER = "any_pt_crossover"
REPRODUCTION = "reproduction"
MUTATION = "mutation"
OPERATORS = (FUNC_PT_CROSSOVER, ANY_PT_CROSSOVER, REPRODUCTION, MUTATION)


class ProgramSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class Program:
    nodes: tuple[tuple[int, float], ...]

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def depth(self) -> int:
        return tree_depth(self.nodes)

    def features_used(self) -> set[int]:
        return {int(a) for op, a in self.nodes if op == FEATURE}

    def __str__(self) -> str:
        return to_sexpr(self)


def feature(i: int) -> Program:
    return Program(((FEATURE, float(i)),))


def const(v: float) -> Program:
    return Program(((CONST, float(v)),))


def apply(op: int | str, left: Program, right: Program) -> Program:
    """Build ``(op left right)``; handy for hand-written programs."""
    if isinstance(op, str):
        op = OPCODES[op]
    if op not in FUNCTIONS:
        raise ValueError(f"not a function opcode: {op}")
    return Program(((op, 0.0),) + left.nodes + right.nodes)


# ---------------------------------------------------------------- structure

def subtree_end(nodes: Sequence[tuple[int, float]], start: int) -> int:
    """Index one past the subtree rooted at ``start``."""
    need = 1
    i = start
    while need:
        need += 1 if nodes[i][0] in FUNCTIONS else -1
        i += 1
    return i


def node_levels(nodes: Sequence[tuple[int, float]]) -> list[int]:
    """Level of every node (root = 1), in prefix order."""
    levels = []
    stack = [1]
    for op, _ in nodes:
        lvl = stack.pop()
        levels.append(lvl)
        if op in FUNCTIONS:
            stack.append(lvl + 1)
            stack.append(lvl + 1)
    return levels


def tree_depth(nodes: Sequence[tuple[int, float]]) -> int:
    return max(node_levels(nodes))


def _subtree_heights(nodes) -> list[int]:
    heights = [0] * len(nodes)
    stack: list[int] = []
    for i in range(len(nodes) - 1, -1, -1):
        if nodes[i][0] in FUNCTIONS:
            a = stack.pop()
            b = stack.pop()
            heights[i] = 1 + max(a, b)
        else:
            heights[i] = 1
        stack.append(heights[i])
    return heights


# ---------------------------------------------------------------- evaluation

def _fix(v: float) -> float:
    if v != v:
        return -_vm.CLAMP
    if v == math.inf:
        return _vm.CLAMP
    if v == -math.inf:
        return -_vm.CLAMP
    return v


def eval_program(p: Program, x) -> float:
    """Evaluate ``p`` on a single feature vector.

    Protected division returns 1.0 when the divisor's magnitude is at most
    1e-9, and any infinite intermediate is clamped to +/-1e12, so the
    result is always finite.
    """
    stack: list[float] = []
    for op, arg in reversed(p.nodes):
        if op == FEATURE:
            stack.append(_fix(float(x[int(arg)])))
        elif op == CONST:
            stack.append(arg)
        else:
            a = stack.pop()
            b = stack.pop()
            if op == ADD:
                v = a + b
            elif op == SUB:
                v = a - b
            elif op == MUL:
                v = a * b
            else:
                v = a / b if abs(b) > _vm.PDIV_EPS else 1.0
            stack.append(_fix(v))
    return stack[0]


def _flatten(programs: Sequence[Program]):
    lengths = np.fromiter((len(p.nodes) for p in programs), dtype=np.int64, count=len(programs))
    starts = np.zeros(len(programs), dtype=np.int64)
    if len(programs) > 1:
        np.cumsum(lengths[:-1], out=starts[1:])
    flat = [n for p in programs for n in p.nodes]
    ops = np.fromiter((n[0] for n in flat), dtype=np.int64, count=len(flat))
    args = np.fromiter((n[1] for n in flat), dtype=np.float64, count=len(flat))
    return ops, args, starts, lengths


def evaluate_many(programs: Sequence[Program], X: np.ndarray) -> np.ndarray:
    """Outputs of every program on every row: shape ``(len(programs), n_rows)``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if not programs:
        return np.empty((0, X.shape[0]))
    return _vm.run_programs(*_flatten(programs), X)


def evaluate(p: Program, X: np.ndarray) -> np.ndarray:
    return evaluate_many([p], X)[0]


def clamp01(v):
    return np.minimum(1.0, np.maximum(0.0, v))


# ------------------------------------------------------------- serialization

def to_sexpr(p: Program) -> str:
    out: list[str] = []
    closers: list[int] = []
    for op, arg in p.nodes:
        if op in FUNCTIONS:
            out.append(f"({NAMES[op]}")
            closers.append(2)
            continue
        out.append(f"(feature {int(arg)})" if op == FEATURE else f"(const {float(arg)!r})")
        while closers:
            closers[-1] -= 1
            if closers[-1]:
                break
            closers.pop()
            out[-1] += ")"
    return " ".join(out)


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def from_sexpr(text: str) -> Program:
    """Parse the text produced by :func:`to_sexpr`."""
    tokens = _TOKEN.findall(text)
    pos = 0
    nodes: list[tuple[int, float]] = []

    def expect(tok):
        nonlocal pos
        if pos >= len(tokens) or tokens[pos] != tok:
            got = tokens[pos] if pos < len(tokens) else "end of input"
            raise ProgramSyntaxError(f"expected {tok!r}, got {got!r}")
        pos += 1

    def parse():
        nonlocal pos
        expect("(")
        if pos >= len(tokens):
            raise ProgramSyntaxError("unexpected end of input")
        name = tokens[pos]
        pos += 1
        op = OPCODES.get(name)
        if op is None:
            raise ProgramSyntaxError(f"unknown node {name!r}")
        if op in FUNCTIONS:
            nodes.append((op, 0.0))
            parse()
            parse()
        else:
            try:
                value = int(tokens[pos]) if op == FEATURE else float(tokens[pos])
            except (IndexError, ValueError):
                raise ProgramSyntaxError(f"bad {name} argument") from None
            if op == FEATURE and value < 0:
                raise ProgramSyntaxError("negative feature index")
            nodes.append((op, float(value)))
            pos += 1
        expect(")")

    parse()
    if pos != len(tokens):
        raise ProgramSyntaxError(f"trailing input after program: {tokens[pos]!r}")
    return Program(tuple(nodes))


# ------------------------------------------------------------ configuration

@dataclass(frozen=True)
class GpConfig:
    population_size: int = 200
    generations: int = 30
    subpopulations: int = 40
    islands: bool = True
    migration_interval: int = 5
    tournament_k: int = 6
    crossover_func_pt_fraction: float = 0.7
    crossover_any_pt_fraction: float = 0.1
    fitness_prop_repro_fraction: float = 0.1
    max_depth_new: int = 6
    max_depth_crossover: int = 17
    max_mutant_depth: int = 4
    grow_method: str = "grow"
    function_probability: float = 0.5
    const_range: tuple[float, float] = (-1.0, 1.0)
    parsimony_factor: float = 0.0
    seed: int = 0

    def __post_init__(self):
        fr = (self.crossover_func_pt_fraction, self.crossover_any_pt_fraction,
              self.fitness_prop_repro_fraction)
        if any(f < 0 for f in fr) or sum(fr) > 1 + 1e-12:
            raise ValueError("breeding fractions must be non-negative and sum to <= 1")
        if self.population_size < 1 or self.generations < 0:
            raise ValueError("population_size must be >= 1 and generations >= 0")
        if self.subpopulations < 1:
            raise ValueError("subpopulations must be >= 1")
        if self.islands and self.population_size < self.subpopulations:
            raise ValueError("population_size must be at least the number of islands")
        if self.tournament_k < 1:
            raise ValueError("tournament_k must be >= 1")
        if min(self.max_depth_new, self.max_depth_crossover, self.max_mutant_depth) < 1:
            raise ValueError("depth limits must be >= 1")
        if self.grow_method != "grow":
            raise ValueError(f"unsupported grow_method {self.grow_method!r}")

    @property
    def mutation_fraction(self) -> float:
        return max(0.0, 1.0 - self.crossover_func_pt_fraction - self.crossover_any_pt_fraction
                   - self.fitness_prop_repro_fraction)

    @property
    def operator_probabilities(self) -> np.ndarray:
        return np.array([self.crossover_func_pt_fraction, self.crossover_any_pt_fraction,
                         self.fitness_prop_repro_fraction, self.mutation_fraction])

    def island_sizes(self) -> list[int]:
        if not self.islands:
            return [self.population_size]
        base, extra = divmod(self.population_size, self.subpopulations)
        return [base + (1 if i < extra else 0) for i in range(self.subpopulations)]


# ------------------------------------------------------------ variation ops

def _as_rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _terminal(rng: np.random.Generator, feature_count: int, const_range) -> tuple[int, float]:
    pick = rng.integers(0, feature_count + 1)
    if pick < feature_count:
        return (FEATURE, float(pick))
    lo, hi = const_range
    return (CONST, float(rng.uniform(lo, hi)))


def _grow_nodes(rng, depth_limit, feature_count, p_func, const_range) -> list[tuple[int, float]]:
    nodes: list[tuple[int, float]] = []
    pending = [1]
    while pending:
        level = pending.pop()
        if level < depth_limit and rng.random() < p_func:
            nodes.append((FUNCTIONS[rng.integers(0, len(FUNCTIONS))], 0.0))
            pending.append(level + 1)
            pending.append(level + 1)
        else:
            nodes.append(_terminal(rng, feature_count, const_range))
    return nodes


def grow_tree(cfg: GpConfig, depth_limit: int, feature_count: int, seed=None) -> Program:
    """Grow-method random tree of depth at most ``depth_limit``."""
    if depth_limit < 1:
        raise ValueError("depth_limit must be >= 1")
    if feature_count < 1:
        raise ValueError("feature_count must be >= 1")
    rng = _as_rng(seed)
    return Program(tuple(_grow_nodes(rng, depth_limit, feature_count,
                                     cfg.function_probability, cfg.const_range)))


def tournament_select(population: Sequence[tuple[Program, float]], k: int, seed=None) -> Program:
    """Best (lowest-fitness) of ``k`` uniform draws with replacement."""
    if not population:
        raise ValueError("empty population")
    rng = _as_rng(seed)
    fits = np.array([f for _, f in population])
    return population[_tournament_index(fits, k, rng)][0]


def _tournament_index(fits: np.ndarray, k: int, rng: np.random.Generator) -> int:
    draws = rng.integers(0, fits.shape[0], k)
    best = draws[0]
    for d in draws[1:]:
        if fits[d] < fits[best] or (fits[d] == fits[best] and d < best):
            best = d
    return int(best)


def _crossover_point(nodes, func_only: bool, rng) -> int:
    if func_only:
        pts = [i for i, (op, _) in enumerate(nodes) if op in FUNCTIONS]
        if pts:
            return pts[rng.integers(0, len(pts))]
    return int(rng.integers(0, len(nodes)))


def _crossover(a: Program, b: Program, func_only: bool, max_depth: int, rng) -> tuple[Program, Program]:
    na, nb = a.nodes, b.nodes
    i = _crossover_point(na, func_only, rng)
    j = _crossover_point(nb, func_only, rng)
    ie, je = subtree_end(na, i), subtree_end(nb, j)
    c1 = Program(na[:i] + nb[j:je] + na[ie:])
    c2 = Program(nb[:j] + na[i:ie] + nb[je:])
    if c1.depth > max_depth:
        c1 = a
    if c2.depth > max_depth:
        c2 = b
    return c1, c2


def crossover(a: Program, b: Program, func_pt_fraction: float = 0.7, any_pt_fraction: float = 0.1,
              max_depth: int = 17, seed=None) -> tuple[Program, Program]:
    """Subtree crossover.

    The crossover mode is drawn with probabilities proportional to the two
    fractions: in function-point mode the swap points are restricted to
    function nodes (falling back to any node for a parent without one).
    A child deeper than ``max_depth`` is replaced by its own parent.
    """
    rng = _as_rng(seed)
    total = func_pt_fraction + any_pt_fraction
    func_only = total > 0 and rng.random() < func_pt_fraction / total
    return _crossover(a, b, func_only, max_depth, rng)


def mutate(p: Program, max_mutant_depth: int = 4, feature_count: int = 1, seed=None,
           max_depth: int = 17, cfg: GpConfig | None = None) -> Program:
    """Replace a uniformly chosen subtree with a fresh grow tree.

    If the mutant would exceed ``max_depth``, the mutation point is redrawn
    among the nodes shallow enough to host that subtree.
    """
    rng = _as_rng(seed)
    cfg = cfg or GpConfig()
    nodes = p.nodes
    new = _grow_nodes(rng, max_mutant_depth, feature_count, cfg.function_probability, cfg.const_range)
    height = tree_depth(new)
    levels = node_levels(nodes)
    i = int(rng.integers(0, len(nodes)))
    if levels[i] + height - 1 > max_depth:
        ok = [j for j, lvl in enumerate(levels) if lvl + height - 1 <= max_depth]
        i = ok[rng.integers(0, len(ok))] if ok else 0
    child = Program(nodes[:i] + tuple(new) + nodes[subtree_end(nodes, i):])
    if child.depth > max_depth:  # only reachable when max_mutant_depth > max_depth
        return p
    return child


def _roulette_index(fits: np.ndarray, rng) -> int:
    adjusted = 1.0 / (1.0 + np.maximum(fits, 0.0))
    cdf = np.cumsum(adjusted)
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), fits.shape[0] - 1))


def breed(programs: Sequence[Program], fits: np.ndarray, n: int, cfg: GpConfig,
          feature_count: int, rng: np.random.Generator, counts: dict | None = None) -> list[Program]:
    """Produce ``n`` offspring from one (sub)population.

    Each offspring slot draws its operator from the configured fractions;
    crossover keeps the first child only, so every slot yields exactly one
    program and operator counts are multinomial.
    """
    probs = cfg.operator_probabilities
    probs = probs / probs.sum()
    ops = rng.choice(len(OPERATORS), size=n, p=probs)
    out: list[Program] = []
    for o in ops:
        name = OPERATORS[o]
        if counts is not None:
            counts[name] = counts.get(name, 0) + 1
        if name == REPRODUCTION:
            out.append(programs[_roulette_index(fits, rng)])
        elif name == MUTATION:
            parent = programs[_tournament_index(fits, cfg.tournament_k, rng)]
            out.append(mutate(parent, cfg.max_mutant_depth, feature_count, rng,
                              cfg.max_depth_crossover, cfg))
        else:
            a = programs[_tournament_index(fits, cfg.tournament_k, rng)]
            b = programs[_tournament_index(fits, cfg.tournament_k, rng)]
            child, _ = _crossover(a, b, name == FUNC_PT_CROSSOVER, cfg.max_depth_crossover, rng)
            out.append(child)
    return out


# ------------------------------------------------------------------ search

@dataclass(frozen=True)
class FitnessCase:
    input: Sequence[float]
    target: float
    weight: float = 1.0


@dataclass
class GpResult:
    best: Program
    best_fitness: float
    history: list[float] = field(default_factory=list)
    operator_counts: dict = field(default_factory=dict)


class _FitnessCache:
    def __init__(self, X, y, w, parsimony):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        self.w = np.asarray(w, dtype=np.float64)
        self.wsum = float(self.w.sum())
        self.parsimony = parsimony
        self.memo: dict[tuple, float] = {}

    def __call__(self, programs: Sequence[Program]) -> np.ndarray:
        todo = []
        seen = set()
        for p in programs:
            if p.nodes not in self.memo and p.nodes not in seen:
                seen.add(p.nodes)
                todo.append(p)
        if todo:
            out = evaluate_many(todo, self.X)
            err = np.abs(clamp01(out) - self.y) @ self.w / self.wsum
            for p, e in zip(todo, err):
                self.memo[p.nodes] = float(e) + self.parsimony * len(p.nodes)
        return np.array([self.memo[p.nodes] for p in programs])


def evolve(X, y, w, cfg: GpConfig, seed: int | None = None) -> GpResult:
    """Evolve a program minimising weighted absolute error against ``y``.

    Fitness is ``sum(w * |clamp01(p(x)) - y|) / sum(w)`` plus the parsimony
    penalty per node.  Each island keeps its best member (elitism of one);
    with ``cfg.islands`` the best of island ``i`` replaces the worst of
    island ``i + 1`` every ``migration_interval`` generations.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("need a non-empty 2-D input matrix")
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("fitness weights must be non-negative with a positive sum")
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    fitness = _FitnessCache(X, y, w, cfg.parsimony_factor)
    D = X.shape[1]

    islands = [[grow_tree(cfg, cfg.max_depth_new, D, rng) for _ in range(size)]
               for size in cfg.island_sizes()]
    island_fits = [fitness(isl) for isl in islands]

    best, best_fit = None, math.inf

    def track():
        nonlocal best, best_fit
        for isl, fits in zip(islands, island_fits):
            i = int(np.argmin(fits))
            if fits[i] < best_fit:
                best, best_fit = isl[i], float(fits[i])

    track()
    history = [best_fit]
    counts: dict[str, int] = {}
    for gen in range(1, cfg.generations + 1):
        new_islands = []
        for isl, fits in zip(islands, island_fits):
            elite = isl[int(np.argmin(fits))]
            new_islands.append([elite] + breed(isl, fits, len(isl) - 1, cfg, D, rng, counts))
        islands = new_islands
        island_fits = [fitness(isl) for isl in islands]
        if cfg.islands and len(islands) > 1 and cfg.migration_interval > 0 \
                and gen % cfg.migration_interval == 0:
            migrants = [isl[int(np.argmin(f))] for isl, f in zip(islands, island_fits)]
            for i in range(len(islands)):
                dst = (i + 1) % len(islands)
                worst = int(np.argmax(island_fits[dst]))
                islands[dst][worst] = migrants[i]
            island_fits = [fitness(isl) for isl in islands]
        track()
        history.append(best_fit)
    return GpResult(best, best_fit, history, counts)


def run_gp(cases: Iterable[FitnessCase], cfg: GpConfig) -> Program:
    """Best program found for the given fitness cases (seeded by ``cfg.seed``)."""
    cases = list(cases)
    if not cases:
        raise ValueError("no fitness cases")
    X = np.array([c.input for c in cases], dtype=np.float64)
    y = np.array([c.target for c in cases], dtype=np.float64)
    w = np.array([c.weight for c in cases], dtype=np.float64)
    return evolve(X, y, w, cfg).best
