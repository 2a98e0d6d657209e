"""Genetic algorithm for assigning dataset cells to macro elements.

A chromosome holds one dataset index per macro cell.  Fitness is the
centerline MSE against the target profile plus a static penalty on cells
detached from the main contact component.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .connectivity import InterfaceTables
from .fem import MacroSolver, tensor_components


class NoFeasibleDesign(RuntimeError):
    """No evaluated assembly satisfied N_dc = 0."""


@dataclass
class GAConfig:
    population: int = 100
    tournament: int = 2
    crossover: float = 0.9
    mutation: float | None = None  # defaults to 1 / N_f
    elitism: int = 2
    generations: int = 200
    penalty_scale: float = 1e6
    seed: int = 0
    initial: list | None = None
    threads: int | None = None

    def thread_count(self):
        if self.threads is not None:
            return max(1, int(self.threads))
        return max(1, int(os.environ.get("METASET_THREADS", "1")))


@dataclass
class Chromosome:
    genes: np.ndarray
    fitness: float
    mse: float
    n_dc: int

    @property
    def feasible(self):
        return self.n_dc == 0


@dataclass
class GAResult:
    best: Chromosome
    history: list
    feasible: bool
    r_dc: float
    evaluations: int
    generations: int
    extra: dict = field(default_factory=dict)

    @property
    def mse(self):
        return self.best.mse


class FitnessEvaluator:
    """Cached ``MSE + lambda * N_dc`` evaluation for one problem and dataset."""

    def __init__(self, problem, cells, penalty_scale=1e6, threads=1):
        if problem.target is None:
            raise ValueError("problem has no target profile")
        self.problem = problem
        self.solver = MacroSolver(problem)
        self.comps = tensor_components([c.properties for c in cells])
        self.tables = InterfaceTables(cells)
        self.target = np.asarray(problem.target, dtype=float)
        scale = float(np.mean(self.target ** 2))
        self.penalty = penalty_scale * (scale if scale > 0 else 1.0)
        self.threads = threads
        self.cache = {}
        self.best_feasible = None

    def _compute(self, genes):
        u = self.solver.solve(self.comps[genes])
        mse = float(np.mean((u - self.target) ** 2))
        n_dc = self.tables.n_dc(genes, self.problem.rows, self.problem.cols)
        return mse + self.penalty * n_dc, mse, n_dc

    def evaluate(self, population):
        keys = [g.tobytes() for g in population]
        todo = {k: g for k, g in zip(keys, population) if k not in self.cache}
        items = list(todo.items())
        if self.threads > 1 and len(items) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                values = list(pool.map(lambda kv: self._compute(kv[1]), items))
        else:
            values = [self._compute(g) for _, g in items]
        for (k, g), v in zip(items, values):
            self.cache[k] = v
            if v[2] == 0 and (self.best_feasible is None or v[1] < self.best_feasible.mse):
                self.best_feasible = Chromosome(g.copy(), *v)
        return np.array([self.cache[k][0] for k in keys])

    def chromosome(self, genes):
        genes = np.asarray(genes, dtype=np.int64)
        self.evaluate([genes])
        return Chromosome(genes.copy(), *self.cache[genes.tobytes()])


def ga_design(problem, dataset, config=None):
    """Minimize the penalized centerline MSE over assignments of ``dataset``."""
    cfg = config or GAConfig()
    n_f = problem.n_cells
    n_m = len(dataset)
    if n_m < 1:
        raise ValueError("dataset is empty")
    ev = FitnessEvaluator(problem, dataset, cfg.penalty_scale, cfg.thread_count())
    if n_m == 1:
        only = ev.chromosome(np.zeros(n_f, dtype=np.int64))
        return _finish(ev, only, [only.fitness], 0)

    rng = np.random.default_rng(cfg.seed)
    P = cfg.population
    pm = cfg.mutation if cfg.mutation is not None else 1.0 / n_f
    pop = rng.integers(0, n_m, size=(P, n_f))
    for i, genes in enumerate((cfg.initial or [])[:P]):
        genes = np.asarray(genes, dtype=np.int64)
        if genes.shape != (n_f,) or genes.min() < 0 or genes.max() >= n_m:
            raise ValueError(f"initial chromosome {i} is not a valid assembly")
        pop[i] = genes
    fit = ev.evaluate(pop)
    history = [float(fit.min())]
    n_child = P - cfg.elitism
    for _ in range(cfg.generations):
        order = np.argsort(fit, kind="stable")
        elite = pop[order[:cfg.elitism]]
        cand = rng.integers(0, P, size=(n_child, 2, cfg.tournament))
        winners = np.take_along_axis(cand, np.argmin(fit[cand], axis=2)[..., None], axis=2)[..., 0]
        p1, p2 = pop[winners[:, 0]], pop[winners[:, 1]]
        cross = (rng.random(n_child) < cfg.crossover)[:, None] & (rng.random((n_child, n_f)) < 0.5)
        child = np.where(cross, p2, p1)
        mut = rng.random((n_child, n_f)) < pm
        child[mut] = rng.integers(0, n_m, size=int(mut.sum()))
        pop = np.vstack([elite, child])
        fit = ev.evaluate(pop)
        history.append(float(fit.min()))
    best = ev.best_feasible
    if best is None:
        i = int(np.argmin(fit))
        best = Chromosome(pop[i].copy(), float(fit[i]), *ev.cache[pop[i].tobytes()][1:])
    return _finish(ev, best, history, cfg.generations)


def _finish(ev, best, history, generations):
    r_dc = ev.tables.r_dc(best.genes, ev.problem.rows, ev.problem.cols)
    return GAResult(best, history, best.feasible, r_dc, len(ev.cache), generations)


def exhaustive_design(problem, dataset, penalty_scale=1e6):
    """Enumerate all ``N_M ** N_f`` assemblies (tiny problems only)."""
    ev = FitnessEvaluator(problem, dataset, penalty_scale)
    n_f, n_m = problem.n_cells, len(dataset)
    if n_m ** n_f > 100_000:
        raise ValueError("search space too large to enumerate")
    grids = np.indices((n_m,) * n_f).reshape(n_f, -1).T
    fit = ev.evaluate(grids)
    i = int(np.argmin(fit))
    return ev.chromosome(grids[i]), fit
