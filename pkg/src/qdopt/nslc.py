"""Novelty Search with Local Competition, with a passive result grid.

A fixed-size population is evolved by NSGA-II survivor selection on
(novelty, local quality), both measured against an append-only novelty
archive. Offspring whose novelty beats the threshold ``rho`` join the
archive; every evaluated individual is also offered to a grid container so
the outcome can be scored like any other variant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from qdopt.config import NslcConfig, RunConfig
from qdopt.containers import ADDED, REPLACED, GridContainer, k_nearest, mean_neighbor_distance
from qdopt.individual import Individual
from qdopt.loop import (IdSource, RunResult, RunStats, evaluate_individuals, fresh_batch,
                        make_container, offspring_of, threads_from_env)
from qdopt.metrics import compute_metrics
from qdopt.selection import pareto_order, union_by_id
from qdopt.tasks import Task


class NoveltyArchive:
    """Append-only archive driving exploration; density is allowed to accumulate."""

    def __init__(self, descriptor_size: int, k_nn: int = 15):
        self.descriptor_size = descriptor_size
        self.k_nn = k_nn
        self.diameter = math.sqrt(descriptor_size)
        self.members: list[Individual] = []
        self._desc = np.empty((64, descriptor_size))
        self._ids = np.empty(64, dtype=np.int64)
        self._fit = np.empty(64)

    def __len__(self):
        return len(self.members)

    def append(self, ind: Individual) -> None:
        n = len(self.members)
        if n == len(self._ids):
            self._desc = np.resize(self._desc, (2 * n, self.descriptor_size))
            self._ids = np.resize(self._ids, 2 * n)
            self._fit = np.resize(self._fit, 2 * n)
        self._desc[n] = ind.descriptor
        self._ids[n] = ind.id
        self._fit[n] = ind.fitness
        self.members.append(ind)

    def scores(self, inds: list[Individual]) -> tuple[np.ndarray, np.ndarray]:
        """(novelty, local quality) of each individual against the archive."""
        n = len(self.members)
        queries = np.array([i.descriptor for i in inds], dtype=float).reshape(len(inds), self.descriptor_size)
        qids = np.array([i.id for i in inds], dtype=np.int64)
        dist, idx = k_nearest(self._desc[:n], self._ids[:n], queries, qids, self.k_nn)
        novelty = mean_neighbor_distance(dist, self.diameter)
        own = np.array([i.fitness for i in inds])
        if idx.shape[1] == 0:
            return novelty, np.zeros(len(inds), dtype=np.int64)
        valid = idx >= 0
        neigh = np.where(valid, self._fit[:n][np.where(valid, idx, 0)], np.inf)
        return novelty, np.count_nonzero(neigh < own[:, None], axis=1)


@dataclass
class NslcState:
    population: list[Individual]
    archive: NoveltyArchive
    grid: GridContainer
    rho: float
    idle_batches: int = 0
    batch: int = 0
    stats: RunStats = field(default_factory=RunStats)
    rho_history: list[float] = field(default_factory=list)


def adapt_rho(state: NslcState, additions: int, cfg: NslcConfig) -> None:
    if additions > cfg.raise_after:
        state.rho *= cfg.raise_factor
    if additions == 0:
        state.idle_batches += 1
        if state.idle_batches >= cfg.lower_after:
            state.rho *= cfg.lower_factor
            state.idle_batches = 0
    else:
        state.idle_batches = 0


def _offer_to_grid(state: NslcState, inds) -> None:
    for ind in inds:
        kind = state.grid.add(ind).kind
        if kind == ADDED:
            state.stats.added += 1
        elif kind == REPLACED:
            state.stats.replaced += 1
        else:
            state.stats.rejected += 1


def nslc_init(config: RunConfig, task: Task, ids: IdSource, rng: np.random.Generator,
              threads: int = 0) -> NslcState:
    """Random, evaluated initial population (already offered to the result grid)."""
    state = NslcState(population=fresh_batch(task, config.batch_size, ids, rng),
                      archive=NoveltyArchive(task.descriptor_size, config.nslc.k_nn),
                      grid=make_container(config, task), rho=config.nslc.rho_init)
    evaluate_individuals(task, state.population, 1, threads)
    state.stats.evaluated += len(state.population)
    _offer_to_grid(state, state.population)
    return state


def nslc_step(state: NslcState, config: RunConfig, task: Task, ids: IdSource,
              rng: np.random.Generator, threads: int = 0, fresh: bool = False) -> list[Individual]:
    """One generation. Returns the offspring that joined the novelty archive.

    Scores of parents and offspring are taken against the archive as it stood
    at the start of the step; archive insertions happen afterwards in
    offspring order.
    """
    state.batch += 1
    if fresh:
        offspring = fresh_batch(task, config.batch_size, ids, rng)
    else:
        offspring = offspring_of(state.population, config, task, ids, rng)
    evaluate_individuals(task, offspring, state.batch, threads)
    state.stats.evaluated += len(offspring)

    pool = union_by_id(state.population, offspring)
    novelty, lq = state.archive.scores(pool)
    novelty_by_id = dict(zip((p.id for p in pool), novelty.tolist()))
    order = pareto_order(np.column_stack([novelty, lq.astype(float)]), [p.id for p in pool])
    state.population = [pool[i] for i in order[:config.batch_size]]

    archived = [ind for ind in offspring if novelty_by_id[ind.id] > state.rho]
    for ind in archived:
        state.archive.append(ind)
    adapt_rho(state, len(archived), config.nslc)
    state.rho_history.append(state.rho)
    _offer_to_grid(state, offspring)
    return archived


def run_nslc(config: RunConfig, task: Task, *, threads: int | None = None) -> RunResult:
    """NSLC for ``config.iterations`` batches; the result grid is the returned container.

    Iteration 1 evaluates a random population and a random offspring batch,
    mirroring the two random batches of the generic loop.
    """
    if threads is None:
        threads = threads_from_env()
    rng = np.random.default_rng(config.seed)
    ids = IdSource()
    state = nslc_init(config, task, ids, rng, threads)
    trace = []
    for it in range(1, config.iterations + 1):
        nslc_step(state, config, task, ids, rng, threads, fresh=(it == 1))
        if it % config.log_interval == 0 or it == config.iterations:
            state.grid.update()
            if it % config.log_interval == 0:
                trace.append(compute_metrics(state.grid, it, state.stats.evaluated))
    return RunResult(state.grid, trace, state.stats,
                     extra={"archive_size": len(state.archive), "rho": state.rho})
