"""The generic quality-diversity loop and its curiosity bookkeeping."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from qdopt.config import RunConfig
from qdopt.containers import ADDED, REPLACED, ArchiveContainer, GridContainer
from qdopt.individual import Individual, random_genotypes
from qdopt.metrics import MetricsRow, compute_metrics
from qdopt.selection import make_selector
from qdopt.tasks import Task
from qdopt.variation import mutate_batch

logger = logging.getLogger(__name__)


class EvaluationError(RuntimeError):
    def __init__(self, batch: int, ind_id: int, detail: str):
        super().__init__(f"evaluation failed at batch {batch}, individual {ind_id}: {detail}")
        self.batch = batch
        self.ind_id = ind_id


@dataclass(frozen=True)
class CuriosityEvent:
    batch: int
    offspring_id: int
    parent_id: int
    accepted: bool
    applied: bool  # False when the parent had left the container


@dataclass
class RunStats:
    evaluated: int = 0
    added: int = 0
    replaced: int = 0
    rejected: int = 0
    curiosity_dropped: int = 0

    @property
    def accepted(self) -> int:
        return self.added + self.replaced


@dataclass
class RunResult:
    container: GridContainer | ArchiveContainer
    trace: list[MetricsRow]
    stats: RunStats
    events: list[CuriosityEvent] | None = None
    extra: dict = field(default_factory=dict)


def threads_from_env() -> int:
    raw = os.environ.get("QD_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"QD_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("QD_THREADS must be >= 0")
    return n


def make_container(config: RunConfig, task: Task):
    if config.container == "grid" or config.algorithm == "nslc":
        if len(config.grid.resolution) != task.descriptor_size:
            raise ValueError(f"grid has {len(config.grid.resolution)} dimensions, "
                             f"task {task.name} has {task.descriptor_size}")
        return GridContainer(config.grid.resolution, config.grid.subgrid_depth, task.quality_offset)
    return ArchiveContainer(config.archive.l, config.archive.epsilon, config.archive.k_nn,
                            task.quality_offset, task.descriptor_size)


def evaluate_individuals(task: Task, inds: Sequence[Individual], batch: int, threads: int = 0) -> None:
    """Evaluate ``inds`` in place. Threads only split the work; results are identical."""
    if not inds:
        return
    genotypes = np.stack([i.genotype for i in inds])
    try:
        if threads > 0 and len(inds) > 1:
            chunks = np.array_split(np.arange(len(inds)), min(threads, len(inds)))
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(lambda c: task.evaluate_batch(genotypes[c]), chunks))
            desc = np.concatenate([p[0] for p in parts])
            fit = np.concatenate([p[1] for p in parts])
        else:
            desc, fit = task.evaluate_batch(genotypes)
    except Exception:
        # locate the failing individual
        for ind in inds:
            try:
                task.evaluate(ind.genotype)
            except Exception as exc:
                raise EvaluationError(batch, ind.id, repr(exc)) from exc
        raise
    desc = np.asarray(desc, dtype=float)
    fit = np.asarray(fit, dtype=float)
    if desc.shape != (len(inds), task.descriptor_size) or fit.shape != (len(inds),):
        raise EvaluationError(batch, inds[0].id, f"bad output shapes {desc.shape}, {fit.shape}")
    bad = ~(np.isfinite(fit) & np.all(np.isfinite(desc), axis=1))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise EvaluationError(batch, inds[i].id, "non-finite descriptor or fitness")
    for ind, d, f in zip(inds, desc, fit.tolist()):
        ind.set_evaluation(d, f)


def curiosity_update(parent: Individual, accepted: bool, reward: float = 1.0, penalty: float = 0.5) -> None:
    if accepted:
        parent.curiosity += reward
    else:
        parent.curiosity -= penalty


class IdSource:
    def __init__(self):
        self.next = 0

    def take(self, n: int) -> range:
        r = range(self.next, self.next + n)
        self.next += n
        return r


def fresh_batch(task: Task, n: int, ids: IdSource, rng: np.random.Generator) -> list[Individual]:
    genotypes = random_genotypes(task.encoding, n, rng)
    return [Individual(i, g) for i, g in zip(ids.take(n), genotypes)]


def offspring_of(parents: Sequence[Individual], config: RunConfig, task: Task, ids: IdSource,
                 rng: np.random.Generator) -> list[Individual]:
    genotypes = mutate_batch(np.stack([p.genotype for p in parents]), config.mutation, task.encoding, rng)
    return [Individual(i, g, parent_id=p.id) for i, g, p in zip(ids.take(len(parents)), genotypes, parents)]


def run_qd(config: RunConfig, task: Task, *, threads: int | None = None,
           record_events: bool = False) -> RunResult:
    """Run ``config.iterations`` batches of select / vary / evaluate / insert.

    Iteration 1 evaluates two random batches. Afterwards every offspring is
    offered to the container in batch order, and the container-resident
    record of its parent earns ``reward`` when the offspring is accepted or
    pays ``penalty`` otherwise. Metrics are logged every ``log_interval``
    batches on the updated container.
    """
    if config.algorithm != "qd":
        raise ValueError("run_qd runs the 'qd' algorithm; use run_nslc for NSLC")
    if threads is None:
        threads = threads_from_env()
    rng = np.random.default_rng(config.seed)
    container = make_container(config, task)
    selector = make_selector(config.selector)
    stats = RunStats()
    events: list[CuriosityEvent] | None = [] if record_events else None
    trace: list[MetricsRow] = []
    ids = IdSource()
    parents: list[Individual] = []
    offspring: list[Individual] = []
    stale = True

    for it in range(1, config.iterations + 1):
        if it == 1:
            parents = fresh_batch(task, config.batch_size, ids, rng)
            offspring = fresh_batch(task, config.batch_size, ids, rng)
            to_eval = parents + offspring
        else:
            if stale and selector.needs_cached_scores:
                container.update()
                stale = False
            chosen = selector(container, parents, offspring, config.batch_size, rng)
            if chosen is None:
                parents = fresh_batch(task, config.batch_size, ids, rng)
                offspring = parents
            else:
                parents = chosen
                offspring = offspring_of(parents, config, task, ids, rng)
            to_eval = offspring

        evaluate_individuals(task, to_eval, it, threads)
        stats.evaluated += len(to_eval)
        for ind in to_eval:
            outcome = container.add(ind)
            if outcome.kind == ADDED:
                stats.added += 1
            elif outcome.kind == REPLACED:
                stats.replaced += 1
            else:
                stats.rejected += 1
            if ind.parent_id is None:
                continue
            parent = container.get(ind.parent_id)
            if parent is not None:
                curiosity_update(parent, outcome.accepted, config.reward, config.penalty)
            else:
                stats.curiosity_dropped += 1
            if events is not None:
                events.append(CuriosityEvent(it, ind.id, ind.parent_id, outcome.accepted, parent is not None))
        stale = True

        if it % config.log_interval == 0 or it == config.iterations:
            container.update()
            stale = False
            if it % config.log_interval == 0:
                trace.append(compute_metrics(container, it, stats.evaluated))

    return RunResult(container, trace, stats, events)
