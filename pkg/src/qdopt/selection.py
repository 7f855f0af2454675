"""Selection operators producing the next parent batch.

Collection-wide selectors (uniform, score-proportionate) draw from the
container's members. Population selectors (tournament, Pareto) work on the
union of the previous parents and offspring. A selector returns ``None``
when the next batch should instead be freshly sampled genotypes (the
no-selection baseline, or an empty container).
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from qdopt.config import SelectorConfig
from qdopt.individual import Individual

ROULETTE_FLOOR = 1e-6


# ---------------------------------------------------------------------------
# collection-wide

def select_no_selection(batch_size: int, rng: np.random.Generator) -> None:
    """Signal that ``batch_size`` brand new random genotypes are to be drawn."""
    return None


def select_uniform(members: Sequence[Individual], batch_size: int,
                   rng: np.random.Generator) -> list[Individual] | None:
    if not members:
        return None
    picks = rng.integers(0, len(members), size=batch_size)
    return [members[i] for i in picks]


def roulette_weights(scores) -> np.ndarray:
    """Shifted weights ``s - min(s) + delta`` with a small positive floor ``delta``.

    ``delta = 1e-6 * max(range, 1)`` keeps the worst member selectable with
    vanishing probability, and makes equal scores degrade to uniform.
    """
    s = np.asarray(scores, dtype=float)
    lo, hi = s.min(), s.max()
    delta = ROULETTE_FLOOR * max(hi - lo, 1.0)
    return (s - lo) + delta


def roulette(weights: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(weights)
    r = rng.random(n) * cum[-1]
    return np.minimum(np.searchsorted(cum, r, side="right"), len(weights) - 1)


def select_score_proportionate(members: Sequence[Individual], scores, batch_size: int,
                               rng: np.random.Generator) -> list[Individual] | None:
    if not members:
        return None
    picks = roulette(roulette_weights(scores), batch_size, rng)
    return [members[i] for i in picks]


# ---------------------------------------------------------------------------
# population-based

def union_by_id(*batches: Sequence[Individual]) -> list[Individual]:
    seen = set()
    out = []
    for batch in batches:
        for ind in batch:
            if ind.id not in seen:
                seen.add(ind.id)
                out.append(ind)
    return out


def tournament(scores, ids, batch_size: int, tournament_size: int,
               rng: np.random.Generator) -> np.ndarray:
    """Winners of ``batch_size`` tournaments, each over distinct contestants.

    The winner has the highest score; ties go to the lower id.
    """
    scores = np.asarray(scores, dtype=float)
    ids = np.asarray(ids)
    n = len(scores)
    t = min(tournament_size, n)
    # rank 0 = worst; ties ordered so the lower id ranks higher
    rank = np.empty(n, dtype=np.int64)
    rank[np.lexsort((-ids, scores))] = np.arange(n)
    keys = rng.random((batch_size, n))
    contestants = np.argpartition(keys, t - 1, axis=1)[:, :t] if t < n else np.argsort(keys, axis=1)
    best = np.argmax(rank[contestants], axis=1)
    return contestants[np.arange(batch_size), best]


def select_population(prev_parents: Sequence[Individual], prev_offspring: Sequence[Individual],
                      score_fn: Callable[[list[Individual]], np.ndarray], batch_size: int,
                      rng: np.random.Generator, tournament_size: int = 2) -> list[Individual]:
    pool = union_by_id(prev_parents, prev_offspring)
    scores = score_fn(pool)
    winners = tournament(scores, [p.id for p in pool], batch_size, tournament_size, rng)
    return [pool[i] for i in winners]


# ---------------------------------------------------------------------------
# Pareto (NSGA-II style)

def dominance_matrix(objectives: np.ndarray) -> np.ndarray:
    """``dom[i, j]`` is True when i Pareto-dominates j (all objectives maximized)."""
    f = np.asarray(objectives, dtype=float)
    ge = np.all(f[:, None, :] >= f[None, :, :], axis=2)
    gt = np.any(f[:, None, :] > f[None, :, :], axis=2)
    return ge & gt


def fast_non_dominated_sort(objectives: np.ndarray) -> list[np.ndarray]:
    """Partition indices into Pareto fronts, best front first."""
    dom = dominance_matrix(objectives)
    n = len(dom)
    count = dom.sum(axis=0)
    remaining = np.ones(n, dtype=bool)
    fronts = []
    while remaining.any():
        front = np.flatnonzero(remaining & (count == 0))
        fronts.append(front)
        remaining[front] = False
        count = count - dom[front].sum(axis=0)
    return fronts


def crowding_distance(objectives: np.ndarray, ids=None) -> np.ndarray:
    """NSGA-II crowding distance within one front; boundary points get ``inf``."""
    f = np.asarray(objectives, dtype=float)
    n = len(f)
    ids = np.arange(n) if ids is None else np.asarray(ids)
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for m in range(f.shape[1]):
        order = np.lexsort((ids, f[:, m]))
        col = f[order, m]
        dist[order[0]] = dist[order[-1]] = np.inf
        span = col[-1] - col[0]
        if span > 0:
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def pareto_order(objectives: np.ndarray, ids) -> np.ndarray:
    """All indices ordered by front, then by decreasing crowding distance, then id."""
    ids = np.asarray(ids)
    out = []
    for front in fast_non_dominated_sort(objectives):
        cd = crowding_distance(np.asarray(objectives)[front], ids[front])
        out.extend(front[np.lexsort((ids[front], -cd))])
    return np.array(out, dtype=np.intp)


def select_pareto(prev_parents: Sequence[Individual], prev_offspring: Sequence[Individual],
                  container, batch_size: int, rng: np.random.Generator) -> list[Individual]:
    """Best ``batch_size`` of parents and offspring on (novelty, local quality)."""
    pool = union_by_id(prev_parents, prev_offspring)
    objectives = np.column_stack([container.novelty_of(pool),
                                  container.local_quality_of(pool).astype(float)])
    order = pareto_order(objectives, [p.id for p in pool])[:batch_size]
    chosen = [pool[i] for i in order]
    # a pool smaller than the batch is topped up by cycling through the ranking
    while len(chosen) < batch_size:
        chosen.extend(chosen[:batch_size - len(chosen)])
    return chosen


# ---------------------------------------------------------------------------

def member_scores(container, members: Sequence[Individual], score: str) -> np.ndarray:
    if score == "fitness":
        return np.array([m.fitness for m in members])
    if score == "curiosity":
        return np.array([m.curiosity for m in members])
    if score == "novelty":
        return np.array([m.novelty for m in members])
    raise ValueError(f"unknown score {score!r}")


def pool_scores(container, pool: list[Individual], score: str) -> np.ndarray:
    """Scores for a population pool; novelty is measured against the container."""
    if score == "novelty":
        if len(container) == 0:
            return np.zeros(len(pool))
        return container.novelty_of(pool)
    return member_scores(container, pool, score)


class Selector:
    """Callable wrapper binding a :class:`SelectorConfig` to the selector functions."""

    def __init__(self, cfg: SelectorConfig):
        self.cfg = cfg

    @property
    def needs_cached_scores(self) -> bool:
        """Whether selection reads the members' cached novelty every batch."""
        return self.cfg.kind == "score" and self.cfg.score == "novelty"

    def __call__(self, container, prev_parents, prev_offspring, batch_size, rng):
        kind = self.cfg.kind
        if kind == "none":
            return select_no_selection(batch_size, rng)
        if kind == "uniform":
            return select_uniform(container.members(), batch_size, rng)
        if kind == "score":
            members = container.members()
            if not members:
                return None
            return select_score_proportionate(
                members, member_scores(container, members, self.cfg.score), batch_size, rng)
        if not prev_offspring:
            return None
        if kind == "population":
            return select_population(prev_parents, prev_offspring,
                                     lambda pool: pool_scores(container, pool, self.cfg.score),
                                     batch_size, rng, self.cfg.tournament_size)
        if len(container) == 0:
            return None
        return select_pareto(prev_parents, prev_offspring, container, batch_size, rng)


def make_selector(cfg: SelectorConfig) -> Selector:
    return Selector(cfg)
