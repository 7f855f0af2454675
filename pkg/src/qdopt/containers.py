"""Collections of solutions: the discretized grid and the distance-based archive.

Both containers expose the same surface used by the main loop and the
selectors: ``add``, ``get``, ``members``, ``update``, ``novelty_of`` and
``local_quality_of``. Novelty is always reported so that larger means more
novel.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from qdopt.individual import Individual

logger = logging.getLogger(__name__)

ADDED = "added"
REPLACED = "replaced"
REJECTED = "rejected"

# Below this many points an exhaustive scan beats building a tree.
TREE_MIN_POINTS = 512
# Extra tree candidates fetched so that exact re-ranking cannot miss a neighbor
# whose tree distance differs from ours in the last ulp.
TREE_SLACK = 4
# Upper bound on query x point distance entries materialized at once.
SCAN_BLOCK = 1 << 21


class QualityContractError(ValueError):
    """A dominance test received a non-positive quality or negative novelty."""


@dataclass(frozen=True)
class AddOutcome:
    kind: str
    evicted_id: int | None = None
    reason: str | None = None

    @property
    def accepted(self) -> bool:
        return self.kind != REJECTED


def _added() -> AddOutcome:
    return AddOutcome(ADDED)


def _replaced(evicted_id: int) -> AddOutcome:
    return AddOutcome(REPLACED, evicted_id=evicted_id)


def _rejected(reason: str) -> AddOutcome:
    return AddOutcome(REJECTED, reason=reason)


# ---------------------------------------------------------------------------
# distance helpers

def distances(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Euclidean distance from every row of ``points`` to ``x``.

    Squared terms are accumulated dimension by dimension, in order, so every
    code path (and any scalar re-implementation) yields identical bits.
    """
    acc = (points[:, 0] - x[0]) ** 2
    for j in range(1, points.shape[1]):
        acc += (points[:, j] - x[j]) ** 2
    return np.sqrt(acc)


def _pair_distances(queries: np.ndarray, cand_points: np.ndarray) -> np.ndarray:
    # queries (m, D), cand_points (m, c, D) -> (m, c)
    acc = (cand_points[:, :, 0] - queries[:, 0, None]) ** 2
    for j in range(1, queries.shape[1]):
        acc += (cand_points[:, :, j] - queries[:, j, None]) ** 2
    return np.sqrt(acc)


def sequential_row_sum(values: np.ndarray) -> np.ndarray:
    """Left-to-right sum along the last axis (no pairwise reassociation)."""
    if values.shape[-1] == 0:
        return np.zeros(values.shape[:-1])
    acc = values[..., 0].copy()
    for j in range(1, values.shape[-1]):
        acc += values[..., j]
    return acc


def k_nearest(points: np.ndarray, point_ids: np.ndarray, queries: np.ndarray,
              query_ids: np.ndarray | None, k: int, use_tree: bool = True):
    """The ``k`` nearest points of every query, self excluded by id.

    Returns ``(dist, index)`` of shape (m, min(k, n)), ascending by distance
    with ties broken by point id. Slots with fewer than ``k`` admissible
    neighbors are padded with ``inf`` / ``-1``.
    """
    n = len(points)
    m = len(queries)
    kk = min(k, n)
    if kk == 0 or m == 0:
        return np.zeros((m, kk)), np.full((m, kk), -1, dtype=np.intp)
    if query_ids is None:
        query_ids = np.full(m, -1, dtype=np.int64)
    if use_tree and n >= TREE_MIN_POINTS:
        c = min(n, k + 1 + TREE_SLACK)
        _, cand = cKDTree(points).query(queries, k=c)
        cand = cand.reshape(m, c)
        return _rank_candidates(points, point_ids, queries, query_ids, cand, kk)
    out_d = np.empty((m, kk))
    out_i = np.empty((m, kk), dtype=np.intp)
    step = max(1, SCAN_BLOCK // n)
    all_idx = np.arange(n)
    for s in range(0, m, step):
        q = queries[s:s + step]
        cand = np.broadcast_to(all_idx, (len(q), n))
        out_d[s:s + step], out_i[s:s + step] = _rank_candidates(
            points, point_ids, q, query_ids[s:s + step], cand, kk)
    return out_d, out_i


def _rank_candidates(points, point_ids, queries, query_ids, cand, kk):
    d = _pair_distances(queries, points[cand])
    cand_ids = point_ids[cand]
    is_self = cand_ids == query_ids[:, None]
    d = np.where(is_self, np.inf, d)
    if cand.shape[1] > 4 * kk + 8:
        # keep a superset of the kk best (plus all ties at the boundary)
        kth = np.partition(d, kk - 1, axis=1)[:, kk - 1:kk]
        keep = d <= kth
        width = int(keep.sum(axis=1).max())
        sel = np.argsort(~keep, axis=1, kind="stable")[:, :width]
        d = np.take_along_axis(d, sel, axis=1)
        cand = np.take_along_axis(cand, sel, axis=1)
        cand_ids = np.take_along_axis(cand_ids, sel, axis=1)
    order = np.lexsort((cand_ids, d), axis=1)[:, :kk]
    dist = np.take_along_axis(d, order, axis=1)
    idx = np.take_along_axis(cand, order, axis=1)
    idx = np.where(np.isinf(dist), -1, idx)
    return dist, idx


def mean_neighbor_distance(dist: np.ndarray, empty_value: float) -> np.ndarray:
    """Row means over the finite entries of a :func:`k_nearest` distance matrix."""
    finite = np.isfinite(dist)
    count = finite.sum(axis=1)
    total = sequential_row_sum(np.where(finite, dist, 0.0))
    out = np.full(len(dist), float(empty_value))
    nz = count > 0
    out[nz] = total[nz] / count[nz]
    return out


# ---------------------------------------------------------------------------
# exclusive epsilon-dominance

def exclusive_eps_dominates(n1: float, q1: float, n2: float, q2: float, epsilon: float) -> bool:
    """Whether (novelty ``n1``, quality ``q1``) exclusively eps-dominates (``n2``, ``q2``).

    Both objectives are maximized. A bounded loss (fraction ``epsilon``) on
    one objective is tolerated only when the other objective gains at least as
    much, proportionally.
    """
    if not (q1 > 0 and q2 > 0):
        raise QualityContractError(f"qualities must be > 0, got {q1!r} and {q2!r}")
    if not (n1 >= 0 and n2 >= 0):
        raise QualityContractError(f"novelty must be >= 0, got {n1!r} and {n2!r}")
    return (n1 >= (1 - epsilon) * n2
            and q1 >= (1 - epsilon) * q2
            and (n1 - n2) * q2 > -(q1 - q2) * n2)


# ---------------------------------------------------------------------------
# grid

def discretize(descriptor, resolution) -> tuple[int, ...]:
    """Cell index of a descriptor in [0, 1]^D (clamped)."""
    cell = []
    for c, r in zip(descriptor, resolution):
        c = min(max(float(c), 0.0), 1.0)
        cell.append(min(math.floor(c * r), r - 1))
    return tuple(cell)


def discretize_many(descriptors: np.ndarray, resolution) -> np.ndarray:
    res = np.asarray(resolution, dtype=np.int64)
    d = np.clip(np.asarray(descriptors, dtype=float), 0.0, 1.0)
    idx = np.floor(d * res).astype(np.int64)
    return np.clip(idx, 0, res - 1)


class GridContainer:
    """MAP-Elites style grid: one elite per cell of a regular partition of [0, 1]^D.

    Novelty of an individual is ``1 - filled/total`` over the ``±subgrid_depth``
    block of cells around its own cell, truncated at the grid border. Local
    quality counts the occupants of that block (other than the individual
    itself) with strictly lower fitness.
    """

    kind = "grid"

    def __init__(self, resolution: Sequence[int], subgrid_depth: int, quality_offset: float = 0.0):
        self.resolution = tuple(int(r) for r in resolution)
        if any(r < 1 for r in self.resolution):
            raise ValueError(f"grid resolution must be >= 1 per dimension, got {self.resolution}")
        if subgrid_depth < 0:
            raise ValueError("subgrid_depth must be >= 0")
        self.subgrid_depth = int(subgrid_depth)
        self.quality_offset = float(quality_offset)
        self._cells: dict[tuple[int, ...], Individual] = {}
        self._by_id: dict[int, Individual] = {}
        self._cell_of_id: dict[int, tuple[int, ...]] = {}
        self._occupied = np.zeros(self.resolution, dtype=np.int64)
        self._fitness = np.full(self.resolution, np.nan)
        self._sat = None

    @property
    def dim(self) -> int:
        return len(self.resolution)

    def __len__(self):
        return len(self._cells)

    def __contains__(self, ind_id: int):
        return ind_id in self._by_id

    def get(self, ind_id: int) -> Individual | None:
        return self._by_id.get(ind_id)

    def members(self) -> list[Individual]:
        return list(self._cells.values())

    def cell_of(self, ind: Individual) -> tuple[int, ...]:
        cell = self._cell_of_id.get(ind.id)
        return cell if cell is not None else discretize(ind.descriptor, self.resolution)

    def add(self, ind: Individual) -> AddOutcome:
        cell = discretize(ind.descriptor, self.resolution)
        incumbent = self._cells.get(cell)
        if incumbent is not None and not ind.fitness > incumbent.fitness:
            return _rejected("not better than cell incumbent")
        self._cells[cell] = ind
        self._by_id[ind.id] = ind
        self._cell_of_id[ind.id] = cell
        self._fitness[cell] = ind.fitness
        if incumbent is None:
            self._occupied[cell] = 1
            self._sat = None
            return _added()
        del self._by_id[incumbent.id]
        del self._cell_of_id[incumbent.id]
        return _replaced(incumbent.id)

    # -- scores -------------------------------------------------------------
    def _summed_area(self) -> np.ndarray:
        if self._sat is None:
            sat = np.zeros(tuple(r + 1 for r in self.resolution), dtype=np.int64)
            inner = self._occupied
            for ax in range(self.dim):
                inner = np.cumsum(inner, axis=ax)
            sat[(slice(1, None),) * self.dim] = inner
            self._sat = sat
        return self._sat

    def _bounds(self, cells: np.ndarray):
        res = np.asarray(self.resolution)
        lo = np.maximum(cells - self.subgrid_depth, 0)
        hi = np.minimum(cells + self.subgrid_depth, res - 1)
        return lo, hi

    def filled_and_total(self, cells: np.ndarray):
        """Filled and in-bounds cell counts of the sub-grid around each cell."""
        cells = np.atleast_2d(np.asarray(cells, dtype=np.int64))
        lo, hi = self._bounds(cells)
        sat = self._summed_area()
        filled = np.zeros(len(cells), dtype=np.int64)
        for corner in itertools.product((0, 1), repeat=self.dim):
            idx = tuple(np.where(bit, hi[:, d] + 1, lo[:, d]) for d, bit in enumerate(corner))
            sign = -1 if (self.dim - sum(corner)) % 2 else 1
            filled += sign * sat[idx]
        total = np.prod(hi - lo + 1, axis=1)
        return filled, total

    def _cells_of(self, inds: Sequence[Individual]) -> np.ndarray:
        if not inds:
            return np.zeros((0, self.dim), dtype=np.int64)
        return np.array([self.cell_of(i) for i in inds], dtype=np.int64).reshape(len(inds), self.dim)

    def novelty_of(self, inds: Sequence[Individual]) -> np.ndarray:
        if not inds:
            return np.zeros(0)
        filled, total = self.filled_and_total(self._cells_of(inds))
        return 1.0 - filled / total

    def local_quality_of(self, inds: Sequence[Individual]) -> np.ndarray:
        out = np.zeros(len(inds), dtype=np.int64)
        for n, ind in enumerate(inds):
            cell = np.asarray(self.cell_of(ind))
            lo, hi = self._bounds(cell[None, :])
            block = tuple(slice(a, b + 1) for a, b in zip(lo[0], hi[0]))
            # the individual never beats itself; a different occupant of its
            # own cell counts like any other neighbor
            out[n] = np.count_nonzero(self._fitness[block] < ind.fitness)
        return out

    def _all_local_quality(self, cells: np.ndarray) -> np.ndarray:
        k = self.subgrid_depth
        padded = np.pad(self._fitness, k, mode="constant", constant_values=np.nan)
        own = self._fitness[tuple(cells.T)]
        count = np.zeros(len(cells), dtype=np.int64)
        for off in itertools.product(range(-k, k + 1), repeat=self.dim):
            if not any(off):
                continue
            idx = tuple(cells[:, d] + k + off[d] for d in range(self.dim))
            count += padded[idx] < own
        return count

    def update(self) -> None:
        """Recompute cached novelty and local quality of every member."""
        if not self._cells:
            return
        members = list(self._cells.values())
        cells = np.array(list(self._cells.keys()), dtype=np.int64).reshape(len(members), self.dim)
        filled, total = self.filled_and_total(cells)
        novelty = 1.0 - filled / total
        lq = self._all_local_quality(cells)
        for ind, nv, q in zip(members, novelty.tolist(), lq.tolist()):
            ind.novelty = nv
            ind.local_quality = q


# ---------------------------------------------------------------------------
# archive

class ArchiveContainer:
    """Unstructured archive whose members are pairwise more than ``l`` apart.

    A candidate is added when its nearest member lies further than ``l``.
    Otherwise it may replace that nearest member, provided its second nearest
    member lies further than ``l`` and it exclusively eps-dominates the
    incumbent on (novelty, quality). Novelty is the mean distance to the
    ``k_nn`` nearest members; quality is ``fitness + quality_offset``.
    """

    kind = "archive"

    def __init__(self, l: float, epsilon: float, k_nn: int = 15, quality_offset: float = 0.0,
                 descriptor_size: int = 2, use_tree: bool = True):
        if not l > 0:
            raise ValueError("l must be > 0")
        if not 0 <= epsilon < 1:
            raise ValueError("epsilon must lie in [0, 1)")
        if k_nn < 1:
            raise ValueError("k_nn must be >= 1")
        self.l = float(l)
        self.epsilon = float(epsilon)
        self.k_nn = int(k_nn)
        self.quality_offset = float(quality_offset)
        self.descriptor_size = int(descriptor_size)
        self.use_tree = use_tree
        self.diameter = math.sqrt(self.descriptor_size)
        self._members: list[Individual] = []
        self._slot: dict[int, int] = {}
        # descriptors stored column-wise so distance scans read contiguous memory
        self._cols = np.empty((self.descriptor_size, 64))
        self._ids = np.empty(64, dtype=np.int64)
        self._fit = np.empty(64)
        self.quality_regressions = 0

    def __len__(self):
        return len(self._members)

    def __contains__(self, ind_id: int):
        return ind_id in self._slot

    def get(self, ind_id: int) -> Individual | None:
        slot = self._slot.get(ind_id)
        return None if slot is None else self._members[slot]

    def members(self) -> list[Individual]:
        return list(self._members)

    @property
    def descriptors(self) -> np.ndarray:
        return self._cols[:, :len(self._members)].T

    def quality(self, ind: Individual) -> float:
        return ind.fitness + self.quality_offset

    def _store(self, slot: int, ind: Individual) -> None:
        if slot == len(self._members):
            if slot == len(self._ids):
                cap = 2 * slot
                cols = np.empty((self.descriptor_size, cap))
                cols[:, :slot] = self._cols
                self._cols = cols
                self._ids = np.resize(self._ids, cap)
                self._fit = np.resize(self._fit, cap)
            self._members.append(ind)
        else:
            del self._slot[self._members[slot].id]
            self._members[slot] = ind
        self._slot[ind.id] = slot
        self._cols[:, slot] = ind.descriptor
        self._ids[slot] = ind.id
        self._fit[slot] = ind.fitness

    def _sq_dist(self, x) -> np.ndarray:
        # same operation order as distances(), minus the final square root
        n = len(self._members)
        acc = self._cols[0, :n] - x[0]
        acc *= acc
        for j in range(1, self.descriptor_size):
            t = self._cols[j, :n] - x[j]
            t *= t
            acc += t
        return acc

    def _mean_k_smallest(self, sq: np.ndarray, n_valid: int) -> float:
        """Mean of the k smallest distances; ``sq`` holds squared distances, ``inf`` = excluded."""
        if n_valid == 0:
            return self.diameter
        kk = min(self.k_nn, n_valid)
        d = np.sqrt(np.sort(np.partition(sq, kk - 1)[:kk]))
        return sum(d.tolist()) / kk

    def add(self, ind: Individual) -> AddOutcome:
        q_new = self.quality(ind)
        if not q_new > 0:
            raise QualityContractError(
                f"individual {ind.id}: quality {q_new!r} <= 0; raise quality_offset")
        n = len(self._members)
        if n == 0:
            self._store(0, ind)
            return _added()
        sq = self._sq_dist(ind.descriptor)
        i1 = int(np.argmin(sq))
        if math.sqrt(sq[i1]) > self.l:
            self._store(n, ind)
            return _added()
        sq[i1] = np.inf
        if n > 1 and not math.sqrt(sq.min()) > self.l:
            return _rejected("second nearest neighbor within l")
        # both contenders are scored against the archive minus the incumbent
        incumbent = self._members[i1]
        n_new = self._mean_k_smallest(sq, n - 1)
        sq_old = self._sq_dist(self._cols[:, i1])
        sq_old[i1] = np.inf
        n_old = self._mean_k_smallest(sq_old, n - 1)
        q_old = self.quality(incumbent)
        if not exclusive_eps_dominates(n_new, q_new, n_old, q_old, self.epsilon):
            return _rejected("does not dominate nearest neighbor")
        if q_new < q_old:
            self.quality_regressions += 1
            logger.debug("archive replacement lowers quality: %s -> %s", q_old, q_new)
        self._store(i1, ind)
        return _replaced(incumbent.id)

    # -- scores -------------------------------------------------------------
    def _neighbors(self, inds: Sequence[Individual]):
        n = len(self._members)
        queries = np.array([i.descriptor for i in inds], dtype=float).reshape(len(inds), self.descriptor_size)
        qids = np.array([i.id for i in inds], dtype=np.int64)
        return k_nearest(self.descriptors, self._ids[:n], queries, qids, self.k_nn, self.use_tree)

    def novelty_of(self, inds: Sequence[Individual]) -> np.ndarray:
        dist, _ = self._neighbors(inds)
        return mean_neighbor_distance(dist, self.diameter)

    def local_quality_of(self, inds: Sequence[Individual]) -> np.ndarray:
        _, idx = self._neighbors(inds)
        return _count_worse(idx, self._fit[:len(self._members)], np.array([i.fitness for i in inds]))

    def update(self) -> None:
        """Recompute cached novelty and local quality of every member."""
        if not self._members:
            return
        dist, idx = self._neighbors(self._members)
        novelty = mean_neighbor_distance(dist, self.diameter)
        lq = _count_worse(idx, self._fit[:len(self._members)], self._fit[:len(self._members)])
        for ind, nv, q in zip(self._members, novelty.tolist(), lq.tolist()):
            ind.novelty = nv
            ind.local_quality = q


def _count_worse(idx: np.ndarray, fit: np.ndarray, own: np.ndarray) -> np.ndarray:
    if idx.shape[1] == 0:
        return np.zeros(len(idx), dtype=np.int64)
    valid = idx >= 0
    neigh = np.where(valid, fit[np.where(valid, idx, 0)], np.inf)
    return np.count_nonzero(neigh < own[:, None], axis=1)


def min_pairwise_distance(points: np.ndarray) -> float:
    """Smallest pairwise distance by exhaustive blocked scan (``inf`` if < 2 points)."""
    n = len(points)
    best = math.inf
    for i in range(n - 1):
        d = distances(points[i + 1:], points[i])
        best = min(best, float(d.min()))
    return best


def make_container(kind: str, *, resolution=None, subgrid_depth=None, l=None, epsilon=None,
                   k_nn=15, quality_offset=0.0, descriptor_size=2):
    if kind == "grid":
        return GridContainer(resolution, subgrid_depth, quality_offset)
    if kind == "archive":
        return ArchiveContainer(l, epsilon, k_nn, quality_offset, descriptor_size)
    raise ValueError(f"unknown container kind {kind!r}")

