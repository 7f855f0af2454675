import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from helpers import make_ind
from oracles import pareto_fronts
from qdopt.config import SelectorConfig
from qdopt.containers import GridContainer
from qdopt.selection import (crowding_distance, fast_non_dominated_sort, make_selector, pareto_order,
                             roulette, roulette_weights, select_pareto, select_population,
                             select_score_proportionate, select_uniform, tournament, union_by_id)


def test_uniform_selection_is_uniform(rng):
    members = [make_ind(i, [0.5, 0.5]) for i in range(10)]
    picks = select_uniform(members, 50_000, rng)
    counts = np.bincount([p.id for p in picks], minlength=10)
    assert chisquare(counts).pvalue > 1e-3


def test_uniform_selection_empty_is_fresh_batch(rng):
    assert select_uniform([], 10, rng) is None


def test_roulette_weights_shift_and_floor():
    w = roulette_weights([-3.0, -1.0, 1.0])
    assert w[0] == pytest.approx(4e-6)  # 1e-6 times the score range
    assert w[2] - w[0] == pytest.approx(4.0)
    assert np.all(w > 0)
    assert np.allclose(roulette_weights([0.2, 0.2, 0.2]), 1e-6)


def test_score_proportionate_frequencies(rng):
    members = [make_ind(i, [0.5, 0.5]) for i in range(4)]
    scores = np.array([0.0, 1.0, 2.0, 3.0])
    picks = select_score_proportionate(members, scores, 60_000, rng)
    counts = np.bincount([p.id for p in picks], minlength=4)
    w = roulette_weights(scores)
    assert chisquare(counts, w / w.sum() * counts.sum()).pvalue > 1e-3
    assert counts[0] < 10


def test_roulette_index_range(rng):
    idx = roulette(np.array([1.0, 0.0, 2.0]), 10_000, rng)
    assert set(np.unique(idx)) == {0, 2}


def test_tournament_size_two_probabilities(rng):
    # with distinct contestants, the j-th worst of n wins 2*j / (n*(n-1)) of the time
    scores = np.array([0.4, 0.1, 0.3, 0.2])
    ids = np.arange(4)
    wins = np.bincount(tournament(scores, ids, 60_000, 2, rng), minlength=4)
    exact = np.zeros(4)
    for a, b in itertools.combinations(range(4), 2):
        exact[a if scores[a] > scores[b] else b] += 1 / 6
    assert wins[1] == 0
    live = exact > 0
    assert chisquare(wins[live], exact[live] * 60_000).pvalue > 1e-3


def test_tournament_tie_goes_to_lower_id(rng):
    winners = tournament(np.zeros(2), np.array([7, 3]), 100, 2, rng)
    assert np.all(winners == 1)


def test_tournament_larger_than_pool(rng):
    winners = tournament(np.array([1.0, 5.0, 2.0]), np.arange(3), 20, 10, rng)
    assert np.all(winners == 1)


def test_union_by_id_deduplicates():
    a = make_ind(1, [0, 0])
    pool = union_by_id([a, make_ind(2, [0, 0])], [a, make_ind(3, [0, 0])])
    assert [p.id for p in pool] == [1, 2, 3]
    assert pool[0] is a


def test_population_selection_on_fitness(rng):
    parents = [make_ind(i, [0.5, 0.5], -i) for i in range(5)]
    offspring = [make_ind(10 + i, [0.5, 0.5], -i - 0.5) for i in range(5)]
    chosen = select_population(parents, offspring, lambda pool: np.array([p.fitness for p in pool]),
                               1000, rng)
    assert len(chosen) == 1000
    assert all(c.id != 14 for c in chosen)  # the worst never wins a tournament


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=1, max_size=60))
def test_non_dominated_sort_matches_peeling(points):
    fronts = fast_non_dominated_sort(np.array(points, dtype=float))
    assert [sorted(f.tolist()) for f in fronts] == pareto_fronts(points)


def test_non_dominated_sort_three_objectives(rng):
    for _ in range(20):
        pts = rng.integers(0, 5, size=(int(rng.integers(1, 80)), 3)).tolist()
        got = [sorted(f.tolist()) for f in fast_non_dominated_sort(np.array(pts, dtype=float))]
        assert got == pareto_fronts(pts)


def test_crowding_distance_hand_example():
    f = np.array([[0.0, 4.0], [1.0, 3.0], [3.0, 1.0], [4.0, 0.0]])
    cd = crowding_distance(f)
    assert np.isinf(cd[0]) and np.isinf(cd[3])
    assert cd[1] == pytest.approx(3 / 4 + 3 / 4)
    assert cd[2] == pytest.approx(3 / 4 + 3 / 4)
    f = np.array([[0.0, 4.0], [1.0, 3.0], [2.0, 2.0], [4.0, 0.0]])
    cd = crowding_distance(f)
    assert cd[1] == pytest.approx(2 / 4 + 2 / 4)
    assert cd[2] == pytest.approx(3 / 4 + 3 / 4)


def test_pareto_order_prefers_first_front_then_spread():
    f = np.array([[0.0, 4.0], [2.0, 2.0], [4.0, 0.0], [1.0, 1.0], [1.9, 1.9]])
    order = pareto_order(f, np.arange(5)).tolist()
    assert set(order[:3]) == {0, 1, 2}
    assert order[3:] == [4, 3]


def test_select_pareto_returns_batch(rng):
    grid = GridContainer((10, 10), 1, quality_offset=1.0)
    inds = [make_ind(i, rng.random(2), float(-rng.random())) for i in range(30)]
    for ind in inds:
        grid.add(ind)
    chosen = select_pareto(inds[:15], inds[15:], grid, 20, rng)
    assert len(chosen) == 20 and len({c.id for c in chosen}) == 20
    small = select_pareto(inds[:2], inds[2:3], grid, 7, rng)
    assert len(small) == 7


@pytest.mark.parametrize("kind, score", [("none", None), ("uniform", None), ("score", "fitness"),
                                         ("score", "curiosity"), ("score", "novelty"),
                                         ("population", "fitness"), ("population", "novelty"),
                                         ("population", "curiosity"), ("pareto", None)])
def test_selectors_on_empty_container_request_fresh_batch(kind, score, rng):
    sel = make_selector(SelectorConfig(kind, score))
    grid = GridContainer((10, 10), 1)
    assert sel(grid, [], [], 5, rng) is None


def test_selector_config_validation():
    with pytest.raises(ValueError):
        SelectorConfig("score", None)
    with pytest.raises(ValueError):
        SelectorConfig("uniform", "fitness")
