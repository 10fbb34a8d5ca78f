import functools
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from autobid.covers import (CoverGrid, build_cover, build_tree, dominate, select_depth,
                            sup_distance)
from autobid.errors import CapacityError
from autobid.probes import random_lipschitz


def brute_count(n_cells, n_levels):
    return sum(all(abs(a - b) <= 1 for a, b in zip(w, w[1:]))
               for w in itertools.product(range(n_levels), repeat=n_cells))


def walk_count(n_cells, n_levels):
    @functools.lru_cache(maxsize=None)
    def ending_at(cells, k):
        if cells == 1:
            return 1
        return sum(ending_at(cells - 1, j) for j in (k - 1, k, k + 1) if 0 <= j < n_levels)
    return sum(ending_at(n_cells, k) for k in range(n_levels))


def test_grid_shapes():
    g = CoverGrid(1.0, 2)
    assert (g.n_cells, g.n_steps, g.delta_b, g.radius) == (8, 8, 0.125, 0.25)
    assert CoverGrid(2.0, 1).n_cells == 8
    assert CoverGrid(1.5, 1).n_cells == 6
    assert CoverGrid(1.0, 0).n_cells == 1
    with pytest.raises(ValueError):
        CoverGrid(0.5, 1)


def test_sizes_for_unit_lipschitz():
    assert CoverGrid(1.0, 1).size() == brute_count(4, 5) == 95
    assert CoverGrid(1.0, 2).size() == walk_count(8, 9) == 14001
    assert CoverGrid(1.0, 3).size() == walk_count(16, 17) == 184377699
    assert CoverGrid(2.0, 1).size() == brute_count(8, 5)


def test_build_cover_members_are_valid_and_sorted():
    cover = build_cover(1.0, 2)
    assert len(cover) == 14001
    assert all(cover.grid.contains(row) for row in cover.levels[::97])
    keys = [tuple(r) for r in cover.levels]
    assert keys == sorted(keys)
    assert len(set(keys)) == len(keys)


def test_level_zero_is_constant_one():
    cover = build_cover(3.0, 0)
    assert cover.levels.tolist() == [[1]]
    assert np.all(cover.evaluate(np.linspace(0, 1, 5)) == 1.0)


def test_capacity_error_above_cap():
    with pytest.raises(CapacityError):
        build_cover(1.0, 3)
    with pytest.raises(CapacityError):
        build_cover(1.0, 2, size_cap=1000)


def test_select_depth():
    assert select_depth(1.0, 2000) == 2   # level 3 is over the cap
    assert select_depth(1.0, 15) == 1
    assert select_depth(1.0, 1) == 0
    assert select_depth(1.0, 2000, depth_cap=1) == 1


def test_contains_rejects_jumps():
    g = CoverGrid(1.0, 1)
    assert g.contains([0, 1, 2, 3])
    assert not g.contains([0, 2, 2, 2])
    assert not g.contains([0, 1, 2])
    assert not g.contains([0, 1, 2, 5])


@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 2.0, 4.0]), st.integers(0, 4))
@settings(max_examples=60, deadline=None)
def test_dominating_member_sandwiches_function(seed, L, level):
    f, knots = random_lipschitz(np.random.default_rng(seed), L)
    grid = CoverGrid(L, level)
    lv = dominate(f, grid, knots=knots)
    assert grid.contains(lv)
    x = np.linspace(0.0, 1.0, 2001)
    fp = lv[grid.cell_of(x)] * grid.delta_b if level else np.ones_like(x)
    assert np.all(fp >= f(x) - 1e-9)
    assert np.all(fp <= f(x) + grid.radius + 1e-9)


def test_dominate_knot_on_last_edge():
    # A kink exactly at v = 1 must not be treated as a shared cell edge.
    f = lambda x: np.interp(x, [0.0, 0.5, 1.0], [0.0, 0.5, 0.0])
    lv = dominate(f, CoverGrid(1.0, 1), knots=[0.0, 0.5, 1.0])
    assert lv.tolist() == [1, 2, 2, 1]


def test_sup_distance_by_hand():
    a, b = CoverGrid(1.0, 1), CoverGrid(1.0, 2)
    la = np.array([[0, 1, 2, 3]])
    lb = np.array([[0, 0, 2, 2, 4, 4, 6, 6]])
    # Same function on the finer grid.
    assert sup_distance(la, a, lb, b)[0] == 0.0
    lb2 = lb.copy()
    lb2[0, 7] = 8
    assert sup_distance(la, a, lb2, b)[0] == 0.25


@pytest.fixture(scope="module")
def tree2():
    return build_tree(1.0, 2)


def test_tree_counts_and_contiguity(tree2):
    assert tree2.depth == 2
    assert tree2.n_nodes(0) == 1
    assert tree2.n_leaves == 14001
    for i in range(tree2.depth):
        assert tree2.child_start[i][-1] == tree2.n_nodes(i + 1)
        assert np.all(tree2.n_children(i) > 0)
        # Children of each node are a contiguous block of the next level.
        assert np.all(np.diff(tree2.parent[i + 1]) >= 0)
    assert tree2.leaf_start[0].tolist() == [0, 14001]
    assert tree2.goodness(0) == 8.0 and tree2.goodness(2) == 2.0


def test_tree_parent_distances(tree2):
    for i in (1, 2):
        d = sup_distance(tree2.levels[i], tree2.grids[i],
                         tree2.levels[i - 1][tree2.parent[i]], tree2.grids[i - 1])
        assert d.max() <= 2.0 ** (-i + 1) + 1e-12


def test_leaf_bids_table(tree2):
    assert tree2.leaf_bids(0.0).shape == (14001,)
    k = 1234
    row = tree2.levels[2][k]
    assert tree2.leaf_bids(0.6)[k] == row[tree2.grids[2].cell_of(0.6)] * 0.125
