"""Finite covers of Lipschitz bidding functions and the cover tree.

Level ``i`` of the cover holds piecewise-constant functions on a uniform
value grid.  Each function picks one bid level per cell on a bid grid of
step ``2**-i / 2``; the value grid has ``ceil(2 L 2**i)`` cells, so an
``L``-Lipschitz function moves by at most one bid step across a cell.
Adjacent cells are allowed to differ by at most one bid step.  For every
``L``-Lipschitz ``f`` into ``[0, 1]``, rounding the per-cell maximum of
``f`` up to the bid grid yields a member ``f'`` with

    f <= f' <= f + 2**-i.

Level 0 is the single constant-1 function.

Covers grow like ``3**cells`` so they are counted before they are built
and a :class:`CapacityError` is raised above ``size_cap``.  Membership and
domination only need the grid, which lets tests probe levels that are far
too large to enumerate.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import CapacityError, InvariantError

DEFAULT_SIZE_CAP = 10**6
DEFAULT_DEPTH_CAP = 3
_ROUND_TOL = 1e-9


@dataclasses.dataclass(frozen=True)
class CoverGrid:
    """Value and bid grids of one cover level."""

    L: float
    level: int

    def __post_init__(self):
        if self.L < 1.0:
            raise ValueError(f"Lipschitz constant must be >= 1, got {self.L}")
        if self.level < 0:
            raise ValueError(f"level must be >= 0, got {self.level}")

    @property
    def n_cells(self) -> int:
        if self.level == 0:
            return 1
        return int(math.ceil(2.0 * self.L * 2.0**self.level - _ROUND_TOL))

    @property
    def delta_v(self) -> float:
        return 1.0 / self.n_cells

    @property
    def n_steps(self) -> int:
        """Number of bid steps; bid levels are ``0..n_steps``."""
        return 1 if self.level == 0 else 2 ** (self.level + 1)

    @property
    def delta_b(self) -> float:
        return 1.0 / self.n_steps

    @property
    def radius(self) -> float:
        return 2.0 ** (-self.level)

    def cell_of(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return np.minimum((v * self.n_cells).astype(np.int64), self.n_cells - 1)

    def contains(self, levels) -> bool:
        """Whether an integer level vector is a member of this cover."""
        levels = np.asarray(levels)
        if levels.shape != (self.n_cells,):
            return False
        if self.level == 0:
            return int(levels[0]) == 1
        if levels.min() < 0 or levels.max() > self.n_steps:
            return False
        return bool(np.all(np.abs(np.diff(levels.astype(np.int64))) <= 1))

    def size(self) -> int:
        """Exact member count, by dynamic programming over cells."""
        if self.level == 0:
            return 1
        n = self.n_steps + 1
        counts = [1] * n
        for _ in range(self.n_cells - 1):
            counts = [
                counts[k]
                + (counts[k - 1] if k > 0 else 0)
                + (counts[k + 1] if k < n - 1 else 0)
                for k in range(n)
            ]
        return sum(counts)


@dataclasses.dataclass
class CoverSet:
    grid: CoverGrid
    levels: np.ndarray  # (n_functions, n_cells) integer bid levels

    def __len__(self) -> int:
        return self.levels.shape[0]

    @property
    def values(self) -> np.ndarray:
        return self.levels * self.grid.delta_b

    def evaluate(self, v) -> np.ndarray:
        """Bids of every member at value(s) ``v``; shape (n_functions, ...)."""
        return self.values[:, self.grid.cell_of(v)]


def build_cover(L: float, level: int, size_cap: int = DEFAULT_SIZE_CAP) -> CoverSet:
    """Enumerate cover level ``level`` in lexicographic order."""
    grid = CoverGrid(float(L), int(level))
    if level == 0:
        return CoverSet(grid, np.ones((1, 1), dtype=np.int8))
    size = grid.size()
    if size > size_cap:
        raise CapacityError(
            f"cover level {level} for L={L} has {size} elements, above the cap {size_cap}"
        )
    rows = np.arange(grid.n_steps + 1, dtype=np.int8)[:, None]
    for _ in range(grid.n_cells - 1):
        last = rows[:, -1].astype(np.int16)
        parts = []
        for step in (-1, 0, 1):
            nxt = last + step
            keep = (nxt >= 0) & (nxt <= grid.n_steps)
            parts.append(np.hstack([rows[keep], nxt[keep, None].astype(np.int8)]))
        rows = np.vstack(parts)
    order = np.lexsort(rows.T[::-1])
    rows = np.ascontiguousarray(rows[order])
    if rows.shape[0] != size:
        raise InvariantError("cover enumeration disagrees with its count")
    return CoverSet(grid, rows)


def dominate(f: Callable[[np.ndarray], np.ndarray], cover,
             knots: Optional[Sequence[float]] = None,
             samples_per_cell: int = 65) -> np.ndarray:
    """Integer levels of the member that dominates ``f`` within the cover radius.

    ``cover`` is a CoverSet or a CoverGrid.  The per-cell maximum of ``f`` is
    taken over the cell endpoints, any ``knots`` inside the cell and a
    uniform sample, so it is exact for piecewise-linear ``f`` whose
    breakpoints are passed as knots.
    """
    grid = cover.grid if isinstance(cover, CoverSet) else cover
    if grid.level == 0:
        return np.ones(1, dtype=np.int64)
    n = grid.n_cells
    edges = np.linspace(0.0, 1.0, n + 1)
    pts = [edges[:-1, None] + (edges[1:] - edges[:-1])[:, None]
           * np.linspace(0.0, 1.0, samples_per_cell)[None, :]]
    cell_max = np.asarray(f(pts[0]), dtype=float).max(axis=1)
    if knots is not None and len(knots):
        knots = np.clip(np.asarray(knots, dtype=float), 0.0, 1.0)
        kv = np.asarray(f(knots), dtype=float)
        cells = grid.cell_of(knots)
        np.maximum.at(cell_max, cells, kv)
        # A knot on a shared edge also bounds the cell on its left.
        edge = np.round(knots * n)
        on_edge = (np.abs(knots * n - edge) < _ROUND_TOL) & (edge == cells) & (cells > 0)
        np.maximum.at(cell_max, cells[on_edge] - 1, kv[on_edge])
    levels = np.ceil(cell_max / grid.delta_b - _ROUND_TOL).astype(np.int64)
    levels = np.clip(levels, 0, grid.n_steps)
    if not grid.contains(levels):
        raise ValueError("function is not Lipschitz enough for this cover")
    return levels


def sup_distance(levels_a: np.ndarray, grid_a: CoverGrid,
                 levels_b: np.ndarray, grid_b: CoverGrid) -> np.ndarray:
    """Sup-norm distance between rows of ``levels_a`` and ``levels_b``.

    Rows are broadcast against each other, so passing shapes (n, cells_a)
    and (1, cells_b) returns n distances.
    """
    cuts = np.union1d(np.arange(grid_a.n_cells + 1) / grid_a.n_cells,
                      np.arange(grid_b.n_cells + 1) / grid_b.n_cells)
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    va = levels_a[..., grid_a.cell_of(mids)] * grid_a.delta_b
    vb = levels_b[..., grid_b.cell_of(mids)] * grid_b.delta_b
    return np.abs(va - vb).max(axis=-1)


def _coarsen(levels: np.ndarray, fine: CoverGrid, coarse: CoverGrid) -> np.ndarray:
    """Round the max of each coarse cell up to the coarse bid grid."""
    if coarse.level == 0:
        return np.ones((levels.shape[0], 1), dtype=np.int64)
    nf, nc = fine.n_cells, coarse.n_cells
    out = np.empty((levels.shape[0], nc), dtype=np.int64)
    for c in range(nc):
        lo = int(math.floor(c * nf / nc + _ROUND_TOL))
        hi = int(math.ceil((c + 1) * nf / nc - _ROUND_TOL))
        out[:, c] = levels[:, lo:hi].max(axis=1)
    ratio = coarse.delta_b / fine.delta_b
    return np.minimum(np.ceil(out / ratio - _ROUND_TOL).astype(np.int64), coarse.n_steps)


@dataclasses.dataclass
class CoverTree:
    """Parent-linked cover levels ``0..M`` stored level by level.

    Nodes of each level are ordered so that the children of a node, and
    the leaves below it, are contiguous.  ``child_start[i][k]`` and
    ``leaf_start[i][k]`` are the offsets of node ``k`` of level ``i`` into
    level ``i + 1`` and into the leaves.
    """

    L: float
    grids: List[CoverGrid]
    levels: List[np.ndarray]
    parent: List[np.ndarray]
    child_start: List[np.ndarray]
    leaf_start: List[np.ndarray]
    leaf_table: np.ndarray  # (cells of level M, n_leaves) float bids

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def n_leaves(self) -> int:
        return self.levels[-1].shape[0]

    def n_nodes(self, level: int) -> int:
        return self.levels[level].shape[0]

    def n_children(self, level: int) -> np.ndarray:
        return np.diff(self.child_start[level])

    def goodness(self, level: int) -> float:
        """Goodness width attached to a level, ``2**(3 - level)``."""
        return 2.0 ** (3 - level)

    def leaves_of(self, level: int, node: int) -> range:
        s = self.leaf_start[level]
        return range(int(s[node]), int(s[node + 1]))

    def leaf_bids(self, v: float) -> np.ndarray:
        """Raw (unguarded) bids of every leaf at value ``v``."""
        return self.leaf_table[int(self.grids[-1].cell_of(v))]

    def values(self, level: int) -> np.ndarray:
        return self.levels[level] * self.grids[level].delta_b


def build_tree(L: float, M: int, size_cap: int = DEFAULT_SIZE_CAP) -> CoverTree:
    """Cover levels ``0..M`` linked to their parents, childless nodes pruned."""
    if M < 0:
        raise ValueError("depth must be >= 0")
    grids = [CoverGrid(float(L), i) for i in range(M + 1)]
    levels = [build_cover(L, i, size_cap).levels.astype(np.int64) for i in range(M + 1)]
    parent: List[np.ndarray] = [np.zeros(0, dtype=np.int64)]
    for i in range(1, M + 1):
        parent.append(_assign_parents(levels[i], grids[i], levels[i - 1], grids[i - 1]))

    # Drop internal nodes without children, deepest level first.
    for i in range(M - 1, 0, -1):
        used = np.zeros(levels[i].shape[0], dtype=bool)
        used[parent[i + 1]] = True
        remap = np.cumsum(used) - 1
        levels[i] = levels[i][used]
        parent[i] = parent[i][used]
        parent[i + 1] = remap[parent[i + 1]]

    # Reorder each level so that siblings are contiguous.
    for i in range(1, M + 1):
        order = np.argsort(parent[i], kind="stable")
        levels[i] = levels[i][order]
        parent[i] = parent[i][order]
        if i < M:
            inverse = np.empty_like(order)
            inverse[order] = np.arange(order.size)
            parent[i + 1] = inverse[parent[i + 1]]

    child_start = []
    for i in range(M):
        counts = np.bincount(parent[i + 1], minlength=levels[i].shape[0])
        if np.any(counts == 0):
            raise InvariantError(f"childless node left at level {i}")
        child_start.append(np.concatenate([[0], np.cumsum(counts)]))
    leaf_start: List[np.ndarray] = [np.arange(levels[M].shape[0] + 1)]
    for i in range(M - 1, -1, -1):
        leaf_start.insert(0, leaf_start[0][child_start[i]])
    table = np.ascontiguousarray((levels[M] * grids[M].delta_b).T)
    return CoverTree(float(L), grids, levels, parent, child_start, leaf_start, table)


def _assign_parents(fine_levels, fine, coarse_levels, coarse) -> np.ndarray:
    """Parent of each fine element: its coarsening, else the nearest coarse element."""
    n = fine_levels.shape[0]
    if coarse.level == 0:
        return np.zeros(n, dtype=np.int64)
    bound = 2.0 ** (-fine.level + 1) + 1e-12
    index = {row.tobytes(): k for k, row in enumerate(coarse_levels.astype(np.int64))}
    cand = _coarsen(fine_levels, fine, coarse)
    out = np.empty(n, dtype=np.int64)
    for k in range(n):
        hit = index.get(cand[k].tobytes())
        if hit is None:
            dist = sup_distance(coarse_levels, coarse, fine_levels[k][None, :], fine)
            hit = int(np.argmin(dist))
        out[k] = hit
    dist = sup_distance(fine_levels, fine, coarse_levels[out], coarse)
    if np.any(dist > bound):
        raise InvariantError(
            f"no parent within {bound:.3g} for some level-{fine.level} element"
        )
    return out


def select_depth(L: float, T: int, depth_cap: int = DEFAULT_DEPTH_CAP,
                 size_cap: int = DEFAULT_SIZE_CAP) -> int:
    """Deepest level up to ``min(floor(log2 sqrt T), depth_cap)`` that fits the cap."""
    target = min(int(math.floor(math.log2(math.sqrt(max(T, 1))))), depth_cap)
    m = max(target, 0)
    while m > 0 and CoverGrid(float(L), m).size() > size_cap:
        m -= 1
    return m
