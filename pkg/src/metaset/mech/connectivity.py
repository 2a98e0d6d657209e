"""Connectivity between neighbouring cells of an aperiodic assembly.

An assembly is a ``rows x cols`` grid of binary cells (row 0 on top).  Two
orthogonal neighbours touch when at least one interface pixel pair is
solid on both sides.
"""
from __future__ import annotations

import numpy as np


def _solid(cell):
    return np.asarray(cell.solid if hasattr(cell, "solid") else cell, dtype=bool)


def _grid(assembly):
    grid = [[_solid(c) for c in row] for row in assembly]
    if not grid or not grid[0] or len({len(r) for r in grid}) != 1:
        raise ValueError("assembly must be a non-empty rectangular grid")
    return grid


def _pairs(rows, cols):
    """Interior interfaces as ``((r, c), (r2, c2), axis)``; axis 1 = horizontal neighbours."""
    out = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                out.append(((r, c), (r, c + 1), 1))
            if r + 1 < rows:
                out.append(((r, c), (r + 1, c), 0))
    return out


def _edges(a, b, axis):
    """Facing boundary lines: ``a`` left of / above ``b``."""
    if axis == 1:
        return a[:, -1], b[:, 0]
    return a[-1, :], b[0, :]


def interface_touches(a, b, axis):
    ea, eb = _edges(_solid(a), _solid(b), axis)
    if ea.shape != eb.shape:
        raise ValueError("neighbouring cells have different edge lengths")
    return bool(np.any(ea & eb))


def interface_ratio(a, b, axis):
    """Share of solid boundary positions where only one side is solid."""
    ea, eb = _edges(_solid(a), _solid(b), axis)
    if ea.shape != eb.shape:
        raise ValueError("neighbouring cells have different edge lengths")
    any_solid = np.count_nonzero(ea | eb)
    if any_solid == 0:
        return 0.0
    return np.count_nonzero(ea ^ eb) / any_solid


def _largest_group(n, edges):
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    sizes = {}
    for i in range(n):
        root = find(i)
        sizes[root] = sizes.get(root, 0) + 1
    return max(sizes.values())


def n_disconnected(assembly):
    """Cells outside the largest component of the contact graph."""
    grid = _grid(assembly)
    rows, cols = len(grid), len(grid[0])
    edges = [(r * cols + c, r2 * cols + c2)
             for (r, c), (r2, c2), axis in _pairs(rows, cols)
             if interface_touches(grid[r][c], grid[r2][c2], axis)]
    return rows * cols - _largest_group(rows * cols, edges)


def r_disconnected(assembly):
    """Mean mismatched-solid ratio over all interior interfaces."""
    grid = _grid(assembly)
    rows, cols = len(grid), len(grid[0])
    pairs = _pairs(rows, cols)
    if not pairs:
        return 0.0
    return float(np.mean([interface_ratio(grid[r][c], grid[r2][c2], axis)
                          for (r, c), (r2, c2), axis in pairs]))


class InterfaceTables:
    """Pairwise interface tables over a dataset for fast repeated queries.

    ``touch_h[a, b]`` / ``ratio_h[a, b]`` describe cell ``a`` placed left of
    ``b``; the ``_v`` tables describe ``a`` placed above ``b``.
    """

    def __init__(self, cells):
        solids = [_solid(c) for c in cells]
        if len({s.shape for s in solids}) != 1:
            raise ValueError("dataset cells must share one resolution")
        left = np.array([s[:, 0] for s in solids])
        right = np.array([s[:, -1] for s in solids])
        top = np.array([s[0, :] for s in solids])
        bottom = np.array([s[-1, :] for s in solids])
        self.touch_h, self.ratio_h = self._tables(right, left)
        self.touch_v, self.ratio_v = self._tables(bottom, top)
        self.size = len(solids)

    @staticmethod
    def _tables(first, second):
        a = first.astype(np.int64)
        b = second.astype(np.int64)
        both = a @ b.T
        either = a.sum(1)[:, None] + b.sum(1)[None, :] - both
        ratio = np.where(either > 0, (either - both) / np.maximum(either, 1), 0.0)
        return both > 0, ratio

    def n_dc(self, genes, rows, cols):
        g = np.asarray(genes).reshape(rows, cols)
        edges = []
        for (r, c), (r2, c2), axis in _pairs(rows, cols):
            table = self.touch_h if axis == 1 else self.touch_v
            if table[g[r, c], g[r2, c2]]:
                edges.append((r * cols + c, r2 * cols + c2))
        return rows * cols - _largest_group(rows * cols, edges)

    def r_dc(self, genes, rows, cols):
        g = np.asarray(genes).reshape(rows, cols)
        ratios = [(self.ratio_h if axis == 1 else self.ratio_v)[g[r, c], g[r2, c2]]
                  for (r, c), (r2, c2), axis in _pairs(rows, cols)]
        return float(np.mean(ratios)) if ratios else 0.0
