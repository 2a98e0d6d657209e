"""Exact nearest-neighbour queries on a uniform grid, and Hausdorff distances.

Points are bucketed into cubic cells; a query visits shells of cells at
growing Chebyshev radius and stops once no unvisited cell can hold a closer
point.  Squared distances are accumulated as ``dx*dx + dy*dy + dz*dz`` in
every code path, so results match brute force bit for bit.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _sqdist(a, b):
    acc = 0.0
    for k in range(a.shape[0]):
        d = a[k] - b[k]
        acc += d * d
    return acc


@njit(cache=True)
def _grid_query(q, pts, order, starts, counts, lo, size, dims, stop_below):
    """Smallest squared distance from ``q`` to ``pts``.

    Returns early as soon as the running minimum drops to ``stop_below``
    (the caller only needs to know it will not raise a running maximum).
    """
    ndim = q.shape[0]
    cq = np.empty(ndim, dtype=np.int64)
    for k in range(ndim):
        c = int(np.floor((q[k] - lo[k]) / size))
        if c < 0:
            c = 0
        elif c >= dims[k]:
            c = dims[k] - 1
        cq[k] = c
    max_r = 0
    for k in range(ndim):
        r = max(cq[k], dims[k] - 1 - cq[k])
        if r > max_r:
            max_r = r
    best = np.inf
    off = np.empty(ndim, dtype=np.int64)
    for r in range(max_r + 1):
        # enumerate the cells of the shell at Chebyshev radius r
        side = 2 * r + 1
        total = side ** ndim
        for flat in range(total):
            rem = flat
            on_shell = False
            inside = True
            for k in range(ndim):
                o = rem % side - r
                rem //= side
                off[k] = o
                if o == r or o == -r:
                    on_shell = True
                c = cq[k] + o
                if c < 0 or c >= dims[k]:
                    inside = False
            if not on_shell or not inside:
                continue
            cell = 0
            for k in range(ndim - 1, -1, -1):
                cell = cell * dims[k] + (cq[k] + off[k])
            s = starts[cell]
            for j in range(s, s + counts[cell]):
                d = _sqdist(q, pts[order[j]])
                if d < best:
                    best = d
        if best <= stop_below:
            return best
        bound = r * size
        if best <= bound * bound:
            return best
    return best


@njit(cache=True)
def _directed_sq(a, pts, order, starts, counts, lo, size, dims, early_break):
    worst = 0.0
    for i in range(a.shape[0]):
        stop = worst if early_break else -1.0
        d = _grid_query(a[i], pts, order, starts, counts, lo, size, dims, stop)
        if d > worst:
            worst = d
    return worst


@njit(cache=True)
def _nearest_sq(a, pts, order, starts, counts, lo, size, dims):
    out = np.empty(a.shape[0])
    for i in range(a.shape[0]):
        out[i] = _grid_query(a[i], pts, order, starts, counts, lo, size, dims, -1.0)
    return out


class GridIndex:
    """Uniform-grid spatial index over a fixed point set.

    ``cell_size`` defaults to a spacing giving roughly two points per cell.
    """

    def __init__(self, points, cell_size=None):
        pts = np.ascontiguousarray(points, dtype=float)
        if pts.ndim != 2 or len(pts) == 0:
            raise ValueError("points must be a non-empty (n, d) array")
        self.points = pts
        lo = pts.min(axis=0)
        extent = pts.max(axis=0) - lo
        ndim = pts.shape[1]
        if cell_size is None:
            span = max(float(extent.max()), 1e-12)
            cell_size = span / max(1.0, (len(pts) / 2.0) ** (1.0 / ndim))
        self.cell_size = float(cell_size)
        dims = np.maximum(1, np.floor(extent / self.cell_size).astype(np.int64) + 1)
        keys = np.minimum(np.floor((pts - lo) / self.cell_size).astype(np.int64), dims - 1)
        # x-fastest flattening, matching _grid_query
        strides = np.cumprod(np.concatenate([[1], dims[:-1]]))
        flat = keys @ strides
        self.order = np.argsort(flat, kind="stable")
        ncell = int(np.prod(dims))
        self.counts = np.bincount(flat, minlength=ncell).astype(np.int64)
        self.starts = np.concatenate([[0], np.cumsum(self.counts)[:-1]]).astype(np.int64)
        self.lo = lo
        self.dims = dims

    def _args(self):
        return (self.points, self.order, self.starts, self.counts, self.lo,
                self.cell_size, self.dims)

    def nearest_sq(self, queries):
        q = np.ascontiguousarray(queries, dtype=float)
        return _nearest_sq(q, *self._args())

    def nearest(self, queries):
        return np.sqrt(self.nearest_sq(queries))

    def directed_hausdorff(self, queries, early_break=True):
        """``max_q min_p ||q - p||`` over the indexed points ``p``."""
        q = np.ascontiguousarray(queries, dtype=float)
        return float(np.sqrt(_directed_sq(q, *self._args(), early_break)))


def directed_hausdorff(a, b):
    """Directed Hausdorff distance ``h(a, b) = max_a min_b ||a - b||``."""
    return GridIndex(b).directed_hausdorff(a)


def hausdorff(a, b):
    """Symmetric Hausdorff distance ``max(h(a, b), h(b, a))``."""
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


def brute_force_directed_hausdorff(a, b):
    """O(n*m) reference with the same arithmetic as the grid search."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    worst = 0.0
    for p in a:
        diff = b - p
        sq = diff[:, 0] * diff[:, 0]
        for k in range(1, a.shape[1]):
            sq = sq + diff[:, k] * diff[:, k]
        worst = max(worst, float(sq.min()))
    return float(np.sqrt(worst))


def hausdorff_matrix(clouds):
    """Pairwise symmetric Hausdorff distances between point clouds."""
    n = len(clouds)
    indexes = [GridIndex(c) for c in clouds]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = max(indexes[j].directed_hausdorff(clouds[i]),
                    indexes[i].directed_hausdorff(clouds[j]))
            out[i, j] = out[j, i] = d
    return out
