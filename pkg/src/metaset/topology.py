"""Connected-component labeling on periodic (toroidal) grids."""
import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


def _structure(ndim, connectivity):
    if connectivity == "face":
        return ndimage.generate_binary_structure(ndim, 1)
    if connectivity == "full":
        return ndimage.generate_binary_structure(ndim, ndim)
    raise ValueError(f"connectivity must be 'face' or 'full', got {connectivity!r}")


def label_periodic(mask, connectivity="full"):
    """Label connected components of ``mask`` with periodic wraparound.

    ``connectivity`` is ``"face"`` (4/6-connected) or ``"full"`` (8/26).
    Returns ``(labels, count)`` with labels ``1..count`` and 0 for background.
    Labels are ordered by first occurrence in C order.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return np.zeros(mask.shape, dtype=np.int64), 0
    padded = np.pad(mask, 1, mode="wrap")
    plabels, n = ndimage.label(padded, structure=_structure(mask.ndim, connectivity))

    # every padded voxel is a copy of some original voxel; merge their labels
    inner = tuple(slice(1, -1) for _ in range(mask.ndim))
    idx = [np.arange(s + 2) for s in mask.shape]
    src = np.ix_(*[(i - 1) % s + 1 for i, s in zip(idx, mask.shape)])
    a = plabels.ravel()
    b = plabels[src].ravel()
    keep = (a > 0) & (a != b)
    graph = coo_matrix(
        (np.ones(keep.sum(), dtype=np.int8), (a[keep], b[keep])), shape=(n + 1, n + 1)
    )
    _, merged = connected_components(graph, directed=False)

    core = plabels[inner]
    labels = np.where(core > 0, merged[core], -1)
    # renumber 1..count by first appearance
    flat = labels.ravel()
    fg = flat >= 0
    uniq, first = np.unique(flat[fg], return_index=True)
    order = np.argsort(first)
    remap = np.zeros(uniq.max() + 1, dtype=np.int64)
    remap[uniq[order]] = np.arange(1, len(uniq) + 1)
    out = np.zeros(flat.shape, dtype=np.int64)
    out[fg] = remap[flat[fg]]
    return out.reshape(mask.shape), len(uniq)


def count_components(mask, connectivity="full"):
    return label_periodic(mask, connectivity)[1]


def largest_component(mask, connectivity="full"):
    """Keep only the largest periodic component (ties go to the lowest label)."""
    labels, count = label_periodic(mask, connectivity)
    if count <= 1:
        return np.asarray(mask, dtype=bool).copy()
    sizes = np.bincount(labels.ravel())[1:]
    return labels == (int(np.argmax(sizes)) + 1)


def percolates(mask, connectivity="full"):
    """True when every component of ``mask`` joins its own periodic images.

    A component that fails to wrap around some axis falls apart into
    several pieces once the cell is tiled twice along every axis.
    """
    mask = np.asarray(mask, dtype=bool)
    count = count_components(mask, connectivity)
    if count == 0:
        return False
    tiled = np.tile(mask, (2,) * mask.ndim)
    return count_components(tiled, connectivity) == count
