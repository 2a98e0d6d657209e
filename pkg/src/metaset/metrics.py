"""Shape and property similarity between unit cells.

Distances are turned into similarity kernels for the DPP: an RBF with unit
bandwidth for descriptor and property distances, ``1 / (1 + d)`` for
Hausdorff distances (followed by a PSD repair), and cosine similarity for
embedding vectors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .spatial import hausdorff_matrix

DESCRIPTOR_ROUNDS = 7


@dataclass
class UnitCell2D:
    """Binary pixel cell; ``solid`` is indexed ``[y, x]``."""

    solid: np.ndarray
    properties: np.ndarray | None = None
    cell_id: str = ""

    @property
    def height(self):
        return self.solid.shape[0]

    @property
    def width(self):
        return self.solid.shape[1]

    @property
    def volume_fraction(self):
        return np.count_nonzero(self.solid) / self.solid.size


# --- 2D division-point descriptor ------------------------------------------------

def _split(profile, lo):
    """Split position by the >=-half cumulative rule.

    ``profile`` holds per-column (or per-row) solid counts of a region whose
    first column sits at ``lo``.  The line goes after the first column whose
    running count reaches half the region total.
    """
    cum = np.cumsum(profile)
    k = int(np.searchsorted(cum, cum[-1] / 2.0, side="left"))
    return float(lo + k + 1)


def descriptor2d(solid, rounds=DESCRIPTOR_ROUNDS):
    """Division-point shape descriptor of a binary cell.

    The cell is split recursively into regions holding equal solid counts,
    alternating vertical and horizontal lines and starting with a vertical
    one.  ``rounds`` counts tree levels including the whole cell, so
    ``rounds=7`` gives ``2**6 - 1 = 63`` lines.  Each line after the first
    meets its parent line at one point; the ``2**(rounds-1) - 2`` points are
    emitted depth first as ``(x / width, y / height)`` pairs.

    Regions without solid pixels (or with fractional bounds, which only
    arise inside such regions) are split at their geometric midpoint.
    """
    solid = np.asarray(solid, dtype=bool)
    if solid.ndim != 2:
        raise ValueError("descriptor2d expects a 2D cell")
    if not solid.any():
        raise ValueError("descriptor2d needs at least one solid pixel")
    h, w = solid.shape
    counts = solid.astype(np.int64)
    points = []

    def place(x0, x1, y0, y1, vertical):
        lo, hi = (x0, x1) if vertical else (y0, y1)
        if all(float(v).is_integer() for v in (x0, x1, y0, y1)) and hi > lo:
            sub = counts[int(y0):int(y1), int(x0):int(x1)]
            profile = sub.sum(axis=0 if vertical else 1)
            if profile.sum() > 0:
                return _split(profile, lo)
        return 0.5 * (lo + hi)

    def recurse(x0, x1, y0, y1, level, vertical, parent):
        if level >= rounds - 1:
            return
        line = place(x0, x1, y0, y1, vertical)
        if vertical:
            if parent is not None:
                points.append((line, parent))
            recurse(x0, line, y0, y1, level + 1, False, line)
            recurse(line, x1, y0, y1, level + 1, False, line)
        else:
            if parent is not None:
                points.append((parent, line))
            recurse(x0, x1, y0, line, level + 1, True, line)
            recurse(x0, x1, line, y1, level + 1, True, line)

    recurse(0.0, float(w), 0.0, float(h), 0, True, None)
    pts = np.asarray(points, dtype=float)
    pts[:, 0] /= w
    pts[:, 1] /= h
    return pts.ravel()


def descriptor_length(rounds=DESCRIPTOR_ROUNDS):
    return 2 * (2 ** (rounds - 1) - 2)


# --- kernels -----------------------------------------------------------------

def euclidean_distances(vectors):
    """Pairwise Euclidean distance matrix with exact symmetry and zero diagonal."""
    x = np.asarray(vectors, dtype=float)
    if len(x) < 2:
        return np.zeros((len(x), len(x)))
    return squareform(pdist(x, "euclidean"))


def rbf_kernel(d):
    """``exp(-0.5 d^2)``: unit-bandwidth Gaussian kernel."""
    d = np.asarray(d, dtype=float)
    return np.exp(-0.5 * d * d)


def reciprocal_kernel(d, repair=True):
    """``1 / (1 + d)``, optionally projected onto the PSD cone."""
    k = 1.0 / (1.0 + np.asarray(d, dtype=float))
    return repair_psd(k) if repair else k


def min_eigenvalue(k):
    return float(np.linalg.eigvalsh(0.5 * (k + k.T)).min())


def repair_psd(k, floor=1e-10):
    """Clip negative eigenvalues and renormalize the diagonal to one.

    Kernels that are already PSD are returned unchanged (symmetrized).
    Clipping goes to ``floor`` rather than 0 so the repaired matrix stays
    numerically PSD; congruence with ``diag(k)^-1/2`` preserves that.
    """
    k = 0.5 * (np.asarray(k, dtype=float) + np.asarray(k, dtype=float).T)
    vals, vecs = np.linalg.eigh(k)
    if vals.min() >= 0:
        return k
    vals = np.maximum(vals, floor)
    fixed = (vecs * vals) @ vecs.T
    fixed = 0.5 * (fixed + fixed.T)
    scale = 1.0 / np.sqrt(np.diag(fixed))
    fixed = fixed * scale[:, None] * scale[None, :]
    np.fill_diagonal(fixed, 1.0)
    return fixed


def cosine_kernel(embeddings):
    """Cosine similarity Gram matrix; PSD by construction."""
    e = np.asarray(embeddings, dtype=float)
    norms = np.linalg.norm(e, axis=1)
    if np.any(norms == 0):
        raise ValueError("cosine similarity undefined for a zero embedding")
    u = e / norms[:, None]
    k = np.clip(u @ u.T, -1.0, 1.0)
    k = 0.5 * (k + k.T)
    np.fill_diagonal(k, 1.0)
    return k


def cosine_distances(embeddings):
    return 1.0 - cosine_kernel(embeddings)


def normalize_properties(props):
    """Per-dimension min-max scaling to ``[0, 1]``; constant columns map to 0."""
    p = np.asarray(props, dtype=float)
    lo = p.min(axis=0)
    span = p.max(axis=0) - lo
    span[span == 0] = 1.0
    return (p - lo) / span


def property_distance(props, normalize=True):
    p = np.asarray(props, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    if normalize:
        p = normalize_properties(p)
    return euclidean_distances(p)


def descriptor_distance(cells, rounds=DESCRIPTOR_ROUNDS):
    descs = np.array([descriptor2d(_solid_of(c), rounds) for c in cells])
    return euclidean_distances(descs)


def _solid_of(cell):
    return cell.solid if hasattr(cell, "solid") else np.asarray(cell, dtype=bool)


# --- inter-family distances ------------------------------------------------------

def interfamily_distance(cross):
    """Symmetric Hausdorff distance between two families.

    ``cross[i, j]`` is the member-level distance between member ``i`` of
    the first family and member ``j`` of the second.
    """
    cross = np.asarray(cross, dtype=float)
    return float(max(cross.min(axis=1).max(), cross.min(axis=0).max()))


def family_distance_matrix(member_dist, labels):
    """Aggregate a member distance matrix into family-level distances.

    ``labels`` assigns each member to a family; families are ordered by
    first appearance.
    """
    labels = list(labels)
    order = list(dict.fromkeys(labels))
    groups = [np.flatnonzero(np.array([lab == f for lab in labels])) for f in order]
    n = len(groups)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = interfamily_distance(member_dist[np.ix_(groups[i], groups[j])])
            out[i, j] = out[j, i] = d
    return out, order


def member_distances(items, base):
    """Member-level distances for ``base`` in {hausdorff, cosine, euclidean}."""
    if base == "hausdorff":
        return hausdorff_matrix(items)
    if base == "cosine":
        d = cosine_distances(items)
        np.fill_diagonal(d, 0.0)
        return np.maximum(d, 0.0)
    if base == "euclidean":
        return property_distance(items)
    raise ValueError(f"unknown base metric {base!r}")


def correlation_of_similarities(ks, kp, pairs=100_000, seed=0):
    """Pearson correlation of shape vs property similarity over random pairs."""
    n = ks.shape[0]
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, size=pairs)
    j = rng.integers(0, n, size=pairs)
    keep = i != j
    a, b = ks[i[keep], j[keep]], kp[i[keep], j[keep]]
    if a.std() == 0 or b.std() == 0:
        return 0.0
    return float(np.corrcoef(a, b)[0, 1])


# --- synthetic embeddings ----------------------------------------------------------

def _coarse_occupancy(solid, grid):
    """Block-averaged occupancy on a ``grid^ndim`` lattice."""
    solid = np.asarray(solid, dtype=float)
    n = solid.shape[0]
    bins = (np.arange(n) * grid) // n
    idx = np.ix_(*[bins] * solid.ndim)
    flat = np.ravel_multi_index(tuple(np.broadcast_arrays(*idx)), (grid,) * solid.ndim)
    sums = np.bincount(flat.ravel(), weights=solid.ravel(), minlength=grid ** solid.ndim)
    counts = np.bincount(flat.ravel(), minlength=grid ** solid.ndim)
    return sums / counts


def synthetic_embeddings(solids, dim=64, grid=8, seed=0):
    """Stand-in for learned embeddings: a seeded Gaussian projection of
    coarse occupancy, centred at 0.5 so empty and full blocks pull apart."""
    occ = np.array([_coarse_occupancy(s, grid) - 0.5 for s in solids])
    proj = np.random.default_rng(seed).standard_normal((occ.shape[1], dim)) / np.sqrt(dim)
    return occ @ proj
