"""Isosurface unit-cell families from periodic level-set expressions.

Density is controlled by bisection on the isovalue, families are screened
for periodic connectivity, and surface point clouds are sampled from
sign-change edges of the voxelized level set.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .expr import FamilyForm, LevelSetExpr, evaluate_grid
from .topology import label_periodic, largest_component, percolates

logger = logging.getLogger(__name__)

DEFAULT_POINTS = 4096
MIN_FEASIBLE_WIDTH = 0.2


class IsovalueError(ValueError):
    """Target density outside the achievable voxelized range."""


@dataclass
class VoxelCell:
    solid: np.ndarray  # bool, indexed [z, y, x] (or [y, x])
    family_id: str = ""
    isovalue: float = float("nan")
    form: FamilyForm | None = None
    field: np.ndarray | None = field(default=None, repr=False)

    @property
    def resolution(self):
        return self.solid.shape[0]

    @property
    def density(self):
        return np.count_nonzero(self.solid) / self.solid.size


@dataclass
class IsovalueSolution:
    t: float
    density: float
    pinned: bool


@dataclass
class Feasibility:
    feasible: bool
    reasons: list
    solid_components: int
    void_components: int


@dataclass
class Family:
    family_id: str
    expr: LevelSetExpr
    form: FamilyForm
    feasible_range: tuple | None = None
    retained: bool = False
    samples: list = field(default_factory=list)


def signed_gap(field, form, t):
    """Level-set function that is <= 0 exactly on solid voxels."""
    form = FamilyForm(form)
    if form is FamilyForm.LE:
        return field - t
    if form is FamilyForm.GE:
        return t - field
    return field * field - t * t


def solid_mask(field, form, t):
    form = FamilyForm(form)
    if form is FamilyForm.LE:
        return field <= t
    if form is FamilyForm.GE:
        return field >= t
    return field * field <= t * t


def solidify(field, form, t, family_id=""):
    field = np.asarray(field, dtype=float)
    return VoxelCell(solid_mask(field, form, t), family_id, float(t), FamilyForm(form), field)


def _density(field, form, t):
    return np.count_nonzero(solid_mask(field, form, t)) / field.size


def density_of(expr, form, t, n):
    return _density(evaluate_grid(expr, n, dims=3), form, t)


def isovalue_bracket(field, form):
    form = FamilyForm(form)
    if form is FamilyForm.SQ:
        return 0.0, float(np.max(np.abs(field)))
    return float(np.min(field)), float(np.max(field))


def solve_isovalue_field(field, form, target, tol=1e-3, max_iter=200):
    """Bisection for ``t`` with ``|density(t) - target| <= tol``.

    Density is monotone in ``t`` for every form (decreasing for GE).  When
    no field value lies strictly inside the final bracket the density jump
    straddles the target; the nearer end is returned with ``pinned=True``.
    """
    if not 0.0 < target < 1.0:
        raise IsovalueError(f"target density must lie in (0, 1), got {target}")
    form = FamilyForm(form)
    lo, hi = isovalue_bracket(field, form)
    rho_lo, rho_hi = _density(field, form, lo), _density(field, form, hi)
    if form is FamilyForm.GE:
        # density decreases with t; work with the reversed bracket
        achievable = (rho_hi, rho_lo)
    else:
        achievable = (rho_lo, rho_hi)
    if target < achievable[0] - tol or target > achievable[1] + tol:
        raise IsovalueError(
            f"target density {target} outside achievable range "
            f"[{achievable[0]:.4f}, {achievable[1]:.4f}]"
        )
    for t, rho in ((lo, rho_lo), (hi, rho_hi)):
        if abs(rho - target) <= tol:
            return IsovalueSolution(t, rho, False)

    values = field.ravel()
    if form is FamilyForm.SQ:
        values = np.abs(values)
    increasing = form is not FamilyForm.GE
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        rho = _density(field, form, mid)
        if abs(rho - target) <= tol:
            return IsovalueSolution(mid, rho, False)
        if (rho < target) == increasing:
            lo, rho_lo = mid, rho
        else:
            hi, rho_hi = mid, rho
        if not np.any((values > lo) & (values < hi)) or not lo < 0.5 * (lo + hi) < hi:
            break
    if abs(rho_lo - target) <= abs(rho_hi - target):
        return IsovalueSolution(lo, rho_lo, True)
    return IsovalueSolution(hi, rho_hi, True)


def solve_isovalue(expr, form, target, n, tol=1e-3):
    return solve_isovalue_field(evaluate_grid(expr, n, dims=3), form, target, tol)


# --- feasibility ---------------------------------------------------------------

def feasibility(cell):
    """Periodic connectivity check.

    Solid must be a single 26-connected component that connects to its own
    periodic images along every axis, and void must be a single 6-connected
    component (both with wraparound).  A cell without void passes the void
    clause vacuously.
    """
    solid = cell.solid if isinstance(cell, VoxelCell) else np.asarray(cell, dtype=bool)
    _, n_solid = label_periodic(solid, "full")
    _, n_void = label_periodic(~solid, "face")
    reasons = []
    if n_solid == 0:
        reasons.append("no solid")
    elif n_solid > 1:
        reasons.append("disconnected solid")
    elif not percolates(solid, "full"):
        reasons.append("non-percolating solid")
    if n_void > 1:
        reasons.append("internal void")
    return Feasibility(not reasons, reasons, n_solid, n_void)


def screen_scan(densities, feasible_flags, min_width=MIN_FEASIBLE_WIDTH):
    """Longest contiguous feasible run of a density scan.

    Returns ``((rho_min, rho_max) | None, retained)``.  Families are kept
    only when ``rho_max - rho_min >= min_width``.
    """
    densities = np.asarray(densities, dtype=float)
    flags = np.asarray(feasible_flags, dtype=bool)
    best = None
    start = None
    for i, ok in enumerate(list(flags) + [False]):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            if best is None or (i - start) > (best[1] - best[0] + 1):
                best = (start, i - 1)
            start = None
    if best is None:
        return None, False
    lo, hi = float(densities[best[0]]), float(densities[best[1]])
    # densities sit on a decimal grid; compare widths without float drift
    retained = round(hi - lo, 9) >= min_width
    return (lo, hi), retained


def scan_densities(step=0.01):
    count = int(round(1.0 / step))
    return np.round(np.arange(1, count) * step, 10)


def feasible_range(expr, form, n, rho_step=0.01, tol=1e-3, field=None):
    """Scan densities on a ``rho_step`` grid and screen the family.

    Returns ``((rho_min, rho_max) | None, retained)``.
    """
    if field is None:
        field = evaluate_grid(expr, n, dims=3)
    densities = scan_densities(rho_step)
    flags = []
    for rho in densities:
        try:
            sol = solve_isovalue_field(field, form, rho, tol)
        except IsovalueError:
            flags.append(False)
            continue
        flags.append(feasibility(solid_mask(field, form, sol.t)).feasible)
    return screen_scan(densities, flags)


def screen_family(entry, n, rho_step=0.01, tol=1e-3):
    family = Family(entry.family_id, entry.expr, entry.form)
    family.feasible_range, family.retained = feasible_range(
        entry.expr, entry.form, n, rho_step, tol
    )
    logger.debug("family %s range=%s retained=%s", entry.family_id,
                 family.feasible_range, family.retained)
    return family


def sample_family(family, count=100, n=64, tol=1e-3):
    """Cells at ``count`` densities evenly spread over the feasible range.

    Small disconnected solid features are removed by keeping the largest
    periodic component, so the final density can differ slightly from the
    target.
    """
    if family.feasible_range is None:
        raise ValueError(f"family {family.family_id} has no feasible range")
    field = evaluate_grid(family.expr, n, dims=3)
    lo, hi = family.feasible_range
    cells = []
    for rho in np.linspace(lo, hi, count):
        sol = solve_isovalue_field(field, family.form, float(rho), tol)
        cell = solidify(field, family.form, sol.t, family.family_id)
        cell.solid = largest_component(cell.solid, "full")
        cells.append(cell)
    family.samples = cells
    return cells


# --- surface points ------------------------------------------------------------

def surface_candidates(cell):
    """Points on voxel-centre edges whose endpoints differ in solidity.

    Positions are linearly interpolated on the signed level-set gap when the
    cell carries its field, otherwise edge midpoints are used.
    """
    solid = cell.solid
    n = solid.shape[0]
    ndim = solid.ndim
    gap = None
    if cell.field is not None and cell.form is not None:
        gap = signed_gap(cell.field, cell.form, cell.isovalue)
    idx = np.indices(solid.shape).reshape(ndim, -1).T  # columns: z, y, x
    out = []
    for axis in range(ndim):
        nb = np.roll(solid, -1, axis=axis)
        cross = (solid != nb).ravel()
        if not cross.any():
            continue
        base = (idx[cross] + 0.5) / n
        if gap is not None:
            g0 = gap.ravel()[cross]
            g1 = np.roll(gap, -1, axis=axis).ravel()[cross]
            denom = g0 - g1
            with np.errstate(divide="ignore", invalid="ignore"):
                s = np.where(denom != 0, g0 / denom, 0.5)
            s = np.clip(s, 0.0, 1.0)
        else:
            s = np.full(base.shape[0], 0.5)
        base[:, axis] += s / n
        out.append(base)
    pts = np.concatenate(out, axis=0) if out else np.empty((0, ndim))
    pts = np.mod(pts, 1.0)
    return pts[:, ::-1].copy()  # reorder columns to (x, y, z)


def extract_surface_points(cell, count=DEFAULT_POINTS, seed=0):
    """Exactly ``count`` surface points, resampled deterministically from ``seed``."""
    solid = cell.solid
    if solid.all() or not solid.any():
        raise ValueError("cell is uniformly solid or void; it has no surface")
    cand = surface_candidates(cell)
    rng = np.random.default_rng(seed)
    replace = len(cand) < count
    pick = rng.choice(len(cand), size=count, replace=replace)
    return cand[pick]


# --- geometric property surrogate ----------------------------------------------

def geometric_properties(cell):
    """Cheap property vector for 3D cells.

    ``[density, s_x, s_y, s_z, surface_density]`` where ``s_axis`` is the
    harmonic mean of the solid area fraction of slices normal to that axis
    (a series-coupling stiffness estimate for unit base modulus) and
    ``surface_density`` is the fraction of voxel faces crossing the surface.
    """
    solid = cell.solid
    rho = np.count_nonzero(solid) / solid.size
    out = [rho]
    # solid is [z, y, x]; report in x, y, z order
    for axis in (2, 1, 0):
        other = tuple(a for a in range(solid.ndim) if a != axis)
        frac = solid.mean(axis=other)
        out.append(0.0 if np.any(frac == 0) else float(len(frac) / np.sum(1.0 / frac)))
    faces = sum(np.count_nonzero(solid != np.roll(solid, -1, axis=a)) for a in range(solid.ndim))
    out.append(faces / (solid.ndim * solid.size))
    return np.array(out)
