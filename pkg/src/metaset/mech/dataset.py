"""Synthetic 2D unit-cell datasets drawn from level-set families."""
from __future__ import annotations

import numpy as np

from ..expr import evaluate_grid, load_catalog, starter_catalog_path
from ..isogen import IsovalueError, solid_mask, solve_isovalue_field
from ..metrics import UnitCell2D
from ..topology import count_components
from .homogenize import homogenize2d


class DatasetError(RuntimeError):
    pass


def family_weights(count, skew=1.0):
    """Zipf-like family frequencies: the r-th family has weight ``1 / r**skew``."""
    w = 1.0 / np.arange(1, count + 1) ** skew
    return w / w.sum()


def gen2d_dataset(catalog_2d=None, count=200, vf_min=0.70, n=50, seed=0,
                  vf_max=0.95, skew=1.0, max_attempts=50, homogenize=True):
    """Random high-density cells from 2D level-set families.

    Each cell picks a family (skewed frequencies, like real datasets that
    over-represent a few shapes), a target volume fraction uniform in
    ``[vf_min, vf_max]`` and a random periodic shift.  Cells whose solid is
    not a single periodic 8-connected component are redrawn.
    """
    if catalog_2d is None:
        catalog_2d = load_catalog(starter_catalog_path(2), dims=2)
    entries = list(catalog_2d)
    if not entries:
        raise DatasetError("no families")
    rng = np.random.default_rng(seed)
    fields = [evaluate_grid(e.expr, n, dims=2) for e in entries]
    probs = family_weights(len(entries), skew)
    cells = []
    for k in range(count):
        for _ in range(max_attempts):
            fam = int(rng.choice(len(entries), p=probs))
            target = rng.uniform(vf_min + 2e-3, vf_max)
            shift = rng.integers(0, n, size=2)
            try:
                sol = solve_isovalue_field(fields[fam], entries[fam].form, target, tol=1e-3)
            except IsovalueError:
                continue
            if abs(sol.density - target) > 1e-3:
                continue  # pinned away from the target
            solid = np.roll(solid_mask(fields[fam], entries[fam].form, sol.t), shift, axis=(0, 1))
            if solid.mean() < vf_min or count_components(solid, "full") != 1:
                continue
            props = homogenize2d(solid).vector() if homogenize else None
            cells.append(UnitCell2D(solid, props, f"c{k:05d}:{entries[fam].family_id}"))
            break
        else:
            raise DatasetError(f"cell {k}: no valid draw after {max_attempts} attempts")
    return cells


def family_of(cell):
    return cell.cell_id.split(":", 1)[1] if ":" in cell.cell_id else cell.cell_id
