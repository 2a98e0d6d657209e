"""Repeated GA runs over candidate subsets of a cell dataset."""
from __future__ import annotations

import csv
import time
from dataclasses import replace

import numpy as np

from ..seeds import derive_seed
from .ga import GAConfig, ga_design

REPORT_FIELDS = ("subset", "seed", "mse", "r_dc", "n_dc", "generations", "wall_ms")


def experiment_mbb(problem, dataset, subsets, runs=10, seed=0, config=None):
    """Run the GA ``runs`` times on every named subset.

    ``subsets`` maps a name to dataset indices, or to a callable
    ``f(run_seed) -> indices`` for subsets redrawn per run (random
    baselines).  Run ``i`` of every subset uses the same GA seed.
    """
    base = config or GAConfig()
    rows = []
    for r in range(runs):
        run_seed = derive_seed(seed, "design", r)
        for name, spec in subsets.items():
            idx = list(spec(run_seed) if callable(spec) else spec)
            cells = [dataset[i] for i in idx]
            t0 = time.perf_counter()
            res = ga_design(problem, cells, replace(base, seed=run_seed))
            wall = (time.perf_counter() - t0) * 1e3
            rows.append({
                "subset": name, "seed": run_seed, "mse": res.mse, "r_dc": res.r_dc,
                "n_dc": res.best.n_dc, "generations": res.generations, "wall_ms": wall,
                "genes": [idx[g] for g in res.best.genes],
            })
    return rows


def summarize(rows):
    """Mean and minimum MSE and r_dc per subset, in first-seen order."""
    out = {}
    for name in dict.fromkeys(r["subset"] for r in rows):
        sel = [r for r in rows if r["subset"] == name]
        mse = np.array([r["mse"] for r in sel])
        rdc = np.array([r["r_dc"] for r in sel])
        out[name] = {"runs": len(sel), "mse_mean": float(mse.mean()), "mse_min": float(mse.min()),
                     "r_dc_mean": float(rdc.mean()), "r_dc_min": float(rdc.min()),
                     "feasible": int(sum(r["n_dc"] == 0 for r in sel))}
    return out


def format_table(summary):
    names = list(summary)
    lines = ["metric      " + "".join(f"{n:>12}" for n in names)]
    for key, label in (("mse_mean", "MSE mean"), ("mse_min", "MSE min"),
                       ("r_dc_mean", "r_dc mean"), ("r_dc_min", "r_dc min")):
        lines.append(f"{label:<12}" + "".join(f"{summary[n][key]:>12.4g}" for n in names))
    return "\n".join(lines)


def write_report(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (repr(r[k]) if isinstance(r[k], float) else r[k]) for k in REPORT_FIELDS})
